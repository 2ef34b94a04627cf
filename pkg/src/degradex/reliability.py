"""Monte Carlo first-passage lifetimes and reliability under stress profiles.

Piecewise-constant stress is handled by the equivalent-age rule: when the
stress switches, the deterministic drift continues from the virtual age at
which the new rate reaches the drift already accumulated. The drift of a
path is therefore ``a * g(t)`` with a deterministic ``g`` shared by all paths,
and Brownian motion accumulates in real time regardless of switches.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .model import ModelParams, ModelVariant, StressNormalization, StressVector, rate

HOURS_PER_YEAR = 8760.0
HOURS_PER_MONTH = HOURS_PER_YEAR / 12.0

# paths are generated and scanned in blocks of at most this many, and of at
# most _BLOCK_VALUES grid values, to bound memory
_BLOCK = 256
_BLOCK_VALUES = 4_000_000


@dataclass(frozen=True)
class Segment:
    start: float
    end: float
    stress: StressVector


@dataclass(frozen=True)
class StressProfile:
    """Contiguous piecewise-constant stress schedule starting at t = 0 h."""

    segments: tuple

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ValueError("profile needs at least one segment")
        if segs[0].start != 0.0:
            raise ValueError("profile must start at t = 0")
        for i, s in enumerate(segs):
            if not (np.isfinite(s.end) and s.end > s.start):
                raise ValueError(f"segment {i}: end must be finite and > start")
            if i and s.start != segs[i - 1].end:
                raise ValueError(f"segment {i} does not start where segment {i - 1} ends")

    @classmethod
    def constant(cls, stress: StressVector, horizon: float) -> "StressProfile":
        return cls((Segment(0.0, float(horizon), stress),))

    @classmethod
    def from_durations(cls, items) -> "StressProfile":
        """Build from ``[(duration_h, StressVector), ...]``."""
        segs, t = [], 0.0
        for dur, stress in items:
            segs.append(Segment(t, t + float(dur), stress))
            t += float(dur)
        return cls(tuple(segs))

    def repeated(self, cycles: int) -> "StressProfile":
        """The same schedule laid end to end ``cycles`` times."""
        if cycles < 1:
            raise ValueError("cycles must be >= 1")
        period = self.horizon
        segs = []
        for c in range(cycles):
            off = c * period
            segs.extend(Segment(s.start + off, s.end + off, s.stress) for s in self.segments)
        return StressProfile(tuple(segs))

    @property
    def horizon(self) -> float:
        return self.segments[-1].end

    @property
    def boundaries(self) -> np.ndarray:
        return np.array([s.end for s in self.segments[:-1]])

    def covering(self, horizon: float) -> "StressProfile":
        """Extend the last segment if the profile ends before ``horizon``."""
        if horizon <= self.horizon:
            return self
        last = self.segments[-1]
        return StressProfile(self.segments[:-1] + (Segment(last.start, float(horizon), last.stress),))


def storage_profile(warehouse: StressVector, logistics, years: int = 1, logistics_start_month: int = 7) -> StressProfile:
    """Yearly storage schedule: warehouse conditions all year except one
    month per ``logistics`` entry, starting at ``logistics_start_month``
    (1-based). Repeated for ``years`` years.
    """
    logistics = list(logistics)
    if not 1 <= logistics_start_month <= 13 - len(logistics):
        raise ValueError("logistics months must fall inside the year")
    before = (logistics_start_month - 1) * HOURS_PER_MONTH
    after = (12 - logistics_start_month + 1 - len(logistics)) * HOURS_PER_MONTH
    items = []
    if before > 0:
        items.append((before, warehouse))
    items.extend((HOURS_PER_MONTH, s) for s in logistics)
    if after > 0:
        items.append((after, warehouse))
    return StressProfile.from_durations(items).repeated(years)


@dataclass(frozen=True)
class MCConfig:
    horizon: float
    threshold: float
    paths: int = 10000
    time_step: float = 12.0
    seed: int = 0
    include_measurement_noise: bool = False

    def __post_init__(self):
        if self.paths < 1:
            raise ValueError("paths must be >= 1")
        if not self.time_step > 0:
            raise ValueError("time_step must be > 0")
        if not self.horizon >= self.time_step:
            raise ValueError("horizon must be >= time_step")
        if not np.isfinite(self.threshold):
            raise ValueError("threshold must be finite")


@dataclass
class LifetimeSample:
    """First-passage times; censored paths carry ``horizon`` and a flag."""

    lifetimes: np.ndarray
    censored: np.ndarray
    horizon: float

    @property
    def n_censored(self) -> int:
        return int(self.censored.sum())

    @property
    def n_crossed(self) -> int:
        return int(self.lifetimes.size - self.censored.sum())

    @property
    def censored_fraction(self) -> float:
        return float(self.censored.mean())


@dataclass
class ReliabilityCurve:
    grid: np.ndarray
    values: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def rows(self):
        """``(t_h, value[, lower, upper])`` tuples for CSV export."""
        if self.lower is None:
            return [(float(t), float(v)) for t, v in zip(self.grid, self.values)]
        return [
            (float(t), float(v), float(lo), float(hi))
            for t, v, lo, hi in zip(self.grid, self.values, self.lower, self.upper)
        ]


def simulation_grid(profile: StressProfile, mc: MCConfig) -> np.ndarray:
    """Uniform steps on [0, horizon] plus every stress switch inside it."""
    n = int(np.floor(mc.horizon / mc.time_step + 1e-9))
    t = mc.time_step * np.arange(n + 1, dtype=float)
    b = profile.boundaries
    t = np.union1d(t, b[b < mc.horizon])
    if t[-1] < mc.horizon:
        t = np.append(t, mc.horizon)
    return t


def drift_factor(params: ModelParams, variant, profile: StressProfile, norm: StressNormalization, times) -> np.ndarray:
    """Deterministic drift per unit of ``a`` at ``times``, i.e. ``e * tau^beta``
    with the virtual age ``tau`` carried across stress switches.
    """
    variant = ModelVariant.parse(variant)
    p = variant.pin(params, norm)
    t = np.asarray(times, dtype=float)
    if np.any(t < 0):
        raise ValueError("times must be >= 0")
    profile = profile.covering(float(t.max()) if t.size else 0.0)
    out = np.empty_like(t)
    tau0, e_prev = 0.0, None
    for i, seg in enumerate(profile.segments):
        e = rate(p, variant, seg.stress, norm)
        if e_prev is not None and tau0 > 0:
            tau0 = tau0 * (e_prev / e) ** (1.0 / p.beta)
        last = i == len(profile.segments) - 1
        inside = (t >= seg.start) & ((t < seg.end) | (last & (t <= seg.end)))
        out[inside] = e * (tau0 + (t[inside] - seg.start)) ** p.beta
        tau0 += seg.end - seg.start
        e_prev = e
    return out


def _path_draws(p: ModelParams, rng, n_steps: int, with_noise: bool):
    y0 = rng.normal(p.mu_y0, p.sigma_y0)
    a = rng.normal(p.mu_a, p.sigma_a)
    z = rng.standard_normal(n_steps - 1)
    eps = rng.standard_normal(n_steps) * p.sigma_eps if with_noise else None
    return y0, a, z, eps


def _path_rng(mc: MCConfig, path_seed: int):
    return np.random.default_rng(np.random.SeedSequence([int(mc.seed), int(path_seed)]))


def simulate_path(params: ModelParams, variant, profile: StressProfile, norm: StressNormalization, mc: MCConfig, path_seed: int):
    """One degradation path on the simulation grid; returns ``(times, values)``.

    Path ``q`` of :func:`reliability_curve` is ``simulate_path(..., path_seed=q)``.
    """
    variant = ModelVariant.parse(variant)
    p = variant.pin(params, norm)
    t = simulation_grid(profile, mc)
    g = drift_factor(p, variant, profile, norm, t)
    y0, a, z, eps = _path_draws(p, _path_rng(mc, path_seed), t.size, mc.include_measurement_noise)
    b = np.concatenate(([0.0], np.cumsum(p.sigma_bm * np.sqrt(np.diff(t)) * z)))
    y = y0 + a * g + b
    if eps is not None:
        y = y + eps
    return t, y


def lifetime(times, values, threshold: float):
    """First passage of ``threshold`` by a sampled path, linearly interpolated
    inside the crossing step. Returns ``(hours, censored)``; a path starting
    at or above the threshold fails at the first grid point.
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    above = np.nonzero(y >= threshold)[0]
    if above.size == 0:
        return float(t[-1]), True
    k = int(above[0])
    if k == 0:
        return float(t[0]), False
    return float(t[k - 1] + (t[k] - t[k - 1]) * (threshold - y[k - 1]) / (y[k] - y[k - 1])), False


def simulate_lifetimes(
    params: ModelParams, variant, profile: StressProfile, norm: StressNormalization, mc: MCConfig, use_numba=None
) -> LifetimeSample:
    variant = ModelVariant.parse(variant)
    p = variant.pin(params, norm)
    t = simulation_grid(profile, mc)
    g = drift_factor(p, variant, profile, norm, t)
    K = t.size
    life = np.empty(mc.paths)
    cens = np.empty(mc.paths, dtype=bool)
    noise_cols = K if mc.include_measurement_noise else 0
    block = max(1, min(_BLOCK, _BLOCK_VALUES // K))
    for start in range(0, mc.paths, block):
        stop = min(start + block, mc.paths)
        B = stop - start
        y0, a = np.empty(B), np.empty(B)
        z = np.empty((B, K - 1))
        eps = np.empty((B, noise_cols))
        for i in range(B):
            y0[i], a[i], z[i], e = _path_draws(p, _path_rng(mc, start + i), K, mc.include_measurement_noise)
            if e is not None:
                eps[i] = e
        life[start:stop], cens[start:stop] = kernels.first_passage(
            y0, a, g, t, z, p.sigma_bm, eps, mc.threshold, use_numba=use_numba
        )
    return LifetimeSample(life, cens, float(t[-1]))


def curve_from_lifetimes(sample: LifetimeSample, grid) -> np.ndarray:
    """``R(t) = 1 - #{crossed, L <= t} / P``; censored paths survive."""
    grid = np.asarray(grid, dtype=float)
    crossed = np.sort(sample.lifetimes[~sample.censored])
    failed = np.searchsorted(crossed, grid, side="right")
    return 1.0 - failed / sample.lifetimes.size


def reliability_curve(
    params: ModelParams, variant, profile: StressProfile, norm: StressNormalization, mc: MCConfig, grid=None, use_numba=None
):
    """Empirical reliability on ``grid`` (default: the simulation grid).

    Returns ``(ReliabilityCurve, LifetimeSample)``.
    """
    sample = simulate_lifetimes(params, variant, profile, norm, mc, use_numba=use_numba)
    grid = simulation_grid(profile, mc) if grid is None else np.asarray(grid, dtype=float)
    curve = ReliabilityCurve(grid, curve_from_lifetimes(sample, grid), meta={"censored_fraction": sample.censored_fraction})
    return curve, sample


def reliability_bands(
    param_sets,
    variant,
    profile: StressProfile,
    norm: StressNormalization,
    mc: MCConfig,
    confidence: float = 0.90,
    point_params: ModelParams | None = None,
    grid=None,
    use_numba=None,
) -> ReliabilityCurve:
    """Pointwise quantile bands of R(t) across parameter sets.

    Every set reuses the same path seeds, so band width reflects parameter
    uncertainty rather than Monte Carlo noise. The central curve comes from
    ``point_params`` when given, else the pointwise median.
    """
    param_sets = list(param_sets)
    if len(param_sets) < 2:
        raise ValueError("need at least 2 parameter sets")
    if not 0 < confidence <= 1:
        raise ValueError("confidence must be in (0, 1]")
    grid = simulation_grid(profile, mc) if grid is None else np.asarray(grid, dtype=float)
    curves = np.array([reliability_curve(ps, variant, profile, norm, mc, grid, use_numba)[0].values for ps in param_sets])
    lower = np.quantile(curves, (1 - confidence) / 2, axis=0)
    upper = np.quantile(curves, (1 + confidence) / 2, axis=0)
    if point_params is not None:
        center = reliability_curve(point_params, variant, profile, norm, mc, grid, use_numba)[0].values
    else:
        center = np.median(curves, axis=0)
    return ReliabilityCurve(grid, center, lower, upper, meta={"confidence": confidence, "sets": len(param_sets)})
