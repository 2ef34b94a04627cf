"""Model-comparison metrics and the leave-one-level-out harnesses."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .likelihood import total_loglik
from .model import DegradationDataset, ModelParams, ModelVariant, StressNormalization, StressVector, mean_trajectory
from .optimize import Bounds, OptimizerConfig, fit
from .reliability import MCConfig, StressProfile, curve_from_lifetimes, simulate_lifetimes

DENSITY_FLOOR = 1e-12
DEFAULT_GRID_SIZE = 500


@dataclass(frozen=True)
class MetricReport:
    rmse: float
    l_max: float
    aic: float
    n_p: int

    @classmethod
    def build(cls, rmse_value: float, l_max: float, n_p: int) -> "MetricReport":
        return cls(float(rmse_value), float(l_max), aic(l_max, n_p), int(n_p))

    def to_dict(self) -> dict:
        return {"rmse": self.rmse, "l_max": self.l_max, "aic": self.aic, "n_p": self.n_p}


@dataclass(frozen=True)
class DivergenceReport:
    kld: float
    cmd: float
    grid_size: int = DEFAULT_GRID_SIZE
    horizon: float = 0.0
    censored_fraction_ref: float = 0.0
    censored_fraction_alt: float = 0.0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def aic(l_max: float, n_p: int) -> float:
    if n_p < 1:
        raise ValueError("n_p must be >= 1")
    return -2.0 * float(l_max) + 2.0 * int(n_p)


def _level_means(level):
    """Common measurement times of a level and the cross-unit mean there."""
    common = level.units[0].times
    for u in level.units[1:]:
        common = np.intersect1d(common, u.times)
    if common.size == 0:
        raise ValueError(f"level {level.level_id!r}: units share no measurement time")
    rows = [u.values[np.searchsorted(u.times, common)] for u in level.units]
    return common, np.mean(rows, axis=0)


def rmse(dataset: DegradationDataset, params: ModelParams, variant, norm: StressNormalization) -> float:
    """Root mean square gap between the predicted mean path and the
    cross-unit average reading, pooled over levels and common times.
    """
    sq, count = 0.0, 0
    for level in dataset.levels:
        t, ybar = _level_means(level)
        pred = mean_trajectory(params, variant, level.stress, norm, t)
        sq += float(np.sum((ybar - pred) ** 2))
        count += t.size
    return float(np.sqrt(sq / count))


def _check_pair(a, b, name):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"{name}: inputs must be 1-d arrays on the same grid")
    return a, b


def kld(f_ref, f_alt, floor: float = DENSITY_FLOOR) -> float:
    """Discrete Kullback-Leibler divergence summed over grid values; ``floor``
    is added to every value first so empty bins stay finite.
    """
    p, q = _check_pair(f_ref, f_alt, "kld")
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("kld: densities must be non-negative")
    p = p + floor
    q = q + floor
    return float(np.sum(p * np.log(p / q)))


def cmd(r_ref, r_alt) -> float:
    """Sum of squared pointwise gaps between two reliability curves."""
    a, b = _check_pair(r_ref, r_alt, "cmd")
    return float(np.sum((a - b) ** 2))


def lifetime_density(sample, horizon: float, k: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    """Fraction of paths failing in each of ``k`` equal bins on [0, horizon].

    Censored paths (the overflow bin) are left out, so the values sum to the
    crossed fraction.
    """
    edges = np.linspace(0.0, horizon, k + 1)
    life = sample.lifetimes[~sample.censored]
    counts, _ = np.histogram(life[life <= horizon], bins=edges)
    return counts / sample.lifetimes.size


def _fit_all(dataset, variants, norm, bounds, opt_config):
    return {v: fit(dataset, v, norm, bounds, opt_config) for v in variants}


def loso_extrapolation(
    dataset: DegradationDataset,
    variants,
    norm: StressNormalization,
    bounds: Bounds | None = None,
    opt_config: OptimizerConfig | None = None,
    return_fits: bool = False,
):
    """Fit on all levels but one and score the held-out level.

    Returns ``{(test_index, variant_value): {"rmse", "l_max"}}``; with
    ``return_fits`` also the fitted results keyed the same way.
    """
    if dataset.n_levels < 2:
        raise ValueError("need at least 2 stress levels")
    variants = [ModelVariant.parse(v) for v in variants]
    report, fits = {}, {}
    for li in range(dataset.n_levels):
        train = dataset.without_level(li)
        test = dataset.subset([li])
        for v in variants:
            res = fit(train, v, norm, bounds, opt_config)
            fits[(li, v.value)] = res
            report[(li, v.value)] = {
                "rmse": rmse(test, res.params, v, norm),
                "l_max": total_loglik(res.params, v, test, norm),
            }
    return (report, fits) if return_fits else report


#: Upper bound on simulation steps during the horizon search; longer horizons
#: coarsen the time step instead of growing the grid.
MAX_STEPS = 20000


def _coarsened(mc: MCConfig, horizon: float) -> MCConfig:
    return replace(mc, horizon=horizon, time_step=max(mc.time_step, horizon / MAX_STEPS))


def _horizon_for(params, variant, stress, norm, mc, max_doublings: int = 40):
    """Double the horizon until the reference reliability drops below 0.001.

    Also stops once R has plateaued (below 1 and falling by less than 1e-4
    over a doubling), which happens when some paths never fail, e.g. a
    negative rate coefficient drawn for them.
    """
    h, prev = mc.horizon, 1.0
    for _ in range(max_doublings):
        cfg = _coarsened(mc, h)
        sample = simulate_lifetimes(params, variant, StressProfile.constant(stress, h), norm, cfg)
        r = curve_from_lifetimes(sample, [h])[0]
        if r < 1e-3 or (r < 1.0 and prev - r < 1e-4):
            return h, sample
        prev = r
        h *= 2.0
    return h / 2.0, sample


def divergence(
    ref_params: ModelParams,
    alt_params: ModelParams,
    variant,
    stress: StressVector,
    norm: StressNormalization,
    mc: MCConfig,
    k: int = DEFAULT_GRID_SIZE,
    horizon: float | None = None,
    ref_sample=None,
) -> DivergenceReport:
    """KLD of lifetime densities and CMD of reliability curves at ``stress``.

    Both models share the path seeds of ``mc``. Without an explicit horizon,
    it is chosen by doubling until the reference reliability is below 0.001.
    The time step grows with the horizon so at most ``MAX_STEPS`` steps are
    simulated.
    """
    ref = ref_sample
    if horizon is None:
        horizon, ref = _horizon_for(ref_params, variant, stress, norm, mc)
    cfg = _coarsened(mc, horizon)
    prof = StressProfile.constant(stress, horizon)
    if ref is None:
        ref = simulate_lifetimes(ref_params, variant, prof, norm, cfg)
    alt = simulate_lifetimes(alt_params, variant, prof, norm, cfg)
    grid = np.linspace(0.0, horizon, k)
    return DivergenceReport(
        kld=kld(lifetime_density(ref, horizon, k), lifetime_density(alt, horizon, k)),
        cmd=cmd(curve_from_lifetimes(ref, grid), curve_from_lifetimes(alt, grid)),
        grid_size=k,
        horizon=float(horizon),
        censored_fraction_ref=ref.censored_fraction,
        censored_fraction_alt=alt.censored_fraction,
    )


def robustness(
    dataset: DegradationDataset,
    variants,
    norm: StressNormalization,
    bounds: Bounds | None = None,
    opt_config: OptimizerConfig | None = None,
    prediction_stress: StressVector | None = None,
    mc: MCConfig | None = None,
    k: int = DEFAULT_GRID_SIZE,
    loso_fits: dict | None = None,
    full_fits: dict | None = None,
) -> dict:
    """Divergence between the all-data fit and each leave-one-level-out fit,
    both predicted at ``prediction_stress``.

    ``mc.horizon`` is the starting horizon of the doubling search. Fits can be
    passed in (e.g. from :func:`loso_extrapolation`) to avoid refitting.
    Returns ``{(test_index, variant_value): DivergenceReport}``.
    """
    if dataset.n_levels < 2:
        raise ValueError("need at least 2 stress levels")
    if prediction_stress is None or mc is None:
        raise ValueError("prediction_stress and mc are required")
    variants = [ModelVariant.parse(v) for v in variants]
    full = full_fits or _fit_all(dataset, variants, norm, bounds, opt_config)
    out = {}
    for v in variants:
        ref_params = full[v].params
        horizon, ref = _horizon_for(ref_params, v, prediction_stress, norm, mc)
        for li in range(dataset.n_levels):
            key = (li, v.value)
            if loso_fits is not None and key in loso_fits:
                alt = loso_fits[key]
            else:
                alt = fit(dataset.without_level(li), v, norm, bounds, opt_config)
            out[key] = divergence(ref_params, alt.params, v, prediction_stress, norm, mc, k, horizon, ref)
    return out
