"""Bounded maximum-likelihood fitting.

Two optimizers share one interface:

* ``rime_style`` (default): a RIME-type population search. Soft-rime moves
  scatter individuals around the incumbent with a decaying, oscillating
  attachment factor; hard-rime puncture copies coordinates of the incumbent
  with a rank-dependent probability; a best-guided differential move
  strengthens exploitation; selection is greedy. An optional local
  Nelder-Mead polish refines the final incumbent.
* ``nelder_mead``: the classical simplex method from a random start, made
  bounded by a sine reparametrization of the box.

Both work in the unit cube of the active parameters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .likelihood import PanelLikelihood
from .model import (
    KELVIN_OFFSET,
    PARAM_NAMES,
    DegradationDataset,
    ModelParams,
    ModelVariant,
    StressNormalization,
)

ALGORITHMS = ("rime_style", "nelder_mead")


class OptimizationError(RuntimeError):
    """No feasible point was found."""


_DEFAULT_BOX = {
    "mu_y0": (8.0, 10.0),
    "sigma_y0": (0.0, 1.0),
    "mu_a": (0.0, 10.0),
    "sigma_a": (0.0, 1.0),
    "alpha1": (-10.0, 10.0),
    "alpha2": (-10.0, 10.0),
    "alpha3": (-10.0, 10.0),
    "beta": (0.0, 2.0),
    "sigma_bm": (0.0, 1.5),
    "sigma_eps": (0.0, 1.0),
    "t_threshold": (40.0 + KELVIN_OFFSET, 80.0 + KELVIN_OFFSET),
}


@dataclass(frozen=True)
class Bounds:
    """Search box per parameter name (threshold in kelvin)."""

    box: dict = field(default_factory=lambda: dict(_DEFAULT_BOX))

    def __post_init__(self):
        for name, (lo, hi) in self.box.items():
            if name not in PARAM_NAMES:
                raise ValueError(f"unknown parameter {name!r} in bounds")
            if not lo < hi:
                raise ValueError(f"bounds for {name}: lower must be < upper")

    @classmethod
    def default(cls) -> "Bounds":
        return cls()

    def updated(self, **changes) -> "Bounds":
        box = dict(self.box)
        box.update(changes)
        return Bounds(box)

    def active(self, variant) -> tuple:
        variant = ModelVariant.parse(variant)
        names = variant.active_mask
        missing = [n for n in names if n not in self.box]
        if missing:
            raise ValueError(f"bounds missing for active parameter(s) {missing}")
        lo = np.array([self.box[n][0] for n in names], dtype=float)
        hi = np.array([self.box[n][1] for n in names], dtype=float)
        return names, lo, hi

    def to_dict(self) -> dict:
        return {k: [float(v[0]), float(v[1])] for k, v in self.box.items()}


@dataclass(frozen=True)
class OptimizerConfig:
    population: int = 20
    max_iterations: int = 50000
    seed: int = 0
    algorithm: str = "rime_style"
    # stop once the best value improved by less than ``tol`` over ``patience`` iterations
    tol: float | None = None
    patience: int = 500
    # independent restarts sharing the iteration budget; the best one wins
    restarts: int = 4
    polish: bool = True
    polish_evaluations: int = 3000
    nm_max_evaluations: int = 1_000_000
    nm_xtol: float = 1e-10

    def __post_init__(self):
        if self.population < 4:
            raise ValueError("population must be >= 4")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 1 <= self.restarts <= self.max_iterations:
            raise ValueError("restarts must be in [1, max_iterations]")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")

    def with_seed(self, seed: int) -> "OptimizerConfig":
        return _replace(self, seed=int(seed))


def _replace(cfg, **kw):
    from dataclasses import replace

    return replace(cfg, **kw)


@dataclass
class FitResult:
    params: ModelParams
    loglik: float
    iterations_used: int
    convergence_trace: list
    variant: ModelVariant
    evaluations: int = 0
    algorithm: str = "rime_style"

    def to_dict(self) -> dict:
        active = set(self.variant.active_mask)
        return {
            "variant": self.variant.value,
            "algorithm": self.algorithm,
            "loglik": self.loglik,
            "n_params": self.variant.n_params,
            "iterations_used": self.iterations_used,
            "evaluations": self.evaluations,
            "params": {k: v for k, v in self.params.to_dict().items() if k in active},
            "pinned": {k: v for k, v in self.params.to_dict().items() if k not in active},
        }


#: Non-negative scale parameters searched on a geometric grid when their
#: box starts at zero; true values often sit orders of magnitude below the
#: upper bound. ``_WARP`` sets the dynamic range of that grid.
_WARPED = ("mu_a", "sigma_y0", "sigma_a", "sigma_bm", "sigma_eps")
_WARP = 1e6
_LOG_WARP = math.log1p(_WARP)


class _Objective:
    """Maps unit-cube points of the active parameters to log-likelihoods."""

    def __init__(self, dataset, variant, norm, bounds):
        self.lik = PanelLikelihood(dataset, variant, norm)
        names, self.lo, self.hi = bounds.active(variant)
        self.idx = np.array([PARAM_NAMES.index(n) for n in names])
        self.warped = np.array([n in _WARPED and lo == 0.0 for n, lo in zip(names, self.lo)])
        base = variant.pin(ModelParams.from_array(np.zeros(len(PARAM_NAMES))), norm).to_array()
        base[PARAM_NAMES.index("beta")] = 1.0
        self.base = base
        self.dim = len(names)
        self.evaluations = 0

    def to_box(self, u):
        u = np.atleast_2d(u)
        frac = np.where(self.warped, np.expm1(u * _LOG_WARP) / _WARP, u)
        return np.clip(self.lo + frac * (self.hi - self.lo), self.lo, self.hi)

    def to_cube(self, x):
        frac = np.clip((np.asarray(x, dtype=float) - self.lo) / (self.hi - self.lo), 0.0, 1.0)
        return np.where(self.warped, np.log1p(frac * _WARP) / _LOG_WARP, frac)

    def full(self, u):
        u = np.atleast_2d(u)
        out = np.tile(self.base, (u.shape[0], 1))
        out[:, self.idx] = self.to_box(u)
        return out

    def __call__(self, u):
        u = np.atleast_2d(u)
        self.evaluations += u.shape[0]
        return self.lik.evaluate(self.full(u))

    def params(self, u) -> ModelParams:
        return ModelParams.from_array(self.full(u)[0])


def _reflect(u):
    u = np.where(u < 0.0, -u, u)
    u = np.where(u > 1.0, 2.0 - u, u)
    return np.clip(u, 0.0, 1.0)


def _rime_search(obj: _Objective, cfg: OptimizerConfig, rng: np.random.Generator, u0=None, T=None):
    N, d = cfg.population, obj.dim
    T = T or cfg.max_iterations
    X = rng.random((N, d))
    if u0 is not None:
        X[0] = u0
    fit = obj(X)
    b = int(np.argmax(fit))
    best, best_f = X[b].copy(), fit[b]
    trace = [(0, float(best_f))]
    last_improve_it, last_improve_f = 0, best_f
    w = 5.0
    it = 0
    for it in range(1, T + 1):
        # soft rime: scatter coordinates around the incumbent
        rime_factor = (rng.random((N, 1)) - 0.5) * 2.0 * math.cos(math.pi * it / (T / 10.0 + 1e-12)) * (
            1.0 - round(it * w / T) / w
        )
        E = math.sqrt(it / T)
        soft = rng.random((N, d)) < E
        trial = np.where(soft, best + rime_factor * (rng.random((N, d)) - 0.5) * 2.0, X)
        # hard rime puncture: worse-ranked individuals copy more incumbent coordinates
        rank = np.empty(N)
        rank[np.argsort(-fit, kind="stable")] = np.arange(N)
        punct = rng.random((N, d)) < (0.5 * rank / (N - 1))[:, None]
        trial = np.where(punct, best, trial)
        # best-guided differential move for half the population
        de = rng.random(N) < 0.5
        r1 = rng.integers(0, N, N)
        r2 = (r1 + rng.integers(1, N, N)) % N
        F = rng.uniform(0.4, 0.9, (N, 1))
        v = X + F * (best - X) + F * (X[r1] - X[r2])
        cross = rng.random((N, d)) < 0.9
        cross[np.arange(N), rng.integers(0, d, N)] = True
        v = np.where(cross, v, X)
        trial = np.where(de[:, None], v, trial)
        trial = _reflect(trial)
        f_trial = obj(trial)
        better = f_trial > fit
        X[better] = trial[better]
        fit[better] = f_trial[better]
        b = int(np.argmax(fit))
        if fit[b] > best_f:
            best, best_f = X[b].copy(), fit[b]
            trace.append((it, float(best_f)))
        if cfg.tol is not None:
            if best_f - last_improve_f >= cfg.tol:
                last_improve_it, last_improve_f = it, best_f
            elif it - last_improve_it >= cfg.patience:
                break
    return best, best_f, it, trace


def _restarted_search(obj, cfg, rng, u0=None):
    """Split the budget over ``cfg.restarts`` independent searches.

    A single population tends to settle in whichever basin it finds first
    (e.g. the degenerate no-curvature fit at beta -> 0); independent restarts
    make reaching the best basin far more reliable. The trace reports the
    running best against the cumulative iteration count.
    """
    R = cfg.restarts
    best, best_f, done, trace = None, None, 0, []
    for r in range(R):
        T = cfg.max_iterations // R + (1 if r < cfg.max_iterations % R else 0)
        b, f, used, tr = _rime_search(obj, cfg, rng, u0 if r == 0 else None, T)
        if best is None or f > best_f:
            trace.extend((done + it, v) for it, v in tr if best_f is None or v > best_f)
            best, best_f = b, f
        done += used
    return best, best_f, done, trace


def _to_z(u):
    return np.arcsin(np.clip(2.0 * u - 1.0, -1.0, 1.0))


def _to_u(z):
    return (np.sin(z) + 1.0) / 2.0


def nelder_mead(func, z0, step=0.05, xtol=1e-10, max_evaluations=1_000_000):
    """Minimize ``func`` (unconstrained) from ``z0``; returns (z, f, n_eval).

    Initial simplex as in MATLAB's fminsearch: each coordinate perturbed by
    ``step`` relative (0.00025 absolute for zero coordinates). Stops when the
    simplex diameter drops below ``xtol`` or the evaluation budget is spent.
    """
    z0 = np.asarray(z0, dtype=float)
    d = z0.size
    S = np.tile(z0, (d + 1, 1))
    for k in range(d):
        S[k + 1, k] = z0[k] * (1 + step) if z0[k] != 0 else 0.00025
    fS = np.array([func(s) for s in S])
    n_eval = d + 1
    while n_eval < max_evaluations:
        order = np.argsort(fS, kind="stable")
        S, fS = S[order], fS[order]
        diam = np.max(np.abs(S[1:] - S[0]))
        if diam < xtol:
            break
        c = S[:-1].mean(axis=0)
        xr = c + (c - S[-1])
        fr = func(xr)
        n_eval += 1
        if fr < fS[0]:
            xe = c + 2.0 * (c - S[-1])
            fe = func(xe)
            n_eval += 1
            if fe < fr:
                S[-1], fS[-1] = xe, fe
            else:
                S[-1], fS[-1] = xr, fr
        elif fr < fS[-2]:
            S[-1], fS[-1] = xr, fr
        else:
            if fr < fS[-1]:
                xc = c + 0.5 * (xr - c)
                fc = func(xc)
                n_eval += 1
                accept = fc <= fr
            else:
                xc = c + 0.5 * (S[-1] - c)
                fc = func(xc)
                n_eval += 1
                accept = fc < fS[-1]
            if accept:
                S[-1], fS[-1] = xc, fc
            else:
                S[1:] = S[0] + 0.5 * (S[1:] - S[0])
                fS[1:] = [func(s) for s in S[1:]]
                n_eval += d
    b = int(np.argmin(fS))
    return S[b], fS[b], n_eval


def _nm_in_box(obj: _Objective, u0, step, xtol, max_evaluations):
    def f(z):
        v = obj(_to_u(z)[None, :])[0]
        return -v if np.isfinite(v) else np.inf

    z, fz, n_eval = nelder_mead(f, _to_z(u0), step=step, xtol=xtol, max_evaluations=max_evaluations)
    return _to_u(z), -fz, n_eval


def fit(
    dataset: DegradationDataset,
    variant,
    norm: StressNormalization,
    bounds: Bounds | None = None,
    config: OptimizerConfig | None = None,
    initial: ModelParams | None = None,
) -> FitResult:
    """Maximize the panel log-likelihood over the bounded active parameters.

    ``initial`` (optional) seeds one member of the starting population, or the
    simplex start for ``nelder_mead``; it is clipped into the bounds.
    """
    if dataset is None or dataset.n_levels == 0 or dataset.n_units == 0:
        raise ValueError("empty dataset")
    variant = ModelVariant.parse(variant)
    bounds = bounds or Bounds.default()
    config = config or OptimizerConfig()
    obj = _Objective(dataset, variant, norm, bounds)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    u_init = None
    if initial is not None:
        u_init = obj.to_cube(initial.to_array()[obj.idx])
    if config.algorithm == "rime_style":
        best, best_f, iters, trace = _restarted_search(obj, config, rng, u_init)
        if config.polish and np.isfinite(best_f):
            u, f, _ = _nm_in_box(obj, best, 1e-3, config.nm_xtol, config.polish_evaluations)
            if f > best_f:
                best, best_f = u, f
                trace.append((iters, float(best_f)))
    else:
        u0 = rng.random(obj.dim) if u_init is None else u_init
        best, best_f, iters = _nm_in_box(obj, u0, 0.05, config.nm_xtol, config.nm_max_evaluations)
        trace = [(iters, float(best_f))]
    if not np.isfinite(best_f) or best_f <= -1e299:
        raise OptimizationError("no feasible parameter vector found")
    return FitResult(
        params=obj.params(best),
        loglik=float(best_f),
        iterations_used=int(iters),
        convergence_trace=trace,
        variant=variant,
        evaluations=obj.evaluations,
        algorithm=config.algorithm,
    )


def multi_run_stats(dataset, variant, norm, bounds=None, config=None, runs: int = 20, seeds=None):
    """Fit ``runs`` times with seeds ``config.seed + r`` (or explicit ``seeds``).

    Returns ``(stats, fits)`` where ``stats`` maps each active parameter and
    ``"loglik"`` to mean, sample standard deviation and signed coefficient of
    variation (std / mean).
    """
    if runs < 2:
        raise ValueError("runs must be >= 2")
    config = config or OptimizerConfig()
    variant = ModelVariant.parse(variant)
    seeds = list(seeds) if seeds is not None else [config.seed + r for r in range(runs)]
    fits = [fit(dataset, variant, norm, bounds, config.with_seed(s)) for s in seeds]
    stats = {}
    for name in variant.active_mask + ("loglik",):
        vals = np.array([f.loglik if name == "loglik" else getattr(f.params, name) for f in fits])
        mean = float(vals.mean())
        std = float(vals.std(ddof=1))
        stats[name] = {"mean": mean, "std": std, "cv": std / mean if mean != 0 else math.inf}
    return stats, fits
