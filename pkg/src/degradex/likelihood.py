"""Multivariate-normal log-likelihood of degradation panels."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import kernels
from .kernels import LOG_2PI, PENALTY, THETA_COLUMNS
from .model import (
    PARAM_NAMES,
    DegradationDataset,
    ModelParams,
    ModelVariant,
    StressNormalization,
    StressVector,
    log_rate,
    rate,
)

_THETA_IDX = np.array([PARAM_NAMES.index(n) for n in THETA_COLUMNS])
_IDX = {n: i for i, n in enumerate(PARAM_NAMES)}


def covariance_matrix(params: ModelParams, variant, stress: StressVector, norm: StressNormalization, times):
    variant = ModelVariant.parse(variant)
    p = variant.pin(params, norm)
    t = np.asarray(times, dtype=float)
    e = rate(p, variant, stress, norm)
    tb = t**p.beta
    cov = (
        p.sigma_y0**2
        + p.sigma_a**2 * e**2 * np.outer(tb, tb)
        + p.sigma_bm**2 * np.minimum.outer(t, t)
        + p.sigma_eps**2 * np.eye(t.size)
    )
    return cov


def _chol_loglik(cov, resid):
    m = resid.size
    for attempt in range(2):
        try:
            c = linalg.cholesky(cov, lower=True)
        except linalg.LinAlgError:
            if attempt:
                return PENALTY
            cov = cov + np.eye(m) * (kernels.JITTER * np.trace(cov) / m)
            continue
        z = linalg.solve_triangular(c, resid, lower=True)
        logdet = 2.0 * np.log(np.diag(c)).sum()
        val = -0.5 * (m * LOG_2PI + logdet + z @ z)
        return float(val) if np.isfinite(val) else PENALTY
    return PENALTY


def unit_loglik(params: ModelParams, variant, stress: StressVector, norm: StressNormalization, times, values) -> float:
    """Log-density of one unit's readings, via a dense Cholesky factor.

    Returns :data:`PENALTY` if the covariance is not positive definite even
    after a single diagonal jitter.
    """
    variant = ModelVariant.parse(variant)
    p = variant.pin(params, norm)
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape or t.size < 1:
        raise ValueError("times and values must have equal length >= 1")
    mean = p.mu_y0 + p.mu_a * rate(p, variant, stress, norm) * t**p.beta
    return _chol_loglik(covariance_matrix(p, variant, stress, norm, t), y - mean)


def _group_units(dataset: DegradationDataset):
    """Group units by (level, identical time grid); yields kernel layout arrays."""
    times, logt, t_off, ys, y_off, g_n, g_level = [], [], [0], [], [0], [], []
    for li, level in enumerate(dataset.levels):
        grids: dict = {}
        for u in level.units:
            grids.setdefault(u.times.tobytes(), (u.times, []))[1].append(u.values)
        for t, rows in grids.values():
            times.append(t)
            logt.append(np.log(t))
            t_off.append(t_off[-1] + t.size)
            block = np.vstack(rows)
            ys.append(block.ravel())
            y_off.append(y_off[-1] + block.size)
            g_n.append(len(rows))
            g_level.append(li)
    return (
        np.concatenate(times),
        np.concatenate(logt),
        np.asarray(t_off, dtype=np.int64),
        np.concatenate(ys),
        np.asarray(y_off, dtype=np.int64),
        np.asarray(g_n, dtype=np.int64),
        np.asarray(g_level, dtype=np.int64),
    )


@dataclass
class PanelLikelihood:
    """Vectorized evaluator of the total log-likelihood for one dataset.

    ``evaluate`` takes an (C, 11) matrix of full parameter vectors in
    ``PARAM_NAMES`` order and returns C log-likelihoods. Inactive fields of
    the variant are overwritten with their pinned values.
    """

    dataset: DegradationDataset
    variant: ModelVariant
    norm: StressNormalization

    def __post_init__(self):
        self.variant = ModelVariant.parse(self.variant)
        self.layout = _group_units(self.dataset)
        self.temps = np.array([lv.stress.temperature for lv in self.dataset.levels])
        self.hums = np.array([lv.stress.humidity for lv in self.dataset.levels])
        pins = self.variant.pinned_values(self.norm)
        self._pin_idx = np.array([_IDX[n] for n in pins], dtype=int)
        self._pin_val = np.array(list(pins.values()), dtype=float)

    def pin(self, full):
        full = np.array(full, dtype=float, ndmin=2)
        if self._pin_idx.size:
            full[:, self._pin_idx] = self._pin_val
        return full

    def feasible(self, full):
        ok = np.all(np.isfinite(full), axis=1)
        for name in ("sigma_y0", "sigma_a", "sigma_bm", "sigma_eps"):
            ok &= full[:, _IDX[name]] >= 0
        beta = full[:, _IDX["beta"]]
        ok &= (beta > 0) & (beta <= 2)
        if self.variant.uses_threshold:
            tt = full[:, _IDX["t_threshold"]]
            ok &= (tt >= self.norm.t_low) & (tt < self.norm.t_high)
        return ok

    def evaluate(self, full, use_numba=None):
        full = self.pin(full)
        ok = self.feasible(full)
        out = np.full(full.shape[0], -np.inf)
        if not ok.any():
            return out
        f = full[ok]
        with np.errstate(divide="ignore", invalid="ignore"):
            loge = log_rate(
                f[:, _IDX["alpha1"], None],
                f[:, _IDX["alpha2"], None],
                f[:, _IDX["alpha3"], None],
                f[:, _IDX["t_threshold"], None],
                self.temps[None, :],
                self.hums[None, :],
                self.norm,
                self.variant,
            )
        loge = np.broadcast_to(loge, (f.shape[0], self.temps.size))
        vals = kernels.loglik_batch(f[:, _THETA_IDX], loge, self.layout, use_numba=use_numba)
        vals[~np.all(np.isfinite(loge), axis=1)] = PENALTY
        out[ok] = vals
        return out

    def __call__(self, params: ModelParams) -> float:
        return float(self.evaluate(params.to_array()[None, :])[0])


def total_loglik(params: ModelParams, variant, dataset: DegradationDataset, norm: StressNormalization) -> float:
    """Sum of unit log-likelihoods over every unit of every level.

    Parameters outside the model's domain (negative scales, beta outside
    (0, 2], threshold outside the normalization window) give ``-inf``, which
    ranks below the :data:`PENALTY` of a degenerate covariance.
    """
    if dataset.n_levels == 0:
        raise ValueError("empty dataset")
    return PanelLikelihood(dataset, variant, norm)(params)


def dense_total_loglik(params: ModelParams, variant, dataset: DegradationDataset, norm: StressNormalization) -> float:
    """Reference path: sum of :func:`unit_loglik` over all units."""
    total = 0.0
    for level in dataset.levels:
        for u in level.units:
            v = unit_loglik(params, variant, level.stress, norm, u.times, u.values)
            if v == PENALTY:
                return PENALTY
            total += v
    return total
