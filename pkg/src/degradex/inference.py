"""Subsampling intervals and sign-based mechanism determination."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (
    KELVIN_OFFSET,
    DegradationDataset,
    ModelVariant,
    StressLevel,
    StressNormalization,
)
from .optimize import Bounds, FitResult, OptimizerConfig, fit


@dataclass(frozen=True)
class SubsampleConfig:
    ratio: float = 0.632
    repeats: int = 1000
    confidence: float = 0.90
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.ratio <= 1:
            raise ValueError("ratio must be in (0, 1]")
        if self.repeats < 2:
            raise ValueError("repeats must be >= 2")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must be in (0, 1)")


@dataclass
class IntervalEstimate:
    """Point estimate from the full data plus subsample quantile interval."""

    name: str
    point: float
    lower: float
    upper: float
    samples: np.ndarray = field(repr=False)

    def to_dict(self, with_samples: bool = False) -> dict:
        d = {"point": self.point, "lower": self.lower, "upper": self.upper}
        if with_samples:
            d["samples"] = [float(x) for x in self.samples]
        return d


@dataclass
class MechanismVerdict:
    alpha1_low: IntervalEstimate
    alpha1_high: IntervalEstimate
    sign_frequency_low: float
    sign_frequency_high: float
    transition_detected: bool
    split_temperature: float
    # largest one-sided confidence level whose interval excludes zero
    confidence_low: float = 0.0
    confidence_high: float = 0.0

    def to_dict(self) -> dict:
        return {
            "transition_detected": self.transition_detected,
            "split_temperature_k": self.split_temperature,
            "sign_frequency_low": self.sign_frequency_low,
            "sign_frequency_high": self.sign_frequency_high,
            "confidence_low": self.confidence_low,
            "confidence_high": self.confidence_high,
            "alpha1_low": self.alpha1_low.to_dict(),
            "alpha1_high": self.alpha1_high.to_dict(),
        }


def subsample_size(n_units: int, ratio: float) -> int:
    """Units drawn per level: nearest integer to ``ratio * n_units``, at least 1."""
    return max(1, int(np.floor(ratio * n_units + 0.5)))


def _draw(dataset: DegradationDataset, sizes, rng) -> DegradationDataset:
    levels = []
    for lv, k in zip(dataset.levels, sizes):
        keep = np.sort(rng.choice(len(lv.units), size=k, replace=False))
        levels.append(StressLevel(lv.stress, [lv.units[i] for i in keep], lv.level_id))
    return DegradationDataset(levels)


def subsample_intervals(
    dataset: DegradationDataset,
    variant,
    norm: StressNormalization,
    bounds: Bounds | None = None,
    opt_config: OptimizerConfig | None = None,
    sub_config: SubsampleConfig | None = None,
    point_fit: FitResult | None = None,
) -> dict:
    """Empirical intervals for every active parameter from W subsample refits.

    Each repeat draws units per level without replacement and refits with the
    same optimizer configuration, warm-started at the full-data estimate.
    Repeat ``w`` uses its own stream ``SeedSequence([seed, w])``.
    Returns ``{name: IntervalEstimate}``.
    """
    variant = ModelVariant.parse(variant)
    sub_config = sub_config or SubsampleConfig()
    opt_config = opt_config or OptimizerConfig()
    sizes = [subsample_size(len(lv.units), sub_config.ratio) for lv in dataset.levels]
    point = point_fit or fit(dataset, variant, norm, bounds, opt_config)
    full_draw = all(k == len(lv.units) for k, lv in zip(sizes, dataset.levels))
    names = variant.active_mask
    samples = np.empty((sub_config.repeats, len(names)))
    for w in range(sub_config.repeats):
        if full_draw:
            res = point
        else:
            rng = np.random.default_rng(np.random.SeedSequence([sub_config.seed, w]))
            res = fit(_draw(dataset, sizes, rng), variant, norm, bounds, opt_config, initial=point.params)
        samples[w] = [getattr(res.params, n) for n in names]
    lo_q, hi_q = (1 - sub_config.confidence) / 2, (1 + sub_config.confidence) / 2
    out = {}
    for j, n in enumerate(names):
        col = samples[:, j]
        out[n] = IntervalEstimate(
            name=n,
            point=float(getattr(point.params, n)),
            lower=float(np.quantile(col, lo_q)),
            upper=float(np.quantile(col, hi_q)),
            samples=col.copy(),
        )
    return out


def _one_sided_confidence(samples: np.ndarray, positive: bool) -> float:
    """Largest c such that the one-sided c-level empirical bound excludes zero."""
    s = np.sort(samples if positive else -samples)
    # the lower (1 - c) quantile is the k-th order statistic; it is > 0 once
    # all smaller order statistics are cut off
    k = int(np.searchsorted(s, 0.0, side="right"))
    return float(1.0 - k / s.size)


def _partition(dataset: DegradationDataset, mask) -> DegradationDataset:
    levels = [lv for lv, keep in zip(dataset.levels, mask) if keep]
    # canonical order makes the verdict independent of the input level order
    levels.sort(key=lambda lv: (lv.stress.temperature, lv.stress.humidity, lv.level_id))
    return DegradationDataset(levels)


def determine_mechanism(
    dataset: DegradationDataset,
    norm: StressNormalization,
    bounds: Bounds | None = None,
    opt_config: OptimizerConfig | None = None,
    sub_config: SubsampleConfig | None = None,
    split: float = 60.0 + KELVIN_OFFSET,
) -> MechanismVerdict:
    """Fit the single-regime model below and above ``split`` (kelvin) and
    compare the signs of the temperature coefficient.

    Each partition gets its own temperature normalization spanning its
    coldest and hottest level; humidity keeps the global range of ``norm``.
    """
    temps = np.array([lv.stress.temperature for lv in dataset.levels])
    parts = []
    for mask, label in ((temps < split, "below"), (temps >= split, "at or above")):
        if not mask.any():
            raise ValueError(f"no stress level {label} the split temperature {split} K")
        part = _partition(dataset, mask)
        pt = sorted({lv.stress.temperature for lv in part.levels})
        if len(pt) < 2:
            raise ValueError(f"partition {label} the split needs >= 2 distinct temperatures")
        pnorm = StressNormalization(pt[0], pt[-1], norm.h_low, norm.h_high)
        parts.append(subsample_intervals(part, ModelVariant.M1, pnorm, bounds, opt_config, sub_config)["alpha1"])
    low, high = parts
    return MechanismVerdict(
        alpha1_low=low,
        alpha1_high=high,
        sign_frequency_low=float(np.mean(low.samples > 0)),
        sign_frequency_high=float(np.mean(high.samples < 0)),
        transition_detected=bool(low.point > 0 and high.point < 0),
        split_temperature=float(split),
        confidence_low=_one_sided_confidence(low.samples, True),
        confidence_high=_one_sided_confidence(high.samples, False),
    )
