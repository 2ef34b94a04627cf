"""Forward simulation of degradation panels from known parameters."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (
    DegradationDataset,
    ModelParams,
    ModelVariant,
    StressLevel,
    StressNormalization,
    StressVector,
    UnitSeries,
    rate,
)

#: (degC, %RH) of the eight accelerated stress levels of the reference test.
REFERENCE_LEVELS_C = (
    (40.0, 50.0),
    (40.0, 75.0),
    (50.0, 50.0),
    (50.0, 75.0),
    (60.0, 90.0),
    (65.0, 75.0),
    (85.0, 80.0),
    (90.0, 85.0),
)


def reference_stresses() -> list:
    return [StressVector.from_celsius(t, h) for t, h in REFERENCE_LEVELS_C]


@dataclass(frozen=True)
class ExperimentDesign:
    levels: tuple = field(default_factory=lambda: tuple(reference_stresses()))
    units_per_level: int = 12
    measurement_interval: float = 12.0  # hours
    measurements_per_unit: int = 40

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if not self.levels or self.units_per_level < 1 or self.measurements_per_unit < 1:
            raise ValueError("design counts must be >= 1")
        if not self.measurement_interval > 0:
            raise ValueError("measurement_interval must be > 0")

    @property
    def times(self) -> np.ndarray:
        return self.measurement_interval * np.arange(1, self.measurements_per_unit + 1, dtype=float)


def generate_dataset(
    true_params: ModelParams,
    variant,
    design: ExperimentDesign,
    norm: StressNormalization,
    seed: int,
) -> DegradationDataset:
    """Simulate one panel: per unit an initial value, a rate coefficient,
    a Brownian path sampled at the measurement times and i.i.d. reading noise.

    Unit ``(l, i)`` draws from its own stream ``default_rng([seed, l, i])`` so
    adding units or levels never perturbs the others.
    """
    variant = ModelVariant.parse(variant)
    p = variant.pin(true_params, norm)
    errs = p.validation_errors(norm, variant)
    if errs:
        raise ValueError("; ".join(errs))
    t = design.times
    dt = np.diff(t, prepend=0.0)
    tb = t**p.beta
    levels = []
    for li, stress in enumerate(design.levels):
        e = rate(p, variant, stress, norm)
        units = []
        for ui in range(design.units_per_level):
            rng = np.random.default_rng([seed, li, ui])
            y0 = rng.normal(p.mu_y0, p.sigma_y0)
            a = rng.normal(p.mu_a, p.sigma_a)
            bm = np.cumsum(rng.normal(0.0, 1.0, t.size) * np.sqrt(dt)) * p.sigma_bm
            eps = rng.normal(0.0, 1.0, t.size) * p.sigma_eps
            units.append(UnitSeries(t.copy(), y0 + a * e * tb + bm + eps, unit_id=str(ui + 1)))
        levels.append(StressLevel(stress, units, level_id=str(li + 1)))
    return DegradationDataset(levels)
