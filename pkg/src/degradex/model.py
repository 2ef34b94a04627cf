"""Domain types and the deterministic degradation-rate equations.

Temperatures are kelvin internally, humidity a fraction in (0, 1]. Helpers
convert from the Celsius / percent units used at the I/O boundary.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

KELVIN_OFFSET = 273.15


class DomainError(ValueError):
    """Argument outside the domain of a model equation."""


def celsius_to_kelvin(temp_c):
    return np.asarray(temp_c, dtype=float) + KELVIN_OFFSET if np.ndim(temp_c) else float(temp_c) + KELVIN_OFFSET


def kelvin_to_celsius(temp_k):
    return np.asarray(temp_k, dtype=float) - KELVIN_OFFSET if np.ndim(temp_k) else float(temp_k) - KELVIN_OFFSET


@dataclass(frozen=True)
class StressVector:
    temperature: float  # K
    humidity: float  # fraction

    def __post_init__(self):
        if not self.temperature > 0:
            raise DomainError(f"temperature must be > 0 K, got {self.temperature}")
        if not 0 < self.humidity <= 1:
            raise DomainError(f"humidity must lie in (0, 1], got {self.humidity}")

    @classmethod
    def from_celsius(cls, temp_c: float, humidity_pct: float) -> "StressVector":
        return cls(float(temp_c) + KELVIN_OFFSET, float(humidity_pct) / 100.0)


@dataclass(frozen=True)
class StressNormalization:
    """Reference stress range mapped onto [0, 1] by the standardizations."""

    t_low: float
    t_high: float
    h_low: float
    h_high: float

    def __post_init__(self):
        if not 0 < self.t_low < self.t_high:
            raise DomainError(f"need 0 < t_low < t_high, got {self.t_low}, {self.t_high}")
        if not 0 < self.h_low < self.h_high <= 1:
            raise DomainError(f"need 0 < h_low < h_high <= 1, got {self.h_low}, {self.h_high}")

    @classmethod
    def from_celsius(cls, t_low_c, t_high_c, h_low_pct, h_high_pct) -> "StressNormalization":
        return cls(t_low_c + KELVIN_OFFSET, t_high_c + KELVIN_OFFSET, h_low_pct / 100.0, h_high_pct / 100.0)

    @classmethod
    def from_dataset(cls, dataset: "DegradationDataset") -> "StressNormalization":
        temps = [lv.stress.temperature for lv in dataset.levels]
        hums = [lv.stress.humidity for lv in dataset.levels]
        return cls(min(temps), max(temps), min(hums), max(hums))


#: Stress window of the reference accelerated test: 40-90 degC, 50-90 %RH.
DEFAULT_NORMALIZATION = StressNormalization.from_celsius(40.0, 90.0, 50.0, 90.0)

PARAM_NAMES = (
    "mu_y0",
    "sigma_y0",
    "mu_a",
    "sigma_a",
    "alpha1",
    "alpha2",
    "alpha3",
    "beta",
    "sigma_bm",
    "sigma_eps",
    "t_threshold",
)
SIGMA_FIELDS = ("sigma_y0", "sigma_a", "sigma_bm", "sigma_eps")


@dataclass(frozen=True)
class ModelParams:
    mu_y0: float
    sigma_y0: float
    mu_a: float
    sigma_a: float
    alpha1: float
    alpha2: float
    alpha3: float
    beta: float
    sigma_bm: float
    sigma_eps: float
    t_threshold: float  # K

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in PARAM_NAMES], dtype=float)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "ModelParams":
        values = [float(v) for v in values]
        if len(values) != len(PARAM_NAMES):
            raise ValueError(f"expected {len(PARAM_NAMES)} values, got {len(values)}")
        return cls(*values)

    def to_dict(self) -> dict:
        return {n: float(getattr(self, n)) for n in PARAM_NAMES}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        unknown = set(d) - set(PARAM_NAMES)
        if unknown:
            raise ValueError(f"unknown parameter(s): {sorted(unknown)}")
        return cls(**{n: float(d[n]) for n in PARAM_NAMES})

    def replace(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def validation_errors(self, norm: StressNormalization | None = None, variant: "ModelVariant | None" = None):
        errs = []
        for name in SIGMA_FIELDS:
            if not getattr(self, name) >= 0:
                errs.append(f"{name} must be >= 0")
        if not 0 < self.beta <= 2:
            errs.append("beta must lie in (0, 2]")
        if not all(np.isfinite(self.to_array())):
            errs.append("non-finite parameter")
        uses_threshold = variant is None or variant.uses_threshold
        if norm is not None and uses_threshold and not norm.t_low <= self.t_threshold <= norm.t_high:
            errs.append("t_threshold outside [t_low, t_high]")
        return errs


#: Published point estimates for the aluminized polyimide film, threshold 63.75 degC.
REFERENCE_PARAMS = ModelParams(
    mu_y0=8.844,
    sigma_y0=0.1754,
    mu_a=0.003374,
    sigma_a=9.2416e-11,
    alpha1=1.836,
    alpha2=0.9439,
    alpha3=-0.2901,
    beta=0.5510,
    sigma_bm=5.833e-10,
    sigma_eps=0.3609,
    t_threshold=63.75 + KELVIN_OFFSET,
)


class ModelVariant(enum.Enum):
    """M0 is the full model; M1 has one Arrhenius regime; M2 drops the
    random rate and Brownian term; M3 drops measurement error."""

    M0 = "m0"
    M1 = "m1"
    M2 = "m2"
    M3 = "m3"

    @classmethod
    def parse(cls, value) -> "ModelVariant":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown model variant {value!r}; expected one of m0, m1, m2, m3") from None

    @property
    def inactive(self) -> frozenset:
        return _INACTIVE[self]

    @property
    def active_mask(self) -> tuple:
        return tuple(n for n in PARAM_NAMES if n not in self.inactive)

    @property
    def n_params(self) -> int:
        return len(self.active_mask)

    @property
    def uses_threshold(self) -> bool:
        return "t_threshold" not in self.inactive

    def pinned_values(self, norm: StressNormalization) -> dict:
        pins = {}
        for name in self.inactive:
            pins[name] = norm.t_high if name == "t_threshold" else 0.0
        return pins

    def pin(self, params: ModelParams, norm: StressNormalization) -> ModelParams:
        """Return ``params`` with inactive fields set to their pinned values."""
        return params.replace(**self.pinned_values(norm))


_INACTIVE = {
    ModelVariant.M0: frozenset(),
    ModelVariant.M1: frozenset({"alpha3", "t_threshold"}),
    ModelVariant.M2: frozenset({"sigma_a", "sigma_bm"}),
    ModelVariant.M3: frozenset({"sigma_eps"}),
}


@dataclass(frozen=True, eq=False)
class UnitSeries:
    times: np.ndarray
    values: np.ndarray
    unit_id: str = ""

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != y.shape or t.size < 1:
            raise ValueError(f"unit {self.unit_id!r}: times and values must be equal-length 1-d arrays")
        if np.any(t <= 0) or np.any(np.diff(t) <= 0):
            raise ValueError(f"unit {self.unit_id!r}: times must be positive and strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", y)


@dataclass(frozen=True, eq=False)
class StressLevel:
    stress: StressVector
    units: tuple
    level_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "units", tuple(self.units))
        if not self.units:
            raise ValueError(f"level {self.level_id!r} has no units")


@dataclass(frozen=True, eq=False)
class DegradationDataset:
    levels: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(self.levels))
        if not self.levels:
            raise ValueError("dataset has no stress levels")

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    @property
    def n_units(self) -> int:
        return sum(len(lv.units) for lv in self.levels)

    @property
    def n_readings(self) -> int:
        return sum(u.times.size for lv in self.levels for u in lv.units)

    def subset(self, indices: Iterable[int]) -> "DegradationDataset":
        return DegradationDataset(tuple(self.levels[i] for i in indices))

    def without_level(self, index: int) -> "DegradationDataset":
        return self.subset(i for i in range(self.n_levels) if i != index)

    def equals(self, other: "DegradationDataset") -> bool:
        """Exact (bitwise float) equality of structure and readings."""
        if self.n_levels != other.n_levels:
            return False
        for a, b in zip(self.levels, other.levels):
            if a.stress != b.stress or a.level_id != b.level_id or len(a.units) != len(b.units):
                return False
            for ua, ub in zip(a.units, b.units):
                if ua.unit_id != ub.unit_id or not (
                    np.array_equal(ua.times, ub.times) and np.array_equal(ua.values, ub.values)
                ):
                    return False
        return True


def standardize_temperature(t, norm: StressNormalization):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("temperature must be > 0 K")
    out = (1.0 / norm.t_low - 1.0 / t) / (1.0 / norm.t_low - 1.0 / norm.t_high)
    return float(out) if out.ndim == 0 else out


def standardize_humidity(h, norm: StressNormalization):
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0):
        raise DomainError("humidity must be > 0")
    out = (np.log(h) - np.log(norm.h_low)) / (np.log(norm.h_high) - np.log(norm.h_low))
    return float(out) if out.ndim == 0 else out


def phi1(t, norm: StressNormalization, t_threshold):
    """Low-regime temperature map: 0 at ``t_low``, 1 at the threshold."""
    if np.any(np.asarray(t_threshold) == norm.t_low):
        raise DomainError("t_threshold equals t_low: singular low-regime map")
    out = (1.0 / norm.t_low - 1.0 / np.asarray(t, dtype=float)) / (1.0 / norm.t_low - 1.0 / np.asarray(t_threshold))
    return float(out) if np.ndim(out) == 0 else out


def phi3(t, norm: StressNormalization, t_threshold):
    """High-regime temperature map: 0 at the threshold, 1 at ``t_high``."""
    if np.any(np.asarray(t_threshold) == norm.t_high):
        raise DomainError("t_threshold equals t_high: singular high-regime map")
    tt = np.asarray(t_threshold, dtype=float)
    out = (1.0 / tt - 1.0 / np.asarray(t, dtype=float)) / (1.0 / tt - 1.0 / norm.t_high)
    return float(out) if np.ndim(out) == 0 else out


def log_rate(alpha1, alpha2, alpha3, t_threshold, temperature, humidity, norm, variant=ModelVariant.M0):
    """Log of the stress-dependent rate, broadcasting over all array arguments.

    M1 uses a single Arrhenius regime over the whole range; every other
    variant switches from the low to the high regime at ``t_threshold``.
    """
    variant = ModelVariant.parse(variant)
    temperature = np.asarray(temperature, dtype=float)
    if np.any(temperature <= 0):
        raise DomainError("temperature must be > 0 K")
    h_star = standardize_humidity(humidity, norm)
    if not variant.uses_threshold:
        return alpha1 * standardize_temperature(temperature, norm) + alpha2 * h_star
    tt = np.asarray(t_threshold, dtype=float)
    inv_t = 1.0 / temperature
    inv_lo = 1.0 / norm.t_low
    inv_th = 1.0 / tt
    with np.errstate(divide="ignore", invalid="ignore"):
        low = (inv_lo - inv_t) / (inv_lo - inv_th)
        high = (inv_th - inv_t) / (inv_th - 1.0 / norm.t_high)
    # both regimes meet at the threshold; keeps a threshold pinned at t_high finite there
    high = np.where(temperature == tt, 0.0, high)
    below = temperature < tt
    with np.errstate(invalid="ignore"):
        return np.where(below, alpha1 * low + alpha2 * h_star, alpha1 + alpha2 * h_star + alpha3 * high)


def rate(params: ModelParams, variant, stress: StressVector, norm: StressNormalization) -> float:
    variant = ModelVariant.parse(variant)
    if variant.uses_threshold:
        # the regime that is actually evaluated must be non-singular
        if stress.temperature < params.t_threshold:
            phi1(stress.temperature, norm, params.t_threshold)
        elif stress.temperature > params.t_threshold:
            phi3(stress.temperature, norm, params.t_threshold)
    return float(
        np.exp(
            log_rate(
                params.alpha1,
                params.alpha2,
                params.alpha3,
                params.t_threshold,
                stress.temperature,
                stress.humidity,
                norm,
                variant,
            )
        )
    )


def mean_trajectory(params: ModelParams, variant, stress: StressVector, norm: StressNormalization, t):
    """Noise-free mean path ``mu_y0 + mu_a * rate * t**beta`` (t in hours)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise DomainError("time must be >= 0")
    out = params.mu_y0 + params.mu_a * rate(params, variant, stress, norm) * t_arr**params.beta
    return float(out) if out.ndim == 0 else out
