"""Run configuration: JSON schema, validation and conversion to domain objects.

Stress values are in degrees Celsius and percent RH; model parameters and
their bounds use the internal units (threshold in kelvin). Unknown keys are
rejected at every level.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .inference import SubsampleConfig
from .model import PARAM_NAMES, REFERENCE_PARAMS, ModelParams, ModelVariant, StressNormalization, StressVector
from .optimize import ALGORITHMS, Bounds, OptimizerConfig
from .reliability import MCConfig, StressProfile, storage_profile
from .synth import REFERENCE_LEVELS_C, ExperimentDesign


class ConfigError(ValueError):
    """Invalid run configuration."""


_NUM = (int, float)

SCHEMA = {
    "variant": str,
    "seed": int,
    "data": str,
    "out_dir": str,
    "threads": int,
    "normalization": {"t_low_c": _NUM, "t_high_c": _NUM, "h_low_pct": _NUM, "h_high_pct": _NUM},
    "bounds": "param_pairs",
    "params": "param_values",
    "optimizer": {
        "population": int,
        "max_iterations": int,
        "algorithm": str,
        "tol": _NUM,
        "patience": int,
        "restarts": int,
        "polish": bool,
        "polish_evaluations": int,
        "nm_max_evaluations": int,
        "nm_xtol": _NUM,
    },
    "subsample": {"ratio": _NUM, "repeats": int, "confidence": _NUM},
    "mc": {
        "paths": int,
        "time_step": _NUM,
        "horizon": _NUM,
        "threshold": _NUM,
        "include_measurement_noise": bool,
    },
    "design": {
        "levels": "stress_list",
        "units_per_level": int,
        "measurement_interval": _NUM,
        "measurements_per_unit": int,
    },
    "profile": {
        "segments": "segment_list",
        "repeat": int,
        "warehouse": "stress",
        "logistics": "stress_list",
        "years": int,
        "logistics_start_month": int,
    },
    "reliability": {"stress": "stress", "bands": bool, "confidence": _NUM},
    "mechanism": {"split_c": _NUM},
    "compare": {"variants": "variant_list", "prediction_stress": "stress", "grid_size": int},
}


def _is(value, kind):
    if kind is bool:
        return isinstance(value, bool)
    if kind is int:
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == _NUM:
        return isinstance(value, _NUM) and not isinstance(value, bool)
    return isinstance(value, kind)


def _check_stress(v, where):
    if not (isinstance(v, list) and len(v) == 2 and all(_is(x, _NUM) for x in v)):
        raise ConfigError(f"{where}: expected [temperature_c, humidity_pct]")


def _validate(node, schema, where):
    if not isinstance(node, dict):
        raise ConfigError(f"{where or 'config'}: expected an object")
    for key, value in node.items():
        path = f"{where}.{key}" if where else key
        if key not in schema:
            raise ConfigError(f"unknown config key {path!r}")
        kind = schema[key]
        if isinstance(kind, dict):
            _validate(value, kind, path)
        elif kind == "param_pairs":
            if not isinstance(value, dict):
                raise ConfigError(f"{path}: expected an object")
            for name, pair in value.items():
                if name not in PARAM_NAMES:
                    raise ConfigError(f"unknown config key {path + '.' + name!r}")
                if not (isinstance(pair, list) and len(pair) == 2 and all(_is(x, _NUM) for x in pair)):
                    raise ConfigError(f"{path}.{name}: expected [lower, upper]")
        elif kind == "param_values":
            if not isinstance(value, dict):
                raise ConfigError(f"{path}: expected an object")
            for name, x in value.items():
                if name not in PARAM_NAMES:
                    raise ConfigError(f"unknown config key {path + '.' + name!r}")
                if not _is(x, _NUM):
                    raise ConfigError(f"{path}.{name}: expected a number")
        elif kind == "stress":
            _check_stress(value, path)
        elif kind == "stress_list":
            if not isinstance(value, list) or not value:
                raise ConfigError(f"{path}: expected a non-empty list")
            for i, s in enumerate(value):
                _check_stress(s, f"{path}[{i}]")
        elif kind == "segment_list":
            if not isinstance(value, list) or not value:
                raise ConfigError(f"{path}: expected a non-empty list")
            for i, s in enumerate(value):
                _validate(s, {"duration_h": _NUM, "temperature_c": _NUM, "humidity_pct": _NUM}, f"{path}[{i}]")
                if set(s) != {"duration_h", "temperature_c", "humidity_pct"}:
                    raise ConfigError(f"{path}[{i}]: needs duration_h, temperature_c, humidity_pct")
        elif kind == "variant_list":
            if not isinstance(value, list) or not value:
                raise ConfigError(f"{path}: expected a non-empty list")
            for v in value:
                _parse_variant(v, path)
        elif not _is(value, kind):
            raise ConfigError(f"{path}: expected {getattr(kind, '__name__', 'number')}")


def _parse_variant(v, where="variant"):
    try:
        return ModelVariant.parse(v)
    except ValueError:
        raise ConfigError(f"{where}: unknown variant {v!r}") from None


@dataclass
class RunConfig:
    raw: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "RunConfig":
        raw = {}
        if path is not None:
            try:
                raw = json.loads(Path(path).read_text())
            except FileNotFoundError:
                raise ConfigError(f"config file not found: {path}") from None
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file is not valid JSON: line {exc.lineno}: {exc.msg}") from None
        return cls.from_dict(raw, overrides)

    @classmethod
    def from_dict(cls, raw: dict, overrides: dict | None = None) -> "RunConfig":
        raw = json.loads(json.dumps(raw))
        for k, v in (overrides or {}).items():
            if v is not None:
                raw[k] = v
        _validate(raw, SCHEMA, "")
        cfg = cls(raw)
        # build everything once so errors surface before any computation
        cfg.variant, cfg.normalization, cfg.bounds, cfg.optimizer, cfg.subsample
        if "params" in raw:
            cfg.params
        if "design" in raw:
            cfg.design
        if "profile" in raw:
            cfg.profile
        if "mc" in raw and {"horizon", "threshold"} <= set(raw["mc"]):
            cfg.mc()
        if "compare" in raw:
            cfg.compare_variants
        return cfg

    def section(self, name) -> dict:
        return dict(self.raw.get(name, {}))

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    @property
    def variant(self) -> ModelVariant:
        return _parse_variant(self.raw.get("variant", "m0"))

    @property
    def normalization(self) -> StressNormalization:
        n = self.section("normalization")
        try:
            return StressNormalization.from_celsius(
                n.get("t_low_c", 40.0), n.get("t_high_c", 90.0), n.get("h_low_pct", 50.0), n.get("h_high_pct", 90.0)
            )
        except ValueError as exc:
            raise ConfigError(f"normalization: {exc}") from None

    @property
    def bounds(self) -> Bounds:
        try:
            return Bounds.default().updated(**{k: tuple(v) for k, v in self.section("bounds").items()})
        except ValueError as exc:
            raise ConfigError(f"bounds: {exc}") from None

    @property
    def optimizer(self) -> OptimizerConfig:
        o = self.section("optimizer")
        if "algorithm" in o and o["algorithm"] not in ALGORITHMS:
            raise ConfigError(f"optimizer.algorithm must be one of {ALGORITHMS}")
        try:
            return OptimizerConfig(seed=self.seed, **o)
        except ValueError as exc:
            raise ConfigError(f"optimizer: {exc}") from None

    @property
    def subsample(self) -> SubsampleConfig:
        try:
            return SubsampleConfig(seed=self.seed, **self.section("subsample"))
        except ValueError as exc:
            raise ConfigError(f"subsample: {exc}") from None

    def mc(self, **defaults) -> MCConfig:
        m = {**defaults, **self.section("mc")}
        missing = {"horizon", "threshold"} - set(m)
        if missing:
            raise ConfigError(f"mc: missing {sorted(missing)}")
        try:
            return MCConfig(seed=self.seed, **m)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"mc: {exc}") from None

    @property
    def params(self) -> ModelParams:
        try:
            return REFERENCE_PARAMS.replace(**self.section("params"))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"params: {exc}") from None

    @property
    def design(self) -> ExperimentDesign:
        d = self.section("design")
        try:
            levels = [StressVector.from_celsius(*s) for s in d.pop("levels", REFERENCE_LEVELS_C)]
            return ExperimentDesign(levels=tuple(levels), **d)
        except ValueError as exc:
            raise ConfigError(f"design: {exc}") from None

    @property
    def profile(self) -> StressProfile | None:
        p = self.section("profile")
        if not p:
            return None
        try:
            if "segments" in p:
                if {"warehouse", "logistics", "years", "logistics_start_month"} & set(p):
                    raise ConfigError("profile: give either segments or a storage schedule, not both")
                prof = StressProfile.from_durations(
                    (s["duration_h"], StressVector.from_celsius(s["temperature_c"], s["humidity_pct"]))
                    for s in p["segments"]
                )
                return prof.repeated(p.get("repeat", 1))
            if "warehouse" not in p:
                raise ConfigError("profile: needs segments or warehouse")
            if "repeat" in p:
                raise ConfigError("profile: 'repeat' applies to segments; use 'years'")
            return storage_profile(
                StressVector.from_celsius(*p["warehouse"]),
                [StressVector.from_celsius(*s) for s in p.get("logistics", [])],
                years=p.get("years", 1),
                logistics_start_month=p.get("logistics_start_month", 7),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"profile: {exc}") from None

    @property
    def compare_variants(self):
        return [_parse_variant(v, "compare.variants") for v in self.section("compare").get("variants", ["m0", "m1", "m2", "m3"])]

    def stress(self, section: str, default=(20.0, 30.0)) -> StressVector:
        s = self.section(section).get("stress" if section == "reliability" else "prediction_stress", list(default))
        try:
            return StressVector.from_celsius(*s)
        except ValueError as exc:
            raise ConfigError(f"{section}: {exc}") from None
