"""Command-line front end.

Every command writes its results plus ``manifest.json`` into ``--out-dir``.
Exit codes: 0 ok, 2 input error, 3 optimization failure. Errors print one
line ``degradex: error[<category>]: <message>`` on stderr.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import os
import platform
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from . import _backend
from .config import ConfigError, RunConfig
from .csvio import DataFormatError, read_csv, write_csv, write_series
from .evaluation import MetricReport, loso_extrapolation, rmse, robustness
from .inference import determine_mechanism, subsample_intervals
from .model import KELVIN_OFFSET, DomainError, ModelVariant, kelvin_to_celsius
from .optimize import OptimizationError, fit
from .reliability import StressProfile, drift_factor, reliability_bands, reliability_curve, simulation_grid
from .synth import generate_dataset

EXIT_OK, EXIT_INPUT, EXIT_OPTIM = 0, 2, 3
COMMANDS = ("simulate", "fit", "intervals", "mechanism", "reliability", "compare", "profile-predict")


def _version() -> str:
    try:
        return metadata.version("degradex")
    except metadata.PackageNotFoundError:
        return "unknown"


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


class _Run:
    def __init__(self, command: str, cfg: RunConfig, out_dir: Path):
        self.command, self.cfg, self.out = command, cfg, out_dir
        self.files: list = []

    def json(self, name, obj):
        _write_json(self.out / name, obj)
        self.files.append(name)

    def series(self, name, rows, with_bands=False):
        write_series(self.out / name, rows, with_bands)
        self.files.append(name)

    def data(self):
        path = self.cfg.raw.get("data")
        if not path:
            raise ConfigError(f"command {self.command!r} needs --data")
        return read_csv(path)

    def manifest(self):
        _write_json(
            self.out / "manifest.json",
            {
                "command": self.command,
                "config": self.cfg.raw,
                "seed": self.cfg.seed,
                "version": _version(),
                "outputs": self.files,
                "numba": _backend.USE_NUMBA,
                "python": platform.python_version(),
                "numpy": np.__version__,
                "created": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
            },
        )


def _fit_summary(res, data, cfg):
    report = MetricReport.build(rmse(data, res.params, res.variant, cfg.normalization), res.loglik, res.variant.n_params)
    d = res.to_dict()
    d["metrics"] = report.to_dict()
    d["t_threshold_c"] = kelvin_to_celsius(res.params.t_threshold)
    return d


def _cmd_simulate(run: _Run):
    cfg = run.cfg
    ds = generate_dataset(cfg.params, cfg.variant, cfg.design, cfg.normalization, cfg.seed)
    write_csv(ds, run.out / "data.csv")
    run.files.append("data.csv")
    run.json("simulate.json", {"variant": cfg.variant.value, "params": cfg.params.to_dict(), "n_levels": ds.n_levels,
                               "n_units": ds.n_units, "n_readings": ds.n_readings})


def _cmd_fit(run: _Run):
    cfg = run.cfg
    data = run.data()
    res = fit(data, cfg.variant, cfg.normalization, cfg.bounds, cfg.optimizer)
    summary = _fit_summary(res, data, cfg)
    summary["convergence_trace"] = [[int(i), float(v)] for i, v in res.convergence_trace]
    run.json("fit.json", summary)
    return res


def _cmd_intervals(run: _Run):
    cfg = run.cfg
    data = run.data()
    point = fit(data, cfg.variant, cfg.normalization, cfg.bounds, cfg.optimizer)
    est = subsample_intervals(data, cfg.variant, cfg.normalization, cfg.bounds, cfg.optimizer, cfg.subsample, point)
    run.json("intervals.json", {
        "variant": cfg.variant.value,
        "confidence": cfg.subsample.confidence,
        "repeats": cfg.subsample.repeats,
        "intervals": {k: v.to_dict(with_samples=True) for k, v in est.items()},
    })


def _cmd_mechanism(run: _Run):
    cfg = run.cfg
    split = cfg.section("mechanism").get("split_c", 60.0) + KELVIN_OFFSET
    verdict = determine_mechanism(run.data(), cfg.normalization, cfg.bounds, cfg.optimizer, cfg.subsample, split)
    run.json("mechanism.json", verdict.to_dict())


def _params_for_prediction(run: _Run):
    """Fit on ``--data`` when given, else use the ``params`` section."""
    cfg = run.cfg
    if cfg.raw.get("data"):
        data = run.data()
        res = fit(data, cfg.variant, cfg.normalization, cfg.bounds, cfg.optimizer)
        return res.params, data, res
    return cfg.variant.pin(cfg.params, cfg.normalization), None, None


def _reliability_outputs(run: _Run, params, data, profile, point_fit=None, prefix=""):
    cfg = run.cfg
    mc = cfg.mc()
    rsec = cfg.section("reliability")
    if rsec.get("bands"):
        if data is None:
            raise ConfigError("reliability bands need --data for subsampling")
        sub = subsample_intervals(data, cfg.variant, cfg.normalization, cfg.bounds, cfg.optimizer, cfg.subsample, point_fit)
        names = list(sub)
        sets = [
            params.replace(**{n: float(sub[n].samples[w]) for n in names}) for w in range(cfg.subsample.repeats)
        ]
        conf = rsec.get("confidence", cfg.subsample.confidence)
        curve = reliability_bands(sets, cfg.variant, profile, cfg.normalization, mc, conf, point_params=params)
        _, sample = reliability_curve(params, cfg.variant, profile, cfg.normalization, mc)
        run.series(prefix + "reliability.csv", curve.rows(), with_bands=True)
    else:
        curve, sample = reliability_curve(params, cfg.variant, profile, cfg.normalization, mc)
        run.series(prefix + "reliability.csv", curve.rows())
    run.json(prefix + "reliability.json", {
        "variant": cfg.variant.value,
        "params": params.to_dict(),
        "threshold": mc.threshold,
        "horizon_h": mc.horizon,
        "paths": mc.paths,
        "censored_fraction": sample.censored_fraction,
        "n_censored": sample.n_censored,
        "n_crossed": sample.n_crossed,
        "median_lifetime_h": float(np.median(sample.lifetimes)) if sample.censored_fraction < 0.5 else None,
        "reliability_at_horizon": float(curve.values[-1]),
    })


def _cmd_reliability(run: _Run):
    cfg = run.cfg
    params, data, res = _params_for_prediction(run)
    mc = cfg.mc()
    profile = StressProfile.constant(cfg.stress("reliability"), mc.horizon)
    _reliability_outputs(run, params, data, profile, res)


def _cmd_profile_predict(run: _Run):
    cfg = run.cfg
    profile = cfg.profile
    if profile is None:
        raise ConfigError("profile-predict needs a 'profile' section")
    params, data, res = _params_for_prediction(run)
    mc = cfg.mc()
    t = simulation_grid(profile, mc)
    p = cfg.variant.pin(params, cfg.normalization)
    mean = p.mu_y0 + p.mu_a * drift_factor(p, cfg.variant, profile, cfg.normalization, t)
    run.series("degradation.csv", zip(t, mean))
    _reliability_outputs(run, params, data, profile, res)


def _cmd_compare(run: _Run):
    cfg = run.cfg
    data = run.data()
    variants = cfg.compare_variants
    csec = cfg.section("compare")
    norm, bounds, opt = cfg.normalization, cfg.bounds, cfg.optimizer
    full = {v: fit(data, v, norm, bounds, opt) for v in variants}
    loso, loso_fits = loso_extrapolation(data, variants, norm, bounds, opt, return_fits=True)
    mc = cfg.mc()
    rob = robustness(data, variants, norm, bounds, opt, cfg.stress("compare"), mc,
                     k=csec.get("grid_size", 500), loso_fits=loso_fits, full_fits=full)
    level_ids = [lv.level_id or str(i + 1) for i, lv in enumerate(data.levels)]
    out = {"full_fit": {}, "tests": []}
    for v in variants:
        out["full_fit"][v.value] = _fit_summary(full[v], data, cfg)
    for li, lid in enumerate(level_ids):
        for v in variants:
            out["tests"].append({"held_out_level": lid, "variant": v.value, **loso[(li, v.value)],
                                 **rob[(li, v.value)].to_dict()})
    run.json("compare.json", out)


_HANDLERS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "intervals": _cmd_intervals,
    "mechanism": _cmd_mechanism,
    "reliability": _cmd_reliability,
    "compare": _cmd_compare,
    "profile-predict": _cmd_profile_predict,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="degradex", description="Degradation modeling with a stress-induced mechanism transition.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--out-dir", help="directory for result files (default: current directory)")
    common.add_argument("--data", help="CSV panel: level_id,temperature_c,humidity_pct,unit_id,time_h,sar")
    common.add_argument("--variant", choices=[v.value for v in ModelVariant], help="model variant")
    common.add_argument("--threads", type=int, help="kernel threads (fallback: DEGRADEX_THREADS)")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _fail(category: str, message: str, code: int) -> int:
    print(f"degradex: error[{category}]: {' '.join(str(message).split())}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    threads = args.threads
    if threads is None and os.environ.get("DEGRADEX_THREADS"):
        try:
            threads = int(os.environ["DEGRADEX_THREADS"])
        except ValueError:
            return _fail("input", "DEGRADEX_THREADS must be an integer", EXIT_INPUT)
    try:
        cfg = RunConfig.load(
            args.config,
            {"seed": args.seed, "data": args.data, "variant": args.variant, "out_dir": args.out_dir, "threads": threads},
        )
        _backend.set_threads(cfg.raw.get("threads"))
        out = Path(cfg.raw.get("out_dir", "."))
        out.mkdir(parents=True, exist_ok=True)
        run = _Run(args.command, cfg, out)
        _HANDLERS[args.command](run)
        run.manifest()
    except OptimizationError as exc:
        return _fail("optimization", exc, EXIT_OPTIM)
    except (ConfigError, DataFormatError, DomainError, ValueError, OSError) as exc:
        return _fail("input", exc, EXIT_INPUT)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
