import json
import subprocess
import sys

import pytest

from degradex.cli import EXIT_INPUT, EXIT_OK, EXIT_OPTIM, main
from degradex.config import ConfigError, RunConfig

SMALL = {
    "seed": 3,
    "design": {"units_per_level": 3, "measurements_per_unit": 10},
    "optimizer": {"max_iterations": 150, "restarts": 2, "polish_evaluations": 200},
    "subsample": {"repeats": 2},
    "mc": {"paths": 200, "horizon": 2000.0, "threshold": 11.0},
    "reliability": {"stress": [85, 85]},
}


@pytest.fixture
def config(tmp_path):
    def make(**extra):
        cfg = {**SMALL, **extra}
        p = tmp_path / f"cfg{len(list(tmp_path.glob('cfg*')))}.json"
        p.write_text(json.dumps(cfg))
        return str(p)

    return make


@pytest.fixture
def data(tmp_path, config):
    out = tmp_path / "sim"
    assert main(["simulate", "--config", config(), "--out-dir", str(out)]) == EXIT_OK
    return str(out / "data.csv")


def _json(path):
    return json.loads(path.read_text())


def test_simulate_outputs(tmp_path, config):
    out = tmp_path / "s"
    assert main(["simulate", "--config", config(), "--out-dir", str(out)]) == 0
    manifest = _json(out / "manifest.json")
    assert manifest["seed"] == 3 and manifest["outputs"] == ["data.csv", "simulate.json"]
    assert _json(out / "simulate.json")["n_readings"] == 8 * 3 * 10


def test_fit_and_reliability_are_reproducible(tmp_path, config, data):
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["fit", "--config", config(), "--data", data, "--out-dir", str(out)]) == 0
        assert main(["reliability", "--config", config(), "--data", data, "--out-dir", str(out)]) == 0
        outs.append(out)
    for name in ("fit.json", "reliability.csv", "reliability.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    fit = _json(outs[0] / "fit.json")
    assert fit["metrics"]["aic"] == pytest.approx(-2 * fit["loglik"] + 2 * 11)
    rows = (outs[0] / "reliability.csv").read_text().splitlines()
    assert rows[0] == "t_h,value"
    values = [float(r.split(",")[1]) for r in rows[1:]]
    assert all(b <= a for a, b in zip(values, values[1:]))


def test_unreachable_threshold_reports_full_censoring(tmp_path, config):
    out = tmp_path / "r"
    cfg = config(mc={"paths": 50, "horizon": 500.0, "threshold": 1e6})
    assert main(["reliability", "--config", cfg, "--out-dir", str(out)]) == 0
    rel = _json(out / "reliability.json")
    assert rel["censored_fraction"] == 1.0 and rel["reliability_at_horizon"] == 1.0
    assert rel["median_lifetime_h"] is None


def test_profile_predict(tmp_path, config):
    out = tmp_path / "p"
    cfg = config(
        profile={"warehouse": [25, 60], "logistics": [[45, 90]], "years": 1},
        mc={"paths": 50, "horizon": 8760.0, "threshold": 10.0, "time_step": 24.0},
    )
    assert main(["profile-predict", "--config", cfg, "--out-dir", str(out)]) == 0
    deg = (out / "degradation.csv").read_text().splitlines()
    assert deg[0] == "t_h,value" and len(deg) > 300


def test_intervals_and_mechanism(tmp_path, config, data):
    out = tmp_path / "i"
    assert main(["intervals", "--config", config(variant="m2"), "--data", data, "--out-dir", str(out)]) == 0
    iv = _json(out / "intervals.json")
    assert iv["repeats"] == 2 and len(iv["intervals"]["mu_y0"]["samples"]) == 2
    assert main(["mechanism", "--config", config(), "--data", data, "--out-dir", str(out)]) == 0
    mech = _json(out / "mechanism.json")
    assert set(mech) >= {"transition_detected", "sign_frequency_low", "sign_frequency_high"}


def test_compare(tmp_path, config, data):
    out = tmp_path / "c"
    cfg = config(
        compare={"variants": ["m2"], "prediction_stress": [70, 80], "grid_size": 50},
        mc={"paths": 100, "horizon": 500.0, "threshold": 10.0},
    )
    assert main(["compare", "--config", cfg, "--data", data, "--out-dir", str(out)]) == 0
    res = _json(out / "compare.json")
    assert len(res["tests"]) == 8 and {"kld", "cmd", "rmse", "l_max"} <= set(res["tests"][0])


class TestErrors:
    def test_unknown_config_key(self, tmp_path, config, capsys):
        assert main(["fit", "--config", config(optimiser={"x": 1})]) == EXIT_INPUT
        err = capsys.readouterr().err
        assert err.startswith("degradex: error[input]:") and "optimiser" in err

    def test_missing_data(self, config, capsys):
        assert main(["fit", "--config", config()]) == EXIT_INPUT
        assert "--data" in capsys.readouterr().err

    def test_malformed_data(self, tmp_path, config, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("level_id,temperature_c,humidity_pct,unit_id,time_h,sar\nA,60,80,u1,12,x\n")
        assert main(["fit", "--config", config(), "--data", str(bad)]) == EXIT_INPUT
        assert "line 2" in capsys.readouterr().err

    def test_infeasible_bounds(self, tmp_path, config, data, capsys):
        cfg = config(bounds={"beta": [2.5, 3.0]})
        assert main(["fit", "--config", cfg, "--data", data, "--out-dir", str(tmp_path / "x")]) == EXIT_OPTIM
        assert "error[optimization]" in capsys.readouterr().err

    def test_bad_threads_env(self, config, monkeypatch, capsys):
        monkeypatch.setenv("DEGRADEX_THREADS", "many")
        assert main(["simulate", "--config", config()]) == EXIT_INPUT

    def test_config_validation_messages(self):
        with pytest.raises(ConfigError, match="expected"):
            RunConfig.from_dict({"mc": {"paths": "10"}})
        with pytest.raises(ConfigError, match="unknown variant"):
            RunConfig.from_dict({"variant": "m7"})
        with pytest.raises(ConfigError, match="either segments"):
            RunConfig.from_dict({"profile": {"segments": [{"duration_h": 1, "temperature_c": 20, "humidity_pct": 50}],
                                             "warehouse": [20, 50]}})


def test_console_script(tmp_path):
    out = tmp_path / "cs"
    proc = subprocess.run(
        [sys.executable, "-m", "degradex.cli", "simulate", "--seed", "1", "--out-dir", str(out)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (out / "data.csv").is_file()
