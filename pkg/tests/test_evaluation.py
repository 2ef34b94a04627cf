import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats

from degradex.evaluation import (
    MetricReport,
    aic,
    cmd,
    divergence,
    kld,
    lifetime_density,
    loso_extrapolation,
    rmse,
    robustness,
)
from degradex.model import REFERENCE_PARAMS, StressVector
from degradex.optimize import OptimizerConfig
from degradex.reliability import LifetimeSample, MCConfig
from degradex.synth import ExperimentDesign, generate_dataset

QUICK = OptimizerConfig(max_iterations=100, restarts=2, polish_evaluations=200)
QUIET = REFERENCE_PARAMS.replace(sigma_y0=0.0, sigma_a=0.0, sigma_bm=0.0, sigma_eps=0.0)
probs = arrays(np.float64, 20, elements=st.floats(0.0, 1.0))


class TestAIC:
    def test_published_values(self):
        assert aic(-461.19, 11) == pytest.approx(944.38, abs=1e-2)
        assert aic(-461.19, 9) == pytest.approx(940.38, abs=1e-2)

    def test_report(self):
        r = MetricReport.build(0.1, -100.0, 4)
        assert r.aic == 208.0 and r.to_dict()["n_p"] == 4
        with pytest.raises(ValueError):
            aic(1.0, 0)


class TestRMSE:
    def test_zero_for_noise_free_data(self, norm):
        ds = generate_dataset(QUIET, "m0", ExperimentDesign(units_per_level=2, measurements_per_unit=6), norm, seed=0)
        assert rmse(ds, QUIET, "m0", norm) == pytest.approx(0.0, abs=1e-12)

    def test_constant_offset(self, norm):
        ds = generate_dataset(QUIET, "m0", ExperimentDesign(units_per_level=2, measurements_per_unit=6), norm, seed=0)
        assert rmse(ds, QUIET.replace(mu_y0=QUIET.mu_y0 + 0.25), "m0", norm) == pytest.approx(0.25)


class TestDivergences:
    @given(probs)
    def test_self_divergence_is_zero(self, f):
        assert kld(f, f) == 0.0
        assert cmd(f, f) == 0.0

    @given(probs, probs)
    def test_cmd_symmetric(self, a, b):
        assert cmd(a, b) == cmd(b, a) >= 0.0

    def test_kld_asymmetric(self):
        p = np.array([0.9, 0.1])
        q = np.array([0.5, 0.5])
        assert kld(p, q) != pytest.approx(kld(q, p), rel=1e-3)
        assert kld(p, q) > 0 and kld(q, p) > 0

    def test_cmd_value(self):
        assert cmd(np.ones(5), np.zeros(5)) == 5.0

    def test_gaussian_kld(self):
        x = np.linspace(-10, 10, 500)
        p = stats.norm.pdf(x, 0.0, 1.0)
        q = stats.norm.pdf(x, 0.5, 1.3)
        p, q = p / p.sum(), q / q.sum()
        exact = np.log(1.3) + (1 + 0.5**2) / (2 * 1.3**2) - 0.5
        assert kld(p, q) == pytest.approx(exact, rel=0.05)

    def test_input_errors(self):
        with pytest.raises(ValueError):
            kld(np.ones(3), np.ones(4))
        with pytest.raises(ValueError):
            cmd(np.ones(3), np.ones(4))
        with pytest.raises(ValueError):
            kld(np.array([-0.1, 1.0]), np.array([0.5, 0.5]))


def test_lifetime_density_excludes_censored():
    s = LifetimeSample(np.array([1.0, 2.0, 9.0, 10.0]), np.array([False, False, False, True]), 10.0)
    f = lifetime_density(s, 10.0, k=5)
    assert f.sum() == pytest.approx(0.75)
    np.testing.assert_allclose(f, [0.25, 0.25, 0, 0, 0.25])
    assert lifetime_density(s, 10.0, k=10).size == 10


def test_identical_models_have_zero_divergence(norm):
    mc = MCConfig(horizon=500.0, threshold=10.5, paths=300, time_step=12.0)
    r = divergence(REFERENCE_PARAMS, REFERENCE_PARAMS, "m0", StressVector.from_celsius(85, 85), norm, mc, k=100)
    assert r.kld == 0.0 and r.cmd == 0.0
    assert r.horizon >= 500.0


def test_divergence_grows_with_parameter_gap(norm):
    mc = MCConfig(horizon=2000.0, threshold=10.5, paths=400)
    s = StressVector.from_celsius(85, 85)
    small = divergence(REFERENCE_PARAMS, REFERENCE_PARAMS.replace(mu_a=0.0035), "m0", s, norm, mc, 100, horizon=4000.0)
    big = divergence(REFERENCE_PARAMS, REFERENCE_PARAMS.replace(mu_a=0.0050), "m0", s, norm, mc, 100, horizon=4000.0)
    assert big.cmd > small.cmd > 0


@pytest.fixture(scope="module")
def two_levels(norm):
    levels = [StressVector.from_celsius(50, 75), StressVector.from_celsius(85, 80)]
    design = ExperimentDesign(levels=levels, units_per_level=3, measurements_per_unit=8)
    return generate_dataset(REFERENCE_PARAMS, "m2", design, norm, seed=1)


class TestHarnesses:
    def test_loso_two_levels(self, two_levels, norm):
        report, fits = loso_extrapolation(two_levels, ["m2"], norm, opt_config=QUICK, return_fits=True)
        assert set(report) == {(0, "m2"), (1, "m2")}
        for v in report.values():
            assert v["rmse"] >= 0 and np.isfinite(v["l_max"])
        assert fits[(0, "m2")].variant.value == "m2"

    def test_loso_needs_two_levels(self, two_levels, norm):
        with pytest.raises(ValueError):
            loso_extrapolation(two_levels.subset([0]), ["m2"], norm, opt_config=QUICK)

    def test_robustness_reports(self, two_levels, norm):
        mc = MCConfig(horizon=500.0, threshold=10.0, paths=200)
        out = robustness(two_levels, ["m2"], norm, opt_config=QUICK, prediction_stress=StressVector.from_celsius(70, 80), mc=mc, k=50)
        assert set(out) == {(0, "m2"), (1, "m2")}
        for r in out.values():
            assert r.cmd >= 0 and r.grid_size == 50 and np.isfinite(r.kld)
