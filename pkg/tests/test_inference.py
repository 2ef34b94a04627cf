import numpy as np
import pytest

from degradex.inference import (
    SubsampleConfig,
    _one_sided_confidence,
    determine_mechanism,
    subsample_intervals,
    subsample_size,
)
from degradex.model import REFERENCE_PARAMS, DegradationDataset, StressVector
from degradex.optimize import OptimizerConfig
from degradex.synth import ExperimentDesign, generate_dataset

QUICK = OptimizerConfig(max_iterations=120, restarts=2, polish_evaluations=200, seed=0)


@pytest.fixture(scope="module")
def panel(norm):
    return generate_dataset(REFERENCE_PARAMS, "m0", ExperimentDesign(units_per_level=4, measurements_per_unit=10), norm, 2)


def test_subsample_size():
    assert subsample_size(12, 0.632) == 8
    assert subsample_size(1, 0.632) == 1
    assert subsample_size(5, 1.0) == 5


def test_config_validation():
    for bad in (dict(ratio=0.0), dict(ratio=1.5), dict(repeats=1), dict(confidence=1.0)):
        with pytest.raises(ValueError):
            SubsampleConfig(**bad)


def test_full_ratio_gives_zero_width(panel, norm):
    est = subsample_intervals(panel, "m2", norm, opt_config=QUICK, sub_config=SubsampleConfig(ratio=1.0, repeats=3))
    for e in est.values():
        assert e.lower == e.upper == e.point
        assert np.all(e.samples == e.point)


def test_intervals_deterministic_and_ordered(panel, norm):
    cfg = SubsampleConfig(repeats=4, seed=3)
    a = subsample_intervals(panel, "m2", norm, opt_config=QUICK, sub_config=cfg)
    b = subsample_intervals(panel, "m2", norm, opt_config=QUICK, sub_config=cfg)
    assert set(a) == set(REFERENCE_PARAMS.to_dict()) - {"sigma_a", "sigma_bm"}
    for name in a:
        np.testing.assert_array_equal(a[name].samples, b[name].samples)
        assert a[name].lower <= a[name].upper
        assert np.isfinite([a[name].lower, a[name].upper]).all()


def test_one_sided_confidence():
    s = np.array([-1.0, 0.5, 1.0, 2.0])
    assert _one_sided_confidence(s, positive=True) == 0.75
    assert _one_sided_confidence(s, positive=False) == 0.25
    assert _one_sided_confidence(np.ones(5), positive=True) == 1.0


class TestMechanism:
    def test_partitions_must_be_populated(self, panel, norm):
        with pytest.raises(ValueError, match="no stress level"):
            determine_mechanism(panel, norm, opt_config=QUICK, sub_config=SubsampleConfig(repeats=2), split=400.0)
        with pytest.raises(ValueError, match="distinct temperatures"):
            # only the 90 degC level is at or above 87 degC
            determine_mechanism(panel, norm, opt_config=QUICK, sub_config=SubsampleConfig(repeats=2), split=360.15)

    def test_order_invariant(self, panel, norm):
        cfg = SubsampleConfig(repeats=2, seed=1)
        a = determine_mechanism(panel, norm, opt_config=QUICK, sub_config=cfg)
        b = determine_mechanism(DegradationDataset(panel.levels[::-1]), norm, opt_config=QUICK, sub_config=cfg)
        assert a.to_dict() == b.to_dict()
        assert 0 <= a.sign_frequency_low <= 1 and 0 <= a.sign_frequency_high <= 1

    def test_single_unit_levels(self, norm):
        design = ExperimentDesign(units_per_level=1, measurements_per_unit=8)
        ds = generate_dataset(REFERENCE_PARAMS, "m0", design, norm, seed=0)
        v = determine_mechanism(ds, norm, opt_config=QUICK, sub_config=SubsampleConfig(repeats=2))
        assert v.alpha1_low.lower <= v.alpha1_low.upper
        assert v.split_temperature == pytest.approx(333.15)

    def test_detects_reference_transition(self, norm):
        design = ExperimentDesign(units_per_level=6, measurements_per_unit=20)
        ds = generate_dataset(REFERENCE_PARAMS, "m0", design, norm, seed=0)
        cfg = OptimizerConfig(max_iterations=600, seed=0)
        v = determine_mechanism(ds, norm, opt_config=cfg, sub_config=SubsampleConfig(repeats=2))
        assert v.alpha1_low.point > 0 and v.transition_detected == (v.alpha1_high.point < 0)
