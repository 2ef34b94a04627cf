import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from degradex.model import (
    DEFAULT_NORMALIZATION,
    KELVIN_OFFSET,
    PARAM_NAMES,
    REFERENCE_PARAMS,
    DegradationDataset,
    DomainError,
    ModelParams,
    ModelVariant,
    StressLevel,
    StressNormalization,
    StressVector,
    UnitSeries,
    celsius_to_kelvin,
    kelvin_to_celsius,
    log_rate,
    mean_trajectory,
    phi1,
    phi3,
    rate,
    standardize_humidity,
    standardize_temperature,
)


def test_unit_conversions_round_trip():
    assert celsius_to_kelvin(60.0) == pytest.approx(333.15)
    assert kelvin_to_celsius(celsius_to_kelvin(63.75)) == pytest.approx(63.75)
    np.testing.assert_allclose(kelvin_to_celsius(celsius_to_kelvin(np.array([0.0, 90.0]))), [0.0, 90.0])


def test_stress_vector_domain():
    with pytest.raises(DomainError):
        StressVector(-1.0, 0.5)
    with pytest.raises(DomainError):
        StressVector(300.0, 0.0)
    with pytest.raises(DomainError):
        StressVector(300.0, 1.2)
    s = StressVector.from_celsius(85, 85)
    assert s.temperature == pytest.approx(358.15) and s.humidity == pytest.approx(0.85)


def test_normalization_ordering():
    with pytest.raises(DomainError):
        StressNormalization(350.0, 320.0, 0.5, 0.9)
    with pytest.raises(DomainError):
        StressNormalization(320.0, 350.0, 0.9, 0.5)


class TestStandardization:
    def test_endpoints(self, norm):
        assert standardize_temperature(norm.t_low, norm) == pytest.approx(0.0, abs=1e-15)
        assert standardize_temperature(norm.t_high, norm) == pytest.approx(1.0)
        assert standardize_humidity(norm.h_low, norm) == pytest.approx(0.0, abs=1e-15)
        assert standardize_humidity(norm.h_high, norm) == pytest.approx(1.0)

    def test_monotone(self, norm):
        t = np.linspace(280.0, 400.0, 50)
        h = np.linspace(0.1, 1.0, 50)
        assert np.all(np.diff(standardize_temperature(t, norm)) > 0)
        assert np.all(np.diff(standardize_humidity(h, norm)) > 0)

    def test_extrapolates_outside_window(self, norm):
        assert standardize_temperature(celsius_to_kelvin(20.0), norm) < 0

    def test_nonpositive_rejected(self, norm):
        with pytest.raises(DomainError):
            standardize_temperature(0.0, norm)
        with pytest.raises(DomainError):
            standardize_humidity(0.0, norm)

    def test_regime_maps(self, norm):
        tt = REFERENCE_PARAMS.t_threshold
        assert phi1(norm.t_low, norm, tt) == pytest.approx(0.0, abs=1e-15)
        assert phi1(tt, norm, tt) == pytest.approx(1.0)
        assert phi3(tt, norm, tt) == pytest.approx(0.0, abs=1e-15)
        assert phi3(norm.t_high, norm, tt) == pytest.approx(1.0)

    def test_singular_maps(self, norm):
        with pytest.raises(DomainError):
            phi1(320.0, norm, norm.t_low)
        with pytest.raises(DomainError):
            phi3(350.0, norm, norm.t_high)


def _branches(p, norm, h):
    tt = p.t_threshold
    hs = standardize_humidity(h, norm)
    low = p.alpha1 * phi1(tt, norm, tt) + p.alpha2 * hs
    high = p.alpha1 + p.alpha2 * hs + p.alpha3 * phi3(tt, norm, tt)
    return low, high


@given(
    a1=st.floats(-5, 5),
    a2=st.floats(-5, 5),
    a3=st.floats(-5, 5),
    frac=st.floats(0.01, 0.99),
    h=st.floats(0.05, 1.0),
)
def test_regimes_meet_at_threshold(a1, a2, a3, frac, h, norm):
    tt = norm.t_low + frac * (norm.t_high - norm.t_low)
    p = REFERENCE_PARAMS.replace(alpha1=a1, alpha2=a2, alpha3=a3, t_threshold=tt)
    low, high = _branches(p, norm, h)
    assert abs(low - high) <= 1e-10 * max(1.0, abs(low))
    # the vectorized form agrees just below and just above the threshold
    eps = 1e-9
    lr = log_rate(a1, a2, a3, tt, np.array([tt - eps, tt + eps]), h, norm)
    assert abs(lr[0] - lr[1]) < 1e-6 * max(1.0, abs(low))


class TestRate:
    def test_reference_regimes(self, norm):
        p = REFERENCE_PARAMS
        h = 0.85
        cool = [rate(p, "m0", StressVector.from_celsius(c, 85), norm) for c in (40, 50, 60)]
        hot = [rate(p, "m0", StressVector.from_celsius(c, 85), norm) for c in (65, 75, 85)]
        # rising below the threshold, falling above it since alpha3 < 0
        assert cool[0] < cool[1] < cool[2]
        assert hot[0] > hot[1] > hot[2]
        assert np.log(rate(p, "m0", StressVector(norm.t_low, h), norm)) == pytest.approx(
            p.alpha2 * standardize_humidity(h, norm)
        )

    def test_humidity_raises_rate(self, norm):
        lo = rate(REFERENCE_PARAMS, "m0", StressVector.from_celsius(50, 50), norm)
        hi = rate(REFERENCE_PARAMS, "m0", StressVector.from_celsius(50, 90), norm)
        assert hi > lo

    @given(t=st.floats(40.0, 90.0), h=st.floats(50.0, 90.0))
    def test_m1_is_m0_with_threshold_at_top(self, t, h):
        norm = DEFAULT_NORMALIZATION
        s = StressVector.from_celsius(t, h)
        pinned = ModelVariant.M1.pin(REFERENCE_PARAMS, norm)
        assert rate(pinned, "m1", s, norm) == pytest.approx(rate(pinned, "m0", s, norm), rel=1e-12)

    def test_m1_ignores_threshold_fields(self, norm):
        s = StressVector.from_celsius(70, 85)
        a = rate(REFERENCE_PARAMS, "m1", s, norm)
        b = rate(REFERENCE_PARAMS.replace(alpha3=7.0, t_threshold=320.0), "m1", s, norm)
        assert a == b

    def test_singular_regime_rejected(self, norm):
        p = REFERENCE_PARAMS.replace(t_threshold=norm.t_low)
        with pytest.raises(DomainError):
            rate(p, "m0", StressVector(norm.t_low - 5, 0.6), norm)


class TestMeanTrajectory:
    def test_starts_at_mu_y0(self, norm):
        s = StressVector.from_celsius(85, 85)
        assert mean_trajectory(REFERENCE_PARAMS, "m0", s, norm, 0.0) == REFERENCE_PARAMS.mu_y0

    def test_monotone_for_positive_rate(self, norm):
        t = np.linspace(0, 480, 41)
        y = mean_trajectory(REFERENCE_PARAMS, "m0", StressVector.from_celsius(60, 85), norm, t)
        assert np.all(np.diff(y) > 0)

    def test_power_law(self, norm):
        s = StressVector.from_celsius(50, 70)
        p = REFERENCE_PARAMS
        y = mean_trajectory(p, "m0", s, norm, np.array([100.0, 400.0]))
        inc = y - p.mu_y0
        assert inc[1] / inc[0] == pytest.approx(4.0**p.beta)

    def test_negative_time(self, norm):
        with pytest.raises(DomainError):
            mean_trajectory(REFERENCE_PARAMS, "m0", StressVector.from_celsius(50, 70), norm, -1.0)


class TestParams:
    def test_array_round_trip(self):
        arr = REFERENCE_PARAMS.to_array()
        assert arr.shape == (len(PARAM_NAMES),)
        assert ModelParams.from_array(arr) == REFERENCE_PARAMS
        assert ModelParams.from_dict(REFERENCE_PARAMS.to_dict()) == REFERENCE_PARAMS

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            ModelParams.from_array([1.0, 2.0])
        with pytest.raises(ValueError):
            ModelParams.from_dict({**REFERENCE_PARAMS.to_dict(), "gamma": 1.0})

    def test_reference_threshold(self):
        assert kelvin_to_celsius(REFERENCE_PARAMS.t_threshold) == pytest.approx(63.75)

    def test_validation(self, norm):
        assert REFERENCE_PARAMS.validation_errors(norm) == []
        bad = REFERENCE_PARAMS.replace(sigma_eps=-1.0, beta=2.5, t_threshold=400.0)
        errs = bad.validation_errors(norm)
        assert len(errs) == 3
        # M1 does not care where the threshold sits
        assert REFERENCE_PARAMS.replace(t_threshold=400.0).validation_errors(norm, ModelVariant.M1) == []


class TestVariants:
    @pytest.mark.parametrize("v, n", [("m0", 11), ("m1", 9), ("m2", 9), ("m3", 10)])
    def test_parameter_counts(self, v, n):
        assert ModelVariant.parse(v).n_params == n

    def test_parse(self):
        assert ModelVariant.parse("M2") is ModelVariant.M2
        with pytest.raises(ValueError):
            ModelVariant.parse("m9")

    def test_pins(self, norm):
        p = ModelVariant.M2.pin(REFERENCE_PARAMS, norm)
        assert p.sigma_a == 0 and p.sigma_bm == 0 and p.sigma_eps == REFERENCE_PARAMS.sigma_eps
        p = ModelVariant.M1.pin(REFERENCE_PARAMS, norm)
        assert p.alpha3 == 0 and p.t_threshold == norm.t_high
        assert ModelVariant.M0.pin(REFERENCE_PARAMS, norm) == REFERENCE_PARAMS


class TestDataset:
    def _level(self, n=2, lid="a", temp=60.0):
        units = [UnitSeries(np.array([12.0, 24.0]), np.array([1.0, 2.0]), f"u{i}") for i in range(n)]
        return StressLevel(StressVector.from_celsius(temp, 80), units, lid)

    def test_counts_and_subsets(self):
        ds = DegradationDataset([self._level(2, "a"), self._level(3, "b", 70.0)])
        assert (ds.n_levels, ds.n_units, ds.n_readings) == (2, 5, 10)
        assert ds.without_level(0).levels[0].level_id == "b"
        assert ds.subset([0, 1]).equals(ds)
        assert not ds.subset([1]).equals(ds)

    def test_invalid_series(self):
        with pytest.raises(ValueError):
            UnitSeries(np.array([12.0, 12.0]), np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            UnitSeries(np.array([0.0, 12.0]), np.array([1.0, 2.0]))
        with pytest.raises(ValueError):
            UnitSeries(np.array([12.0]), np.array([1.0, 2.0]))

    def test_empty_containers(self):
        with pytest.raises(ValueError):
            DegradationDataset([])
        with pytest.raises(ValueError):
            StressLevel(StressVector.from_celsius(60, 80), [])

    def test_normalization_from_dataset(self):
        ds = DegradationDataset([self._level(1, "a", 40.0), self._level(1, "b", 90.0)])
        with pytest.raises(DomainError):
            StressNormalization.from_dataset(ds)  # a single humidity cannot span a range
        lv = StressLevel(StressVector.from_celsius(90.0, 50.0), self._level(1).units, "c")
        n = StressNormalization.from_dataset(DegradationDataset([self._level(1, "a", 40.0), lv]))
        assert n.t_low == pytest.approx(40.0 + KELVIN_OFFSET) and n.h_low == pytest.approx(0.5)
