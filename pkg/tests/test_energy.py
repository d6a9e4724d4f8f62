import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dma_swipt.energy import (
    EhModel,
    InfeasibleThresholdError,
    harvested_energy,
    parse_eh_model,
    required_rf_power,
)

LOGISTIC = EhModel.logistic(e_sat=24e-3, a=150.0, b=0.014)


def test_linear_forward_and_inverse():
    model = EhModel.linear(0.5)
    assert harvested_energy(model, 2e-4) == pytest.approx(1e-4)
    assert required_rf_power(model, 1e-4) == pytest.approx(2e-4)


def test_logistic_zero_input_harvests_nothing():
    assert harvested_energy(LOGISTIC, 0.0) == 0.0


def test_logistic_saturates():
    assert harvested_energy(LOGISTIC, 10.0) == pytest.approx(LOGISTIC.e_sat, rel=1e-9)


def test_negative_power_rejected():
    with pytest.raises(ValueError):
        harvested_energy(LOGISTIC, -1e-6)
    with pytest.raises(ValueError):
        required_rf_power(LOGISTIC, -1e-6)


def test_inverse_of_zero_threshold():
    assert required_rf_power(LOGISTIC, 0.0) == 0.0


def test_saturated_threshold_is_infeasible():
    with pytest.raises(InfeasibleThresholdError):
        required_rf_power(LOGISTIC, LOGISTIC.e_sat)
    with pytest.raises(InfeasibleThresholdError):
        required_rf_power(LOGISTIC, 1.5 * LOGISTIC.e_sat)


def test_roundtrip_thousand_samples():
    rng = np.random.default_rng(42)
    targets = rng.uniform(0.0, 1.0, 1000) ** 2 * LOGISTIC.e_sat * 0.999999
    for e in targets:
        p = required_rf_power(LOGISTIC, e)
        assert abs(harvested_energy(LOGISTIC, p) - e) <= 1e-9 * LOGISTIC.e_sat


@settings(max_examples=60, deadline=None)
@given(
    st.floats(min_value=10.0, max_value=5000.0),
    st.floats(min_value=1e-4, max_value=0.05),
)
def test_logistic_strictly_increasing(a, b):
    model = EhModel.logistic(24e-3, a, b)
    # stay on the part of the curve where increments exceed roundoff
    grid = np.linspace(0.0, b + 10.0 / a, 40)
    vals = [harvested_energy(model, p) for p in grid]
    assert all(v2 > v1 for v1, v2 in zip(vals, vals[1:]))


def test_divergence_toward_saturation():
    # the requirement blows up logarithmically at saturation
    p_half = required_rf_power(LOGISTIC, 0.5 * LOGISTIC.e_sat)
    p_99 = required_rf_power(LOGISTIC, 0.99 * LOGISTIC.e_sat)
    p_near = required_rf_power(LOGISTIC, (1 - 1e-12) * LOGISTIC.e_sat)
    assert p_half < p_99 < p_near
    # each decade of remaining headroom costs about ln(10)/a more input power
    assert p_near - p_99 > np.log(1e8) / LOGISTIC.a


def test_parse_specs_roundtrip():
    m = parse_eh_model("linear:eta=0.5")
    assert m.kind == "linear" and m.eta == 0.5
    m = parse_eh_model("logistic:esat_dbm=13.8,a=150,b=0.014")
    assert m.kind == "logistic"
    assert m.e_sat == pytest.approx(1e-3 * 10 ** 1.38)
    assert parse_eh_model(m.spec_string()).e_sat == pytest.approx(m.e_sat)


def test_parse_rejects_garbage():
    for bad in ("linear:eta", "logistic:a=1,b=2", "quadratic:eta=1", "logistic:esat_dbm=13.8,a=150"):
        with pytest.raises(ValueError):
            parse_eh_model(bad)


def test_model_validation():
    with pytest.raises(ValueError):
        EhModel.linear(0.0)
    with pytest.raises(ValueError):
        EhModel.linear(1.5)
    with pytest.raises(ValueError):
        EhModel.logistic(0.0, 150.0, 0.014)
