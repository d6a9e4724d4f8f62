import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dma_swipt.dma import lorentzian_weight
from dma_swipt.lorentzian import (
    map_aoh,
    map_arlch,
    map_lcph,
    map_lcush,
    map_weights,
    wrap_phase,
)

CIRCLE_TOL = 1e-9


def on_circle(values):
    return np.all(np.abs(np.abs(values - 0.5j) - 0.5) <= CIRCLE_TOL)


def test_lcph_reference_points():
    out = map_lcph(np.exp(1j * np.array([np.pi / 2, 3 * np.pi / 2, np.pi / 4])))
    assert out.values[0] == pytest.approx(1j)
    assert out.values[1] == pytest.approx(0.0)
    assert out.values[2] == pytest.approx(0.5 + 0.5j, rel=1e-12)
    assert out.tag == "lorentzian"


def test_lcush_reference_points():
    out = map_lcush(np.exp(1j * np.array([0.0, np.pi / 2, np.pi])))
    assert out.values[0] == pytest.approx(0.5 + 0.5j)
    assert out.values[1] == pytest.approx(1j)
    assert out.values[2] == pytest.approx((1j - 1) / 2)


def test_aoh_reference_points():
    out = map_aoh(np.exp(1j * np.array([np.pi, 0.0, np.pi / 2])))
    assert out.values[0] == pytest.approx(0.0, abs=1e-12)
    assert out.values[1] == pytest.approx(1j)
    assert out.values[2] == pytest.approx(0.5 * np.exp(1j * np.pi / 6))


def _grid_radius_oracle(q, r_max=3.0, step=1e-4):
    radii = np.arange(1, int(r_max / step) + 1) * step  # stays within (0, r_max]
    dist = np.abs(q[None, :] - 0.5j * radii[:, None])
    d = ((dist - radii[:, None] / 2) ** 2).sum(axis=1)
    i = int(np.argmin(d))
    return radii[i], d[i]


def test_arlch_exact_fit_single_element():
    res = map_arlch(np.array([0.6j]))
    assert res.radius == pytest.approx(0.6, abs=1e-5)
    assert res.discrepancy == pytest.approx(0.0, abs=1e-12)
    assert res.phases[0] == pytest.approx(np.pi / 2)
    assert res.weights.values[0] == pytest.approx(1j)
    r_ref, _ = _grid_radius_oracle(np.array([0.6j]))
    assert res.radius == pytest.approx(r_ref, abs=1e-3)


def test_arlch_fixed_point_on_unit_circle():
    rng = np.random.default_rng(0)
    q = lorentzian_weight(rng.uniform(0, 2 * np.pi, 16))
    res = map_arlch(q)
    assert res.radius == pytest.approx(1.0, abs=1e-6)
    assert res.discrepancy <= 1e-12
    assert np.allclose(res.weights.values, q, atol=1e-12)


def test_arlch_real_input_matches_grid_oracle():
    # a single off-axis element has a discrepancy that keeps decaying with the
    # radius, so compare objective values rather than the (ill-posed) argmin
    q = np.array([0.3 + 0j])
    res = map_arlch(q)
    _, d_ref = _grid_radius_oracle(q, r_max=2 * float(np.abs(q[0] - 1j)) + 1)
    assert res.discrepancy <= d_ref + 1e-12
    assert res.phases[0] == pytest.approx(wrap_phase(np.angle(0.3 - 0.5j * res.radius)), rel=1e-9)


def test_arlch_beats_unit_radius_and_grid():
    rng = np.random.default_rng(7)
    for _ in range(10):
        q = (rng.standard_normal(12) + 1j * rng.standard_normal(12)) * rng.uniform(0.2, 2.0)
        res = map_arlch(q)
        dist1 = np.abs(q - 0.5j)
        d_unit = float(((dist1 - 0.5) ** 2).sum())
        assert res.discrepancy <= d_unit + 1e-12
        r_max = 2 * float(np.max(np.abs(q - 1j))) + 1
        for r in np.linspace(r_max / 64, r_max, 64):
            d_r = float(((np.abs(q - 0.5j * r) - r / 2) ** 2).sum())
            assert res.discrepancy <= d_r + 1e-12


def test_arlch_centre_tiebreak():
    # element exactly at the circle centre projects to the top point
    res = map_arlch(np.array([0.5j, 0.4 + 0.1j]))
    idx = np.argmin(np.abs(np.array([0.5j, 0.4 + 0.1j]) - 0.5j * res.radius))
    # regardless of which radius wins, outputs stay on the circle
    assert on_circle(res.weights.values)


def test_arlch_rejects_zero_vector():
    with pytest.raises(ValueError):
        map_arlch(np.zeros(4, dtype=complex))


def test_dispatch():
    rng = np.random.default_rng(1)
    q = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    assert np.array_equal(map_weights(q, "lcush").values, map_lcush(q).values)
    assert np.array_equal(map_weights(q, "arlch").values, map_arlch(q).weights.values)
    passthrough = map_weights(q, None)
    assert passthrough.tag == "unconstrained"
    assert np.array_equal(passthrough.values, q)
    assert map_weights(q, "uw").tag == "unconstrained"
    with pytest.raises(ValueError):
        map_weights(q, "nope")


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_all_schemes_land_on_circle(seed):
    rng = np.random.default_rng(seed)
    q = (rng.standard_normal(12) + 1j * rng.standard_normal(12)) * rng.uniform(0.1, 3.0)
    for scheme in ("lcph", "lcush", "aoh", "arlch"):
        assert on_circle(map_weights(q, scheme).values), scheme


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_lcush_preserves_phase(seed):
    rng = np.random.default_rng(seed)
    q = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    psi = wrap_phase(np.angle(q))
    out = map_lcush(q).values
    assert np.allclose(wrap_phase(np.angle(out - 0.5j)), psi, atol=1e-12)


def test_determinism_bit_identical():
    rng = np.random.default_rng(3)
    q = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    a = map_arlch(q)
    b = map_arlch(q.copy())
    assert a.radius == b.radius
    assert np.array_equal(a.weights.values, b.weights.values)
    assert np.array_equal(a.phases, b.phases)
