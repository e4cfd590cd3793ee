import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phaseclusters.coupling import (
    PRESETS,
    BumpPerturbation,
    FourierCoupling,
    PerturbedCoupling,
    circle_distance,
    default_epsilon,
    perturbed_coupling,
    preset,
    wrap_phase,
    wrap_signed,
)

phases = st.floats(-50.0, 50.0, allow_nan=False)


def test_case0_values():
    g = preset("case0")
    assert g(np.pi / 8) == pytest.approx(-1.0, abs=1e-15)
    assert g(0.0) == 0.0
    assert g.derivative(0.0) == pytest.approx(-4.0, abs=1e-15)
    assert g.derivative(np.pi / 2) == pytest.approx(-4.0, abs=1e-14)


def test_case1_sums():
    g = preset("case1")
    assert g(0.0) == pytest.approx(0.31185 + 0.37096 + 0.99008, abs=1e-15)
    assert g(0.0) == pytest.approx(1.67289, abs=1e-12)
    assert g.derivative(0.0) == pytest.approx(0.10793 + 2 * 0.58180 + 4 * -0.14053, abs=1e-14)
    assert g.derivative(0.0) == pytest.approx(0.70941, abs=1e-12)


def test_case2_differs_only_in_c2():
    a, b = PRESETS["case1"], PRESETS["case2"]
    assert a.s.tolist() == b.s.tolist()
    diff = b.c - a.c
    assert diff[2] == pytest.approx(0.39 - 0.37096)
    assert np.count_nonzero(diff) == 1


def test_validation():
    with pytest.raises(ValueError):
        FourierCoupling((0.0, 1.0), (1.0, 2.0))
    with pytest.raises(ValueError):
        FourierCoupling((0.0, np.nan), (1.0,))
    with pytest.raises(KeyError):
        preset("case9")


def test_arrays_are_read_only():
    g = preset("case1")
    with pytest.raises(ValueError):
        g.c[0] = 1.0


def test_json_round_trip():
    g = preset("case2")
    h = FourierCoupling.from_json(g.to_json())
    assert h == g
    assert FourierCoupling.from_dict(g.to_dict()).c.tolist() == g.c.tolist()


def test_vectorized_matches_scalar():
    g = preset("case1")
    x = np.linspace(-7, 7, 33)
    np.testing.assert_allclose(g(x), [g(float(v)) for v in x], rtol=0, atol=1e-14)
    np.testing.assert_allclose(g.derivative(x), [g.derivative(float(v)) for v in x], rtol=0, atol=1e-14)


def test_periodicity():
    rng = np.random.default_rng(1)
    phi = rng.uniform(-10, 10, 1000)
    for g in PRESETS.values():
        assert np.max(np.abs(g(phi) - g(phi + 2 * np.pi))) < 1e-12
        assert np.max(np.abs(g.derivative(phi) - g.derivative(phi + 2 * np.pi))) < 1e-12


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_derivative_second_order(name):
    g = preset(name)
    phi = np.linspace(0, 2 * np.pi, 41)
    errs = []
    for h in (1e-3, 1e-4):
        fd = (g(phi + h) - g(phi - h)) / (2 * h)
        errs.append(np.max(np.abs(fd - g.derivative(phi))))
    # error shrinks by ~100 when h shrinks by 10
    assert errs[1] < errs[0] / 50


def test_circle_distance_examples():
    assert circle_distance(0.0, 0.0) == 0.0
    assert circle_distance(0.0, np.pi) == pytest.approx(2.0)
    assert circle_distance(0.0, np.pi / 2) == pytest.approx(1.0)


@given(phases, phases)
def test_circle_distance_symmetric(a, b):
    assert circle_distance(a, b) == pytest.approx(circle_distance(b, a), abs=1e-12)
    assert circle_distance(a, a + 2 * np.pi * 3) < 1e-12


@given(phases)
def test_wrap_ranges(x):
    w = wrap_phase(x)
    assert 0.0 <= w < 2 * np.pi
    s = wrap_signed(x)
    assert -np.pi < s <= np.pi
    assert math.isclose(math.cos(w), math.cos(x), abs_tol=1e-9)
    assert math.isclose(math.sin(s), math.sin(x), abs_tol=1e-9)


def test_bump_examples():
    b = BumpPerturbation(0.5)
    assert b(0.0) == 0.0
    assert b(0.5) == 0.0
    assert b(-0.5) == 0.0
    assert b.derivative(0.0) == -1.0
    assert b(1.0) == 0.0 and b.derivative(3.0) == 0.0
    with pytest.raises(ValueError):
        BumpPerturbation(np.pi)
    with pytest.raises(ValueError):
        BumpPerturbation(0.0)


def test_bump_derivative_matches_fd():
    b = BumpPerturbation(0.7)
    x = np.linspace(-0.69, 0.69, 51)
    h = 1e-6
    fd = (b(x + h) - b(x - h)) / (2 * h)
    np.testing.assert_allclose(b.derivative(x), fd, atol=1e-7)


def test_bump_smooth_at_edge():
    b = BumpPerturbation(1.0)
    # flat at the edge: |h| / d^k -> 0 for the distance d to the edge, any k
    d = np.array([1e-1, 5e-2, 2e-2, 1e-2])
    ratio = np.abs(b(1.0 - d)) / d**4
    assert np.all(np.diff(ratio) < 0)
    assert ratio[-1] < 1e-10


def test_perturbed_r_zero_is_identity():
    g = preset("case1")
    gr = perturbed_coupling(g, 0.0, 0.6)
    x = np.linspace(-4, 4, 101)
    np.testing.assert_array_equal(gr(x), g(x))
    np.testing.assert_array_equal(gr.derivative(x), g.derivative(x))


@given(st.floats(-10, 10), st.floats(0.05, 3.0), phases)
def test_perturbed_locality(r, eps, phi):
    g = preset("case1")
    gr = PerturbedCoupling(g, BumpPerturbation(eps, r))
    if abs(wrap_signed(phi)) >= eps:
        assert gr(phi) == g(phi)
        assert gr.derivative(phi) == g.derivative(phi)
    assert gr(np.pi) == g(np.pi) or eps > np.pi


@given(st.floats(-10, 10))
def test_perturbed_slope_at_zero(r):
    g = preset("case2")
    gr = perturbed_coupling(g, r, 0.4)
    assert gr.derivative(0.0) == pytest.approx(g.derivative(0.0) - r, abs=1e-12)
    assert gr(0.0) == g(0.0)


def test_default_epsilon():
    assert default_epsilon([0.0, np.pi / 2, np.pi]) == pytest.approx(np.pi / 4)
    assert default_epsilon([0.0, 0.2, 6.2]) == pytest.approx(0.5 * (2 * np.pi - 6.2))
    assert default_epsilon([1.0]) == pytest.approx(np.pi / 2)
