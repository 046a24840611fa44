import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from canham import linops
from canham.foundation import (
    BlendField,
    Constant,
    NearestDistance,
    RadialField,
    blend,
    cutoff,
    distance_to_set,
    equator_points,
    geodesic_distance,
    psi,
    psi_cut,
    unit_check,
)
from conftest import geodesic, geodesic_fd, random_sphere, random_tangent
from oracles import smooth_step

unit = st.floats(-1.5, 1.5, allow_nan=False)


def test_geodesic_distance_examples():
    e = np.eye(3)
    assert geodesic_distance(e[2], e[2])[0] == 0.0
    assert_allclose(geodesic_distance(e[2], -e[2]), np.pi, rtol=1e-15)
    assert_allclose(geodesic_distance(e[0], e[1]), np.pi / 2, rtol=1e-15)


def test_geodesic_distance_small_angles_are_accurate():
    t = 1e-9
    x = np.array([np.cos(t), np.sin(t), 0.0])
    assert_allclose(geodesic_distance(x, np.array([1.0, 0.0, 0.0])), t, rtol=1e-12)


def test_distance_to_set_examples():
    north = np.array([[0.0, 0.0, 1.0]])
    assert distance_to_set(north, north)[0] == 0.0
    l2 = np.array([[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])
    assert_allclose(distance_to_set(np.array([0.0, 1.0, 0.0]), l2), np.pi / 2)
    q = np.array([np.cos(np.pi / 3), np.sin(np.pi / 3), 0.0])
    assert_allclose(distance_to_set(q, equator_points(3)), np.pi / 3, rtol=1e-14)


def test_distance_to_set_is_1_lipschitz(rng):
    pts = equator_points(3)
    x = random_sphere(rng, 500)
    v = random_tangent(rng, x)
    h = 1e-3
    y = geodesic(x, v, h)
    jump = np.abs(distance_to_set(y, pts) - distance_to_set(x, pts))
    assert jump.max() <= h * (1.0 + 1e-9)


def test_unit_check():
    unit_check(np.array([[0.0, 0.0, 1.0]]), 3)
    with pytest.raises(ValueError):
        unit_check(np.array([[0.0, 0.0, 1.001]]), 3)


def test_psi_examples():
    assert psi(-1.0) == 0.0
    assert psi(1.0) == 1.0
    assert_allclose(psi(0.0), 0.5, rtol=1e-15)


@settings(max_examples=200, deadline=None)
@given(unit)
def test_psi_matches_the_exponential_form(t):
    assert_allclose(psi(t), float(smooth_step(t)), atol=1e-15)


def test_psi_monotone_and_odd():
    t = np.linspace(-1.2, 1.2, 10_000)
    v = psi(t)
    assert np.min(np.diff(v)) >= 0.0
    assert_allclose(v + psi(-t), 1.0, atol=1e-14)


def test_psi_derivatives_converge_at_second_order():
    t = np.linspace(-0.9, 0.9, 37)
    _, d1, d2 = cutoff(t, order=2)
    errs = []
    for h in (1e-3, 5e-4):
        fd1 = (psi(t + h) - psi(t - h)) / (2 * h)
        fd2 = (psi(t + h) - 2 * psi(t) + psi(t - h)) / h**2
        errs.append((np.abs(fd1 - d1).max(), np.abs(fd2 - d2).max()))
    for k in range(2):
        assert_allclose(errs[0][k] / errs[1][k], 4.0, rtol=0.1)


def test_psi_cut_examples():
    assert psi_cut(0.0, 1.0, 0.0) == 0.0
    assert psi_cut(0.0, 1.0, 1.0) == 1.0
    with pytest.raises(ValueError):
        psi_cut(1.0, 1.0, 0.5)


@settings(max_examples=200, deadline=None)
@given(st.floats(-3.0, 3.0, allow_nan=False))
def test_psi_cut_partition_of_unity(x):
    assert_allclose(psi_cut(1.0, 0.0, x) + psi_cut(0.0, 1.0, x), 1.0, atol=1e-15)


def test_blend_of_equal_fields_is_the_field():
    x = np.linspace(-1.0, 2.0, 301)
    f = np.sin
    assert_allclose(blend(0.0, 1.0, x, f, f), f(x), atol=1e-15)


def test_blend_is_exactly_f0_near_a():
    x = np.linspace(-1.0, 1.0 / 3.0, 200)
    out = blend(0.0, 1.0, x, np.cos, lambda y: np.full_like(y, np.inf))
    assert np.array_equal(out, np.cos(x))


def test_blend_is_linear(rng):
    x = rng.uniform(-0.5, 1.5, 400)
    f0, f1, g0, g1 = np.sin, np.cos, np.exp, np.tanh
    lhs = blend(0.0, 1.0, x, lambda y: f0(y) + g0(y), lambda y: f1(y) + g1(y))
    rhs = blend(0.0, 1.0, x, f0, f1) + blend(0.0, 1.0, x, g0, g1)
    assert_allclose(lhs, rhs, rtol=1e-14, atol=1e-14)


def _blend_field():
    p = np.array([1.0, 0.0, 0.0])
    near = RadialField(p, linops.green_profile)
    return BlendField(0.3, 0.6, NearestDistance(p), near, Constant(0.7))


def test_blend_field_jet_matches_finite_differences(rng):
    field = _blend_field()
    p = np.array([1.0, 0.0, 0.0])
    x = random_sphere(rng, 4000)
    d = geodesic_distance(x, p)
    x = x[(d > 0.35) & (d < 0.55)][:200]
    v = random_tangent(rng, x)
    jet = field.jet(x, order=2)
    d1 = np.sum(jet.grad * v, axis=1)
    d2 = np.einsum("ni,nij,nj->n", v, jet.hess, v)
    errs = []
    for h in (2e-3, 1e-3):
        fd1, fd2 = geodesic_fd(field, x, v, h)
        errs.append((np.abs(fd1 - d1).max(), np.abs(fd2 - d2).max()))
    for k in range(2):
        assert 3.0 < errs[0][k] / errs[1][k] < 5.0


def test_radial_field_laplacian_of_green_function(rng):
    p = np.array([0.0, 0.0, 1.0])
    x = random_sphere(rng, 2000)
    d = geodesic_distance(x, p)
    x = x[(d > 0.05) & (d < np.pi - 0.05)]
    jet = RadialField(p, linops.green_profile).jet(x)
    assert np.abs(jet.laplacian() + 2.0 * jet.value).max() < 1e-10
    # gradient is tangent
    assert np.abs(np.sum(jet.grad * x, axis=1)).max() < 1e-12
