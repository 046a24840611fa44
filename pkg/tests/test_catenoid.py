import numpy as np
import pytest
from numpy.testing import assert_allclose

from canham.catenoid import (
    BridgeChart,
    bridge_mean_curvature_christoffel,
    bridge_willmore,
    catenoid_jet_profile,
    catenoid_profile,
    fermi_christoffels,
    refined_deficit_expansion,
)
from canham.quadrature import QuadratureSpec
from oracles import bridge_mean_curvature, sphere_willmore_deficit_closed_form

P = np.array([1.0, 0.0, 0.0])


def chart(tau=1e-4, alpha=0.5):
    return BridgeChart(P, tau, alpha)


def test_profile_vanishes_at_waist_and_increases():
    tau = 1e-4
    assert catenoid_profile(tau, tau) == 0.0
    r = np.linspace(tau, 0.1, 1000)
    assert np.all(np.diff(catenoid_profile(tau, r)) > 0)
    with pytest.raises(ValueError):
        catenoid_profile(tau, 0.5 * tau)


def test_profile_slope_matches_finite_differences():
    tau = 1e-4
    r = np.linspace(2, 50, 30) * tau
    errs = []
    for h in (1e-2 * tau, 5e-3 * tau):
        fd = (catenoid_profile(tau, r + h) - catenoid_profile(tau, r - h)) / (2 * h)
        errs.append(np.abs(fd - catenoid_profile(tau, r, 1)).max())
    assert_allclose(errs[0] / errs[1], 4.0, rtol=0.05)
    g, d1, d2 = catenoid_jet_profile(tau)(r)
    assert_allclose(d1, catenoid_profile(tau, r, 1), rtol=1e-14)
    fd2 = (catenoid_profile(tau, r + 1e-3 * tau, 1) - catenoid_profile(tau, r - 1e-3 * tau, 1)) / (2e-3 * tau)
    assert_allclose(d2, fd2, rtol=1e-5)


def test_chart_ends_and_symmetry():
    c = chart()
    r, z = c.coords(np.array([-c.s_max, 0.0, c.s_max]))
    assert_allclose(r, [1e-2, 1e-4, 1e-2], rtol=1e-13)
    assert z[1] == 0.0 and z[0] == -z[2]
    s = np.linspace(0, c.s_max, 7)
    th = np.linspace(0, 6, 7)
    up, down = c.embed(s, th), c.embed(-s, th)
    assert_allclose(down, up * np.array([1, 1, 1, -1]), atol=1e-17)
    assert_allclose(np.linalg.norm(up, axis=-1), 1.0, rtol=1e-15)


def test_boundary_trace_matches_profile():
    for tau in (1e-3, 1e-4, 1e-5):
        c = chart(tau)
        assert abs(catenoid_profile(tau, tau**0.5) - c.boundary_height) < 1e-13


def test_christoffel_examples():
    g = fermi_christoffels(0.7, 0.0)
    assert g[0, 0, 2] == 0.0 and g[1, 1, 2] == 0.0 and g[2, 0, 0] == 0.0 and g[2, 1, 1] == 0.0
    assert_allclose(g[0, 1, 1], -np.sin(0.7) * np.cos(0.7))
    g = fermi_christoffels(np.pi / 2, 0.0)
    assert abs(g[0, 1, 1]) < 1e-16 and abs(g[1, 0, 1]) < 1e-16


def test_christoffel_parity():
    a, b = fermi_christoffels(0.4, 0.2), fermi_christoffels(0.4, -0.2)
    # entries with an odd number of z indices flip sign
    for k in range(3):
        for i in range(3):
            for j in range(3):
                sign = (-1) ** ((k == 2) + (i == 2) + (j == 2))
                assert a[k, i, j] == sign * b[k, i, j]


def test_christoffels_match_metric_derivatives():
    def metric(r, z):
        return np.diag([np.cos(z) ** 2, np.cos(z) ** 2 * np.sin(r) ** 2, 1.0])

    r, z, h = 0.6, 0.3, 1e-5
    x = np.array([r, 0.0, z])
    dg = np.zeros((3, 3, 3))
    for k in (0, 2):
        e = np.zeros(3)
        e[k] = h
        dg[k] = (metric(*(x + e)[[0, 2]]) - metric(*(x - e)[[0, 2]])) / (2 * h)
    ginv = np.linalg.inv(metric(r, z))
    first = 0.5 * (np.einsum("ilj->lij", dg) + np.einsum("jli->lij", dg) - np.einsum("lij->lij", dg))
    gam = np.einsum("kl,lij->kij", ginv, first)
    assert_allclose(fermi_christoffels(r, z), gam, atol=1e-9)


def test_metric_at_waist_and_positivity():
    c = chart()
    g_ss, g_tt = c.metric(np.array([0.0]))
    assert_allclose(g_ss, 1e-8, rtol=1e-15)
    assert_allclose(g_tt, np.sin(1e-4) ** 2, rtol=1e-15)
    s = np.linspace(-c.s_max, c.s_max, 1001)
    g_ss, g_tt = c.metric(s)
    assert np.all(g_ss * g_tt > 0)


def test_metric_euclidean_limit():
    c = chart(1e-6)
    s = np.array([1.0])
    g_ss, g_tt = c.metric(s)
    flat = (1e-6 * np.cosh(1.0)) ** 2
    assert abs(g_ss[0] / flat - 1) < 1e-8
    assert abs(g_tt[0] / flat - 1) < 1e-8


def test_mean_curvature_matches_embedding_oracle():
    c = chart()
    s = np.array([-c.s_max, -2.0, -0.3, 0.0, 0.1, 0.5, 1.0, 2.5, 4.0, c.s_max])
    ref = np.array([bridge_mean_curvature(1e-4, si) for si in s])
    assert np.abs(c.mean_curvature(s) - ref).max() / np.abs(ref).max() < 1e-9


def test_mean_curvature_christoffel_route():
    c = chart()
    s = np.linspace(0.05, c.s_max, 20)
    ref = c.mean_curvature(s)
    # the two principal curvatures cancel to eight digits in this route
    assert np.abs(bridge_mean_curvature_christoffel(c, s) - ref).max() / np.abs(ref).max() < 1e-6


def test_sff_components_against_displayed_thetatheta_entry():
    c = chart()
    s = np.linspace(-c.s_max, c.s_max, 11)
    r, z = c.coords(s)
    _, a_tt, _ = c.second_fundamental_form(s)
    d = np.sqrt(1 + np.tan(z) ** 2 / np.cosh(s) ** 2)
    expect = 0.5 * (np.sin(2 * r) / np.cosh(s) + np.sin(r) ** 2 * np.sin(2 * z) * np.tanh(s)) / d
    assert_allclose(a_tt, expect, rtol=1e-14)


def test_flat_limit_is_minimal():
    c = chart(1e-8)
    s = np.array([1.0])
    assert abs(c.mean_curvature(s)[0] * (1e-8 * np.cosh(1.0)) ** 2) < 1e-12


def test_mean_curvature_parity_and_bound():
    for tau in (1e-3, 1e-4, 1e-5):
        c = chart(tau)
        s = np.linspace(-c.s_max, c.s_max, 2001)
        r, z = c.coords(s)
        h = c.mean_curvature(s)
        assert np.array_equal(h, c.mean_curvature(-s))
        const = np.max(np.abs(r * r * h) / (tau * z * z + r * r * np.abs(z) + tau * r * r))
        assert const < 2.0
        assert np.abs(h).max() <= 5 * tau * abs(np.log(tau))


def test_bridge_deficit_bound_and_symmetry():
    b = bridge_willmore(chart())
    tau = 1e-4
    assert b.deficit <= 8 * np.pi / 3 * tau**2 * abs(np.log(tau))
    assert b.strip_spread < 1e-14
    assert b.error < 1e-12
    assert_allclose(b.W - b.deficit, 2 * 2 * np.pi * 2 * np.sin(5e-3) ** 2, rtol=1e-14)


def test_bridge_refined_expansion():
    consts = []
    for tau in (1e-3, 1e-4):
        b = bridge_willmore(chart(tau))
        assert_allclose(refined_deficit_expansion(tau, 0.5), sphere_willmore_deficit_closed_form(tau, 0.5))
        rem = abs(b.deficit - refined_deficit_expansion(tau, 0.5))
        consts.append(rem / (tau**3 * np.log(tau) ** 2))
    assert max(consts) / min(consts) < 2.0


def test_bridge_quadrature_converged():
    c = chart()
    a = bridge_willmore(c)
    b = bridge_willmore(c, QuadratureSpec().doubled())
    assert abs(a.deficit - b.deficit) < 1e-12
    assert a.area_error < 1e-12 and a.int_H2_error < 1e-12


def test_bridge_chart_validation():
    with pytest.raises(ValueError):
        BridgeChart(P, 1.5, 0.5)
    with pytest.raises(ValueError):
        fermi_christoffels(0.0, 0.1)
