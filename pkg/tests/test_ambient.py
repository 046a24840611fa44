import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from canham import ambient, assembly
from canham.acceptance import energy_report, projected_mesh
from conftest import random_sphere

V_SIGMA2 = 4.584e-6  # v(Y(Sigma_{2,1e-4})) at default mesh resolution, frozen


@pytest.fixture(scope="module")
def sphere():
    return ambient.icosphere(5)


@pytest.fixture(scope="module")
def sigma2():
    built, y = projected_mesh(2, 1e-4)
    return built, y


def test_stereographic_examples():
    assert_allclose(ambient.stereographic_project(np.array([1.0, 0, 0, 0])), [1, 0, 0])
    assert_allclose(ambient.stereographic_project(np.array([0, 0, 0, -1.0])), [0, 0, 0])
    with pytest.raises(ValueError):
        ambient.stereographic_project(np.array([0, 0, 0, 1.0]))


def test_stereographic_inverse(rng):
    y = rng.standard_normal((100, 3)) * 3
    assert_allclose(ambient.stereographic_project(ambient.inverse_stereographic(y)), y, rtol=1e-12, atol=1e-13)


def test_circles_map_to_circles():
    # a small circle of S^3 tilted into the fourth coordinate
    t = np.linspace(0, 2 * np.pi, 200, endpoint=False)
    c = np.array([0.3, 0.1, 0.2, -0.5])
    a = np.array([1.0, 0, 0, 0])
    b = np.array([0, 0.6, 0, 0.8])
    a -= (a @ c) / (c @ c) * c
    a /= np.linalg.norm(a)
    b -= (b @ c) / (c @ c) * c + (b @ a) * a
    b /= np.linalg.norm(b)
    rad = np.sqrt(1 - c @ c)
    x = c + rad * (np.cos(t)[:, None] * a + np.sin(t)[:, None] * b)
    assert_allclose(np.linalg.norm(x, axis=1), 1.0, rtol=1e-14)
    *_, dev = ambient.fit_circle(ambient.stereographic_project(x))
    assert dev < 1e-10


def test_unit_sphere_area_volume(sphere):
    assert len(sphere.faces) == 20480
    area, vol = ambient.mesh_area_volume(sphere)
    assert_allclose(area, 4 * np.pi, rtol=1e-3)
    assert_allclose(vol, 4 * np.pi / 3, rtol=1e-3)
    rep = ambient.isoperimetric_ratio(sphere, willmore=False)
    assert_allclose(rep.v, 1.0, rtol=3e-3)
    assert rep.v <= 1.0


def test_volume_translation_invariant(sphere, rng):
    vol = ambient.signed_volume(sphere)
    for t in rng.standard_normal((3, 3)) * 5:
        moved = sphere.with_vertices(sphere.vertices + t)
        assert abs(ambient.signed_volume(moved) - vol) < 1e-12


def test_open_mesh_rejected(sphere):
    holed = assembly.SurfaceMesh(sphere.vertices, sphere.faces[1:])
    with pytest.raises(ValueError, match="watertight"):
        ambient.mesh_area_volume(holed)


def test_discrete_willmore_sphere(sphere):
    assert_allclose(ambient.discrete_willmore(sphere), 4 * np.pi, rtol=0.01)


# -- Moebius family


def test_mobius_identity_at_one(rng):
    mob = ambient.MobiusMap(np.array([0.3, 0.2, 2.0]), 1.0)
    x = rng.standard_normal((200, 3))
    assert_allclose(mob(x), x, atol=1e-12)


def test_mobius_is_conformal(rng):
    mob = ambient.MobiusMap(np.array([0.3, 0.2, 2.0]), 0.37, np.array([0.1, -0.2, 0.0]))
    x = rng.standard_normal((200, 3))
    sv = np.linalg.svd(mob.jacobian(x), compute_uv=False)
    assert np.abs(sv[:, 0] / sv[:, 2] - 1).max() < 1e-8
    # the analytic differential matches finite differences
    h = 1e-6
    fd = np.stack([(mob(x + h * e) - mob(x - h * e)) / (2 * h) for e in np.eye(3)], axis=2)
    assert_allclose(mob.jacobian(x), fd, rtol=1e-6, atol=1e-8)


def test_mobius_fixes_its_points():
    pm, pp = np.array([0.3, 0.2, 2.0]), np.array([0.0, 0.5, 0.0])
    mob = ambient.MobiusMap(pm, 4.0, pp)
    assert_allclose(mob(pp[None]), pp[None], atol=1e-14)


def test_mobius_maps_spheres_to_spheres():
    pts = random_sphere(np.random.default_rng(1), 500)
    mob = ambient.MobiusMap(np.array([0.3, 0.2, 2.0]), 2.0)
    *_, resid = ambient.fit_sphere(mob(pts))
    assert resid < 1e-9


@pytest.mark.parametrize("lam", [0.5, 2.0])
def test_mobius_images_of_sphere_are_round(sphere, lam):
    image = ambient.mobius_apply(ambient.MobiusMap(np.array([0.3, 0.2, 2.0]), lam), sphere)
    assert_allclose(ambient.isoperimetric_ratio(image, willmore=False).v, 1.0, rtol=3e-3)
    assert ambient.signed_volume(image) > 0
    assert image.is_oriented()


def test_mobius_rejects_center_on_mesh(sphere):
    with pytest.raises(ValueError, match="inversion center"):
        ambient.mobius_apply(ambient.MobiusMap(sphere.vertices[0]), sphere)


def test_mobius_preserves_discrete_willmore(sphere):
    image = ambient.mobius_apply(ambient.MobiusMap(np.array([0.3, 0.2, 2.0]), 2.0), sphere)
    w0, w1 = ambient.discrete_willmore(sphere), ambient.discrete_willmore(image)
    assert abs(w1 - w0) / w0 < 0.01


# -- the projected surface


def test_projected_surface_v(sigma2):
    _, y = sigma2
    rep = ambient.isoperimetric_ratio(y, willmore=False)
    assert 0 < rep.v < 0.05
    assert rep.genus == 1
    assert_allclose(rep.v, V_SIGMA2, rtol=0.01)
    data = json.loads(rep.to_json())
    assert data["kind"] == "IsoperimetricReport" and data["schema_version"] == 1


def test_v_decreases_along_ladder():
    vs = [ambient.isoperimetric_ratio(projected_mesh(2, t, strict=False)[1], willmore=False).v for t in (1e-3, 3e-4, 1e-4)]
    assert vs[0] > vs[1] > vs[2]


def test_discrete_willmore_of_projected_surface(sigma2):
    _, y = sigma2
    chart = energy_report(2, 1e-4).W
    assert abs(ambient.discrete_willmore(y) - chart) / chart < 0.02


@pytest.fixture(scope="module")
def v_problem():
    built = assembly.build_surface(assembly.SurfaceSpec(2, 1e-4))
    return ambient.prepare_v_solve(built)


def test_solve_for_v_target(v_problem):
    y, p_minus = v_problem
    res = ambient.solve_for_v(y, 0.5, p_minus)
    assert abs(res.v - 0.5) < 1e-3
    assert res.mesh.genus == 1
    assert res.bracket_v[0] < 0.5 < res.bracket_v[1]
    again = ambient.solve_for_v(y, 0.5, p_minus)
    assert again.mobius.lam == res.mobius.lam
    assert res.to_dict()["error"] < 1e-3


def test_solve_for_v_rejections(v_problem):
    y, p_minus = v_problem
    v0 = ambient.isoperimetric_ratio(y, willmore=False).v
    with pytest.raises(ValueError, match="must exceed"):
        ambient.solve_for_v(y, v0, p_minus)
    with pytest.raises(ValueError, match=r"v must lie in \(0,1\)"):
        ambient.solve_for_v(y, 1.0, p_minus)


def test_gap_point_between_sheets(v_problem):
    built = assembly.build_surface(assembly.SurfaceSpec(2, 1e-4))
    mid = ambient.gap_point(built, fraction=0.5)
    assert_allclose(mid, [0, 0, 1], atol=1e-15)
