"""Stereographic images in R^3, isoperimetric ratio and Moebius families.

W is certified on charts in S^3 and carried to R^3 by conformal invariance;
the discrete Willmore estimator here only sanity-checks that transport.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import sparse

from .assembly import SurfaceMesh
from .ldsolutions import SCHEMA_VERSION

POLE_TOL = 1e-6
CENTER_TOL = 1e-6


# ---------------------------------------------------------------------------
# stereographic projection


def stereographic_project(x):
    """Y(x) = (x1, x2, x3) / (1 - x4) for points of S^3 or a 4D mesh."""
    if isinstance(x, SurfaceMesh):
        return x.with_vertices(stereographic_project(x.vertices))
    x = np.asarray(x, dtype=float)
    gap = 1.0 - x[..., 3]
    if np.any(gap < POLE_TOL):
        raise ValueError("point too close to the projection pole (0, 0, 0, 1)")
    return x[..., :3] / gap[..., None]


def inverse_stereographic(y):
    y = np.asarray(y, dtype=float)
    n2 = np.sum(y * y, axis=-1)
    out = np.empty(y.shape[:-1] + (4,))
    out[..., :3] = 2.0 * y / (1.0 + n2)[..., None]
    out[..., 3] = (n2 - 1.0) / (n2 + 1.0)
    return out


# ---------------------------------------------------------------------------
# area, volume, isoperimetric ratio


def _corners(mesh):
    v = mesh.vertices
    f = mesh.faces
    return v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]


def signed_volume(mesh):
    """(1/6) sum a . (b x c), positive for outward-oriented closed meshes."""
    a, b, c = _corners(mesh)
    return math.fsum(np.einsum("ij,ij->i", a, np.cross(b, c)) / 6.0)


def mesh_area_volume(mesh):
    """(area, volume) of a closed triangle mesh in R^3."""
    if mesh.dim != 3:
        raise ValueError("mesh must be in R^3")
    if not mesh.is_watertight():
        raise ValueError("mesh is not watertight")
    a, b, c = _corners(mesh)
    area = math.fsum(0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1))
    return area, abs(signed_volume(mesh))


def isoperimetric_value(area, volume):
    return 36.0 * np.pi * volume**2 / area**3


@dataclass
class IsoperimetricReport:
    area: float
    volume: float
    v: float
    genus: int
    W: float = None
    W_source: str = "discrete"
    error: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"schema_version": SCHEMA_VERSION, "kind": "IsoperimetricReport"}
        out.update(asdict(self))
        return out

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True, default=float)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def isoperimetric_ratio(mesh, willmore=True):
    area, vol = mesh_area_volume(mesh)
    W = discrete_willmore(mesh) if willmore else None
    return IsoperimetricReport(
        area=area,
        volume=vol,
        v=isoperimetric_value(area, vol),
        genus=int(mesh.genus),
        W=W,
        error={"area": 0.0, "volume": 0.0, "v": 0.0},
    )


# ---------------------------------------------------------------------------
# discrete Willmore energy by local quadric fits


def _face_normals(mesh):
    a, b, c = _corners(mesh)
    return np.cross(b - a, c - a)


def vertex_areas(mesh):
    """One third of the incident triangle areas."""
    n2 = 0.5 * np.linalg.norm(_face_normals(mesh), axis=1)
    out = np.zeros(len(mesh.vertices))
    for k in range(3):
        np.add.at(out, mesh.faces[:, k], n2 / 3.0)
    return out


def vertex_normals(mesh):
    fn = _face_normals(mesh)
    out = np.zeros_like(mesh.vertices)
    for k in range(3):
        np.add.at(out, mesh.faces[:, k], fn)
    return out / np.linalg.norm(out, axis=1, keepdims=True)


def _adjacency(mesh):
    f = mesh.faces
    n = len(mesh.vertices)
    i = np.concatenate([f[:, 0], f[:, 1], f[:, 2], f[:, 1], f[:, 2], f[:, 0]])
    j = np.concatenate([f[:, 1], f[:, 2], f[:, 0], f[:, 0], f[:, 1], f[:, 2]])
    a = sparse.csr_matrix((np.ones(len(i)), (i, j)), shape=(n, n))
    a.data[:] = 1.0
    return a


def two_ring(mesh):
    """CSR matrix whose row i marks the two-ring of vertex i (i excluded)."""
    a = _adjacency(mesh)
    r2 = (a + a @ a).tocsr()
    r2.setdiag(0.0)
    r2.eliminate_zeros()
    return r2


def _fit_quadric(d, mask, counts, nrm):
    helper = np.where(np.abs(nrm[:, :1]) < 0.9, [[1.0, 0.0, 0.0]], [[0.0, 1.0, 0.0]])
    t1 = np.cross(nrm, helper)
    t1 /= np.linalg.norm(t1, axis=1, keepdims=True)
    t2 = np.cross(nrm, t1)
    u = np.einsum("nkd,nd->nk", d, t1)
    w = np.einsum("nkd,nd->nk", d, t2)
    h = np.einsum("nkd,nd->nk", d, nrm)
    scale = np.sqrt(np.sum(np.where(mask, u * u + w * w, 0.0), 1) / counts)
    u, w, h = u / scale[:, None], w / scale[:, None], h / scale[:, None]
    A = np.stack([u * u, u * w, w * w, u, w], axis=2) * mask[..., None]
    AtA = np.einsum("nki,nkj->nij", A, A)
    Atb = np.einsum("nki,nk->ni", A, h * mask)
    coef = np.linalg.solve(AtA, Atb[..., None])[..., 0]
    a, b, c, du, dv = (coef[:, k] for k in range(5))
    # second-order coefficients carry 1 / scale
    a, b, c = a / scale, b / scale, c / scale
    g = 1.0 + du * du + dv * dv
    H = (2.0 * a * (1.0 + dv * dv) - 2.0 * b * du * dv + 2.0 * c * (1.0 + du * du)) / g**1.5
    fitted = nrm - du[:, None] * t1 - dv[:, None] * t2
    return H, fitted / np.linalg.norm(fitted, axis=1, keepdims=True)


def quadric_mean_curvature(mesh, passes=2):
    """Mean curvature (sum of principal curvatures) at every vertex.

    At each vertex the two-ring is expressed in a frame aligned with a normal
    estimate and w = a u^2 + b uv + c v^2 + d u + e v is fitted by least
    squares, with coordinates scaled by the RMS neighbor distance.  Each pass
    after the first uses the normal of the previous fit.
    """
    v = mesh.vertices
    nrm = vertex_normals(mesh)
    ring = two_ring(mesh)
    counts = np.diff(ring.indptr)
    kmax = counts.max()
    idx = np.zeros((len(v), kmax), dtype=np.int64)
    mask = np.arange(kmax)[None, :] < counts[:, None]
    idx[mask] = ring.indices
    d = v[idx] - v[:, None, :]
    for _ in range(passes):
        H, nrm = _fit_quadric(d, mask, counts, nrm)
    return H


def discrete_willmore(mesh):
    """(1/4) sum H^2 A over vertices of a closed mesh in R^3."""
    h = quadric_mean_curvature(mesh)
    return 0.25 * math.fsum(h * h * vertex_areas(mesh))


def icosphere(subdivisions=5, radius=1.0, center=(0.0, 0.0, 0.0)):
    """Refined icosahedron; 20 * 4^k faces."""
    t = (1.0 + 5.0**0.5) / 2.0
    v = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=float,
    )
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    for _ in range(subdivisions):
        edges = np.sort(np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]), axis=1)
        uniq, inv = np.unique(edges, axis=0, return_inverse=True)
        mid = v[uniq[:, 0]] + v[uniq[:, 1]]
        mid /= np.linalg.norm(mid, axis=1, keepdims=True)
        m = len(f)
        e01, e12, e20 = (inv[k * m : (k + 1) * m] + len(v) for k in range(3))
        v = np.concatenate([v, mid])
        f = np.concatenate(
            [
                np.stack([f[:, 0], e01, e20], 1),
                np.stack([f[:, 1], e12, e01], 1),
                np.stack([f[:, 2], e20, e12], 1),
                np.stack([e01, e12, e20], 1),
            ]
        )
    return SurfaceMesh(radius * v + np.asarray(center, dtype=float), f)


def fit_sphere(points):
    """Algebraic least-squares sphere; returns (center, radius, max residual)."""
    p = np.asarray(points, dtype=float)
    A = np.concatenate([2.0 * p, np.ones((len(p), 1))], axis=1)
    b = np.sum(p * p, axis=1)
    sol = np.linalg.lstsq(A, b, rcond=None)[0]
    c = sol[:3]
    r = math.sqrt(sol[3] + c @ c)
    return c, r, float(np.abs(np.linalg.norm(p - c, axis=1) - r).max())


def fit_circle(points):
    """Best-fit circle in R^3; returns (center, normal, radius, max deviation)."""
    p = np.asarray(points, dtype=float)
    mean = p.mean(axis=0)
    _, _, vt = np.linalg.svd(p - mean)
    e1, e2, nrm = vt
    q = np.stack([(p - mean) @ e1, (p - mean) @ e2], axis=1)
    A = np.concatenate([2.0 * q, np.ones((len(q), 1))], axis=1)
    sol = np.linalg.lstsq(A, np.sum(q * q, 1), rcond=None)[0]
    c2 = sol[:2]
    r = math.sqrt(sol[2] + c2 @ c2)
    center = mean + c2[0] * e1 + c2[1] * e2
    off_plane = np.abs((p - mean) @ nrm)
    in_plane = np.abs(np.linalg.norm(q - c2, axis=1) - r)
    return center, nrm, r, float(max(off_plane.max(), in_plane.max()))


# ---------------------------------------------------------------------------
# Moebius family


@dataclass
class MobiusMap:
    """F = I^-1 o D o I, I(x) = (x - p_minus)/|x - p_minus|^2, D(y) = c + lam (y - c).

    c = I(p_plus).  F fixes p_minus and p_plus, F_1 is the identity, and as
    lam decreases from 1 the surface is dilated out from p_plus and
    contracted towards p_minus.
    """

    p_minus: np.ndarray
    lam: float = 1.0
    p_plus: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.p_minus = np.asarray(self.p_minus, dtype=float)
        self.p_plus = np.asarray(self.p_plus, dtype=float)
        if not self.lam > 0.0:
            raise ValueError("scale must be positive")
        if np.linalg.norm(self.p_plus - self.p_minus) == 0.0:
            raise ValueError("p_plus and p_minus must differ")
        self.c = self._invert(self.p_plus)

    def _invert(self, x):
        y = np.asarray(x, dtype=float) - self.p_minus
        return y / np.sum(y * y, axis=-1, keepdims=True)

    def _uninvert(self, z):
        return self.p_minus + z / np.sum(z * z, axis=-1, keepdims=True)

    def __call__(self, x):
        z = self.c + self.lam * (self._invert(x) - self.c)
        return self._uninvert(z)

    def jacobian(self, x):
        """Differential of F at the points x, shape (N, 3, 3)."""
        x = np.atleast_2d(x)
        y = x - self.p_minus
        ny = np.sum(y * y, 1)
        eye = np.eye(3)[None]
        di = (eye - 2.0 * y[:, :, None] * y[:, None, :] / ny[:, None, None]) / ny[:, None, None]
        z = self.c + self.lam * (y / ny[:, None] - self.c)
        nz = np.sum(z * z, 1)
        du = (eye - 2.0 * z[:, :, None] * z[:, None, :] / nz[:, None, None]) / nz[:, None, None]
        return self.lam * du @ di

    def to_dict(self):
        return {
            "family": "conjugated dilation I^-1 o D_lam(about I(p_plus)) o I",
            "p_minus": self.p_minus.tolist(),
            "p_plus": self.p_plus.tolist(),
            "lam": self.lam,
        }


def mobius_apply(mob, mesh):
    """Image of an R^3 mesh; faces are reversed if the map turns it inside out."""
    if mesh.dim != 3:
        raise ValueError("mesh must be in R^3")
    dist = np.linalg.norm(mesh.vertices - mob.p_minus, axis=1).min()
    if dist <= CENTER_TOL:
        raise ValueError("inversion center lies on the mesh")
    out = mesh.with_vertices(mob(mesh.vertices))
    if np.sign(signed_volume(out)) != np.sign(signed_volume(mesh)):
        out = out.flipped()
    return out


def gap_point(built, foot=(0.0, 0.0, 1.0), fraction=0.5):
    """R^3 image of the point between the sheets over ``foot``.

    ``fraction`` 0 is the lower sheet and 1 the upper sheet; 0.5 is the
    midpoint, which lies on the equatorial S^2 itself.
    """
    foot = np.asarray(foot, dtype=float)
    u = float(built.glued(foot[None, :])[0])
    z = (2.0 * fraction - 1.0) * u
    x = np.concatenate([math.cos(z) * foot, [math.sin(z)]])
    return stereographic_project(x)


# p_minus sits 2% of the gap below the upper sheet: with equal distances to
# both sheets the family tends to two equal spheres (v -> 1/2) instead of one.
DEFAULT_GAP_FRACTION = 0.98


def default_foot(m):
    """A point of S^2 far from every bridge: the north pole."""
    return np.array([0.0, 0.0, 1.0])


def prepare_v_solve(built, fraction=DEFAULT_GAP_FRACTION, foot=None, mesh_spec=None):
    """Projected mesh refined about the foot point, and the matching p_minus.

    Rings about the foot reach down to a quarter of the distance from p_minus
    to the nearer sheet, so the part of the surface that the Moebius family
    magnifies is resolved.
    """
    from .assembly import mesh_surface

    foot = default_foot(built.spec.m) if foot is None else np.asarray(foot, dtype=float)
    u = float(built.glued(foot[None, :])[0])
    dist = 2.0 * u * min(fraction, 1.0 - fraction)
    mesh = mesh_surface(built, mesh_spec, foot=foot, foot_r0=0.25 * dist)
    return stereographic_project(mesh), gap_point(built, foot, fraction)


@dataclass
class VSolveResult:
    mobius: MobiusMap
    v: float
    target: float
    bracket: tuple
    bracket_v: tuple
    iterations: int
    mesh: SurfaceMesh = None

    def to_dict(self):
        return {
            "mobius": self.mobius.to_dict(),
            "v": self.v,
            "target_v": self.target,
            "error": abs(self.v - self.target),
            "bracket_lam": list(self.bracket),
            "bracket_v": list(self.bracket_v),
            "iterations": self.iterations,
        }


def _v_of(mesh):
    area, vol = mesh_area_volume(mesh)
    return isoperimetric_value(area, vol)


def solve_for_v(mesh, target_v, p_minus, p_plus=(0.0, 0.0, 0.0), tol=1e-3, max_iter=200):
    """Find lam with |v(F_lam(mesh)) - target_v| < tol by bisection in log lam.

    The bracket is found by scanning lam = 10^(-k/4) and 10^(k/4) for
    k = 1, 2, ... (alternating sides) out to [1e-6, 1e6]; the first scale
    with v above the target closes the bracket against its predecessor.
    """
    if not 0.0 < target_v < 1.0:
        raise ValueError("v must lie in (0,1)")
    v0 = _v_of(mesh)
    if not target_v > v0:
        raise ValueError(f"target v {target_v} must exceed v(mesh) = {v0}")

    def v_at(log_lam):
        return _v_of(mobius_apply(MobiusMap(p_minus, 10.0**log_lam, p_plus), mesh))

    bracket = None
    prev = {-1: (0.0, v0), 1: (0.0, v0)}
    for k in range(1, 25):
        for side in (-1, 1):
            ll = side * k / 4.0
            val = v_at(ll)
            if val > target_v:
                bracket = (prev[side], (ll, val))
                break
            prev[side] = (ll, val)
        if bracket:
            break
    if bracket is None:
        raise ValueError("no scale in [1e-6, 1e6] brackets the target v")
    (lo, vlo), (hi, vhi) = bracket
    it = 0
    mid, vmid = hi, vhi
    while abs(vmid - target_v) >= tol and it < max_iter:
        mid = 0.5 * (lo + hi)
        vmid = v_at(mid)
        if vmid < target_v:
            lo, vlo = mid, vmid
        else:
            hi, vhi = mid, vmid
        it += 1
    if abs(vmid - target_v) >= tol:
        raise ValueError("bisection did not reach the requested tolerance")
    mob = MobiusMap(p_minus, 10.0**mid, p_plus)
    return VSolveResult(
        mobius=mob,
        v=vmid,
        target=target_v,
        bracket=(10.0**lo, 10.0**hi),
        bracket_v=(vlo, vhi),
        iterations=it,
        mesh=mobius_apply(mob, mesh),
    )


__all__ = [
    "IsoperimetricReport",
    "MobiusMap",
    "VSolveResult",
    "discrete_willmore",
    "fit_circle",
    "fit_sphere",
    "gap_point",
    "prepare_v_solve",
    "icosphere",
    "inverse_stereographic",
    "isoperimetric_ratio",
    "mesh_area_volume",
    "mobius_apply",
    "quadric_mean_curvature",
    "solve_for_v",
    "stereographic_project",
]
