"""Normal graphs over regions of the equatorial S^2 in S^3 and their energies.

The graph of u over a region of S^2 is q -> cos(u) q + sin(u) e4.  Its area
density relative to the round measure is cos^2(u) sqrt(1 + sec^2(u) |grad u|^2)
and its mean curvature is computed from the embedding: first and second
derivatives in geodesic normal coordinates, the unit normal tangent to S^3,
and the trace of the second fundamental form.

Energies are accumulated as deficits, i.e. integrals of
(density - 1) + H^2 density / 4, never as differences of totals.
"""

from dataclasses import dataclass, field

import numpy as np

from . import linops
from .catenoid import catenoid_jet_profile
from .foundation import (
    BlendField,
    NearestDistance,
    NearestRadialField,
    frame_at,
    tangent_frame,
)
from .quadrature import QuadratureSpec, fsum, gauss_legendre


# ---------------------------------------------------------------------------
# pointwise geometry


def _local_derivatives(jet, t1, t2):
    du = np.stack([np.sum(jet.grad * t1, 1), np.sum(jet.grad * t2, 1)], axis=1)
    frame = np.stack([t1, t2], axis=1)  # (N, 2, 3)
    d2u = np.einsum("nia,nab,njb->nij", frame, jet.hess, frame)
    return du, d2u


def area_density(jet):
    """cos^2(u) sqrt(1 + sec^2(u) |grad u|^2) and the same minus one, stably."""
    u = jet.value
    if np.any(np.abs(u) >= np.pi / 2.0):
        raise ValueError("graph height must satisfy |u| < pi/2")
    c2 = np.cos(u) ** 2
    x = np.sum(jet.grad**2, axis=1) / c2
    root = np.sqrt(1.0 + x)
    dens = c2 * root
    dens_minus_1 = c2 * x / (1.0 + root) - np.sin(u) ** 2
    return dens, dens_minus_1


def _cross4(a, b, c):
    """Vector orthogonal to a, b, c in R^4 (generalized cross product)."""
    out = np.empty_like(a)
    for k in range(4):
        cols = [i for i in range(4) if i != k]
        m = np.stack([a[:, cols], b[:, cols], c[:, cols]], axis=1)
        out[:, k] = (-1) ** k * np.linalg.det(m)
    return out


def graph_frame(x, jet):
    """Embedding derivatives of the graph at x in geodesic normal coordinates.

    Returns (E, E_i, E_ij, N) as 4-vectors: E (N,4), E_i (N,2,4),
    E_ij (N,2,2,4) and the unit normal N tangent to S^3 with N . e4 > 0.
    """
    x = np.atleast_2d(x)
    n = len(x)
    t1, t2 = tangent_frame(x)
    du, d2u = _local_derivatives(jet, t1, t2)
    u = jet.value
    c, s = np.cos(u), np.sin(u)
    pad = np.zeros((n, 1))
    X = np.concatenate([x, pad], 1)
    T = np.stack([np.concatenate([t1, pad], 1), np.concatenate([t2, pad], 1)], axis=1)
    e4 = np.zeros((n, 4))
    e4[:, 3] = 1.0
    E = c[:, None] * X + s[:, None] * e4
    Ei = (
        (-s[:, None] * du)[:, :, None] * X[:, None, :]
        + c[:, None, None] * T
        + (c[:, None] * du)[:, :, None] * e4[:, None, :]
    )
    uu = du[:, :, None] * du[:, None, :]
    eye = np.eye(2)[None]
    coef_x = -c[:, None, None] * uu - s[:, None, None] * d2u - c[:, None, None] * eye
    coef_e4 = -s[:, None, None] * uu + c[:, None, None] * d2u
    Eij = coef_x[..., None] * X[:, None, None, :] + coef_e4[..., None] * e4[:, None, None, :]
    # -sin(u) (u_i t_j + u_j t_i)
    cross = (-s[:, None, None] * du[:, :, None])[..., None] * T[:, None, :, :]
    Eij = Eij + cross + np.swapaxes(cross, 1, 2)
    N = _cross4(E, Ei[:, 0], Ei[:, 1])
    N /= np.linalg.norm(N, axis=1, keepdims=True)
    N *= np.sign(N[:, 3])[:, None]
    return E, Ei, Eij, N


def graph_mean_curvature(x, jet):
    """Mean curvature (sum of principal curvatures) of the graph of u at x."""
    _, Ei, Eij, N = graph_frame(x, jet)
    g = np.einsum("nia,nja->nij", Ei, Ei)
    det = g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] ** 2
    if np.any(det <= 0.0):
        raise ValueError("degenerate graph metric")
    A = np.einsum("nija,na->nij", Eij, N)
    return (g[:, 1, 1] * A[:, 0, 0] - 2.0 * g[:, 0, 1] * A[:, 0, 1] + g[:, 0, 0] * A[:, 1, 1]) / det


def embedding_density(x, jet):
    """sqrt(det g) of the graph from its embedding (cross-check of area_density)."""
    _, Ei, _, _ = graph_frame(x, jet)
    g = np.einsum("nia,nja->nij", Ei, Ei)
    return np.sqrt(g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] ** 2)


# ---------------------------------------------------------------------------
# regions and their quadrature rules


@dataclass
class Nodes:
    """Quadrature points on S^2 with weights (already including sin r dr dtheta)."""

    x: np.ndarray
    w: np.ndarray
    r: np.ndarray = None
    tag: np.ndarray = None


def _polar_block(p, e1, e2, r, wr, th, wth, tag):
    R, TH = np.meshgrid(r, th, indexing="ij")
    W = np.outer(wr * np.sin(r), wth)
    x = (
        np.cos(R)[..., None] * p
        + np.sin(R)[..., None] * (np.cos(TH)[..., None] * e1 + np.sin(TH)[..., None] * e2)
    )
    return Nodes(x.reshape(-1, 3), W.ravel(), R.ravel(), np.full(R.size, tag))


def _concat(blocks):
    return Nodes(
        np.concatenate([b.x for b in blocks]),
        np.concatenate([b.w for b in blocks]),
        np.concatenate([b.r for b in blocks]),
        np.concatenate([b.tag for b in blocks]),
    )


def _uniform_angles(n):
    return 2.0 * np.pi * np.arange(n) / n, np.full(n, 2.0 * np.pi / n)


@dataclass
class Boundary:
    """A geodesic circle of radius ``radius`` about ``center``; ``sign`` is +1 when
    the outward conormal of the region points away from the center."""

    center: np.ndarray
    radius: float
    sign: int


class WholeSphere:
    """S^2 with the Gauss-Legendre x uniform transform grid."""

    area = 4.0 * np.pi
    boundaries = ()

    def nodes(self, quad=None, level=0):
        n = 64 * 2**level
        x, w, phi = linops.gauss_grid(n, 2 * n)
        pts = linops.grid_points(n, 2 * n).reshape(-1, 3)
        weights = np.outer(w, np.full(2 * n, np.pi / n)).ravel()
        return Nodes(pts, weights, None, np.zeros(len(pts), int))


class Annulus:
    """{r_in <= d(x, center) <= r_out}; r_in = 0 gives a disc."""

    def __init__(self, center, r_in, r_out, n_r=48, n_th=64):
        self.center = np.asarray(center, dtype=float)
        self.r_in, self.r_out = float(r_in), float(r_out)
        self.n_r, self.n_th = n_r, n_th
        self.area = 2.0 * np.pi * (np.cos(self.r_in) - np.cos(self.r_out))
        self.boundaries = tuple(
            b
            for b in (
                Boundary(self.center, self.r_in, -1) if self.r_in > 0 else None,
                Boundary(self.center, self.r_out, +1) if self.r_out < np.pi else None,
            )
            if b is not None
        )

    def nodes(self, quad=None, level=0):
        e1, e2 = frame_at(self.center)
        r, wr = gauss_legendre(self.n_r * 2**level, self.r_in, self.r_out)
        th, wth = _uniform_angles(self.n_th * 2**level)
        return _polar_block(self.center, e1, e2, r, wr, th, wth, 0)


# tags of the pieces of a disc complement
GLUE_INNER, GLUE_MID, GLUE_OUTER, LOG_ANNULUS, FAR = range(5)


class DiscComplement:
    """S^2 minus the geodesic discs of radius ``radius`` about ``points``.

    The points must be the m equally spaced equator points.  The region is
    split into m congruent lunes; in lune k polar coordinates about p_k are
    used: three Gauss pieces on [rho, 2 rho] (breaking where the gluing cutoff
    switches on and off), a Gauss rule in log r on [2 rho, r_outer], and a
    Gauss rule on [r_outer, r_max(theta)] out to the lune boundary.
    ``far_breaks`` adds radial break points in the far piece (used where the
    integrand is only piecewise analytic).
    """

    def __init__(self, points, radius, r_outer, far_breaks=()):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.m = len(self.points)
        self.radius = float(radius)
        self.r_outer = float(r_outer)
        self.far_breaks = tuple(sorted(far_breaks))
        if not 2.0 * self.radius < self.r_outer:
            raise ValueError("need 2 * radius < r_outer")
        disc = 2.0 * np.pi * 2.0 * np.sin(0.5 * self.radius) ** 2
        self.area = 4.0 * np.pi - self.m * disc
        self.boundaries = tuple(Boundary(p, self.radius, -1) for p in self.points)

    def lune_frame(self, k):
        p = self.points[k]
        e1 = np.array([-p[1], p[0], 0.0])  # eastward
        e2 = np.array([0.0, 0.0, 1.0])  # northward
        return p, e1, e2

    def r_max(self, theta):
        if self.m == 1:
            return np.full_like(theta, np.pi)
        beta = np.pi / self.m
        return np.arctan2(np.sin(beta), np.cos(beta) * np.abs(np.cos(theta)))

    def nodes(self, quad=None, level=0, lune=0):
        q = quad or QuadratureSpec()
        f = 2**level
        p, e1, e2 = self.lune_frame(lune)
        rho = self.radius
        th, wth = _uniform_angles(q.n_ang * f)
        blocks = []
        cuts = [rho, rho * 4.0 / 3.0, rho * 5.0 / 3.0, 2.0 * rho]
        for i, tag in enumerate((GLUE_INNER, GLUE_MID, GLUE_OUTER)):
            n_r = q.n_mid if tag == GLUE_MID else q.n_gap
            r, wr = gauss_legendre(n_r * f, cuts[i], cuts[i + 1])
            blocks.append(_polar_block(p, e1, e2, r, wr, th, wth, tag))
        t, wt = gauss_legendre(q.n_log * f, np.log(2.0 * rho), np.log(self.r_outer))
        blocks.append(_polar_block(p, e1, e2, np.exp(t), wt * np.exp(t), th, wth, LOG_ANNULUS))
        blocks.append(self._far_nodes(p, e1, e2, q.n_far * f, q.n_far_ang * f))
        return _concat(blocks)

    def _far_nodes(self, p, e1, e2, n_r, n_th):
        if self.m == 1:
            th_all, wth_all = _uniform_angles(2 * n_th)
            pieces = [(th_all, wth_all)]
        else:
            pieces = [
                gauss_legendre(n_th, -0.5 * np.pi, 0.5 * np.pi),
                gauss_legendre(n_th, 0.5 * np.pi, 1.5 * np.pi),
            ]
        ref, wref = gauss_legendre(n_r, 0.0, 1.0)
        xs, ws, rs = [], [], []
        for th, wth in pieces:
            rmax = self.r_max(th)
            for j in range(len(th)):
                edges = [self.r_outer] + [b for b in self.far_breaks if self.r_outer < b < rmax[j]]
                edges.append(rmax[j])
                for a, b in zip(edges[:-1], edges[1:]):
                    r = a + (b - a) * ref
                    wr = (b - a) * wref * np.sin(r) * wth[j]
                    dirn = np.cos(th[j]) * e1 + np.sin(th[j]) * e2
                    xs.append(np.cos(r)[:, None] * p + np.sin(r)[:, None] * dirn)
                    ws.append(wr)
                    rs.append(r)
        r = np.concatenate(rs)
        return Nodes(np.concatenate(xs), np.concatenate(ws), r, np.full(len(r), FAR))

    def lune_area(self):
        return self.area / self.m


# ---------------------------------------------------------------------------
# energies


@dataclass
class GraphEnergy:
    area: float
    int_H2: float
    W: float
    deficit: float
    error: float = 0.0
    details: dict = field(default_factory=dict)
    area_error: float = 0.0
    int_H2_error: float = 0.0


def graph_integrands(field_, x):
    """(density - 1 + H^2 density / 4, density, H) at the points x."""
    jet = field_.jet(x, order=2)
    dens, dens_m1 = area_density(jet)
    h = graph_mean_curvature(x, jet)
    return dens_m1 + 0.25 * h * h * dens, dens, h, jet


def _energy_on_nodes(field_, nodes):
    integrand, dens, h, jet = graph_integrands(field_, nodes.x)
    w = nodes.w
    return {
        "deficit": fsum(w * integrand),
        "area_minus": fsum(w * (dens - 1.0)),
        "int_H2": fsum(w * h * h * dens),
        "jet": jet,
        "h": h,
    }


def graph_willmore_exact(field_, region, quad=None, level=0, check=True, tol=1e-9):
    """Willmore energy of the graph of ``field_`` over ``region``.

    For a :class:`DiscComplement` one lune is integrated and multiplied by
    the number of lunes, which is exact for fields with the configuration's
    symmetry.  The error estimate is the change of the deficit when all node
    counts are doubled.
    """

    def run(lv):
        if isinstance(region, DiscComplement):
            out = _energy_on_nodes(field_, region.nodes(quad, lv))
            return {k: region.m * out[k] for k in ("deficit", "area_minus", "int_H2")}
        return _energy_on_nodes(field_, region.nodes(quad, lv))

    base = run(level)
    err = 0.0
    if check:
        fine = run(level + 1)
        err = abs(fine["deficit"] - base["deficit"])
        if err > tol:
            raise ValueError(
                f"graph quadrature not converged: {base['deficit']!r} vs {fine['deficit']!r}"
            )
        base = fine
    area = region.area + base["area_minus"]
    return GraphEnergy(
        area=area,
        int_H2=base["int_H2"],
        W=region.area + base["deficit"],
        deficit=base["deficit"],
        error=err,
    )


def boundary_term(field_, boundary, n=256):
    """Integral over a boundary circle of u du/d(eta), eta the outward conormal."""
    p = boundary.center
    e1, e2 = frame_at(p)
    th = 2.0 * np.pi * np.arange(n) / n
    r = boundary.radius
    x = np.cos(r) * p + np.sin(r) * (np.cos(th)[:, None] * e1 + np.sin(th)[:, None] * e2)
    jet = field_.jet(x, order=2)
    radial = (np.cos(r) * (np.cos(th)[:, None] * e1 + np.sin(th)[:, None] * e2)) - np.sin(r) * p
    du = boundary.sign * np.sum(jet.grad * radial, axis=1)
    return fsum(jet.value * du) * 2.0 * np.pi / n * np.sin(r)


def graph_willmore_linearized(field_, region, quad=None, level=0, n_boundary=256):
    """|region| + (1/4) int (Delta u)(L u) + (1/2) sum over boundary of int u du/deta."""
    if isinstance(region, DiscComplement):
        nodes = [region.nodes(quad, level, lune=k) for k in range(region.m)]
    else:
        nodes = [region.nodes(quad, level)]
    bulk = 0.0
    vals = []
    for nd in nodes:
        jet = field_.jet(nd.x, order=2)
        lap = jet.laplacian()
        vals.append(nd.w * lap * (lap + 2.0 * jet.value))
    bulk = fsum(np.concatenate(vals))
    bdry = fsum([boundary_term(field_, b, n_boundary) for b in region.boundaries])
    return region.area + 0.25 * bulk + 0.5 * bdry


# ---------------------------------------------------------------------------
# the glued profile


class GluedProfile:
    """phi_gl: the catenoid height near L blended into phi over [tau^a, 2 tau^a]."""

    def __init__(self, profile):
        self.profile = profile
        self.tau = profile.tau
        self.alpha = profile.alpha
        self.points = profile.base.points
        self.m = profile.base.m
        self.inner = self.tau**self.alpha
        self.field = BlendField(
            self.inner,
            2.0 * self.inner,
            NearestDistance(self.points),
            NearestRadialField(self.points, catenoid_jet_profile(self.tau)),
            profile.field,
        )

    def jet(self, x, order=2):
        return self.field.jet(np.atleast_2d(x), order)

    def __call__(self, x):
        return self.field(x)

    def region(self):
        """The domain S^2 minus D_L(tau^alpha) with its quadrature layout."""
        r_outer = max(self.profile.base.config.delta, 3.0 * self.inner)
        breaks = ()
        if self.m == 1:
            breaks = (7.0 * np.pi / 18.0, 4.0 * np.pi / 9.0, np.pi / 2.0)
        return DiscComplement(self.points, self.inner, r_outer, breaks)


def build_glued_profile(profile):
    return GluedProfile(profile)


def _ann_mask(nodes):
    return (nodes.tag == GLUE_INNER) | (nodes.tag == GLUE_MID) | (nodes.tag == GLUE_OUTER)


def exterior_willmore(glued, quad=None, tol=1e-9):
    """Willmore energy and deficit W - (|S^2| - |D_L(tau^alpha)|) of the graph of
    phi_gl over S^2 minus D_L(tau^alpha), with diagnostics."""
    region = glued.region()
    q = quad or QuadratureSpec()
    runs = []
    for level in (0, 1):
        nodes = region.nodes(q, level)
        integrand, dens, h, jet = graph_integrands(glued.field, nodes.x)
        runs.append((nodes, integrand, dens, h, jet))
    deficits = [region.m * fsum(n.w * i) for n, i, *_ in runs]
    err = abs(deficits[1] - deficits[0])
    if err > tol:
        raise ValueError(f"exterior quadrature not converged: {deficits[0]!r} vs {deficits[1]!r}")
    nodes, integrand, dens, h, jet = runs[1]
    tau = glued.tau
    lt = abs(np.log(tau))
    lap = jet.laplacian()
    Lphi = lap + 2.0 * jet.value
    ann = _ann_mask(nodes)
    diag = {
        "annulus_laplacian_C": float(np.abs(lap[ann]).max() / (tau * lt)),
        "annulus_L_C": float(np.abs(Lphi[ann]).max() / (tau * lt)),
        "c2_norm": float(
            max(
                np.abs(jet.value).max(),
                np.linalg.norm(jet.grad, axis=1).max(),
                np.linalg.norm(jet.hess, axis=(1, 2)).max(),
            )
        ),
        "int_lap_L": region.m * fsum(nodes.w * lap * Lphi),
        "max_height": float(jet.value.max()),
        "min_height": float(jet.value.min()),
    }
    diag["c2_norm_C"] = diag["c2_norm"] / tau ** (1.0 - 2.0 * glued.alpha)
    diag["conormal_flux"] = _phi_flux(glued)
    diag["flux_term"] = 2.0 * glued.profile.c1 * tau * diag["conormal_flux"]
    diag["bookkeeping_E"] = diag["int_lap_L"] - diag["flux_term"]
    diag["bookkeeping_C"] = abs(diag["bookkeeping_E"]) / (
        tau ** (2.0 * (1.0 + glued.alpha)) * lt**2
    )
    area_minus = [region.m * fsum(n.w * (d - 1.0)) for n, _, d, _, _ in runs]
    int_h2 = [region.m * fsum(n.w * hh * hh * d) for n, _, d, hh, _ in runs]
    return GraphEnergy(
        area=region.area + area_minus[1],
        int_H2=int_h2[1],
        W=region.area + deficits[1],
        deficit=deficits[1],
        error=err,
        details=diag,
        area_error=abs(area_minus[1] - area_minus[0]),
        int_H2_error=abs(int_h2[1] - int_h2[0]),
    )


def _phi_flux(glued, n=512):
    """Sum over the circles d_L = 2 tau^alpha of the integral of dPhi/deta, with
    eta pointing into the discs."""
    base = glued.profile.base
    total = []
    r = 2.0 * glued.inner
    for p in glued.points:
        e1, e2 = frame_at(p)
        th = 2.0 * np.pi * np.arange(n) / n
        dirs = np.cos(th)[:, None] * e1 + np.sin(th)[:, None] * e2
        x = np.cos(r) * p + np.sin(r) * dirs
        jet = base.jet(x, order=2)
        radial = np.cos(r) * dirs - np.sin(r) * p
        total.append(-fsum(np.sum(jet.grad * radial, axis=1)) * 2.0 * np.pi / n * np.sin(r))
    return fsum(total)


def m1_extra_term(glued, quad=None, level=1):
    """tau^2 times the integral of (L Phi)(Delta Phi) over the transition annulus
    pi/3 < d_L < pi/2 of the single-point profile.

    The integrand vanishes outside the middle third of the transition, so only
    that piece is integrated.
    """
    base = glued.profile.base
    p = base.points[0]
    ann = Annulus(p, 7.0 * np.pi / 18.0, 4.0 * np.pi / 9.0, n_r=96, n_th=16)
    nodes = ann.nodes(level=level)
    jet = base.jet(nodes.x, order=2)
    lap = jet.laplacian()
    return glued.tau**2 * fsum(nodes.w * lap * (lap + 2.0 * jet.value))
