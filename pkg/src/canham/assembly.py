"""The closed surface Sigma_{m, tau}: two graphs of +-phi_gl over S^2 minus
D_L(tau^alpha) joined by m catenoidal bridges.

The total Willmore energy is assembled from deficits,

    W(Sigma) - 8 pi = m * bridge_deficit + 2 * graph_deficit,

because 8 pi = 2 |S^2| and the disc areas |D_L(tau^alpha)| = m |D_p(tau^alpha)|
cancel between the two kinds of pieces.  Meshes are for topology, export and
the R^3 volume only; no energy number is taken from a mesh.
"""

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import ConvexHull

from .catenoid import BridgeChart, bridge_integrands, bridge_willmore
from .foundation import Jet, frame_at
from .graphs import (
    area_density,
    build_glued_profile,
    exterior_willmore,
    graph_mean_curvature,
    m1_extra_term,
)
from .ldsolutions import SCHEMA_VERSION, build_phi, build_profile, check_admissible
from .linops import DEFAULT_LMAX
from .quadrature import QuadratureSpec, fsum, gauss_legendre

CERTIFIED = "W<8π: certified"
INCONCLUSIVE = "inconclusive"
VIOLATED = "W≥8π"


def thread_count(jobs=None):
    """Worker count: ``jobs`` if given, else CANHAM_THREADS, else 1."""
    if jobs is None:
        jobs = int(os.environ.get("CANHAM_THREADS", "1"))
    return max(1, int(jobs))


def ordered_map(func, items, jobs=None):
    """map() run on a thread pool; results come back in input order."""
    items = list(items)
    n = thread_count(jobs)
    if n == 1 or len(items) < 2:
        return [func(i) for i in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, items))


@dataclass(frozen=True)
class MeshSpec:
    """Mesh resolution: vertices per neck ring, target edge length elsewhere,
    and the smallest ring radius used to refine about an optional foot point."""

    n_ring: int = 32
    h_max: float = 0.06
    foot_r_min: float = 1e-4


@dataclass
class SurfaceSpec:
    m: int
    tau: float
    alpha: float = 0.5
    lmax: int = DEFAULT_LMAX
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    mesh: MeshSpec = field(default_factory=MeshSpec)
    strict: bool = True

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be a positive integer")
        self.m = int(self.m)
        self.tau = float(self.tau)
        self.alpha = float(self.alpha)
        check_admissible(self.m, self.tau, self.alpha, self.strict)

    def to_dict(self):
        return {
            "m": self.m,
            "tau": self.tau,
            "alpha": self.alpha,
            "lmax": self.lmax,
            "strict": self.strict,
            "quadrature": asdict(self.quad),
            "mesh": asdict(self.mesh),
        }


@dataclass
class BuiltSurface:
    spec: SurfaceSpec
    solution: object
    profile: object
    glued: object
    bridges: list
    interface_mismatch: float


_SOLUTIONS = {}


def ld_solution(m, lmax=DEFAULT_LMAX):
    """Phi for m points, cached per (m, lmax) since it depends on nothing else."""
    key = (m, lmax)
    if key not in _SOLUTIONS:
        _SOLUTIONS[key] = build_phi(m, lmax)
    return _SOLUTIONS[key]


def _ring(p, r, n, offset=0.0):
    e1, e2 = frame_at(p)
    th = offset + 2.0 * np.pi * np.arange(n) / n
    return np.cos(r) * p + np.sin(r) * (np.cos(th)[:, None] * e1 + np.sin(th)[:, None] * e2)


def build_surface(spec, solution=None):
    """Profile, glued profile and the m bridge charts of Sigma_{m, tau}."""
    sol = solution if solution is not None else ld_solution(spec.m, spec.lmax)
    if sol.m != spec.m:
        raise ValueError("LD solution is for a different m")
    profile = build_profile(sol, spec.tau, spec.alpha, spec.strict)
    glued = build_glued_profile(profile)
    bridges = [BridgeChart(p, spec.tau, spec.alpha) for p in sol.points]
    worst = 0.0
    for b in bridges:
        ring = _ring(b.center, b.outer_radius, 16)
        worst = max(worst, float(np.abs(glued(ring) - b.boundary_height).max()))
    if worst > 1e-12:
        raise ValueError(f"graph and bridge heights differ by {worst:.3e} at d_L = tau^alpha")
    return BuiltSurface(spec, sol, profile, glued, bridges, worst)


# ---------------------------------------------------------------------------
# energy


@dataclass
class EnergyReport:
    spec: dict
    bridge_deficit: float
    bridge_error: float
    graph_deficit: float
    graph_error: float
    W: float
    W_minus_8pi: float
    error: float
    verdict: str
    areas: dict
    int_H2: dict
    single_pass: dict
    diagnostics: dict
    errors: dict = field(default_factory=dict)

    @property
    def certified(self):
        return self.verdict == CERTIFIED

    def to_dict(self):
        out = {"schema_version": SCHEMA_VERSION, "kind": "EnergyReport"}
        out.update(asdict(self))
        return out

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True, default=float)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def verdict(margin, error):
    """Certified only when the margin is negative by more than the error bound."""
    if margin < -error:
        return CERTIFIED
    if margin > error:
        return VIOLATED
    return INCONCLUSIVE


def _mirror(jet):
    return Jet(-jet.value, -jet.grad, -jet.hess)


def _sheet_integrand(x, jet):
    dens, dens_m1 = area_density(jet)
    h = graph_mean_curvature(x, jet)
    return dens_m1 + 0.25 * h * h * dens


def single_pass_deficit(built, jobs=None):
    """W - 8 pi as one compensated sum over every node of every piece.

    All m lunes of both sheets (the lower one evaluated from the mirrored jet)
    and both halves of all m bridges are integrated at the refined level used
    by the decomposition, without invoking any symmetry.
    """
    glued = built.glued
    q = built.spec.quad
    region = glued.region()

    def lune_terms(k):
        nodes = region.nodes(q, 1, lune=k)
        jet = glued.field.jet(nodes.x, order=2)
        upper = nodes.w * _sheet_integrand(nodes.x, jet)
        lower = nodes.w * _sheet_integrand(nodes.x, _mirror(jet))
        return np.concatenate([upper, lower])

    terms = ordered_map(lune_terms, range(region.m), jobs)
    n_s, n_th = 2 * q.n_s, 2 * q.n_theta
    dtheta = 2.0 * np.pi / n_th
    for chart in built.bridges:
        s, w = gauss_legendre(n_s, 0.0, chart.s_max)
        amd, _, qh2 = bridge_integrands(chart, s)
        per_strip = w * (amd + qh2) * dtheta
        # upper and lower halves, every angular strip
        terms.append(np.tile(per_strip, 2 * n_th))
        terms.append(np.array([-4.0 * np.pi * 2.0 * np.sin(0.5 * chart.tau) ** 2]))
    return fsum(np.concatenate(terms))


def total_energy(spec, built=None, single_pass=True, jobs=None):
    """EnergyReport for Sigma_{m, tau} with the 8 pi verdict."""
    built = built if built is not None else build_surface(spec)
    m, tau = spec.m, spec.tau
    bridge = ordered_map(lambda c: bridge_willmore(c, spec.quad), built.bridges, jobs)
    b0 = bridge[0]
    spread = max(abs(b.deficit - b0.deficit) for b in bridge)
    graph = exterior_willmore(built.glued, spec.quad)
    margin = fsum([m * b0.deficit, 2.0 * graph.deficit])
    err = m * b0.error + 2.0 * graph.error
    W = fsum([m * b0.W, 2.0 * graph.W])
    sp = {}
    if single_pass:
        direct = single_pass_deficit(built, jobs)
        sp = {"W_minus_8pi": direct, "difference": abs(direct - margin)}
    lt = abs(np.log(tau))
    scale = m * np.pi * tau**2 * lt
    diag = {
        "margin_scale": scale,
        "margin_ratio": abs(margin) / scale,
        "margin_over_error": abs(margin) / err if err > 0 else float("inf"),
        "bridge_C": b0.deficit / (tau**2 * lt),
        "bridge_C_bound": 8.0 * np.pi / 3.0,
        "graph_C": -graph.deficit / (m * tau**2 * lt),
        "graph_C_bound": 11.0 * np.pi / 6.0,
        "bridge_symmetry_spread": spread,
        "bridge_strip_spread": b0.strip_spread,
        "interface_mismatch": built.interface_mismatch,
        "c0": built.solution.c0,
        "c1": built.profile.c1,
        "relaxed_admissibility": not spec.strict,
    }
    diag.update({f"graph_{k}": v for k, v in graph.details.items()})
    if m == 1:
        # the cut-off transition of the single-point profile, per sheet, times 1/4
        diag["m1_transition_term"] = 0.25 * m1_extra_term(built.glued)
    return EnergyReport(
        spec=spec.to_dict(),
        bridge_deficit=b0.deficit,
        bridge_error=b0.error,
        graph_deficit=graph.deficit,
        graph_error=graph.error,
        W=W,
        W_minus_8pi=margin,
        error=err,
        verdict=verdict(margin, err),
        areas={"bridge": b0.area, "graph": graph.area, "total": m * b0.area + 2.0 * graph.area},
        int_H2={"bridge": b0.int_H2, "graph": graph.int_H2},
        single_pass=sp,
        diagnostics=diag,
        errors={
            "bridge_deficit": b0.error,
            "graph_deficit": graph.error,
            "W": err,
            "W_minus_8pi": err,
            "area_bridge": b0.area_error,
            "area_graph": graph.area_error,
            "area_total": m * b0.area_error + 2.0 * graph.area_error,
            "int_H2_bridge": b0.int_H2_error,
            "int_H2_graph": graph.int_H2_error,
            # exact identities and symmetry checks
            "single_pass": 0.0,
        },
    )


# ---------------------------------------------------------------------------
# meshing


@dataclass
class SurfaceMesh:
    vertices: np.ndarray
    faces: np.ndarray
    m: int = 0
    sheet: np.ndarray = None  # +1 upper graph, -1 lower graph, 0 bridge

    @property
    def dim(self):
        return self.vertices.shape[1]

    def edges(self):
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        return np.unique(np.sort(e, axis=1), axis=0)

    @property
    def euler_characteristic(self):
        return len(self.vertices) - len(self.edges()) + len(self.faces)

    @property
    def genus(self):
        return (2 - self.euler_characteristic) // 2

    def is_watertight(self):
        f = self.faces
        e = np.sort(np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]), axis=1)
        _, counts = np.unique(e, axis=0, return_counts=True)
        return bool(np.all(counts == 2))

    def is_oriented(self):
        """Every directed edge occurs once and its reverse occurs once."""
        f = self.faces
        d = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        n = len(self.vertices)
        key = d[:, 0].astype(np.int64) * n + d[:, 1]
        rev = d[:, 1].astype(np.int64) * n + d[:, 0]
        if len(np.unique(key)) != len(key):
            return False
        return bool(np.all(np.isin(rev, key)))

    def with_vertices(self, vertices):
        return SurfaceMesh(np.asarray(vertices), self.faces.copy(), self.m, self.sheet)

    def flipped(self):
        return SurfaceMesh(self.vertices, self.faces[:, ::-1].copy(), self.m, self.sheet)

    def summary(self):
        return {
            "vertices": len(self.vertices),
            "faces": len(self.faces),
            "euler_characteristic": int(self.euler_characteristic),
            "genus": int(self.genus),
            "watertight": self.is_watertight(),
            "oriented": self.is_oriented(),
        }


def fibonacci_sphere(n):
    k = np.arange(n) + 0.5
    z = 1.0 - 2.0 * k / n
    phi = np.pi * (1.0 + 5.0**0.5) * k
    s = np.sqrt(1.0 - z * z)
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)


def _ring_stack(center, r0, r_stop, n_ring):
    """Concentric rings from r0 (unstaggered) growing geometrically to r_stop."""
    growth = np.exp(np.sqrt(3.0) * np.pi / n_ring)
    rings, r, j = [], r0, 0
    while r < r_stop:
        rings.append(_ring(center, r, n_ring, offset=np.pi / n_ring * (j % 2)))
        r *= growth
        j += 1
    return rings, r


def sphere_triangulation(centers, r0, mesh_spec, foot=None, foot_r0=None):
    """Triangulate S^2 minus the discs D(centers, r0).

    Returns (points, faces, hole_rings) where hole_rings[k] lists the indices
    of the n_ring boundary vertices of the k-th hole in angular order.
    """
    n = mesh_spec.n_ring
    h = mesh_spec.h_max
    r_stop = h * n / (2.0 * np.pi)
    pts, hole_rings, caps = [], [], []
    count = 0
    for c in centers:
        rings, reach = _ring_stack(c, r0, r_stop, n)
        hole_rings.append(np.arange(count, count + n))
        block = np.concatenate(rings)
        pts.append(block)
        count += len(block)
        caps.append((c, reach))
    if foot is not None:
        rings, reach = _ring_stack(foot, foot_r0, r_stop, n)
        block = np.concatenate([foot[None, :]] + rings)
        pts.append(block)
        count += len(block)
        caps.append((foot, reach))
    n_fill = int(np.ceil(8.0 * np.pi / (np.sqrt(3.0) * h * h)))
    fill = fibonacci_sphere(n_fill)
    keep = np.ones(len(fill), bool)
    for c, reach in caps:
        keep &= np.arccos(np.clip(fill @ c, -1.0, 1.0)) > reach + 0.5 * h
    pts.append(fill[keep])
    points = np.concatenate(pts)
    hull_pts = np.concatenate([points, np.asarray(centers)])
    faces = ConvexHull(hull_pts).simplices
    # orient outward
    a, b, c = (hull_pts[faces[:, i]] for i in range(3))
    flip = np.einsum("ij,ij->i", np.cross(b - a, c - a), a + b + c) < 0.0
    faces[flip] = faces[flip][:, ::-1]
    # drop the fans about the disc centers
    faces = faces[np.all(faces < len(points), axis=1)]
    return points, faces, hole_rings


def _check_hole(faces, ring):
    """The boundary of the hole must be exactly the given ring."""
    f = faces
    e = np.sort(np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]), axis=1)
    uniq, counts = np.unique(e, axis=0, return_counts=True)
    border = uniq[counts == 1]
    ring_set = set(int(i) for i in ring)
    mine = [tuple(x) for x in border if x[0] in ring_set and x[1] in ring_set]
    if len(mine) != len(ring):
        raise ValueError(
            f"stitching count mismatch: hole boundary has {len(mine)} edges, ring has {len(ring)}"
        )


def _sheet_vertices(points, u):
    return np.concatenate([np.cos(u)[:, None] * points, np.sin(u)[:, None]], axis=1)


def mesh_surface(built, mesh_spec=None, foot=None, foot_r0=None):
    """Watertight oriented triangle mesh of Sigma_{m, tau} with vertices on S^3.

    The graph sheets share one triangulation of S^2 minus D_L(tau^alpha); each
    bridge is an (s, theta) grid whose end rings are the sheets' hole rings.
    ``foot`` optionally refines the sheets about a point of S^2 down to
    ``foot_r0``.
    """
    ms = mesh_spec or built.spec.mesh
    n = ms.n_ring
    glued = built.glued
    centers = [b.center for b in built.bridges]
    r0 = built.bridges[0].outer_radius
    points, faces, holes = sphere_triangulation(
        centers, r0, ms, foot=foot, foot_r0=foot_r0 or ms.foot_r_min
    )
    for ring in holes:
        _check_hole(faces, ring)
    u = glued(points)
    upper = _sheet_vertices(points, u)
    lower = _sheet_vertices(points, -u)
    npts = len(points)
    verts = [upper, lower]
    tris = [faces, faces[:, ::-1] + npts]
    sheet = [np.ones(npts, int), -np.ones(npts, int)]
    offset = 2 * npts
    for chart, ring in zip(built.bridges, holes):
        s_max = chart.s_max
        n_half = max(2, int(np.ceil(s_max * n / (2.0 * np.pi))))
        s_levels = np.linspace(s_max, -s_max, 2 * n_half + 1)[1:-1]
        th = 2.0 * np.pi * np.arange(n) / n
        S, TH = np.meshgrid(s_levels, th, indexing="ij")
        inner = chart.embed(S, TH).reshape(-1, 4)
        verts.append(inner)
        sheet.append(np.zeros(len(inner), int))
        levels = [ring] + [offset + n * i + np.arange(n) for i in range(len(s_levels))]
        levels.append(ring + npts)
        offset += len(inner)
        quads = []
        for top, bot in zip(levels[:-1], levels[1:]):
            nxt = np.roll(np.arange(n), -1)
            quads.append(np.stack([top, bot, bot[nxt]], axis=1))
            quads.append(np.stack([top, bot[nxt], top[nxt]], axis=1))
        tris.append(np.concatenate(quads))
    mesh = SurfaceMesh(np.concatenate(verts), np.concatenate(tris), len(centers), np.concatenate(sheet))
    if not mesh.is_oriented():
        # bridge strips were generated with the opposite orientation
        faces_all = mesh.faces.copy()
        nb = sum(len(t) for t in tris[2:])
        faces_all[-nb:] = faces_all[-nb:, ::-1]
        mesh = SurfaceMesh(mesh.vertices, faces_all, mesh.m, mesh.sheet)
    if not (mesh.is_watertight() and mesh.is_oriented()):
        raise ValueError("mesh is not a closed oriented surface")
    return mesh


def mirror_deviation(mesh):
    """max | lower vertex - mirror(upper vertex) | over the two graph sheets."""
    up = mesh.vertices[mesh.sheet == 1]
    lo = mesh.vertices[mesh.sheet == -1].copy()
    lo[:, 3] = -lo[:, 3]
    return float(np.abs(up - lo).max())


def min_dihedral_angle(mesh):
    """Smallest interior dihedral angle over interior edges (R^3 or R^4 vertices).

    Uses the angle between the two face normals measured within the span of
    the two triangles; a value near 0 indicates a fold.
    """
    v = mesh.vertices
    f = mesh.faces
    e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    opp = np.concatenate([f[:, 2], f[:, 0], f[:, 1]])
    key = np.sort(e, axis=1)
    order = np.lexsort((key[:, 1], key[:, 0]))
    key, e, opp = key[order], e[order], opp[order]
    a, b = v[e[0::2, 0]], v[e[0::2, 1]]
    c1, c2 = v[opp[0::2]], v[opp[1::2]]
    t = b - a
    t /= np.linalg.norm(t, axis=1, keepdims=True)

    def perp(c):
        w = c - a
        w = w - np.sum(w * t, 1)[:, None] * t
        return w / np.linalg.norm(w, axis=1, keepdims=True)

    cosang = np.clip(np.sum(perp(c1) * perp(c2), 1), -1.0, 1.0)
    return float(np.arccos(cosang).min())


# ---------------------------------------------------------------------------
# export


def write_obj(path, mesh):
    """OBJ with the first three coordinates; a 4D mesh also gets <path>.w.csv."""
    v = mesh.vertices
    with open(path, "w") as fh:
        for x in v[:, :3]:
            fh.write(f"v {x[0]:.17g} {x[1]:.17g} {x[2]:.17g}\n")
        for t in mesh.faces + 1:
            fh.write(f"f {t[0]} {t[1]} {t[2]}\n")
    if mesh.dim == 4:
        np.savetxt(str(path) + ".w.csv", v[:, 3], fmt="%.17g", header="x4", comments="")
    return path


def read_obj(path):
    vs, fs = [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vs.append([float(t) for t in parts[1:4]])
            elif parts[0] == "f":
                fs.append([int(t.split("/")[0]) - 1 for t in parts[1:4]])
    v = np.array(vs)
    w_path = str(path) + ".w.csv"
    if os.path.exists(w_path):
        v = np.concatenate([v, np.loadtxt(w_path, skiprows=1, ndmin=1)[:, None]], axis=1)
    return SurfaceMesh(v, np.array(fs, dtype=np.int64))


def write_ply(path, mesh):
    """Binary little-endian PLY of the first three coordinates."""
    v = np.ascontiguousarray(mesh.vertices[:, :3], dtype="<f8")
    f = mesh.faces.astype("<i4")
    header = (
        "ply\nformat binary_little_endian 1.0\n"
        f"element vertex {len(v)}\nproperty double x\nproperty double y\nproperty double z\n"
        f"element face {len(f)}\nproperty list uchar int vertex_indices\nend_header\n"
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(v.tobytes())
        rec = np.empty(len(f), dtype=[("n", "u1"), ("i", "<i4", (3,))])
        rec["n"] = 3
        rec["i"] = f
        fh.write(rec.tobytes())
    return path


def read_ply(path):
    with open(path, "rb") as fh:
        data = fh.read()
    end = data.index(b"end_header\n") + len(b"end_header\n")
    header = data[:end].decode("ascii").split("\n")
    nv = int(next(h for h in header if h.startswith("element vertex")).split()[-1])
    nf = int(next(h for h in header if h.startswith("element face")).split()[-1])
    v = np.frombuffer(data, dtype="<f8", count=3 * nv, offset=end).reshape(nv, 3)
    rec = np.frombuffer(
        data, dtype=[("n", "u1"), ("i", "<i4", (3,))], count=nf, offset=end + 24 * nv
    )
    if np.any(rec["n"] != 3):
        raise ValueError("only triangle faces are supported")
    return SurfaceMesh(v.copy(), rec["i"].astype(np.int64))


__all__ = [
    "BuiltSurface",
    "EnergyReport",
    "MeshSpec",
    "SurfaceMesh",
    "SurfaceSpec",
    "build_surface",
    "mesh_surface",
    "single_pass_deficit",
    "total_energy",
    "verdict",
    "write_obj",
    "write_ply",
]
