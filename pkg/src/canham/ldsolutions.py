"""The singular solution Phi of L Phi = 0 with unit logarithmic singularities at
the m equally spaced equator points, its constant c0 and the height profile
phi = c1 + tau Phi.

For m >= 2 the field is the sum of cut-off Green's functions about every point
plus a smooth correction found spectrally:

    Phi = sum_k chi(d_k) G(d_k) + w,   L w = -sum_k L(chi(d_k) G(d_k)).

The default cutoff chi is an erfc step, whose forcing has Gaussian spectral
decay; the compactly supported smooth step of :mod:`canham.foundation` is
available as ``cutoff="psi"`` but its forcing decays too slowly to be resolved
at moderate degree.  For m = 1 no such field exists and Phi is the cut-off
Green's function itself.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc

from . import linops
from .foundation import (
    BlendField,
    Constant,
    NearestDistance,
    RadialField,
    ScalarField,
    configuration_radius,
    distance_jet,
    equator_points,
    frame_at,
    min_pairwise_distance,
    nearest_index,
    psi_cut,
)

SCHEMA_VERSION = 1
MODES = ("solved", "closed_form_m2", "cutoff_m1")


class AdmissibilityError(ValueError):
    """A (m, tau, alpha) triple violating the gluing-scale requirements."""


@dataclass(frozen=True)
class Configuration:
    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be a positive integer")

    @property
    def points(self):
        return equator_points(self.m)

    @property
    def delta(self):
        return configuration_radius(self.m)


def admissibility_violations(m, tau, alpha, strict=True):
    """List the violated gluing inequalities for (m, tau, alpha).

    With ``strict=False`` the requirement 2 tau^alpha < 1/(10m) is replaced by
    the geometric one that the gluing discs D_L(2 tau^alpha) be disjoint.
    """
    out = []
    if not (tau > 0.0 and 0.0 < alpha < 1.0):
        return ["need tau > 0 and 0 < alpha < 1"]
    ta = tau**alpha
    if strict and not 2.0 * ta < configuration_radius(m):
        out.append("2τ^α ≥ 1/(10m)")
    if not tau < ta / 10.0:
        out.append("τ ≥ τ^α/10")
    if m > 1 and not 4.0 * ta < min_pairwise_distance(equator_points(m)):
        out.append("discs D_L(2τ^α) overlap")
    return out


def check_admissible(m, tau, alpha, strict=True):
    bad = admissibility_violations(m, tau, alpha, strict)
    if bad:
        raise AdmissibilityError("admissibility: " + "; ".join(bad))


# ---------------------------------------------------------------------------
# extraction cutoffs and radial profiles


def erfc_cutoff(rho_ext):
    """chi(r) = erfc((r - r0)/s)/2 with r0 = rho_ext/2 and s = r0/6.5."""
    r0 = 0.5 * rho_ext
    s = r0 / 6.5

    def chi(r):
        u = (r - r0) / s
        g = np.exp(-u * u) / np.sqrt(np.pi)
        return 0.5 * erfc(u), -g / s, 2.0 * u * g / s**2

    return chi


def psi_extraction_cutoff(rho_ext):
    """chi(r) = psi_cut[rho_ext, rho_ext/2](r), compactly supported in r < rho_ext."""

    def chi(r):
        return psi_cut(rho_ext, 0.5 * rho_ext, r, order=2)

    return chi


def _cut_green(chi):
    """Profile of chi(r) G(r) with derivatives; zero wherever chi vanishes."""

    def profile(r):
        c, dc, d2c = chi(r)
        g = np.zeros_like(r)
        dg = np.zeros_like(r)
        d2g = np.zeros_like(r)
        live = (c > 0.0) & (r > 0.0) & (r < np.pi)
        if np.any(live):
            rl = r[live]
            G, G1, G2 = linops.green_profile(rl)
            g[live] = c[live] * G
            dg[live] = dc[live] * G + c[live] * G1
            d2g[live] = d2c[live] * G + 2.0 * dc[live] * G1 + c[live] * G2
        return g, dg, d2g

    return profile


def _cut_green_forcing(chi, r):
    """L(chi G) = 2 chi' G' + G (chi'' + cot(r) chi') on an array of radii."""
    c, dc, d2c = chi(r)
    out = np.zeros_like(r)
    live = (dc != 0.0) & (r > 1e-8) & (r < np.pi - 1e-8)
    rl = r[live]
    G, G1, _ = linops.green_profile(rl)
    out[live] = 2.0 * dc[live] * G1 + G * (d2c[live] + dc[live] / np.tan(rl))
    return out


def green_field(center):
    return RadialField(center, linops.green_profile)


def closed_form_m2_profile(r):
    """1 + cos r log tan(r/2) with derivatives."""
    lt = np.log(np.tan(0.5 * r))
    c, s = np.cos(r), np.sin(r)
    return 1.0 + c * lt, -s * lt + c / s, -c * lt - 1.0 - 1.0 / s**2


# ---------------------------------------------------------------------------
# the solution object


class _SolvedPhi(ScalarField):
    def __init__(self, points, chi, series):
        self.terms = [RadialField(p, _cut_green(chi)) for p in points]
        self.series = series

    def jet(self, x, order=2):
        out = self.series.jet(x, order)
        for t in self.terms:
            j = t.jet(x, order)
            out.value += j.value
            if order:
                out.grad += j.grad
                out.hess += j.hess
        return out


@dataclass
class LDSolution:
    """Phi for the m-point configuration with its constant c0."""

    config: Configuration
    rho_ext: float
    series: linops.HarmonicSeries
    c0: float
    mode: str
    cutoff: str = "erfc"
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        self.field = self._make_field()

    @property
    def m(self):
        return self.config.m

    @property
    def points(self):
        return self.config.points

    def _make_field(self):
        pts = self.points
        if self.mode == "cutoff_m1":
            return BlendField(
                np.pi / 3.0,
                np.pi / 2.0,
                NearestDistance(pts),
                RadialField(pts[0], linops.green_profile, support=np.pi / 2.0),
                None,
            )
        if self.mode == "closed_form_m2":
            return RadialField(pts[0], closed_form_m2_profile)
        return _SolvedPhi(pts, self.chi(), self.series)

    def chi(self):
        if self.cutoff == "erfc":
            return erfc_cutoff(self.rho_ext)
        return psi_extraction_cutoff(self.rho_ext)

    def jet(self, x, order=2):
        return self.field.jet(np.atleast_2d(x), order)

    def __call__(self, x):
        return self.field(x)

    # -- serialization --------------------------------------------------

    def to_dict(self):
        payload = {
            "schema_version": SCHEMA_VERSION,
            "kind": "LDSolution",
            "m": self.m,
            "rho_ext": self.rho_ext,
            "c0": self.c0,
            "mode": self.mode,
            "cutoff": self.cutoff,
            "lmax": self.series.lmax,
            "coefficients": self.series.coeffs.tolist(),
        }
        payload["checksum"] = _checksum(payload)
        return payload

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def from_dict(cls, payload):
        payload = dict(payload)
        stored = payload.pop("checksum", None)
        if stored != _checksum(payload):
            raise ValueError("LDSolution artifact checksum mismatch (corrupted file)")
        if payload.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {payload.get('schema_version')}")
        series = linops.HarmonicSeries(payload["lmax"], np.array(payload["coefficients"]))
        return cls(
            Configuration(payload["m"]),
            payload["rho_ext"],
            series,
            payload["c0"],
            payload["mode"],
            payload["cutoff"],
        )

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _checksum(payload):
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def extraction_radius(m):
    return min(np.pi / 3.0, 0.5 * min_pairwise_distance(equator_points(m)))


def solve_smooth_part(m, lmax, rho_ext, cutoff="erfc"):
    """Spectral solve for the smooth correction w and the forcing series."""
    points = equator_points(m)
    chi = erfc_cutoff(rho_ext) if cutoff == "erfc" else psi_extraction_cutoff(rho_ext)

    def forcing(x):
        total = np.zeros(len(x))
        for p in points:
            r = distance_jet(x, p, order=0).value
            total -= _cut_green_forcing(chi, r)
        return total

    f = linops.project(forcing, lmax)
    return linops.solve_L(f), f


def build_phi(m, lmax=linops.DEFAULT_LMAX, mode=None, rho_ext=None, cutoff="erfc"):
    """Construct Phi for the m-point configuration.

    ``mode`` defaults to ``"cutoff_m1"`` for m = 1 and ``"solved"`` otherwise;
    ``"closed_form_m2"`` selects the exact two-point solution.
    """
    config = Configuration(m)
    if mode is None:
        mode = "cutoff_m1" if m == 1 else "solved"
    if mode == "cutoff_m1":
        if m != 1:
            raise ValueError("the cut-off Green's function mode is for m = 1")
        sol = LDSolution(config, np.pi / 3.0, linops.HarmonicSeries.zeros(0), 0.0, mode)
        return sol
    if m < 2:
        raise ValueError("no solution with these singularities exists for m = 1")
    if mode == "closed_form_m2":
        if m != 2:
            raise ValueError("the closed form is specific to m = 2")
        sol = LDSolution(
            config, extraction_radius(2), linops.HarmonicSeries.zeros(0), 1.0 - np.log(2.0), mode
        )
        return sol
    if rho_ext is None:
        rho_ext = extraction_radius(m)
    series, forcing = solve_smooth_part(m, lmax, rho_ext, cutoff)
    sol = LDSolution(config, rho_ext, series, np.nan, "solved", cutoff)
    sol.diagnostics["forcing_degree_one"] = forcing.coeffs[1:4].tolist()
    sol.diagnostics["forcing_tail"] = float(np.abs(forcing.coeffs[lmax * lmax :]).max())
    sol.c0 = compute_c0(sol)
    sol.diagnostics["c0_direct"] = c0_direct(sol)
    return sol


def c0_direct(sol, k=0):
    """c0 read off the decomposition at p_k: the regular part of Phi there."""
    if sol.mode != "solved":
        return sol.c0
    pts = sol.points
    p = pts[k]
    chi = sol.chi()
    total = sol.series.jet(p[None, :], order=0).value[0]
    for j, q in enumerate(pts):
        if j == k:
            continue
        r = distance_jet(p[None, :], q, order=0).value
        total += _cut_green(chi)(r)[0][0]
    return float(total)


def _regular_part_average(sol, p, r, ndir=8):
    e1, e2 = frame_at(p)
    th = 2.0 * np.pi * np.arange(ndir) / ndir
    x = np.cos(r) * p + np.sin(r) * (np.cos(th)[:, None] * e1 + np.sin(th)[:, None] * e2)
    phi = sol.field(x)
    return float(np.mean(phi - linops.green_eval(np.full(ndir, r))))


def compute_c0(sol, k=0, tol=1e-6):
    """lim (Phi - G(d_L)) at the point p_k by directional averages and Richardson.

    Averages over 8 directions at radii delta/4, delta/8, delta/16 are combined
    by two Richardson steps (the remainder is even in r: r^2, r^4, ...).
    """
    if sol.mode == "cutoff_m1":
        return 0.0
    p = sol.points[k]
    delta = sol.config.delta
    g = [_regular_part_average(sol, p, delta / d) for d in (4.0, 8.0, 16.0)]
    r1 = [(4.0 * g[1] - g[0]) / 3.0, (4.0 * g[2] - g[1]) / 3.0]
    c0 = (16.0 * r1[1] - r1[0]) / 15.0
    if abs(r1[1] - r1[0]) > tol or abs(c0 - r1[1]) > tol:
        raise ValueError(
            f"c0 extrapolation did not converge: estimates {r1[0]!r}, {r1[1]!r}, {c0!r}"
        )
    return float(c0)


def phi_prime_eval(sol, x, order=2):
    """Jet of Phi - G(d_L) - c0 cos(d_L) on D_L(delta) minus L."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    pts = sol.points
    k = nearest_index(x, pts)
    r = distance_jet(x, pts[0], order=0).value
    for i, p in enumerate(pts):
        r[k == i] = distance_jet(x[k == i], p, order=0).value
    if np.any(r >= sol.config.delta) or np.any(r == 0.0):
        raise ValueError("phi_prime_eval: points must lie in D_L(delta) minus L")
    out = sol.jet(x, order)
    for i, p in enumerate(pts):
        mask = k == i
        if not np.any(mask):
            continue
        rj = distance_jet(x[mask], p, order)
        G, G1, G2 = linops.green_profile(rj.value)
        c, s = np.cos(rj.value), np.sin(rj.value)
        g = G + sol.c0 * c
        out.value[mask] -= g
        if order:
            dg = G1 - sol.c0 * s
            d2g = G2 - sol.c0 * c
            out.grad[mask] -= dg[:, None] * rj.grad
            out.hess[mask] -= (
                d2g[:, None, None] * rj.grad[:, :, None] * rj.grad[:, None, :]
                + dg[:, None, None] * rj.hess
            )
    return out


@dataclass
class Profile:
    """The height function phi = c1 + tau Phi with c1 = tau log(2/tau) - tau c0."""

    base: LDSolution
    tau: float
    alpha: float
    strict: bool = True

    def __post_init__(self):
        check_admissible(self.base.m, self.tau, self.alpha, self.strict)
        self.c1 = self.tau * np.log(2.0 / self.tau) - self.tau * self.base.c0
        self.field = Constant(self.c1) + self.tau * self.base.field

    def jet(self, x, order=2):
        return self.field.jet(np.atleast_2d(x), order)

    def __call__(self, x):
        return self.field(x)


def build_profile(sol, tau, alpha, strict=True):
    return Profile(sol, tau, alpha, strict)


__all__ = [
    "AdmissibilityError",
    "Configuration",
    "LDSolution",
    "Profile",
    "admissibility_violations",
    "build_phi",
    "build_profile",
    "c0_direct",
    "check_admissible",
    "compute_c0",
    "extraction_radius",
    "phi_prime_eval",
]
