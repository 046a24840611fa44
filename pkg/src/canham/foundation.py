"""Cutoff functions, geodesic distance jets and scalar fields on the unit sphere.

Points on S^2 are stored as ``(N, 3)`` arrays of unit vectors.  A scalar field
is evaluated to a :class:`Jet`: the value, the tangent gradient (as an ambient
3-vector) and the covariant Hessian (as a symmetric ambient 3x3 matrix acting
on the tangent plane, zero on the normal direction).

Composite fields are built from radial profiles, sums, scalings and smooth
blends so that every derivative is carried analytically through the chain and
product rules.
"""

from dataclasses import dataclass

import numpy as np

# exp(-h) underflows to zero well before |h| = 745; beyond this the logistic
# derivatives are below the smallest normal double and are set to zero.
_LOGISTIC_CLIP = 700.0


# ---------------------------------------------------------------------------
# one-dimensional cutoff


def _smooth_step_exponent(t):
    """Return h(t) = 2t / (1 - t^2) on |t| < 1 with its first two derivatives."""
    one_minus = 1.0 - t * t
    h = 2.0 * t / one_minus
    dh = 2.0 * (1.0 + t * t) / one_minus**2
    d2h = 4.0 * t * (t * t + 3.0) / one_minus**3
    return h, dh, d2h


def cutoff(t, order=0):
    """Smooth monotone step equal to 0 for t <= -1 and 1 for t >= 1.

    The step is e(1+t) / (e(1+t) + e(1-t)) with e(s) = exp(-1/s) for s > 0.
    On (-1, 1) this equals the logistic function of 2t / (1 - t^2), which is
    the form evaluated here; it is flat to all orders at t = +-1.

    Parameters
    ----------
    t : array_like
        Evaluation points.
    order : int
        Number of derivatives to return (0, 1 or 2).

    Returns
    -------
    ndarray or tuple of ndarray
        ``value`` when ``order == 0``, otherwise ``(value, d1, ..., d_order)``.
    """
    t = np.asarray(t, dtype=float)
    val = np.where(t >= 1.0, 1.0, 0.0)
    d1 = np.zeros_like(val)
    d2 = np.zeros_like(val)
    inner = np.abs(t) < 1.0
    if np.any(inner):
        ti = t[inner]
        h, dh, d2h = _smooth_step_exponent(ti)
        hc = np.clip(h, -_LOGISTIC_CLIP, _LOGISTIC_CLIP)
        sig = 0.5 * (1.0 + np.tanh(0.5 * hc))
        ds = sig * (1.0 - sig)
        d2s = ds * (1.0 - 2.0 * sig)
        live = np.abs(h) < _LOGISTIC_CLIP
        val[inner] = sig
        d1[inner] = np.where(live, ds * dh, 0.0)
        d2[inner] = np.where(live, d2s * dh * dh + ds * d2h, 0.0)
    if order == 0:
        return val
    if order == 1:
        return val, d1
    return val, d1, d2


def psi(t):
    """The smooth step :func:`cutoff` without derivatives."""
    return cutoff(t)


def psi_cut(a, b, x, order=0):
    """Cutoff rising from 0 near ``a`` to 1 near ``b`` (``a != b``).

    The affine map sending a to -3 and b to 3 is composed with :func:`cutoff`,
    so the value is exactly 0 for x on the ``a`` side of a + (b - a)/3 and
    exactly 1 on the ``b`` side of b - (b - a)/3.
    """
    if a == b:
        raise ValueError("cutoff endpoints must differ")
    scale = 6.0 / (b - a)
    t = scale * (np.asarray(x, dtype=float) - a) - 3.0
    out = cutoff(t, order)
    if order == 0:
        return out
    derivs = [out[0]] + [out[k] * scale**k for k in range(1, order + 1)]
    return tuple(derivs)


def blend(a, b, x, f0, f1):
    """Blend ``f0`` (near ``a``) into ``f1`` (near ``b``) along ``x``.

    ``f0`` and ``f1`` are callables of the masked coordinate array; each is
    only evaluated where its weight is nonzero, so singular extensions of one
    function into the other's region never produce ``0 * inf``.
    """
    x = np.asarray(x, dtype=float)
    w1 = psi_cut(a, b, x)
    w0 = psi_cut(b, a, x)
    out = np.zeros_like(x)
    m1 = w1 > 0.0
    m0 = w0 > 0.0
    if np.any(m1):
        out[m1] += w1[m1] * f1(x[m1])
    if np.any(m0):
        out[m0] += w0[m0] * f0(x[m0])
    return out


# ---------------------------------------------------------------------------
# sphere geometry


def normalize(x):
    x = np.asarray(x, dtype=float)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def geodesic_distance(x, p):
    """Great-circle distance between rows of ``x`` and the point(s) ``p``."""
    x = np.atleast_2d(x)
    cross = np.linalg.norm(np.cross(x, p), axis=-1)
    dot = np.sum(x * p, axis=-1)
    return np.arctan2(cross, dot)


def distance_to_set(x, points):
    """Distance d_L(x) from each row of ``x`` to the nearest point of ``points``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.size == 0:
        raise ValueError("empty point set")
    x = np.atleast_2d(x)
    return np.min(geodesic_distance(x[:, None, :], points[None, :, :]), axis=1)


def unit_check(x, dim, tol=1e-14):
    """Return ``x`` as float rows of length ``dim``, rejecting non-unit vectors."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[-1] != dim:
        raise ValueError(f"expected {dim}-vectors, got shape {x.shape}")
    err = np.max(np.abs(np.linalg.norm(x, axis=-1) - 1.0))
    if err > tol:
        raise ValueError(f"points are not unit vectors (max |norm - 1| = {err:.3g})")
    return x


def tangent_projector(x):
    """Orthogonal projectors I - x x^T onto the tangent planes, shape (N, 3, 3)."""
    return np.eye(3)[None, :, :] - x[:, :, None] * x[:, None, :]


def tangent_frame(x):
    """Orthonormal tangent frame (t1, t2) with t1 x t2 = x at each point."""
    x = np.atleast_2d(x)
    axis = np.zeros_like(x)
    axis[np.arange(len(x)), np.argmin(np.abs(x), axis=1)] = 1.0
    t1 = normalize(axis - np.sum(axis * x, axis=1, keepdims=True) * x)
    t2 = np.cross(x, t1)
    return t1, t2


def frame_at(p):
    """Orthonormal tangent basis (e1, e2) at a single point, e1 x e2 = p."""
    t1, t2 = tangent_frame(np.asarray(p, dtype=float)[None, :])
    return t1[0], t2[0]


def polar_points(p, r, theta):
    """Points at geodesic distance ``r`` and bearing ``theta`` from ``p``."""
    e1, e2 = frame_at(p)
    r = np.asarray(r, dtype=float)[..., None]
    theta = np.asarray(theta, dtype=float)[..., None]
    return np.cos(r) * p + np.sin(r) * (np.cos(theta) * e1 + np.sin(theta) * e2)


def equator_points(m):
    """The m points at longitudes 2 pi k / m on the equator z = 0."""
    phi = 2.0 * np.pi * np.arange(m) / m
    return np.stack([np.cos(phi), np.sin(phi), np.zeros(m)], axis=1)


def configuration_radius(m):
    """Default disc radius 1/(10 m) around the points of the m-configuration."""
    return 1.0 / (10.0 * m)


def min_pairwise_distance(points):
    points = np.atleast_2d(points)
    if len(points) < 2:
        return np.pi
    d = geodesic_distance(points[:, None, :], points[None, :, :])
    d[np.diag_indices(len(points))] = np.inf
    return float(np.min(d))


def embed_s3(q, u):
    """Lift points q of S^2 to S^3 at height u: cos(u) q + sin(u) e4."""
    q = np.atleast_2d(q)
    u = np.asarray(u, dtype=float)
    return np.concatenate([np.cos(u)[:, None] * q, np.sin(u)[:, None]], axis=1)


# ---------------------------------------------------------------------------
# jets and fields


@dataclass
class Jet:
    """Value, tangent gradient (N, 3) and covariant Hessian (N, 3, 3)."""

    value: np.ndarray
    grad: np.ndarray = None
    hess: np.ndarray = None

    def laplacian(self):
        return np.trace(self.hess, axis1=1, axis2=2)

    def subset(self, mask):
        return Jet(
            self.value[mask],
            None if self.grad is None else self.grad[mask],
            None if self.hess is None else self.hess[mask],
        )


def _zero_jet(n, order):
    if order == 0:
        return Jet(np.zeros(n))
    return Jet(np.zeros(n), np.zeros((n, 3)), np.zeros((n, 3, 3)))


def _scatter(jet, mask, n, order):
    out = _zero_jet(n, order)
    out.value[mask] = jet.value
    if order:
        out.grad[mask] = jet.grad
        out.hess[mask] = jet.hess
    return out


class ScalarField:
    """Base class of scalar fields on S^2 with analytic derivatives."""

    def jet(self, x, order=2):
        raise NotImplementedError

    def __call__(self, x):
        return self.jet(np.atleast_2d(x), order=0).value

    def __add__(self, other):
        if np.isscalar(other):
            other = Constant(other)
        return SumField([self, other])

    __radd__ = __add__

    def __mul__(self, c):
        return ScaledField(self, float(c))

    __rmul__ = __mul__


class Constant(ScalarField):
    def __init__(self, c):
        self.c = float(c)

    def jet(self, x, order=2):
        out = _zero_jet(len(x), order)
        out.value[:] = self.c
        return out


class SumField(ScalarField):
    def __init__(self, terms):
        self.terms = list(terms)

    def jet(self, x, order=2):
        out = _zero_jet(len(x), order)
        for term in self.terms:
            j = term.jet(x, order)
            out.value += j.value
            if order:
                out.grad += j.grad
                out.hess += j.hess
        return out


class ScaledField(ScalarField):
    def __init__(self, field, c):
        self.field = field
        self.c = c

    def jet(self, x, order=2):
        j = self.field.jet(x, order)
        if order == 0:
            return Jet(self.c * j.value)
        return Jet(self.c * j.value, self.c * j.grad, self.c * j.hess)


def distance_jet(x, p, order=2):
    """Jet of r = d(x, p); the derivatives are singular at r = 0 and r = pi."""
    x = np.atleast_2d(x)
    cr = np.cross(x, p)
    sin_r = np.linalg.norm(cr, axis=1)
    cos_r = x @ p
    r = np.arctan2(sin_r, cos_r)
    if order == 0:
        return Jet(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        # x cross (x cross p) = (x.p) x - p, the unnormalized gradient of r
        grad = np.cross(x, cr) / sin_r[:, None]
        cot = cos_r / sin_r
    proj = tangent_projector(x)
    hess = cot[:, None, None] * (proj - grad[:, :, None] * grad[:, None, :])
    return Jet(r, grad, hess)


def compose_radial(rjet, g, dg=None, d2g=None):
    """Jet of g(r) given the jet of r and the derivatives of g along r."""
    if rjet.grad is None:
        return Jet(g)
    grad = dg[:, None] * rjet.grad
    hess = d2g[:, None, None] * rjet.grad[:, :, None] * rjet.grad[:, None, :]
    hess = hess + dg[:, None, None] * rjet.hess
    return Jet(g, grad, hess)


class RadialField(ScalarField):
    """g(d(x, center)) for a profile returning (g, g', g'') on an r array.

    ``support`` optionally restricts evaluation to r < support (the field is
    zero outside), which keeps singular profiles away from the antipode.
    """

    def __init__(self, center, profile, support=None):
        self.center = np.asarray(center, dtype=float)
        self.profile = profile
        self.support = support

    def jet(self, x, order=2):
        x = np.atleast_2d(x)
        if self.support is None:
            return self._jet(x, order)
        r = geodesic_distance(x, self.center)
        mask = r < self.support
        out = _zero_jet(len(x), order)
        if np.any(mask):
            out = _scatter(self._jet(x[mask], order), mask, len(x), order)
        return out

    def _jet(self, x, order):
        rj = distance_jet(x, self.center, order)
        g, dg, d2g = self.profile(rj.value)
        if order == 0:
            return Jet(g)
        return compose_radial(rj, g, dg, d2g)


def nearest_index(x, points):
    """Index of the closest point of ``points`` to each row of ``x``."""
    return np.argmax(np.atleast_2d(x) @ np.atleast_2d(points).T, axis=1)


class NearestDistance(ScalarField):
    """The distance d_L(x) to the nearest point of a finite set L."""

    def __init__(self, points):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))

    def jet(self, x, order=2):
        x = np.atleast_2d(x)
        k = nearest_index(x, self.points)
        out = _zero_jet(len(x), order)
        for i, p in enumerate(self.points):
            mask = k == i
            if np.any(mask):
                out_i = distance_jet(x[mask], p, order)
                out.value[mask] = out_i.value
                if order:
                    out.grad[mask] = out_i.grad
                    out.hess[mask] = out_i.hess
        return out


class NearestRadialField(ScalarField):
    """g(d_L(x)) using the nearest point of L; meant for use near L."""

    def __init__(self, points, profile):
        self.dist = NearestDistance(points)
        self.profile = profile

    def jet(self, x, order=2):
        rj = self.dist.jet(x, order)
        g, dg, d2g = self.profile(rj.value)
        if order == 0:
            return Jet(g)
        return compose_radial(rj, g, dg, d2g)


class BlendField(ScalarField):
    """psi[a,b](rho) f1 + psi[b,a](rho) f0 for a scalar field rho.

    Each of f0, f1 is evaluated only where its weight is nonzero.
    """

    def __init__(self, a, b, rho, f0, f1):
        self.a = float(a)
        self.b = float(b)
        self.rho = rho
        self.f0 = f0
        self.f1 = f1

    def jet(self, x, order=2):
        x = np.atleast_2d(x)
        n = len(x)
        rj = self.rho.jet(x, order)
        out = _zero_jet(n, order)
        for f, (lo, hi) in ((self.f1, (self.a, self.b)), (self.f0, (self.b, self.a))):
            if order == 0:
                w = psi_cut(lo, hi, rj.value)
            else:
                w, dw, d2w = psi_cut(lo, hi, rj.value, order=2)
            mask = w > 0.0
            if f is None or not np.any(mask):
                continue
            fj = f.jet(x[mask], order)
            wm = w[mask]
            out.value[mask] += wm * fj.value
            if order:
                wj = compose_radial(rj.subset(mask), wm, dw[mask], d2w[mask])
                out.grad[mask] += wm[:, None] * fj.grad + fj.value[:, None] * wj.grad
                cross = wj.grad[:, :, None] * fj.grad[:, None, :]
                out.hess[mask] += (
                    wm[:, None, None] * fj.hess
                    + fj.value[:, None, None] * wj.hess
                    + cross
                    + np.swapaxes(cross, 1, 2)
                )
        return out


class FunctionField(ScalarField):
    """Wrap a callable ``f(x, order) -> Jet``."""

    def __init__(self, func):
        self.func = func

    def jet(self, x, order=2):
        return self.func(np.atleast_2d(x), order)
