"""The operator L = Delta + 2 on S^2: Green's function, real spherical harmonics
and the spectral solve of L w = f.

Real orthonormal harmonics are indexed by (l, mu) with |mu| <= l and stored
flat at position l^2 + l + mu.  With the normalized associated Legendre
functions Pbar (no Condon-Shortley phase),

    Y_l0       = Pbar_l0(cos theta)
    Y_l,+mu    = sqrt(2) Pbar_l,mu(cos theta) cos(mu phi)
    Y_l,-mu    = sqrt(2) Pbar_l,mu(cos theta) sin(mu phi)

so that the Y_lmu are orthonormal in L^2(S^2).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

from .foundation import Jet

DEFAULT_LMAX = 256
KERNEL_TOL = 1e-10


class KernelObstruction(ValueError):
    """Raised when a right-hand side has a component in ker L (degree one)."""

    def __init__(self, coefficients):
        self.coefficients = np.asarray(coefficients)
        super().__init__(
            "kernel obstruction: degree-one coefficients "
            + ", ".join(f"{c:.3e}" for c in self.coefficients)
            + f" exceed {KERNEL_TOL:g}"
        )


def index(l, mu):
    return l * l + l + mu


def degrees(lmax):
    """Degree l of every flat coefficient slot."""
    return np.concatenate([np.full(2 * l + 1, l) for l in range(lmax + 1)])


# ---------------------------------------------------------------------------
# Green's function of L with a unit logarithmic singularity


def green_eval(r, k=0):
    """k-th radial derivative of G(r) = cos r log(2 tan(r/2)) + 1 - cos r.

    G solves G'' + cot(r) G' + 2 G = 0 on (0, pi), G(r) = log r + O(r^2 log r)
    at 0, and G(pi/2) = 1.
    """
    r = np.asarray(r, dtype=float)
    if np.any((r <= 0.0) | (r >= np.pi)):
        raise ValueError("green_eval: r must lie in (0, pi)")
    c, s = np.cos(r), np.sin(r)
    ell = np.log(2.0 * np.tan(0.5 * r))
    if k == 0:
        return c * ell + 1.0 - c
    if k == 1:
        return -s * ell + c / s + s
    if k == 2:
        return -c * ell - 1.0 - 1.0 / s**2 + c
    raise ValueError("derivative order must be 0, 1 or 2")


def green_profile(r):
    """(G, G', G'') on an array of radii in (0, pi)."""
    return green_eval(r, 0), green_eval(r, 1), green_eval(r, 2)


def radial_L(g, dg, d2g, r):
    """L applied to a radial function: g'' + cot(r) g' + 2 g."""
    return d2g + dg / np.tan(r) + 2.0 * g


def catenoid_height(tau, r):
    """tau arccosh(r / tau) with its first two radial derivatives."""
    r = np.asarray(r, dtype=float)
    q = np.sqrt((r - tau) * (r + tau))
    return tau * np.arccosh(r / tau), tau / q, -tau * r / q**3


def catenoid_matching_gap(tau, alpha, r, k=0):
    """k-th derivative of phi_cat(r) - tau G(r) + tau log(tau/2) cos r.

    Evaluated on the window tau^alpha < r < 9 tau^alpha in a form free of the
    cancellation between the logarithms of the three terms.
    """
    r = np.asarray(r, dtype=float)
    lo, hi = tau**alpha, 9.0 * tau**alpha
    if np.any((r <= lo) | (r >= hi)):
        raise ValueError("catenoid_matching_gap: r outside (tau^alpha, 9 tau^alpha)")
    if k == 0:
        x = tau / r
        # arccosh(r/tau) = log(2r/tau) + log(1/2 + sqrt(1 - x^2)/2)
        head = np.log1p(-0.5 * x * x / (1.0 + np.sqrt(1.0 - x * x)))
        one_minus_cos = 2.0 * np.sin(0.5 * r) ** 2
        # log((2/r) tan(r/2)), small for small r
        lt = np.log(np.tan(0.5 * r) / (0.5 * r))
        return tau * (
            head - one_minus_cos * (1.0 + np.log(x / 2.0)) - np.cos(r) * lt
        )
    _, d1, d2 = catenoid_height(tau, r)
    g1 = green_eval(r, 1)
    g2 = green_eval(r, 2)
    lt = tau * np.log(tau / 2.0)
    if k == 1:
        return d1 - tau * g1 - lt * np.sin(r)
    if k == 2:
        return d2 - tau * g2 - lt * np.cos(r)
    raise ValueError("derivative order must be 0, 1 or 2")


# ---------------------------------------------------------------------------
# spherical harmonic transforms


@dataclass
class HarmonicSeries:
    """Real orthonormal spherical-harmonic coefficients up to degree lmax."""

    lmax: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != ((self.lmax + 1) ** 2,):
            raise ValueError(
                f"expected {(self.lmax + 1) ** 2} coefficients, got {self.coeffs.shape}"
            )

    @classmethod
    def zeros(cls, lmax):
        return cls(lmax, np.zeros((lmax + 1) ** 2))

    def get(self, l, mu):
        return self.coeffs[index(l, mu)]

    def cos_sin_tables(self):
        """Arrays a[l, mu] and b[l, mu] of cosine and sine coefficients."""
        n = self.lmax + 1
        a = np.zeros((n, n))
        b = np.zeros((n, n))
        for l in range(n):
            row = self.coeffs[l * l : l * l + 2 * l + 1]
            a[l, : l + 1] = row[l:]
            b[l, 1 : l + 1] = row[l - 1 :: -1][: l]
        return a, b

    def effective_lmax(self, rtol=1e-17):
        """Largest degree carrying a coefficient above rtol times the maximum."""
        mags = np.abs(self.coeffs)
        big = mags.max() if mags.size else 0.0
        if big == 0.0:
            return 0
        keep = np.nonzero(mags > rtol * big)[0]
        return int(np.floor(np.sqrt(keep[-1])))

    def laplacian(self):
        l = degrees(self.lmax)
        return HarmonicSeries(self.lmax, -l * (l + 1.0) * self.coeffs)

    def apply_L(self):
        l = degrees(self.lmax)
        return HarmonicSeries(self.lmax, (2.0 - l * (l + 1.0)) * self.coeffs)

    def jet(self, x, order=2, chunk=4096):
        """Evaluate the series (and derivatives) at points ``x`` of shape (N, 3)."""
        return evaluate(self, x, order=order, chunk=chunk)


@lru_cache(maxsize=8)
def gauss_grid(nlat, nlon):
    """Gauss-Legendre colatitudes (as cos theta) and weights, uniform longitudes."""
    x, w = roots_legendre(nlat)
    phi = 2.0 * np.pi * np.arange(nlon) / nlon
    return x[::-1].copy(), w[::-1].copy(), phi


def grid_points(nlat, nlon):
    """Cartesian grid points of shape (nlat, nlon, 3)."""
    x, _, phi = gauss_grid(nlat, nlon)
    s = np.sqrt(1.0 - x * x)
    return np.stack(
        [
            s[:, None] * np.cos(phi)[None, :],
            s[:, None] * np.sin(phi)[None, :],
            np.broadcast_to(x[:, None], (nlat, nlon)),
        ],
        axis=-1,
    )


def default_grid(lmax):
    return lmax + 1, 2 * lmax + 2


class _Diagonal:
    """Sequential generator of the sectoral values Pbar_mu,mu(x)."""

    def __init__(self, x):
        self.sin_t = np.sqrt(np.maximum(0.0, 1.0 - x * x))
        self.mu = 0
        self.value = np.full_like(x, 1.0 / np.sqrt(4.0 * np.pi))

    def advance_to(self, mu):
        while self.mu < mu:
            self.mu += 1
            k = self.mu
            self.value = np.sqrt((2.0 * k + 1.0) / (2.0 * k)) * self.sin_t * self.value
        return self.value


def legendre_column(lmax, mu, x, pmm):
    """Pbar_l,mu(x) for l = 0..lmax (zero for l < mu), shape (lmax + 1, len(x)).

    ``pmm`` is Pbar_mu,mu(x); higher degrees follow the three-term recurrence.
    """
    out = np.zeros((lmax + 1, len(x)))
    out[mu] = pmm
    if mu == lmax:
        return out
    p_prev = pmm
    p_cur = np.sqrt(2.0 * mu + 3.0) * x * pmm
    out[mu + 1] = p_cur
    for l in range(mu + 2, lmax + 1):
        a = np.sqrt((4.0 * l * l - 1.0) / (l * l - mu * mu))
        b = np.sqrt(((l - 1.0) ** 2 - mu * mu) / (4.0 * (l - 1.0) ** 2 - 1.0))
        p_prev, p_cur = p_cur, a * (x * p_cur - b * p_prev)
        out[l] = p_cur
    return out


def sht_forward(samples, lmax, nlat=None, nlon=None):
    """Project grid samples of shape (nlat, nlon) onto harmonics of degree <= lmax.

    The grid is the Gauss-Legendre x uniform grid of :func:`grid_points`.  The
    transform is exact for band-limited inputs of degree <= lmax.
    """
    samples = np.asarray(samples, dtype=float)
    if nlat is None:
        nlat, nlon = samples.shape
    if samples.shape != (nlat, nlon):
        raise ValueError("sample array does not match the grid")
    if nlat < lmax + 1 or nlon < 2 * lmax + 1:
        raise ValueError(
            f"grid {nlat}x{nlon} under-resolves lmax={lmax}: need at least "
            f"{lmax + 1}x{2 * lmax + 1}"
        )
    x, w, _ = gauss_grid(nlat, nlon)
    four = np.fft.rfft(samples, axis=1) * (2.0 * np.pi / nlon)
    ca = four.real[:, : lmax + 1]  # int f cos(mu phi) dphi on each ring
    sb = -four.imag[:, : lmax + 1]  # int f sin(mu phi) dphi on each ring
    coeffs = np.zeros((lmax + 1) ** 2)
    diag = _Diagonal(x)
    for mu in range(lmax + 1):
        p = legendre_column(lmax, mu, x, diag.advance_to(mu))[mu:] * w[None, :]
        ls = np.arange(mu, lmax + 1)
        if mu == 0:
            coeffs[index(ls, 0)] = p @ ca[:, 0]
        else:
            coeffs[index(ls, mu)] = np.sqrt(2.0) * (p @ ca[:, mu])
            coeffs[index(ls, -mu)] = np.sqrt(2.0) * (p @ sb[:, mu])
    return HarmonicSeries(lmax, coeffs)


def sht_inverse(series, nlat=None, nlon=None):
    """Synthesize the series on the Gauss-Legendre x uniform grid."""
    lmax = series.lmax
    if nlat is None:
        nlat, nlon = default_grid(lmax)
    if nlon < 2 * lmax + 1:
        raise ValueError("longitude grid under-resolves the series")
    x, _, _ = gauss_grid(nlat, nlon)
    a, b = series.cos_sin_tables()
    spec = np.zeros((nlat, nlon // 2 + 1), dtype=complex)
    diag = _Diagonal(x)
    for mu in range(lmax + 1):
        p = legendre_column(lmax, mu, x, diag.advance_to(mu))
        if mu == 0:
            spec[:, 0] = nlon * (a[:, 0] @ p)
        else:
            spec[:, mu] = 0.5 * nlon * np.sqrt(2.0) * (a[:, mu] @ p - 1j * (b[:, mu] @ p))
    return np.fft.irfft(spec, n=nlon, axis=1)


def evaluate(series, x, order=2, chunk=4096, rtol=1e-17):
    """Values (and tangent gradient/Hessian when order=2) of the series at x.

    Only orders mu carrying a coefficient above ``rtol`` times the largest one
    are summed, and degrees stop at the series' effective bandwidth.
    Derivatives lose accuracy like eps / sin^2(theta) next to the poles.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n = len(x)
    lmax = series.effective_lmax(rtol)
    a, b = series.cos_sin_tables()
    a = a[: lmax + 1, : lmax + 1]
    b = b[: lmax + 1, : lmax + 1]
    thresh = rtol * max(np.abs(series.coeffs).max(), 1e-300)
    live = (np.abs(a) > thresh).any(axis=0) | (np.abs(b) > thresh).any(axis=0)
    mus = np.nonzero(live)[0]
    value = np.zeros(n)
    grad = np.zeros((n, 3)) if order else None
    hess = np.zeros((n, 3, 3)) if order else None
    for start in range(0, n, chunk):
        sl = slice(start, min(n, start + chunk))
        out = _evaluate_chunk(lmax, a, b, mus, x[sl], order)
        value[sl] = out[0]
        if order:
            grad[sl] = out[1]
            hess[sl] = out[2]
    return Jet(value, grad, hess)


def _evaluate_chunk(lmax, a, b, mus, x, order):
    n = len(x)
    ct = np.clip(x[:, 2], -1.0, 1.0)
    st = np.hypot(x[:, 0], x[:, 1])
    phi = np.arctan2(x[:, 1], x[:, 0])
    f = np.zeros(n)
    f_t = np.zeros(n)
    f_tt = np.zeros(n)
    f_p = np.zeros(n)
    f_pp = np.zeros(n)
    f_tp = np.zeros(n)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_st = 1.0 / st
    ls = np.arange(lmax + 1, dtype=float)
    lam = ls * (ls + 1.0)
    diag = _Diagonal(ct)
    for mu in mus:
        p = legendre_column(lmax, mu, ct, diag.advance_to(mu))
        scale = 1.0 if mu == 0 else np.sqrt(2.0)
        coef = scale * np.stack([a[:, mu], b[:, mu]])  # (2, lmax+1)
        cm = np.cos(mu * phi)
        sm = np.sin(mu * phi)
        pab = coef @ p
        f += pab[0] * cm + pab[1] * sm
        if not order:
            continue
        # dPbar_l/dtheta = (l cos(t) Pbar_l - k_l Pbar_{l-1}) / sin(t)
        kl = np.zeros(lmax + 1)
        up = ls > mu
        kl[up] = np.sqrt((2.0 * ls[up] + 1.0) / (2.0 * ls[up] - 1.0) * (ls[up] ** 2 - mu * mu))
        s_l = (coef * ls) @ p
        s_k = (coef[:, 1:] * kl[1:]) @ p[:-1]
        s_lam = (coef * lam) @ p
        dab = (ct * s_l - s_k) * inv_st
        # Legendre equation: Pbar'' = -cot Pbar' - (l(l+1) - mu^2 / sin^2) Pbar
        d2ab = -ct * inv_st * dab - s_lam + mu * mu * inv_st**2 * pab
        f_t += dab[0] * cm + dab[1] * sm
        f_tt += d2ab[0] * cm + d2ab[1] * sm
        f_p += mu * (-pab[0] * sm + pab[1] * cm)
        f_pp += -mu * mu * (pab[0] * cm + pab[1] * sm)
        f_tp += mu * (-dab[0] * sm + dab[1] * cm)
    if not order:
        return (f,)
    cos_p = np.cos(phi)
    sin_p = np.sin(phi)
    e_t = np.stack([ct * cos_p, ct * sin_p, -st], axis=1)
    e_p = np.stack([-sin_p, cos_p, np.zeros(n)], axis=1)
    cot = ct * inv_st
    h_tp = inv_st * f_tp - cot * inv_st * f_p
    h_pp = inv_st**2 * f_pp + cot * f_t
    grad = f_t[:, None] * e_t + (inv_st * f_p)[:, None] * e_p

    def outer(u, v):
        return u[:, :, None] * v[:, None, :]

    hess = (
        f_tt[:, None, None] * outer(e_t, e_t)
        + h_tp[:, None, None] * (outer(e_t, e_p) + outer(e_p, e_t))
        + h_pp[:, None, None] * outer(e_p, e_p)
    )
    return f, grad, hess


def solve_L(f, tol_kernel=KERNEL_TOL):
    """Solve (Delta + 2) w = f coefficientwise; degree-one modes must vanish.

    The solution is chosen orthogonal to ker L (its degree-one part is zero).
    """
    deg_one = f.coeffs[1:4]
    if np.any(np.abs(deg_one) > tol_kernel):
        raise KernelObstruction(deg_one)
    l = degrees(f.lmax).astype(float)
    eig = 2.0 - l * (l + 1.0)
    w = np.zeros_like(f.coeffs)
    keep = l != 1
    w[keep] = f.coeffs[keep] / eig[keep]
    return HarmonicSeries(f.lmax, w)


def sample(func, lmax, nlat=None, nlon=None):
    """Sample a callable of (N, 3) points on the transform grid of ``lmax``."""
    if nlat is None:
        nlat, nlon = default_grid(lmax)
    pts = grid_points(nlat, nlon).reshape(-1, 3)
    return np.asarray(func(pts), dtype=float).reshape(nlat, nlon)


def project(func, lmax, nlat=None, nlon=None):
    """Harmonic coefficients of a callable, by sampling and forward transform."""
    if nlat is None:
        nlat, nlon = default_grid(lmax)
    return sht_forward(sample(func, lmax, nlat, nlon), lmax, nlat, nlon)
