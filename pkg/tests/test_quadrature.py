import numpy as np
from numpy.testing import assert_allclose

from canham.quadrature import QuadratureSpec, fsum, gauss_legendre


def test_gauss_legendre_exact_for_polynomials():
    x, w = gauss_legendre(8, -0.5, 2.0)
    for k in range(16):
        exact = (2.0 ** (k + 1) - (-0.5) ** (k + 1)) / (k + 1)
        assert_allclose(np.sum(w * x**k), exact, rtol=1e-13)


def test_fsum_is_exactly_rounded():
    values = np.array([1e16, 1.0, -1e16, 1.0])
    assert fsum(values) == 2.0


def test_doubled_spec():
    q = QuadratureSpec()
    d = q.doubled()
    assert d.n_s == 2 * q.n_s
    assert d.n_theta == 2 * q.n_theta
