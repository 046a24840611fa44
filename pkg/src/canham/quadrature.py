"""Gauss-Legendre rules, exactly rounded summation and node-count settings."""

import math
from dataclasses import dataclass, fields
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre


@lru_cache(maxsize=64)
def _unit_rule(n):
    x, w = roots_legendre(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n, a, b):
    """n-point Gauss-Legendre nodes and weights on [a, b]."""
    x, w = _unit_rule(int(n))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def fsum(values):
    """Exactly rounded sum of an array (compensated accumulation)."""
    return math.fsum(np.ravel(values).tolist())


@dataclass(frozen=True)
class QuadratureSpec:
    """Node counts for the bridge and graph quadratures.

    Bridges use ``n_s`` Gauss points in s and ``n_theta`` uniform angles.
    Graph sheets use ``n_gap`` Gauss points on the outer thirds of the gluing
    annulus and ``n_mid`` on the middle third (where the cutoff switches),
    ``n_log`` Gauss points in log r out to the configuration radius,
    ``n_far`` radial Gauss points beyond it, ``n_ang`` uniform angles near the
    singular points and ``n_far_ang`` Gauss angles on each half of the far
    region.
    """

    n_s: int = 64
    n_theta: int = 32
    n_gap: int = 16
    n_mid: int = 64
    n_log: int = 40
    n_far: int = 48
    n_ang: int = 48
    n_far_ang: int = 32

    def doubled(self):
        return QuadratureSpec(**{f.name: 2 * getattr(self, f.name) for f in fields(self)})
