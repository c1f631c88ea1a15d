"""Quadrature rules on the reference triangle and on edges.

The reference triangle has vertices (0, 0), (1, 0), (0, 1).  Points are
stored in barycentric form ``(l0, l1, l2)`` so that the Cartesian
reference point is ``(l1, l2)``.  Weights sum to the reference area 1/2.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

MAX_ORDER = 10


@dataclass(frozen=True)
class QuadratureRule:
    order: int
    points: np.ndarray   # (n, 3) barycentric
    weights: np.ndarray  # (n,)

    @property
    def xy(self) -> np.ndarray:
        """Cartesian coordinates on the reference triangle, shape (n, 2)."""
        return self.points[:, 1:]

    def __len__(self) -> int:
        return len(self.weights)


def _orbit(a, b, c):
    return sorted(set(permutations((a, b, c))))


# Symmetric Dunavant rules; weights normalised to sum 1.
_DUNAVANT = {
    1: [((1 / 3, 1 / 3, 1 / 3), 1.0)],
    2: [((2 / 3, 1 / 6, 1 / 6), 1 / 3)],
    4: [((0.108103018168070, 0.445948490915965, 0.445948490915965), 0.223381589678011),
        ((0.816847572980459, 0.091576213509771, 0.091576213509771), 0.109951743655322)],
    5: [((1 / 3, 1 / 3, 1 / 3), 0.225),
        ((0.059715871789770, 0.470142064105115, 0.470142064105115), 0.132394152788506),
        ((0.797426985353087, 0.101286507323456, 0.101286507323456), 0.125939180544827)],
    6: [((0.501426509658179, 0.249286745170910, 0.249286745170910), 0.116786275726379),
        ((0.873821971016996, 0.063089014491502, 0.063089014491502), 0.050844906370207),
        ((0.053145049844817, 0.310352451033784, 0.636502499121399), 0.082851075618374)],
}


def _dunavant(order):
    pts, wts = [], []
    for generator, w in _DUNAVANT[order]:
        orbit = _orbit(*generator)
        pts.extend(orbit)
        wts.extend([w] * len(orbit))
    pts = np.array(pts, dtype=float)
    pts /= pts.sum(axis=1, keepdims=True)
    return pts, 0.5 * np.array(wts) / np.sum(wts)


def _collapsed_product(order):
    # Gauss-Jacobi x Gauss-Legendre on the collapsed square, averaged over
    # the six vertex permutations to make the rule symmetric.
    n = order // 2 + 1
    tj, wj = roots_jacobi(n, 1.0, 0.0)
    tl, wl = roots_legendre(n)
    u = 0.5 * (1.0 + tj)
    v = 0.5 * (1.0 + tl)
    wu = wj / 4.0
    wv = wl / 2.0
    U, V = np.meshgrid(u, v, indexing="ij")
    x = U.ravel()
    y = (V * (1.0 - U)).ravel()
    w = np.outer(wu, wv).ravel()
    bary = np.stack([1.0 - x - y, x, y], axis=1)
    pts = np.concatenate([bary[:, list(p)] for p in permutations(range(3))])
    return pts, np.tile(w, 6) / 6.0


@lru_cache(maxsize=None)
def quadrature(order: int) -> QuadratureRule:
    """Symmetric rule on the reference triangle exact for total degree ``order``."""
    order = int(order)
    if not 1 <= order <= MAX_ORDER:
        raise ValueError(f"quadrature order {order} not supported (1..{MAX_ORDER})")
    if order == 3:
        # the degree-3 Dunavant rule has a negative weight; degree 4 is cheap
        pts, wts = _dunavant(4)
    elif order in _DUNAVANT:
        pts, wts = _dunavant(order)
    else:
        pts, wts = _collapsed_product(order)
    pts.setflags(write=False)
    wts.setflags(write=False)
    return QuadratureRule(order, pts, wts)


@lru_cache(maxsize=None)
def gauss_line(npoints: int):
    """Gauss-Legendre points and weights on [0, 1]."""
    t, w = roots_legendre(npoints)
    s = 0.5 * (t + 1.0)
    w = 0.5 * w
    s.setflags(write=False)
    w.setflags(write=False)
    return s, w
