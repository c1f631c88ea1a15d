"""Model problems for -eps Lap u + beta . grad u + c u = f on the unit square.

All fields take an array of points with trailing dimension 2 and return
arrays of matching leading shape (scalars) or with a trailing 2 (vectors).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .quadrature import quadrature

log = logging.getLogger(__name__)

Field = Callable[[np.ndarray], np.ndarray]


def constant(value: float) -> Field:
    return lambda p: np.full(np.shape(p)[:-1], float(value))


def constant_vector(vec) -> Field:
    vec = np.asarray(vec, dtype=float)
    return lambda p: np.broadcast_to(vec, np.shape(p)[:-1] + (2,)).copy()


@dataclass(frozen=True)
class ExactSolution:
    u: Field
    grad_u: Field
    laplace_u: Field
    eps: float

    def sigma(self, p):
        return -np.sqrt(self.eps) * self.grad_u(p)

    def div_sigma(self, p):
        return -np.sqrt(self.eps) * self.laplace_u(p)


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    eps: float
    beta: Field
    c: Field
    f: Field
    g: Field
    div_beta: Field
    exact: ExactSolution | None = None

    def alpha0(self, mesh, order: int = 6) -> float:
        """Infimum of c - div(beta)/2 over the quadrature points of ``mesh``."""
        from .mesh import map_points
        pts = map_points(mesh, quadrature(order).xy)
        return float(np.min(self.c(pts) - 0.5 * self.div_beta(pts)))

    def check_assumption(self, mesh) -> float:
        a0 = self.alpha0(mesh)
        if a0 <= 0:
            log.warning("%s: c - div(beta)/2 has infimum %.3g <= 0; "
                        "coercivity assumption not met", self.name, a0)
        return a0


def boundary_layer_problem(eps: float) -> ProblemSpec:
    """beta = (1, 1), c = 0, exponential layers at x = 1 and y = 1."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    h = 0.5 * np.pi
    e1 = np.exp(-1.0 / eps)
    kappa = 1.0 / (1.0 - e1)

    def parts(p):
        x, y = p[..., 0], p[..., 1]
        sx, sy = np.sin(h * x), np.sin(h * y)
        w = kappa * np.exp(-(1 - x) * (1 - y) / eps)
        return x, y, sx, sy, w

    def u(p):
        x, y, sx, sy, w = parts(p)
        return sx + sy * (1 - sx) + kappa * e1 - w

    def grad_u(p):
        x, y, sx, sy, w = parts(p)
        ux = h * np.cos(h * x) * (1 - sy) - w * (1 - y) / eps
        uy = h * np.cos(h * y) * (1 - sx) - w * (1 - x) / eps
        return np.stack([ux, uy], axis=-1)

    def laplace_u(p):
        x, y, sx, sy, w = parts(p)
        uxx = -h * h * sx * (1 - sy) - w * ((1 - y) / eps) ** 2
        uyy = -h * h * sy * (1 - sx) - w * ((1 - x) / eps) ** 2
        return uxx + uyy

    def f(p):
        g = grad_u(p)
        return -eps * laplace_u(p) + g[..., 0] + g[..., 1]

    exact = ExactSolution(u, grad_u, laplace_u, eps)
    return ProblemSpec("boundary-layer", eps, constant_vector([1.0, 1.0]), constant(0.0),
                       f, u, constant(0.0), exact)


def interior_layer_problem(eps: float, tol: float = 1e-12) -> ProblemSpec:
    """beta = (1/2, sqrt(3)/2), c = f = 0, discontinuous inflow data at (0, 0.2)."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")

    def g(p):
        x, y = p[..., 0], p[..., 1]
        bottom = np.abs(y) <= tol
        left = (np.abs(x) <= tol) & (y <= 0.2 + tol)
        return np.where(bottom | left, 1.0, 0.0)

    return ProblemSpec("interior-layer", eps, constant_vector([0.5, np.sqrt(3) / 2]),
                       constant(0.0), constant(0.0), g, constant(0.0))


def manufactured_problem(eps: float = 1.0) -> ProblemSpec:
    """u = xy with beta = (1, 1), c = 1; polynomial data for exactness tests."""
    def u(p):
        return p[..., 0] * p[..., 1]

    def grad_u(p):
        return np.stack([p[..., 1], p[..., 0]], axis=-1)

    def laplace_u(p):
        return np.zeros(np.shape(p)[:-1])

    def f(p):
        x, y = p[..., 0], p[..., 1]
        return x + y + x * y

    exact = ExactSolution(u, grad_u, laplace_u, eps)
    return ProblemSpec("manufactured", eps, constant_vector([1.0, 1.0]), constant(1.0),
                       f, u, constant(0.0), exact)


PROBLEMS = {
    "boundary-layer": boundary_layer_problem,
    "interior-layer": interior_layer_problem,
    "manufactured": manufactured_problem,
}


def get_problem(name: str, eps: float) -> ProblemSpec:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    return factory(eps)
