"""Least-squares error indicators, true-error norms and effectivity index."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assembly import CHUNK, Formulation, default_order
from .mesh import EdgeTag, ElementClassification, Mesh, map_points
from .problems import ProblemSpec
from .quadrature import gauss_line, quadrature
from .spaces import FeSpace, evaluate, interpolant_on_edges, lagrange_on_edges

ERROR_ORDER = 10


@dataclass(frozen=True, eq=False)
class Solution:
    sigma_space: FeSpace
    u_space: FeSpace
    sigma: np.ndarray
    u: np.ndarray

    @property
    def mesh(self) -> Mesh:
        return self.u_space.mesh

    @property
    def n_dofs(self) -> int:
        return self.sigma_space.n_dofs + self.u_space.n_dofs

    def vertex_values(self) -> np.ndarray:
        return self.u[:self.mesh.n_vertices]

    def sigma_cell_average(self, order: int = 4) -> np.ndarray:
        """Cell average of |sigma_h|."""
        rule = quadrature(order)
        vals, _ = evaluate(self.sigma_space, self.sigma, rule)
        return np.linalg.norm(vals, axis=-1) @ rule.weights / rule.weights.sum()


@dataclass(frozen=True)
class Indicators:
    eta_K: np.ndarray
    eta: float

    def __len__(self):
        return len(self.eta_K)


def _outflow_edges(mesh):
    if mesh.edge_tags is None:
        return np.zeros(0, dtype=np.int64)
    return mesh.edges_with_tag(EdgeTag.OUTFLOW)


def outflow_term(form: Formulation, solution: Solution, eps: float, g=None, exact_u=None,
                 npoints: int | None = None) -> np.ndarray:
    """Per-element ``w_i sum_e h_e^{-1} ||v||_e^2`` over the element's outflow edges.

    ``v`` is ``u_h - g_h`` (``g_h`` the nodal interpolant of ``g``) or, if
    ``exact_u`` is given, ``exact_u - u_h``.
    """
    mesh = solution.mesh
    out = np.zeros(mesh.n_triangles)
    weight = form.outflow_weight(eps)
    edges = _outflow_edges(mesh)
    if weight == 0.0 or len(edges) == 0:
        return out
    U = solution.u_space
    s, w = gauss_line(npoints or U.degree + 4)
    vals, tris, pts = lagrange_on_edges(U, edges, s)
    v = np.einsum("ens,en->es", vals, solution.u[U.elem_dofs[tris]])
    if exact_u is not None:
        v = exact_u(pts) - v
    elif g is not None:
        v = v - interpolant_on_edges(U, vals, tris, g)
    np.add.at(out, tris, weight * (v ** 2) @ w)
    return out


def local_indicators(form: Formulation, solution: Solution, problem: ProblemSpec,
                     quad_order: int | None = None) -> Indicators:
    """eta_K = G_{i,K}(sigma_h, u_h; f)^{1/2}."""
    mesh = solution.mesh
    rule = quadrature(quad_order or default_order(solution.u_space))
    sq = np.sqrt(problem.eps)
    eta2 = np.empty(mesh.n_triangles)
    for start in range(0, mesh.n_triangles, CHUNK):
        els = np.arange(start, min(start + CHUNK, mesh.n_triangles))
        s, ds = evaluate(solution.sigma_space, solution.sigma, rule, els)
        u, gu = evaluate(solution.u_space, solution.u, rule, els)
        pts = map_points(mesh, rule.xy, els)
        W = rule.weights[None, :] * mesh.dets[els][:, None]
        r1 = s + sq * gu
        r2 = (sq * ds + np.einsum("tqd,tqd->tq", problem.beta(pts), gu)
              + problem.c(pts) * u - problem.f(pts))
        eta2[els] = np.sum(W * (np.sum(r1 ** 2, axis=-1) + r2 ** 2), axis=1)
    eta2 += outflow_term(form, solution, problem.eps, g=problem.g)
    return Indicators(np.sqrt(eta2), float(np.sqrt(eta2.sum())))


@dataclass(frozen=True)
class ErrorReport:
    """Squared error components and derived norms for E = sigma - sigma_h, e = u - u_h."""
    sigma_l2: float          # ||E||^2
    u_l2: float              # ||e||^2
    grad: float              # eps ||grad e||^2
    outflow: float           # weighted outflow penalty of e
    streamline: float        # sum delta_K ||beta . grad e||_K^2
    div: float               # eps ||div E||^2 (not part of the triple norm)
    element_M: np.ndarray
    element_streamline: np.ndarray
    element_div: np.ndarray
    element_convective: np.ndarray   # ||beta . grad e||_K^2, unweighted
    eta: float
    quad_order: int

    @property
    def M(self) -> float:
        return self.sigma_l2 + self.u_l2 + self.grad + self.outflow

    @property
    def triple_norm(self) -> float:
        return float(np.sqrt(self.M + self.streamline))

    @property
    def eff_index(self) -> float:
        t = self.triple_norm
        if not t > 1e-14:
            return float("nan")
        return self.eta / t


def error_norms(form: Formulation, solution: Solution, problem: ProblemSpec,
                classification: ElementClassification, eta: float = float("nan"),
                quad_order: int = ERROR_ORDER) -> ErrorReport:
    exact = problem.exact
    if exact is None:
        raise ValueError(f"problem {problem.name!r} has no exact solution")
    mesh = solution.mesh
    rule = quadrature(quad_order)
    eps = problem.eps
    T = mesh.n_triangles
    parts = {k: np.empty(T) for k in ("E", "e", "grad", "conv", "div")}
    for start in range(0, T, CHUNK):
        els = np.arange(start, min(start + CHUNK, T))
        s, ds = evaluate(solution.sigma_space, solution.sigma, rule, els)
        u, gu = evaluate(solution.u_space, solution.u, rule, els)
        pts = map_points(mesh, rule.xy, els)
        W = rule.weights[None, :] * mesh.dets[els][:, None]
        E = exact.sigma(pts) - s
        dE = exact.div_sigma(pts) - ds
        e = exact.u(pts) - u
        ge = exact.grad_u(pts) - gu
        be = np.einsum("tqd,tqd->tq", problem.beta(pts), ge)
        parts["E"][els] = np.sum(W * np.sum(E ** 2, axis=-1), axis=1)
        parts["e"][els] = np.sum(W * e ** 2, axis=1)
        parts["grad"][els] = eps * np.sum(W * np.sum(ge ** 2, axis=-1), axis=1)
        parts["conv"][els] = np.sum(W * be ** 2, axis=1)
        parts["div"][els] = eps * np.sum(W * dE ** 2, axis=1)
    out = outflow_term(form, solution, eps, exact_u=exact.u, npoints=10)
    stream = classification.delta * parts["conv"]
    element_M = parts["E"] + parts["e"] + parts["grad"] + out
    return ErrorReport(
        float(parts["E"].sum()), float(parts["e"].sum()), float(parts["grad"].sum()),
        float(out.sum()), float(stream.sum()), float(parts["div"].sum()),
        element_M, stream, parts["div"], parts["conv"], float(eta), quad_order)
