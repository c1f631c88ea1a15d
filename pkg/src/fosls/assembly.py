"""Least-squares systems for the three outflow treatments.

For a pair ``(tau, v)`` in ``RT_k x P_m`` the discrete functional is

    G_i(tau, v; f) = ||tau + sqrt(eps) grad v||^2
                   + ||sqrt(eps) div tau + beta . grad v + c v - f||^2
                   + w_i * sum_{e on outflow} h_e^{-1} ||v - g||_e^2

with ``w_1 = 0`` (outflow data imposed strongly), ``w_2 = 1/eps`` and
``w_3 = 1``.  For the model problems ``g`` vanishes on the outflow boundary
and the last term reduces to ``h_e^{-1} ||v||_e^2``.  Minimisation gives the
SPD system assembled here.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import EdgeTag, Mesh
from .problems import ProblemSpec
from .quadrature import gauss_line, quadrature
from .spaces import FeSpace, build_lagrange_space, build_rt_space, interpolant_on_edges, \
    lagrange_on_edges, tabulate

log = logging.getLogger(__name__)

CHUNK = 20000
CONSTANT_ORDER = 10


@dataclass(frozen=True)
class Formulation:
    index: int

    def __post_init__(self):
        if self.index not in (1, 2, 3):
            raise ValueError(f"formulation index must be 1, 2 or 3, got {self.index}")

    @property
    def essential_region(self) -> str:
        return "boundary" if self.index == 1 else "inflow"

    @property
    def outflow_weight_exponent(self) -> int | None:
        """Power of eps multiplying the h_e^{-1} outflow term (None: no term)."""
        return {1: None, 2: -1, 3: 0}[self.index]

    def outflow_weight(self, eps: float) -> float:
        p = self.outflow_weight_exponent
        return 0.0 if p is None else float(eps) ** p


def build_spaces(mesh: Mesh, form: Formulation, problem: ProblemSpec,
                 rt_index: int = 0, degree: int = 1):
    """RT_k x P_m pair with the formulation's essential constraints on u."""
    sigma_space = build_rt_space(mesh, rt_index)
    u_space = build_lagrange_space(mesh, degree, form.essential_region, problem.g)
    return sigma_space, u_space


def default_order(u_space: FeSpace) -> int:
    return 2 * (u_space.degree + 1) + 2


@dataclass(frozen=True, eq=False)
class LsSystem:
    """Reduced SPD system on the free dofs plus what is needed to undo the reduction.

    The functional of the full coefficient vector ``expand(x)`` equals
    ``x A x - 2 b x + constant``.
    """
    matrix: sp.csr_matrix
    rhs: np.ndarray
    constant: float
    free: np.ndarray
    fixed: np.ndarray          # full-length vector carrying the constrained values
    n_sigma: int
    n_u: int
    full_matrix: sp.csr_matrix
    full_rhs: np.ndarray
    f_norm2: float

    @property
    def n_free(self) -> int:
        return len(self.free)

    def expand(self, x: np.ndarray) -> np.ndarray:
        full = self.fixed.copy()
        full[self.free] = x
        return full

    def split(self, full: np.ndarray):
        return full[:self.n_sigma], full[self.n_sigma:]

    def functional(self, x: np.ndarray) -> float:
        return float(x @ (self.matrix @ x) - 2.0 * self.rhs @ x + self.constant)


def _chunks(n, size=CHUNK):
    for start in range(0, n, size):
        yield np.arange(start, min(start + size, n))


def _local_operators(sigma_space, u_space, problem, rule, els, sqeps):
    ts = tabulate(sigma_space, rule, els)
    tu = tabulate(u_space, rule, els)
    pts = ts.points
    B = problem.beta(pts)
    C = problem.c(pts)
    S, D = ts.values, ts.div
    V, G = tu.values, tu.grads
    # first equation: tau + sqrt(eps) grad v ; second: sqrt(eps) div tau + beta.grad v + c v
    R1 = np.concatenate([S, sqeps * G], axis=1)
    R2 = np.concatenate([sqeps * D, np.einsum("tnqd,tqd->tnq", G, B) + C[:, None, :] * V], axis=1)
    return R1, R2, ts.weights, pts


def _gram(R, W):
    """sum_q W R_a R_b over the trailing axes, batched over elements."""
    t, n = R.shape[:2]
    Rw = R * (W.reshape(W.shape + (1,) * (R.ndim - 3)))[:, None]
    return np.matmul(Rw.reshape(t, n, -1), R.reshape(t, n, -1).transpose(0, 2, 1))


def element_dofs(sigma_space: FeSpace, u_space: FeSpace) -> np.ndarray:
    return np.hstack([sigma_space.elem_dofs, sigma_space.n_dofs + u_space.elem_dofs])


def outflow_edge_matrices(form, u_space, eps, g=None):
    """Local outflow penalty matrices, loads and constants for ``w_i h_e^{-1} ||v - g_h||_e^2``.

    ``g_h`` is the nodal interpolant of ``g`` in the Lagrange space, the same
    discrete data the constrained dofs carry.

    Returns (Ae, dofs, be, ce) with ``dofs`` the global u-dof rows of each
    edge's owning element, or four Nones when there is no penalty.
    """
    mesh = u_space.mesh
    weight = form.outflow_weight(eps)
    edges = mesh.edges_with_tag(EdgeTag.OUTFLOW) if weight else np.zeros(0, dtype=np.int64)
    if len(edges) == 0:
        return None, None, None, None
    s, w = gauss_line(u_space.degree + 4)
    vals, tris, _ = lagrange_on_edges(u_space, edges, s)
    # h_e^{-1} ||v||_e^2 = int_0^1 v^2 ds in the edge parameter
    Ae = weight * np.einsum("eas,ebs,s->eab", vals, vals, w)
    gv = np.zeros(vals[:, 0].shape) if g is None else interpolant_on_edges(u_space, vals, tris, g)
    be = weight * np.einsum("eas,es,s->ea", vals, gv, w)
    ce = weight * (gv ** 2) @ w
    return Ae, u_space.elem_dofs[tris], be, ce


def assemble(form: Formulation, mesh: Mesh, sigma_space: FeSpace, u_space: FeSpace,
             problem: ProblemSpec, quad_order: int | None = None, norm: bool = False,
             check_assumption: bool = True) -> LsSystem:
    """Assemble the least-squares system (``norm=False``) or the M_i norm matrix.

    With ``norm=True`` the matrix represents
    ``||tau||^2 + ||v||^2 + eps ||grad v||^2 + outflow term`` and the load is zero.
    """
    if np.any(mesh.dets <= 0):
        raise ValueError("mesh contains degenerate or inverted elements")
    eps = problem.eps
    sqeps = np.sqrt(eps)
    rule = quadrature(quad_order or default_order(u_space))
    ns, nu = sigma_space.n_dofs, u_space.n_dofs
    N = ns + nu
    gdofs = element_dofs(sigma_space, u_space)
    n_loc = gdofs.shape[1]
    n_sig_loc = sigma_space.n_local

    if check_assumption and not norm:
        problem.check_assumption(mesh)

    data, rows, cols = [], [], []
    b = np.zeros(N)
    for els in _chunks(mesh.n_triangles):
        R1, R2, W, pts = _local_operators(sigma_space, u_space, problem, rule, els, sqeps)
        if norm:
            t, nq = W.shape
            Q1 = R1.copy()
            Q1[:, n_sig_loc:] = 0.0                         # tau only
            Q2 = np.zeros((len(els), n_loc, nq))
            tu = tabulate(u_space, rule, els)
            Q2[:, n_sig_loc:] = tu.values
            Q3 = R1 - Q1                                    # sqrt(eps) grad v only
            Ak = _gram(Q1, W) + _gram(Q2, W) + _gram(Q3, W)
        else:
            Ak = _gram(R1, W) + _gram(R2, W)
            F = problem.f(pts)
            np.add.at(b, gdofs[els], np.einsum("taq,tq->ta", R2, W * F))
        d = gdofs[els]
        rows.append(np.repeat(d, n_loc, axis=1).ravel())
        cols.append(np.tile(d, (1, n_loc)).ravel())
        data.append(Ak.ravel())

    Ae, edofs, be, ce = outflow_edge_matrices(form, u_space, eps, problem.g)
    g2 = 0.0
    if Ae is not None:
        d = ns + edofs
        m = d.shape[1]
        rows.append(np.repeat(d, m, axis=1).ravel())
        cols.append(np.tile(d, (1, m)).ravel())
        data.append(Ae.ravel())
        if not norm:
            np.add.at(b, d, be)
            g2 = float(ce.sum())

    A = sp.coo_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(N, N)).tocsr()
    A.sum_duplicates()
    A = ((A + A.T) * 0.5).tocsr()      # bit-exact symmetry

    f2 = 0.0 if norm else f_norm2(mesh, problem) + g2
    return _reduce(A, b, f2, sigma_space, u_space)


def f_norm2(mesh: Mesh, problem: ProblemSpec, order: int = CONSTANT_ORDER) -> float:
    rule = quadrature(order)
    total = 0.0
    from .mesh import map_points
    for els in _chunks(mesh.n_triangles):
        pts = map_points(mesh, rule.xy, els)
        W = rule.weights[None, :] * mesh.dets[els][:, None]
        total += float(np.sum(W * problem.f(pts) ** 2))
    return total


def _reduce(A, b, f2, sigma_space, u_space):
    ns, nu = sigma_space.n_dofs, u_space.n_dofs
    N = ns + nu
    con = ns + u_space.constrained
    fixed = np.zeros(N)
    fixed[con] = u_space.constrained_values
    mask = np.ones(N, dtype=bool)
    mask[con] = False
    free = np.flatnonzero(mask)
    g = fixed[con]
    A_ff = A[free][:, free].tocsr()
    A_fc = A[free][:, con]
    A_cc = A[con][:, con]
    rhs = b[free] - A_fc @ g
    const = f2 + float(g @ (A_cc @ g)) - 2.0 * float(b[con] @ g)
    return LsSystem(A_ff, rhs, const, free, fixed, ns, nu, A, b, f2)
