"""Lagrange and Raviart-Thomas finite element spaces on a :class:`Mesh`.

Lagrange values are pulled back affinely; Raviart-Thomas values use the
contravariant Piola map ``phi = J phi_ref / det J`` with
``div phi = div_ref phi_ref / det J``.

RT degrees of freedom on an edge are the normal-flux moments against the
Legendre polynomials ``1`` and ``2s - 1`` (``s`` running from the lower to
the higher global vertex id), with the global normal equal to that
tangent rotated clockwise.  Reversing an edge flips the normal *and* the
parameter, so only the zeroth moment changes sign between neighbours.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .mesh import EdgeTag, Mesh, map_points
from .quadrature import QuadratureRule, gauss_line, quadrature

# reference vertices and local edges (edge j runs v_{j+1} -> v_{j+2})
REF_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class FeSpace:
    """Degree-of-freedom map of a Lagrange or RT space.

    ``elem_dofs[t]`` lists the global dofs of triangle ``t`` in local basis
    order and ``signs[t]`` the orientation factor applied to each local
    basis function.  ``constrained`` / ``constrained_values`` hold essential
    boundary data (Lagrange only).
    """

    kind: str           # "lagrange" or "rt"
    degree: int
    mesh: Mesh
    elem_dofs: np.ndarray
    signs: np.ndarray
    n_dofs: int
    constrained: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    constrained_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    support_points: np.ndarray | None = None

    @property
    def n_local(self) -> int:
        return self.elem_dofs.shape[1]

    @property
    def free(self) -> np.ndarray:
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.constrained] = False
        return np.flatnonzero(mask)


# --------------------------------------------------------------------------
# reference bases

def lagrange_ref(degree: int, xy: np.ndarray):
    """Values (n_local, nq) and gradients (n_local, nq, 2) on the reference triangle."""
    x, y = xy[:, 0], xy[:, 1]
    l = np.stack([1.0 - x - y, x, y])
    dl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    nq = len(x)
    if degree == 1:
        return l, np.broadcast_to(dl[:, None, :], (3, nq, 2)).copy()
    if degree == 2:
        vals, grads = [], []
        for i in range(3):
            vals.append(l[i] * (2 * l[i] - 1))
            grads.append((4 * l[i] - 1)[:, None] * dl[i])
        for j in range(3):
            a, b = (j + 1) % 3, (j + 2) % 3
            vals.append(4 * l[a] * l[b])
            grads.append(4 * (l[b][:, None] * dl[a] + l[a][:, None] * dl[b]))
        return np.array(vals), np.array(grads)
    raise ValueError(f"Lagrange degree {degree} not supported (1 or 2)")


def _rt_monomials(k, xy):
    x, y = xy[:, 0], xy[:, 1]
    one, zero = np.ones_like(x), np.zeros_like(x)
    if k == 0:
        vals = [(one, zero), (zero, one), (x, y)]
        div = [zero, zero, 2 * one]
    elif k == 1:
        vals = [(one, zero), (x, zero), (y, zero), (zero, one), (zero, x), (zero, y),
                (x * x, x * y), (x * y, y * y)]
        div = [zero, one, zero, zero, zero, one, 3 * x, 3 * y]
    else:
        raise ValueError(f"RT index {k} not supported (0 or 1)")
    return np.array([np.stack(v, axis=-1) for v in vals]), np.array(div)


@lru_cache(maxsize=None)
def _rt_coefficients(k):
    n_mono = 3 if k == 0 else 8
    s, w = gauss_line(4)
    rows = []
    for j in range(3):
        a, b = REF_VERTICES[(j + 1) % 3], REF_VERTICES[(j + 2) % 3]
        t = b - a
        length = np.linalg.norm(t)
        n = np.array([t[1], -t[0]]) / length
        pts = a + s[:, None] * t
        vals, _ = _rt_monomials(k, pts)
        flux = vals @ n                                    # (n_mono, ns)
        for m in range(k + 1):
            q = np.ones_like(s) if m == 0 else 2 * s - 1
            rows.append(flux @ (w * q * length))
    if k == 1:
        rule = quadrature(4)
        vals, _ = _rt_monomials(k, rule.xy)
        for d in range(2):
            rows.append(vals[:, :, d] @ rule.weights)
    V = np.array(rows)
    assert V.shape == (n_mono, n_mono)
    return np.linalg.inv(V)                               # column i -> basis i


def rt_ref(k: int, xy: np.ndarray):
    """Values (n_local, nq, 2) and divergences (n_local, nq) on the reference triangle."""
    C = _rt_coefficients(k)
    vals, div = _rt_monomials(k, xy)
    return np.einsum("mi,mqd->iqd", C, vals), np.einsum("mi,mq->iq", C, div)


# --------------------------------------------------------------------------
# spaces

def build_lagrange_space(mesh: Mesh, degree: int = 1, essential: str | None = "boundary",
                         g=None) -> FeSpace:
    """Continuous P_degree space.

    ``essential`` is ``"boundary"`` (whole boundary), ``"inflow"`` (closure of
    the inflow boundary, needs a classified mesh) or None.  Constrained dofs
    take the values ``g(points)`` (zero if ``g`` is None).
    """
    nv = mesh.n_vertices
    if degree == 1:
        elem_dofs = mesh.triangles.copy()
        support = mesh.vertices
        n_dofs = nv
    elif degree == 2:
        elem_dofs = np.hstack([mesh.triangles, nv + mesh.tri_edges])
        support = np.vstack([mesh.vertices, mesh.edge_midpoints])
        n_dofs = nv + mesh.n_edges
    else:
        raise ValueError(f"Lagrange degree {degree} not supported (1 or 2)")

    if essential is None:
        edges = np.zeros(0, dtype=np.int64)
    elif essential == "boundary":
        edges = mesh.boundary_edges
    elif essential == "inflow":
        edges = mesh.edges_with_tag(EdgeTag.INFLOW)
    else:
        raise ValueError(f"unknown essential region {essential!r}")
    con = [mesh.edges[edges].ravel()]
    if degree == 2:
        con.append(nv + edges)
    con = np.unique(np.concatenate(con)).astype(np.int64)
    vals = np.zeros(len(con)) if g is None else np.asarray(g(support[con]), dtype=float)
    return FeSpace("lagrange", degree, mesh, elem_dofs,
                   np.ones(elem_dofs.shape), n_dofs, con, vals, support)


def build_rt_space(mesh: Mesh, k: int = 0) -> FeSpace:
    """H(div)-conforming Raviart-Thomas space of index k (0 or 1)."""
    te = mesh.tri_edges
    tris = mesh.triangles
    start = tris[:, [1, 2, 0]]
    end = tris[:, [2, 0, 1]]
    s = np.where(start < end, 1.0, -1.0)
    if k == 0:
        return FeSpace("rt", 0, mesh, te.copy(), s, mesh.n_edges)
    if k == 1:
        ne = mesh.n_edges
        T = mesh.n_triangles
        edge_dofs = np.stack([2 * te, 2 * te + 1], axis=2).reshape(T, 6)
        inner = 2 * ne + 2 * np.arange(T)[:, None] + np.arange(2)
        elem_dofs = np.hstack([edge_dofs, inner])
        signs = np.hstack([np.stack([s, np.ones_like(s)], axis=2).reshape(T, 6),
                           np.ones((T, 2))])
        return FeSpace("rt", 1, mesh, elem_dofs, signs, 2 * ne + 2 * T)
    raise ValueError(f"RT index {k} not supported (0 or 1)")


@dataclass(frozen=True)
class Tabulation:
    """Physical basis data at quadrature points for a set of elements.

    Lagrange: ``values`` (T, n, nq), ``grads`` (T, n, nq, 2).
    RT: ``values`` (T, n, nq, 2), ``div`` (T, n, nq).
    ``weights`` (T, nq) are physical quadrature weights, ``points`` (T, nq, 2).
    """
    values: np.ndarray
    grads: np.ndarray | None
    div: np.ndarray | None
    weights: np.ndarray
    points: np.ndarray


def _ref_tabulate(space, xy):
    if space.kind == "lagrange":
        return lagrange_ref(space.degree, xy)
    return rt_ref(space.degree, xy)


def tabulate_at(space: FeSpace, xy: np.ndarray, elements=None) -> tuple:
    """Basis data at reference points ``xy`` mapped onto ``elements``.

    Returns (values, grads_or_div) with the shapes of :class:`Tabulation`.
    """
    mesh = space.mesh
    if elements is None:
        elements = np.arange(mesh.n_triangles)
    elements = np.atleast_1d(elements)
    det = mesh.dets[elements]
    if np.any(np.abs(det) <= 1e-14 * mesh.diameters[elements] ** 2):
        raise ValueError("degenerate element (zero area)")
    J = mesh.jacobians[elements]
    sg = space.signs[elements]
    if space.kind == "lagrange":
        v, g = _ref_tabulate(space, xy)
        Jinv_T = np.linalg.inv(J).transpose(0, 2, 1)
        grads = np.einsum("tij,nqj->tnqi", Jinv_T, g)
        vals = np.broadcast_to(v, (len(elements),) + v.shape)
        return vals, grads
    v, d = _ref_tabulate(space, xy)
    vals = np.einsum("tij,nqj->tnqi", J, v) / det[:, None, None, None]
    vals = vals * sg[:, :, None, None]
    div = d[None] / det[:, None, None] * sg[:, :, None]
    return vals, div


def tabulate(space: FeSpace, rule: QuadratureRule, elements=None) -> Tabulation:
    mesh = space.mesh
    if elements is None:
        elements = np.arange(mesh.n_triangles)
    elements = np.atleast_1d(elements)
    vals, extra = tabulate_at(space, rule.xy, elements)
    weights = rule.weights[None, :] * mesh.dets[elements][:, None]
    points = map_points(mesh, rule.xy, elements)
    if space.kind == "lagrange":
        return Tabulation(vals, extra, None, weights, points)
    return Tabulation(vals, None, extra, weights, points)


def edge_reference_points(local_edge: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Reference coordinates (n_edges, ns, 2) of parameter ``s`` on local edges."""
    a = REF_VERTICES[(local_edge + 1) % 3]
    b = REF_VERTICES[(local_edge + 2) % 3]
    return a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]


def lagrange_on_edges(space: FeSpace, edge_ids, s: np.ndarray):
    """Lagrange basis values (n_edges, n_local, ns) on boundary edges.

    Returns (values, elements, points); ``points`` (n_edges, ns, 2) are the
    physical positions of the parameter values along the owning element's
    local edge direction, matching ``values``.
    """
    mesh = space.mesh
    edge_ids = np.asarray(edge_ids)
    j = mesh.edge_local_index(edge_ids)
    tris = mesh.edge_tris[edge_ids, 0]
    vals = np.empty((len(edge_ids), space.n_local, len(s)))
    for loc in range(3):
        sel = j == loc
        if sel.any():
            xy = edge_reference_points(np.array([loc]), s)[0]
            v, _ = lagrange_ref(space.degree, xy)
            vals[sel] = v
    corners = mesh.vertices[mesh.triangles[tris]]
    rows = np.arange(len(edge_ids))
    a = corners[rows, (j + 1) % 3]
    b = corners[rows, (j + 2) % 3]
    points = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
    return vals, tris, points


def interpolant_on_edges(space: FeSpace, vals: np.ndarray, tris: np.ndarray, g) -> np.ndarray:
    """Nodal interpolant of ``g`` at the edge points of :func:`lagrange_on_edges`."""
    nodes = space.support_points[space.elem_dofs[tris]]
    return np.einsum("eas,ea->es", vals, np.asarray(g(nodes), dtype=float))


def evaluate(space: FeSpace, coef: np.ndarray, rule: QuadratureRule, elements=None):
    """Evaluate a global coefficient vector at quadrature points.

    Lagrange: returns (values (T, nq), grads (T, nq, 2)).
    RT: returns (values (T, nq, 2), div (T, nq)).
    """
    tab = tabulate(space, rule, elements)
    idx = space.elem_dofs if elements is None else space.elem_dofs[np.atleast_1d(elements)]
    c = coef[idx]
    if space.kind == "lagrange":
        return (np.einsum("tnq,tn->tq", tab.values, c),
                np.einsum("tnqd,tn->tqd", tab.grads, c))
    return (np.einsum("tnqd,tn->tqd", tab.values, c),
            np.einsum("tnq,tn->tq", tab.div, c))


def interpolate_lagrange(space: FeSpace, func) -> np.ndarray:
    """Nodal interpolant of a scalar field ``func(points)``."""
    return np.asarray(func(space.support_points), dtype=float)


def interpolate_rt(space: FeSpace, func, n_line: int = 6) -> np.ndarray:
    """Canonical RT interpolant (edge moments, interior moments for k=1)."""
    mesh = space.mesh
    s, w = gauss_line(n_line)
    p = mesh.vertices[mesh.edges]
    t = p[:, 1] - p[:, 0]
    pts = p[:, 0][:, None, :] + s[None, :, None] * t[:, None, :]
    n = np.stack([t[:, 1], -t[:, 0]], axis=1)             # |n| = edge length
    flux = np.einsum("eqd,ed->eq", np.asarray(func(pts), dtype=float), n)
    coef = np.zeros(space.n_dofs)
    if space.degree == 0:
        coef[:] = flux @ w
        return coef
    ne = mesh.n_edges
    coef[0:2 * ne:2] = flux @ w
    coef[1:2 * ne:2] = flux @ (w * (2 * s - 1))
    # interior dofs: moments of the Piola pull-back (edge basis functions
    # have vanishing interior moments)
    rule = quadrature(6)
    f = np.asarray(func(map_points(mesh, rule.xy)), dtype=float)
    f_ref = np.einsum("tij,tqj->tqi", np.linalg.inv(mesh.jacobians), f)
    f_ref *= mesh.dets[:, None, None]
    coef[2 * ne:] = np.einsum("tqd,q->td", f_ref, rule.weights).ravel()
    return coef
