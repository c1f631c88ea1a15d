"""Conforming triangulations of the unit square with newest-vertex bisection.

Convention: for every triangle ``(v0, v1, v2)`` (counter-clockwise) local
edge ``j`` is the edge opposite local vertex ``j``.  Local vertex 0 is the
newest vertex, so the refinement edge is always local edge 0, i.e. the
segment ``v1 -> v2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import IntEnum
from functools import cached_property

import numpy as np

from .quadrature import quadrature

LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])


class EdgeTag(IntEnum):
    INTERIOR = 0
    OUTFLOW = 1
    INFLOW = 2
    CHARACTERISTIC = 3


class MeshError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangle mesh.

    Attributes
    ----------
    vertices : (N, 2) float array
    triangles : (T, 3) int array, counter-clockwise, refinement edge opposite
        local vertex 0
    generation : (T,) int array, number of bisections since the initial mesh
    parent : (T,) int array, index of the triangle in the previous mesh this
        one descends from (-1 for the initial mesh)
    edge_tags : (E,) array of :class:`EdgeTag` codes, or None until
        :func:`classify_boundary` has been applied
    """

    vertices: np.ndarray
    triangles: np.ndarray
    generation: np.ndarray
    parent: np.ndarray
    edge_tags: np.ndarray | None = field(default=None)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def _topology(self):
        tris = self.triangles
        keys = np.sort(tris[:, LOCAL_EDGES].reshape(-1, 2), axis=1)
        edges, inverse, counts = np.unique(
            keys, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.reshape(-1)
        order = np.argsort(inverse, kind="stable")
        first = np.searchsorted(inverse[order], np.arange(len(edges)))
        owner = order // 3
        edge_tris = np.full((len(edges), 2), -1, dtype=np.int64)
        edge_tris[:, 0] = owner[first]
        two = counts >= 2
        edge_tris[two, 1] = owner[first[two] + 1]
        return edges, inverse.reshape(-1, 3), edge_tris, counts

    @property
    def edges(self) -> np.ndarray:
        """(E, 2) vertex ids, ascending within each row."""
        return self._topology[0]

    @property
    def tri_edges(self) -> np.ndarray:
        """(T, 3) global edge id of each local edge."""
        return self._topology[1]

    @property
    def edge_tris(self) -> np.ndarray:
        """(E, 2) adjacent triangles, -1 where there is none."""
        return self._topology[2]

    @property
    def edge_counts(self) -> np.ndarray:
        """Number of triangles containing each edge."""
        return self._topology[3]

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_counts == 1)

    @property
    def refinement_edges(self) -> np.ndarray:
        return self.tri_edges[:, 0]

    @cached_property
    def jacobians(self) -> np.ndarray:
        """(T, 2, 2) Jacobians of the affine maps from the reference triangle."""
        p = self.vertices[self.triangles]
        return np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)

    @cached_property
    def dets(self) -> np.ndarray:
        J = self.jacobians
        return J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]

    @property
    def areas(self) -> np.ndarray:
        return 0.5 * self.dets

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        p = self.vertices[self.edges]
        return np.linalg.norm(p[:, 1] - p[:, 0], axis=1)

    @cached_property
    def diameters(self) -> np.ndarray:
        """h_K, the longest edge of each triangle."""
        return self.edge_lengths[self.tri_edges].max(axis=1)

    @property
    def barycenters(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def edge_midpoints(self) -> np.ndarray:
        return self.vertices[self.edges].mean(axis=1)

    def edge_local_index(self, edge_ids) -> np.ndarray:
        """Local index of each edge inside its first adjacent triangle."""
        edge_ids = np.asarray(edge_ids)
        tris = self.edge_tris[edge_ids, 0]
        return np.argmax(self.tri_edges[tris] == edge_ids[:, None], axis=1)

    @cached_property
    def outward_normals(self) -> np.ndarray:
        """(E, 2) unit normals pointing out of ``edge_tris[:, 0]``."""
        ids = np.arange(self.n_edges)
        tris = self.edge_tris[:, 0]
        j = self.edge_local_index(ids)
        a = self.triangles[tris, (j + 1) % 3]
        b = self.triangles[tris, (j + 2) % 3]
        t = self.vertices[b] - self.vertices[a]
        # counter-clockwise traversal: clockwise rotation of the tangent is outward
        n = np.stack([t[:, 1], -t[:, 0]], axis=1)
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    @cached_property
    def min_angles(self) -> np.ndarray:
        """Smallest interior angle of each triangle, in degrees."""
        p = self.vertices[self.triangles]
        angles = []
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            cosang = np.einsum("ij,ij->i", a, b) / (
                np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            angles.append(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))
        return np.min(angles, axis=0)

    def edges_with_tag(self, tag: EdgeTag) -> np.ndarray:
        if self.edge_tags is None:
            raise MeshError("boundary not classified; call classify_boundary first")
        return np.flatnonzero(self.edge_tags == tag)

    def outflow_edges_of(self) -> np.ndarray:
        """(T,) bool, True where the triangle has an outflow edge."""
        out = np.zeros(self.n_triangles, dtype=bool)
        out[self.edge_tris[self.edges_with_tag(EdgeTag.OUTFLOW), 0]] = True
        return out


def build_initial_mesh() -> Mesh:
    """Unit square as 2x2 squares, each cut by both diagonals (16 triangles)."""
    xs = np.array([0.0, 0.5, 1.0])
    corners = np.array([[x, y] for y in xs for x in xs])
    centers = np.array([[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]])
    vertices = np.vstack([corners, centers])
    tris = []
    for c, (i, j) in enumerate([(0, 0), (1, 0), (0, 1), (1, 1)]):
        ll, lr = 3 * j + i, 3 * j + i + 1
        ul, ur = ll + 3, lr + 3
        m = 9 + c
        # centre is the right-angle vertex, so the hypotenuse (square side)
        # is opposite local vertex 0
        for a, b in [(ll, lr), (lr, ur), (ur, ul), (ul, ll)]:
            tris.append((m, a, b))
    tris = np.array(tris, dtype=np.int64)
    n = len(tris)
    return Mesh(vertices, tris, np.zeros(n, dtype=np.int64), np.full(n, -1, dtype=np.int64))


def classify_boundary(mesh: Mesh, beta, rtol: float = 1e-12) -> Mesh:
    """Tag boundary edges by the sign of beta . n at the edge midpoint."""
    tags = np.full(mesh.n_edges, EdgeTag.INTERIOR, dtype=np.int64)
    bnd = mesh.boundary_edges
    b = np.asarray(beta(mesh.edge_midpoints[bnd]), dtype=float).reshape(-1, 2)
    bn = np.einsum("ij,ij->i", b, mesh.outward_normals[bnd])
    scale = np.maximum(np.linalg.norm(b, axis=1), 1.0)
    tags[bnd] = np.where(bn > rtol * scale, EdgeTag.OUTFLOW,
                         np.where(bn < -rtol * scale, EdgeTag.INFLOW, EdgeTag.CHARACTERISTIC))
    return replace(mesh, edge_tags=tags)


def refine(mesh: Mesh, marked, max_sweeps: int | None = None) -> Mesh:
    """Newest-vertex bisection of the marked triangles plus conforming closure.

    Every triangle that owns a bisected edge is itself bisected through its
    refinement edge; at most two bisections per triangle are needed per call.
    """
    marked = np.asarray(marked, dtype=np.int64).reshape(-1)
    if marked.size and (marked.min() < 0 or marked.max() >= mesh.n_triangles):
        raise ValueError(f"marked ids must lie in [0, {mesh.n_triangles})")
    te = mesh.tri_edges
    split = np.zeros(mesh.n_edges, dtype=bool)
    split[te[marked, 0]] = True
    if max_sweeps is None:
        max_sweeps = mesh.n_edges + 1
    for _ in range(max_sweeps):
        touched = split[te].any(axis=1)
        grow = touched & ~split[te[:, 0]]
        if not grow.any():
            break
        split[te[grow, 0]] = True
    else:
        raise MeshError(f"refinement closure did not terminate in {max_sweeps} sweeps")

    split_ids = np.flatnonzero(split)
    midpoint = np.full(mesh.n_edges, -1, dtype=np.int64)
    midpoint[split_ids] = mesh.n_vertices + np.arange(len(split_ids))
    vertices = np.vstack([mesh.vertices, mesh.edge_midpoints[split_ids]])

    bisect = split[te[:, 0]]
    keep = np.flatnonzero(~bisect)
    par = np.flatnonzero(bisect)
    t = mesh.triangles[par]
    m = midpoint[te[par, 0]]
    gen = mesh.generation[par] + 1
    # children (m, v0, v1) and (m, v2, v0); their refinement edges are the
    # parent's local edges 2 and 1
    kids = [(np.stack([m, t[:, 0], t[:, 1]], axis=1), te[par, 2]),
            (np.stack([m, t[:, 2], t[:, 0]], axis=1), te[par, 1])]

    out_tris = [mesh.triangles[keep]]
    out_gen = [mesh.generation[keep]]
    out_par = [keep]
    for child, ref_edge in kids:
        again = split[ref_edge]
        once = ~again
        out_tris.append(child[once])
        out_gen.append(gen[once])
        out_par.append(par[once])
        c = child[again]
        m2 = midpoint[ref_edge[again]]
        out_tris.append(np.stack([m2, c[:, 0], c[:, 1]], axis=1))
        out_tris.append(np.stack([m2, c[:, 2], c[:, 0]], axis=1))
        for _ in range(2):
            out_gen.append(gen[again] + 1)
            out_par.append(par[again])
    return Mesh(vertices, np.concatenate(out_tris), np.concatenate(out_gen),
                np.concatenate(out_par))


def uniform_refine(mesh: Mesh, times: int = 1) -> Mesh:
    for _ in range(times):
        mesh = refine(mesh, np.arange(mesh.n_triangles))
    return mesh


@dataclass(frozen=True)
class ElementClassification:
    peclet: np.ndarray
    convective: np.ndarray       # bool; False means diffusive
    delta: np.ndarray
    touches_outflow: np.ndarray  # bool
    beta_max: np.ndarray

    @property
    def boundary_in_diffusive(self) -> bool:
        """Whether every element touching the outflow boundary is diffusive."""
        return bool(np.all(~self.convective[self.touches_outflow]))


def beta_sup(mesh: Mesh, beta, order: int = 6) -> np.ndarray:
    """max |beta| over each element's quadrature points."""
    rule = quadrature(order)
    pts = map_points(mesh, rule.xy)
    b = np.asarray(beta(pts), dtype=float)
    return np.linalg.norm(b, axis=-1).max(axis=1)


def classify_elements(mesh: Mesh, beta, eps: float, cap: float = 1.0) -> ElementClassification:
    """Local Peclet numbers, convective/diffusive split and streamline weights."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    h = mesh.diameters
    bmax = beta_sup(mesh, beta)
    pe = bmax * h / (2.0 * eps)
    conv = pe > 1.0
    delta = h ** 2 / eps
    delta[conv] = 2.0 * h[conv] / bmax[conv]
    delta = np.minimum(delta, cap)
    if mesh.edge_tags is not None:
        touches = mesh.outflow_edges_of()
    else:
        touches = np.zeros(mesh.n_triangles, dtype=bool)
    return ElementClassification(pe, conv, delta, touches, bmax)


def map_points(mesh: Mesh, ref_xy: np.ndarray, elements=None) -> np.ndarray:
    """Physical coordinates (T, n, 2) of reference points on each element."""
    if elements is None:
        elements = slice(None)
    v0 = mesh.vertices[mesh.triangles[elements, 0]]
    J = mesh.jacobians[elements]
    return v0[:, None, :] + np.einsum("tij,qj->tqi", J, ref_xy)


def on_square_boundary(points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    x, y = points[..., 0], points[..., 1]
    return (np.abs(x) < tol) | (np.abs(x - 1) < tol) | (np.abs(y) < tol) | (np.abs(y - 1) < tol)


def check_conforming(mesh: Mesh) -> None:
    """Raise MeshError on hanging nodes, orientation or boundary mismatch."""
    counts = mesh.edge_counts
    if np.any((counts < 1) | (counts > 2)):
        raise MeshError("edge shared by more than two triangles")
    geometric = on_square_boundary(mesh.edge_midpoints)
    bad = (counts == 1) != geometric
    if bad.any():
        raise MeshError(f"{int(bad.sum())} hanging or mis-attached edges")
    if np.any(mesh.dets <= 0):
        raise MeshError("triangle with non-positive orientation")


def check_integrity(mesh: Mesh, min_angle: float = 22.5) -> None:
    check_conforming(mesh)
    worst = float(mesh.min_angles.min())
    if worst < min_angle - 1e-9:
        raise MeshError(f"minimum angle {worst:.3f} deg below {min_angle} deg")
