"""Solvers for the sparse SPD least-squares systems."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DIRECT_THRESHOLD = 200_000


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolveReport:
    x: np.ndarray
    iterations: int
    residual: float
    method: str


def _rel_residual(A, x, b):
    nb = np.linalg.norm(b)
    r = np.linalg.norm(b - A @ x)
    return r / nb if nb > 0 else r


def solve_direct(A, b, rel_tol=1e-12, refinement_steps=3) -> SolveReport:
    """Symmetric-ordering LU without pivoting (an LDL^T in disguise).

    A non-positive pivot means the matrix is not positive definite.
    """
    A = sp.csc_matrix(A)
    try:
        lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                       options=dict(SymmetricMode=True))
    except RuntimeError as exc:
        raise SolverError(f"factorisation failed: {exc}") from exc
    if np.any(lu.perm_r != lu.perm_c):
        raise SolverError("factorisation pivoted off the diagonal; matrix is not SPD")
    piv = lu.U.diagonal()
    bad = np.flatnonzero(~(piv > 0))
    if len(bad):
        k = bad[0]
        row = int(np.flatnonzero(lu.perm_c == k)[0])
        raise SolverError(f"non-positive pivot {piv[k]:.3e} at step {k} (matrix row {row}); "
                          "matrix is not positive definite")
    x = lu.solve(b)
    res = _rel_residual(A, x, b)
    steps = 0
    while res > rel_tol and steps < refinement_steps:
        x = x + lu.solve(b - A @ x)
        res = _rel_residual(A, x, b)
        steps += 1
    return SolveReport(x, 0, res, "direct")


def solve_cg(A, b, rel_tol=1e-12, max_iter=None, x0=None) -> SolveReport:
    """Jacobi-preconditioned conjugate gradients."""
    A = sp.csr_matrix(A)
    n = A.shape[0]
    if max_iter is None:
        max_iter = 20 * n
    d = A.diagonal()
    if np.any(d <= 0):
        raise SolverError("non-positive diagonal entry; matrix is not SPD")
    dinv = 1.0 / d
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    nb = np.linalg.norm(b) or 1.0
    z = dinv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        if np.linalg.norm(r) / nb <= rel_tol:
            return SolveReport(x, it - 1, np.linalg.norm(r) / nb, "cg")
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise SolverError(f"non-positive curvature {pAp:.3e} at iteration {it}")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = np.linalg.norm(b - A @ x) / nb
    if res <= rel_tol:
        return SolveReport(x, max_iter, res, "cg")
    raise SolverError(f"CG did not converge in {max_iter} iterations "
                      f"(relative residual {res:.3e})")


def solve_spd(A, b=None, rel_tol: float = 1e-12,
              direct_threshold: int = DIRECT_THRESHOLD) -> SolveReport:
    """Solve ``A x = b`` for SPD ``A``.

    ``A`` may also be an :class:`~fosls.assembly.LsSystem`, in which case its
    reduced matrix and load vector are used and ``b`` is ignored.
    """
    if hasattr(A, "matrix") and hasattr(A, "rhs"):
        A, b = A.matrix, A.rhs
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    if A.shape[0] <= direct_threshold:
        report = solve_direct(A, b, rel_tol)
    else:
        report = solve_cg(A, b, rel_tol)
    if not report.residual <= rel_tol:
        raise SolverError(f"relative residual {report.residual:.3e} exceeds {rel_tol:.1e} "
                          f"({report.method})")
    return report
