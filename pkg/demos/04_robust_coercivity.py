# %% [markdown]
# # Coercivity that does not degrade with eps
#
# The least-squares matrix `A_i` is compared with the matrix of the norm
# `||tau||^2 + ||v||^2 + eps ||grad v||^2` (plus the outflow term for i = 2).
# The smallest generalised eigenvalue of the pair bounds the coercivity
# constant on the discrete space.  It should stay of order one as `eps`
# shrinks.

# %%
import numpy as np
import scipy.linalg as sl

from fosls.assembly import Formulation, assemble, build_spaces
from fosls.mesh import build_initial_mesh, classify_boundary, uniform_refine
from fosls.problems import boundary_layer_problem

mesh = uniform_refine(build_initial_mesh(), 3)
print(mesh.n_triangles, "triangles")

# %%
for i in (1, 2, 3):
    row = []
    for eps in (1e-1, 1e-2, 1e-3, 1e-4):
        P = boundary_layer_problem(eps)
        m = classify_boundary(mesh, P.beta)
        form = Formulation(i)
        S, U = build_spaces(m, form, P)
        A = assemble(form, m, S, U, P, check_assumption=False).matrix.toarray()
        M = assemble(form, m, S, U, P, norm=True).matrix.toarray()
        row.append(sl.eigh(A, M, eigvals_only=True, subset_by_index=[0, 0])[0])
    print(f"i={i}: " + "  ".join(f"{v:.3f}" for v in row)
          + f"   max/min = {max(row) / min(row):.2f}")

# %% [markdown]
# The eigenvalues of `A_i` alone, by contrast, scale with `eps`: the system
# gets harder to solve, but the norm it controls does not weaken.

# %%
for eps in (1e-1, 1e-3):
    P = boundary_layer_problem(eps)
    m = classify_boundary(mesh, P.beta)
    S, U = build_spaces(m, Formulation(2), P)
    A = assemble(Formulation(2), m, S, U, P, check_assumption=False).matrix.toarray()
    ev = np.linalg.eigvalsh(A)
    print(f"eps={eps:g}: condition number of A_2 = {ev[-1] / ev[0]:.2e}")
