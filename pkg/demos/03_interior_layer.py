# %% [markdown]
# # Interior layer from discontinuous inflow data
#
# Transport along `beta = (1/2, sqrt(3)/2)` carries the jump in the boundary
# data at `(0, 0.2)` into the domain along the characteristic
# `y = sqrt(3) x + 0.2`.  No exact solution is known, so the checks are
# qualitative: no over- or undershoot, and refinement following the line.

# %%
import numpy as np

from fosls.adapt import RunConfig, adaptive_solve
from fosls.problems import interior_layer_problem

eps = 1e-3
problem = interior_layer_problem(eps)

# %%
for i in (1, 2, 3):
    rec = adaptive_solve(problem, RunConfig(formulation=i, tol=1e-12, max_iter=25),
                         keep_indicators=True)
    u = rec.solution.vertex_values()
    marked = rec.mesh.barycenters[rec.final.marked_ids]
    dist = np.abs(np.sqrt(3) * marked[:, 0] - marked[:, 1] + 0.2) / 2
    print(f"i={i}: {rec.final.triangles} triangles, eta {rec.final.eta:.3f}, "
          f"u in [{u.min():.3f}, {u.max():.3f}], "
          f"{np.mean(dist < 0.05):.0%} of marked elements near the line")

# %% [markdown]
# A coarse picture of the last solution, sampled at the vertices nearest to
# a 9 x 9 grid.

# %%
grid = np.linspace(0.05, 0.95, 9)
V = rec.mesh.vertices
for y in grid[::-1]:
    row = []
    for x in grid:
        k = np.argmin(np.hypot(V[:, 0] - x, V[:, 1] - y))
        row.append(f"{u[k]:5.2f}")
    print(" ".join(row))
