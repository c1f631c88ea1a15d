# %% [markdown]
# # Adaptive refinement of exponential boundary layers
#
# The exact solution has layers of width `O(eps)` along `x = 1` and `y = 1`.
# Starting from the 16-triangle mesh, the loop solves, computes the local
# least-squares indicators, marks every element within a factor `theta` of
# the largest one and bisects.  The run stops once `eta <= tol`.
#
# Run time is around a minute per formulation on one core.

# %%
import sys
from pathlib import Path

import numpy as np

from fosls.adapt import RunConfig, adaptive_solve
from fosls.io import write_convergence_csv, write_level_vtk
from fosls.problems import boundary_layer_problem

formulation = int(sys.argv[1]) if len(sys.argv) > 1 else 1
eps = float(sys.argv[2]) if len(sys.argv) > 2 else 1e-3
out = Path("boundary-layer-demo")
out.mkdir(exist_ok=True)

# %% [markdown]
# Keep the last mesh and solution for export; the callback sees every level.

# %%
last = {}


def keep(entry, mesh, sol, ind, cls):
    last.update(mesh=mesh, sol=sol, ind=ind, cls=cls)
    if entry.level % 5 == 0:
        print(f"level {entry.level:2d}: {entry.triangles:6d} triangles, eta {entry.eta:.4f}")


config = RunConfig(formulation=formulation, theta=0.6, tol=0.5, compute_true_error=True)
record = adaptive_solve(boundary_layer_problem(eps), config, callback=keep)
print(record.reason, "at level", record.final.level)

# %% [markdown]
# ## Convergence
#
# The estimator should decay at least like `DoF^(-1/2)`; the effectivity
# index `eta / |||error|||` stays of order one.

# %%
tail = record.levels[-5:]
rate = np.polyfit(np.log([L.dofs for L in tail]), np.log([L.eta for L in tail]), 1)[0]
print(f"fitted rate over the last 5 levels: {rate:.2f}")
for L in record.levels[::6] + [record.final]:
    print(f"{L.level:3d} {L.dofs:7d} eta={L.eta:.3e} err={L.error_norm:.3e} "
          f"eff={L.eff_index:.2f}")

# %% [markdown]
# ## Where did the mesh go?

# %%
b = record.mesh.barycenters
near = np.minimum(1 - b[:, 0], 1 - b[:, 1]) <= 0.1
print(f"{near.mean():.1%} of {record.mesh.n_triangles} triangles lie within 0.1 of the layers")
print("smallest element diameter:", record.mesh.diameters.min())

# %%
write_convergence_csv(record, out / "convergence.csv")
write_level_vtk(out / "final.vtk", last["mesh"], last["sol"], last["ind"], last["cls"])
print("wrote", sorted(p.name for p in out.iterdir()))
