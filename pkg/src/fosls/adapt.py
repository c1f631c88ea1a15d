"""SOLVE -> ESTIMATE -> MARK -> REFINE with maximum marking."""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .assembly import Formulation, assemble, build_spaces
from .estimate import ErrorReport, Indicators, Solution, error_norms, local_indicators
from .linsolve import SolverError, solve_spd
from .mesh import Mesh, build_initial_mesh, check_integrity, classify_boundary, \
    classify_elements, refine
from .problems import ProblemSpec

log = logging.getLogger(__name__)

TOLERANCE_MET = "tolerance met"
MAX_ITER = "maxIt reached"
NOTHING_MARKED = "nothing marked"


def mark_maximum(indicators, theta: float) -> np.ndarray:
    """Elements with eta_K >= theta * max eta_K (empty if all indicators vanish)."""
    if not 0 < theta <= 1:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    eta = np.asarray(getattr(indicators, "eta_K", indicators), dtype=float)
    if eta.size == 0:
        raise ValueError("no indicators")
    top = eta.max()
    if top <= 0:
        return np.zeros(0, dtype=np.int64)
    return np.flatnonzero(eta >= theta * top)


@dataclass(frozen=True)
class RunConfig:
    formulation: int = 1
    theta: float = 0.6
    tol: float = 0.5
    max_iter: int = 60
    rt_index: int = 0
    degree: int = 1
    compute_true_error: bool = False
    delta_cap: float = 1.0
    rel_tol: float = 1e-12

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 0:
            raise ValueError("max_iter must be non-negative")
        if self.degree < 1:
            raise ValueError("degree must be >= 1")


@dataclass
class LevelRecord:
    level: int
    triangles: int
    dofs: int
    eta: float
    marked: int
    t_assembly_s: float
    t_solve_s: float
    solver_residual: float
    boundary_in_diffusive: bool
    error: ErrorReport | None = None
    eta_K: np.ndarray | None = field(default=None, repr=False)
    marked_ids: np.ndarray | None = field(default=None, repr=False)

    @property
    def error_norm(self) -> float:
        return self.error.triple_norm if self.error is not None else float("nan")

    @property
    def eff_index(self) -> float:
        return self.error.eff_index if self.error is not None else float("nan")


@dataclass
class RunRecord:
    problem: str
    eps: float
    config: RunConfig
    levels: list[LevelRecord] = field(default_factory=list)
    reason: str | None = None
    mesh: Mesh | None = field(default=None, repr=False)
    solution: Solution | None = field(default=None, repr=False)

    @property
    def final(self) -> LevelRecord:
        return self.levels[-1]

    @property
    def converged(self) -> bool:
        return self.reason == TOLERANCE_MET

    def snapshot(self) -> dict:
        return dict(problem=self.problem, eps=self.eps, **asdict(self.config))


class AdaptError(RuntimeError):
    pass


def solve_level(mesh: Mesh, problem: ProblemSpec, form: Formulation, rt_index=0, degree=1,
                rel_tol=1e-12, check_assumption=True):
    """Assemble and solve on one mesh; returns (solution, system, report, timings)."""
    t0 = time.perf_counter()
    sigma_space, u_space = build_spaces(mesh, form, problem, rt_index, degree)
    system = assemble(form, mesh, sigma_space, u_space, problem,
                      check_assumption=check_assumption)
    t1 = time.perf_counter()
    report = solve_spd(system, rel_tol=rel_tol)
    t2 = time.perf_counter()
    cs, cu = system.split(system.expand(report.x))
    return Solution(sigma_space, u_space, cs, cu), system, report, (t1 - t0, t2 - t1)


def adaptive_solve(problem: ProblemSpec, config: RunConfig | None = None,
                   mesh: Mesh | None = None, keep_indicators: bool = False,
                   callback: Callable | None = None, check_mesh: bool = True) -> RunRecord:
    """Run the adaptive loop from the 16-triangle mesh (or ``mesh``).

    ``callback(level_record, mesh, solution, indicators, classification)`` is
    invoked after each level is estimated, before refinement.
    """
    config = config or RunConfig()
    form = Formulation(config.formulation)
    record = RunRecord(problem.name, problem.eps, config)
    mesh = mesh if mesh is not None else build_initial_mesh()
    level = 0
    while True:
        mesh = classify_boundary(mesh, problem.beta)
        try:
            solution, system, report, (ta, ts) = solve_level(
                mesh, problem, form, config.rt_index, config.degree, config.rel_tol,
                check_assumption=level == 0)
        except SolverError as exc:
            raise AdaptError(f"solve failed at level {level}: {exc}") from exc
        ind = local_indicators(form, solution, problem)
        cls = classify_elements(mesh, problem.beta, problem.eps, config.delta_cap)
        err = None
        if config.compute_true_error and problem.exact is not None:
            err = error_norms(form, solution, problem, cls, eta=ind.eta)

        done = ind.eta <= config.tol
        marked = np.zeros(0, dtype=np.int64) if done else mark_maximum(ind, config.theta)
        entry = LevelRecord(level, mesh.n_triangles, solution.n_dofs, ind.eta,
                            len(marked), ta, ts, report.residual,
                            cls.boundary_in_diffusive, err,
                            ind.eta_K if keep_indicators else None,
                            marked if keep_indicators else None)
        record.levels.append(entry)
        log.info("level %d: %d triangles, %d dofs, eta=%.4e, marked %d",
                 level, mesh.n_triangles, solution.n_dofs, ind.eta, len(marked))
        if callback is not None:
            callback(entry, mesh, solution, ind, cls)

        if done:
            record.reason = TOLERANCE_MET
        elif level >= config.max_iter:
            record.reason = MAX_ITER
        elif len(marked) == 0:
            record.reason = NOTHING_MARKED
        if record.reason is not None:
            record.mesh, record.solution = mesh, solution
            return record

        mesh = refine(mesh, marked)
        if check_mesh:
            check_integrity(mesh)
        level += 1
