import logging

import numpy as np
import pytest

from fosls.adapt import RunConfig, adaptive_solve, solve_level
from fosls.assembly import Formulation
from fosls.estimate import Solution, error_norms, local_indicators
from fosls.mesh import build_initial_mesh, classify_boundary, classify_elements, uniform_refine
from fosls.problems import (ExactSolution, ProblemSpec, boundary_layer_problem, constant,
                            constant_vector, manufactured_problem)
from fosls.spaces import build_lagrange_space, build_rt_space, interpolate_lagrange, \
    interpolate_rt

from oracles import ls_functional

logging.getLogger("fosls").setLevel(logging.ERROR)


def solved(i, problem, mesh=None, k=0, m=1):
    mesh = classify_boundary(mesh if mesh is not None else build_initial_mesh(), problem.beta)
    sol, _, _, _ = solve_level(mesh, problem, Formulation(i), k, m, check_assumption=False)
    return mesh, sol


@pytest.mark.parametrize("i", [1, 2, 3])
def test_exact_discrete_solution_has_zero_indicators(i):
    P = manufactured_problem()
    _, sol = solved(i, P, k=1, m=2)
    ind = local_indicators(Formulation(i), sol, P)
    assert np.all(ind.eta_K <= 1e-8)


@pytest.mark.parametrize("i", [1, 2, 3])
def test_estimator_is_root_sum_of_squares(i):
    P = boundary_layer_problem(1e-3)
    _, sol = solved(i, P, uniform_refine(build_initial_mesh(), 2))
    ind = local_indicators(Formulation(i), sol, P)
    assert np.all(ind.eta_K >= 0)
    assert ind.eta ** 2 == pytest.approx(np.sum(ind.eta_K ** 2), rel=1e-13)


@pytest.mark.parametrize("i", [1, 2, 3])
def test_estimator_equals_error_functional(i):
    """eta^2 = G_i(sigma - sigma_h, u - u_h; 0) once the layer is resolved by quadrature."""
    P = boundary_layer_problem(0.1)
    mesh, sol = solved(i, P, uniform_refine(build_initial_mesh(), 3))
    eta2 = local_indicators(Formulation(i), sol, P, quad_order=10).eta ** 2
    G = ls_functional(mesh, i, 0, 1, sol.sigma, sol.u, P, levels=2, exact=P.exact)
    assert eta2 == pytest.approx(G, rel=1e-6)


def test_interpolant_has_zero_error():
    P = manufactured_problem(0.5)
    mesh = classify_boundary(uniform_refine(build_initial_mesh(), 1), P.beta)
    S, U = build_rt_space(mesh, 1), build_lagrange_space(mesh, 2)
    sol = Solution(S, U, interpolate_rt(S, P.exact.sigma), interpolate_lagrange(U, P.exact.u))
    cls = classify_elements(mesh, P.beta, P.eps)
    for i in (1, 2, 3):
        rep = error_norms(Formulation(i), sol, P, cls)
        for part in (rep.sigma_l2, rep.u_l2, rep.grad, rep.outflow, rep.streamline, rep.div):
            assert part <= 1e-20
        assert np.isnan(rep.eff_index)


def test_hat_function_error():
    """(E, e) = (0, v): M_1 = ||v||^2 + eps ||grad v||^2 for a P1 hat."""
    eps = 0.3
    zero = ExactSolution(constant(0.0), constant_vector([0.0, 0.0]), constant(0.0), eps)
    P = ProblemSpec("zero", eps, constant_vector([1.0, 1.0]), constant(0.0), constant(0.0),
                    constant(0.0), constant(0.0), zero)
    mesh = classify_boundary(build_initial_mesh(), P.beta)
    S, U = build_rt_space(mesh, 0), build_lagrange_space(mesh, 1)
    centre = int(np.flatnonzero(np.all(np.isclose(mesh.vertices, 0.5), axis=1))[0])
    u = np.zeros(U.n_dofs)
    u[centre] = -1.0                 # e = 0 - u_h = hat
    sol = Solution(S, U, np.zeros(S.n_dofs), u)
    rep = error_norms(Formulation(1), sol, P, classify_elements(mesh, P.beta, eps))
    # each of the 8 triangles around the centre is right-angled with legs
    # sqrt(2)/4 meeting at the centre or at a square corner; the hat's
    # gradient has squared length 8 on every one of them
    area = 1 / 16
    assert rep.u_l2 == pytest.approx(8 * area / 6, rel=1e-13)
    assert rep.grad == pytest.approx(eps * 8 * area * 8, rel=1e-13)
    assert rep.sigma_l2 == 0.0
    assert rep.triple_norm ** 2 == pytest.approx(rep.M + rep.streamline, rel=1e-14)


@pytest.fixture(scope="module")
def short_runs():
    out = {}
    for eps in (1e-2, 1e-3):
        P = boundary_layer_problem(eps)
        for i in (1, 2, 3):
            out[eps, i] = adaptive_solve(
                P, RunConfig(formulation=i, max_iter=15, compute_true_error=True),
                keep_indicators=True)
    return out


def test_effectivity_band(short_runs):
    # band frozen from the first verified runs (observed 0.32 .. 1.25)
    for rec in short_runs.values():
        eff = np.array([L.eff_index for L in rec.levels])
        assert np.all((eff >= 0.3) & (eff <= 10)), eff


def test_reliability_ratio(short_runs):
    # M_1^{1/2} / eta stays below a level-independent constant (observed <= 0.58)
    for (eps, i), rec in short_runs.items():
        if i == 1:
            r = [np.sqrt(L.error.M) / L.eta for L in rec.levels]
            assert max(r) <= 1.0


def test_local_efficiency_spot_check(short_runs):
    # eta_K^2 <= C (local M + streamline + eps ||div E||^2), observed C <= 9.3
    rng = np.random.default_rng(0)
    for rec in short_runs.values():
        for L in rec.levels:
            K = rng.choice(len(L.eta_K), min(10, len(L.eta_K)), replace=False)
            local = L.error.element_M + L.error.element_streamline + L.error.element_div
            assert np.all(L.eta_K[K] ** 2 <= 20.0 * local[K])


def test_error_report_components_nonnegative(short_runs):
    for rec in short_runs.values():
        for L in rec.levels:
            e = L.error
            assert min(e.sigma_l2, e.u_l2, e.grad, e.outflow, e.streamline, e.div) >= 0
            assert e.quad_order == 10


def test_missing_exact_solution():
    from fosls.problems import interior_layer_problem
    P = interior_layer_problem(1e-2)
    mesh, sol = solved(1, P)
    with pytest.raises(ValueError):
        error_norms(Formulation(1), sol, P, classify_elements(mesh, P.beta, P.eps))
