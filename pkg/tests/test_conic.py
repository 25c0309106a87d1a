import cvxpy as cp
import numpy as np
import pytest
from scipy.optimize import linprog

from fair_topo.conic import ConeProgram, _Cone, _soc_step, solve_cone_program


def _lp(seed, n=6, m=10):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(m, n))
    x0 = rng.normal(size=n)
    h = g @ x0 + rng.uniform(0.1, 1.0, m)  # x0 strictly feasible
    c = -g.T @ rng.uniform(0.1, 1.0, m)  # dual feasible, so bounded
    return c, g, h


@pytest.mark.parametrize("seed", range(5))
def test_lp_matches_highs(seed):
    c, g, h = _lp(seed)
    sol = solve_cone_program(ConeProgram(c, g, h, np.zeros((0, 6)), np.zeros(0), n_lin=10))
    ref = linprog(c, A_ub=g, b_ub=h, bounds=[(None, None)] * 6, method="highs")
    assert ref.status == 0
    assert sol.optimal
    assert c @ sol.x == pytest.approx(ref.fun, rel=1e-7, abs=1e-7)


@pytest.mark.parametrize("seed", range(5))
def test_soc_with_equality_matches_cvxpy(seed):
    rng = np.random.default_rng(100 + seed)
    n, k = 8, 6
    m = rng.normal(size=(k, n))
    c = rng.uniform(0.5, 2.0, n)
    # min c.x  s.t. x >= 0, ||M x|| <= 1, sum(x) = 1 ... scaled so it is feasible
    m *= 0.5 / np.linalg.norm(m @ np.full(n, 1.0 / n))
    g = np.vstack([-np.eye(n), np.zeros((1, n)), -m])
    h = np.concatenate([np.zeros(n), [1.0], np.zeros(k)])
    prog = ConeProgram(c, g, h, np.ones((1, n)), np.array([1.0]), n_lin=n, soc_dim=k + 1)
    sol = solve_cone_program(prog)
    x = cp.Variable(n)
    ref = cp.Problem(cp.Minimize(c @ x), [x >= 0, cp.norm(m @ x) <= 1, cp.sum(x) == 1])
    ref.solve(solver=cp.CLARABEL)
    assert sol.optimal
    assert c @ sol.x == pytest.approx(ref.value, rel=1e-6)
    assert np.linalg.norm(m @ sol.x) <= 1 + 1e-7
    assert sol.x.min() >= -1e-8
    assert sol.x.sum() == pytest.approx(1.0, abs=1e-8)


def test_unbounded_program_does_not_report_optimal():
    c, g, h = _lp(0)
    sol = solve_cone_program(ConeProgram(-c, g, h, np.zeros((0, 6)), np.zeros(0), n_lin=10))
    assert sol.status != "optimal"


def test_infeasible_program_does_not_report_optimal():
    # x >= 1 and x <= 0
    prog = ConeProgram(np.array([1.0]), np.array([[-1.0], [1.0]]), np.array([-1.0, 0.0]),
                       np.zeros((0, 1)), np.zeros(0), n_lin=2)
    assert solve_cone_program(prog, max_iters=60).status != "optimal"


def test_soc_step_reaches_boundary():
    cone = _Cone(0, 3)
    x = np.array([2.0, 0.0, 0.0])
    d = np.array([0.0, 1.0, 0.0])
    alpha = _soc_step(x[0], x[1:], d[0], d[1:])
    assert alpha == pytest.approx(2.0)
    assert cone.soc_det(x + alpha * d) == pytest.approx(0.0, abs=1e-12)
    # moving into the cone never hits the boundary
    assert _soc_step(2.0, np.zeros(2), 1.0, np.zeros(2)) == np.inf


def test_jordan_division_inverts_product():
    cone = _Cone(3, 4)
    rng = np.random.default_rng(0)
    lam = cone.e() + 0.1 * rng.normal(size=7)
    d = rng.normal(size=7)
    np.testing.assert_allclose(cone.prod(lam, cone.div(lam, d)), d, atol=1e-12)


def test_program_validation():
    with pytest.raises(ValueError):
        ConeProgram(np.zeros(1), np.zeros((3, 1)), np.zeros(3), np.zeros((0, 1)), np.zeros(0), n_lin=1, soc_dim=1)
    with pytest.raises(ValueError):
        ConeProgram(np.zeros(1), np.zeros((3, 1)), np.zeros(3), np.zeros((0, 1)), np.zeros(0), n_lin=1)
