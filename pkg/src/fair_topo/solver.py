"""Solvers for the fair topology inference program.

``solve_convex`` handles the l1 relaxation: a relaxed ADMM when the
commutator must vanish exactly, a primal-dual interior point method when it
is bounded by a positive tolerance. ``solve_l0_bruteforce`` solves the l0 program exactly by
support enumeration and is only meant as an oracle on tiny graphs.
"""

from __future__ import annotations

import enum
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from fair_topo.conic import ConeProgram, solve_cone_program
from fair_topo.graph_core import AdjacencyMatrix, ConstraintSet, GroupAssignment, Normalization
from fair_topo.signals import CovarianceEstimate
from fair_topo.vectorize import (
    Penalty,
    build_vectorized,
    compressed_commutator,
    fairness_rows,
    normalization_row,
    unvec_upper,
    upper_pairs,
    vec_upper,
)

log = logging.getLogger(__name__)


class InfeasibleProblemError(ValueError):
    pass


@dataclass(frozen=True)
class SolveConfig:
    beta: float = 0.0
    epsilon: float = 0.0
    penalty: Penalty = Penalty.NONE
    rho: float = 2.0
    max_iters: int = 50_000
    tol_abs: float = 1e-7
    tol_rel: float = 1e-5
    adaptive_rho: bool = True
    relaxation: float = 1.6
    polish: bool = True
    method: str = "auto"
    ipm_tol: float = 1e-8
    ipm_max_iters: int = 100

    def __post_init__(self):
        object.__setattr__(self, "penalty", Penalty(self.penalty))
        if self.beta < 0 or self.epsilon < 0:
            raise ValueError("beta and epsilon must be nonnegative")
        if self.rho <= 0 or self.tol_abs <= 0 or self.tol_rel <= 0:
            raise ValueError("rho and tolerances must be positive")
        if not 0 < self.relaxation < 2:
            raise ValueError("relaxation must lie in (0, 2)")
        if self.method not in ("auto", "admm", "ipm"):
            raise ValueError(f"unknown method {self.method!r}")

    @property
    def uses_groups(self) -> bool:
        return self.penalty is not Penalty.NONE and self.beta > 0


@dataclass(frozen=True)
class SolveReport:
    a_hat: AdjacencyMatrix
    objective_l1: float
    objective_fair: float
    commut_residual: float
    iterations: int
    converged: bool
    primal_residual: float = 0.0
    dual_residual: float = 0.0
    status: str = "solved"
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def support(self) -> tuple:
        return support_of(self.a_hat.w)

    def to_dict(self) -> dict:
        return {
            "objective_l1": self.objective_l1,
            "objective_fair": self.objective_fair,
            "commut_residual": self.commut_residual,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def support_of(w: np.ndarray, zero_tol: Optional[float] = None) -> tuple:
    """Positions (in upper-triangle order) of the nonzero parameters."""
    v = vec_upper(w)
    if zero_tol is None:
        zero_tol = 1e-6 * max(float(np.abs(v).max(initial=0.0)), 1e-300)
    return tuple(int(k) for k in np.flatnonzero(np.abs(v) > zero_tol))


def default_epsilon(c: CovarianceEstimate, n: Optional[int] = None) -> float:
    """Commutator tolerance scaled to the sampling error of ``c``.

    ``0.1 * ||C||_F * N / sqrt(M)``; zero for an exact covariance.
    """
    n = c.n if n is None else n
    if c.m == 0:
        return 0.0
    return 0.1 * float(np.linalg.norm(c.c)) * n / math.sqrt(c.m)


class EpsilonRule(str, enum.Enum):
    """How the commutator tolerance is chosen for finite-sample covariances.

    ``concentration``: :func:`default_epsilon`. ``residual``: a fixed factor
    above the smallest residual any valid adjacency matrix attains, so the
    feasible set is never empty and never much larger than needed.
    ``relative``: a fraction of ``||C||_F``, i.e. a bound on the normalized
    commutator error.
    """

    CONCENTRATION = "concentration"
    RESIDUAL = "residual"
    RELATIVE = "relative"


def select_epsilon(
    c: CovarianceEstimate,
    rule: EpsilonRule | str = EpsilonRule.RESIDUAL,
    factor: float = 1.0,
    cset: Optional[ConstraintSet] = None,
) -> float:
    """Commutator tolerance for ``c`` under ``rule``.

    For ``residual`` the tolerance is ``(1 + factor) * delta_min`` and for
    ``relative`` it is ``factor * ||C||_F``; an analytic covariance
    (``m == 0``) gets 0 under every rule.
    """
    rule = EpsilonRule(rule)
    if c.m == 0:
        return 0.0
    if rule is EpsilonRule.CONCENTRATION:
        return default_epsilon(c)
    if factor <= 0:
        raise ValueError("factor must be positive")
    if rule is EpsilonRule.RELATIVE:
        return factor * float(np.linalg.norm(c.c))
    delta, _ = min_commutator_residual(c, cset)
    return (1.0 + factor) * delta


def project_simplex_subset(v: np.ndarray, subset: np.ndarray, total: float) -> np.ndarray:
    """Euclidean projection onto ``{x >= 0, sum(x[subset]) == total}``."""
    out = np.maximum(v, 0.0)
    s = v[subset]
    # sort-based projection onto the scaled simplex
    u = np.sort(s)[::-1]
    css = np.cumsum(u) - total
    k = np.arange(1, u.size + 1)
    cond = u - css / k > 0
    r = k[cond][-1]
    theta = css[r - 1] / r
    out[subset] = np.maximum(s - theta, 0.0)
    return out


def _soft(x: np.ndarray, t) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _fair_value(groups: Optional[GroupAssignment], penalty: Penalty, a_vec: np.ndarray) -> float:
    if groups is None or penalty is Penalty.NONE or groups.g_count < 2:
        return 0.0
    return float(np.abs(fairness_rows(groups, penalty) @ a_vec).sum())


def _report(
    a_vec: np.ndarray,
    n: int,
    c: np.ndarray,
    groups: Optional[GroupAssignment],
    penalty: Penalty,
    iterations: int,
    converged: bool,
    primal: float = 0.0,
    dual: float = 0.0,
    status: str = "solved",
    extra: Optional[dict] = None,
) -> SolveReport:
    w = unvec_upper(a_vec, n)
    return SolveReport(
        a_hat=AdjacencyMatrix(w),
        objective_l1=float(np.abs(w).sum()),
        objective_fair=_fair_value(groups, penalty, a_vec),
        commut_residual=float(np.linalg.norm(w @ c - c @ w)),
        iterations=iterations,
        converged=converged,
        primal_residual=primal,
        dual_residual=dual,
        status=status,
        extra=extra or {},
    )


def _polish_equality(a_vec, comm_full, norm_row, target, support_tol=1e-6):
    """Re-solve ``commutator(a) = 0, normalization(a) = target`` on the support of a."""
    v = np.asarray(a_vec)
    supp = np.flatnonzero(v > support_tol * max(v.max(initial=0.0), 1e-300))
    if supp.size == 0:
        return None
    lhs = np.vstack([comm_full[:, supp], norm_row[None, supp]])
    rhs = np.zeros(lhs.shape[0])
    rhs[-1] = target
    sol, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    if sol.min() < 0:
        return None
    out = np.zeros_like(v)
    out[supp] = sol
    return out


class _Ellipsoid:
    """Projection onto ``{x : x^T Q x <= radius^2}`` through a cached eigenbasis."""

    def __init__(self, q: np.ndarray, radius: float):
        sig, self.u = np.linalg.eigh(q)
        self.sig = np.maximum(sig, 0.0)
        self.radius = radius
        self.null = self.sig <= 1e-10 * max(self.sig.max(initial=0.0), 1e-300)

    def project(self, v: np.ndarray) -> np.ndarray:
        c = self.u.T @ v
        sc2 = self.sig * c * c
        r2 = self.radius**2
        if sc2.sum() <= r2:
            return v
        if self.radius == 0.0:
            return self.u @ np.where(self.null, c, 0.0)
        # secular equation sum sig c^2 / (1 + mu sig)^2 = r^2, Newton on 1/sqrt
        mu = 0.0
        for _ in range(100):
            d = 1.0 + mu * self.sig
            phi = np.sum(sc2 / d**2)
            dphi = -2.0 * np.sum(sc2 * self.sig / d**3)
            g = phi**-0.5 - 1.0 / self.radius
            step = g / (-0.5 * phi**-1.5 * dphi)
            if step >= 0 or not np.isfinite(step):
                break
            mu -= step
            if -step <= 1e-13 * mu:
                break
        return self.u @ (c / (1.0 + mu * self.sig))


def _problem_parts(c, groups, cfg, cset):
    cm = c.c if isinstance(c, CovarianceEstimate) else np.asarray(c, dtype=float)
    n = cm.shape[0]
    if n < 2:
        raise InfeasibleProblemError("normalization is infeasible for a single node")
    if groups is not None and groups.n != n:
        raise ValueError(f"groups cover {groups.n} nodes, covariance has {n}")
    e = n * (n - 1) // 2
    if cfg.uses_groups:
        if groups is None:
            raise ValueError("a fairness penalty needs group labels")
        f_rows = cfg.beta * fairness_rows(groups, cfg.penalty)
        f_rows = f_rows[np.linalg.norm(f_rows, axis=1) > 0]
    else:
        f_rows = np.zeros((0, e))
    mc = compressed_commutator(cm)
    return cm, n, e, f_rows, mc


def solve_convex(
    c: CovarianceEstimate,
    groups: Optional[GroupAssignment],
    cfg: SolveConfig,
    cset: Optional[ConstraintSet] = None,
    warm_start: Optional[np.ndarray] = None,
) -> SolveReport:
    """Minimize ``||A||_1 + beta * gap(A)`` over valid adjacency matrices
    with ``||A C - C A||_F <= epsilon``.

    ``cfg.method`` picks the algorithm: ``"admm"`` (operator splitting),
    ``"ipm"`` (primal-dual interior point, needs epsilon > 0) or ``"auto"``,
    which uses ADMM for epsilon == 0 and the interior point method otherwise.
    """
    cset = cset or ConstraintSet()
    method = cfg.method
    if method == "auto":
        method = "admm" if cfg.epsilon == 0.0 else "ipm"
    if method == "admm":
        return _solve_admm(c, groups, cfg, cset, warm_start)
    if method == "ipm":
        if cfg.epsilon == 0.0:
            raise ValueError("the interior point method needs epsilon > 0")
        return _solve_ipm(c, groups, cfg, cset)
    raise ValueError(f"unknown method {cfg.method!r}")


def _solve_admm(c, groups, cfg, cset, warm_start=None) -> SolveReport:
    """Relaxed ADMM on ``x = a, z = a, f = F a``.

    * x-block: 2 * sum(x) restricted to nonnegative normalized vectors; the
      l1 term is linear there, so its prox is a shifted simplex projection;
    * z-block: projection onto the commutator ellipsoid;
    * f-block: weighted soft-threshold of the equilibrated fairness rows.

    The a-update solves a fixed linear system whose inverse is cached. The
    x iterate is returned, so the estimate is exactly symmetric, hollow,
    nonnegative and normalized.
    """
    cm, n, e, f_rows, mc = _problem_parts(c, groups, cfg, cset)
    f_norm = np.linalg.norm(f_rows, axis=1)
    ft = f_rows / f_norm[:, None] if f_rows.shape[0] else f_rows
    ell = _Ellipsoid(mc.T @ mc, cfg.epsilon)
    norm_row = normalization_row(n, cset)
    norm_idx = np.flatnonzero(norm_row)
    norm_total = cset.target(n) / norm_row[norm_idx[0]]

    def proj_k(v):
        return project_simplex_subset(v, norm_idx, norm_total)

    p_inv = np.linalg.inv(2.0 * np.eye(e) + ft.T @ ft)
    p_ft = p_inv @ ft.T

    a0 = proj_k(np.zeros(e)) if warm_start is None else proj_k(vec_upper(warm_start))
    x, z, f = a0.copy(), ell.project(a0), ft @ a0
    ux, uz, uf = np.zeros(e), np.zeros(e), np.zeros(ft.shape[0])
    rho, alpha = cfg.rho, cfg.relaxation
    n_rows = 2 * e + ft.shape[0]
    comm_tol = 1e-6 * float(np.linalg.norm(cm))

    converged = False
    primal = dual = math.inf
    it = 0
    for it in range(1, cfg.max_iters + 1):
        a = p_inv @ (x - ux + z - uz) + p_ft @ (f - uf)
        fa = ft @ a
        hx = alpha * a + (1 - alpha) * x
        hz = alpha * a + (1 - alpha) * z
        hf = alpha * fa + (1 - alpha) * f

        x_old, z_old, f_old = x, z, f
        x = proj_k(hx + ux - 2.0 / rho)
        z = ell.project(hz + uz)
        f = _soft(hf + uf, f_norm / rho)
        ux += hx - x
        uz += hz - z
        uf += hf - f

        if it % 10 and it != cfg.max_iters:
            continue
        primal = math.sqrt(np.sum((a - x) ** 2) + np.sum((a - z) ** 2) + np.sum((fa - f) ** 2))
        dual = rho * float(np.linalg.norm((x - x_old) + (z - z_old) + ft.T @ (f - f_old)))
        eps_pri = math.sqrt(n_rows) * cfg.tol_abs + cfg.tol_rel * max(
            math.sqrt(2 * (a @ a) + fa @ fa), math.sqrt(x @ x + z @ z + f @ f)
        )
        eps_dual = math.sqrt(e) * cfg.tol_abs + cfg.tol_rel * rho * float(np.linalg.norm(ux + uz + ft.T @ uf))
        if primal <= eps_pri and dual <= eps_dual:
            # the returned point must itself meet the commutator bound
            if float(np.linalg.norm(mc @ x)) <= cfg.epsilon + 0.5 * comm_tol:
                converged = True
                break
        if cfg.adaptive_rho and it % 50 == 0:
            ratio = (primal / eps_pri) / max(dual / eps_dual, 1e-300)
            rho_new = rho
            if ratio > 10.0:
                rho_new = min(rho * 2.0, 1e3)
            elif ratio < 0.1:
                rho_new = max(rho / 2.0, 1e-3)
            if rho_new != rho:
                scale = rho / rho_new
                ux *= scale
                uz *= scale
                uf *= scale
                rho = rho_new

    a_vec = x
    status = "solved" if converged else "max_iters"
    extra = {"rho": rho, "method": "admm"}
    if cfg.polish and cfg.epsilon == 0.0:
        polished = _polish_equality(x, mc, norm_row, cset.target(n))
        if polished is not None:
            obj_old = 2.0 * x.sum() + float(np.abs(f_rows @ x).sum())
            obj_new = 2.0 * polished.sum() + float(np.abs(f_rows @ polished).sum())
            if np.linalg.norm(mc @ polished) <= comm_tol and obj_new <= obj_old * (1 + 1e-4) + 1e-12:
                a_vec = polished
                extra["polished"] = True
                if not converged:
                    converged, status = True, "solved_polished"
    if not converged:
        log.warning("ADMM stopped after %d iterations (primal %.3g, dual %.3g)", it, primal, dual)
    return _report(a_vec, n, cm, groups, cfg.penalty, it, converged, float(primal), float(dual), status, extra)


def _norm_equality(n: int, cset: ConstraintSet, n_extra: int) -> tuple[np.ndarray, np.ndarray]:
    row = np.concatenate([normalization_row(n, cset), np.zeros(n_extra)])
    return row[None, :], np.array([cset.target(n)])


def min_commutator_residual(
    c: CovarianceEstimate | np.ndarray,
    cset: Optional[ConstraintSet] = None,
    tol: float = 1e-9,
) -> tuple[float, np.ndarray]:
    """Smallest ``||A C - C A||_F`` over valid adjacency matrices.

    Solved as the cone program ``min r`` subject to ``||Mc a|| <= r``,
    ``a >= 0`` and the normalization. Returns the residual and the
    minimizing parameter vector.
    """
    cset = cset or ConstraintSet()
    cm = c.c if isinstance(c, CovarianceEstimate) else np.asarray(c, dtype=float)
    n = cm.shape[0]
    if n < 2:
        raise InfeasibleProblemError("normalization is infeasible for a single node")
    mc = compressed_commutator(cm)
    e = mc.shape[1]
    scale = max(float(np.linalg.norm(mc, 2)), 1e-300)
    g = np.zeros((2 * e + 1, e + 1))
    g[:e, :e] = -np.eye(e)
    g[e, e] = -1.0
    g[e + 1 :, :e] = -mc / scale
    aeq, beq = _norm_equality(n, cset, 1)
    prog = ConeProgram(
        c=np.concatenate([np.zeros(e), [1.0]]), g=g, h=np.zeros(2 * e + 1),
        a=aeq, b=beq, n_lin=e, soc_dim=e + 1,
    )
    sol = solve_cone_program(prog, tol=tol)
    if sol.status not in ("optimal", "inaccurate"):
        raise RuntimeError(f"residual minimization did not converge ({sol.status})")
    a_vec = np.maximum(sol.x[:e], 0.0)
    a_vec *= cset.target(n) / float(normalization_row(n, cset) @ a_vec)
    return float(np.linalg.norm(mc @ a_vec)), a_vec


def _solve_ipm(c, groups, cfg, cset) -> SolveReport:
    """Interior point solve of the epsilon > 0 program.

    Variables are ``a`` and ``t >= |F a|`` for the fairness rows, giving the
    cone program ``min 2 sum(a) + sum(t)`` over the orthant
    ``(a, t - F a, t + F a)`` and the second-order cone
    ``(1, Mc a / epsilon)``.
    """
    cm, n, e, f_rows, mc = _problem_parts(c, groups, cfg, cset)
    eps = cfg.epsilon
    p = f_rows.shape[0]
    nx = e + p
    # rows are equilibrated: t_k = ||F_k|| t'_k, so |F_k a| / ||F_k|| <= t'_k
    f_norm = np.linalg.norm(f_rows, axis=1)
    f_unit = f_rows / f_norm[:, None] if p else f_rows
    g = np.zeros((e + 2 * p + 1 + e, nx))
    g[:e, :e] = -np.eye(e)
    if p:
        g[e : e + p, :e] = f_unit
        g[e : e + p, e:] = -np.eye(p)
        g[e + p : e + 2 * p, :e] = -f_unit
        g[e + p : e + 2 * p, e:] = -np.eye(p)
    n_lin = e + 2 * p
    g[n_lin + 1 :, :e] = -mc / eps
    h = np.zeros(g.shape[0])
    h[n_lin] = 1.0
    aeq, beq = _norm_equality(n, cset, p)
    prog = ConeProgram(
        c=np.concatenate([np.full(e, 2.0), f_norm]), g=g, h=h,
        a=aeq, b=beq, n_lin=n_lin, soc_dim=e + 1,
    )
    trace = [] if log.isEnabledFor(logging.DEBUG) else None
    sol = solve_cone_program(prog, tol=cfg.ipm_tol, max_iters=cfg.ipm_max_iters, trace=trace)
    for k, row in enumerate(trace or []):
        log.debug("ipm %d %s", k, " ".join(f"{key}={val:.3e}" for key, val in row.items()))
    extra = {"method": "ipm", "gap": sol.gap}
    if sol.status == "failed":
        delta, _ = min_commutator_residual(cm, cset)
        if delta > eps:
            raise InfeasibleProblemError(
                f"epsilon={eps:.6g} is below the smallest attainable commutator residual {delta:.6g}"
            )
    a_vec = np.maximum(sol.x[:e], 0.0)
    a_vec *= cset.target(n) / float(normalization_row(n, cset) @ a_vec)
    converged = sol.status in ("optimal", "inaccurate")
    if not converged:
        log.warning("interior point method ended with status %s", sol.status)
    return _report(
        a_vec, n, cm, groups, cfg.penalty, sol.iterations, converged,
        primal=sol.primal_residual, dual=sol.dual_residual,
        status="solved" if sol.status == "optimal" else sol.status, extra=extra,
    )


def solve_l0_bruteforce(
    c: CovarianceEstimate,
    groups: Optional[GroupAssignment],
    beta: float = 0.0,
    cset: Optional[ConstraintSet] = None,
    max_support: Optional[int] = None,
    penalty: Penalty | str = Penalty.DP,
    feas_tol: float = 1e-8,
) -> SolveReport:
    """Exact minimizer of ``||A||_0 + beta * gap(A)`` with ``A C = C A``.

    Supports are scanned by increasing size. A support is feasible when the
    commutator and normalization equations have a nonnegative solution on it
    (least squares if the restricted system has full column rank, a small LP
    otherwise). Ties go to (objective, size, gap, lexicographic support).
    """
    cset = cset or ConstraintSet()
    penalty = Penalty(penalty)
    cm = c.c if isinstance(c, CovarianceEstimate) else np.asarray(c, dtype=float)
    n = cm.shape[0]
    e = n * (n - 1) // 2
    if n < 2:
        raise InfeasibleProblemError("normalization is infeasible for a single node")
    if e > 20:
        raise ValueError(f"support enumeration over {e} parameters is not tractable (limit 20)")
    max_support = e if max_support is None else min(max_support, e)
    use_fair = beta > 0 and penalty is not Penalty.NONE and groups is not None
    vp = build_vectorized(cm, None, cset=cset)
    c_norm = max(float(np.linalg.norm(cm)), 1e-300)
    phi = vp.phi.copy()
    phi[:-1] /= c_norm
    b = vp.b
    f_rows = fairness_rows(groups, penalty) if use_fair else np.zeros((0, e))

    best = None  # (objective, size, fair, support, a_vec)
    examined = 0
    for k in range(0, max_support + 1):
        if best is not None and 2 * k > best[0] + 1e-12:
            break
        for supp in itertools.combinations(range(e), k):
            examined += 1
            a_vec = _feasible_on_support(phi, b, supp, f_rows, feas_tol)
            if a_vec is None:
                continue
            fair = float(np.abs(f_rows @ a_vec).sum())
            obj = 2 * k + (beta * fair if use_fair else 0.0)
            key = (obj, k, fair, supp)
            if best is None or key < best[:4]:
                best = (*key, a_vec)
        if best is not None and not use_fair:
            break
    if best is None:
        raise InfeasibleProblemError(f"no feasible support with at most {max_support} edges")
    return _report(
        best[4], n, cm, groups if use_fair else None, penalty if use_fair else Penalty.NONE,
        examined, True, status="optimal", extra={"support": best[3]},
    )


def _feasible_on_support(phi, b, supp, f_rows, tol):
    e = phi.shape[1]
    k = len(supp)
    if k == 0:
        return np.zeros(e) if np.linalg.norm(b) <= tol else None
    idx = list(supp)
    sub = phi[:, idx]
    sol, _, rank, _ = np.linalg.lstsq(sub, b, rcond=None)
    if rank == k:
        if np.linalg.norm(sub @ sol - b) > tol * (1 + np.linalg.norm(sol)):
            return None
        if sol.min() <= tol:
            return None
        out = np.zeros(e)
        out[idx] = sol
        return out
    # rank-deficient: LP over the face, minimizing the gap among feasible points
    nf = f_rows.shape[0]
    fs = f_rows[:, idx]
    # variables [a_S (k), t (nf)]: minimize sum t, -t <= F a <= t
    cost = np.concatenate([np.zeros(k), np.ones(nf)])
    a_ub = np.block([[fs, -np.eye(nf)], [-fs, -np.eye(nf)]]) if nf else None
    b_ub = np.zeros(2 * nf) if nf else None
    a_eq = np.hstack([sub, np.zeros((sub.shape[0], nf))])
    res = linprog(cost, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b, bounds=[(0, None)] * (k + nf), method="highs")
    if res.status != 0:
        return None
    sol = res.x[:k]
    if np.linalg.norm(sub @ sol - b) > tol * (1 + np.linalg.norm(sol)) * 10 or sol.min() <= tol:
        return None
    out = np.zeros(e)
    out[idx] = sol
    return out
