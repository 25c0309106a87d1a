"""Sufficient conditions for the l1 relaxation to return the l0 solution.

Condition 1: the constraint columns on the support of the sparse solution
are linearly independent. Condition 2: for some psi > 0,

    || Psi_Jc (psi^-2 Phi^T Phi + Psi_Jc^T Psi_Jc)^-1 Psi_J^T ||_inf < 1

with J the support of ``Psi a`` and ``||.||_inf`` the max absolute row sum.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from fair_topo.graph_core import ArrayLike, as_array
from fair_topo.vectorize import VectorizedProblem, vec_upper

DEFAULT_PSI_GRID = tuple(np.logspace(-3, 3, 61))


@dataclass(frozen=True)
class Condition2:
    min_norm: float
    holds: bool
    psi_star: float
    skipped: tuple = ()
    indeterminate: bool = False


@dataclass(frozen=True)
class CertificateReport:
    support_I: tuple
    support_J: tuple
    cond1_full_rank: bool
    cond2_min_norm: float
    cond2_holds: bool
    psi_star: float
    vacuous: bool = False
    cond2_indeterminate: bool = False
    skipped_psi: tuple = field(default=(), repr=False)

    @property
    def certified(self) -> bool:
        return self.cond1_full_rank and self.cond2_holds and not self.vacuous

    def to_dict(self) -> dict:
        d = asdict(self)
        d["support_I"] = list(self.support_I)
        d["support_J"] = list(self.support_J)
        d["skipped_psi"] = list(self.skipped_psi)
        d["certified"] = self.certified
        for key in ("cond2_min_norm", "psi_star"):
            if not math.isfinite(d[key]):
                d[key] = None
        return d


def _phi(vp) -> np.ndarray:
    return vp.phi if isinstance(vp, VectorizedProblem) else np.asarray(vp, dtype=float)


def _psi(vp) -> np.ndarray:
    return vp.psi if isinstance(vp, VectorizedProblem) else np.asarray(vp, dtype=float)


def check_condition1(vp: VectorizedProblem | np.ndarray, support_I: Sequence[int]) -> bool:
    """True iff the columns of phi indexed by ``support_I`` are independent."""
    phi = _phi(vp)
    idx = list(support_I)
    if not idx:
        return True
    if min(idx) < 0 or max(idx) >= phi.shape[1]:
        raise IndexError("support index out of range")
    sub = phi[:, idx]
    sv = np.linalg.svd(sub, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return False
    thresh = max(phi.shape) * sv[0] * 1e-12
    return int(np.sum(sv > thresh)) == len(idx)


def check_condition2(
    vp: VectorizedProblem,
    support_J: Sequence[int],
    psi_grid: Sequence[float] = DEFAULT_PSI_GRID,
    phi: Optional[np.ndarray] = None,
    cond_limit: float = 1e12,
) -> Condition2:
    psi_mat = _psi(vp)
    phi = _phi(vp) if phi is None else phi
    grid = [float(p) for p in psi_grid]
    if not grid or min(grid) <= 0:
        raise ValueError("psi grid must be non-empty and strictly positive")
    j = np.zeros(psi_mat.shape[0], dtype=bool)
    j[list(support_J)] = True
    psi_j, psi_jc = psi_mat[j], psi_mat[~j]
    if psi_jc.shape[0] == 0:
        return Condition2(0.0, True, grid[0])
    gram_phi = phi.T @ phi
    gram_jc = psi_jc.T @ psi_jc
    best, best_psi, skipped = math.inf, math.nan, []
    for p in grid:
        inner = gram_phi / p**2 + gram_jc
        if np.linalg.cond(inner) > cond_limit:
            skipped.append(p)
            continue
        prod = psi_jc @ np.linalg.solve(inner, psi_j.T)
        norm = float(np.abs(prod).sum(axis=1).max(initial=0.0))
        if norm < best:
            best, best_psi = norm, p
    if len(skipped) == len(grid):
        return Condition2(math.inf, False, math.nan, tuple(skipped), indeterminate=True)
    return Condition2(best, best < 1.0, best_psi, tuple(skipped))


def certify(
    vp: VectorizedProblem,
    a_hat: ArrayLike,
    zero_tol: Optional[float] = None,
    psi_grid: Sequence[float] = DEFAULT_PSI_GRID,
) -> CertificateReport:
    """Check both conditions for the candidate sparse solution ``a_hat``."""
    w = as_array(a_hat)
    if w.shape != (vp.n, vp.n):
        raise ValueError(f"candidate has shape {w.shape}, problem has n={vp.n}")
    v = vec_upper(w)
    if zero_tol is None:
        zero_tol = 1e-6 * float(np.abs(v).max(initial=0.0))
    support_I = tuple(int(k) for k in np.flatnonzero(np.abs(v) > zero_tol))
    pv = vp.psi @ v
    support_J = tuple(int(k) for k in np.flatnonzero(np.abs(pv) > zero_tol))
    if not support_I:
        return CertificateReport((), support_J, True, math.nan, False, math.nan, vacuous=True)
    c1 = check_condition1(vp, support_I)
    c2 = check_condition2(vp, support_J, psi_grid)
    return CertificateReport(
        support_I=support_I,
        support_J=support_J,
        cond1_full_rank=c1,
        cond2_min_norm=c2.min_norm,
        cond2_holds=c2.holds,
        psi_star=c2.psi_star,
        cond2_indeterminate=c2.indeterminate,
        skipped_psi=c2.skipped,
    )
