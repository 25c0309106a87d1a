"""Vectorized form of the fair inference program.

The symmetric hollow adjacency is parameterized by its strict upper triangle
``a`` (pairs ``i < j`` in lexicographic order). The program becomes

    minimize ||psi @ a||_1  subject to  phi @ a = b

where ``psi`` stacks the sparsity rows and the beta-weighted fairness rows and
``phi`` stacks the commutator map ``a -> vec(A C - C A)`` (column-major vec)
and the normalization row.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from fair_topo.fairness import build_B
from fair_topo.graph_core import (
    ArrayLike,
    ConstraintSet,
    DegenerateGroupError,
    GroupAssignment,
    Normalization,
    as_array,
)
from fair_topo.signals import CovarianceEstimate


class Penalty(str, enum.Enum):
    NONE = "none"
    DP = "dp"
    DP_NODE = "node"


@lru_cache(maxsize=64)
def _pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    iu, ju = np.triu_indices(n, k=1)
    iu.setflags(write=False)
    ju.setflags(write=False)
    return iu, ju


def upper_pairs(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Row and column indices of the free parameters, in vector order."""
    return _pairs(n)


def pair_index(n: int) -> np.ndarray:
    """N x N map from (i, j) to the parameter position; -1 on the diagonal."""
    iu, ju = _pairs(n)
    idx = -np.ones((n, n), dtype=np.int64)
    k = np.arange(iu.size)
    idx[iu, ju] = k
    idx[ju, iu] = k
    return idx


def vec_upper(a: ArrayLike) -> np.ndarray:
    w = as_array(a)
    iu, ju = _pairs(w.shape[0])
    return w[iu, ju].copy()


def unvec_upper(v: np.ndarray, n: int | None = None) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if n is None:
        n = int(round((1 + np.sqrt(1 + 8 * v.size)) / 2))
    iu, ju = _pairs(n)
    if v.size != iu.size:
        raise ValueError(f"expected {iu.size} parameters for n={n}, got {v.size}")
    w = np.zeros((n, n))
    w[iu, ju] = v
    w[ju, iu] = v
    return w


def commutator_operator(c: np.ndarray) -> np.ndarray:
    """N^2 x E matrix of ``a -> vec(A C - C A)`` with column-major vec."""
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    iu, ju = _pairs(n)
    e = iu.size
    # (A C - C A)[p, q] for A = e_i e_j^T + e_j e_i^T
    out = np.zeros((n, n, e))
    k = np.arange(e)
    # A C: row i gets C[j, :], row j gets C[i, :]
    out[iu, :, k] += c[ju, :]
    out[ju, :, k] += c[iu, :]
    # C A: column j gets C[:, i], column i gets C[:, j]
    out[:, ju, k] -= c[:, iu]
    out[:, iu, k] -= c[:, ju]
    # column-major vec: index q * n + p
    return out.transpose(1, 0, 2).reshape(n * n, e)


def compressed_commutator(c: np.ndarray) -> np.ndarray:
    """E x E operator with the same Euclidean norm as the full commutator map.

    ``A C - C A`` is antisymmetric for symmetric A and C, so the strict upper
    triangle scaled by sqrt(2) carries all of its Frobenius norm.
    """
    c = np.asarray(c, dtype=float)
    n = c.shape[0]
    iu, ju = _pairs(n)
    full = commutator_operator(c)
    rows = ju * n + iu  # column-major position of (iu, ju)
    return np.sqrt(2.0) * full[rows]


def normalization_row(n: int, cset: ConstraintSet) -> np.ndarray:
    iu, _ = _pairs(n)
    if cset.normalization is Normalization.FIRST_ROW_SUM_1:
        return (iu == 0).astype(float)
    # sum over all entries counts each pair twice
    return 2.0 * np.ones(iu.size)


def dp_rows(groups: GroupAssignment) -> np.ndarray:
    """One row per ordered group pair (g, h), h != g, g-major."""
    sizes = groups.sizes.astype(float)
    if sizes.min() < 2:
        raise DegenerateGroupError(
            f"within-group rate undefined for groups of size < 2 (sizes {sizes.astype(int).tolist()})"
        )
    iu, ju = _pairs(groups.n)
    li, lj = groups.labels[iu], groups.labels[ju]
    G = groups.g_count
    rows = []
    for g in range(G):
        within = ((li == g) & (lj == g)) * (2.0 / (sizes[g] ** 2 - sizes[g]))
        for h in range(G):
            if h == g:
                continue
            across = (((li == g) & (lj == h)) | ((li == h) & (lj == g))) / (sizes[g] * sizes[h])
            rows.append(within - across)
    return np.array(rows)


def dp_node_rows(groups: GroupAssignment) -> np.ndarray:
    """One row per (g, i), g-major, giving ``(B A)[g, i]``."""
    b = build_B(groups)
    n = groups.n
    iu, ju = _pairs(n)
    G = groups.g_count
    rows = np.zeros((G, n, iu.size))
    k = np.arange(iu.size)
    # pair (p, q) adds B[g, p] to entry (g, q) and B[g, q] to entry (g, p)
    rows[:, ju, k] += b[:, iu]
    rows[:, iu, k] += b[:, ju]
    return rows.reshape(G * n, iu.size)


def fairness_rows(groups: GroupAssignment, penalty: Penalty) -> np.ndarray:
    penalty = Penalty(penalty)
    if penalty is Penalty.DP:
        if groups.g_count < 2:
            raise DegenerateGroupError("demographic parity needs at least two groups")
        return dp_rows(groups)
    if penalty is Penalty.DP_NODE:
        return dp_node_rows(groups)
    return np.zeros((0, groups.n * (groups.n - 1) // 2))


@dataclass(frozen=True)
class VectorizedProblem:
    n: int
    psi: np.ndarray
    phi: np.ndarray
    b: np.ndarray
    # rows of psi that are sparsity rows; the rest are fairness rows
    n_sparsity_rows: int
    penalty: Penalty
    beta: float

    @property
    def e(self) -> int:
        return self.psi.shape[1]

    @property
    def index_map(self) -> tuple[np.ndarray, np.ndarray]:
        return upper_pairs(self.n)

    @property
    def psi_fair(self) -> np.ndarray:
        return self.psi[self.n_sparsity_rows:]

    def objective(self, a_vec: np.ndarray) -> float:
        return float(np.abs(self.psi @ a_vec).sum())


def build_vectorized(
    c: CovarianceEstimate | np.ndarray,
    groups: GroupAssignment | None,
    beta: float = 0.0,
    penalty: Penalty | str = Penalty.NONE,
    cset: ConstraintSet | None = None,
    include_commutator: bool = True,
) -> VectorizedProblem:
    """Assemble (psi, phi, b).

    With ``include_commutator=False`` phi holds only the normalization row, for
    programs whose commutator constraint is an inequality.
    """
    cset = cset or ConstraintSet()
    penalty = Penalty(penalty)
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    cm = c.c if isinstance(c, CovarianceEstimate) else np.asarray(c, dtype=float)
    n = cm.shape[0]
    e = n * (n - 1) // 2
    if groups is not None and groups.n != n:
        raise ValueError(f"groups cover {groups.n} nodes, covariance has {n}")
    sparsity = 2.0 * np.eye(e)
    if penalty is Penalty.NONE:
        psi = sparsity
    else:
        if groups is None:
            raise ValueError("a fairness penalty needs group labels")
        psi = np.vstack([sparsity, beta * fairness_rows(groups, penalty)])
    norm_row = normalization_row(n, cset)[None, :]
    if include_commutator:
        phi = np.vstack([commutator_operator(cm), norm_row])
    else:
        phi = norm_row
    b = np.zeros(phi.shape[0])
    b[-1] = cset.target(n)
    return VectorizedProblem(
        n=n, psi=psi, phi=phi, b=b, n_sparsity_rows=e, penalty=penalty, beta=float(beta)
    )
