"""Graph, group and feasible-set types shared across the package."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np


class DegenerateGroupError(ValueError):
    """A group is too small (or there are too few groups) for a metric."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class AdjacencyMatrix:
    """Symmetric, hollow, nonnegative weight matrix; doubles as the GSO."""

    w: np.ndarray
    atol: float = field(default=1e-9, repr=False, compare=False)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"adjacency must be square, got shape {w.shape}")
        scale = max(1.0, float(np.abs(w).max(initial=0.0)))
        tol = self.atol * scale
        if not np.all(np.isfinite(w)):
            raise ValueError("adjacency has non-finite entries")
        if np.abs(w - w.T).max(initial=0.0) > tol:
            raise ValueError("adjacency is not symmetric")
        if np.abs(np.diag(w)).max(initial=0.0) > tol:
            raise ValueError("adjacency has nonzero diagonal")
        if w.min(initial=0.0) < -tol:
            raise ValueError("adjacency has negative entries")
        object.__setattr__(self, "w", _frozen(w))

    @property
    def n(self) -> int:
        return self.w.shape[0]

    @classmethod
    def from_edges(cls, n: int, edges, weight: float = 1.0) -> "AdjacencyMatrix":
        w = np.zeros((n, n))
        for i, j in edges:
            w[i, j] = w[j, i] = weight
        return cls(w)


@dataclass(frozen=True)
class GroupAssignment:
    """Partition of ``n`` nodes into ``g_count`` groups with dense ids."""

    labels: np.ndarray
    g_count: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.round(labels)):
                raise ValueError("labels must be integers")
        labels = labels.astype(np.int64)
        if self.g_count < 1:
            raise ValueError("g_count must be positive")
        if labels.size and (labels.min() < 0 or labels.max() >= self.g_count):
            raise ValueError(f"labels must lie in [0, {self.g_count})")
        counts = np.bincount(labels, minlength=self.g_count)
        empty = np.flatnonzero(counts == 0)
        if empty.size:
            raise ValueError(f"groups {empty.tolist()} have no members")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> "GroupAssignment":
        labels = np.asarray(labels, dtype=np.int64)
        return cls(labels, int(labels.max()) + 1)

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.g_count)

    @property
    def indicator(self) -> np.ndarray:
        return indicator_matrix(self)


class Normalization(str, enum.Enum):
    FIRST_ROW_SUM_1 = "first_row_sum_1"
    TOTAL_SUM_N = "total_sum_n"


@dataclass(frozen=True)
class ConstraintSet:
    """Valid nontrivial adjacency matrices.

    Symmetry, zero diagonal and nonnegativity are always imposed; the
    normalization rules out the all-zero matrix.
    """

    normalization: Normalization = Normalization.FIRST_ROW_SUM_1

    def target(self, n: int) -> float:
        """Required value of the normalized sum."""
        return 1.0 if self.normalization is Normalization.FIRST_ROW_SUM_1 else float(n)

    def normalized_sum(self, w: np.ndarray) -> float:
        w = np.asarray(w)
        if self.normalization is Normalization.FIRST_ROW_SUM_1:
            return float(w[0].sum())
        return float(w.sum())

    def contains(self, w: np.ndarray, tol: float = 1e-9) -> bool:
        w = np.asarray(w, dtype=float)
        scale = max(1.0, float(np.abs(w).max(initial=0.0)))
        return bool(
            np.abs(w - w.T).max(initial=0.0) <= tol * scale
            and np.abs(np.diag(w)).max(initial=0.0) <= tol * scale
            and w.min(initial=0.0) >= -tol * scale
            and abs(self.normalized_sum(w) - self.target(w.shape[0])) <= tol * max(1.0, self.target(w.shape[0]))
        )

    def rescale(self, w: np.ndarray) -> np.ndarray:
        """Positively rescale ``w`` so it meets the normalization."""
        s = self.normalized_sum(w)
        if s <= 0:
            raise ValueError("cannot normalize: normalized sum is not positive")
        return np.asarray(w, dtype=float) * (self.target(np.shape(w)[0]) / s)


ArrayLike = Union[AdjacencyMatrix, np.ndarray]


def as_array(a: ArrayLike) -> np.ndarray:
    return a.w if isinstance(a, AdjacencyMatrix) else np.asarray(a, dtype=float)


def indicator_matrix(groups: GroupAssignment) -> np.ndarray:
    """Binary N x G matrix with ``Z[i, g] = 1`` iff node i is in group g."""
    z = np.zeros((groups.n, groups.g_count))
    z[np.arange(groups.n), groups.labels] = 1.0
    return z


def project_to_constraint_set(m: ArrayLike, c: ConstraintSet | None = None) -> AdjacencyMatrix:
    """Symmetrize, zero the diagonal and clamp at zero.

    The normalization in ``c`` is deliberately not applied; the solver keeps it
    as an equality constraint.
    """
    m = as_array(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    out = 0.5 * (m + m.T)
    np.fill_diagonal(out, 0.0)
    return AdjacencyMatrix(np.maximum(out, 0.0))
