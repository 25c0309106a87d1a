"""Topological demographic-parity gaps of a (weighted) graph."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from fair_topo.graph_core import ArrayLike, DegenerateGroupError, GroupAssignment, as_array


@dataclass(frozen=True)
class BiasReport:
    delta_dp: float
    delta_dp_node: float
    edge_density: float
    # None when the graph has no edges
    normalized_bias: Optional[float]

    def to_dict(self) -> dict:
        return asdict(self)


def _require_groups(groups: GroupAssignment, n: int) -> None:
    if groups.n != n:
        raise ValueError(f"groups cover {groups.n} nodes, adjacency has {n}")
    if groups.g_count < 2:
        raise DegenerateGroupError("demographic parity needs at least two groups")


def group_quadratic_forms(a: ArrayLike, groups: GroupAssignment) -> np.ndarray:
    """G x G matrix of ``z_g^T A z_h``."""
    z = groups.indicator
    return z.T @ as_array(a) @ z


def delta_dp(a: ArrayLike, groups: GroupAssignment) -> float:
    """Groupwise DP gap.

    Sums, over ordered group pairs (g, h), the absolute difference between the
    within-g edge rate and the g-to-h edge rate.
    """
    w = as_array(a)
    _require_groups(groups, w.shape[0])
    sizes = groups.sizes
    if sizes.min() < 2:
        raise DegenerateGroupError(
            f"within-group rate undefined for groups of size < 2 (sizes {sizes.tolist()})"
        )
    q = group_quadratic_forms(w, groups)
    total = 0.0
    for g in range(groups.g_count):
        within = q[g, g] / (sizes[g] ** 2 - sizes[g])
        for h in range(groups.g_count):
            if h == g:
                continue
            total += abs(within - q[g, h] / (sizes[g] * sizes[h]))
    return float(total)


def build_B(groups: GroupAssignment) -> np.ndarray:
    """G x N contrast matrix: (G-1)/N_g on own-group columns, -1/N_h elsewhere."""
    if groups.g_count < 2:
        raise DegenerateGroupError("nodewise DP gap needs at least two groups")
    sizes = groups.sizes.astype(float)
    G = groups.g_count
    b = np.tile(-1.0 / sizes[groups.labels], (G, 1))
    own = groups.indicator.T.astype(bool)
    b[own] = ((G - 1) / sizes[:, None] * np.ones((1, groups.n)))[own]
    return b


def delta_dp_node(a: ArrayLike, groups: GroupAssignment) -> float:
    """Nodewise DP gap, the entrywise l1 norm of ``B @ A``."""
    w = as_array(a)
    _require_groups(groups, w.shape[0])
    ba = build_B(groups) @ w
    return float(np.abs(ba).sum())


def edge_density(a: ArrayLike) -> float:
    w = as_array(a)
    n = w.shape[0]
    if n < 2:
        return 0.0
    return float(w.sum() / (n * (n - 1)))


def bias_report(a: ArrayLike, groups: GroupAssignment) -> BiasReport:
    gap = delta_dp(a, groups)
    density = edge_density(a)
    normalized = gap / density if density > 0 else None
    return BiasReport(
        delta_dp=gap,
        delta_dp_node=delta_dp_node(a, groups),
        edge_density=density,
        normalized_bias=normalized if normalized is None or math.isfinite(normalized) else None,
    )
