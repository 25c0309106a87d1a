"""Two-group synthetic graphs with a controlled share of across-group edges."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from fair_topo.graph_core import AdjacencyMatrix, GroupAssignment
from fair_topo.seeding import rng_for


class GeneratorError(RuntimeError):
    pass


@dataclass(frozen=True)
class RewireSpec:
    n: int = 30
    g_count: int = 2
    p: float = 0.3
    across_ratio: float = 0.0
    seed: int = 0
    max_connect_tries: int = 1000
    max_rewire_tries: int = 1000

    def __post_init__(self):
        if self.g_count != 2:
            raise ValueError("the rewiring generator builds exactly two groups")
        if self.n % 2:
            raise ValueError("equal-sized groups need an even node count")
        if not 0.0 <= self.across_ratio <= 1.0:
            raise ValueError("across_ratio must lie in [0, 1]")
        if not 0.0 < self.p <= 1.0:
            raise ValueError("p must lie in (0, 1]")


def _connected_er(k: int, p: float, rng: np.random.Generator, tries: int) -> np.ndarray:
    iu, ju = np.triu_indices(k, 1)
    for _ in range(tries):
        keep = rng.random(iu.size) < p
        w = np.zeros((k, k))
        w[iu[keep], ju[keep]] = 1.0
        w += w.T
        if k == 1 or connected_components(w, directed=False)[0] == 1:
            return w
    raise GeneratorError(f"no connected G({k}, {p}) graph after {tries} draws")


def base_two_group_graph(spec: RewireSpec) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint union of one connected Erdos-Renyi graph per group."""
    rng = rng_for(spec.seed, 0)
    half = spec.n // 2
    w = np.zeros((spec.n, spec.n))
    w[:half, :half] = _connected_er(half, spec.p, rng, spec.max_connect_tries)
    w[half:, half:] = _connected_er(half, spec.p, rng, spec.max_connect_tries)
    labels = np.repeat([0, 1], half)
    return w, labels


def generate_two_group_graph(spec: RewireSpec) -> tuple[AdjacencyMatrix, GroupAssignment]:
    """Rewire ``ceil(across_ratio * |E|)`` within-group edges across groups.

    Each chosen edge keeps one endpoint (picked uniformly) and moves the other
    to a uniform node of the opposite group; moves onto an existing edge are
    redrawn. The rewiring stream is shared across ratios for a given seed, so
    a larger ratio rewires a superset of the edges of a smaller one.
    """
    w, labels = base_two_group_graph(spec)
    iu, ju = np.nonzero(np.triu(w, 1))
    n_edges = iu.size
    n_rewire = math.ceil(spec.across_ratio * n_edges - 1e-12)
    rng = rng_for(spec.seed, 1)
    order = rng.permutation(n_edges)
    groups_nodes = [np.flatnonzero(labels == g) for g in range(2)]
    for idx in order[:n_rewire]:
        u, v = int(iu[idx]), int(ju[idx])
        for _ in range(spec.max_rewire_tries):
            keep, move = (u, v) if rng.random() < 0.5 else (v, u)
            other = groups_nodes[1 - labels[keep]]
            target = int(other[rng.integers(other.size)])
            if w[keep, target] == 0:
                break
        else:
            raise GeneratorError(f"could not rewire edge ({u}, {v}) without duplicates")
        w[u, v] = w[v, u] = 0.0
        w[keep, target] = w[target, keep] = 1.0
    return AdjacencyMatrix(w), GroupAssignment(labels, 2)


class GroupMode(str, enum.Enum):
    UNIFORM = "uniform"
    BY_COMMUNITY = "community"


def assign_groups(
    n: int,
    g_count: int,
    mode: GroupMode | str = GroupMode.UNIFORM,
    communities: Optional[Sequence[int] | GroupAssignment] = None,
    seed: int = 0,
) -> GroupAssignment:
    """Balanced random labels, or labels copied from a community partition."""
    mode = GroupMode(mode)
    if mode is GroupMode.BY_COMMUNITY:
        if communities is None:
            raise ValueError("community mode needs a partition")
        if isinstance(communities, GroupAssignment):
            communities = communities.labels
        labels = np.asarray(communities, dtype=np.int64)
        if labels.size != n or np.unique(labels).size != g_count:
            raise ValueError(f"partition does not have {g_count} blocks over {n} nodes")
        return GroupAssignment(labels, g_count)
    rng = rng_for(seed, 2)
    labels = rng.permutation(np.arange(n) % g_count)
    return GroupAssignment(labels, g_count)


def across_edge_count(a, groups: GroupAssignment) -> int:
    w = a.w if isinstance(a, AdjacencyMatrix) else np.asarray(a)
    lab = groups.labels
    mask = lab[:, None] != lab[None, :]
    return int(np.count_nonzero(np.triu(w * mask, 1)))
