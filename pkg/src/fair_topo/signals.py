"""Stationary graph signals, covariance estimates and the commutator residual."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from fair_topo.graph_core import ArrayLike, as_array
from fair_topo.seeding import rng_for


@dataclass(frozen=True)
class FilterSpec:
    """Graph filter ``H = sum_k coeffs[k] S^k``."""

    coeffs: tuple

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if not coeffs:
            raise ValueError("a filter needs at least one coefficient")
        if not all(np.isfinite(coeffs)):
            raise ValueError("filter coefficients must be finite")
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1


@dataclass(frozen=True)
class CovarianceEstimate:
    c: np.ndarray
    # 0 marks an exact (analytic) covariance
    m: int = 0

    def __post_init__(self):
        c = np.array(self.c, dtype=float, copy=True)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"covariance must be square, got {c.shape}")
        scale = max(np.abs(c).max(initial=0.0), 1e-300)
        if np.abs(c - c.T).max(initial=0.0) > 1e-12 * max(scale, 1.0):
            raise ValueError("covariance is not symmetric")
        c = 0.5 * (c + c.T)
        if c.size and np.linalg.eigvalsh(c)[0] < -1e-9 * np.linalg.norm(c):
            raise ValueError("covariance is not positive semidefinite")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.c.shape[0]


def apply_filter(spec: FilterSpec, s: ArrayLike) -> np.ndarray:
    s = as_array(s)
    eye = np.eye(s.shape[0])
    h = spec.coeffs[-1] * eye
    for coeff in reversed(spec.coeffs[:-1]):
        h = h @ s + coeff * eye
    return h


def analytic_covariance(spec: FilterSpec, s: ArrayLike) -> CovarianceEstimate:
    h = apply_filter(spec, s)
    c = h @ h.T
    return CovarianceEstimate(0.5 * (c + c.T), m=0)


def random_filter(s: ArrayLike, rng: np.random.Generator, order: int = 3, margin: float = 0.1) -> FilterSpec:
    """Random polynomial filter, shifted so that H is positive definite.

    Coefficients are uniform on [-1, 1]; the constant term is then raised by
    ``|lambda_min(H)| + margin``.
    """
    coeffs = rng.uniform(-1.0, 1.0, size=order + 1)
    lam_min = np.linalg.eigvalsh(apply_filter(FilterSpec(coeffs), s))[0]
    coeffs[0] += abs(lam_min) + margin
    return FilterSpec(coeffs)


def sample_signals(spec: FilterSpec, s: ArrayLike, m: int, seed: int) -> np.ndarray:
    """N x m matrix of filtered white Gaussian noise."""
    if m < 1:
        raise ValueError("need at least one sample")
    h = apply_filter(spec, s)
    # drawn sample-major so that chunked draws reproduce the same stream
    w = rng_for(seed).standard_normal((m, h.shape[0])).T
    return h @ w


def sampled_covariance(spec: FilterSpec, s: ArrayLike, m: int, seed: int, chunk: int = 100_000) -> CovarianceEstimate:
    """Sample covariance of ``sample_signals(spec, s, m, seed)`` in bounded memory.

    Uses the same noise draws, accumulates the white-noise Gram matrix chunk
    by chunk and filters it once: ``H (W W^T / m) H^T``.
    """
    if m < 1:
        raise ValueError("need at least one sample")
    h = apply_filter(spec, s)
    n = h.shape[0]
    rng = rng_for(seed)
    gram = np.zeros((n, n))
    done = 0
    while done < m:
        k = min(chunk, m - done)
        w = rng.standard_normal((k, n))
        gram += w.T @ w
        done += k
    c = h @ (gram / m) @ h.T
    return CovarianceEstimate(0.5 * (c + c.T), m=m)


def sample_covariance(x: np.ndarray) -> CovarianceEstimate:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] == 0 or x.shape[0] == 0:
        raise ValueError("need a non-empty N x M observation matrix")
    m = x.shape[1]
    c = x @ x.T / m
    return CovarianceEstimate(0.5 * (c + c.T), m=m)


def commutativity_residual(a: ArrayLike, c: CovarianceEstimate | np.ndarray, normalized: bool = False) -> float:
    w = as_array(a)
    cm = c.c if isinstance(c, CovarianceEstimate) else np.asarray(c, dtype=float)
    if w.shape != cm.shape:
        raise ValueError(f"dimension mismatch: {w.shape} vs {cm.shape}")
    r = float(np.linalg.norm(w @ cm - cm @ w))
    if normalized:
        r /= float(np.linalg.norm(cm))
    return r
