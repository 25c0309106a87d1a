import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fair_topo.graph_core import AdjacencyMatrix
from fair_topo.signals import (
    CovarianceEstimate,
    FilterSpec,
    analytic_covariance,
    apply_filter,
    commutativity_residual,
    random_filter,
    sample_covariance,
    sample_signals,
    sampled_covariance,
)

from conftest import random_graph

PATH3 = AdjacencyMatrix.from_edges(3, [(0, 1), (1, 2)])


def test_filter_examples():
    np.testing.assert_array_equal(apply_filter(FilterSpec([1.0]), PATH3), np.eye(3))
    np.testing.assert_array_equal(apply_filter(FilterSpec([0.0, 1.0]), PATH3), PATH3.w)
    np.testing.assert_allclose(apply_filter(FilterSpec([0.5, 0.3]), PATH3), 0.5 * np.eye(3) + 0.3 * PATH3.w)
    with pytest.raises(ValueError):
        FilterSpec([])
    with pytest.raises(ValueError):
        FilterSpec([1.0, np.inf])


def test_analytic_covariance_examples():
    np.testing.assert_array_equal(analytic_covariance(FilterSpec([1.0]), PATH3).c, np.eye(3))
    np.testing.assert_allclose(analytic_covariance(FilterSpec([0.0, 1.0]), PATH3).c, PATH3.w @ PATH3.w)
    assert analytic_covariance(FilterSpec([1.0]), PATH3).m == 0


@pytest.mark.parametrize("order", range(6))
def test_analytic_covariance_commutes(order):
    rng = np.random.default_rng(order)
    s = random_graph(rng, 9)
    c = analytic_covariance(FilterSpec(rng.uniform(-1, 1, order + 1)), s).c
    assert np.linalg.norm(c @ s - s @ c) <= 1e-10 * np.linalg.norm(c) * np.linalg.norm(s)


def test_sample_signals_contract():
    spec = FilterSpec([1.0])
    x = sample_signals(spec, PATH3, 100_000, seed=3)
    np.testing.assert_allclose(sample_covariance(x).c, np.eye(3), atol=0.05)
    np.testing.assert_array_equal(x, sample_signals(spec, PATH3, 100_000, seed=3))
    assert sample_signals(spec, PATH3, 1, seed=0).shape == (3, 1)
    with pytest.raises(ValueError):
        sample_signals(spec, PATH3, 0, seed=0)


def test_sample_covariance_examples():
    c = sample_covariance(np.array([[1.0, -1.0], [1.0, 1.0]]))
    np.testing.assert_allclose(c.c, np.eye(2))
    assert c.m == 2
    x = np.array([[1.0], [2.0], [-1.0]])
    np.testing.assert_allclose(sample_covariance(x).c, x @ x.T)
    with pytest.raises(ValueError):
        sample_covariance(np.zeros((3, 0)))


@given(st.integers(0, 10_000), st.integers(1, 50))
def test_sample_covariance_psd(seed, m):
    x = np.random.default_rng(seed).normal(size=(6, m))
    c = sample_covariance(x).c
    assert np.linalg.eigvalsh(c)[0] >= -1e-10 * max(1.0, np.linalg.norm(c))


@pytest.mark.parametrize("m, chunk", [(1, 7), (2500, 300), (1000, 1000), (999, 1000)])
def test_streamed_covariance_matches_direct(m, chunk):
    rng = np.random.default_rng(5)
    s = random_graph(rng, 7)
    spec = random_filter(s, rng)
    direct = sample_covariance(sample_signals(spec, s, m, seed=11))
    streamed = sampled_covariance(spec, s, m, seed=11, chunk=chunk)
    assert streamed.m == direct.m == m
    np.testing.assert_allclose(streamed.c, direct.c, rtol=1e-12, atol=1e-12 * np.abs(direct.c).max())


def test_sample_covariance_concentrates():
    rng = np.random.default_rng(2)
    s = random_graph(rng, 6)
    spec = random_filter(s, rng)
    exact = analytic_covariance(spec, s).c
    est = sampled_covariance(spec, s, 100_000, seed=1).c
    assert np.abs(est - exact).max() <= 5 * np.abs(exact).max() * 100_000 ** -0.5


def test_random_filter_is_positive_definite():
    rng = np.random.default_rng(9)
    s = random_graph(rng, 10)
    for _ in range(10):
        h = apply_filter(random_filter(s, rng, margin=0.1), s)
        assert np.linalg.eigvalsh(h)[0] >= 0.1 - 1e-9


def test_covariance_validation():
    with pytest.raises(ValueError, match="symmetric"):
        CovarianceEstimate(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(ValueError, match="semidefinite"):
        CovarianceEstimate(np.diag([1.0, -1.0]))
    with pytest.raises(ValueError, match="square"):
        CovarianceEstimate(np.zeros((2, 3)))


def test_residual_examples():
    a = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert commutativity_residual(a, np.eye(2)) == 0.0
    assert commutativity_residual(a, a) == 0.0
    assert commutativity_residual(a, np.diag([1.0, 2.0])) == pytest.approx(np.sqrt(2), abs=1e-15)
    assert commutativity_residual(a, np.diag([1.0, 2.0]), normalized=True) == pytest.approx(
        np.sqrt(2) / np.sqrt(5), abs=1e-15
    )
    with pytest.raises(ValueError):
        commutativity_residual(a, np.eye(3))


@given(st.integers(0, 10_000), st.floats(-10, 10))
def test_residual_ignores_identity_shift(seed, alpha):
    rng = np.random.default_rng(seed)
    a = random_graph(rng, 6)
    m = rng.normal(size=(6, 6))
    c = m @ m.T
    assert commutativity_residual(a, c + alpha * np.eye(6)) == pytest.approx(
        commutativity_residual(a, c), abs=1e-10
    )
