"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line in ``conftest.CRITERIA``; the lines are
printed in the terminal summary. Thresholds are the stated ones; nothing
here is relaxed to make a criterion pass.
"""

import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

import conftest
from conftest import SOLVE_LOG, _check_report, poly_covariance, random_graph
from fair_topo.certify import certify
from fair_topo.cli import main as cli_main
from fair_topo.experiments import (
    EdgeRatioConfig,
    GroupLabelConfig,
    Method,
    SenateConfig,
    estimation_error,
    run_edge_ratio_sweep,
    run_group_label_study,
    run_senate_sweep,
)
from fair_topo.fairness import delta_dp, delta_dp_node
from fair_topo.graph_core import AdjacencyMatrix, ConstraintSet, GroupAssignment
from fair_topo.ingest import export_dataset, ingest_rollcalls, write_surrogate_voteview
from fair_topo.seeding import rng_for
from fair_topo.signals import CovarianceEstimate
from fair_topo.solver import SolveConfig, select_epsilon, solve_convex, solve_l0_bruteforce
from fair_topo.synth import RewireSpec, generate_two_group_graph
from fair_topo.vectorize import Penalty, build_vectorized, vec_upper

BOOTSTRAP_DRAWS = 10_000


def record(num: int, ok: bool, detail: str) -> None:
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'} - {detail}"
    conftest.CRITERIA[num] = line
    print(line)


def test_criterion_1_metric_exactness():
    t0 = time.perf_counter()
    z = GroupAssignment(np.array([0, 0, 1, 1]), 2)
    within = AdjacencyMatrix.from_edges(4, [(0, 1), (2, 3)])
    k4 = AdjacencyMatrix(np.ones((4, 4)) - np.eye(4))
    got = (delta_dp(within, z), delta_dp_node(within, z), delta_dp(k4, z), delta_dp_node(k4, z))
    want = (2.0, 4.0, 0.0, 4.0)
    elapsed = time.perf_counter() - t0
    ok = all(abs(g - w) <= 1e-12 for g, w in zip(got, want)) and elapsed < 1.0
    record(1, ok, f"values {got} vs {want}, {elapsed * 1e3:.1f} ms")
    assert ok


def test_criterion_2_penalty_metric_consistency():
    rng = rng_for(2024, 2)
    worst = 0.0
    for _ in range(100):
        g_count = int(rng.integers(2, 4))
        n = int(rng.integers(2 * g_count, 11))
        labels = rng.permutation(np.arange(n) % g_count)
        z = GroupAssignment(labels, g_count)
        w = np.triu(rng.random((n, n)) * (rng.random((n, n)) < 0.6), 1)
        w = w + w.T
        beta = float(rng.uniform(0, 1000))
        v = vec_upper(w)
        c = np.eye(n)
        l1 = np.abs(w).sum()
        for pen, gap in ((Penalty.DP, delta_dp(w, z)), (Penalty.DP_NODE, delta_dp_node(w, z))):
            vp = build_vectorized(c, z, beta, pen)
            diff = abs(np.abs(vp.psi @ v).sum() - (l1 + beta * gap))
            worst = max(worst, diff)
    ok = worst <= 1e-10
    record(2, ok, f"200 evaluations, max |diff| = {worst:.2e} (tol 1e-10)")
    assert ok


def test_criterion_3_exact_recovery_with_certificate():
    t0 = time.perf_counter()
    certified, tried, mismatches = 0, 0, []
    k = 0
    while certified < 20 and tried < 300:
        rng = rng_for(11, k)
        n = (4, 5, 6)[k % 3]
        k += 1
        w = random_graph(rng, n)
        c = poly_covariance(w, alpha=float(rng.uniform(0.5, 2)), gamma=float(rng.uniform(0.2, 1)))
        vp = build_vectorized(c, None)
        truth = ConstraintSet().rescale(w)
        tried += 1
        if not certify(vp, truth).certified:
            continue
        certified += 1
        convex = solve_convex(c, None, SolveConfig())
        l0 = solve_l0_bruteforce(c, None)
        err = estimation_error(w, convex.a_hat)
        if convex.support != l0.support or err >= 1e-6:
            mismatches.append((k - 1, convex.support, l0.support, err))
    elapsed = time.perf_counter() - t0
    ok = certified >= 20 and not mismatches and elapsed < 300
    record(3, ok, f"{certified} certified of {tried} drawn, {len(mismatches)} mismatches, {elapsed:.1f} s")
    assert ok, mismatches


@pytest.mark.slow
def test_criterion_4_edge_ratio_trends():
    t0 = time.perf_counter()
    table = run_edge_ratio_sweep(EdgeRatioConfig())
    elapsed = time.perf_counter() - t0
    rows = {r[0]: r for r in table.rows}
    ratios = sorted(rows)
    true_bias = [rows[r][1] for r in ratios]
    a_ok = ratios[int(np.argmin(true_bias))] == 0.5
    b_ok = all(rows[r][3] <= rows[r][2] and rows[r][4] <= rows[r][2] for r in ratios)
    _, _, _, _, _, f_nti, f_dp, f_nw = rows[0.5]
    c_ok = abs(f_dp - f_nti) < 0.3 * abs(f_nw - f_nti)
    unconv = sum(sum(c[1:]) for c in table.counts)
    ok = a_ok and b_ok and c_ok and elapsed < 1800
    record(
        4, ok,
        f"(a) argmin Bias_True = {ratios[int(np.argmin(true_bias))]} {a_ok}; (b) {b_ok}; "
        f"(c) |{f_dp:.4f}-{f_nti:.4f}| vs 0.3*|{f_nw:.4f}-{f_nti:.4f}| {c_ok}; "
        f"{unconv} unconverged; {elapsed / 60:.1f} min",
    )
    for r in table.rows:
        print("  " + ", ".join(f"{v:.4f}" for v in r))
    assert ok


def _paired(results, labels, method, beta):
    sub = {r.trial: r for r in results if r.setting == labels and r.method is method and r.beta == beta}
    return sub


def _bootstrap_confidence(diff: np.ndarray, rng: np.random.Generator) -> float:
    """Share of paired bootstrap resamples whose mean difference is positive."""
    idx = rng.integers(0, diff.size, size=(BOOTSTRAP_DRAWS, diff.size))
    return float(np.mean(diff[idx].mean(axis=1) > 0))


@pytest.mark.slow
def test_criterion_5_group_label_trends():
    cfg = GroupLabelConfig()
    table = run_group_label_study(cfg)
    res = table.trials
    rng = rng_for(5, 5)
    checks = []

    def trend(name, lo, hi, field):
        # claims mean(hi) > mean(lo), paired over trials converged in both
        common = sorted(set(lo) & set(hi))
        d = np.array([getattr(hi[t], field) - getattr(lo[t], field) for t in common])
        conf = _bootstrap_confidence(d, rng)
        ok = d.mean() > 0 and conf >= 0.95
        checks.append((name, ok, d.mean(), conf))

    none_u = _paired(res, "unfair", Method.NONE, 0.0)
    for m in (Method.DP, Method.DP_NODE):
        b100 = _paired(res, "unfair", m, 100.0)
        b1000 = _paired(res, "unfair", m, 1000.0)
        # bias falls: lower minus higher beta is positive
        trend(f"unfair {m.value} bias None>100", b100, none_u, "bias")
        trend(f"unfair {m.value} bias 100>1000", b1000, b100, "bias")
        trend(f"unfair {m.value} error None<100", none_u, b100, "error")
        trend(f"unfair {m.value} error 100<1000", b100, b1000, "error")
    trend(
        "fair beta=1000 DP_node error > DP error",
        _paired(res, "fair", Method.DP, 1000.0), _paired(res, "fair", Method.DP_NODE, 1000.0), "error",
    )
    ok = all(c[1] for c in checks)
    failed = [c[0] for c in checks if not c[1]]
    record(5, ok, f"{sum(c[1] for c in checks)}/{len(checks)} trends hold" + (f"; failed: {failed}" if failed else ""))
    for name, good, mean, conf in checks:
        print(f"  {name}: mean diff {mean:+.3e}, bootstrap conf {conf:.3f} {'ok' if good else 'FAIL'}")
    for r in table.rows:
        print("  ", r)
    # diagnostic only: error trend split by whether the unpenalized estimate recovered the graph
    for m in (Method.DP, Method.DP_NODE):
        b100 = _paired(res, "unfair", m, 100.0)
        b1000 = _paired(res, "unfair", m, 1000.0)
        for name, keep in (("recovered (None error < 0.1)", True), ("not recovered", False)):
            ts = [t for t in sorted(set(b100) & set(b1000) & set(none_u)) if (none_u[t].error < 0.1) == keep]
            if ts:
                d = np.mean([b1000[t].error - b100[t].error for t in ts])
                print(f"  {m.value} error(1000) - error(100), {name}: {d:+.3e} over {len(ts)} trials")
    assert ok


def _senate_files():
    d = os.environ.get("FAIR_TOPO_SENATE_DIR")
    if not d:
        return None
    d = Path(d)
    votes = sorted(d.glob("*votes*.csv"))
    members = sorted(d.glob("*members*.csv"))
    return (votes[0], members[0]) if votes and members else None


def _senate_trends(sweep):
    betas = [r[0] for r in sweep.bias_rows]
    dp = np.array([r[2] for r in sweep.bias_rows])
    node = np.array([r[3] for r in sweep.bias_rows])
    dp_err = np.array([r[2] for r in sweep.error_rows])
    node_err = np.array([r[3] for r in sweep.error_rows])

    def violations(v):
        return int(np.sum(np.diff(v) > 1e-9 * max(1.0, abs(v).max())))

    mono = violations(dp) <= 1 and violations(node) <= 1 and dp[-1] < dp[0] and node[-1] < node[0]
    faster = (node[0] - node[-1]) > (dp[0] - dp[-1])
    # DP error interpolated at each DPNode bias level inside DP's bias range
    order = np.argsort(dp)
    matched = []
    for b, e in zip(node, node_err):
        if dp.min() <= b <= dp.max():
            matched.append(np.interp(b, dp[order], dp_err[order]) <= e * (1 + 1e-6))
    match_ok = bool(matched) and all(matched)
    small = bool(np.all(np.concatenate([dp_err, node_err, [r[1] for r in sweep.error_rows]]) < 2.5e-2))
    detail = (
        f"monotone {mono} (DP {dp[0]:.3f}->{dp[-1]:.3f}, DPNode {node[0]:.3f}->{node[-1]:.3f}); "
        f"DPNode faster {faster}; matched-bias error {match_ok} ({len(matched)} points); errors<2.5e-2 {small}"
    )
    return mono and faster and match_ok and small, detail, betas


@pytest.mark.slow
def test_criterion_6_senate(tmp_path):
    t0 = time.perf_counter()
    files = _senate_files()
    if files is None:
        # without the public roll-call files the criterion cannot be
        # evaluated; run the pipeline on synthetic files for information only
        votes, members = write_surrogate_voteview(tmp_path)
        d = ingest_rollcalls(votes, members)
        sweep = run_senate_sweep(d.x, d.groups, SenateConfig())
        _, detail, _ = _senate_trends(sweep)
        record(
            6, False,
            "NOT EVALUATED: 113th Congress roll-call files unavailable (set FAIR_TOPO_SENATE_DIR); "
            f"synthetic stand-in {d.x.shape}: {detail}; {time.perf_counter() - t0:.0f} s",
        )
        pytest.fail("senate data unavailable; criterion cannot be evaluated")
    d = ingest_rollcalls(*files, congress=113)
    shape_ok = d.x.shape == (51, 657)
    sweep = run_senate_sweep(d.x, d.groups, SenateConfig())
    trends_ok, detail, _ = _senate_trends(sweep)
    elapsed = time.perf_counter() - t0
    ok = shape_ok and trends_ok and elapsed < 1200
    record(6, ok, f"shape {d.x.shape}; {detail}; {elapsed / 60:.1f} min")
    assert ok


@pytest.mark.run_last
def test_criterion_7_solver_feasibility():
    # a dedicated battery on top of every converged solve logged by the suite
    before = len(SOLVE_LOG)
    for seed in range(12):
        a, z = generate_two_group_graph(RewireSpec(n=12, p=0.4, across_ratio=(seed % 4) / 4, seed=seed))
        h = np.eye(12) + 0.3 * a.w
        c = CovarianceEstimate(h @ h)
        noisy = CovarianceEstimate(c.c + 1e-3 * np.diag(rng_for(seed).random(12)), m=1000)
        for cov in (c, noisy):
            eps = select_epsilon(cov) if cov.m else 0.0
            for pen, beta in ((Penalty.NONE, 0.0), (Penalty.DP, 100.0), (Penalty.DP_NODE, 100.0)):
                if eps == 0.0 and pen is not Penalty.NONE:
                    continue
                solve_convex(cov, z, SolveConfig(beta=beta, epsilon=eps, penalty=pen))
    battery = len(SOLVE_LOG) - before
    bad = [msg for good, msg in SOLVE_LOG if not good]
    ok = not bad and len(SOLVE_LOG) > 0
    record(7, ok, f"{len(SOLVE_LOG)} converged solves checked ({battery} from the battery), {len(bad)} violations")
    assert ok, bad[:5]


def test_criterion_8_replay_determinism(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    small = ["--n", "8", "--p", "0.5", "--samples", "3000", "--trials", "2", "--seed", "8"]
    votes, members = write_surrogate_voteview(tmp_path / "vv", n_rolls=80)
    runs = {
        "fig2": ["experiment", "fig2", *small, "--ratios", "0.25", "0.5"],
        "table1": ["experiment", "table1", *small, "--betas", "10", "100"],
        "senate": ["experiment", "senate", "--votes", str(votes), "--members", str(members), "--betas", "100",
                   "--epsilon-rule", "residual", "--epsilon-factor", "1"],
    }
    mismatched = []
    for name, argv in runs.items():
        assert cli_main(argv + ["--out", f"{name}_a"]) == 0
        manifest = json.loads((tmp_path / f"{name}_a" / "manifest.json").read_text())
        assert cli_main(["replay", f"{name}_a/manifest.json", "--out", f"{name}_b"]) == 0
        for out in manifest["outputs"]:
            if (tmp_path / f"{name}_a" / out).read_bytes() != (tmp_path / f"{name}_b" / out).read_bytes():
                mismatched.append(f"{name}/{out}")
    ok = not mismatched
    record(8, ok, f"3 experiments replayed from manifests, {len(mismatched)} differing CSVs")
    assert ok, mismatched
