"""Experiment drivers: edge-ratio sweep, group-label study, senate sweep.

Every trial derives its randomness from ``(seed, experiment, trial, ...)``
through :mod:`fair_topo.seeding`, so results do not depend on worker count or
execution order. Tables are sorted before they are written and floats are
written with ``repr``, which makes reruns byte-identical.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from fair_topo.fairness import bias_report, delta_dp
from fair_topo.graph_core import AdjacencyMatrix, ConstraintSet, GroupAssignment
from fair_topo.seeding import int_seed, rng_for
from fair_topo.signals import (
    CovarianceEstimate,
    commutativity_residual,
    random_filter,
    sample_covariance,
    sampled_covariance,
)
from fair_topo.solver import EpsilonRule, SolveConfig, select_epsilon, solve_convex
from fair_topo.synth import GroupMode, RewireSpec, assign_groups, generate_two_group_graph
from fair_topo.vectorize import Penalty

log = logging.getLogger(__name__)

# spawn-key namespaces, one per experiment
_FIG2, _TABLE1, _SENATE = 1, 2, 3


class Method(str, enum.Enum):
    TRUE_GRAPH = "True"
    NONE = "None"
    DP = "DP"
    DP_NODE = "DP_node"


_PENALTY_METHOD = {Penalty.NONE: Method.NONE, Penalty.DP: Method.DP, Penalty.DP_NODE: Method.DP_NODE}


@dataclass(frozen=True)
class TrialResult:
    method: Method
    bias: float
    error: Optional[float]
    beta: float
    converged: bool
    seed: int
    trial: int = 0
    setting: str = ""
    residual: float = math.nan

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.method is Method.TRUE_GRAPH and self.error is not None:
            raise ValueError("the true graph has no estimation error")


def estimation_error(truth: AdjacencyMatrix | np.ndarray, est: AdjacencyMatrix | np.ndarray) -> float:
    """``0.5 * || A/||A||_F - B/||B||_F ||_F^2``; lies in ``[0, 2]``."""
    a = np.asarray(getattr(truth, "w", truth), dtype=float)
    b = np.asarray(getattr(est, "w", est), dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("estimation error is undefined for a zero matrix")
    return float(0.5 * np.sum((a / na - b / nb) ** 2))


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SignalConfig:
    """Shared data-generation and solver settings."""

    n: int = 30
    g_count: int = 2
    p: float = 0.3
    samples: int = 1_000_000
    filter_order: int = 3
    filter_margin: float = 0.1
    normalize_gso: bool = True
    epsilon_rule: str = "residual"
    epsilon_factor: float = 1.0

    def __post_init__(self):
        EpsilonRule(self.epsilon_rule)
        if self.samples < 1:
            raise ValueError("samples must be >= 1")


@dataclass(frozen=True)
class EdgeRatioConfig:
    ratios: tuple = (0.125, 0.25, 0.375, 0.5, 0.625, 0.75, 0.875)
    trials: int = 50
    beta: float = 100.0
    seed: int = 0
    signal: SignalConfig = field(default_factory=SignalConfig)

    def __post_init__(self):
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        if any(not 0 <= r <= 1 for r in self.ratios):
            raise ValueError("ratios must lie in [0, 1]")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


@dataclass(frozen=True)
class GroupLabelConfig:
    trials: int = 100
    betas: tuple = (100.0, 1000.0)
    community_ratio: float = 0.2
    seed: int = 0
    signal: SignalConfig = field(default_factory=SignalConfig)

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


def _default_senate_betas() -> tuple:
    return tuple(float(b) for b in np.logspace(2, 5, 13))


@dataclass(frozen=True)
class SenateConfig:
    betas: tuple = field(default_factory=_default_senate_betas)
    # normalized commutator error bound
    epsilon_rule: str = "relative"
    epsilon_factor: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        EpsilonRule(self.epsilon_rule)


def config_to_dict(cfg) -> dict:
    return dataclasses.asdict(cfg)


def config_from_dict(cls, data: dict):
    """Build a (nested) config dataclass, rejecting unknown keys."""
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(names)
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = {}
    for k, v in data.items():
        if k == "signal" and isinstance(v, dict):
            v = config_from_dict(SignalConfig, v)
        kwargs[k] = v
    return cls(**kwargs)


# --------------------------------------------------------------------------
# shared trial pieces


def _simulate(a: AdjacencyMatrix, sig: SignalConfig, seed: int, *key: int) -> CovarianceEstimate:
    s = a.w
    if sig.normalize_gso:
        s = s / float(np.max(np.abs(np.linalg.eigvalsh(s))))
    spec = random_filter(s, rng_for(seed, *key, 0), order=sig.filter_order, margin=sig.filter_margin)
    return sampled_covariance(spec, s, sig.samples, seed=int_seed(seed, *key, 1))


def _epsilon(c: CovarianceEstimate, rule: str, factor: float) -> float:
    return select_epsilon(c, rule, factor)


def _solve(c, groups, penalty: Penalty, beta: float, eps: float):
    cfg = SolveConfig(beta=beta if penalty is not Penalty.NONE else 0.0, epsilon=eps, penalty=penalty)
    return solve_convex(c, groups if cfg.uses_groups else None, cfg)


def _map(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=1))


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("FAIR_TOPO_JOBS", "1")))
    except ValueError:
        return 1


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path: Path | str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _mean(vals: list) -> float:
    return float(np.mean(vals)) if vals else math.nan


# --------------------------------------------------------------------------
# edge-ratio sweep


def _edge_ratio_trial(args) -> list[TrialResult]:
    cfg, ratio_idx, trial = args
    ratio = cfg.ratios[ratio_idx]
    sig = cfg.signal
    graph_seed = int_seed(cfg.seed, _FIG2, trial)
    a, z = generate_two_group_graph(
        RewireSpec(n=sig.n, g_count=sig.g_count, p=sig.p, across_ratio=ratio, seed=graph_seed)
    )
    c = _simulate(a, sig, cfg.seed, _FIG2, trial, ratio_idx)
    eps = _epsilon(c, sig.epsilon_rule, sig.epsilon_factor)
    setting = repr(ratio)
    out = [TrialResult(Method.TRUE_GRAPH, bias_report(a, z).normalized_bias, None, 0.0, True, graph_seed, trial, setting)]
    for pen in (Penalty.NONE, Penalty.DP, Penalty.DP_NODE):
        beta = 0.0 if pen is Penalty.NONE else cfg.beta
        rep = _solve(c, z, pen, beta, eps)
        rb = bias_report(rep.a_hat, z).normalized_bias
        out.append(
            TrialResult(
                _PENALTY_METHOD[pen], rb if rb is not None else math.nan, estimation_error(a, rep.a_hat),
                beta, rep.converged, graph_seed, trial, setting,
                commutativity_residual(rep.a_hat, c, normalized=True),
            )
        )
    return out


FIG2_HEADER = ("Edge_Ratio", "Bias_True", "Bias_NTI", "Bias_DP", "Bias_NW", "Frob_NTI", "Frob_DP", "Frob_NW")


@dataclass(frozen=True)
class SweepTable:
    """Aggregated rows plus the per-trial results they came from."""

    header: tuple
    rows: list
    trials: list
    counts_header: tuple = ()
    counts: list = field(default_factory=list)


def run_edge_ratio_sweep(cfg: EdgeRatioConfig = EdgeRatioConfig(), jobs: int = 1) -> SweepTable:
    """Mean normalized bias and estimation error per across-group edge ratio."""
    tasks = [(cfg, i, t) for i in range(len(cfg.ratios)) for t in range(cfg.trials)]
    results = [r for batch in _map(_edge_ratio_trial, tasks, jobs) for r in batch]
    results.sort(key=lambda r: (float(r.setting), r.trial, list(Method).index(r.method)))
    rows, counts = [], []
    for ratio in cfg.ratios:
        sub = [r for r in results if float(r.setting) == ratio]

        def ok(m):
            return [r for r in sub if r.method is m and r.converged]

        rows.append(
            (
                ratio,
                _mean([r.bias for r in ok(Method.TRUE_GRAPH)]),
                _mean([r.bias for r in ok(Method.NONE)]),
                _mean([r.bias for r in ok(Method.DP)]),
                _mean([r.bias for r in ok(Method.DP_NODE)]),
                _mean([r.error for r in ok(Method.NONE)]),
                _mean([r.error for r in ok(Method.DP)]),
                _mean([r.error for r in ok(Method.DP_NODE)]),
            )
        )
        counts.append(
            (ratio,) + tuple(sum(1 for r in sub if r.method is m and not r.converged) for m in list(Method)[1:])
        )
    return SweepTable(
        FIG2_HEADER, rows, results,
        counts_header=("Edge_Ratio", "Unconverged_NTI", "Unconverged_DP", "Unconverged_NW"), counts=counts,
    )


# --------------------------------------------------------------------------
# group-label study


TABLE1_HEADER = ("Labels", "Method", "Beta", "Bias", "Error", "Trials")


def _group_label_trial(args) -> list[TrialResult]:
    cfg, trial = args
    sig = cfg.signal
    graph_seed = int_seed(cfg.seed, _TABLE1, trial)
    a, communities = generate_two_group_graph(
        RewireSpec(n=sig.n, g_count=sig.g_count, p=sig.p, across_ratio=cfg.community_ratio, seed=graph_seed)
    )
    labelings = {
        "unfair": assign_groups(sig.n, sig.g_count, GroupMode.BY_COMMUNITY, communities=communities),
        "fair": assign_groups(sig.n, sig.g_count, GroupMode.UNIFORM, seed=int_seed(cfg.seed, _TABLE1, trial, 2)),
    }
    c = _simulate(a, sig, cfg.seed, _TABLE1, trial)
    eps = _epsilon(c, sig.epsilon_rule, sig.epsilon_factor)
    # the unpenalized estimate does not depend on the labels
    none = _solve(c, None, Penalty.NONE, 0.0, eps)
    none_err = estimation_error(a, none.a_hat)
    out = []
    for name, z in labelings.items():
        out.append(TrialResult(Method.TRUE_GRAPH, delta_dp(a, z), None, 0.0, True, graph_seed, trial, name))
        out.append(TrialResult(Method.NONE, delta_dp(none.a_hat, z), none_err, 0.0, none.converged, graph_seed, trial, name))
        for pen in (Penalty.DP, Penalty.DP_NODE):
            for beta in cfg.betas:
                rep = _solve(c, z, pen, beta, eps)
                out.append(
                    TrialResult(
                        _PENALTY_METHOD[pen], delta_dp(rep.a_hat, z), estimation_error(a, rep.a_hat),
                        beta, rep.converged, graph_seed, trial, name,
                    )
                )
    return out


def run_group_label_study(cfg: GroupLabelConfig = GroupLabelConfig(), jobs: int = 1) -> SweepTable:
    """Raw group DP gap and estimation error for fair and unfair labelings."""
    results = [r for batch in _map(_group_label_trial, [(cfg, t) for t in range(cfg.trials)], jobs) for r in batch]
    order = {"unfair": 0, "fair": 1}
    results.sort(key=lambda r: (order[r.setting], r.trial, list(Method).index(r.method), r.beta))
    rows = []
    for labels in ("unfair", "fair"):
        keys = [(Method.TRUE_GRAPH, 0.0), (Method.NONE, 0.0)]
        keys += [(m, b) for b in cfg.betas for m in (Method.DP, Method.DP_NODE)]
        for m, b in keys:
            sub = [r for r in results if r.setting == labels and r.method is m and r.beta == b and r.converged]
            err = None if m is Method.TRUE_GRAPH else _mean([r.error for r in sub])
            rows.append((labels, m.value, b, _mean([r.bias for r in sub]), err, len(sub)))
    return SweepTable(TABLE1_HEADER, rows, results)


# --------------------------------------------------------------------------
# senate sweep


SENATE_HEADER = ("beta", "nti", "fnti", "nfnti")


@dataclass(frozen=True)
class SenateSweep:
    bias_rows: list
    error_rows: list
    results: list
    epsilon: float


def _senate_point(args) -> list[TrialResult]:
    c, groups, beta, eps = args
    out = []
    for pen in (Penalty.DP, Penalty.DP_NODE):
        rep = _solve(c, groups, pen, beta, eps)
        out.append(
            TrialResult(
                _PENALTY_METHOD[pen], delta_dp(rep.a_hat, groups),
                commutativity_residual(rep.a_hat, c, normalized=True), beta, rep.converged, 0,
                setting=repr(beta), residual=rep.commut_residual,
            )
        )
    return out


def run_senate_sweep(
    x: np.ndarray, groups: GroupAssignment, cfg: SenateConfig = SenateConfig(), jobs: int = 1
) -> SenateSweep:
    """Bias (raw group DP gap) and normalized commutator error over a beta grid.

    ``x`` holds one row per node and one column per roll call. The
    unpenalized estimate does not depend on beta and is solved once.
    """
    c = sample_covariance(np.asarray(x, dtype=float))
    eps = select_epsilon(c, cfg.epsilon_rule, cfg.epsilon_factor)
    none = _solve(c, None, Penalty.NONE, 0.0, eps)
    none_bias = delta_dp(none.a_hat, groups)
    none_err = commutativity_residual(none.a_hat, c, normalized=True)
    pts = _map(_senate_point, [(c, groups, b, eps) for b in cfg.betas], jobs)
    results, bias_rows, err_rows = [], [], []
    for beta, (dp, node) in zip(cfg.betas, pts):
        results.append(TrialResult(Method.NONE, none_bias, none_err, beta, none.converged, 0, setting=repr(beta)))
        results += [dp, node]
        bias_rows.append((beta, none_bias, dp.bias, node.bias))
        err_rows.append((beta, none_err, dp.error, node.error))
    return SenateSweep(bias_rows, err_rows, results, eps)


# --------------------------------------------------------------------------
# writing


TRIALS_HEADER = ("setting", "trial", "method", "beta", "bias", "error", "converged", "seed", "residual")


def _trial_rows(results: list[TrialResult]):
    for r in results:
        yield (r.setting, r.trial, r.method.value, r.beta, r.bias, r.error, r.converged, r.seed, r.residual)


def write_sweep(table: SweepTable, out_dir: Path | str, stem: str) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{stem}.csv", out / f"{stem}_trials.csv"]
    write_csv(paths[0], table.header, table.rows)
    write_csv(paths[1], TRIALS_HEADER, _trial_rows(table.trials))
    if table.counts:
        paths.append(out / f"{stem}_counts.csv")
        write_csv(paths[2], table.counts_header, table.counts)
    return paths


def write_senate(sweep: SenateSweep, out_dir: Path | str, stem: str = "senate113") -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = [out / f"{stem}_bias.csv", out / f"{stem}_comm.csv", out / f"{stem}_trials.csv"]
    write_csv(paths[0], SENATE_HEADER, sweep.bias_rows)
    write_csv(paths[1], SENATE_HEADER, sweep.error_rows)
    write_csv(paths[2], TRIALS_HEADER, _trial_rows(sweep.results))
    return paths
