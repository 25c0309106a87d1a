"""Command line entry point: ``fair-topo <subcommand> ...``.

Exit status is 0 on success, 1 on domain errors (degenerate groups,
infeasible problems, non-convergence under ``--strict``) and 2 on I/O or
format errors. Every run writes a JSON manifest holding the fully resolved
options, seeds and input digests; ``fair-topo replay manifest.json``
repeats the run.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from fair_topo import __version__
from fair_topo import experiments as ex
from fair_topo.certify import certify
from fair_topo.csvio import CsvFormatError, read_groups, read_matrix, sha256_file, write_groups, write_matrix
from fair_topo.fairness import bias_report
from fair_topo.graph_core import AdjacencyMatrix, ConstraintSet, DegenerateGroupError, Normalization
from fair_topo.ingest import export_dataset, ingest_rollcalls
from fair_topo.signals import (
    CovarianceEstimate,
    analytic_covariance,
    random_filter,
    sample_covariance,
    sample_signals,
)
from fair_topo.seeding import int_seed, rng_for
from fair_topo.solver import EpsilonRule, InfeasibleProblemError, SolveConfig, select_epsilon, solve_convex
from fair_topo.synth import GroupMode, RewireSpec, assign_groups, generate_two_group_graph
from fair_topo.vectorize import Penalty, build_vectorized

log = logging.getLogger("fair_topo")

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2

# options that name input files; their digests go into the manifest
_INPUT_KEYS = ("adj", "groups", "cov", "signals", "votes", "members")
# options that never enter the manifest's argument list
_META_KEYS = {"config", "manifest", "command", "experiment", "handler", "log_level", "jobs"}


class UsageError(Exception):
    """Bad option combination; reported like an argparse error."""


class DomainError(Exception):
    pass


# --------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("run options")
    g.add_argument("--seed", type=int, default=0, help="seed for all randomness (default 0)")
    g.add_argument("--config", type=Path, help="JSON file of option defaults; flags take precedence")
    g.add_argument("--strict", action="store_true", help="treat solver non-convergence as an error")
    g.add_argument("--jobs", type=int, default=None, help="worker processes (default: $FAIR_TOPO_JOBS or 1)")
    g.add_argument("--manifest", type=Path, help="where to write the run manifest")
    g.add_argument("--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"))


def _solver_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--penalty", choices=[x.value for x in Penalty], default="none")
    p.add_argument("--epsilon", type=float, default=None, help="commutator tolerance; overrides --epsilon-rule")
    p.add_argument("--epsilon-rule", choices=[r.value for r in EpsilonRule], default="residual")
    p.add_argument("--epsilon-factor", type=float, default=1.0)
    p.add_argument("--normalization", choices=[x.value for x in Normalization], default="first_row_sum_1")
    p.add_argument("--method", choices=("auto", "admm", "ipm"), default="auto")


def _signal_opts(p: argparse.ArgumentParser) -> None:
    d = ex.SignalConfig()
    p.add_argument("--samples", type=int, default=d.samples)
    p.add_argument("--n", type=int, default=d.n)
    p.add_argument("--p", type=float, default=d.p)
    p.add_argument("--epsilon-rule", choices=[r.value for r in EpsilonRule], default=d.epsilon_rule)
    p.add_argument("--epsilon-factor", type=float, default=d.epsilon_factor)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fair-topo", description="Fair network topology inference.")
    parser.add_argument("--version", action="version", version=f"fair-topo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("metrics", help="bias metrics of an adjacency matrix")
    p.add_argument("--adj", type=Path, required=True)
    p.add_argument("--groups", type=Path, required=True)
    _common(p)
    p.set_defaults(handler=cmd_metrics)

    p = sub.add_parser("solve", help="estimate a graph from a covariance or signals")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--cov", type=Path, help="covariance CSV (N x N)")
    src.add_argument("--signals", type=Path, help="signals CSV (N x M)")
    p.add_argument("--cov-samples", type=int, default=0, help="samples behind --cov; 0 means exact")
    p.add_argument("--groups", type=Path)
    _solver_opts(p)
    p.add_argument("--out", type=Path, required=True, help="estimated adjacency CSV")
    p.add_argument("--report", type=Path, help="JSON solve report")
    p.add_argument("--dump-problem", type=Path, help="directory for (psi, phi, b) triplet CSVs")
    _common(p)
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("certify", help="check the exact-recovery conditions for a candidate")
    p.add_argument("--cov", type=Path, required=True)
    p.add_argument("--adj", type=Path, required=True, help="candidate adjacency CSV")
    p.add_argument("--groups", type=Path)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--penalty", choices=[x.value for x in Penalty], default="none")
    p.add_argument("--normalization", choices=[x.value for x in Normalization], default="first_row_sum_1")
    _common(p)
    p.set_defaults(handler=cmd_certify)

    p = sub.add_parser("synth", help="two-group graph, labels and optional signals")
    p.add_argument("--n", type=int, default=30)
    p.add_argument("--p", type=float, default=0.3)
    p.add_argument("--ratio", type=float, default=0.0)
    p.add_argument("--labels", choices=("community", "uniform"), default="community")
    p.add_argument("--out-adj", type=Path, required=True)
    p.add_argument("--out-groups", type=Path, required=True)
    p.add_argument("--out-signals", type=Path, help="write N x M filtered white-noise signals")
    p.add_argument("--out-cov", type=Path, help="write the covariance (sample, or exact with --analytic)")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--analytic", action="store_true")
    _common(p)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("ingest-votes", help="build the senate dataset from roll-call files")
    p.add_argument("--votes", type=Path, required=True)
    p.add_argument("--members", type=Path, required=True)
    p.add_argument("--congress", type=int, default=113)
    p.add_argument("--out", type=Path, required=True)
    _common(p)
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("experiment", help="run a reproduction experiment")
    esub = p.add_subparsers(dest="experiment", required=True)
    e = esub.add_parser("fig2", help="edge-ratio sweep")
    e.add_argument("--trials", type=int, default=ex.EdgeRatioConfig.trials)
    e.add_argument("--ratios", type=float, nargs="+", default=list(ex.EdgeRatioConfig.ratios))
    e.add_argument("--beta", type=float, default=ex.EdgeRatioConfig.beta)
    _signal_opts(e)
    e.add_argument("--out", type=Path, required=True)
    _common(e)
    e.set_defaults(handler=cmd_fig2)
    e = esub.add_parser("table1", help="fair versus unfair group labels")
    e.add_argument("--trials", type=int, default=ex.GroupLabelConfig.trials)
    e.add_argument("--betas", type=float, nargs="+", default=list(ex.GroupLabelConfig.betas))
    _signal_opts(e)
    e.add_argument("--out", type=Path, required=True)
    _common(e)
    e.set_defaults(handler=cmd_table1)
    e = esub.add_parser("senate", help="senate beta sweep")
    e.add_argument("--signals", type=Path, help="signals CSV (nodes x votes)")
    e.add_argument("--groups", type=Path)
    e.add_argument("--votes", type=Path, help="roll-call votes file (instead of --signals)")
    e.add_argument("--members", type=Path)
    e.add_argument("--congress", type=int, default=113)
    e.add_argument("--betas", type=float, nargs="+", default=list(ex.SenateConfig().betas))
    e.add_argument("--epsilon-rule", choices=[r.value for r in EpsilonRule], default=ex.SenateConfig.epsilon_rule)
    e.add_argument("--epsilon-factor", type=float, default=ex.SenateConfig.epsilon_factor)
    e.add_argument("--out", type=Path, required=True)
    _common(e)
    e.set_defaults(handler=cmd_senate)

    p = sub.add_parser("replay", help="re-run a recorded manifest")
    p.add_argument("manifest_file", type=Path)
    p.add_argument("--out", type=Path, help="redirect outputs to this directory (experiments only)")
    p.add_argument("--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    p.set_defaults(handler=cmd_replay)
    return parser


def _subparser(parser: argparse.ArgumentParser, ns: argparse.Namespace) -> argparse.ArgumentParser:
    """The (sub)parser that produced ``ns``, for applying config defaults."""
    actions = {a.dest: a for a in parser._actions if isinstance(a, argparse._SubParsersAction)}
    p = actions["command"].choices[ns.command]
    if ns.command == "experiment":
        sub = {a.dest: a for a in p._actions if isinstance(a, argparse._SubParsersAction)}
        p = sub["experiment"].choices[ns.experiment]
    return p


def parse(argv: Sequence[str]) -> argparse.Namespace:
    parser = build_parser()
    ns = parser.parse_args(argv)
    cfg_path = getattr(ns, "config", None)
    if cfg_path is None:
        return ns
    try:
        overlay = json.loads(Path(cfg_path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CsvFormatError(cfg_path, 1, 1, f"cannot read config: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise CsvFormatError(cfg_path, exc.lineno, exc.colno, f"invalid JSON: {exc.msg}") from None
    if not isinstance(overlay, dict):
        raise CsvFormatError(cfg_path, 1, 1, "config must be a JSON object")
    overlay = {k.replace("-", "_"): v for k, v in overlay.items()}
    known = set(vars(ns)) - _META_KEYS - {"config"}
    unknown = set(overlay) - known
    if unknown:
        raise UsageError(f"unknown keys in {cfg_path}: {sorted(unknown)}")
    sp = _subparser(parser, ns)
    for action in sp._actions:
        if action.dest in overlay and action.type is Path and overlay[action.dest] is not None:
            overlay[action.dest] = Path(overlay[action.dest])
    # config values become defaults, so explicit flags still win
    sp.set_defaults(**overlay)
    return parser.parse_args(argv)


# --------------------------------------------------------------------------
# manifest


def _jsonable(v):
    if isinstance(v, Path):
        return str(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return v


def _to_argv(ns: argparse.Namespace) -> list[str]:
    """Rebuild a flag list equivalent to the resolved namespace."""
    argv = [ns.command] + ([ns.experiment] if ns.command == "experiment" else [])
    for key, val in sorted(vars(ns).items()):
        if key in _META_KEYS or key == "manifest_file" or val is None:
            continue
        flag = "--" + key.replace("_", "-")
        if isinstance(val, bool):
            if val:
                argv.append(flag)
        elif isinstance(val, (list, tuple)):
            argv.append(flag)
            argv += [repr(x) if isinstance(x, float) else str(x) for x in val]
        else:
            argv += [flag, repr(val) if isinstance(val, float) else str(val)]
    return argv


def write_manifest(ns: argparse.Namespace, path: Path, extra: Optional[dict] = None) -> Path:
    resolved = {k: _jsonable(v) for k, v in sorted(vars(ns).items()) if k not in ("handler", "manifest")}
    digests = {}
    for key in _INPUT_KEYS:
        p = getattr(ns, key, None)
        if p is not None and Path(p).is_file():
            digests[key] = {"path": str(p), "sha256": sha256_file(p)}
    doc = {
        "tool": "fair-topo",
        "version": __version__,
        "subcommand": ns.command if ns.command != "experiment" else f"experiment {ns.experiment}",
        "config": resolved,
        "seeds": {"seed": ns.seed},
        "inputs": digests,
        "argv": _to_argv(ns),
    }
    if extra:
        doc.update(_jsonable(extra))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _manifest_path(ns: argparse.Namespace, default_dir: Optional[Path]) -> Path:
    if ns.manifest is not None:
        return ns.manifest
    return (default_dir if default_dir is not None else Path.cwd()) / "manifest.json"


# --------------------------------------------------------------------------
# handlers


def _cset(ns) -> ConstraintSet:
    return ConstraintSet(Normalization(ns.normalization))


def _groups(ns, n: int, required: bool):
    if ns.groups is None:
        if required:
            raise UsageError("--groups is required for a fairness penalty")
        return None
    return read_groups(ns.groups, n)


def _jobs(ns) -> int:
    return ns.jobs if ns.jobs is not None else ex.default_jobs()


def cmd_metrics(ns) -> int:
    a = AdjacencyMatrix(read_matrix(ns.adj))
    groups = read_groups(ns.groups, a.n)
    rep = bias_report(a, groups)
    print(json.dumps(_jsonable(rep.to_dict()), sort_keys=True))
    write_manifest(ns, _manifest_path(ns, None))
    return EXIT_OK


def cmd_solve(ns) -> int:
    if ns.cov is not None:
        c = CovarianceEstimate(read_matrix(ns.cov), m=ns.cov_samples)
    else:
        c = sample_covariance(read_matrix(ns.signals))
    penalty = Penalty(ns.penalty)
    groups = _groups(ns, c.n, penalty is not Penalty.NONE and ns.beta > 0)
    cset = _cset(ns)
    eps = ns.epsilon if ns.epsilon is not None else select_epsilon(c, ns.epsilon_rule, ns.epsilon_factor, cset)
    cfg = SolveConfig(beta=ns.beta, epsilon=eps, penalty=penalty, method=ns.method)
    if ns.dump_problem is not None:
        _dump_problem(build_vectorized(c, groups if cfg.uses_groups else None, ns.beta, penalty, cset), ns.dump_problem)
    rep = solve_convex(c, groups if cfg.uses_groups else None, cfg, cset)
    ns.out.parent.mkdir(parents=True, exist_ok=True)
    write_matrix(ns.out, rep.a_hat.w)
    doc = dict(rep.to_dict(), status=rep.status, epsilon=eps, support=list(rep.support))
    if groups is not None:
        doc["bias"] = bias_report(rep.a_hat, groups).to_dict()
    if ns.report is not None:
        ns.report.parent.mkdir(parents=True, exist_ok=True)
        ns.report.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    write_manifest(ns, _manifest_path(ns, ns.out.parent), {"epsilon": eps})
    if not rep.converged:
        log.warning("solver did not converge (status %s)", rep.status)
        if ns.strict:
            return EXIT_DOMAIN
    return EXIT_OK


def _dump_problem(vp, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, m in (("psi", vp.psi), ("phi", vp.phi), ("b", vp.b[:, None])):
        rows, cols = np.nonzero(m)
        with open(out_dir / f"{name}.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("row", "col", "value"))
            for i, j in zip(rows, cols):
                w.writerow((int(i), int(j), repr(float(m[i, j]))))


def cmd_certify(ns) -> int:
    c = CovarianceEstimate(read_matrix(ns.cov))
    a = AdjacencyMatrix(read_matrix(ns.adj))
    penalty = Penalty(ns.penalty)
    uses = penalty is not Penalty.NONE and ns.beta > 0
    groups = _groups(ns, c.n, uses)
    vp = build_vectorized(c, groups if uses else None, ns.beta, penalty if uses else Penalty.NONE, _cset(ns))
    rep = certify(vp, a.w)
    print(json.dumps(_jsonable(rep.to_dict()), sort_keys=True))
    write_manifest(ns, _manifest_path(ns, None), {"certified": rep.certified})
    if ns.strict and not rep.certified:
        return EXIT_DOMAIN
    return EXIT_OK


def cmd_synth(ns) -> int:
    a, communities = generate_two_group_graph(RewireSpec(n=ns.n, p=ns.p, across_ratio=ns.ratio, seed=ns.seed))
    if ns.labels == "community":
        groups = communities
    else:
        groups = assign_groups(ns.n, 2, GroupMode.UNIFORM, seed=int_seed(ns.seed, 2))
    for p in (ns.out_adj, ns.out_groups, ns.out_signals, ns.out_cov):
        if p is not None:
            p.parent.mkdir(parents=True, exist_ok=True)
    write_matrix(ns.out_adj, a.w)
    write_groups(ns.out_groups, groups)
    if ns.out_signals is not None or ns.out_cov is not None:
        s = a.w / float(np.max(np.abs(np.linalg.eigvalsh(a.w))))
        spec = random_filter(s, rng_for(ns.seed, 3))
        if ns.analytic:
            if ns.out_signals is not None:
                raise UsageError("--analytic has no signals; use --out-cov")
            write_matrix(ns.out_cov, analytic_covariance(spec, s).c)
        else:
            x = sample_signals(spec, s, ns.samples, int_seed(ns.seed, 4))
            if ns.out_signals is not None:
                write_matrix(ns.out_signals, x)
            if ns.out_cov is not None:
                write_matrix(ns.out_cov, sample_covariance(x).c)
    write_manifest(ns, _manifest_path(ns, ns.out_adj.parent))
    return EXIT_OK


def cmd_ingest(ns) -> int:
    d = ingest_rollcalls(ns.votes, ns.members, ns.congress)
    export_dataset(d, ns.out)
    write_manifest(ns, _manifest_path(ns, ns.out), {"nodes": d.x.shape[0], "votes": d.vote_count})
    return EXIT_OK


def _signal_cfg(ns) -> ex.SignalConfig:
    return ex.SignalConfig(
        n=ns.n, p=ns.p, samples=ns.samples, epsilon_rule=ns.epsilon_rule, epsilon_factor=ns.epsilon_factor
    )


def _finish_experiment(ns, table_paths, results, extra=None) -> int:
    unconverged = sum(1 for r in results if not r.converged)
    write_manifest(
        ns, _manifest_path(ns, ns.out),
        dict(extra or {}, outputs={p.name: sha256_file(p) for p in table_paths}, unconverged=unconverged),
    )
    if unconverged:
        log.warning("%d solves did not converge; excluded from means", unconverged)
        if ns.strict:
            return EXIT_DOMAIN
    return EXIT_OK


def cmd_fig2(ns) -> int:
    cfg = ex.EdgeRatioConfig(ratios=tuple(ns.ratios), trials=ns.trials, beta=ns.beta, seed=ns.seed, signal=_signal_cfg(ns))
    log.info("edge-ratio sweep config: %s", ex.config_to_dict(cfg))
    table = ex.run_edge_ratio_sweep(cfg, jobs=_jobs(ns))
    return _finish_experiment(ns, ex.write_sweep(table, ns.out, "edgeratio"), table.trials)


def cmd_table1(ns) -> int:
    cfg = ex.GroupLabelConfig(trials=ns.trials, betas=tuple(ns.betas), seed=ns.seed, signal=_signal_cfg(ns))
    log.info("group-label study config: %s", ex.config_to_dict(cfg))
    table = ex.run_group_label_study(cfg, jobs=_jobs(ns))
    return _finish_experiment(ns, ex.write_sweep(table, ns.out, "table1"), table.trials)


def cmd_senate(ns) -> int:
    if ns.signals is not None:
        if ns.groups is None:
            raise UsageError("--signals needs --groups")
        x = read_matrix(ns.signals)
        groups = read_groups(ns.groups, x.shape[0])
    elif ns.votes is not None and ns.members is not None:
        d = ingest_rollcalls(ns.votes, ns.members, ns.congress)
        x, groups = d.x, d.groups
    else:
        raise UsageError("give --signals/--groups or --votes/--members")
    cfg = ex.SenateConfig(betas=tuple(ns.betas), epsilon_rule=ns.epsilon_rule, epsilon_factor=ns.epsilon_factor)
    sweep = ex.run_senate_sweep(x, groups, cfg, jobs=_jobs(ns))
    return _finish_experiment(ns, ex.write_senate(sweep, ns.out), sweep.results, {"epsilon": sweep.epsilon})


def cmd_replay(ns) -> int:
    try:
        doc = json.loads(ns.manifest_file.read_text(encoding="utf-8"))
        argv = list(doc["argv"])
    except OSError as exc:
        raise CsvFormatError(ns.manifest_file, 1, 1, f"cannot read manifest: {exc.strerror}") from None
    except (json.JSONDecodeError, KeyError, TypeError):
        raise CsvFormatError(ns.manifest_file, 1, 1, "not a fair-topo manifest") from None
    for key, rec in doc.get("inputs", {}).items():
        if Path(rec["path"]).is_file() and sha256_file(rec["path"]) != rec["sha256"]:
            log.warning("input %s (%s) changed since the manifest was written", key, rec["path"])
    if ns.out is not None:
        if "--out" not in argv:
            raise UsageError("--out only applies to runs that wrote an output directory")
        i = argv.index("--out")
        argv[i + 1] = str(ns.out)
    return main(argv)


# --------------------------------------------------------------------------


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        ns = parse(argv)
    except SystemExit as exc:  # argparse: --help/--version exit 0, usage errors exit 2
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"fair-topo: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CsvFormatError as exc:
        print(f"fair-topo: error: {exc}", file=sys.stderr)
        return EXIT_IO
    logging.basicConfig(level=getattr(logging, ns.log_level), format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    try:
        return ns.handler(ns)
    except UsageError as exc:
        print(f"fair-topo: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (CsvFormatError, OSError) as exc:
        print(f"fair-topo: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DegenerateGroupError, InfeasibleProblemError, DomainError) as exc:
        print(f"fair-topo: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except ValueError as exc:
        print(f"fair-topo: error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
