#!/usr/bin/env python3
"""Senate sweep over 13 log-spaced beta values in [1e2, 1e5].

Usage:
    scripts/run_senate.py VOTES_CSV MEMBERS_CSV [OUT_DIR]
    scripts/run_senate.py --synthetic [OUT_DIR]

The first form reads Voteview-layout files (e.g. S113_votes.csv and
S113_members.csv). ``--synthetic`` generates stand-in files with the same
layout first; its numbers say nothing about the real chamber.
"""
import argparse
import sys
from pathlib import Path

from fair_topo.cli import main
from fair_topo.ingest import write_surrogate_voteview


def parse(argv):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--synthetic", action="store_true")
    p.add_argument("paths", nargs="*")
    ns = p.parse_args(argv)
    if ns.synthetic:
        if len(ns.paths) > 1:
            p.error("--synthetic takes at most OUT_DIR")
        out = Path(ns.paths[0] if ns.paths else "results/senate_synthetic")
        votes, members = write_surrogate_voteview(out / "input")
    else:
        if len(ns.paths) not in (2, 3):
            p.error("need VOTES_CSV MEMBERS_CSV [OUT_DIR]")
        votes, members = Path(ns.paths[0]), Path(ns.paths[1])
        out = Path(ns.paths[2] if len(ns.paths) == 3 else "results/senate")
    return votes, members, out


if __name__ == "__main__":
    votes, members, out = parse(sys.argv[1:])
    rc = main(["ingest-votes", "--votes", str(votes), "--members", str(members), "--out", str(out / "data")])
    if rc:
        sys.exit(rc)
    sys.exit(main(["experiment", "senate", "--votes", str(votes), "--members", str(members), "--out", str(out)]))
