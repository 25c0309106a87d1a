#!/usr/bin/env python3
"""Edge-ratio sweep with the default setup (N=30, 50 trials, beta=100).

Usage: scripts/run_fig2.py [OUT_DIR] [extra fair-topo flags...]
"""
import sys

from fair_topo.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "results/fig2"
    sys.exit(main(["experiment", "fig2", "--out", out, *sys.argv[2:]]))
