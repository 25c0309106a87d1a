#!/usr/bin/env python3
"""Fair versus unfair group labels (100 trials, beta in {100, 1000}).

Usage: scripts/run_table1.py [OUT_DIR] [extra fair-topo flags...]
"""
import sys

from fair_topo.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "results/table1"
    sys.exit(main(["experiment", "table1", "--out", out, *sys.argv[2:]]))
