"""JC-only transmission past the driven ion versus g/J, with a log-scale plot.

Usage: python3 scripts/blockade_sweep.py [--output blockade.csv] [--plot]
"""

import sys

from ionwave.cli import main

if __name__ == "__main__":
    argv = sys.argv[1:] or ["--output", "blockade.csv", "--plot"]
    sys.exit(main(["sweep-blockade", *argv]))
