"""Single-ion populations for the four drive scenarios plus the exact JC curve.

Usage: python3 scripts/reproduce_fig1b.py [OUTPUT_DIR]
"""

import sys

from ionwave.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "."
    sys.exit(main(["reproduce", "fig1b", "--output-dir", out]))
