"""Driven-ion population and next-site phonon number for the four chain scenarios.

Usage: python3 scripts/reproduce_fig2c.py [OUTPUT_DIR]
"""

import sys

from ionwave.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "."
    sys.exit(main(["reproduce", "fig2c", "--output-dir", out]))
