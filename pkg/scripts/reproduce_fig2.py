"""Piecewise preset: the two g branches, the solutions u1 <= u2 and the two rest-point Diracs.

Usage: python3 scripts/reproduce_fig2.py [OUT_DIR]"""
import sys

from contact_weakkam.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "out/fig2"
    sys.exit(main(["--out", out, "example", "--name", "fig2"]))
