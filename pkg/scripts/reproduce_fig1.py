"""Pendulum preset: the u_lambda family, its Mather measure and the solver's pick.

Usage: python3 scripts/reproduce_fig1.py [OUT_DIR]"""
import sys

from contact_weakkam.cli import main

if __name__ == "__main__":
    out = sys.argv[1] if len(sys.argv) > 1 else "out/fig1"
    sys.exit(main(["--out", out, "example", "--name", "fig1"]))
