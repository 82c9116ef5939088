"""Scan theta -> c(theta) for the pendulum preset and print it next to max(0, 2(theta - 1)).

Usage: python3 scripts/scan_pendulum.py [N_SAMPLES] [METHOD]"""
import sys

import numpy as np

from contact_weakkam.model import pendulum_example
from contact_weakkam.ccurve import classify_admissible_set, scan, verify_h4
from contact_weakkam.weakkam import admissible_interval_probe


def main(n: int = 31, method: str = "lp") -> int:
    H = pendulum_example()
    samples = scan(H, -1.0, 2.0, n, method=method)
    print(f"{'theta':>8} {'c':>12} {'exact':>12} {'int dH/du':>10} ordinal")
    for s in samples:
        exact = max(0.0, 2 * (s.theta - 1))
        print(f"{s.theta:8.3f} {s.c:12.6f} {exact:12.6f} {s.integral_duH:10.4f} {int(s.ordinal_nonempty)}")
    err = max(abs(s.c - max(0.0, 2 * (s.theta - 1))) for s in samples)
    rep = verify_h4(samples, H)
    shape = classify_admissible_set(samples, admissible_interval_probe(H, -1.0, 1.0), H)
    print(f"max error {err:.3g}; item failures {len(rep.failures)}; admissible set {shape.shape} "
          f"from c0 = {shape.c0:.4g}")
    return 0 if err <= 1e-2 and rep.passed and np.isfinite(err) else 2


if __name__ == "__main__":
    args = sys.argv[1:]
    sys.exit(main(int(args[0]) if args else 31, args[1] if len(args) > 1 else "lp"))
