"""Command-line entry point: contact-weakkam <subcommand> [flags].

Exit codes: 0 success (divergence below the admissible set counts as a
finding), 1 usage or configuration error, 2 a checked property failed."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import csvio, pipelines
from .config import ConfigError, RunConfig, parse_config, with_overrides
from .model import PRESETS

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2


def _triple(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected x,p,u")
    try:
        return tuple(float(p) for p in parts)  # type: ignore[return-value]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not numeric: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="contact-weakkam", description=__doc__.splitlines()[0])
    ap.add_argument("--config", help="run configuration file")
    ap.add_argument("--preset", choices=sorted(PRESETS), help="override the configured Hamiltonian")
    ap.add_argument("--out", help="output directory (overrides [output] dir)")
    ap.add_argument("--seed", type=int, default=0, help="seed for randomised test points")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="stationary solution by Lax-Oleinik iteration")
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--init", default="const:0", help="const:K or file:PATH (solution CSV)")

    sub.add_parser("scan-c", help="sample theta -> c(theta) per the [scan] section")

    p = sub.add_parser("mather", help="minimising closed measures at a frozen theta")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--enumerate", type=int, default=1, metavar="K", help="up to K optimal-face vertices")

    p = sub.add_parser("compare", help="comparison verdict for two solution CSVs")
    p.add_argument("--u1", required=True)
    p.add_argument("--u2", required=True)
    p.add_argument("--theta", type=float, required=True)

    p = sub.add_parser("flow", help="integrate the contact and Euler-Lagrange flows")
    p.add_argument("--start", type=_triple, required=True, help="x,p,u")
    p.add_argument("--time", type=float, required=True)
    p.add_argument("--c", type=float, default=0.0)

    p = sub.add_parser("example", help="reproduce a worked example")
    p.add_argument("--name", choices=("fig1", "fig2"), required=True)
    return ap


def load_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
    if args.preset:
        from .config import HamiltonianConfig
        cfg = with_overrides(cfg, hamiltonian=HamiltonianConfig(preset=args.preset),
                             grid={"period": None})
    if args.out:
        cfg = with_overrides(cfg, output=args.out)
    return cfg


def dispatch(args, cfg: RunConfig) -> tuple[dict, list[str]]:
    out = Path(cfg.output)
    if args.command == "solve":
        return pipelines.run_solve(cfg, out, args.c, args.init)
    if args.command == "scan-c":
        return pipelines.run_scan(cfg, out)
    if args.command == "mather":
        return pipelines.run_mather(cfg, out, args.theta, args.enumerate)
    if args.command == "compare":
        return pipelines.run_compare(cfg, out, args.u1, args.u2, args.theta)
    if args.command == "flow":
        return pipelines.run_flow(cfg, out, args.start, args.time, args.c, args.seed)
    if args.name == "fig1":
        return pipelines.run_fig1(cfg, out)
    return pipelines.run_fig2(cfg, out)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        out = Path(cfg.output)
        out.mkdir(parents=True, exist_ok=True)
        items, failed = dispatch(args, cfg)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    items["failed_checks"] = ",".join(failed) or "none"
    csvio.write_report(out / "report.txt", items)
    for name in failed:
        print(f"check failed: {name}", file=sys.stderr)
    return EXIT_FAILED if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
