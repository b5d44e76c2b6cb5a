"""Command-line entry point ``sgfluid``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .grid import make_grid
from .results import RunManifest
from .stokes import SolveError, cached_stokes_basis


def _common(p):
    p.add_argument("--config", help="INI file with one section per experiment")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--out", default="results", help="output directory (default: results)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sgfluid", description="Stochastic second-grade fluid experiments")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("eig", help="compute (or load cached) Stokes eigenpairs")
    p.add_argument("--n", type=int, default=65)
    p.add_argument("--N", type=int, default=24)
    p.add_argument("--cache", help="cache directory (default: $SGF_CACHE_DIR or ~/.cache/sgfluid)")
    p = sub.add_parser("check", help="run the invariant suite")
    _common(p)
    p.add_argument("--sabotage", action="store_true", help="disable skew symmetrization (negative control)")
    for name, text in (("simulate", "integrate one Galerkin path"), ("sweep", "inviscid-limit sweep"),
                       ("energy", "energy identity and remainder study"),
                       ("corrector", "boundary-layer corrector diagnostics"),
                       ("additive", "additive-noise equivalence and energy law")):
        _common(sub.add_parser(name, help=text))
    p = sub.add_parser("rerun", help="regenerate outputs from a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default="rerun")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "eig":
            st = cached_stokes_basis(make_grid(args.n), args.N, args.cache)
            print(json.dumps({"eigenvalues": st.eigenvalues.tolist(), "clusters": [list(c) for c in st.clusters]}))
            return 0
        if args.command == "rerun":
            index = harness.rerun_manifest(args.manifest, args.out)
            print(json.dumps(index, indent=2, sort_keys=True))
            return 0
        cfg = harness.with_seed(harness.load_config(args.config)[args.command], args.seed)
        out = Path(args.out)
        if args.command == "check":
            report = harness.run_invariant_suite(cfg, sabotage=args.sabotage)
            for c in report["checks"]:
                print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['value']:.3e} (tol {c['tolerance']:g})")
            man = RunManifest("check", harness.config_dict(cfg), seeds={"seed": cfg.seed})
            harness.emit_results(None, man, out, report=report)
            return 0 if report["passed"] else 1
        table, report, man = harness.run_experiment(args.command, cfg)
        index = harness.emit_results(table, man, out, report=report)
        if table is not None:
            sys.stdout.write(table.to_csv())
        print(json.dumps(report.get("flags", report), indent=2, sort_keys=True, default=str))
        print(json.dumps(index, indent=2, sort_keys=True))
        return 0
    except (ValueError, KeyError, OSError, SolveError) as exc:
        print(f"sgfluid: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
