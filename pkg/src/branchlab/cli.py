"""Command-line driver: branchlab --suite ring --p 3 ..."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from fractions import Fraction

from . import groups
from .report import emit
from .suites import SUITE_NAMES, ConfigError, RunConfig, run


def _fraction(s: str) -> Fraction:
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {s!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="branchlab", description="Exact finite-level checks of U(1,1) branching to K.")
    ap.add_argument("--p", type=int, default=3, help="odd residue characteristic (default 3)")
    ap.add_argument("--precision", type=int, default=None,
                    help="working precision N; raised automatically (with a warning) when too small")
    ap.add_argument("--suite", choices=SUITE_NAMES + ("all",), default="ring")
    ap.add_argument("--torus", choices=("T11", "Tww", "T1w", "T1ew"), default="T1w")
    ap.add_argument("--depth", type=_fraction, default=Fraction(1, 2), help="depth r of the datum, e.g. 1/2 or 2")
    ap.add_argument("--dmax", type=int, default=2, help="largest component depth to verify")
    ap.add_argument("--cuspidal", default="all", help="index of sigma(alpha, beta) or 'all'")
    ap.add_argument("--out", default=None, help="write the report here instead of stdout")
    ap.add_argument("--format", choices=("json", "markdown"), default="json")
    ap.add_argument("--cache-dir", default=None, help="enumeration cache; BRANCHLAB_CACHE overrides it")
    ap.add_argument("--jobs", type=int, default=1, help="worker threads for chunked sums")
    ap.add_argument("--cap", type=int, default=groups.DEFAULT_CAP, help="cardinality cap for enumerations")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    return RunConfig(
        p=ns.p, precision=ns.precision, suite=ns.suite, torus=ns.torus, r=ns.depth, d_max=ns.dmax,
        cuspidal=ns.cuspidal, format=ns.format,
        cache_dir=os.environ.get("BRANCHLAB_CACHE") or ns.cache_dir, jobs=ns.jobs, cap=ns.cap,
    )


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="branchlab: %(levelname)s: %(message)s")
    ap = build_parser()
    ns = ap.parse_args(argv)
    cfg = config_from_args(ns)
    try:
        doc = run(cfg)
    except ConfigError as exc:
        ap.print_usage(sys.stderr)
        print(f"branchlab: error: {exc}", file=sys.stderr)
        return 2
    except groups.CapExceeded as exc:
        print(f"branchlab: error: {exc}", file=sys.stderr)
        return 3
    data = emit(doc, cfg.format)
    if ns.out:
        with open(ns.out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return doc.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
