"""Command-line front end: sweep CSVs in, one PNG figure out.

Exit codes follow the producer's convention: 0 on success, 2 when the
input files or arguments violate the contract.  Validation failures
never leave an output file behind.
"""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional, Sequence, Tuple

from .figures import plot_comparison
from .tables import SweepTable, TableError

EXIT_OK = 0
EXIT_ERROR = 2


def parse_require(text: str) -> Tuple[str, float]:
    """Parse a MODE:N series requirement such as ``hybrid:1e12``."""
    mode, separator, count = text.partition(":")
    if not separator or not mode:
        raise TableError(
            f"bad --require value {text!r}, expected MODE:N such as"
            f" hybrid:1e12")
    try:
        n_pulses = float(count)
    except ValueError as exc:
        raise TableError(
            f"bad --require pulse count {count!r} in {text!r}") from exc
    return mode, n_pulses


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amdi-hybrid-plots",
        description="Render key-rate figures from amdi-hybrid sweep CSVs.")
    parser.add_argument(
        "--in", dest="inputs", nargs="+", required=True, metavar="CSV",
        help="sweep CSV files to plot (schema version 1)")
    parser.add_argument(
        "--out", required=True, metavar="PNG",
        help="output image path")
    parser.add_argument(
        "--require", action="append", metavar="MODE:N",
        help="series that must be present, e.g. hybrid:1e12; repeatable")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        require: Optional[List[Tuple[str, float]]] = None
        if args.require:
            require = [parse_require(text) for text in args.require]
        tables = [SweepTable.from_csv(path) for path in args.inputs]
        plot_comparison(tables, args.out, require=require)
    except TableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
