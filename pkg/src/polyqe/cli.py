"""Command-line front end: ``polyqe run FILE`` and ``polyqe bench DIR``."""
from __future__ import annotations

import argparse
import csv
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .formula import ParseError, format_poly, parse, to_sexpr
from .ordering import STRATEGIES, OrderingError
from .polyalg import MODES, QeOptions, QeTimeout, VtsIncomplete, qe
from .polycore import Poly
from .realalg import RealAlgebraicNumber

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PARSE = 2
EXIT_TIMEOUT = 3
EXIT_UNVERIFIED = 4

CSV_COLUMNS = ["problem", "mode", "ordering", "status", "time_ms", "proj_polys", "ecs", "cells",
               "leaf_cells", "true_cells", "curtains"]


def _ordering(value: str) -> str:
    if value in STRATEGIES or value.startswith("user:"):
        return value
    raise argparse.ArgumentTypeError(f"expected one of {', '.join(STRATEGIES)} or user:<vars>")


def _fraction(value: str) -> float:
    f = float(value)
    if not 0.0 <= f <= 1.0:
        raise argparse.ArgumentTypeError("threshold must lie in [0, 1]")
    return f


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ordering", type=_ordering, default="brown")
    p.add_argument("--traversal", choices=["depth", "breadth"], default="depth")
    p.add_argument("--ec", choices=["off", "single", "multiple-unsafe"], default="single")
    p.add_argument("--share-threshold", type=_fraction, default=0.5)
    p.add_argument("--groebner", action="store_true")
    p.add_argument("--timeout", type=float, default=None, help="seconds")
    p.add_argument("--output", choices=["tarski", "extended"], default="tarski")


def _options(args, mode: str) -> QeOptions:
    return QeOptions(mode=mode, ordering=args.ordering, traversal=args.traversal,
                     ec_mode=args.ec.replace("-", "_"), share_threshold=args.share_threshold,
                     groebner=args.groebner, witness=getattr(args, "witness", False),
                     output=args.output, timeout=args.timeout)


def _rational(v) -> str:
    return str(v.p) if v.q == 1 else f"(/ {v.p} {v.q})"


def format_number(r: RealAlgebraicNumber, var: str) -> str:
    """Rationals print plainly; irrationals as ``(alg poly lo hi)``."""
    if r.is_rational:
        return _rational(r.lo)
    poly = Poly.from_upoly(r.defining, var)
    return f"(alg {format_poly(poly)} {_rational(r.lo)} {_rational(r.hi)})"


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polyqe", description="Real quantifier elimination.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="eliminate the quantifiers of one problem")
    run.add_argument("file", help="problem file, or - for stdin")
    run.add_argument("--mode", choices=MODES, default="poly")
    run.add_argument("--witness", action="store_true")
    run.add_argument("--stats", action="store_true")
    _add_engine_flags(run)

    bench = sub.add_parser("bench", help="run every problem of a directory and emit CSV")
    bench.add_argument("dir")
    bench.add_argument("--modes", default="poly,whole",
                       help="comma separated list of modes")
    bench.add_argument("--csv", dest="out", default="-", help="output file, - for stdout")
    bench.add_argument("--workers", type=int, default=1,
                       help="parallel worker processes (1 keeps timings reproducible)")
    _add_engine_flags(bench)
    return ap


def cmd_run(args) -> int:
    try:
        text = sys.stdin.read() if args.file == "-" else Path(args.file).read_text()
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    try:
        problem = parse(text)
    except ParseError as e:
        print(f"parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    try:
        res = qe(problem, _options(args, args.mode))
    except QeTimeout as e:
        if args.stats and e.stats is not None:
            print(e.stats.to_json())
        print("timeout", file=sys.stderr)
        return EXIT_TIMEOUT
    except (VtsIncomplete, OrderingError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    print(to_sexpr(res.result))
    if args.witness:
        if res.witness is None:
            print("(witness none)")
        else:
            parts = " ".join(f"({v} {format_number(r, v)})"
                             for v, r in sorted(res.witness.assignment.items()))
            print(f"(witness {parts})")
    if args.stats:
        print(res.stats.to_json())
    return EXIT_UNVERIFIED if res.stats.unverified else EXIT_OK


def _bench_problem(path: Path, modes: list[str], args) -> list[dict]:
    try:
        problem = parse(path.read_text())
    except (ParseError, UnicodeDecodeError):
        problem = None
    rows = []
    for mode in modes:
        row = dict.fromkeys(CSV_COLUMNS, "")
        row.update(problem=path.name, mode=mode, ordering=args.ordering)
        if problem is None:
            row["status"] = "parse_error"
            rows.append(row)
            continue
        t0 = time.monotonic()
        try:
            res = qe(problem, _options(args, mode))
        except QeTimeout as e:
            row.update(status="timeout", time_ms=int((args.timeout or 0) * 1000))
            st = e.stats
        except Exception as e:  # recorded per problem; the run continues
            row.update(status=f"error:{type(e).__name__}",
                       time_ms=int((time.monotonic() - t0) * 1000))
            st = None
        else:
            st = res.stats
            row.update(status="unverified" if st.unverified else "ok",
                       time_ms=int((time.monotonic() - t0) * 1000))
        if st is not None:
            row.update(proj_polys=st.proj_poly_count, ecs=st.ec_count, cells=st.cells_total,
                       leaf_cells=st.cells_leaf, true_cells=st.true_cells,
                       curtains=st.curtain_events)
        rows.append(row)
    return rows


def bench_rows(directory: Path, modes: list[str], args) -> list[dict]:
    files = sorted(p for p in directory.iterdir() if p.is_file() and not p.name.startswith("."))
    workers = getattr(args, "workers", 1)
    if workers <= 1 or len(files) <= 1:
        per_file = [_bench_problem(p, modes, args) for p in files]
    else:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            per_file = list(ex.map(_bench_problem, files, [modes] * len(files),
                                   [args] * len(files)))
    return [row for rows in per_file for row in rows]


def cmd_bench(args) -> int:
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    bad = [m for m in modes if m not in MODES]
    if bad:
        print(f"error: unknown mode(s) {', '.join(bad)}", file=sys.stderr)
        return EXIT_ERROR
    if args.workers < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return EXIT_ERROR
    directory = Path(args.dir)
    if not directory.is_dir():
        print(f"error: {directory} is not a directory", file=sys.stderr)
        return EXIT_ERROR
    rows = bench_rows(directory, modes, args)
    out = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    try:
        w = csv.DictWriter(out, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.groebner and args.ordering == "greedy":
        print("error: --groebner cannot be combined with --ordering greedy", file=sys.stderr)
        return EXIT_ERROR
    if args.command == "run":
        return cmd_run(args)
    return cmd_bench(args)


if __name__ == "__main__":
    sys.exit(main())
