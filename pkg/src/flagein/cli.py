"""Command-line interface.

Exit codes: 0 success, 1 verification or classification failure, 2 usage or
I/O error. Summaries go to stdout; progress and diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import _backend
from .classify import ClassificationError, group_classes, kaehler_einstein_table, match_kaehler
from .curvature import EINSTEIN_TOLERANCE, Metric, curvature_summary, residual_system
from .io_persist import (
    FormatError,
    is_class_file,
    read_classes,
    read_solution_file,
    record_from_solution,
    render_table,
    write_classes,
    write_solutions,
)
from .solver import SolverConfig, run, solve_one

log = logging.getLogger("flagein")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

# verify: a polished row must land within this distance of the stored point
POLISH_RADIUS = 1e-4


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected an integer >= 1, got {s}")
    return v


def _seed(s: str) -> int:
    v = int(s)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive_float(s: str) -> float:
    v = float(s)
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {s}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flagein", description="Invariant Einstein metrics on SU(n+1)/T^n.")
    p.add_argument("-v", "--verbose", action="store_true", help="progress on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="multistart search for Einstein metrics")
    s.add_argument("--n", type=_positive_int, required=True, help="rank; the manifold is SU(n+1)/T^n")
    s.add_argument("--trials", type=_positive_int, required=True)
    s.add_argument("--seed", type=_seed, required=True)
    s.add_argument("--box-max", type=_positive_float, default=10.0)
    s.add_argument("--tol", type=_positive_float, default=1e-10, help="max-norm residual tolerance")
    s.add_argument("--max-iter", type=_positive_int, default=200)
    s.add_argument("--positivity", type=_positive_float, default=1e-4)
    s.add_argument("--decimals", type=_positive_int, default=5)
    s.add_argument("--threads", type=_positive_int, default=None, help="worker threads (default: all cores)")
    s.add_argument("--backend", choices=["auto", "compiled", "python"], default=None)
    s.add_argument("--format", choices=["csv", "json"], default="csv")
    s.add_argument("--out", required=True)

    v = sub.add_parser("verify", help="re-check every row of a solution file")
    v.add_argument("--in", dest="infile", required=True)
    v.add_argument("--tol", type=_positive_float, default=EINSTEIN_TOLERANCE, help="Ricci deviation tolerance")
    v.add_argument("--no-polish", action="store_true", help="judge the stored coefficients only")

    c = sub.add_parser("classify", help="group solutions into isometry classes")
    c.add_argument("--in", dest="infile", required=True)
    c.add_argument("--out", default=None, help="class file (default: <in>_classes.csv)")

    k = sub.add_parser("ke", help="list and verify the Kaehler-Einstein metrics")
    k.add_argument("--n", type=_positive_int, required=True)

    t = sub.add_parser("table", help="render a class or solution file as a table")
    t.add_argument("--in", dest="infile", required=True)
    t.add_argument("--format", choices=["markdown", "csv"], default="markdown")
    t.add_argument("--out", default=None)
    return p


def _progress(done: int, total: int) -> None:
    log.info("trials %d/%d", done, total)


def cmd_solve(args) -> int:
    try:
        config = SolverConfig(
            n=args.n,
            trials=args.trials,
            rng_seed=args.seed,
            box_max=args.box_max,
            residual_tolerance=args.tol,
            max_iterations=args.max_iter,
            positivity_threshold=args.positivity,
            rounding_decimals=args.decimals,
        )
        _backend.get_kernel(args.backend)
    except (ValueError, ImportError) as exc:
        print(f"flagein solve: {exc}", file=sys.stderr)
        return EXIT_USAGE
    summary = run(config, threads=args.threads, backend=args.backend, progress=_progress)
    records = [record_from_solution(s, config.n, config.rounding_decimals) for s in summary.solutions]
    try:
        write_solutions(records, args.out, format=args.format, n=config.n, meta=config.echo(), decimals=config.rounding_decimals)
    except OSError as exc:
        print(f"flagein solve: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"n={config.n} trials={summary.trials} seed={config.rng_seed} backend={summary.backend}")
    print(f"successes={summary.successes}")
    print(f"distinct={summary.distinct}")
    print(f"distinct_at_half={summary.distinct_at_half} (first {summary.half_trials} trials)")
    print(f"plateau={'stable' if summary.stable else 'growing'}")
    print(f"wrote {args.out}")
    return EXIT_OK


def _load(path):
    try:
        return read_solution_file(path)
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from None


def verify_record(rec, tol: float, polish: bool) -> tuple[bool, float, str]:
    """(passed, stored-point deviation, note)."""
    summ = curvature_summary(rec.metric(), tol)
    dev = summ.max_ricci_deviation
    if dev < tol:
        return True, dev, "ok"
    if not polish or rec.n == 1:
        return False, dev, "deviation above tolerance"
    config = SolverConfig(n=rec.n, trials=1, rng_seed=0)
    sol = solve_one(config, rec.x)
    if sol is None:
        return False, dev, "polish did not converge"
    dist = float(np.max(np.abs(sol.x - rec.x)))
    pdev = curvature_summary(Metric.from_gauge(rec.n, sol.x), tol).max_ricci_deviation
    if dist > POLISH_RADIUS:
        return False, dev, f"polish moved {dist:.2e} away (nearest Einstein metric is elsewhere)"
    if not pdev < tol:
        return False, dev, f"polished deviation {pdev:.2e}"
    return True, dev, f"ok after polish (moved {dist:.1e})"


def cmd_verify(args) -> int:
    try:
        sf = _load(args.infile)
    except FormatError as exc:
        print(f"flagein verify: {exc}", file=sys.stderr)
        return EXIT_USAGE
    failures = []
    worst = 0.0
    for k, rec in enumerate(sf.records, start=1):
        ok, dev, note = verify_record(rec, args.tol, not args.no_polish)
        worst = max(worst, dev)
        if not ok:
            failures.append((k, dev, note))
    print(f"rows={len(sf.records)} worst_deviation={worst:.3e} tol={args.tol:g}")
    if failures:
        for k, dev, note in failures:
            print(f"row {k}: FAIL deviation={dev:.3e} {note}")
        print(f"{len(failures)} of {len(sf.records)} rows failed")
        return EXIT_FAIL
    print("all rows Einstein")
    return EXIT_OK


def _classify_file(sf):
    classes = group_classes([np.array(r.lam) for r in sf.records], sf.n)
    return match_kaehler(classes, sf.n)


def cmd_classify(args) -> int:
    try:
        sf = _load(args.infile)
    except FormatError as exc:
        print(f"flagein classify: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        classes = _classify_file(sf)
    except ClassificationError as exc:
        print(f"flagein classify: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out = args.out or str(Path(args.infile).with_name(Path(args.infile).stem + "_classes.csv"))
    try:
        write_classes(classes, sf.records, out, n=sf.n, decimals=sf.decimals)
    except OSError as exc:
        print(f"flagein classify: cannot write {out}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"{len(classes)} classes")
    for k, c in enumerate(classes, start=1):
        tags = []
        if c.is_kaehler_einstein:
            tags.append("kaehler-einstein")
        if c.h_shared_with:
            tags.append("shares-H")
        print(f"class {k}: H={c.h_value:.9f} members={c.size}" + (f" [{', '.join(tags)}]" if tags else ""))
    print(f"wrote {out}")
    return EXIT_OK


def cmd_ke(args) -> int:
    n = args.n
    table = kaehler_einstein_table(n)
    bad = 0
    for w, metric in table:
        res = float(np.max(np.abs(residual_system(metric.lam[1:], n)))) if metric.lam.size > 1 else 0.0
        summ = curvature_summary(metric)
        ok = res < 1e-12 and summ.is_einstein
        bad += not ok
        lam = ",".join(f"{v:.6g}" for v in metric.lam)
        print(f"w={''.join(map(str, w)) if n < 9 else w} lam={lam} k={summ.ricci.mean():.9f} residual={res:.1e}{'' if ok else ' FAIL'}")
    expected = math.factorial(n + 1) // 2
    if bad or len(table) != expected:
        print(f"{len(table)} metrics, {bad} failed verification (expected {expected})")
        return EXIT_FAIL
    print(f"{len(table)} metrics, all Einstein-verified")
    return EXIT_OK


def cmd_table(args) -> int:
    try:
        if is_class_file(args.infile):
            classes, records = read_classes(args.infile)
            n = records[0].n if records else None
        else:
            sf = _load(args.infile)
            classes, records, n = _classify_file(sf), sf.records, sf.n
    except (FormatError, OSError) as exc:
        print(f"flagein table: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ClassificationError as exc:
        print(f"flagein table: {exc}", file=sys.stderr)
        return EXIT_FAIL
    text = render_table(classes, records, format=args.format, n=n)
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"flagein table: cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_USAGE
    else:
        sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "classify": cmd_classify, "ke": cmd_ke, "table": cmd_table}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr, format="%(message)s")
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
