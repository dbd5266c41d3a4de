"""Command line front-end: ``hiconn run`` and ``hiconn construct``.

Exit codes: 0 all checks pass, 1 failed checks or construction preconditions,
2 spec/parse errors, 3 evaluation errors (division by zero, singular metric).
"""
from __future__ import annotations

import argparse
import copy
import sys
import time
from pathlib import Path

from . import __version__
from .bilinear import construct_parallel
from .connection import HigherConnection
from .errors import (
    BaseNotTorsionFree,
    DivisionByZero,
    HiconnError,
    NotInBCircle,
    ParseError,
    SpecError,
    VanishingNorm,
)
from .scalar import SamplePlan
from .specfile import Built, build, connection_to_raw, dumps_spec, load_spec
from .suites import SUITES, SuiteContext, run_suite

EXIT_OK, EXIT_FAILED, EXIT_SPEC, EXIT_EVAL = 0, 1, 2, 3
SUITE_CHOICES = (*SUITES, "all")


def _context(built: Built, plan: SamplePlan, tol: float, seed: int) -> SuiteContext:
    has_conn = built.base is not None or not built.twist.is_zero
    return SuiteContext(
        chart=built.chart, plan=plan, tol=tol, seed=seed,
        connection=built.connection if has_conn else None,
        base=built.base, metric=built.metric, eta=built.eta,
        mvfs=built.mvfs, forms=built.forms, expect=built.expect,
    )


def format_report(suite: str, spec_path: str, seed: int, points: int, tol: float, checks, wall: float) -> str:
    """Line-oriented report; everything except the final wall-time line is deterministic."""
    checks = sorted(checks, key=lambda c: (c.suite, c.id))
    failed = sum(c.failed for c in checks)
    passed = sum(c.verdict == "PASS" for c in checks)
    lines = [f"# hiconn {__version__} suite={suite} spec={Path(spec_path).name} seed={seed} points={points} tol={tol:g}"]
    if suite in ("eta", "construct-parallel", "all"):
        lines.append("# note: nonvanishing and B-circle membership are decided on the sample plan only")
    lines.append("# suite\tcheck\tidentity\tresidual\tverdict")
    lines.extend(c.line() for c in checks)
    lines.append(f"# summary checks={len(checks)} pass={passed} fail={failed} info={len(checks) - passed - failed} "
                 f"result={'FAIL' if failed else 'PASS'}")
    lines.append(f"# wall_time {wall:.3f}s")
    return "\n".join(lines) + "\n"


def report_body(text: str) -> str:
    """Report text without the wall-time line, for determinism comparisons."""
    return "".join(line for line in text.splitlines(keepends=True) if not line.startswith("# wall_time"))


def _eval_error(exc: DivisionByZero) -> int:
    where = f" at point {list(map(float, exc.point))}" if getattr(exc, "point", None) is not None else ""
    print(f"evaluation error: {exc}{where}", file=sys.stderr)
    return EXIT_EVAL


def cmd_run(args) -> int:
    try:
        spec = load_spec(args.spec)
        built = build(spec)
    except (SpecError, ParseError) as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except OSError as exc:
        print(f"cannot read spec: {exc}", file=sys.stderr)
        return EXIT_SPEC
    cfg = built.plan_config
    seed = cfg.seed if args.seed is None else args.seed
    points = cfg.points if args.points is None else args.points
    tol = cfg.tol if args.tol is None else args.tol
    plan = SamplePlan.uniform(built.chart, points, seed=seed, box=cfg.box)
    start = time.perf_counter()
    try:
        if built.metric is not None:
            built.metric.check_nonsingular(plan)
        checks = run_suite(args.suite, _context(built, plan, tol, seed))
    except DivisionByZero as exc:
        return _eval_error(exc)
    except HiconnError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED
    text = format_report(args.suite, args.spec, seed, points, tol, checks, time.perf_counter() - start)
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_FAILED if any(c.failed for c in checks) else EXIT_OK


def cmd_construct(args) -> int:
    try:
        spec = load_spec(args.spec)
        built = build(spec)
    except (SpecError, ParseError) as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except OSError as exc:
        print(f"cannot read spec: {exc}", file=sys.stderr)
        return EXIT_SPEC
    if built.eta is None:
        print("spec error: 'eta' is required for construct", file=sys.stderr)
        return EXIT_SPEC
    plan = built.plan()
    try:
        conn: HigherConnection = construct_parallel(built.eta, built.metric, built.base, plan)
    except DivisionByZero as exc:
        return _eval_error(exc)
    except (NotInBCircle, VanishingNorm, BaseNotTorsionFree) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILED
    raw = copy.deepcopy(spec.raw)
    raw["christoffel"], raw["twist"] = connection_to_raw(conn.base, conn.twist)
    expect = dict(raw.get("expect") or {})
    expect.update(parallel=True, almost_torsion_free=True)
    raw["expect"] = expect
    Path(args.out).write_text(dumps_spec(raw), encoding="utf-8")
    n_entries = sum(len(t) for t in conn.twist.entries.values())
    print(f"wrote {args.out}: {len(raw['christoffel'])} Christoffel entries, {n_entries} twist entries")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hiconn", description="Verify higher-connection identities on polynomial charts.")
    parser.add_argument("--version", action="version", version=f"hiconn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a verification suite on a spec file")
    run.add_argument("spec")
    run.add_argument("--suite", choices=SUITE_CHOICES, default="all")
    run.add_argument("--seed", type=int)
    run.add_argument("--points", type=int)
    run.add_argument("--tol", type=float)
    run.add_argument("--report", metavar="PATH")
    run.set_defaults(func=cmd_run)
    con = sub.add_parser("construct", help="build a parallel, almost torsion-free connection for the spec file's eta")
    con.add_argument("spec")
    con.add_argument("--out", required=True, metavar="PATH")
    con.set_defaults(func=cmd_construct)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
