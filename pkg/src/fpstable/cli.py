"""Command-line driver: parse, lower, analyze, transform, instantiate, emit, test.

Every subcommand prints a short summary and, with ``--report``, writes a
JSON report carrying ``schemaVersion``.  Exit codes::

    0 ok            2 usage         3 parse error       4 ill-formed program
    5 missing input ranges in numeric mode               6 property violation
    7 an error bound could not be made finite
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .fpmodel import DOUBLE, get_format
from .instantiate import UnresolvedRangeError, error_bounds, instantiate_errors
from .lang.parser import ParseError, parse_program
from .lang.printer import show
from .lang.wellformed import WellFormednessError
from .optimizer import DEFAULT_CONFIG, BnBConfig, UnboundedError
from .semantics import SemanticsError, overall_error, program_fixpoint
from .transform import TransformError, transform_program

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_WELLFORMED = 4
EXIT_RANGES = 5
EXIT_VIOLATION = 6
EXIT_UNBOUNDED = 7


class UsageError(Exception):
    pass


def parse_ranges(text: Optional[str]) -> dict:
    """``"s=0:1000,v=1:200"`` to ``{"s": (0, 1000), "v": (1, 200)}`` with exact bounds."""
    out: dict = {}
    if not text:
        return out
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        name, sep, span = item.partition("=")
        lo, sep2, hi = span.partition(":")
        if not sep or not sep2 or not name.strip():
            raise UsageError(f"bad range {item!r}; expected name=lo:hi")
        try:
            a, b = Fraction(lo.strip()), Fraction(hi.strip())
        except ValueError as exc:
            raise UsageError(f"bad range bound in {item!r}") from exc
        if a > b:
            raise UsageError(f"empty range {item!r}")
        out[name.strip()] = (a, b)
    return out


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="program in the .rnl surface syntax")
    common.add_argument("--format", choices=("single", "double"),
                        help="target format (default: the program's, else double)")
    common.add_argument("--ranges", help="input ranges name=lo:hi,... (override the program's)")
    common.add_argument("--bnb-tol", default="1/100",
                        help="relative tolerance of branch and bound (default 1/100)")
    common.add_argument("--bnb-depth", type=int, default=DEFAULT_CONFIG.max_depth,
                        help="maximum bisection depth")
    common.add_argument("--mode", choices=("symbolic", "numeric"), default="numeric",
                        help="report numeric bounds (needs ranges) or symbolic ones only")
    common.add_argument("--stability-mode", choices=("linked", "rounded-input"),
                        default="rounded-input", help="relation of real and float inputs")
    common.add_argument("--samples", type=int, default=10_000,
                        help="fuzz: samples per function; check: total budget per property")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=int, default=1,
                        help="worker threads; results do not depend on it")
    common.add_argument("--out-dir", default=".", help="directory for emitted files")
    common.add_argument("--report", help="write the JSON report here")
    common.add_argument("--json", action="store_true", help="print the JSON report to stdout")

    p = argparse.ArgumentParser(prog="fpstable", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common], help="conditional error bounds and overall errors")
    sub.add_parser("transform", parents=[common], help="print the instrumented program")
    sub.add_parser("emit-c", parents=[common], help="write C, header and verification conditions")
    sub.add_parser("fuzz", parents=[common], help="differential oracle run")
    sub.add_parser("check", parents=[common], help="all property suites; nonzero exit on failure")
    return p


class _Context:
    def __init__(self, args):
        self.args = args
        self.path = Path(args.file)
        try:
            text = self.path.read_text()
        except OSError as exc:
            raise UsageError(f"cannot read {args.file}: {exc.strerror}") from exc
        self.prog = parse_program(text)
        self.fmt = get_format(args.format) if args.format else (self.prog.fmt or DOUBLE)
        self.ranges = dict(self.prog.range_map)
        self.ranges.update(parse_ranges(args.ranges))
        try:
            tol = Fraction(args.bnb_tol)
        except ValueError as exc:
            raise UsageError(f"bad --bnb-tol {args.bnb_tol!r}") from exc
        if tol <= 0 or args.bnb_depth < 0:
            raise UsageError("--bnb-tol must be positive and --bnb-depth nonnegative")
        if args.samples < 0 or args.threads < 1:
            raise UsageError("--samples must be nonnegative and --threads positive")
        self.cfg = BnBConfig(rel_tol=tol, max_depth=args.bnb_depth)
        self.unit = self.path.stem
        self._tprog = None
        self._interp = None

    @property
    def tprog(self):
        if self._tprog is None:
            self._tprog = transform_program(self.prog, self.fmt)
        return self._tprog

    @property
    def interp(self):
        if self._interp is None:
            self._interp = program_fixpoint(self.tprog.float_program, ranges=self.prog.range_map,
                                            fmt=self.fmt)
        return self._interp

    def base_report(self) -> dict:
        return {"schemaVersion": SCHEMA_VERSION, "command": self.args.command,
                "input": str(self.path), "format": self.fmt.name,
                "ranges": {k: [str(a), str(b)] for k, (a, b) in sorted(self.ranges.items())},
                "stabilityMode": self.args.stability_mode}

    def map(self, fn, items):
        items = list(items)
        if self.args.threads == 1:
            return [fn(x) for x in items]
        with ThreadPoolExecutor(self.args.threads) as pool:
            return list(pool.map(fn, items))


def _float(q) -> Optional[float]:
    return None if q is None else float(q)


# ---------------------------------------------------------------------------
# subcommands


def cmd_analyze(ctx: _Context) -> tuple[int, dict, list[str]]:
    rep = ctx.base_report()
    lines = []
    funcs = {}
    for name, fs in ctx.interp.items():
        entry = {"params": list(fs.params), "cebs": [c.to_json() for c in fs.cebs]}
        lines.append(f"{name}({', '.join(fs.params)}): {len(fs.cebs)} conditional error bounds")
        for c in fs.cebs:
            lines.append(f"  {c.show()}")
        for mode, key in (("stable-only", "symbolicStableOnly"), ("all", "symbolicAll")):
            try:
                entry[key] = show(overall_error(fs.cebs, mode))
            except SemanticsError:
                entry[key] = None
        funcs[name] = entry
    if ctx.args.mode == "numeric":
        bounds = error_bounds(ctx.interp, ctx.ranges, ctx.fmt, ctx.cfg, ctx.args.stability_mode,
                              overall=True)
        inst = instantiate_errors(ctx.tprog, ctx.ranges, ctx.fmt, ctx.cfg, "rounded-input",
                                  ctx.interp)
        for name, b in bounds.items():
            funcs[name]["numeric"] = {"stableOnly": _float(b.stable),
                                      "stableOnlyStatus": b.stable_status,
                                      "overall": _float(b.overall),
                                      "overallStatus": b.overall_status}
            stable = "unbounded" if b.stable is None else f"{float(b.stable):.3e}"
            overall = "unbounded" if b.overall is None else f"{float(b.overall):.3e}"
            lines.append(f"{name}: stable-only error <= {stable}, overall <= {overall}")
        rep["errorVariables"] = inst.to_json()
        for d, vals in inst.values.items():
            keys = {v.name: v.key for v in ctx.tprog[d].eps}
            for v, x in vals.items():
                lines.append(f"{d}.{v} = {float(x):.3e}  (error of {keys[v]})")
    rep["functions"] = funcs
    return EXIT_OK, rep, lines


def cmd_transform(ctx: _Context) -> tuple[int, dict, list[str]]:
    rep = ctx.base_report()
    rep["program"] = ctx.tprog.to_json()
    lines = ctx.tprog.show().rstrip("\n").splitlines()
    for d in ctx.tprog.decls:
        for v in d.eps:
            lines.append(f"  {d.name}.{v.name}: {v.contract()}")
    return EXIT_OK, rep, lines


def _plan(ctx: _Context, mode: str):
    from .codegen import make_plan

    return make_plan(ctx.tprog, mode, ranges=ctx.ranges, interp=ctx.interp, cfg=ctx.cfg,
                     stability=ctx.args.stability_mode, unit=ctx.unit)


def cmd_emit_c(ctx: _Context) -> tuple[int, dict, list[str]]:
    from .codegen import emit_all

    plan = _plan(ctx, ctx.args.mode)
    paths = emit_all(ctx.tprog, plan).write(ctx.args.out_dir, ctx.unit)
    rep = ctx.base_report()
    rep["mode"] = ctx.args.mode
    rep["files"] = {k.lstrip("."): v for k, v in paths.items()}
    return EXIT_OK, rep, [f"wrote {p}" for p in paths.values()]


def _harness(ctx: _Context):
    from .oracle.harness import Harness

    return Harness.build(ctx.prog, ctx.ranges, ctx.fmt, ctx.args.stability_mode, ctx.cfg)


def _fuzz(ctx: _Context, h, per_function: int) -> dict:
    names = [d.name for d in ctx.prog.decls]
    seed = ctx.args.seed

    def one(name):
        return name, h.fuzz(name, per_function, seed * 1000003 + names.index(name))

    return dict(ctx.map(one, names))


def _fuzz_lines(reports) -> list[str]:
    lines = []
    for name, r in reports.items():
        bound = "none" if r.bound is None else f"{float(r.bound):.3e}"
        lines.append(f"{name}: {r.samples} samples, {r.warnings} warnings, "
                     f"{r.instabilities} unstable, max stable error "
                     f"{float(r.max_stable_error):.3e} (bound {bound}), "
                     f"violations {r.thm2_violations}/{r.lemma2_misses}/"
                     f"{r.thm3_violations}/{r.stable_bound_violations}")
    return lines


def cmd_fuzz(ctx: _Context) -> tuple[int, dict, list[str]]:
    from .oracle.harness import fuzz_summary

    reports = _fuzz(ctx, _harness(ctx), ctx.args.samples)
    rep = ctx.base_report()
    rep.update(fuzz_summary(reports))
    ok = all(r.ok for r in reports.values())
    lines = _fuzz_lines(reports)
    lines.append("violations are counted as value/warning/stable-flow/bound")
    return (EXIT_OK if ok else EXIT_VIOLATION), rep, lines


def cmd_check(ctx: _Context) -> tuple[int, dict, list[str]]:
    from .codegen import CodegenError, build_native, find_compiler
    from .oracle.harness import fuzz_summary
    from .oracle.lemma import LemmaChecker
    from .oracle.native import compare_native

    h = _harness(ctx)
    n = ctx.args.samples
    names = [d.name for d in ctx.prog.decls]
    reports = _fuzz(ctx, h, max(n // max(len(names), 1), 1))
    checker = LemmaChecker(h)
    per_case = max(n // max(len(checker.cases), 1), 1)
    lemma = checker.check(per_case, ctx.args.seed)
    rep = ctx.base_report()
    rep["fuzz"] = fuzz_summary(reports)
    rep["lemma1"] = lemma.to_json()
    rep["lemma1"]["cases"] = len(checker.cases)
    rep["lemma1"]["skippedInLoops"] = checker.skipped
    ok = all(r.ok for r in reports.values()) and lemma.violations == 0
    lines = _fuzz_lines(reports)
    lines.append(f"guard abstraction: {lemma.samples} samples over {len(checker.cases)} guards, "
                 f"{lemma.violations} violations")
    native = {"skipped": "no C compiler"}
    if find_compiler():
        try:
            plan = _plan(ctx, "numeric")
            lib = build_native(ctx.tprog, plan)
            agree = compare_native(ctx.tprog, plan, lib, ctx.ranges, min(n, 10_000), ctx.args.seed)
            native = {k: r.to_json() for k, r in agree.items()}
            bad = sum(not r.ok for r in agree.values())
            ok = ok and bad == 0
            lines.append(f"emitted C: {len(agree)} functions, {bad} disagreeing")
        except CodegenError as exc:
            native = {"error": str(exc)}
            ok = False
            lines.append(f"emitted C failed: {exc}")
    rep["native"] = native
    rep["ok"] = ok
    lines.append("all properties hold" if ok else "PROPERTY VIOLATION")
    return (EXIT_OK if ok else EXIT_VIOLATION), rep, lines


COMMANDS = {"analyze": cmd_analyze, "transform": cmd_transform, "emit-c": cmd_emit_c,
            "fuzz": cmd_fuzz, "check": cmd_check}


def run(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        ctx = _Context(args)
        code, report, lines = COMMANDS[args.command](ctx)
    except UsageError as exc:
        print(f"fpstable: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"fpstable: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (WellFormednessError, TransformError) as exc:
        print(f"fpstable: ill-formed program: {exc}", file=sys.stderr)
        return EXIT_WELLFORMED
    except UnresolvedRangeError as exc:
        print(f"fpstable: {exc} (give --ranges or use --mode symbolic)", file=sys.stderr)
        return EXIT_RANGES
    except UnboundedError as exc:
        print(f"fpstable: unbounded error: {exc}", file=sys.stderr)
        return EXIT_UNBOUNDED
    report["exitCode"] = code
    text = json.dumps(report, indent=2, sort_keys=True, default=str)
    if args.report:
        Path(args.report).write_text(text + "\n")
    if args.json:
        print(text)
    else:
        print("\n".join(lines))
    return code


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
