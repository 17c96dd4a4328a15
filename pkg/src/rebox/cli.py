"""Command-line entry point.

Subcommands:

    analyze          infer and print the ownership scheme
    translate        emit Rust-syntax source text
    check            run the concrete-execution oracle suite on a program
    dump-constraints write the constraint system as JSON (and DIMACS)
    x3sat            decide a 3-literal exactly-one formula via the reduction

Exit codes: 0 success, 1 infeasible/UNSAT/violations, 2 parse or type
error, 3 unsupported construct.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .constraints import generate
from .frontend import parse_and_normalize
from .ir import MiniCError, ParseError, TypeMismatch, UnsupportedConstruct
from .oracle import (
    RuntimeFault, TooLarge, check_theorems, enumerate_models,
    random_program_source, run_concrete,
)
from .qualifiers import infer_qualifiers
from .sat import Infeasible, encode_cnf, parse_x3sat, solve_ownership, solve_sat
from .translate import translate_program

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_PARSE = 2
EXIT_UNSUPPORTED = 3


def _load(path: str, k):
    text = Path(path).read_text()
    program = parse_and_normalize(text, source_name=Path(path).name)
    system = generate(program, k=k)
    return program, system


def _write_or_print(text: str, path):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _dump_flags(args, system, scheme=None):
    if getattr(args, "dump_constraints", None):
        Path(args.dump_constraints).write_text(system.to_json() + "\n")
    if getattr(args, "dimacs", None):
        formula, _ = encode_cnf(system)
        Path(args.dimacs).write_text(formula.to_dimacs())
    if scheme is not None and getattr(args, "dump_scheme", None):
        import json
        Path(args.dump_scheme).write_text(
            json.dumps(scheme.to_json_rows(), indent=2) + "\n")


def cmd_analyze(args) -> int:
    program, system = _load(args.input, args.k)
    for w in system.warnings:
        print(w, file=sys.stderr)
    scheme = solve_ownership(system, mode=args.solver_mode)
    _dump_flags(args, system, scheme)
    print(f"k = {system.k}; {len(system.vars)} ownership variables; "
          f"{len(system.constraints)} constraints")
    for row in scheme.to_json_rows():
        print(f"{row['function']}: {row['path']} v{row['version']} = {row['value']}")
    return EXIT_OK


def cmd_translate(args) -> int:
    program, system = _load(args.input, args.k)
    for w in system.warnings:
        print(w, file=sys.stderr)
    scheme = solve_ownership(system, mode=args.solver_mode)
    quals = infer_qualifiers(program)
    text, plans, demoted = translate_program(program, scheme, quals, system)
    _dump_flags(args, system, scheme)
    _write_or_print(text, args.output)
    if args.output:
        print(f"wrote {args.output}")
        for decl in sorted(demoted):
            print(f"note: {decl[1]}.{decl[2]} reverted to a raw pointer "
                  f"(used after losing ownership)")
    return EXIT_OK


def cmd_check(args) -> int:
    program, system = _load(args.input, args.k)
    scheme = solve_ownership(system, mode=args.solver_mode)
    failures = 0
    print(f"feasible: yes ({len(system.vars)} variables)")

    try:
        models = enumerate_models(system, max_vars=args.max_enum)
        agree = models.satisfiable
        print(f"enumeration agreement: {'ok' if agree else 'MISMATCH'} "
              f"({len(models)} models)")
        if scheme.assignment not in models:
            print("enumeration agreement: scheme not in model set")
            failures += 1
        if not agree:
            failures += 1
    except TooLarge:
        print(f"enumeration agreement: skipped (more than {args.max_enum} variables)")

    if program.function("main") is not None:
        try:
            trace = run_concrete(program, scheme, system)
            report = check_theorems(trace, system, scheme)
            print(f"concrete run: {trace.alloc_count} allocations, "
                  f"{len(trace.steps)} steps, "
                  f"{len(trace.final_live)} leaked")
            print(f"unique-owner check: "
                  f"{'ok' if report.ok else 'VIOLATIONS'} "
                  f"({report.steps_checked} steps, "
                  f"{report.transfers_checked} transfer sites)")
            for v in report.violations:
                print(f"  violation at step {v.step}: {v.detail}")
            if trace.final_live:
                failures += 1
            if not report.ok:
                failures += 1
        except RuntimeFault as e:
            print(f"concrete run: fault: {e}")
            failures += 1
    else:
        print("concrete run: skipped (no zero-parameter main)")

    for i in range(args.random):
        seed = args.seed + i
        src = random_program_source(seed)
        p = parse_and_normalize(src, f"<random-{seed}>")
        s = generate(p)
        try:
            sch = solve_ownership(s)
        except Infeasible:
            print(f"random {seed}: infeasible (skipped)")
            continue
        trace = run_concrete(p, sch, s)
        rep = check_theorems(trace, s, sch)
        status = "ok" if rep.ok and not trace.final_live else "FAIL"
        print(f"random {seed}: {status}")
        if status == "FAIL":
            failures += 1
    return EXIT_INFEASIBLE if failures else EXIT_OK


def cmd_dump(args) -> int:
    program, system = _load(args.input, args.k)
    if args.dimacs:
        formula, _ = encode_cnf(system)
        Path(args.dimacs).write_text(formula.to_dimacs())
    _write_or_print(system.to_json() + "\n", args.output)
    return EXIT_OK


def cmd_x3sat(args) -> int:
    from .sat import reduce_x3sat
    formula = parse_x3sat(Path(args.input).read_text())
    system = reduce_x3sat(formula)
    cnf, _ = encode_cnf(system)
    if args.dimacs:
        Path(args.dimacs).write_text(cnf.to_dimacs())
    model = solve_sat(cnf)
    if model is None:
        print("UNSAT")
        return EXIT_INFEASIBLE
    print("SAT")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rebox",
                                 description="ownership inference and safe-pointer "
                                             "translation for MiniC programs")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, solver_default="first-model"):
        p.add_argument("input")
        p.add_argument("--k", type=int, default=None,
                       help="path-length bound override (>= computed minimum)")
        p.add_argument("--solver-mode", choices=["first-model", "maximize-owning"],
                       default=solver_default)
        p.add_argument("--dump-constraints", metavar="PATH")
        p.add_argument("--dump-scheme", metavar="PATH")
        p.add_argument("--dimacs", metavar="PATH")

    p = sub.add_parser("analyze", help="infer and print the ownership scheme")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("translate", help="emit Rust-syntax source text")
    common(p, solver_default="maximize-owning")
    p.add_argument("-o", "--output", metavar="PATH")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("check", help="run the oracle suite on a program")
    common(p)
    p.add_argument("--max-enum", type=int, default=20)
    p.add_argument("--random", type=int, default=0,
                   help="additionally check N random programs")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("dump-constraints", help="write the constraint system as JSON")
    p.add_argument("input")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("-o", "--output", metavar="PATH")
    p.add_argument("--dimacs", metavar="PATH")
    p.set_defaults(func=cmd_dump)

    p = sub.add_parser("x3sat", help="decide an exactly-one 3-literal formula")
    p.add_argument("input")
    p.add_argument("--dimacs", metavar="PATH")
    p.set_defaults(func=cmd_x3sat)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Infeasible as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except UnsupportedConstruct as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (ParseError, TypeMismatch, MiniCError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except (RuntimeFault,) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
