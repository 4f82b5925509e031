"""Command-line entry point: check, run, nicheck, corpus."""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import __version__
from .corpus import list_cases, observed_verdict
from .errors import EntriesError, EvalError, NotALattice, ParseError, P4IfcError, UnknownLabel
from .interpreter import run_program
from .lattice import Lattice, load_lattice
from .ni import DEFAULT_TRIALS, check_noninterference
from .runtime import ControlPlane, ExitSig, StoreSpec, dump_state, load_entries
from .syntax import parse_program
from .typechecker import Verdict, check_program

OK, FAIL, USAGE, INTERNAL = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _color(text: str, code: str) -> str:
    if os.environ.get("P4IFC_COLOR") == "1":
        return f"\x1b[{code}m{text}\x1b[0m"
    return text


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _lattice(args) -> Lattice:
    try:
        return load_lattice(args.lattice)
    except (ParseError, NotALattice, OSError) as exc:
        raise UsageError(f"bad lattice {args.lattice!r}: {exc}") from None


def _pc(args, lattice: Lattice) -> str:
    pc = args.pc if args.pc is not None else lattice.bottom
    if pc not in lattice:
        raise UsageError(f"unknown pc label {pc!r}")
    return pc


def _load(args):
    """Parse and check the program; diagnostics for syntax errors use rule 'Parse'."""
    lattice = _lattice(args)
    pc = _pc(args, lattice)
    source = _read(args.file)
    try:
        program = parse_program(source, lattice)
    except (ParseError, UnknownLabel) as exc:
        span = getattr(exc, "span", None)
        line, col = (span.line, span.col) if span else (0, 0)
        return None, None, {"file": args.file, "line": line, "col": col, "rule": "Parse", "message": str(exc)}
    return program, check_program(program, lattice, pc), None


def _print_diags(args, verdict: Verdict | None, parse_error: dict | None) -> None:
    if parse_error is not None:
        if getattr(args, "json", False):
            print(json.dumps(parse_error, sort_keys=True))
        else:
            print(f"{args.file}:{parse_error['message']}")
        return
    for d in verdict.diagnostics:
        if getattr(args, "json", False):
            print(d.to_json(args.file))
        else:
            print(f"{args.file}:{d.span}: {_color(d.severity, '31')}: [{d.rule}] {d.message}")


def sidecar(path: str, ext: str) -> str | None:
    """A sibling data file: name-variant.ext, then name.ext with the last -suffix dropped."""
    p = Path(path)
    stems = [p.stem]
    if "-" in p.stem:
        stems.append(p.stem.rsplit("-", 1)[0])
    for stem in stems:
        cand = p.with_name(f"{stem}.{ext}")
        if cand.is_file():
            return str(cand)
    return None


def _entries(args, program, verdict) -> ControlPlane:
    if not args.entries and not args.no_sidecar:
        args.entries = sidecar(args.file, "entries")
    if not args.entries:
        return ControlPlane()
    try:
        return load_entries(_read(args.entries), program, verdict)
    except (EntriesError, ParseError) as exc:
        raise UsageError(f"{args.entries}: {exc}") from None


def _store(args) -> StoreSpec | None:
    if not args.store and not args.no_sidecar:
        args.store = sidecar(args.file, "store")
    if not args.store:
        return None
    try:
        return StoreSpec.parse(_read(args.store))
    except ParseError as exc:
        raise UsageError(f"{args.store}: {exc}") from None


def _require_checked(args, verdict: Verdict | None, parse_error) -> int | None:
    if parse_error is not None:
        _print_diags(args, verdict, parse_error)
        return FAIL
    if not verdict.accepted and not args.unchecked:
        _print_diags(args, verdict, None)
        print(f"{args.file}: rejected; pass --unchecked to run it anyway", file=sys.stderr)
        return FAIL
    return None


def cmd_check(args) -> int:
    program, verdict, parse_error = _load(args)
    _print_diags(args, verdict, parse_error)
    if parse_error is None and verdict.accepted:
        if not args.json:
            print(f"{args.file}: {_color('ok', '32')}")
        return OK
    return FAIL


def cmd_run(args) -> int:
    program, verdict, parse_error = _load(args)
    status = _require_checked(args, verdict, parse_error)
    if status is not None:
        return status
    cp, spec = _entries(args, program, verdict), _store(args)
    try:
        out = run_program(program, cp, spec)
    except ParseError as exc:
        raise UsageError(f"{args.store}: {exc}") from None
    print(dump_state(out.store, out.env, out.signal), end="")
    return FAIL if isinstance(out.signal, ExitSig) else OK


def cmd_nicheck(args) -> int:
    program, verdict, parse_error = _load(args)
    status = _require_checked(args, verdict, parse_error)
    if status is not None:
        return status
    for o in args.observer or ():
        if o not in program.lattice:
            raise UsageError(f"unknown observer label {o!r}")
    cp, base = _entries(args, program, verdict), _store(args)
    report = check_noninterference(
        program, cp, args.observer or None, args.trials, args.seed, base=base, name=args.file, verdict=verdict
    )
    print(report.to_json() if args.json else report.summary())
    return OK if report.ok else FAIL


def cmd_corpus(args) -> int:
    directory = args.dir
    if directory is not None and not Path(directory).is_dir():
        raise UsageError(f"no such directory: {directory}")
    cases = list_cases(directory)
    if not cases:
        print("no corpus cases found", file=sys.stderr)
        return USAGE
    failed = 0
    for case in cases:
        program = case.program()
        verdict = check_program(program, program.lattice, case.pc)
        got = observed_verdict(verdict)
        problems = []
        if got != (case.accepted, case.expected):
            problems.append(f"expected {list(case.expected) or 'accept'}, got {list(got[1]) or 'accept'}")
        elif case.accepted:
            cp = case.control_plane(program, verdict)
            report = check_noninterference(
                program, cp, list(case.observers), args.trials, args.seed, base=case.store_spec(), verdict=verdict
            )
            if not report.ok:
                problems.append(f"{len(report.failures)} noninterference failures")
        verdict_text = "accept" if case.accepted else "reject " + ", ".join(f"{r}@{n}" for r, n in case.expected)
        if problems:
            failed += 1
            print(f"{_color('FAIL', '31')} {case.id}: {'; '.join(problems)}")
        else:
            print(f"{_color('PASS', '32')} {case.id}: {verdict_text}")
    print(f"{len(cases) - failed}/{len(cases)} cases pass")
    return FAIL if failed else OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="p4ifc", description="Information-flow checker for annotated P4 control blocks.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def program_cmd(name: str, help: str):
        p = sub.add_parser(name, help=help)
        p.add_argument("file")
        p.add_argument("--lattice", default="two-point", help="built-in name or lattice file")
        p.add_argument("--pc", default=None, help="pc label (default: bottom)")
        return p

    c = program_cmd("check", "type-check a program")
    c.add_argument("--json", action="store_true", help="one JSON object per diagnostic")
    c.set_defaults(func=cmd_check)

    r = program_cmd("run", "evaluate a program and dump the final store")
    r.add_argument("--entries", help="table entries (default: sibling .entries file)")
    r.add_argument("--store", help="initial values (default: sibling .store file)")
    r.add_argument("--no-sidecar", action="store_true", help="do not look for sibling data files")
    r.add_argument("--unchecked", action="store_true")
    r.set_defaults(func=cmd_run)

    n = program_cmd("nicheck", "dual-execution noninterference testing")
    n.add_argument("--entries", help="table entries (default: sibling .entries file)")
    n.add_argument("--store", help="values mixed into the random inputs (default: sibling .store file)")
    n.add_argument("--no-sidecar", action="store_true", help="do not look for sibling data files")
    n.add_argument("--observer", action="append", help="repeatable; default every label")
    n.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--unchecked", action="store_true")
    n.add_argument("--json", action="store_true")
    n.set_defaults(func=cmd_nicheck)

    k = sub.add_parser("corpus", help="check every corpus case against its golden verdict")
    k.add_argument("--dir", default=None, help="loose corpus directory (default: bundled)")
    k.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    k.add_argument("--seed", type=int, default=0)
    k.set_defaults(func=cmd_corpus)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return OK if exc.code == 0 else USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"p4ifc: {exc}", file=sys.stderr)
        return USAGE
    except (EvalError, P4IfcError) as exc:
        print(f"p4ifc: error: {exc}", file=sys.stderr)
        return INTERNAL
    except Exception as exc:  # noqa: BLE001
        print(f"p4ifc: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return INTERNAL


if __name__ == "__main__":
    sys.exit(main())
