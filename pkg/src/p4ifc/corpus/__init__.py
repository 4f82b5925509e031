"""Case-study programs with golden verdicts, canned table entries and input stores."""
from __future__ import annotations

from dataclasses import dataclass
from importlib.resources import files
from pathlib import Path

from ..lattice import Label, Lattice, load_lattice
from ..runtime import ControlPlane, StoreSpec, load_entries
from ..syntax import ast as A
from ..syntax import parse_program
from ..typechecker import Verdict, check_program


@dataclass(frozen=True)
class CorpusCase:
    name: str
    variant: str | None  # "buggy", "fixed", or None when there is one version
    source: str
    lattice: str
    pc: Label
    expected: tuple[tuple[str, int], ...]  # (rule, line); empty means accepted
    entries: str
    store: str
    observers: tuple[Label, ...]

    @property
    def id(self) -> str:
        return f"{self.name}-{self.variant}" if self.variant else self.name

    @property
    def filename(self) -> str:
        return self.id + ".p4s"

    @property
    def accepted(self) -> bool:
        return not self.expected

    def load_lattice(self) -> Lattice:
        return load_lattice(self.lattice)

    def program(self) -> A.Program:
        return parse_program(self.source, self.load_lattice())

    def check(self) -> Verdict:
        p = self.program()
        return check_program(p, p.lattice, self.pc)

    def control_plane(self, program: A.Program | None = None, verdict: Verdict | None = None) -> ControlPlane:
        return load_entries(self.entries, program or self.program(), verdict)

    def store_spec(self) -> StoreSpec:
        return StoreSpec.parse(self.store)


TWO = ("low", "high")
DIAMOND = ("bot", "A", "B", "top")

# name, variant, lattice, pc, expected diagnostics
_TABLE = [
    ("topology", "buggy", "two-point", "low", (("T-Assign", 39),)),
    ("topology", "fixed", "two-point", "low", ()),
    ("d2r", "buggy", "two-point", "low", (("T-Assign", 51), ("T-Assign", 54))),
    ("d2r", "fixed", "two-point", "low", ()),
    ("cache", "buggy", "two-point", "low", (("T-TblDecl", 16),)),
    ("cache", "fixed", "two-point", "low", ()),
    ("app", "buggy", "two-point", "low", (("T-TblDecl", 20),)),
    ("app", "fixed", "two-point", "low", ()),
    ("isolation-alice", "buggy", "diamond", "A", (("T-Assign", 19), ("T-TblDecl", 24))),
    ("isolation-alice", "fixed", "diamond", "A", ()),
    ("isolation-bob", None, "diamond", "B", ()),
]


def _read(root, name: str) -> str:
    return root.joinpath(name).read_text()


def _pick(root, name: str, variant: str | None, ext: str) -> str:
    if variant:
        specific = root.joinpath(f"{name}-{variant}.{ext}")
        if specific.is_file():
            return specific.read_text()
    shared = root.joinpath(f"{name}.{ext}")
    return shared.read_text() if shared.is_file() else ""


def corpus_root(directory: str | Path | None = None):
    return Path(directory) if directory is not None else files(__name__)


def list_cases(directory: str | Path | None = None) -> list[CorpusCase]:
    """All shipped cases, or those whose files are present in directory."""
    root = corpus_root(directory)
    out = []
    for name, variant, lattice, pc, expected in _TABLE:
        fname = f"{name}-{variant}.p4s" if variant else f"{name}.p4s"
        if not root.joinpath(fname).is_file():
            continue
        out.append(
            CorpusCase(
                name,
                variant,
                _read(root, fname),
                lattice,
                pc,
                expected,
                _pick(root, name, variant, "entries"),
                _pick(root, name, variant, "store"),
                TWO if lattice == "two-point" else DIAMOND,
            )
        )
    return out


def lookup(name: str, variant: str | None = None) -> CorpusCase:
    for c in list_cases():
        if c.name == name and (c.variant == variant or variant is None and c.variant in (None, "fixed")):
            return c
    raise KeyError(f"no corpus case {name!r} {variant or ''}".rstrip())


def expected_verdict(case: CorpusCase) -> tuple[bool, tuple[tuple[str, int], ...]]:
    """(accepted, [(rule, line)]) as the checker should report it."""
    return case.accepted, case.expected


def observed_verdict(verdict: Verdict) -> tuple[bool, tuple[tuple[str, int], ...]]:
    return verdict.accepted, tuple((d.rule, d.span.line) for d in verdict.errors)
