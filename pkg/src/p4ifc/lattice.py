"""Finite security lattices.

A lattice is loaded from Hasse-style cover pairs; the reflexive-transitive
closure and the join/meet tables are computed once at load time, after which
the object is immutable.
"""
from __future__ import annotations

import re
from collections.abc import Iterable
from functools import reduce
from pathlib import Path

from .errors import NotALattice, ParseError, Span, UnknownLabel

Label = str

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class Lattice:
    def __init__(
        self,
        elements: Iterable[Label],
        order: Iterable[tuple[Label, Label]],
        bottom: Label | None = None,
        top: Label | None = None,
        name: str = "<lattice>",
    ):
        self.name = name
        self.elements: tuple[Label, ...] = tuple(dict.fromkeys(elements))
        if not self.elements:
            raise NotALattice("a lattice needs at least one element")
        self._index = {e: i for i, e in enumerate(self.elements)}
        self.covers: tuple[tuple[Label, Label], ...] = tuple(order)
        for a, b in self.covers:
            self._check(a)
            self._check(b)

        n = len(self.elements)
        reach = [[i == j for j in range(n)] for i in range(n)]
        for a, b in self.covers:
            reach[self._index[a]][self._index[b]] = True
        for k in range(n):
            rk = reach[k]
            for i in range(n):
                if reach[i][k]:
                    ri = reach[i]
                    for j in range(n):
                        if rk[j]:
                            ri[j] = True
        for i in range(n):
            for j in range(i + 1, n):
                if reach[i][j] and reach[j][i]:
                    raise NotALattice(
                        f"cyclic order: {self.elements[i]} and {self.elements[j]} "
                        "are below each other"
                    )
        self._leq = frozenset(
            (self.elements[i], self.elements[j])
            for i in range(n)
            for j in range(n)
            if reach[i][j]
        )

        self.bottom = self._extremum(bottom, lower=True)
        self.top = self._extremum(top, lower=False)

        self._join: dict[tuple[Label, Label], Label] = {}
        self._meet: dict[tuple[Label, Label], Label] = {}
        up = {e: frozenset(x for x in self.elements if (e, x) in self._leq) for e in self.elements}
        down = {e: frozenset(x for x in self.elements if (x, e) in self._leq) for e in self.elements}
        for a in self.elements:
            for b in self.elements:
                bounds = up[a] & up[b]
                lub = [x for x in bounds if up[x] == bounds]
                if len(lub) != 1:
                    raise NotALattice(f"{a} and {b} have no least upper bound")
                self._join[a, b] = lub[0]
                bounds = down[a] & down[b]
                glb = [x for x in bounds if down[x] == bounds]
                if len(glb) != 1:
                    raise NotALattice(f"{a} and {b} have no greatest lower bound")
                self._meet[a, b] = glb[0]

    def _extremum(self, declared: Label | None, lower: bool) -> Label:
        what = "bottom" if lower else "top"
        if lower:
            candidates = [x for x in self.elements if all((x, y) in self._leq for y in self.elements)]
        else:
            candidates = [x for x in self.elements if all((y, x) in self._leq for y in self.elements)]
        if not candidates:
            raise NotALattice(f"no {what} element")
        if declared is not None:
            self._check(declared)
            if declared != candidates[0]:
                raise NotALattice(f"declared {what} {declared!r} is not the {what} of the order")
        return candidates[0]

    def _check(self, label: Label, span: Span | None = None) -> None:
        if label not in self._index:
            raise UnknownLabel(label, span)

    def __contains__(self, label: object) -> bool:
        return label in self._index

    def __iter__(self):
        return iter(self.elements)

    def __len__(self) -> int:
        return len(self.elements)

    def __repr__(self) -> str:
        return f"Lattice({self.name!r}, {list(self.elements)})"

    def require(self, label: Label, span: Span | None = None) -> Label:
        self._check(label, span)
        return label

    def leq(self, a: Label, b: Label) -> bool:
        self._check(a)
        self._check(b)
        return (a, b) in self._leq

    def join(self, a: Label, b: Label) -> Label:
        self._check(a)
        self._check(b)
        return self._join[a, b]

    def meet(self, a: Label, b: Label) -> Label:
        self._check(a)
        self._check(b)
        return self._meet[a, b]

    def join_all(self, labels: Iterable[Label]) -> Label:
        return reduce(self.join, labels, self.bottom)

    def meet_all(self, labels: Iterable[Label]) -> Label:
        return reduce(self.meet, labels, self.top)

    def below(self, label: Label) -> list[Label]:
        """All elements x with x ⊑ label, in declaration order."""
        return [x for x in self.elements if self.leq(x, label)]

    def to_text(self) -> str:
        lines = [
            f"elements: {' '.join(self.elements)}",
            f"bottom: {self.bottom}",
            f"top: {self.top}",
        ]
        lines += [f"order: {a} <= {b}" for a, b in self.covers]
        return "\n".join(lines) + "\n"


def two_point() -> Lattice:
    return Lattice(["low", "high"], [("low", "high")], "low", "high", name="two-point")


def diamond() -> Lattice:
    return Lattice(
        ["bot", "A", "B", "top"],
        [("bot", "A"), ("bot", "B"), ("A", "top"), ("B", "top")],
        "bot",
        "top",
        name="diamond",
    )


BUILTIN = {"two-point": two_point, "diamond": diamond}


def parse_lattice(source: str, name: str = "<lattice>") -> Lattice:
    elements: list[Label] | None = None
    bottom = top = None
    order: list[tuple[Label, Label]] = []
    for lineno, raw in enumerate(source.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, rest = line.partition(":")
        if not sep:
            raise ParseError(f"expected 'key: value', got {line!r}", Span(lineno, 1))
        key, rest = key.strip(), rest.strip()
        if key == "elements":
            names = rest.split()
            for n in names:
                if not _IDENT.match(n):
                    raise ParseError(f"bad label name {n!r}", Span(lineno, 1))
            elements = (elements or []) + names
        elif key in ("bottom", "top"):
            if not _IDENT.match(rest):
                raise ParseError(f"bad label name {rest!r}", Span(lineno, 1))
            if key == "bottom":
                bottom = rest
            else:
                top = rest
        elif key == "order":
            m = re.fullmatch(r"(\w+)\s*<=\s*(\w+)", rest)
            if not m:
                raise ParseError(f"expected 'order: a <= b', got {rest!r}", Span(lineno, 1))
            order.append((m.group(1), m.group(2)))
        else:
            raise ParseError(f"unknown key {key!r}", Span(lineno, 1))
    if elements is None:
        raise ParseError("missing 'elements:' line")
    return Lattice(elements, order, bottom, top, name=name)


def load_lattice(source: str) -> Lattice:
    """Resolve a built-in lattice name, a path to a lattice file, or lattice text."""
    if source in BUILTIN:
        return BUILTIN[source]()
    if "\n" not in source and ":" not in source:
        path = Path(source)
        return parse_lattice(path.read_text(encoding="utf-8"), name=path.stem)
    return parse_lattice(source)
