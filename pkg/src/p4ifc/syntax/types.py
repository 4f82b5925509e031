"""Security types and typedef resolution."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Union

from ..errors import CyclicTypedef, Span, UnknownTypeName
from ..lattice import Label, Lattice

MAX_WIDTH = 128


class Direction(enum.Enum):
    IN = "in"
    INOUT = "inout"
    OUT = "out"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class BoolT:
    pass


@dataclass(frozen=True)
class IntT:
    pass


@dataclass(frozen=True)
class BitT:
    width: int


@dataclass(frozen=True)
class UnitT:
    pass


@dataclass(frozen=True)
class NamedT:
    name: str


@dataclass(frozen=True)
class RecordT:
    fields: tuple[tuple[str, "SType"], ...]

    def field_type(self, name: str) -> "SType | None":
        return dict(self.fields).get(name)


@dataclass(frozen=True)
class HeaderT:
    fields: tuple[tuple[str, "SType"], ...]

    def field_type(self, name: str) -> "SType | None":
        return dict(self.fields).get(name)


@dataclass(frozen=True)
class StackT:
    elem: "SType"
    size: int


@dataclass(frozen=True)
class MatchKindT:
    members: frozenset[str]


@dataclass(frozen=True)
class TableT:
    pc: Label


@dataclass(frozen=True)
class FunctionT:
    params: tuple[tuple[Direction, "SType"], ...]
    pc: Label
    ret: "SType"
    cp_params: tuple["SType", ...] = ()


Shape = Union[BoolT, IntT, BitT, UnitT, NamedT, RecordT, HeaderT, StackT, MatchKindT, TableT, FunctionT]

AGGREGATES = (RecordT, HeaderT, StackT)
BASE_SCALARS = (BoolT, IntT, BitT)


@dataclass(frozen=True)
class SType:
    """A shape paired with its outer security label."""

    base: Shape
    label: Label

    def with_label(self, label: Label) -> "SType":
        return replace(self, label=label)


def shape_str(base: Shape) -> str:
    match base:
        case BoolT():
            return "bool"
        case IntT():
            return "int"
        case BitT(w):
            return f"bit<{w}>"
        case UnitT():
            return "void"
        case NamedT(name):
            return name
        case RecordT(fields) | HeaderT(fields):
            kind = "struct" if isinstance(base, RecordT) else "header"
            inner = "; ".join(f"{type_str(t)} {f}" for f, t in fields)
            return f"{kind} {{ {inner} }}"
        case StackT(elem, size):
            return f"{type_str(elem)}[{size}]"
        case MatchKindT(members):
            return "match_kind {" + ", ".join(sorted(members)) + "}"
        case TableT(pc):
            return f"table({pc})"
        case FunctionT(params, pc, ret, cp):
            ps = ", ".join(f"{d} {type_str(t)}" for d, t in params)
            if cp:
                ps += "; " + ", ".join(type_str(t) for t in cp)
            return f"({ps}) -[{pc}]-> {type_str(ret)}"
    raise TypeError(base)


def type_str(t: SType, bottom: Label | None = None) -> str:
    if bottom is not None and t.label == bottom:
        return shape_str(t.base)
    return f"<{shape_str(t.base)}, {t.label}>"


@dataclass(frozen=True)
class TypeDefs:
    """Δ: type names and declared match_kind members."""

    lattice: Lattice
    types: dict[str, SType] = field(default_factory=dict)
    match_kinds: frozenset[str] = frozenset({"exact", "lpm"})

    def bind(self, name: str, ty: SType) -> "TypeDefs":
        return replace(self, types={**self.types, name: ty})

    def add_match_kinds(self, members) -> "TypeDefs":
        return replace(self, match_kinds=self.match_kinds | frozenset(members))

    def __hash__(self) -> int:
        return id(self)


def _push_label(lat: Lattice, t: SType, label: Label) -> SType:
    """Join `label` into every leaf of t; aggregates keep a bottom outer label."""
    if label == lat.bottom:
        return t
    match t.base:
        case RecordT(fields):
            return SType(RecordT(tuple((f, _push_label(lat, ft, label)) for f, ft in fields)), lat.bottom)
        case HeaderT(fields):
            return SType(HeaderT(tuple((f, _push_label(lat, ft, label)) for f, ft in fields)), lat.bottom)
        case StackT(elem, size):
            return SType(StackT(_push_label(lat, elem, label), size), lat.bottom)
        case _:
            return t.with_label(lat.join(t.label, label))


def resolve_type(delta: TypeDefs, t: SType, span: Span | None = None) -> SType:
    """Unfold typedef names everywhere inside t."""
    return _resolve(delta, t, (), span)


def _resolve(delta: TypeDefs, t: SType, seen: tuple[str, ...], span: Span | None) -> SType:
    lat = delta.lattice
    match t.base:
        case NamedT(name):
            if name in seen:
                raise CyclicTypedef(name, span)
            if name not in delta.types:
                raise UnknownTypeName(name, span)
            inner = _resolve(delta, delta.types[name], seen + (name,), span)
            return _push_label(lat, inner, t.label)
        case RecordT(fields):
            fs = tuple((f, _resolve(delta, ft, seen, span)) for f, ft in fields)
            return _push_label(lat, SType(RecordT(fs), lat.bottom), t.label)
        case HeaderT(fields):
            fs = tuple((f, _resolve(delta, ft, seen, span)) for f, ft in fields)
            return _push_label(lat, SType(HeaderT(fs), lat.bottom), t.label)
        case StackT(elem, size):
            return _push_label(lat, SType(StackT(_resolve(delta, elem, seen, span), size), lat.bottom), t.label)
        case FunctionT(params, pc, ret, cp):
            return SType(
                FunctionT(
                    tuple((d, _resolve(delta, pt, seen, span)) for d, pt in params),
                    pc,
                    _resolve(delta, ret, seen, span),
                    tuple(_resolve(delta, ct, seen, span) for ct in cp),
                ),
                t.label,
            )
        case _:
            return t


def leaves(t: SType) -> list[SType]:
    """Scalar leaf types of a resolved type, in field order."""
    match t.base:
        case RecordT(fields) | HeaderT(fields):
            return [leaf for _, ft in fields for leaf in leaves(ft)]
        case StackT(elem, size):
            return leaves(elem) * size if size else []
        case _:
            return [t]


def leaf_labels(t: SType) -> list[Label]:
    match t.base:
        case RecordT(fields) | HeaderT(fields):
            return [lb for _, ft in fields for lb in leaf_labels(ft)]
        case StackT(elem, _):
            return leaf_labels(elem)
        case _:
            return [t.label]


def erase(t: SType, bottom: Label) -> Shape:
    """Shape with every label replaced by bottom, for label-blind comparisons."""
    match t.base:
        case RecordT(fields):
            return RecordT(tuple((f, SType(erase(ft, bottom), bottom)) for f, ft in fields))
        case HeaderT(fields):
            return HeaderT(tuple((f, SType(erase(ft, bottom), bottom)) for f, ft in fields))
        case StackT(elem, size):
            return StackT(SType(erase(elem, bottom), bottom), size)
        case _:
            return t.base
