"""AST for the annotated control-block language. Every node carries a span."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from ..errors import NO_SPAN, Span
from ..lattice import Label, Lattice
from .types import Direction, SType

# -- expressions --


@dataclass(frozen=True)
class BoolLit:
    value: bool
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class IntLit:
    """An integer literal; width None means type int, otherwise bit<width>."""

    value: int
    width: int | None = None
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Var:
    name: str
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Index:
    base: "Expr"
    index: "Expr"
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class RecordLit:
    fields: tuple[tuple[str, "Expr"], ...]
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Member:
    base: "Expr"
    field: str
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Call:
    callee: "Expr"
    args: tuple["Expr", ...]
    apply: bool = False  # written as t.apply()
    span: Span = field(default=NO_SPAN, compare=False)


Expr = Union[BoolLit, IntLit, Var, Index, BinOp, RecordLit, Member, Call]

# -- statements --


@dataclass(frozen=True)
class CallStmt:
    call: Call
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Assign:
    target: Expr
    value: Expr
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class If:
    cond: Expr
    then: "Stmt"
    orelse: "Stmt"
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Block:
    items: tuple["Stmt", ...]
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Exit:
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Return:
    value: Expr | None
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class DeclStmt:
    decl: "Decl"
    span: Span = field(default=NO_SPAN, compare=False)


Stmt = Union[CallStmt, Assign, If, Block, Exit, Return, DeclStmt]

# -- declarations --


@dataclass(frozen=True)
class Param:
    direction: Direction
    type: SType
    name: str
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class VarDecl:
    type: SType
    name: str
    init: Expr | None = None
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class TypedefDecl:
    type: SType
    name: str
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class AggregateDecl:
    """`header` or `struct` declaration; binds a type name like a typedef."""

    kind: str
    name: str
    fields: tuple[tuple[str, SType], ...]
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class MatchKindDecl:
    members: tuple[str, ...]
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class FunctionDecl:
    name: str
    params: tuple[Param, ...]
    ret: SType
    body: Block
    cp_params: tuple[Param, ...] = ()
    is_action: bool = False
    pc: Label | None = None  # from an @pc(...) annotation
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class KeyElem:
    expr: Expr
    kind: str
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class ActionRef:
    name: str
    args: tuple[Expr, ...] = ()
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class TableDecl:
    name: str
    keys: tuple[KeyElem, ...]
    actions: tuple[ActionRef, ...]
    span: Span = field(default=NO_SPAN, compare=False)


Decl = Union[VarDecl, TypedefDecl, AggregateDecl, MatchKindDecl, FunctionDecl, TableDecl]
TYPE_DECLS = (TypedefDecl, AggregateDecl, MatchKindDecl)


@dataclass(frozen=True)
class Control:
    name: str
    params: tuple[Param, ...]
    decls: tuple[Decl, ...]
    apply: Block
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Program:
    type_decls: tuple[Decl, ...]
    control: Control
    lattice: Lattice | None = field(default=None, compare=False, repr=False)


def span_of(node) -> Span:
    return getattr(node, "span", NO_SPAN)


def walk_statements(stmt: Stmt):
    """Yield stmt and every nested statement, outermost first."""
    yield stmt
    match stmt:
        case Block(items):
            for s in items:
                yield from walk_statements(s)
        case If(_, then, orelse):
            yield from walk_statements(then)
            yield from walk_statements(orelse)
        case DeclStmt(FunctionDecl(body=body)):
            yield from walk_statements(body)


def contains_exit_or_return(stmt: Stmt) -> bool:
    return any(isinstance(s, (Exit, Return)) for s in walk_statements(stmt))
