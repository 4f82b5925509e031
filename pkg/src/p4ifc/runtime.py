"""Runtime values, stores, environments and the control plane."""
from __future__ import annotations

import ipaddress
import re
from dataclasses import dataclass, field
from typing import Union

from .errors import ArgumentTypeMismatch, EntriesError, EvalError, MatchFailure, ParseError, Span
from .errors import UnknownAction, UnknownTable
from .syntax import ast as A
from .syntax.types import (
    BitT,
    BoolT,
    Direction,
    FunctionT,
    HeaderT,
    IntT,
    MatchKindT,
    RecordT,
    SType,
    StackT,
    TableT,
    TypeDefs,
    UnitT,
    resolve_type,
)

INT_BITS = 64
INT_MIN = -(1 << (INT_BITS - 1))
INT_MAX = (1 << (INT_BITS - 1)) - 1


def wrap_int(x: int) -> int:
    return ((x - INT_MIN) % (1 << INT_BITS)) + INT_MIN


# -- values --


@dataclass(frozen=True)
class BoolV:
    value: bool


@dataclass(frozen=True)
class IntV:
    value: int


@dataclass(frozen=True)
class BitV:
    width: int
    value: int

    def __post_init__(self):
        if not 0 <= self.value < (1 << self.width):
            raise EvalError(f"bit<{self.width}> value {self.value} out of range")


@dataclass(frozen=True)
class UnitV:
    pass


@dataclass(frozen=True)
class RecordV:
    fields: tuple[tuple[str, "Value"], ...]

    def get(self, name: str) -> "Value":
        for f, v in self.fields:
            if f == name:
                return v
        raise EvalError(f"no field {name!r}")

    def set(self, name: str, value: "Value") -> "RecordV":
        return type(self)(tuple((f, value if f == name else v) for f, v in self.fields))


@dataclass(frozen=True)
class HeaderV(RecordV):
    valid: bool = True

    def set(self, name: str, value: "Value") -> "HeaderV":
        return HeaderV(tuple((f, value if f == name else v) for f, v in self.fields), self.valid)


@dataclass(frozen=True)
class StackV:
    elem: SType = field(compare=False)
    items: tuple["Value", ...]


@dataclass(frozen=True)
class MatchKindV:
    name: str


@dataclass(frozen=True, eq=False)
class FunClosure:
    name: str
    env: dict[str, int]
    params: tuple[A.Param, ...]
    cp_params: tuple[A.Param, ...]
    ret: SType
    body: A.Block
    delta: TypeDefs


@dataclass(frozen=True, eq=False)
class TableClosure:
    name: str
    loc: int
    env: dict[str, int]
    keys: tuple[A.KeyElem, ...]
    actions: tuple[A.ActionRef, ...]
    delta: TypeDefs | None = None


Value = Union[BoolV, IntV, BitV, UnitV, RecordV, HeaderV, StackV, MatchKindV, FunClosure, TableClosure]
CLOSURES = (FunClosure, TableClosure)


# -- signals --


@dataclass(frozen=True)
class Cont:
    def __str__(self) -> str:
        return "cont"


@dataclass(frozen=True)
class Ret:
    value: Value

    def __str__(self) -> str:
        return f"return {format_value(self.value)}"


@dataclass(frozen=True)
class ExitSig:
    def __str__(self) -> str:
        return "exit"


Signal = Union[Cont, Ret, ExitSig]
CONT = Cont()
EXIT = ExitSig()


# -- store and environment --

Location = int
Env = dict[str, Location]


@dataclass
class Store:
    """μ together with the store typing Ξ (one recorded type per location)."""

    values: dict[Location, Value] = field(default_factory=dict)
    types: dict[Location, SType] = field(default_factory=dict)
    next_loc: int = 0

    def alloc(self, value: Value, ty: SType) -> Location:
        loc = self.next_loc
        self.next_loc += 1
        self.values[loc] = value
        self.types[loc] = ty
        return loc

    def read(self, loc: Location) -> Value:
        try:
            return self.values[loc]
        except KeyError:
            raise EvalError(f"dangling location {loc}") from None

    def write(self, loc: Location, value: Value) -> None:
        if loc not in self.values:
            raise EvalError(f"dangling location {loc}")
        self.values[loc] = value

    def copy(self) -> "Store":
        return Store(dict(self.values), dict(self.types), self.next_loc)


# -- canonical values --


def init_value(delta: TypeDefs, ty: SType) -> Value:
    t = resolve_type(delta, ty)
    return _init(t)


def _init(t: SType) -> Value:
    match t.base:
        case BoolT():
            return BoolV(False)
        case IntT():
            return IntV(0)
        case BitT(w):
            return BitV(w, 0)
        case UnitT():
            return UnitV()
        case HeaderT(fields):
            return HeaderV(tuple((f, _init(ft)) for f, ft in fields), True)
        case RecordT(fields):
            return RecordV(tuple((f, _init(ft)) for f, ft in fields))
        case StackT(elem, size):
            return StackV(elem, tuple(_init(elem) for _ in range(size)))
    raise EvalError(f"no initial value for {t}")


def havoc_value(delta: TypeDefs, ty: SType) -> Value:
    """The value of an out-of-bounds read; deterministic and equal to init."""
    return init_value(delta, ty)


# -- value typing --


def value_has_type(v: Value, t: SType) -> bool:
    """Shape-level value typing for a resolved type; labels play no role."""
    match t.base:
        case BoolT():
            return isinstance(v, BoolV)
        case IntT():
            return isinstance(v, IntV) and INT_MIN <= v.value <= INT_MAX
        case BitT(w):
            return isinstance(v, BitV) and v.width == w and 0 <= v.value < (1 << w)
        case UnitT():
            return isinstance(v, UnitV)
        case HeaderT(fields):
            return (
                isinstance(v, HeaderV)
                and v.valid
                and [f for f, _ in v.fields] == [f for f, _ in fields]
                and all(value_has_type(fv, ft) for (_, fv), (_, ft) in zip(v.fields, fields))
            )
        case RecordT(fields):
            return (
                type(v) is RecordV
                and [f for f, _ in v.fields] == [f for f, _ in fields]
                and all(value_has_type(fv, ft) for (_, fv), (_, ft) in zip(v.fields, fields))
            )
        case StackT(elem, size):
            return isinstance(v, StackV) and len(v.items) == size and all(value_has_type(x, elem) for x in v.items)
        case MatchKindT(members):
            return isinstance(v, MatchKindV) and v.name in members
        case FunctionT(params, _, _, cp):
            return (
                isinstance(v, FunClosure)
                and tuple(p.direction for p in v.params) == tuple(d for d, _ in params)
                and len(v.cp_params) == len(cp)
            )
        case TableT():
            return isinstance(v, TableClosure)
    return False


# -- operators --


def eval_binop(op: str, a: Value, b: Value) -> Value:
    match a, b:
        case BitV(w, x), BitV(w2, y) if op not in ("<<", ">>"):
            if w != w2:
                raise EvalError(f"width mismatch in {op}: {w} vs {w2}")
            return _bits(op, w, x, y)
        case IntV(x), IntV(y) if op not in ("<<", ">>"):
            return _ints(op, x, y)
        case BoolV(x), BoolV(y):
            match op:
                case "&&":
                    return BoolV(x and y)
                case "||":
                    return BoolV(x or y)
                case "==":
                    return BoolV(x == y)
                case "!=":
                    return BoolV(x != y)
        case (BitV() | IntV()), (BitV() | IntV()) if op in ("<<", ">>"):
            return _shift(op, a, max(0, b.value))
    raise EvalError(f"operator {op} undefined on {a} and {b}")


def _compare(op: str, x: int, y: int) -> BoolV | None:
    match op:
        case "==":
            return BoolV(x == y)
        case "!=":
            return BoolV(x != y)
        case "<":
            return BoolV(x < y)
        case "<=":
            return BoolV(x <= y)
        case ">":
            return BoolV(x > y)
        case ">=":
            return BoolV(x >= y)
    return None


def _bits(op: str, w: int, x: int, y: int) -> Value:
    mask = (1 << w) - 1
    if (c := _compare(op, x, y)) is not None:
        return c
    match op:
        case "+":
            return BitV(w, (x + y) & mask)
        case "-":
            return BitV(w, (x - y) & mask)
        case "*":
            return BitV(w, (x * y) & mask)
        case "&":
            return BitV(w, x & y)
        case "|":
            return BitV(w, x | y)
        case "^":
            return BitV(w, x ^ y)
    raise EvalError(f"operator {op} undefined on bit<{w}>")


def _ints(op: str, x: int, y: int) -> Value:
    if (c := _compare(op, x, y)) is not None:
        return c
    match op:
        case "+":
            return IntV(wrap_int(x + y))
        case "-":
            return IntV(wrap_int(x - y))
        case "*":
            return IntV(wrap_int(x * y))
    raise EvalError(f"operator {op} undefined on int")


def _shift(op: str, a: BitV | IntV, amount: int) -> Value:
    if isinstance(a, BitV):
        if amount >= a.width:
            return BitV(a.width, 0)
        v = (a.value << amount) & ((1 << a.width) - 1) if op == "<<" else a.value >> amount
        return BitV(a.width, v)
    if op == "<<":
        return IntV(0 if amount >= INT_BITS else wrap_int(a.value << amount))
    return IntV(a.value >> min(amount, INT_BITS - 1))


# -- value text format --


def format_value(v: Value) -> str:
    match v:
        case BoolV(b):
            return "true" if b else "false"
        case IntV(x):
            return str(x)
        case BitV(w, x):
            return f"{x}:{w}"
        case UnitV():
            return "()"
        case RecordV(fields):
            return "{" + ", ".join(f"{f} = {format_value(x)}" for f, x in fields) + "}"
        case StackV(_, items):
            return "[" + ", ".join(format_value(x) for x in items) + "]"
        case MatchKindV(name):
            return name
        case FunClosure(name=name):
            return f"<function {name}>"
        case TableClosure(name=name):
            return f"<table {name}>"
    raise TypeError(v)


_NUMBER = re.compile(r"-?(?:0[xX][0-9a-fA-F]+|[0-9]+)\Z")
_DOTTED = re.compile(r"[0-9]+(?:\.[0-9]+){3}\Z")


def parse_number(text: str) -> int:
    text = text.strip()
    if _DOTTED.match(text):
        try:
            return int(ipaddress.IPv4Address(text))
        except ValueError:
            raise ParseError(f"bad IPv4 address {text!r}") from None
    if not _NUMBER.match(text):
        raise ParseError(f"bad number {text!r}")
    neg = text.startswith("-")
    body = text[1:] if neg else text
    n = int(body, 16) if body[:2].lower() == "0x" else int(body, 10)
    return -n if neg else n


def _split_top(text: str, sep: str = ",") -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "{[(":
            depth += 1
        elif ch in "}])":
            depth -= 1
            if depth < 0:
                raise ParseError(f"unbalanced brackets in {text!r}")
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if depth:
        raise ParseError(f"unbalanced brackets in {text!r}")
    parts.append("".join(cur))
    return [p.strip() for p in parts]


def parse_value(text: str, ty: SType) -> Value:
    """Parse the text form of a value of the resolved type ty."""
    text = text.strip()
    match ty.base:
        case BoolT():
            if text not in ("true", "false"):
                raise ParseError(f"expected a boolean, got {text!r}")
            return BoolV(text == "true")
        case IntT():
            n = parse_number(text)
            if not INT_MIN <= n <= INT_MAX:
                raise ParseError(f"{n} out of int range")
            return IntV(n)
        case BitT(w):
            num, sep, width = text.rpartition(":")
            if sep:
                if not width.strip().isdigit() or int(width) != w:
                    raise ParseError(f"{text!r} does not have width {w}")
                text = num
            n = parse_number(text)
            if not 0 <= n < (1 << w):
                raise ParseError(f"{n} does not fit in bit<{w}>")
            return BitV(w, n)
        case UnitT():
            if text != "()":
                raise ParseError(f"expected (), got {text!r}")
            return UnitV()
        case RecordT(fields) | HeaderT(fields):
            if not (text.startswith("{") and text.endswith("}")):
                raise ParseError(f"expected a {{...}} literal, got {text!r}")
            given: dict[str, str] = {}
            inner = text[1:-1].strip()
            for part in _split_top(inner) if inner else []:
                name, eq, rest = part.partition("=")
                name = name.strip()
                if not eq or name not in dict(fields):
                    raise ParseError(f"bad field assignment {part!r}")
                if name in given:
                    raise ParseError(f"field {name!r} given twice")
                given[name] = rest
            vals = tuple((f, parse_value(given[f], ft) if f in given else _init(ft)) for f, ft in fields)
            return HeaderV(vals, True) if isinstance(ty.base, HeaderT) else RecordV(vals)
        case StackT(elem, size):
            if not (text.startswith("[") and text.endswith("]")):
                raise ParseError(f"expected a [...] literal, got {text!r}")
            inner = text[1:-1].strip()
            parts = _split_top(inner) if inner else []
            if len(parts) != size:
                raise ParseError(f"expected {size} elements, got {len(parts)}")
            return StackV(elem, tuple(parse_value(p, elem) for p in parts))
    raise ParseError(f"values of type {ty} have no text form")


# -- paths into aggregate values --

PathElem = Union[str, int]
Path = tuple[PathElem, ...]

_PATH_TOKEN = re.compile(r"\.([A-Za-z_][A-Za-z0-9_]*)|\[([0-9]+)\]")


def parse_path(text: str) -> tuple[str, Path]:
    text = text.strip()
    m = re.match(r"[A-Za-z_][A-Za-z0-9_]*", text)
    if not m:
        raise ParseError(f"bad variable path {text!r}")
    root, pos, rest = m.group(), m.end(), []
    while pos < len(text):
        t = _PATH_TOKEN.match(text, pos)
        if not t:
            raise ParseError(f"bad variable path {text!r}")
        rest.append(t.group(1) if t.group(1) else int(t.group(2)))
        pos = t.end()
    return root, tuple(rest)


def format_path(root: str, path: Path) -> str:
    return root + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in path)


def type_at(ty: SType, path: Path) -> SType:
    for p in path:
        match ty.base, p:
            case (RecordT(fields) | HeaderT(fields)), str():
                ft = dict(fields).get(p)
                if ft is None:
                    raise ParseError(f"no field {p!r}")
                ty = ft
            case StackT(elem, size), int():
                if p >= size:
                    raise ParseError(f"index {p} out of bounds")
                ty = elem
            case _:
                raise ParseError(f"cannot select {p!r} from {ty}")
    return ty


def get_path(v: Value, path: Path) -> Value:
    for p in path:
        v = v.items[p] if isinstance(p, int) else v.get(p)
    return v


def set_path(v: Value, path: Path, new: Value) -> Value:
    if not path:
        return new
    head, rest = path[0], path[1:]
    if isinstance(head, int):
        items = list(v.items)
        items[head] = set_path(items[head], rest, new)
        return StackV(v.elem, tuple(items))
    return v.set(head, set_path(v.get(head), rest, new))


def leaf_paths(v: Value, path: Path = ()):
    """Yield (path, scalar value) pairs in field order."""
    match v:
        case RecordV(fields):
            for f, x in fields:
                yield from leaf_paths(x, path + (f,))
        case StackV(_, items):
            for i, x in enumerate(items):
                yield from leaf_paths(x, path + (i,))
        case _:
            yield path, v


# -- store specs --


@dataclass(frozen=True)
class StoreSpec:
    """Initial values for top-level variables, as `path = value` lines."""

    assignments: tuple[tuple[str, str], ...] = ()

    @classmethod
    def parse(cls, text: str) -> "StoreSpec":
        out = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            lhs, eq, rhs = line.partition("=")
            if not eq or not rhs.strip():
                raise ParseError(f"expected 'path = value', got {line!r}", Span(lineno, 1))
            try:
                parse_path(lhs)
            except ParseError as exc:
                raise ParseError(exc.message, Span(lineno, 1)) from None
            out.append((lhs.strip(), rhs.strip()))
        return cls(tuple(out))

    def to_text(self) -> str:
        return "".join(f"{p} = {v}\n" for p, v in self.assignments)

    @classmethod
    def from_values(cls, values: list[tuple[str, Value]]) -> "StoreSpec":
        lines = []
        for name, v in values:
            for path, leaf in leaf_paths(v):
                lines.append((format_path(name, path), format_value(leaf)))
        return cls(tuple(lines))


def initial_values(inputs: list[tuple[str, SType]], spec: StoreSpec | None) -> dict[str, Value]:
    """Values for the input variables: init values overwritten by the spec."""
    types = dict(inputs)
    values = {name: _init(t) for name, t in inputs}
    for lhs, rhs in (spec.assignments if spec else ()):
        root, path = parse_path(lhs)
        if root not in types:
            raise ParseError(f"unknown input variable {root!r}")
        leaf_t = type_at(types[root], path)
        values[root] = set_path(values[root], path, parse_value(rhs, leaf_t))
    return values


def dump_state(store: Store, env: Env, signal: Signal) -> str:
    lines = []
    for name, loc in env.items():
        v = store.read(loc)
        if isinstance(v, CLOSURES):
            continue
        for path, leaf in leaf_paths(v):
            lines.append(f"{format_path(name, path)} = {format_value(leaf)}")
    lines.append(f"signal: {signal}")
    return "\n".join(lines) + "\n"


# -- control plane --


@dataclass(frozen=True)
class Exact:
    value: Value


@dataclass(frozen=True)
class Lpm:
    value: int
    prefix: int
    width: int

    def matches(self, v: Value) -> bool:
        if not isinstance(v, BitV) or v.width != self.width:
            return False
        shift = self.width - self.prefix
        return (v.value >> shift) == (self.value >> shift)


Pattern = Union[Exact, Lpm]


@dataclass(frozen=True)
class ActionCall:
    action: str
    args: tuple[Value, ...] = ()


@dataclass(frozen=True)
class Entry:
    patterns: tuple[Pattern, ...]
    call: ActionCall


@dataclass(frozen=True)
class TableEntries:
    entries: tuple[Entry, ...] = ()
    default: ActionCall | None = None


@dataclass(frozen=True)
class ControlPlane:
    tables: dict[str, TableEntries] = field(default_factory=dict)

    def get(self, name: str) -> TableEntries:
        return self.tables.get(name, TableEntries())


def _pattern_matches(p: Pattern, v: Value) -> bool:
    match p:
        case Exact(value):
            return value == v
        case Lpm():
            return p.matches(v)
    return False


def table_match(cp: ControlPlane, table: "str | TableClosure", key_values: list[Value]) -> ActionCall:
    """Select the action for the given key values.

    All patterns of an entry must match. Among matching entries the one with
    the longest total lpm prefix wins, then the earliest one.
    """
    if isinstance(table, TableClosure):
        table = table.name
    te = cp.get(table)
    best, best_len = None, -1
    for e in te.entries:
        if len(e.patterns) != len(key_values):
            continue
        if all(_pattern_matches(p, v) for p, v in zip(e.patterns, key_values)):
            plen = sum(p.prefix for p in e.patterns if isinstance(p, Lpm))
            if plen > best_len:
                best, best_len = e, plen
    if best is not None:
        return best.call
    if te.default is not None:
        return te.default
    raise MatchFailure(f"no entry of table {table} matches")


_ENTRY = re.compile(r"(?P<table>[A-Za-z_]\w*)\s*:(?P<pats>.*?)->(?P<call>.*)\Z")
_DEFAULT = re.compile(r"default\s+(?P<table>[A-Za-z_]\w*)\s*->(?P<call>.*)\Z")
_CALL = re.compile(r"\s*(?P<name>[A-Za-z_]\w*)\s*(?:\((?P<args>.*)\))?\s*\Z")


def load_entries(source: str, program: A.Program, verdict=None) -> ControlPlane:
    """Parse and validate an entries file against the program's tables."""
    if verdict is None:
        from .typechecker import check_program

        verdict = check_program(program, program.lattice)
    infos = verdict.tables
    entries: dict[str, list[Entry]] = {}
    defaults: dict[str, ActionCall] = {}
    for lineno, raw in enumerate(source.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if m := _DEFAULT.match(line):
                info = _table_info(infos, m.group("table"))
                if info.name in defaults:
                    raise EntriesError(f"second default for table {info.name}")
                defaults[info.name] = _parse_call(m.group("call"), info)
            elif m := _ENTRY.match(line):
                info = _table_info(infos, m.group("table"))
                pats = _split_top(m.group("pats"))
                if len(pats) != len(info.kinds):
                    raise EntriesError(f"table {info.name} has {len(info.kinds)} keys, entry gives {len(pats)}")
                patterns = tuple(_parse_pattern(p, k, t) for p, k, t in zip(pats, info.kinds, info.key_types))
                entries.setdefault(info.name, []).append(Entry(patterns, _parse_call(m.group("call"), info)))
            else:
                raise ParseError("expected 'table: patterns -> action(args)' or 'default table -> action(args)'")
        except ParseError as exc:
            raise ParseError(exc.message, Span(lineno, 1)) from None
        except EntriesError as exc:
            raise type(exc)(f"line {lineno}: {exc}") from None
    names = set(entries) | set(defaults)
    return ControlPlane({n: TableEntries(tuple(entries.get(n, ())), defaults.get(n)) for n in sorted(names)})


def _table_info(infos, name: str):
    if name not in infos:
        raise UnknownTable(f"unknown table {name!r}")
    return infos[name]


def _parse_pattern(text: str, kind: str, ty: SType) -> Pattern:
    if kind == "lpm":
        value, slash, plen = text.partition("/")
        if not slash:
            raise ParseError(f"lpm pattern {text!r} needs a /prefix")
        w = ty.base.width
        if not plen.strip().isdigit() or not 0 <= int(plen) <= w:
            raise ParseError(f"bad prefix length in {text!r}")
        v = parse_value(value, ty)
        return Lpm(v.value, int(plen), w)
    if "/" in text:
        raise ParseError(f"prefix pattern {text!r} on a {kind} key")
    return Exact(parse_value(text, ty))


def _parse_call(text: str, info) -> ActionCall:
    m = _CALL.match(text)
    if not m:
        raise ParseError(f"bad action call {text.strip()!r}")
    name = m.group("name")
    if name not in info.actions:
        raise UnknownAction(f"action {name!r} is not listed in table {info.name}")
    params = info.cp_params.get(name, ())
    raw = (m.group("args") or "").strip()
    args = _split_top(raw) if raw else []
    if len(args) != len(params):
        raise ArgumentTypeMismatch(f"{name} takes {len(params)} control-plane arguments, got {len(args)}")
    vals = []
    for a, t in zip(args, params):
        try:
            vals.append(parse_value(a, t))
        except ParseError as exc:
            raise ArgumentTypeMismatch(f"argument {a!r} of {name}: {exc.message}") from None
    return ActionCall(name, tuple(vals))


def _format_pattern(p: Pattern) -> str:
    match p:
        case Exact(v):
            return format_value(v)
        case Lpm(value, prefix, width):
            text = str(ipaddress.IPv4Address(value)) if width == 32 else hex(value)
            return f"{text}/{prefix}"
    raise TypeError(p)


def _format_call(c: ActionCall) -> str:
    return f"{c.action}(" + ", ".join(format_value(a) for a in c.args) + ")"


def serialize_entries(cp: ControlPlane) -> str:
    lines = []
    for name, te in cp.tables.items():
        for e in te.entries:
            lines.append(f"{name}: " + ", ".join(_format_pattern(p) for p in e.patterns) + f" -> {_format_call(e.call)}")
        if te.default is not None:
            lines.append(f"default {name} -> {_format_call(te.default)}")
    return "\n".join(lines) + ("\n" if lines else "")
