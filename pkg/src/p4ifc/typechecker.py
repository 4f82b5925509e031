"""Security type checking for control blocks.

The checker collects every diagnostic it can instead of stopping at the first
one. A non-flow error (unknown name, shape mismatch) poisons only the
enclosing statement or declaration; flow violations are recorded and checking
continues with the computed types.
"""
from __future__ import annotations

import json
from collections.abc import Callable
from dataclasses import dataclass, field

from .errors import CyclicTypedef, P4IfcError, Span, UnknownLabel, UnknownTypeName
from .lattice import Label, Lattice
from .syntax import ast as A
from .syntax.pretty import pp_expr
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
    erase,
    leaf_labels,
    leaves,
    resolve_type,
    type_str,
)

TypeEnv = dict[str, SType]
RETURN = "return"

_ARITH = ("+", "-", "*")
_EQ = ("==", "!=")
_REL = ("<", "<=", ">", ">=")
_BOOL = ("&&", "||")
_BITWISE = ("&", "|", "^")
_SHIFT = ("<<", ">>")


@dataclass(frozen=True)
class Diagnostic:
    span: Span
    rule: str
    kind: str
    message: str
    found_label: Label | None = None
    required_label: Label | None = None
    severity: str = "error"

    def to_dict(self, file: str = "") -> dict:
        return {
            "file": file,
            "line": self.span.line,
            "col": self.span.col,
            "rule": self.rule,
            "kind": self.kind,
            "severity": self.severity,
            "message": self.message,
            "found_label": self.found_label,
            "required_label": self.required_label,
        }

    def to_json(self, file: str = "") -> str:
        return json.dumps(self.to_dict(file), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "Diagnostic":
        return cls(
            Span(d["line"], d["col"]),
            d["rule"],
            d.get("kind", "Error"),
            d["message"],
            d.get("found_label"),
            d.get("required_label"),
            d.get("severity", "error"),
        )

    def __str__(self) -> str:
        return f"{self.span}: [{self.rule}] {self.message}"


@dataclass(frozen=True)
class TableInfo:
    """What the control plane needs to know about a declared table."""

    name: str
    key_types: tuple[SType, ...]
    kinds: tuple[str, ...]
    actions: tuple[str, ...]
    cp_params: dict[str, tuple[SType, ...]]


@dataclass
class Verdict:
    accepted: bool
    diagnostics: list[Diagnostic]
    gamma: TypeEnv = field(default_factory=dict, compare=False, repr=False)
    delta: TypeDefs | None = field(default=None, compare=False, repr=False)
    tables: dict[str, TableInfo] = field(default_factory=dict, compare=False, repr=False)

    @property
    def errors(self) -> list[Diagnostic]:
        return [d for d in self.diagnostics if d.severity == "error"]


class TypeCheckError(P4IfcError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


class _Poison(Exception):
    pass


StatementHook = Callable[[TypeEnv, TypeDefs, Label, A.Stmt], None]


class Checker:
    def __init__(self, lattice: Lattice, on_statement: StatementHook | None = None):
        self.lat = lattice
        self.bot = lattice.bottom
        self.top = lattice.top
        self.diags: list[Diagnostic] = []
        self.mute = 0
        # write-effect collectors for pc_fn / pc_tbl inference, innermost last
        self.effects: list[list[Label]] = []
        self.on_statement = on_statement
        self.tables: dict[str, TableInfo] = {}

    # -- reporting --

    def report(self, span, rule, kind, message, found=None, required=None) -> None:
        if not self.mute:
            self.diags.append(Diagnostic(span, rule, kind, message, found, required))

    def fail(self, span, rule, kind, message):
        self.report(span, rule, kind, message)
        raise _Poison

    def flow(self, span, rule, message, found, required) -> None:
        self.report(span, rule, "FlowViolation", message, found, required)

    def effect(self, label: Label) -> None:
        if self.effects:
            self.effects[-1].append(label)

    def resolve(self, delta: TypeDefs, t: SType, span: Span, rule: str) -> SType:
        try:
            return resolve_type(delta, t, span)
        except UnknownTypeName as exc:
            self.fail(span, rule, "UnknownTypeName", str(exc))
        except CyclicTypedef as exc:
            self.fail(span, rule, "CyclicTypedef", str(exc))

    def show(self, t: SType) -> str:
        return type_str(t, self.bot)

    # -- helpers on types --

    def same_shape(self, a: SType, b: SType) -> bool:
        return erase(a, self.bot) == erase(b, self.bot)

    def flows_to(self, src: SType, dst: SType, span: Span, rule: str, what: str, pc: Label | None = None) -> bool:
        """Leaf-wise src ⊑ dst, and pc ⊑ dst when a pc is given."""
        for s, d in zip(leaves(src), leaves(dst)):
            if not self.lat.leq(s.label, d.label):
                self.flow(span, rule, f"{what}: {s.label} data flows into {d.label}", s.label, d.label)
                return False
            if pc is not None and not self.lat.leq(pc, d.label):
                self.flow(span, rule, f"{what}: {d.label} location written under pc {pc}", pc, d.label)
                return False
        return True

    def write_label(self, t: SType) -> Label:
        return self.lat.meet_all(leaf_labels(t))

    # -- expressions --

    def type_expr(self, gamma: TypeEnv, delta: TypeDefs, pc: Label, e: A.Expr) -> tuple[SType, Direction]:
        bot = self.bot
        match e:
            case A.BoolLit():
                return SType(BoolT(), bot), Direction.IN
            case A.IntLit(_, None):
                return SType(IntT(), bot), Direction.IN
            case A.IntLit(_, w):
                return SType(BitT(w), bot), Direction.IN
            case A.Var(name):
                if name not in gamma:
                    self.fail(e.span, "T-Var", "UnknownVariable", f"unknown variable {name!r}")
                return gamma[name], Direction.INOUT
            case A.BinOp(op, left, right):
                t1, _ = self.type_expr(gamma, delta, pc, left)
                t2, _ = self.type_expr(gamma, delta, pc, right)
                shape = self.binop_shape(op, t1, t2, e.span)
                return SType(shape, self.lat.join(t1.label, t2.label)), Direction.IN
            case A.Index(base, index):
                tb, d = self.type_expr(gamma, delta, pc, base)
                ti, _ = self.type_expr(gamma, delta, pc, index)
                if not isinstance(tb.base, StackT):
                    self.fail(e.span, "T-Index", "TypeMismatch", f"indexing a non-stack of type {self.show(tb)}")
                if not isinstance(ti.base, (IntT, BitT)):
                    self.fail(e.span, "T-Index", "TypeMismatch", f"stack index of type {self.show(ti)}")
                elem = tb.base.elem
                chi1 = self.write_label(elem)
                if not self.lat.leq(ti.label, chi1):
                    self.flow(e.span, "T-Index", f"index label {ti.label} above element label {chi1}", ti.label, chi1)
                return elem, d
            case A.Member(base, fname):
                tb, d = self.type_expr(gamma, delta, pc, base)
                rule = "T-MemHdr" if isinstance(tb.base, HeaderT) else "T-MemRec"
                if not isinstance(tb.base, (RecordT, HeaderT)):
                    self.fail(e.span, rule, "TypeMismatch", f"no field {fname!r} on type {self.show(tb)}")
                ft = tb.base.field_type(fname)
                if ft is None:
                    self.fail(e.span, rule, "TypeMismatch", f"no field {fname!r} on type {self.show(tb)}")
                return ft, d
            case A.RecordLit(fields):
                fts = tuple((f, self.type_expr(gamma, delta, pc, v)[0]) for f, v in fields)
                return SType(RecordT(fts), bot), Direction.IN
            case A.Call():
                return self.type_call(gamma, delta, pc, e), Direction.IN
        raise TypeError(e)

    def binop_shape(self, op: str, t1: SType, t2: SType, span: Span):
        s1, s2 = t1.base, t2.base
        numeric = (IntT, BitT)
        ok = None
        if op in _ARITH and s1 == s2 and isinstance(s1, numeric):
            ok = s1
        elif op in _EQ and s1 == s2 and isinstance(s1, (BoolT, IntT, BitT)):
            ok = BoolT()
        elif op in _REL and s1 == s2 and isinstance(s1, numeric):
            ok = BoolT()
        elif op in _BOOL and isinstance(s1, BoolT) and isinstance(s2, BoolT):
            ok = BoolT()
        elif op in _BITWISE and s1 == s2 and isinstance(s1, BitT):
            ok = s1
        elif op in _SHIFT and isinstance(s1, numeric) and isinstance(s2, numeric):
            ok = s1
        if ok is None:
            self.fail(span, "T-BinOp", "TypeMismatch", f"operator {op} undefined on {self.show(t1)} and {self.show(t2)}")
        return ok

    def type_call(self, gamma: TypeEnv, delta: TypeDefs, pc: Label, e: A.Call) -> SType:
        ct, _ = self.type_expr(gamma, delta, pc, e.callee)
        name = pp_expr(e.callee)
        if e.apply or isinstance(ct.base, TableT):
            if not isinstance(ct.base, TableT):
                self.fail(e.span, "T-TblCall", "NotATable", f"{name} is not a table")
            if e.args:
                self.fail(e.span, "T-TblCall", "ArityMismatch", f"table {name} takes no arguments")
            pc_tbl = ct.base.pc
            if not self.lat.leq(pc, pc_tbl):
                self.flow(e.span, "T-TblCall", f"table {name} applied under pc {pc} above its pc {pc_tbl}", pc, pc_tbl)
            self.effect(pc_tbl)
            return SType(UnitT(), self.bot)
        if not isinstance(ct.base, FunctionT):
            self.fail(e.span, "T-Call", "NotAFunction", f"{name} is not a function")
        fn = ct.base
        params = list(fn.params) + [(Direction.IN, t) for t in fn.cp_params]
        if len(params) != len(e.args):
            self.fail(e.span, "T-Call", "ArityMismatch", f"{name} expects {len(params)} arguments, got {len(e.args)}")
        if not self.lat.leq(pc, fn.pc):
            self.flow(e.span, "T-Call", f"call to {name} under pc {pc} above its pc {fn.pc}", pc, fn.pc)
        self.effect(fn.pc)
        for (d, pt), arg in zip(params, e.args):
            self.check_arg(gamma, delta, pc, d, pt, arg, "T-Call")
        return fn.ret

    def check_arg(self, gamma, delta, pc: Label | None, d: Direction, pt: SType, arg: A.Expr, rule: str) -> None:
        at, ad = self.type_expr(gamma, delta, pc if pc is not None else self.bot, arg)
        what = f"argument {pp_expr(arg)}"
        if not self.same_shape(at, pt):
            self.fail(arg.span, rule, "TypeMismatch", f"{what} has type {self.show(at)}, expected {self.show(pt)}")
        if d is Direction.IN:
            self.flows_to(at, pt, arg.span, rule, what)
            return
        if ad is not Direction.INOUT:
            self.fail(arg.span, rule, "NotAssignable", f"{what} for an {d} parameter is not an l-value")
        if at != pt:
            for s, p in zip(leaves(at), leaves(pt)):
                if s.label != p.label:
                    self.flow(
                        arg.span, "T-SubType-In", f"{what} for an {d} parameter must have exactly type {self.show(pt)}",
                        s.label, p.label,
                    )
                    break
        if d is Direction.OUT:
            if pc is not None:
                self.flows_to(at, at, arg.span, rule, what, pc)
            self.effect(self.write_label(at))

    # -- statements --

    def type_stmt(self, gamma: TypeEnv, delta: TypeDefs, pc: Label, s: A.Stmt) -> tuple[TypeEnv, TypeDefs]:
        if self.on_statement is not None and not self.mute:
            self.on_statement(gamma, delta, pc, s)
        try:
            return self._type_stmt(gamma, delta, pc, s)
        except _Poison:
            return gamma, delta

    def _type_stmt(self, gamma: TypeEnv, delta: TypeDefs, pc: Label, s: A.Stmt) -> tuple[TypeEnv, TypeDefs]:
        match s:
            case A.Block(items):
                # declarations are threaded through the block but do not escape it
                scope: set[tuple[str, str]] = set()
                inner, inner_delta = gamma, delta
                for item in items:
                    if isinstance(item, A.DeclStmt):
                        self.declare(scope, item.decl)
                    inner, inner_delta = self.type_stmt(inner, inner_delta, pc, item)
                return gamma, delta
            case A.Assign(target, value):
                lt, ld = self.type_expr(gamma, delta, pc, target)
                what = f"assignment to {pp_expr(target)}"
                if ld is not Direction.INOUT or isinstance(lt.base, (FunctionT, TableT, MatchKindT)):
                    self.fail(s.span, "T-Assign", "NotAssignable", f"{pp_expr(target)} is not assignable")
                rt, _ = self.type_expr(gamma, delta, pc, value)
                if not self.same_shape(rt, lt):
                    self.fail(s.span, "T-Assign", "TypeMismatch", f"{what}: {self.show(rt)} vs {self.show(lt)}")
                self.flows_to(rt, lt, s.span, "T-Assign", what, pc)
                self.effect(self.write_label(lt))
                return gamma, delta
            case A.If(cond, then, orelse):
                ct, _ = self.type_expr(gamma, delta, pc, cond)
                if not isinstance(ct.base, BoolT):
                    self.fail(s.span, "T-Cond", "TypeMismatch", f"condition has type {self.show(ct)}")
                inner = self.lat.join(ct.label, pc)
                self.type_stmt(gamma, delta, inner, then)
                self.type_stmt(gamma, delta, inner, orelse)
                return gamma, delta
            case A.Exit():
                self.effect(self.bot)
                if pc != self.bot:
                    self.flow(s.span, "T-Exit", f"exit under pc {pc}", pc, self.bot)
                return gamma, delta
            case A.Return(value):
                self.effect(self.bot)
                if RETURN not in gamma:
                    self.fail(s.span, "T-Return", "ReturnOutsideFunction", "return outside a function")
                if pc != self.bot:
                    self.flow(s.span, "T-Return", f"return under pc {pc}", pc, self.bot)
                rt = gamma[RETURN]
                if value is None:
                    if not isinstance(rt.base, UnitT):
                        self.fail(s.span, "T-Return", "ReturnTypeMismatch", f"missing return value of type {self.show(rt)}")
                    return gamma, delta
                vt, _ = self.type_expr(gamma, delta, pc, value)
                if not self.same_shape(vt, rt):
                    self.fail(s.span, "T-Return", "ReturnTypeMismatch", f"returning {self.show(vt)}, expected {self.show(rt)}")
                self.flows_to(vt, rt, s.span, "T-Return", "return value")
                return gamma, delta
            case A.CallStmt(call):
                self.type_call(gamma, delta, pc, call)
                return gamma, delta
            case A.DeclStmt(decl):
                return self.type_decl(gamma, delta, pc, decl)
        raise TypeError(s)

    def declare(self, scope: set, d: A.Decl) -> None:
        match d:
            case A.VarDecl(name=name) | A.FunctionDecl(name=name) | A.TableDecl(name=name):
                key = ("value", name)
            case A.TypedefDecl(name=name) | A.AggregateDecl(name=name):
                key = ("type", name)
            case _:
                return
        if key in scope:
            self.report(d.span, "T-Decl", "DuplicateName", f"{name!r} is already declared in this scope")
        scope.add(key)

    # -- declarations --

    def type_decl(self, gamma: TypeEnv, delta: TypeDefs, pc: Label, d: A.Decl) -> tuple[TypeEnv, TypeDefs]:
        try:
            return self._type_decl(gamma, delta, pc, d)
        except _Poison:
            return gamma, delta

    def _type_decl(self, gamma: TypeEnv, delta: TypeDefs, pc: Label, d: A.Decl) -> tuple[TypeEnv, TypeDefs]:
        match d:
            case A.VarDecl(ty, name, init):
                rule = "T-VarDecl" if init is None else "T-VarInit"
                t = self.resolve(delta, ty, d.span, rule)
                if isinstance(t.base, (FunctionT, TableT, MatchKindT)):
                    self.fail(d.span, rule, "TypeMismatch", f"variables cannot have type {self.show(t)}")
                if init is not None:
                    try:
                        it, _ = self.type_expr(gamma, delta, pc, init)
                        if not self.same_shape(it, t):
                            self.fail(
                                d.span, rule, "InitializerTypeMismatch",
                                f"initializer of {name} has type {self.show(it)}, expected {self.show(t)}",
                            )
                        self.flows_to(it, t, d.span, rule, f"initializer of {name}")
                    except _Poison:
                        pass
                return {**gamma, name: t}, delta
            case A.TypedefDecl(ty, name):
                return gamma, delta.bind(name, self.resolve(delta, ty, d.span, "T-Typedef"))
            case A.AggregateDecl(kind, name, fields):
                rfields = []
                for f, ft in fields:
                    rt = self.resolve(delta, ft, d.span, "T-Typedef")
                    if isinstance(rt.base, (UnitT, FunctionT, TableT, MatchKindT)):
                        self.fail(d.span, "T-Typedef", "TypeMismatch", f"field {f} cannot have type {self.show(rt)}")
                    rfields.append((f, rt))
                shape = HeaderT(tuple(rfields)) if kind == "header" else RecordT(tuple(rfields))
                return gamma, delta.bind(name, SType(shape, self.bot))
            case A.MatchKindDecl(members):
                return gamma, delta.add_match_kinds(members)
            case A.FunctionDecl():
                return {**gamma, d.name: self.type_function(gamma, delta, d)}, delta
            case A.TableDecl():
                return {**gamma, d.name: self.type_table(gamma, delta, pc, d)}, delta
        raise TypeError(d)

    def type_function(self, gamma: TypeEnv, delta: TypeDefs, d: A.FunctionDecl) -> SType:
        params = [(p, self.resolve(delta, p.type, p.span, "T-FuncDecl")) for p in d.params]
        cps = [(p, self.resolve(delta, p.type, p.span, "T-FuncDecl")) for p in d.cp_params]
        ret = self.resolve(delta, d.ret, d.span, "T-FuncDecl")
        body_env = dict(gamma)
        seen: set[str] = set()
        for p, t in params + cps:
            if p.name in seen:
                self.report(p.span, "T-FuncDecl", "DuplicateName", f"duplicate parameter {p.name!r}")
            seen.add(p.name)
            body_env[p.name] = t
        body_env[RETURN] = ret

        if d.pc is not None:
            pc_fn = d.pc
        else:
            self.effects.append([])
            self.mute += 1
            try:
                self.type_stmt(body_env, delta, self.bot, d.body)
            finally:
                self.mute -= 1
                found = self.effects.pop()
            pc_fn = self.lat.meet_all(found)

        self.effects.append([])  # declaring runs nothing in the enclosing body
        try:
            self.type_stmt(body_env, delta, pc_fn, d.body)
        finally:
            self.effects.pop()
        fn = FunctionT(tuple((p.direction, t) for p, t in params), pc_fn, ret, tuple(t for _, t in cps))
        return SType(fn, self.bot)

    def type_table(self, gamma: TypeEnv, delta: TypeDefs, pc: Label, d: A.TableDecl) -> SType:
        self.effects.append([])
        try:
            key_labels: list[tuple[A.KeyElem, Label]] = []
            key_types: list[SType] = []
            cp_params: dict[str, tuple[SType, ...]] = {}
            for k in d.keys:
                try:
                    kt, _ = self.type_expr(gamma, delta, pc, k.expr)
                    key_types.append(kt)
                    if k.kind not in delta.match_kinds:
                        self.fail(k.span, "T-TblDecl", "UnknownMatchKind", f"unknown match kind {k.kind!r}")
                    if not isinstance(kt.base, (BoolT, IntT, BitT)):
                        self.fail(k.span, "T-TblDecl", "TypeMismatch", f"key of non-scalar type {self.show(kt)}")
                    if k.kind == "lpm" and not isinstance(kt.base, BitT):
                        self.fail(k.span, "T-TblDecl", "TypeMismatch", "lpm keys must have a bit<n> type")
                    key_labels.append((k, kt.label))
                except _Poison:
                    pass
            action_pcs: list[Label] = []
            for ref in d.actions:
                try:
                    at = gamma.get(ref.name)
                    if at is None or not isinstance(at.base, FunctionT):
                        self.fail(ref.span, "T-TblDecl", "NotAnAction", f"{ref.name!r} is not an action")
                    fn = at.base
                    action_pcs.append(fn.pc)
                    cp_params[ref.name] = fn.cp_params
                    if len(ref.args) != len(fn.params):
                        self.fail(
                            ref.span, "T-TblDecl", "ArityMismatch",
                            f"{ref.name} binds {len(fn.params)} arguments in a table, got {len(ref.args)}",
                        )
                    for (dr, pt), arg in zip(fn.params, ref.args):
                        self.check_arg(gamma, delta, None, dr, pt, arg, "T-TblDecl")
                except _Poison:
                    pass
        finally:
            inner = self.effects.pop()
        if not self.mute:
            self.tables[d.name] = TableInfo(
                d.name, tuple(key_types), tuple(k.kind for k in d.keys), tuple(a.name for a in d.actions), cp_params
            )
        pc_a = self.lat.meet_all(action_pcs)
        pc_tbl = self.lat.meet_all([pc_a, *inner])
        ok = True
        for k, chi in key_labels:
            if not self.lat.leq(chi, pc_tbl):
                ok = False
                self.flow(
                    k.span, "T-TblDecl",
                    f"key {pp_expr(k.expr)} at {chi} decides actions that write at {pc_tbl}", chi, pc_tbl,
                )
        # after a key violation, bind ⊤ so applications do not report a second error
        return SType(TableT(pc_tbl if ok else self.top), self.bot)

    # -- program --

    def check_program(self, p: A.Program, pc: Label) -> Verdict:
        delta = TypeDefs(self.lat)
        gamma: TypeEnv = {}
        scope: set = set()
        for d in p.type_decls:
            self.declare(scope, d)
            gamma, delta = self.type_decl(gamma, delta, pc, d)
        c = p.control
        scope = set()
        for prm in c.params:
            try:
                gamma = {**gamma, prm.name: self.resolve(delta, prm.type, prm.span, "T-VarDecl")}
            except _Poison:
                pass
            self.declare(scope, A.VarDecl(prm.type, prm.name, None, prm.span))
        for d in c.decls:
            self.declare(scope, d)
            gamma, delta = self.type_decl(gamma, delta, pc, d)
        top_gamma, top_delta = gamma, delta
        self.type_stmt(gamma, delta, pc, c.apply)
        diags = sorted(self.diags, key=lambda x: x.span)
        accepted = not any(x.severity == "error" for x in diags)
        return Verdict(accepted, diags, top_gamma, top_delta, dict(self.tables))


def check_program(
    p: A.Program, lattice: Lattice, pc: Label | None = None, on_statement: StatementHook | None = None
) -> Verdict:
    pc = lattice.bottom if pc is None else pc
    if pc not in lattice:
        raise UnknownLabel(pc)
    return Checker(lattice, on_statement).check_program(p, pc)


def _raise_if(checker: Checker) -> None:
    if checker.diags:
        raise TypeCheckError(sorted(checker.diags, key=lambda x: x.span))


def type_expression(gamma: TypeEnv, delta: TypeDefs, pc: Label, e: A.Expr) -> tuple[SType, Direction]:
    ch = Checker(delta.lattice)
    try:
        result = ch.type_expr(gamma, delta, pc, e)
    except _Poison:
        result = None
    _raise_if(ch)
    return result


def type_statement(gamma: TypeEnv, delta: TypeDefs, pc: Label, s: A.Stmt) -> TypeEnv:
    ch = Checker(delta.lattice)
    out, _ = ch.type_stmt(gamma, delta, pc, s)
    _raise_if(ch)
    return out


def statement_diagnostics(gamma: TypeEnv, delta: TypeDefs, pc: Label, s: A.Stmt) -> list[Diagnostic]:
    ch = Checker(delta.lattice)
    ch.type_stmt(gamma, delta, pc, s)
    return sorted(ch.diags, key=lambda x: x.span)


def type_declaration(gamma: TypeEnv, delta: TypeDefs, pc: Label, d: A.Decl) -> tuple[TypeEnv, TypeDefs]:
    ch = Checker(delta.lattice)
    out = ch.type_decl(gamma, delta, pc, d)
    _raise_if(ch)
    return out
