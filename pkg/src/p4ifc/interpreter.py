"""Big-step evaluation with copy-in/copy-out calls and table application."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .errors import EvalError, MatchFailure
from .runtime import (
    CLOSURES,
    CONT,
    EXIT,
    BitV,
    BoolV,
    ControlPlane,
    Env,
    ExitSig,
    FunClosure,
    IntV,
    Location,
    RecordV,
    Ret,
    Signal,
    StackV,
    Store,
    StoreSpec,
    TableClosure,
    UnitV,
    Value,
    _init,
    eval_binop,
    initial_values,
    table_match,
    value_has_type,
)
from .syntax import ast as A
from .syntax.types import (
    Direction,
    FunctionT,
    HeaderT,
    RecordT,
    SType,
    TableT,
    TypeDefs,
    resolve_type,
)

MAX_DEPTH = 100_000


@dataclass(frozen=True)
class LVar:
    name: str


@dataclass(frozen=True)
class LField:
    base: "LValue"
    field: str


@dataclass(frozen=True)
class LIndex:
    base: "LValue"
    index: int


LValue = Union[LVar, LField, LIndex]


def lval_base(lv: LValue) -> str:
    while not isinstance(lv, LVar):
        lv = lv.base
    return lv.name


def lval_path(lv: LValue) -> tuple:
    path = []
    while not isinstance(lv, LVar):
        path.append(lv.field if isinstance(lv, LField) else lv.index)
        lv = lv.base
    return tuple(reversed(path))


@dataclass
class EvalOutcome:
    store: Store
    env: Env
    signal: Signal
    delta: TypeDefs | None = None


class _ExitUnwind(Exception):
    """Carries an exit signal out through expression evaluation."""


class Monitor:
    """Observation hooks; the default does nothing."""

    def before_stmt(self, store: Store, env: Env, stmt):
        return None

    def after_stmt(self, token, store: Store, env: Env, stmt) -> None:
        pass

    def after_write(self, before: dict, store: Store, loc: Location) -> None:
        pass


class PropertyMonitor(Monitor):
    """Checks domain growth, closure immutability, write frames and preservation."""

    def __init__(self):
        self.violations: list[str] = []
        self.steps = 0
        self.writes = 0

    def before_stmt(self, store, env, stmt):
        closures = {loc: v for loc, v in store.values.items() if isinstance(v, CLOSURES)}
        return set(store.values), set(env), closures

    def after_stmt(self, token, store, env, stmt):
        self.steps += 1
        locs, names, closures = token
        where = f"{type(stmt).__name__} at {stmt.span}"
        if not locs <= set(store.values):
            self.violations.append(f"store domain shrank after {where}")
        if not names <= set(env):
            self.violations.append(f"environment domain shrank after {where}")
        for loc, v in closures.items():
            if store.values.get(loc) is not v:
                self.violations.append(f"closure at location {loc} overwritten by {where}")
        for loc, v in store.values.items():
            if not value_has_type(v, store.types[loc]):
                self.violations.append(f"location {loc} holds {v!r}, not a {store.types[loc]} after {where}")

    def after_write(self, before, store, loc):
        self.writes += 1
        changed = {x for x, v in store.values.items() if before.get(x) is not v}
        if not changed <= {loc}:
            self.violations.append(f"write to location {loc} also changed {sorted(changed - {loc})}")


def extend_typedefs(delta: TypeDefs, d: A.Decl) -> TypeDefs:
    match d:
        case A.TypedefDecl(ty, name):
            return delta.bind(name, resolve_type(delta, ty))
        case A.AggregateDecl(kind, name, fields):
            fs = tuple((f, resolve_type(delta, ft)) for f, ft in fields)
            shape = HeaderT(fs) if kind == "header" else RecordT(fs)
            return delta.bind(name, SType(shape, delta.lattice.bottom))
        case A.MatchKindDecl(members):
            return delta.add_match_kinds(members)
    raise TypeError(d)


class Interpreter:
    def __init__(self, cp: ControlPlane | None = None, monitor: Monitor | None = None, max_depth: int = MAX_DEPTH):
        self.cp = cp or ControlPlane()
        self.monitor = monitor
        self.max_depth = max_depth
        self.depth = 0

    def _enter(self) -> None:
        self.depth += 1
        if self.depth > self.max_depth:
            raise EvalError(f"derivation depth exceeded {self.max_depth}")

    # -- expressions --

    def eval_expr(self, delta: TypeDefs, store: Store, env: Env, e: A.Expr) -> Value:
        self._enter()
        try:
            return self._eval_expr(delta, store, env, e)
        finally:
            self.depth -= 1

    def _eval_expr(self, delta: TypeDefs, store: Store, env: Env, e: A.Expr) -> Value:
        match e:
            case A.BoolLit(v):
                return BoolV(v)
            case A.IntLit(v, None):
                return IntV(v)
            case A.IntLit(v, w):
                return BitV(w, v)
            case A.Var(name):
                if name not in env:
                    raise EvalError(f"unbound variable {name!r}")
                return store.read(env[name])
            case A.BinOp(op, left, right):
                a = self.eval_expr(delta, store, env, left)
                b = self.eval_expr(delta, store, env, right)
                return eval_binop(op, a, b)
            case A.Index(base, index):
                sv = self.eval_expr(delta, store, env, base)
                iv = self.eval_expr(delta, store, env, index)
                if not isinstance(sv, StackV) or not isinstance(iv, (IntV, BitV)):
                    raise EvalError(f"cannot index {sv!r} by {iv!r}")
                if 0 <= iv.value < len(sv.items):
                    return sv.items[iv.value]
                return _init(sv.elem)
            case A.Member(base, fname):
                rv = self.eval_expr(delta, store, env, base)
                if not isinstance(rv, RecordV):
                    raise EvalError(f"no field {fname!r} on {rv!r}")
                return rv.get(fname)
            case A.RecordLit(fields):
                return RecordV(tuple((f, self.eval_expr(delta, store, env, x)) for f, x in fields))
            case A.Call():
                return self.eval_call(delta, store, env, e)
        raise EvalError(f"cannot evaluate {e!r}")

    def eval_call(self, delta: TypeDefs, store: Store, env: Env, e: A.Call) -> Value:
        callee = self.eval_expr(delta, store, env, e.callee)
        if isinstance(callee, TableClosure):
            self.apply_table(store, callee)
            return UnitV()
        if not isinstance(callee, FunClosure):
            raise EvalError(f"{callee!r} is not a closure")
        params = callee.params + callee.cp_params
        if len(params) != len(e.args):
            raise EvalError(f"{callee.name} expects {len(params)} arguments")
        bindings = [(p.direction, p.name, p.type, a) for p, a in zip(params, e.args)]
        return self.invoke(callee, store, env, delta, bindings)

    def invoke(self, fn: FunClosure, store: Store, env: Env, delta: TypeDefs, bindings) -> Value:
        frag, writebacks = self.copy_in_out(delta, fn.delta, store, env, bindings)
        _, _, sig = self.eval_stmt(fn.delta, store, {**fn.env, **frag}, fn.body)
        for lv, loc in writebacks:
            self.write_lvalue(store, env, lv, store.read(loc))
        if isinstance(sig, ExitSig):
            raise _ExitUnwind
        if isinstance(sig, Ret):
            return sig.value
        return _init(resolve_type(fn.delta, fn.ret))

    def copy_in_out(self, arg_delta: TypeDefs, param_delta: TypeDefs, store: Store, env: Env, bindings):
        """Bind parameters to fresh locations.

        Each binding is (direction, name, declared type, argument), where the
        argument is an expression or an already evaluated value.
        """
        frag: Env = {}
        writebacks: list[tuple[LValue, Location]] = []
        for d, name, ty, arg in bindings:
            t = resolve_type(param_delta, ty)
            if d is Direction.IN:
                v = self.eval_expr(arg_delta, store, env, arg) if _is_expr(arg) else arg
                frag[name] = store.alloc(v, t)
                continue
            lv = self.eval_lvalue(arg_delta, store, env, arg)
            v = _init(t) if d is Direction.OUT else self.read_lvalue(store, env, lv)
            loc = store.alloc(v, t)
            frag[name] = loc
            writebacks.append((lv, loc))
        return frag, writebacks

    def apply_table(self, store: Store, tbl: TableClosure) -> None:
        keys = [self.eval_expr(tbl.delta, store, tbl.env, k.expr) for k in tbl.keys]
        try:
            call = table_match(self.cp, tbl.name, keys)
        except MatchFailure:
            raise _ExitUnwind from None
        ref = next((r for r in tbl.actions if r.name == call.action), None)
        if ref is None or ref.name not in tbl.env:
            raise EvalError(f"action {call.action!r} is not available in table {tbl.name}")
        fn = store.read(tbl.env[ref.name])
        if not isinstance(fn, FunClosure):
            raise EvalError(f"{ref.name} is not an action")
        bindings = [(p.direction, p.name, p.type, a) for p, a in zip(fn.params, ref.args)]
        bindings += [(Direction.IN, p.name, p.type, v) for p, v in zip(fn.cp_params, call.args)]
        self.invoke(fn, store, tbl.env, tbl.delta, bindings)

    # -- l-values --

    def eval_lvalue(self, delta: TypeDefs, store: Store, env: Env, e: A.Expr) -> LValue:
        match e:
            case A.Var(name):
                if name not in env:
                    raise EvalError(f"unbound variable {name!r}")
                return LVar(name)
            case A.Member(base, fname):
                return LField(self.eval_lvalue(delta, store, env, base), fname)
            case A.Index(base, index):
                lb = self.eval_lvalue(delta, store, env, base)
                iv = self.eval_expr(delta, store, env, index)
                if not isinstance(iv, (IntV, BitV)):
                    raise EvalError(f"non-integer index {iv!r}")
                return LIndex(lb, iv.value)
        raise EvalError(f"{e!r} is not an l-value")

    def read_lvalue(self, store: Store, env: Env, lv: LValue) -> Value:
        v = store.read(env[lval_base(lv)])
        for p in lval_path(lv):
            if isinstance(p, int):
                v = v.items[p] if 0 <= p < len(v.items) else _init(v.elem)
            else:
                v = v.get(p)
        return v

    def write_lvalue(self, store: Store, env: Env, lv: LValue, value: Value) -> None:
        loc = env[lval_base(lv)]
        before = dict(store.values) if self.monitor is not None else None
        updated = _update(store.read(loc), lval_path(lv), value)
        if updated is not None:
            store.write(loc, updated)
        if self.monitor is not None:
            self.monitor.after_write(before, store, loc)

    # -- statements --

    def eval_stmt(self, delta: TypeDefs, store: Store, env: Env, s: A.Stmt) -> tuple[Env, TypeDefs, Signal]:
        self._enter()
        token = self.monitor.before_stmt(store, env, s) if self.monitor else None
        try:
            out = self._eval_stmt(delta, store, env, s)
        except _ExitUnwind:
            out = env, delta, EXIT
        finally:
            self.depth -= 1
        if self.monitor:
            self.monitor.after_stmt(token, store, out[0], s)
        return out

    def _eval_stmt(self, delta: TypeDefs, store: Store, env: Env, s: A.Stmt) -> tuple[Env, TypeDefs, Signal]:
        match s:
            case A.Block(items):
                inner, inner_delta = env, delta
                for item in items:
                    inner, inner_delta, sig = self.eval_stmt(inner_delta, store, inner, item)
                    if sig is not CONT:
                        return env, delta, sig
                return env, delta, CONT
            case A.Assign(target, value):
                lv = self.eval_lvalue(delta, store, env, target)
                v = self.eval_expr(delta, store, env, value)
                self.write_lvalue(store, env, lv, v)
                return env, delta, CONT
            case A.If(cond, then, orelse):
                c = self.eval_expr(delta, store, env, cond)
                if not isinstance(c, BoolV):
                    raise EvalError(f"condition evaluated to {c!r}")
                _, _, sig = self.eval_stmt(delta, store, env, then if c.value else orelse)
                return env, delta, sig
            case A.Exit():
                return env, delta, EXIT
            case A.Return(None):
                return env, delta, Ret(UnitV())
            case A.Return(value):
                return env, delta, Ret(self.eval_expr(delta, store, env, value))
            case A.CallStmt(call):
                self.eval_call(delta, store, env, call)
                return env, delta, CONT
            case A.DeclStmt(decl):
                return self._eval_decl(delta, store, env, decl)
        raise EvalError(f"cannot execute {s!r}")

    def eval_decl(self, delta: TypeDefs, store: Store, env: Env, d: A.Decl) -> tuple[Env, TypeDefs, Signal]:
        try:
            return self._eval_decl(delta, store, env, d)
        except _ExitUnwind:
            return env, delta, EXIT

    def _eval_decl(self, delta: TypeDefs, store: Store, env: Env, d: A.Decl) -> tuple[Env, TypeDefs, Signal]:
        bot = delta.lattice.bottom
        match d:
            case A.VarDecl(ty, name, init):
                t = resolve_type(delta, ty)
                v = _init(t) if init is None else self.eval_expr(delta, store, env, init)
                return {**env, name: store.alloc(v, t)}, delta, CONT
            case A.FunctionDecl(name, params, ret, body, cp):
                clo = FunClosure(name, dict(env), params, cp, ret, body, delta)
                ft = FunctionT(
                    tuple((p.direction, resolve_type(delta, p.type)) for p in params),
                    bot,
                    resolve_type(delta, ret),
                    tuple(resolve_type(delta, p.type) for p in cp),
                )
                return {**env, name: store.alloc(clo, SType(ft, bot))}, delta, CONT
            case A.TableDecl(name, keys, actions):
                clo = TableClosure(name, store.next_loc, dict(env), keys, actions, delta)
                loc = store.alloc(clo, SType(TableT(bot), bot))
                return {**env, name: loc}, delta, CONT
            case _:
                return env, extend_typedefs(delta, d), CONT

    # -- whole programs --

    def run(self, program: A.Program, spec: StoreSpec | None = None) -> EvalOutcome:
        delta = TypeDefs(program.lattice)
        for d in program.type_decls:
            delta = extend_typedefs(delta, d)
        c = program.control
        inputs = [(p.name, resolve_type(delta, p.type)) for p in c.params]
        values = initial_values(inputs, spec)
        store, env = Store(), {}
        for name, t in inputs:
            env[name] = store.alloc(values[name], t)
        try:
            for d in c.decls:
                env, delta, sig = self.eval_decl(delta, store, env, d)
                if sig is not CONT:
                    return EvalOutcome(store, env, sig, delta)
            env, delta, sig = self.eval_stmt(delta, store, env, c.apply)
        except RecursionError:
            raise EvalError("evaluation nested too deeply") from None
        return EvalOutcome(store, env, sig, delta)


def _is_expr(x) -> bool:
    return isinstance(x, (A.BoolLit, A.IntLit, A.Var, A.Index, A.BinOp, A.RecordLit, A.Member, A.Call))


def _update(v: Value, path: tuple, new: Value) -> Value | None:
    """Functional update along path; None when an index is out of bounds."""
    if not path:
        return new
    head, rest = path[0], path[1:]
    if isinstance(head, int):
        if not 0 <= head < len(v.items):
            return None
        inner = _update(v.items[head], rest, new)
        if inner is None:
            return None
        items = list(v.items)
        items[head] = inner
        return StackV(v.elem, tuple(items))
    inner = _update(v.get(head), rest, new)
    return None if inner is None else v.set(head, inner)


# -- functional entry points --


def eval_expression(cp: ControlPlane, delta: TypeDefs, store: Store, env: Env, e: A.Expr) -> tuple[Store, Value]:
    try:
        v = Interpreter(cp).eval_expr(delta, store, env, e)
    except _ExitUnwind:
        raise EvalError("exit during expression evaluation") from None
    return store, v


def eval_lvalue(cp: ControlPlane, delta: TypeDefs, store: Store, env: Env, e: A.Expr) -> tuple[Store, LValue]:
    return store, Interpreter(cp).eval_lvalue(delta, store, env, e)


def write_lvalue(cp: ControlPlane, delta: TypeDefs, store: Store, env: Env, lv: LValue, v: Value) -> Store:
    Interpreter(cp).write_lvalue(store, env, lv, v)
    return store


def copy_in_out(cp: ControlPlane, delta: TypeDefs, store: Store, env: Env, bindings):
    frag, writebacks = Interpreter(cp).copy_in_out(delta, delta, store, env, bindings)
    return store, frag, writebacks


def eval_statement(cp: ControlPlane, delta: TypeDefs, store: Store, env: Env, s: A.Stmt) -> EvalOutcome:
    env2, delta2, sig = Interpreter(cp).eval_stmt(delta, store, env, s)
    return EvalOutcome(store, env2, sig, delta2)


def eval_declaration(cp: ControlPlane, delta: TypeDefs, store: Store, env: Env, d: A.Decl) -> EvalOutcome:
    env2, delta2, sig = Interpreter(cp).eval_decl(delta, store, env, d)
    return EvalOutcome(store, env2, sig, delta2)


def run_program(
    program: A.Program, cp: ControlPlane | None = None, spec: StoreSpec | None = None, monitor: Monitor | None = None
) -> EvalOutcome:
    return Interpreter(cp, monitor).run(program, spec)
