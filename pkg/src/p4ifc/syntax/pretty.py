"""Source printer; output re-parses to an equal AST."""
from __future__ import annotations

from ..lattice import Label
from . import ast as A
from .types import BitT, BoolT, IntT, NamedT, SType, StackT, UnitT

INDENT = "    "


def pp_type(t: SType, bottom: Label) -> str:
    match t.base:
        case BoolT():
            s = "bool"
        case IntT():
            s = "int"
        case BitT(w):
            s = f"bit<{w}>"
        case UnitT():
            s = "void"
        case NamedT(name):
            s = name
        case StackT(elem, size):
            s = f"{pp_type(elem, bottom)}[{size}]"
        case _:
            raise ValueError(f"type {t} has no source form")
    return s if t.label == bottom else f"<{s}, {t.label}>"


def pp_expr(e: A.Expr) -> str:
    match e:
        case A.BoolLit(v):
            return "true" if v else "false"
        case A.IntLit(v, None):
            return str(v)
        case A.IntLit(v, w):
            return f"{v}:{w}"
        case A.Var(name):
            return name
        case A.Index(base, idx):
            return f"{pp_expr(base)}[{pp_expr(idx)}]"
        case A.BinOp(op, left, right):
            return f"({pp_expr(left)} {op} {pp_expr(right)})"
        case A.RecordLit(fields):
            return "{" + ", ".join(f"{f} = {pp_expr(v)}" for f, v in fields) + "}"
        case A.Member(base, f):
            return f"{pp_expr(base)}.{f}"
        case A.Call(callee, args, apply):
            sep = ".apply" if apply else ""
            return f"{pp_expr(callee)}{sep}(" + ", ".join(pp_expr(a) for a in args) + ")"
    raise TypeError(e)


class Printer:
    def __init__(self, bottom: Label):
        self.bottom = bottom
        self.lines: list[str] = []

    def ty(self, t: SType) -> str:
        return pp_type(t, self.bottom)

    def emit(self, depth: int, text: str) -> None:
        self.lines.append(INDENT * depth + text)

    def params(self, params) -> str:
        return ", ".join(f"{p.direction} {self.ty(p.type)} {p.name}" for p in params)

    def decl(self, d: A.Decl, depth: int) -> None:
        match d:
            case A.TypedefDecl(t, name):
                self.emit(depth, f"typedef {self.ty(t)} {name};")
            case A.AggregateDecl(kind, name, fields):
                self.emit(depth, f"{kind} {name} {{")
                for f, t in fields:
                    self.emit(depth + 1, f"{self.ty(t)} {f};")
                self.emit(depth, "}")
            case A.MatchKindDecl(members):
                self.emit(depth, "match_kind { " + ", ".join(members) + " }")
            case A.VarDecl(t, name, init):
                tail = "" if init is None else f" = {pp_expr(init)}"
                self.emit(depth, f"{self.ty(t)} {name}{tail};")
            case A.FunctionDecl(name, params, ret, body, cp, is_action, pc):
                if pc is not None:
                    self.emit(depth, f"@pc({pc})")
                if is_action:
                    ps = self.params(params)
                    if cp:
                        ps += "; " + ", ".join(f"{self.ty(p.type)} {p.name}" for p in cp)
                    head = f"action {name}({ps})"
                else:
                    head = f"function {self.ty(ret)} {name}({self.params(params)})"
                self.block(body, depth, head)
            case A.TableDecl(name, keys, actions):
                self.emit(depth, f"table {name} {{")
                self.emit(depth + 1, "key = {")
                for k in keys:
                    self.emit(depth + 2, f"{pp_expr(k.expr)}: {k.kind};")
                self.emit(depth + 1, "}")
                self.emit(depth + 1, "actions = {")
                for a in actions:
                    args = "(" + ", ".join(pp_expr(x) for x in a.args) + ")" if a.args else ""
                    self.emit(depth + 2, f"{a.name}{args};")
                self.emit(depth + 1, "}")
                self.emit(depth, "}")
            case _:
                raise TypeError(d)

    def block(self, b: A.Block, depth: int, head: str = "") -> None:
        self.emit(depth, f"{head} {{".lstrip())
        for s in b.items:
            self.stmt(s, depth + 1)
        self.emit(depth, "}")

    def stmt(self, s: A.Stmt, depth: int) -> None:
        match s:
            case A.Block():
                self.block(s, depth)
            case A.CallStmt(call):
                self.emit(depth, pp_expr(call) + ";")
            case A.Assign(target, value):
                self.emit(depth, f"{pp_expr(target)} = {pp_expr(value)};")
            case A.If(cond, then, orelse):
                then_b = then if isinstance(then, A.Block) else A.Block((then,))
                self.block(then_b, depth, f"if ({pp_expr(cond)})")
                if not (isinstance(orelse, A.Block) and not orelse.items):
                    else_b = orelse if isinstance(orelse, A.Block) else A.Block((orelse,))
                    self.block(else_b, depth, "else")
            case A.Exit():
                self.emit(depth, "exit;")
            case A.Return(None):
                self.emit(depth, "return;")
            case A.Return(value):
                self.emit(depth, f"return {pp_expr(value)};")
            case A.DeclStmt(d):
                self.decl(d, depth)
            case _:
                raise TypeError(s)


def pretty_program(p: A.Program, bottom: Label) -> str:
    pr = Printer(bottom)
    for d in p.type_decls:
        pr.decl(d, 0)
    c = p.control
    pr.emit(0, f"control {c.name}({pr.params(c.params)}) {{")
    for d in c.decls:
        pr.decl(d, 1)
    pr.block(c.apply, 1, "apply")
    pr.emit(0, "}")
    return "\n".join(pr.lines) + "\n"
