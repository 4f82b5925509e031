"""Recursive-descent parser producing span-annotated ASTs."""
from __future__ import annotations

from ..errors import ParseError, Span, UnknownLabel
from ..lattice import Lattice
from . import ast as A
from .lexer import Token, tokenize
from .types import MAX_WIDTH, BitT, BoolT, Direction, IntT, NamedT, SType, StackT, UnitT

_BINARY_LEVELS: list[tuple[str, ...]] = [
    ("||",),
    ("&&",),
    ("|",),
    ("^",),
    ("&",),
    ("==", "!="),
    ("<", "<=", ">", ">="),
    ("<<", ">>"),
    ("+", "-"),
    ("*",),
]

INT_MAX = 2**63 - 1


class Parser:
    def __init__(self, source: str, lattice: Lattice):
        self.toks = tokenize(source)
        self.pos = 0
        self.lat = lattice

    # -- token helpers --

    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("op", "keyword") and t.text == text

    def at_ident(self, text: str | None = None) -> bool:
        t = self.tok
        return t.kind == "ident" and (text is None or t.text == text)

    def accept(self, text: str) -> Token | None:
        if self.at(text):
            return self.advance()
        return None

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(f"expected {text!r}")
        return self.advance()

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "ident":
            self.fail(f"expected {what}")
        return self.advance()

    def number(self) -> int:
        if self.tok.kind != "number":
            self.fail("expected a number")
        return self.advance().value

    def fail(self, message: str, span: Span | None = None):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise ParseError(f"{message}, found {found}", span or t.span)

    def label(self) -> str:
        t = self.ident("security label")
        if t.text not in self.lat:
            raise UnknownLabel(t.text, t.span)
        return t.text

    # -- program --

    def program(self) -> A.Program:
        type_decls = []
        while not self.at("control"):
            if self.tok.kind == "eof":
                self.fail("expected a control block")
            type_decls.append(self.type_decl())
        control = self.control()
        if self.tok.kind != "eof":
            self.fail("unexpected input after the control block")
        return A.Program(tuple(type_decls), control, self.lat)

    def control(self) -> A.Control:
        span = self.expect("control").span
        name = self.ident("control name").text
        self.expect("(")
        params = self.params()
        self.expect(")")
        self.expect("{")
        decls = []
        while not self.at("apply"):
            if self.tok.kind == "eof":
                self.fail("expected 'apply'")
            decls.append(self.decl())
        self.expect("apply")
        body = self.block()
        self.expect("}")
        return A.Control(name, tuple(params), tuple(decls), body, span)

    # -- types --

    def at_type_start(self) -> bool:
        t = self.tok
        if t.kind == "keyword":
            return t.text in ("bool", "int", "bit", "void")
        if t.kind == "op":
            return t.text == "<"
        return t.kind == "ident"

    def type(self) -> SType:
        if self.accept("<"):
            inner = self.type()
            self.expect(",")
            lab = self.label()
            self.expect(">")
            t = inner.with_label(lab)
        else:
            t = SType(self.base_type(), self.lat.bottom)
        while self.at("[") and self.peek().kind == "number":
            self.advance()
            size = self.number()
            self.expect("]")
            t = SType(StackT(t, size), self.lat.bottom)
        return t

    def base_type(self):
        t = self.tok
        if self.accept("bool"):
            return BoolT()
        if self.accept("int"):
            return IntT()
        if self.accept("void"):
            return UnitT()
        if self.accept("bit"):
            self.expect("<")
            wt = self.tok
            w = self.number()
            self.expect(">")
            if not 1 <= w <= MAX_WIDTH:
                raise ParseError(f"bit width must be between 1 and {MAX_WIDTH}", wt.span)
            return BitT(w)
        if t.kind == "ident":
            return NamedT(self.advance().text)
        self.fail("expected a type")

    # -- declarations --

    def type_decl(self) -> A.Decl:
        t = self.tok
        if self.accept("typedef"):
            ty = self.type()
            name = self.ident("type name").text
            self.expect(";")
            return A.TypedefDecl(ty, name, t.span)
        if self.at("header") or self.at("struct"):
            kind = self.advance().text
            name = self.ident("type name").text
            self.expect("{")
            fields = []
            while not self.accept("}"):
                ft = self.type()
                fname = self.ident("field name")
                if any(f == fname.text for f, _ in fields):
                    raise ParseError(f"duplicate field {fname.text!r}", fname.span)
                fields.append((fname.text, ft))
                self.expect(";")
            self.accept(";")
            return A.AggregateDecl(kind, name, tuple(fields), t.span)
        if self.accept("match_kind"):
            self.expect("{")
            members = [self.ident("match kind").text]
            while self.accept(","):
                if self.at("}"):
                    break
                members.append(self.ident("match kind").text)
            self.expect("}")
            self.accept(";")
            return A.MatchKindDecl(tuple(members), t.span)
        self.fail("expected a type declaration")

    def decl(self) -> A.Decl:
        t = self.tok
        if self.at("typedef") or self.at("header") or self.at("struct") or self.at("match_kind"):
            return self.type_decl()
        pc = None
        if self.accept("@"):
            ann = self.ident("annotation")
            if ann.text != "pc":
                raise ParseError(f"unknown annotation @{ann.text}", ann.span)
            self.expect("(")
            pc = self.label()
            self.expect(")")
            if not (self.at("action") or self.at("function")):
                self.fail("@pc must annotate an action or function")
            t = self.tok
        if self.accept("action"):
            name = self.ident("action name").text
            self.expect("(")
            params = self.params()
            cp = []
            if self.accept(";"):
                cp = self.cp_params()
            self.expect(")")
            body = self.block()
            return A.FunctionDecl(
                name, tuple(params), SType(UnitT(), self.lat.bottom), body, tuple(cp), True, pc, t.span
            )
        if self.accept("function"):
            ret = self.type()
            name = self.ident("function name").text
            self.expect("(")
            params = self.params()
            self.expect(")")
            body = self.block()
            return A.FunctionDecl(name, tuple(params), ret, body, (), False, pc, t.span)
        if self.at("table"):
            return self.table()
        return self.var_decl()

    def var_decl(self) -> A.VarDecl:
        span = self.tok.span
        ty = self.type()
        name = self.ident("variable name").text
        init = None
        if self.accept("=") or self.accept(":="):
            init = self.expr()
        self.expect(";")
        return A.VarDecl(ty, name, init, span)

    def params(self) -> list[A.Param]:
        params: list[A.Param] = []
        if self.at(")") or self.at(";"):
            return params
        while True:
            span = self.tok.span
            direction = Direction.IN
            for d in Direction:
                if self.accept(d.value):
                    direction = d
                    break
            ty = self.type()
            name = self.ident("parameter name").text
            params.append(A.Param(direction, ty, name, span))
            if not self.accept(","):
                return params

    def cp_params(self) -> list[A.Param]:
        params: list[A.Param] = []
        if self.at(")"):
            return params
        while True:
            span = self.tok.span
            if any(self.at(d.value) for d in Direction):
                self.fail("control-plane parameters take no direction")
            ty = self.type()
            name = self.ident("parameter name").text
            params.append(A.Param(Direction.IN, ty, name, span))
            if not self.accept(","):
                return params

    def table(self) -> A.TableDecl:
        span = self.expect("table").span
        name = self.ident("table name").text
        self.expect("{")
        keys: list[A.KeyElem] = []
        actions: list[A.ActionRef] = []
        while not self.accept("}"):
            prop = self.ident("table property")
            self.expect("=")
            self.expect("{")
            if prop.text == "key":
                while not self.accept("}"):
                    kspan = self.tok.span
                    e = self.expr()
                    self.expect(":")
                    kind = self.ident("match kind").text
                    self.expect(";")
                    keys.append(A.KeyElem(e, kind, kspan))
            elif prop.text == "actions":
                while not self.accept("}"):
                    at = self.ident("action name")
                    args: list[A.Expr] = []
                    if self.accept("("):
                        args = self.args()
                    self.expect(";")
                    actions.append(A.ActionRef(at.text, tuple(args), at.span))
            else:
                raise ParseError(f"unknown table property {prop.text!r}", prop.span)
            self.accept(";")
        return A.TableDecl(name, tuple(keys), tuple(actions), span)

    # -- statements --

    def looks_like_decl(self) -> bool:
        t = self.tok
        if t.kind == "keyword":
            return t.text in (
                "bool", "int", "bit", "void", "typedef", "header", "struct",
                "match_kind", "action", "function", "table",
            )
        if t.kind == "op":
            return t.text in ("<", "@")
        if t.kind != "ident":
            return False
        k = 1
        while self.peek(k).text == "[" and self.peek(k + 1).kind == "number" and self.peek(k + 2).text == "]":
            k += 3
        return self.peek(k).kind == "ident"

    def block(self) -> A.Block:
        span = self.expect("{").span
        items = []
        while not self.accept("}"):
            if self.tok.kind == "eof":
                self.fail("expected '}'")
            items.append(self.stmt())
        return A.Block(tuple(items), span)

    def stmt(self) -> A.Stmt:
        t = self.tok
        if self.at("{"):
            return self.block()
        if self.accept("if"):
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            then = self.stmt()
            orelse = self.stmt() if self.accept("else") else A.Block((), t.span)
            return A.If(cond, then, orelse, t.span)
        if self.accept("exit"):
            self.expect(";")
            return A.Exit(t.span)
        if self.accept("return"):
            value = None if self.at(";") else self.expr()
            self.expect(";")
            return A.Return(value, t.span)
        if self.looks_like_decl():
            return A.DeclStmt(self.decl(), t.span)
        e = self.expr()
        if self.accept("=") or self.accept(":="):
            rhs = self.expr()
            self.expect(";")
            return A.Assign(e, rhs, t.span)
        if not isinstance(e, A.Call):
            raise ParseError("expression statement must be a call", t.span)
        self.expect(";")
        return A.CallStmt(e, t.span)

    # -- expressions --

    def binop_here(self, ops: tuple[str, ...]) -> str | None:
        t = self.tok
        if t.kind != "op":
            return None
        text = t.text
        if text == ">":
            nxt = self.peek()
            adjacent = nxt.span.line == t.span.line and nxt.span.col == t.span.col + 1
            if adjacent and nxt.text in (">", "="):
                text = ">" + nxt.text
        return text if text in ops else None

    def expr(self, level: int = 0) -> A.Expr:
        if level == len(_BINARY_LEVELS):
            return self.postfix()
        left = self.expr(level + 1)
        while (op := self.binop_here(_BINARY_LEVELS[level])) is not None:
            span = self.advance().span
            if op in (">>", ">="):
                self.advance()
            right = self.expr(level + 1)
            left = A.BinOp(op, left, right, span)
        return left

    def args(self) -> list[A.Expr]:
        args: list[A.Expr] = []
        if self.accept(")"):
            return args
        args.append(self.expr())
        while self.accept(","):
            args.append(self.expr())
        self.expect(")")
        return args

    def postfix(self) -> A.Expr:
        e = self.primary()
        while True:
            t = self.tok
            if self.accept("."):
                f = self.tok
                if f.kind == "ident" or (f.kind == "keyword" and f.text == "apply"):
                    self.advance()
                else:
                    self.fail("expected a field name")
                if f.text == "apply" and self.at("("):
                    self.advance()
                    args = self.args()
                    e = A.Call(e, tuple(args), True, e.span)
                else:
                    e = A.Member(e, f.text, e.span)
            elif self.accept("["):
                idx = self.expr()
                self.expect("]")
                e = A.Index(e, idx, e.span)
            elif self.accept("("):
                e = A.Call(e, tuple(self.args()), False, e.span)
            else:
                return e

    def primary(self) -> A.Expr:
        t = self.tok
        if self.accept("true"):
            return A.BoolLit(True, t.span)
        if self.accept("false"):
            return A.BoolLit(False, t.span)
        if t.kind == "number":
            self.advance()
            if t.value > INT_MAX:
                raise ParseError("integer literal out of range", t.span)
            return A.IntLit(t.value, None, t.span)
        if t.kind == "sized":
            self.advance()
            if not 1 <= t.width <= MAX_WIDTH:
                raise ParseError(f"bit width must be between 1 and {MAX_WIDTH}", t.span)
            if t.value >= 1 << t.width:
                raise ParseError(f"{t.value} does not fit in {t.width} bits", t.span)
            return A.IntLit(t.value, t.width, t.span)
        if t.kind == "ident":
            self.advance()
            return A.Var(t.text, t.span)
        if self.accept("("):
            e = self.expr()
            self.expect(")")
            return e
        if self.accept("{"):
            fields: list[tuple[str, A.Expr]] = []
            if not self.accept("}"):
                while True:
                    name = self.ident("field name")
                    if any(f == name.text for f, _ in fields):
                        raise ParseError(f"duplicate field {name.text!r}", name.span)
                    self.expect("=")
                    fields.append((name.text, self.expr()))
                    if not self.accept(","):
                        break
                    if self.at("}"):
                        break
                self.expect("}")
            return A.RecordLit(tuple(fields), t.span)
        self.fail("expected an expression")


def parse_program(source: str, lattice: Lattice) -> A.Program:
    return Parser(source, lattice).program()


def parse_expression(source: str, lattice: Lattice) -> A.Expr:
    p = Parser(source, lattice)
    e = p.expr()
    if p.tok.kind != "eof":
        p.fail("unexpected input after expression")
    return e


def parse_type(source: str, lattice: Lattice) -> SType:
    p = Parser(source, lattice)
    t = p.type()
    if p.tok.kind != "eof":
        p.fail("unexpected input after type")
    return t
