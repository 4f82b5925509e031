from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import LexError, Span

KEYWORDS = frozenset(
    {
        "action", "apply", "bit", "bool", "control", "else", "exit", "false",
        "function", "header", "if", "in", "inout", "int",
        "match_kind", "out", "return", "struct", "table", "true", "typedef", "void",
    }
)

# '>' is always a single token so that nested type brackets close cleanly;
# the expression parser glues adjacent '>' '>' / '>' '=' back together.
_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>//[^\n]*)
  | (?P<sized>(?:0[xX][0-9a-fA-F]+|[0-9]+):[0-9]+)
  | (?P<number>0[xX][0-9a-fA-F]+|[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|==|!=|<=|<<|&&|\|\||[-+*&|^<>=!{}()\[\];:,.@])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # ident, keyword, number, sized, op, eof
    text: str
    span: Span
    value: int | None = None
    width: int | None = None


def _int(text: str) -> int:
    return int(text, 16) if text[:2] in ("0x", "0X") else int(text, 10)


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    n = len(source)
    while pos < n:
        m = _TOKEN.match(source, pos)
        span = Span(line, pos - line_start + 1)
        if m is None:
            raise LexError(f"unexpected character {source[pos]!r}", span)
        kind = m.lastgroup
        text = m.group()
        if kind == "sized":
            num, w = text.rsplit(":", 1)
            tokens.append(Token("sized", text, span, _int(num), int(w)))
        elif kind == "number":
            tokens.append(Token("number", text, span, _int(text)))
        elif kind == "ident":
            tokens.append(Token("keyword" if text in KEYWORDS else "ident", text, span))
        elif kind == "op":
            tokens.append(Token("op", text, span))
        nl = text.count("\n")
        if nl:
            line += nl
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", Span(line, pos - line_start + 1)))
    return tokens
