from . import ast
from .lexer import Token, tokenize
from .parser import parse_expression, parse_program, parse_type
from .pretty import pretty_program
from .types import Direction, SType, TypeDefs, resolve_type

__all__ = [
    "Direction",
    "SType",
    "Token",
    "TypeDefs",
    "ast",
    "parse_expression",
    "parse_program",
    "parse_type",
    "pretty_program",
    "resolve_type",
    "tokenize",
]
