from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, order=True)
class Span:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


NO_SPAN = Span(0, 0)


class P4IfcError(Exception):
    """Base class for all errors raised by the package."""


class UnknownLabel(P4IfcError):
    def __init__(self, label: str, span: Span | None = None):
        self.label = label
        self.span = span
        where = f" at {span}" if span else ""
        super().__init__(f"unknown security label {label!r}{where}")


class NotALattice(P4IfcError):
    pass


class ParseError(P4IfcError):
    def __init__(self, message: str, span: Span | None = None):
        self.message = message
        self.span = span
        where = f"{span}: " if span else ""
        super().__init__(f"{where}{message}")


class LexError(ParseError):
    pass


class UnknownTypeName(P4IfcError):
    def __init__(self, name: str, span: Span | None = None):
        self.name = name
        self.span = span
        super().__init__(f"unknown type name {name!r}")


class CyclicTypedef(P4IfcError):
    def __init__(self, name: str, span: Span | None = None):
        self.name = name
        self.span = span
        super().__init__(f"typedef cycle through {name!r}")


class EntriesError(P4IfcError):
    """Control-plane entries that do not fit the program."""


class UnknownTable(EntriesError):
    pass


class UnknownAction(EntriesError):
    pass


class ArgumentTypeMismatch(EntriesError):
    pass


class MatchFailure(P4IfcError):
    pass


class EvalError(P4IfcError):
    """Raised on evaluation of a program that violates typing assumptions."""


class DomainMismatch(P4IfcError):
    """Two states compared for equivalence bind different variables."""
