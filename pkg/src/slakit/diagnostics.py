"""Diagnostics, validation reports, and the toolkit error type.

Validation operations never raise on bad content; they return a
``ValidationReport`` listing what is wrong and where.  Operations with
hard preconditions (bad locators, illegal transitions, malformed input)
raise ``SlaError`` carrying a stable machine-readable code.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator


class Severity(Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    code: str
    locator: str
    message: str

    def line(self) -> str:
        """Render as the one-line form used by the CLI."""
        return f"{self.severity.value.upper()} {self.code} {self.locator} {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    """An ordered list of diagnostics; empty means the value checked out."""

    diagnostics: tuple[Diagnostic, ...] = ()

    @classmethod
    def collect(cls, items: Iterable[Diagnostic]) -> "ValidationReport":
        return cls(tuple(items))

    @property
    def ok(self) -> bool:
        return not self.diagnostics

    def errors(self) -> tuple[Diagnostic, ...]:
        return tuple(d for d in self.diagnostics if d.severity is Severity.ERROR)

    def codes(self) -> tuple[str, ...]:
        return tuple(d.code for d in self.diagnostics)

    def merged(self, other: "ValidationReport") -> "ValidationReport":
        return ValidationReport(self.diagnostics + other.diagnostics)

    def __iter__(self) -> Iterator[Diagnostic]:
        return iter(self.diagnostics)

    def __len__(self) -> int:
        return len(self.diagnostics)


def error(code: str, locator: str, message: str) -> Diagnostic:
    return Diagnostic(Severity.ERROR, code, locator, message)


def warning(code: str, locator: str, message: str) -> Diagnostic:
    return Diagnostic(Severity.WARNING, code, locator, message)


class SlaError(Exception):
    """Operation failure with a stable code, e.g. ``LOCATOR_INVALID``."""

    def __init__(self, code: str, message: str, *, details: tuple[str, ...] = ()):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
        self.details = details


class ParseError(SlaError):
    """Input bytes could not be parsed; ``offset`` is a character offset
    into the decoded text when one is known."""

    def __init__(self, code: str, message: str, *, offset: int | None = None):
        super().__init__(code, message)
        self.offset = offset
