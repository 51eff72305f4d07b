"""Source spans and diagnostics shared by every stage of the toolchain."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class Severity(enum.Enum):
    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


@dataclass(frozen=True, order=True)
class SourceSpan:
    """A 1-based region of a source file; the end column is exclusive."""

    file: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def __post_init__(self) -> None:
        if min(self.start_line, self.start_col, self.end_line, self.end_col) < 1:
            raise ValueError(f"span positions are 1-based: {self}")
        if (self.start_line, self.start_col) > (self.end_line, self.end_col):
            raise ValueError(f"span start after end: {self}")

    def slice(self, text: str) -> str:
        """Return the part of ``text`` covered by this span."""
        lines = text.split("\n")
        if self.start_line == self.end_line:
            return lines[self.start_line - 1][self.start_col - 1 : self.end_col - 1]
        parts = [lines[self.start_line - 1][self.start_col - 1 :]]
        parts.extend(lines[self.start_line : self.end_line - 1])
        parts.append(lines[self.end_line - 1][: self.end_col - 1])
        return "\n".join(parts)

    def __str__(self) -> str:
        return f"{self.file}:{self.start_line}:{self.start_col}"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    code: str
    message: str
    span: SourceSpan | None = None
    related: tuple[SourceSpan, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if not self.message:
            raise ValueError("diagnostic message must be nonempty")

    @property
    def is_error(self) -> bool:
        return self.severity is Severity.ERROR

    def sort_key(self) -> tuple:
        if self.span is None:
            return ("", 0, 0, self.code, self.message)
        return (self.span.file, self.span.start_line, self.span.start_col, self.code, self.message)

    def render(self, default_file: str = "-") -> str:
        """Render as ``FILE:LINE:COL: SEVERITY[CODE] message``."""
        if self.span is None:
            where = f"{default_file}:0:0"
        else:
            where = str(self.span)
        return f"{where}: {self.severity.value}[{self.code}] {self.message}"

    def to_json(self) -> dict:
        span = self.span
        return {
            "file": span.file if span else None,
            "line": span.start_line if span else None,
            "col": span.start_col if span else None,
            "end_line": span.end_line if span else None,
            "end_col": span.end_col if span else None,
            "severity": self.severity.value,
            "code": self.code,
            "message": self.message,
        }


def error(code: str, message: str, span: SourceSpan | None = None, **kw) -> Diagnostic:
    return Diagnostic(Severity.ERROR, code, message, span, **kw)


def warning(code: str, message: str, span: SourceSpan | None = None, **kw) -> Diagnostic:
    return Diagnostic(Severity.WARNING, code, message, span, **kw)


def sort_diagnostics(diags) -> list[Diagnostic]:
    return sorted(diags, key=Diagnostic.sort_key)


def has_errors(diags) -> bool:
    return any(d.is_error for d in diags)


class DiagnosticError(Exception):
    """Raised when an operation cannot proceed past Error diagnostics."""

    def __init__(self, diagnostics, message: str | None = None):
        self.diagnostics = sort_diagnostics(diagnostics)
        if message is None:
            errs = [d for d in self.diagnostics if d.is_error] or self.diagnostics
            message = "; ".join(d.render() for d in errs[:5])
        super().__init__(message)
