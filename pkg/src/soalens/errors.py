"""Diagnostics and error types shared by every pipeline stage."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True, order=True)
class Loc:
    """A 1-based (line, column) source position. (0, 0) means unknown."""

    line: int = 0
    col: int = 0

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


class SoaLensError(Exception):
    """Base class for all errors raised by this package."""

    def __init__(self, message: str, loc: Loc | None = None, path: str | None = None):
        super().__init__(message)
        self.message = message
        self.loc = loc or Loc()
        self.path = path

    def __str__(self) -> str:
        if self.loc.line == 0 and self.path is None:
            return f"error: {self.message}"
        prefix = self.path or "<input>"
        return f"{prefix}:{self.loc}: error: {self.message}"


class LexError(SoaLensError):
    pass


class ParseError(SoaLensError):
    def __init__(self, message: str, loc: Loc | None = None, path: str | None = None,
                 expected: str = "", found: str = ""):
        super().__init__(message, loc, path)
        self.expected = expected
        self.found = found


class SemanticError(SoaLensError):
    """Base for annotation-binding and legality errors. `code` is a stable
    machine-readable tag mirrored by Diagnostic.code."""

    code = "semantic"


class MissingSizeError(SemanticError):
    code = "missing-size"


class UnknownTargetError(SemanticError):
    code = "unknown-target"


class UnknownFieldError(SemanticError):
    code = "unknown-field"


class IllegalCallError(SemanticError):
    code = "illegal-call"


class AliasError(SemanticError):
    code = "alias"


class RecordRecursionError(SemanticError):
    # Not named RecursionError to avoid shadowing the builtin.
    code = "recursive-record"


class TypeCheckError(SemanticError):
    code = "type"


class EmitError(SoaLensError):
    pass


class FileError(SoaLensError):
    """A source or output file could not be read or written."""


class InternalError(SoaLensError):
    """Analysis/transform mismatch. Never expected on legal inputs."""


class ToolchainError(SoaLensError):
    pass


class MiniRuntimeError(SoaLensError):
    """Base for errors raised while interpreting a program."""


class BoundsError(MiniRuntimeError):
    def __init__(self, message: str, index: int = 0, length: int = 0, **kw):
        super().__init__(message, **kw)
        self.index = index
        self.length = length


class PoisonRead(MiniRuntimeError):
    pass


class DivisionByZero(MiniRuntimeError):
    pass


class NegativeSize(MiniRuntimeError):
    pass


class DeadBufferError(MiniRuntimeError):
    pass


_DIAG_ERRORS: dict[str, type[SemanticError]] = {
    cls.code: cls
    for cls in (MissingSizeError, UnknownTargetError, UnknownFieldError,
                IllegalCallError, AliasError, RecordRecursionError, TypeCheckError,
                SemanticError)
}


@dataclass
class Diagnostic:
    """One collected analysis finding, printable as file:line:col: error: msg."""

    message: str
    loc: Loc = field(default_factory=Loc)
    code: str = "semantic"
    path: str | None = None
    severity: str = "error"

    def __str__(self) -> str:
        prefix = self.path or "<input>"
        return f"{prefix}:{self.loc}: {self.severity}: {self.message}"

    def to_error(self) -> SemanticError:
        cls = _DIAG_ERRORS.get(self.code, SemanticError)
        return cls(self.message, self.loc, self.path)


def raise_first(diags: list[Diagnostic]) -> None:
    """Raise the first error-severity diagnostic as its exception class."""
    for d in diags:
        if d.severity == "error":
            raise d.to_error()
