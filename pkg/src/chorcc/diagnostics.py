"""Source files, diagnostics and the exception hierarchy shared by all passes."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path


@dataclass(frozen=True)
class Loc:
    line: int  # 1-indexed, 0 = unknown
    col: int  # 1-indexed

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


class Rule(str, Enum):
    """Closed set of diagnostic rule ids."""

    LEX = "lex"
    SYNTAX = "syntax"
    MISSING_CHOREOGRAPHY = "missing-choreography"
    MULTIPLE_CHOREOGRAPHIES = "multiple-choreographies"
    DUPLICATE = "duplicate"
    RESOLVE = "resolve"
    ENDPOINT_POSITIVE = "endpoint-positive"
    ENDPOINT_POSITION = "endpoint-position"
    CHOR_POSITION = "chor-position"
    PLACEHOLDER = "placeholder"
    BINDER_SCOPE = "binder-scope"
    PURITY = "purity"
    CHOR_CONDITION = "chor-condition"
    ASSIGNABLE = "assignable"
    PARTICIPATION = "participation"
    INHALE_EXHALE = "inhale-exhale"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    rule: Rule
    message: str
    loc: Loc = Loc(0, 0)

    def __str__(self) -> str:
        return f"{self.loc}: {self.severity.value}[{self.rule.value}]: {self.message}"

    def to_json(self) -> dict:
        return {
            "severity": self.severity.value,
            "rule": self.rule.value,
            "message": self.message,
            "line": self.loc.line,
            "col": self.loc.col,
        }


@dataclass
class SourceFile:
    path: str
    text: str
    _line_starts: list[int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._line_starts = [0]
        for i, ch in enumerate(self.text):
            if ch == "\n":
                self._line_starts.append(i + 1)

    @classmethod
    def read(cls, path: str | Path) -> SourceFile:
        p = Path(path)
        return cls(str(p), p.read_text(encoding="utf-8"))

    def loc(self, offset: int) -> Loc:
        offset = max(0, min(offset, len(self.text)))
        line = bisect.bisect_right(self._line_starts, offset)
        return Loc(line, offset - self._line_starts[line - 1] + 1)


class ChorError(Exception):
    """Base class for every error raised by this package."""


class ParseError(ChorError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


class ResolutionError(ChorError):
    pass


class CaptureError(ChorError):
    pass


class UnsupportedSyntax(ChorError):
    def __init__(self, message: str, loc: Loc | None = None):
        self.loc = loc
        super().__init__(f"{loc}: {message}" if loc else message)


class NotInvertible(UnsupportedSyntax):
    pass


class SchemaError(ChorError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")
