from __future__ import annotations

import re
from dataclasses import dataclass

from .diagnostics import Diagnostic, Loc, ParseError, Rule, Severity, SourceFile

KEYWORDS = frozenset({
    "class", "resource", "pure", "requires", "ensures", "choreography", "endpoint",
    "run", "if", "else", "while", "loop_invariant", "channel_invariant", "communicate",
    "assert", "inhale", "exhale", "true", "false", "this", "Perm",
})

BACKSLASH_KEYWORDS = frozenset({"\\endpoint", "\\chor", "\\msg", "\\sender", "\\receiver", "\\forall"})

# Longest operators first.
OPERATORS = [
    "==>", "**", "&&", "||", "==", "!=", "<=", ">=", ":=", "::", "..", "->",
    "<", ">", "+", "-", "*", "/", "%", "!", "=", "(", ")", "{", "}", "[", "]",
    ";", ",", ":", ".",
]

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<pragma>//![^\n]*)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<frac>\d+\\\d+)
  | (?P<int>\d+)
  | (?P<bskw>\\[A-Za-z_]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>""" + "|".join(re.escape(op) for op in OPERATORS) + r""")
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str  # ident, int, frac, kw, op, pragma, eof
    text: str
    loc: Loc

    def __repr__(self) -> str:
        return f"Token({self.kind}, {self.text!r}, {self.loc})"


def tokenize(src: SourceFile | str) -> list[Token]:
    """Split ``src`` into tokens; comments are dropped, ``//!`` pragmas kept."""
    if isinstance(src, str):
        src = SourceFile("<string>", src)
    tokens: list[Token] = []
    diagnostics: list[Diagnostic] = []
    text = src.text
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            diagnostics.append(Diagnostic(Severity.ERROR, Rule.LEX, f"unexpected character {text[pos]!r}", src.loc(pos)))
            pos += 1
            continue
        kind = m.lastgroup
        value = m.group()
        loc = src.loc(pos)
        pos = m.end()
        if kind in ("ws", "comment"):
            continue
        if kind == "bskw":
            if value not in BACKSLASH_KEYWORDS:
                diagnostics.append(Diagnostic(Severity.ERROR, Rule.LEX, f"unknown keyword {value}", loc))
                continue
            kind = "kw"
        elif kind == "ident" and value in KEYWORDS:
            kind = "kw"
        elif kind == "pragma":
            value = value[3:].strip()
        tokens.append(Token(kind, value, loc))
    if diagnostics:
        raise ParseError(diagnostics)
    tokens.append(Token("eof", "", src.loc(len(text))))
    return tokens
