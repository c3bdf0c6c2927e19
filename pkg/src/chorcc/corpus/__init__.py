"""Bundled example choreographies and their run parameters.

Each file carries ``//! params: k=v, ...`` with default parameters and
optionally ``//! sweep: k=lo..hi`` naming a parameter to vary.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .. import syntax as s
from ..parser import parse
from ..runtime.values import Value, parse_params


@dataclass(frozen=True)
class Sweep:
    name: str
    lo: int
    hi: int  # inclusive

    def values(self) -> range:
        return range(self.lo, self.hi + 1)


def pragma(program: s.Program, key: str) -> str | None:
    for line in program.pragmas:
        head, sep, rest = line.partition(":")
        if sep and head.strip() == key:
            return rest.strip()
    return None


def default_params(program: s.Program) -> dict[str, Value]:
    text = pragma(program, "params")
    return parse_params(text) if text else {}


def sweep_of(program: s.Program) -> Sweep | None:
    text = pragma(program, "sweep")
    if not text:
        return None
    name, _, rng = text.partition("=")
    lo, _, hi = rng.partition("..")
    return Sweep(name.strip(), int(lo), int(hi))


@dataclass(frozen=True)
class Entry:
    name: str
    path: Path
    text: str

    @property
    def program(self) -> s.Program:
        return parse(self.text, str(self.path))

    def params(self) -> dict[str, Value]:
        return default_params(self.program)

    def valuations(self) -> list[dict[str, Value]]:
        """Default parameters, once per sweep value when the file declares a sweep."""
        program = self.program
        base = default_params(program)
        sw = sweep_of(program)
        if sw is None:
            return [base]
        return [{**base, sw.name: v} for v in sw.values()]


def _root() -> Path:
    return Path(str(resources.files(__name__)))


def names() -> list[str]:
    return sorted(p.stem for p in _root().glob("*.chor"))


def load(name: str) -> Entry:
    path = _root() / f"{name}.chor"
    if not path.is_file():
        raise KeyError(f"no corpus program named {name!r}")
    return Entry(name, path, path.read_text(encoding="utf-8"))


def entries() -> list[Entry]:
    return [load(n) for n in names()]
