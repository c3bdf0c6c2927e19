"""Run reports, failure kinds and heap comparison."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Any


class Kind(str, Enum):
    ASSERT = "ASSERT"
    CONTRACT = "CONTRACT"
    INVARIANT = "INVARIANT"
    UNANIMITY = "UNANIMITY"
    INJECTIVITY = "INJECTIVITY"
    EXHALE = "EXHALE"
    PERMISSION = "PERMISSION"
    CONSERVATION = "CONSERVATION"
    CONFINEMENT = "CONFINEMENT"
    PAR_DISJOINTNESS = "PAR-DISJOINTNESS"
    FOREIGN_ACCESS = "FOREIGN-ACCESS"
    DEADLOCK = "DEADLOCK"
    FUEL = "FUEL"


CHECK_KINDS = {
    "assert": Kind.ASSERT,
    "contract": Kind.CONTRACT,
    "invariant": Kind.INVARIANT,
    "unanimity": Kind.UNANIMITY,
    "injectivity": Kind.INJECTIVITY,
}


@dataclass(frozen=True)
class Failure:
    kind: Kind
    site: str
    message: str

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "site": self.site, "message": self.message}

    def __str__(self) -> str:
        return f"{self.kind.value} at {self.site or '?'}: {self.message}"


@dataclass
class RunReport:
    mode: str
    heap: list[dict] = field(default_factory=list)
    failures: list[Failure] = field(default_factory=list)
    passed: Counter = field(default_factory=Counter)
    deadlock: bool = False
    seed: int | None = None
    conservation_checks: int = 0
    blocked: list[str] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        if self.deadlock:
            return "DEADLOCK"
        return "FAIL" if self.failures else "PASS"

    def count(self, kind: Kind) -> int:
        return sum(1 for f in self.failures if f.kind == kind)

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "verdict": self.verdict,
            "seed": self.seed,
            "failures": [f.to_json() for f in self.failures],
            "passed": {k.value if isinstance(k, Kind) else str(k): v for k, v in sorted(self.passed.items())},
            "conservation_checks": self.conservation_checks,
            "blocked": list(self.blocked),
            "heap": self.heap,
        }


def heap_json(heap: list[dict]) -> str:
    """Canonical text of a heap snapshot; equal heaps give identical strings."""
    return json.dumps(heap, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class Diff:
    oid: int
    field: str
    got: Any
    want: Any

    def __str__(self) -> str:
        return f"object {self.oid} field {self.field}: got {self.got!r}, want {self.want!r}"


@dataclass
class Verdict:
    diffs: list[Diff]

    @property
    def equal(self) -> bool:
        return not self.diffs

    def __str__(self) -> str:
        if self.equal:
            return "EQUAL"
        return "DIFF\n" + "\n".join(f"  {d}" for d in self.diffs)


def merge_fragments(fragments: dict[Any, dict[int, dict]]) -> list[dict]:
    merged: dict[int, dict] = {}
    for owner, objs in fragments.items():
        for oid, obj in objs.items():
            if oid in merged:
                raise AssertionError(f"object {oid} appears in two fragments (second owner {owner})")
            merged[oid] = obj
    return [merged[k] for k in sorted(merged)]


def merge_and_compare(fragments: dict[Any, dict[int, dict]], reference: list[dict]) -> Verdict:
    """Merge per-instance heap fragments and compare them with a reference heap."""
    got = merge_fragments(fragments)
    diffs: list[Diff] = []
    got_by_id = {o["id"]: o for o in got}
    for want in reference:
        have = got_by_id.pop(want["id"], None)
        if have is None:
            diffs.append(Diff(want["id"], "<object>", None, want["class"]))
            continue
        for key in ("class", "owner"):
            if have[key] != want[key]:
                diffs.append(Diff(want["id"], f"<{key}>", have[key], want[key]))
        names = sorted(set(have["fields"]) | set(want["fields"]))
        for name in names:
            if have["fields"].get(name) != want["fields"].get(name):
                diffs.append(Diff(want["id"], name, have["fields"].get(name), want["fields"].get(name)))
    for oid, have in sorted(got_by_id.items()):
        diffs.append(Diff(oid, "<object>", have["class"], None))
    return Verdict(diffs)
