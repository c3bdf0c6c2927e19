"""Runtime values, heap objects and canonical heap snapshots."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Union

from .. import syntax as s
from ..diagnostics import ChorError


class RuntimeFault(ChorError):
    """A run-time type error, bad index or failed source assertion."""


@dataclass(frozen=True, order=True)
class Ref:
    oid: int


# A value is an int, bool, tuple of values, Ref, Fraction or None (null reference).
Value = Union[int, bool, tuple, Ref, Fraction, None]

# The endpoint instance owning an object: (sort, index); singular endpoints use 0.
Owner = tuple[str, int]


@dataclass
class Obj:
    cls: str
    owner: Owner
    fields: dict[str, Any] = field(default_factory=dict)


def default_value(t: s.TypeRef) -> Value:
    if t.name == "int":
        return 0
    if t.name == "boolean":
        return False
    if t.name == "seq":
        return ()
    return None


class Heap:
    def __init__(self) -> None:
        self.objects: list[Obj] = []

    def new(self, cls: s.ClassDecl, owner: Owner) -> Ref:
        obj = Obj(cls.name, owner, {f.name: default_value(f.type) for f in cls.fields})
        self.objects.append(obj)
        return Ref(len(self.objects) - 1)

    def get(self, ref: Any) -> Obj:
        if not isinstance(ref, Ref):
            raise RuntimeFault(f"expected an object reference, got {show(ref)}")
        return self.objects[ref.oid]

    def snapshot(self) -> list[dict]:
        return [obj_json(k, o) for k, o in enumerate(self.objects)]

    def fragment(self, owner: Owner) -> dict[int, dict]:
        """Objects owned by one endpoint instance, keyed by object id."""
        return {k: obj_json(k, o) for k, o in enumerate(self.objects) if o.owner == owner}


def value_json(v: Value) -> Any:
    if isinstance(v, Ref):
        return {"ref": v.oid}
    if isinstance(v, tuple):
        return [value_json(x) for x in v]
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    return v


def obj_json(oid: int, o: Obj) -> dict:
    return {
        "id": oid,
        "class": o.cls,
        "owner": [o.owner[0], o.owner[1]],
        "fields": {k: value_json(v) for k, v in sorted(o.fields.items())},
    }


def show(v: Value) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Ref):
        return f"#{v.oid}"
    if v is None:
        return "null"
    if isinstance(v, tuple):
        return "[" + ", ".join(show(x) for x in v) + "]"
    return str(v)


def parse_params(text: str) -> dict[str, Value]:
    """Parse ``k=v, ...`` where each value is an integer or a boolean."""
    out: dict[str, Value] = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        key, sep, raw = item.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise ValueError(f"expected name=value, got {item!r}")
        if raw in ("true", "false"):
            out[key] = raw == "true"
        else:
            try:
                out[key] = int(raw)
            except ValueError:
                raise ValueError(f"parameter {key} must be an integer or boolean, got {raw!r}") from None
    return out
