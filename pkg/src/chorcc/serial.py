"""Canonical JSON form for every AST family (source, verification IR, endpoint programs).

Each node is encoded as ``{"kind": ..., "children": {...}, "loc": {...} | null}``
and the document carries a top-level ``"schema": 1``.
"""

from __future__ import annotations

import dataclasses
import json
from typing import Any

from . import syntax as s
from .diagnostics import Loc, SchemaError

SCHEMA_VERSION = 1

_REGISTRY: dict[str, type[s.Node]] = {}


def register(*classes: type[s.Node]) -> None:
    for cls in classes:
        _REGISTRY[cls.__name__] = cls


def _register_module(module) -> None:
    for value in vars(module).values():
        if isinstance(value, type) and issubclass(value, s.Node) and dataclasses.is_dataclass(value):
            register(value)


_register_module(s)


def encode(value: Any) -> Any:
    if isinstance(value, s.Node):
        children = {
            f.name: encode(getattr(value, f.name))
            for f in dataclasses.fields(value)
            if f.name != "loc"
        }
        loc = {"line": value.loc.line, "col": value.loc.col} if value.loc else None
        return {"kind": type(value).__name__, "children": children, "loc": loc}
    if isinstance(value, tuple):
        return [encode(v) for v in value]
    if value is None or isinstance(value, (str, int, bool)):
        return value
    raise TypeError(f"cannot encode {type(value).__name__}")


_SCALARS = {"str": str, "int": int, "bool": bool}


def decode(data: Any, path: str = "$") -> Any:
    if isinstance(data, list):
        return tuple(decode(v, f"{path}[{i}]") for i, v in enumerate(data))
    if not isinstance(data, dict):
        return data
    kind = data.get("kind")
    if not isinstance(kind, str):
        raise SchemaError(path, "node without a string 'kind'")
    cls = _REGISTRY.get(kind)
    if cls is None:
        raise SchemaError(f"{path}.kind", f"unknown node kind {kind!r}")
    children = data.get("children")
    if not isinstance(children, dict):
        raise SchemaError(f"{path}.children", "expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls) if f.name != "loc"}
    extra = set(children) - set(fields)
    if extra:
        raise SchemaError(f"{path}.children", f"unexpected field(s) {sorted(extra)} for {kind}")
    kwargs = {}
    for name, f in fields.items():
        if name not in children:
            if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
                raise SchemaError(f"{path}.children", f"missing field {name!r} for {kind}")
            continue
        sub = f"{path}.children.{name}"
        value = children[name]
        expected = _SCALARS.get(str(f.type))
        if expected is not None and (type(value) is not expected):
            raise SchemaError(sub, f"expected {expected.__name__}, got {type(value).__name__}")
        kwargs[name] = decode(value, sub)
    loc = data.get("loc")
    if loc is not None:
        if not (isinstance(loc, dict) and isinstance(loc.get("line"), int) and isinstance(loc.get("col"), int)):
            raise SchemaError(f"{path}.loc", "expected {line, col}")
        kwargs["loc"] = Loc(loc["line"], loc["col"])
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise SchemaError(path, str(exc)) from None


def dumps(document: dict) -> str:
    return json.dumps(document, sort_keys=True, indent=2) + "\n"


def to_json(node: s.Node, key: str = "program") -> str:
    """Serialize ``node`` canonically (sorted keys, stable layout)."""
    return dumps({"schema": SCHEMA_VERSION, key: encode(node)})


def from_json(text: str, key: str = "program") -> s.Node:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise SchemaError("$", "expected an object")
    if data.get("schema") != SCHEMA_VERSION:
        raise SchemaError("$.schema", f"expected schema {SCHEMA_VERSION}, got {data.get('schema')!r}")
    if key not in data:
        raise SchemaError("$", f"missing {key!r}")
    node = decode(data[key], f"$.{key}")
    if not isinstance(node, s.Node):
        raise SchemaError(f"$.{key}", "expected a node")
    return node
