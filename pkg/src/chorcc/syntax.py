"""Abstract syntax of the choreographic language and its auxiliary functions.

Every node is a frozen dataclass. Source locations are carried in ``loc`` and
excluded from equality, so structural comparison ignores where a node came
from. Expressions of all three purity levels share one node family; the level
is computed by :func:`purity`.
"""

from __future__ import annotations

import dataclasses
import itertools
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Iterator, Union

from .diagnostics import CaptureError, Loc, ResolutionError


@dataclass(frozen=True)
class Node:
    loc: Loc | None = field(default=None, compare=False, repr=False, kw_only=True)


# ----------------------------------------------------------------------------
# Types

@dataclass(frozen=True)
class TypeRef(Node):
    name: str
    args: tuple[TypeRef, ...] = ()

    def __str__(self) -> str:
        if self.args:
            return f"{self.name}<{', '.join(map(str, self.args))}>"
        return self.name


INT = TypeRef("int")
BOOLEAN = TypeRef("boolean")


# ----------------------------------------------------------------------------
# Endpoint targets

@dataclass(frozen=True)
class Singular(Node):
    name: str


@dataclass(frozen=True)
class FamilyIndex(Node):
    family: str
    index: Expr


@dataclass(frozen=True)
class FamilyRange(Node):
    family: str
    var: str
    lo: Expr
    hi: Expr


Target = Union[Singular, FamilyIndex, FamilyRange]


# ----------------------------------------------------------------------------
# Expressions

class Expr(Node):
    pass


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class IntLit(Expr):
    value: int


@dataclass(frozen=True)
class BoolLit(Expr):
    value: bool


@dataclass(frozen=True)
class FracLit(Expr):
    """Fractional permission amount, written ``num\\den``."""

    num: int
    den: int


@dataclass(frozen=True)
class This(Expr):
    pass


@dataclass(frozen=True)
class Field(Expr):
    obj: Expr
    name: str


@dataclass(frozen=True)
class Index(Expr):
    seq: Expr
    index: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class UnOp(Expr):
    op: str
    operand: Expr


@dataclass(frozen=True)
class FnCall(Expr):
    name: str
    args: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class PredApply(Expr):
    name: str
    args: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class SeqLit(Expr):
    elem: TypeRef
    items: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class Perm(Expr):
    location: Expr
    amount: Expr


@dataclass(frozen=True)
class EndpointExpr(Expr):
    target: Target
    body: Expr


@dataclass(frozen=True)
class ChorExpr(Expr):
    body: Expr


@dataclass(frozen=True)
class Msg(Expr):
    pass


@dataclass(frozen=True)
class Sender(Expr):
    pass


@dataclass(frozen=True)
class Receiver(Expr):
    pass


@dataclass(frozen=True)
class Forall(Expr):
    """``\\forall var in [lo, hi) :: body``."""

    var: str
    lo: Expr
    hi: Expr
    body: Expr


@dataclass(frozen=True)
class Confined(Expr):
    """Evaluate ``body`` using only memory owned by ``target``.

    Produced by choreographic projection; never written in source.
    """

    target: Target
    body: Expr


TRUE = BoolLit(True)
FALSE = BoolLit(False)

LOGICAL_OPS = ("&&", "||", "==>", "**")
COMPARISON_OPS = ("==", "!=", "<", "<=", ">", ">=")
ARITH_OPS = ("+", "-", "*", "/", "%")


# ----------------------------------------------------------------------------
# Method-level statements

class Stmt(Node):
    pass


@dataclass(frozen=True)
class Block(Stmt):
    stmts: tuple[Stmt, ...] = ()


@dataclass(frozen=True)
class Assign(Stmt):
    target: Expr
    value: Expr


@dataclass(frozen=True)
class LocalDecl(Stmt):
    type: TypeRef
    name: str
    init: Expr | None = None


@dataclass(frozen=True)
class CallStmt(Stmt):
    recv: Expr
    method: str
    args: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class AssertStmt(Stmt):
    expr: Expr


@dataclass(frozen=True)
class Inhale(Stmt):
    expr: Expr


@dataclass(frozen=True)
class Exhale(Stmt):
    expr: Expr


@dataclass(frozen=True)
class If(Stmt):
    cond: Expr
    then: Block
    orelse: Block = Block()


@dataclass(frozen=True)
class While(Stmt):
    invariant: Expr
    cond: Expr
    body: Block


# ----------------------------------------------------------------------------
# Choreographic statements

@dataclass(frozen=True)
class EpAssign(Node):
    target: Expr
    value: Expr


@dataclass(frozen=True)
class EpCall(Node):
    recv: Expr
    method: str
    args: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class ChorBlock(Node):
    stmts: tuple[ChorStmt, ...] = ()


class ChorStmt(Node):
    pass


@dataclass(frozen=True)
class ChorIf(ChorStmt):
    cond: Expr
    then: ChorBlock
    orelse: ChorBlock = ChorBlock()


@dataclass(frozen=True)
class ChorWhile(ChorStmt):
    invariant: Expr
    cond: Expr
    body: ChorBlock


@dataclass(frozen=True)
class ChorAssert(ChorStmt):
    expr: Expr


@dataclass(frozen=True)
class EndpointStmt(ChorStmt):
    target: Target
    inner: Union[EpAssign, EpCall]


@dataclass(frozen=True)
class Communicate(ChorStmt):
    invariant: Expr | None
    sender: Target
    msg: Expr
    receiver: Target
    dest: Expr


# ----------------------------------------------------------------------------
# Declarations

@dataclass(frozen=True)
class Param(Node):
    type: TypeRef
    name: str


@dataclass(frozen=True)
class FieldDecl(Node):
    type: TypeRef
    name: str


@dataclass(frozen=True)
class MethodDecl(Node):
    name: str
    ret: TypeRef
    params: tuple[Param, ...]
    requires: Expr
    ensures: Expr
    body: Block


@dataclass(frozen=True)
class ClassDecl(Node):
    name: str
    fields: tuple[FieldDecl, ...] = ()
    methods: tuple[MethodDecl, ...] = ()
    ctor: MethodDecl | None = None

    def method(self, name: str) -> MethodDecl:
        for m in self.methods:
            if m.name == name:
                return m
        raise ResolutionError(f"class {self.name} has no method {name!r}")

    def field_type(self, name: str) -> TypeRef | None:
        for f in self.fields:
            if f.name == name:
                return f.type
        return None


@dataclass(frozen=True)
class PredicateDecl(Node):
    name: str
    params: tuple[Param, ...]
    body: Expr


@dataclass(frozen=True)
class FunctionDecl(Node):
    name: str
    ret: TypeRef
    params: tuple[Param, ...]
    requires: Expr
    ensures: Expr
    body: Expr


@dataclass(frozen=True)
class EndpointDecl(Node):
    name: str
    cls: str
    args: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class FamilyDecl(Node):
    name: str
    var: str
    size: Expr
    cls: str
    args: tuple[Expr, ...] = ()


@dataclass(frozen=True)
class Choreography(Node):
    name: str
    params: tuple[Param, ...]
    requires: Expr
    ensures: Expr
    endpoints: tuple[Union[EndpointDecl, FamilyDecl], ...]
    run_requires: Expr
    run_ensures: Expr
    body: ChorBlock

    def endpoint(self, name: str) -> EndpointDecl | FamilyDecl:
        for d in self.endpoints:
            if d.name == name:
                return d
        raise ResolutionError(f"unknown endpoint {name!r}")

    @property
    def sorts(self) -> list[str]:
        return [d.name for d in self.endpoints]


Decl = Union[ClassDecl, PredicateDecl, FunctionDecl, Choreography]


@dataclass(frozen=True)
class Program(Node):
    decls: tuple[Decl, ...] = ()
    pragmas: tuple[str, ...] = ()

    @property
    def choreography(self) -> Choreography:
        chors = [d for d in self.decls if isinstance(d, Choreography)]
        if len(chors) != 1:
            raise ResolutionError(f"expected exactly one choreography, found {len(chors)}")
        return chors[0]

    @property
    def classes(self) -> dict[str, ClassDecl]:
        return {d.name: d for d in self.decls if isinstance(d, ClassDecl)}

    @property
    def functions(self) -> dict[str, FunctionDecl]:
        return {d.name: d for d in self.decls if isinstance(d, FunctionDecl)}

    @property
    def predicates(self) -> dict[str, PredicateDecl]:
        return {d.name: d for d in self.decls if isinstance(d, PredicateDecl)}

    def cls(self, name: str) -> ClassDecl:
        try:
            return self.classes[name]
        except KeyError:
            raise ResolutionError(f"unknown class {name!r}") from None


# ----------------------------------------------------------------------------
# Generic traversal

def children(node: Node) -> Iterator[Node]:
    for f in dataclasses.fields(node):
        if f.name == "loc":
            continue
        value = getattr(node, f.name)
        if isinstance(value, Node):
            yield value
        elif isinstance(value, tuple):
            for item in value:
                if isinstance(item, Node):
                    yield item


def walk(node: Node) -> Iterator[Node]:
    yield node
    for child in children(node):
        yield from walk(child)


def rebuild(node: Node, fn: Callable[[Node], Node]) -> Node:
    """Apply ``fn`` to every direct child and rebuild ``node`` if anything changed."""
    changes = {}
    for f in dataclasses.fields(node):
        if f.name == "loc":
            continue
        value = getattr(node, f.name)
        if isinstance(value, Node):
            new = fn(value)
            if new is not value:
                changes[f.name] = new
        elif isinstance(value, tuple) and any(isinstance(v, Node) for v in value):
            new_items = tuple(fn(v) if isinstance(v, Node) else v for v in value)
            if any(a is not b for a, b in zip(new_items, value)):
                changes[f.name] = new_items
    return dataclasses.replace(node, **changes) if changes else node


# ----------------------------------------------------------------------------
# Sorts

def sort(target: Target) -> str:
    """Name of the endpoint or family a target refers to."""
    if isinstance(target, Singular):
        return target.name
    return target.family


class Coverage(IntEnum):
    NO = 0
    MAYBE = 1


def covers(alpha: Target, r: Target) -> Coverage:
    """Decide whether ``alpha`` can denote the singular or indexed endpoint ``r``.

    Only sorts are compared; index equality is left to the caller.
    """
    if isinstance(r, FamilyRange):
        raise ValueError("covers expects a singular or indexed endpoint")
    return Coverage.NO if sort(alpha) != sort(r) else Coverage.MAYBE


def target_expr(target: Target) -> Expr:
    """Heap-level expression denoting a singular or indexed endpoint."""
    if isinstance(target, Singular):
        return Var(target.name, loc=target.loc)
    if isinstance(target, FamilyIndex):
        return Index(Var(target.family), target.index, loc=target.loc)
    raise ValueError("a family range does not denote a single endpoint")


def expr_target(expr: Expr) -> Target | None:
    """Inverse of :func:`target_expr` for expressions of the right shape."""
    if isinstance(expr, Var):
        return Singular(expr.name, loc=expr.loc)
    if isinstance(expr, Index) and isinstance(expr.seq, Var):
        return FamilyIndex(expr.seq.name, expr.index, loc=expr.loc)
    return None


def target_sorts(node: Node) -> set[str]:
    """Every sort named by a target anywhere inside ``node``."""
    return {sort(n) for n in walk(node) if isinstance(n, (Singular, FamilyIndex, FamilyRange))}


# ----------------------------------------------------------------------------
# Variables and substitution

def free_vars(node: Node) -> set[str]:
    if isinstance(node, Var):
        return {node.name}
    if isinstance(node, Forall):
        return free_vars(node.lo) | free_vars(node.hi) | (free_vars(node.body) - {node.var})
    if isinstance(node, EndpointExpr) and isinstance(node.target, FamilyRange):
        t = node.target
        return free_vars(t.lo) | free_vars(t.hi) | (free_vars(node.body) - {t.var})
    result: set[str] = set()
    for child in children(node):
        result |= free_vars(child)
    return result


def bound_vars(node: Node) -> set[str]:
    names = set()
    for n in walk(node):
        if isinstance(n, (Forall, FamilyRange)):
            names.add(n.var)
    return names


def fresh_name(base: str, avoid: set[str]) -> str:
    if base not in avoid:
        return base
    for k in itertools.count(1):
        name = f"{base}{k}"
        if name not in avoid:
            return name
    raise AssertionError("unreachable")


@dataclass(frozen=True)
class Subst:
    """Simultaneous substitution of variables, ``this`` and channel placeholders."""

    vars: dict = field(default_factory=dict)
    this: Expr | None = None
    msg: Expr | None = None
    sender: Expr | None = None
    receiver: Expr | None = None

    def without(self, name: str) -> Subst:
        if name not in self.vars:
            return self
        return dataclasses.replace(self, vars={k: v for k, v in self.vars.items() if k != name})

    def range_vars(self) -> set[str]:
        out: set[str] = set()
        for e in (*self.vars.values(), self.this, self.msg, self.sender, self.receiver):
            if e is not None:
                out |= free_vars(e)
        return out


def substitute(node: Node, s: Subst) -> Node:
    if isinstance(node, Var):
        return s.vars.get(node.name, node)
    if isinstance(node, This) and s.this is not None:
        return s.this
    if isinstance(node, Msg) and s.msg is not None:
        return s.msg
    if isinstance(node, Sender) and s.sender is not None:
        return s.sender
    if isinstance(node, Receiver) and s.receiver is not None:
        return s.receiver
    if isinstance(node, Forall):
        var, body = _rename_binder(node.var, node.body, s)
        return dataclasses.replace(
            node,
            var=var,
            lo=substitute(node.lo, s),
            hi=substitute(node.hi, s),
            body=substitute(body, s.without(var)),
        )
    if isinstance(node, EndpointExpr) and isinstance(node.target, FamilyRange):
        t = node.target
        var, body = _rename_binder(t.var, node.body, s)
        target = dataclasses.replace(t, var=var, lo=substitute(t.lo, s), hi=substitute(t.hi, s))
        return dataclasses.replace(node, target=target, body=substitute(body, s.without(var)))
    return rebuild(node, lambda c: substitute(c, s))


def _rename_binder(var: str, body: Expr, s: Subst) -> tuple[str, Expr]:
    inner = s.without(var)
    if var not in inner.range_vars():
        return var, body
    new = fresh_name(var, inner.range_vars() | free_vars(body) | set(inner.vars))
    return new, substitute(body, Subst({var: Var(new)}))


def subst_vars(node: Node, mapping: dict[str, Expr]) -> Node:
    return substitute(node, Subst(dict(mapping)))


# ----------------------------------------------------------------------------
# Purity levels

class Purity(IntEnum):
    PURE = 0  # E
    HEAP = 1  # H
    RESOURCE = 2  # R


def purity(expr: Node, heap_functions: frozenset[str] = frozenset()) -> Purity:
    level = Purity.PURE
    for n in walk(expr):
        if isinstance(n, (Perm, PredApply)) or (isinstance(n, BinOp) and n.op == "**"):
            return Purity.RESOURCE
        if isinstance(n, (Field, This)) or (isinstance(n, FnCall) and n.name in heap_functions):
            level = Purity.HEAP
    return level


# ----------------------------------------------------------------------------
# Contract lookup

Callee = Union[MethodDecl, ClassDecl]


def resolve_callee(program: Program, ref: str | Callee) -> tuple[Callee, tuple[Param, ...]]:
    if isinstance(ref, str):
        cls_name, _, meth = ref.partition(".")
        cls = program.cls(cls_name)
        ref = cls.method(meth) if meth else cls
    if isinstance(ref, ClassDecl):
        return ref, ref.ctor.params if ref.ctor else ()
    return ref, ref.params


def _contract(program: Program | None, callee: str | Callee, receiver: Expr, pick: str) -> Expr:
    if isinstance(callee, str):
        if program is None:
            raise ResolutionError(f"cannot resolve {callee!r} without a program")
        callee, params = resolve_callee(program, callee)
    elif isinstance(callee, ClassDecl):
        params = callee.ctor.params if callee.ctor else ()
    else:
        params = callee.params
    decl = callee
    param_names = {p.name for p in params}
    clash = free_vars(receiver) & param_names
    if clash:
        raise CaptureError(f"receiver mentions parameter name(s) {sorted(clash)}")
    if isinstance(decl, ClassDecl):
        if decl.ctor is None:
            return TRUE
        decl = decl.ctor
    return substitute(getattr(decl, pick), Subst(this=receiver))


def contract_pre(program: Program | None, callee: str | Callee, receiver: Expr) -> Expr:
    """Precondition of ``callee`` with ``this`` replaced by ``receiver``."""
    return _contract(program, callee, receiver, "requires")


def contract_post(program: Program | None, callee: str | Callee, receiver: Expr) -> Expr:
    """Postcondition of ``callee`` with ``this`` replaced by ``receiver``."""
    return _contract(program, callee, receiver, "ensures")


# ----------------------------------------------------------------------------
# Smart constructors used by the projections

def conj(*parts: Expr, op: str = "&&") -> Expr:
    kept = [p for p in parts if p != TRUE]
    if not kept:
        return TRUE
    out = kept[0]
    for p in kept[1:]:
        out = BinOp(op, out, p)
    return out


def implies(cond: Expr, body: Expr) -> Expr:
    if body == TRUE:
        return TRUE
    if cond == TRUE:
        return body
    return BinOp("==>", cond, body)


def conjuncts(expr: Expr, ops: tuple[str, ...] = ("&&",)) -> list[Expr]:
    if isinstance(expr, BinOp) and expr.op in ops:
        return conjuncts(expr.left, ops) + conjuncts(expr.right, ops)
    return [expr]
