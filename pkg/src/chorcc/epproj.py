"""Endpoint projection: one local program per endpoint or family.

Families get a single program parameterized by a self-index; the simulator
instantiates one copy per family member.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from . import pretty as pp
from . import serial
from . import syntax as s
from .diagnostics import NotInvertible, UnsupportedSyntax

EP_RULES = (
    "EpAssign", "EpAssignSkip", "EpSend", "EpReceive", "EpComm", "EpCommSkip", "EpExpr",
    "EpExprSkip", "EpExprIndex", "EpRange", "EpAnd", "EpChor", "EpIf", "EpWhile",
    "EpIndexSend", "EpIndexReceive", "EpRangeSend", "EpRangeReceive",
)

INVERTIBLE_PATTERNS = "i, i + c, i - c, c + i"

EMPTY = s.Block()


# ----------------------------------------------------------------------------
# Endpoint program nodes

@dataclass(frozen=True)
class ChanRef(s.Node):
    """Runtime channel: communicate site plus sender and receiver instance indices."""

    site: int
    sender: s.Expr
    receiver: s.Expr


@dataclass(frozen=True)
class Send(s.Stmt):
    chan: ChanRef
    value: s.Expr


@dataclass(frozen=True)
class Recv(s.Stmt):
    chan: ChanRef
    target: s.Expr


@dataclass(frozen=True)
class ChannelEntry(s.Node):
    site: int
    sender: str
    receiver: str


@dataclass(frozen=True)
class ChannelTable(s.Node):
    entries: tuple[ChannelEntry, ...] = ()

    def to_dict(self) -> dict:
        return {str(e.site): {"sender": e.sender, "receiver": e.receiver} for e in self.entries}


@dataclass(frozen=True)
class EndpointProgram(s.Node):
    sort: str
    self_index: str | None
    body: s.Block
    rules: tuple[str, ...] = ()


serial.register(ChanRef, Send, Recv, ChannelEntry, ChannelTable, EndpointProgram)


# ----------------------------------------------------------------------------
# Channel table and index inversion

def communicates(chor: s.Choreography) -> Iterator[s.Communicate]:
    """Communicate statements in lexical order; their position is the site id."""
    def go(block: s.ChorBlock):
        for st in block.stmts:
            if isinstance(st, s.Communicate):
                yield st
            elif isinstance(st, s.ChorIf):
                yield from go(st.then)
                yield from go(st.orelse)
            elif isinstance(st, s.ChorWhile):
                yield from go(st.body)
    return go(chor.body)


def build_channel_table(chor: s.Choreography) -> ChannelTable:
    return ChannelTable(tuple(
        ChannelEntry(k, s.sort(c.sender), s.sort(c.receiver)) for k, c in enumerate(communicates(chor))
    ))


def invert_index_expr(d: s.Expr, binder: str) -> s.Expr:
    """Inverse of ``d`` as an expression in ``binder``; see INVERTIBLE_PATTERNS."""
    i = s.Var(binder)

    def const(c: s.Expr) -> bool:
        return binder not in s.free_vars(c) and s.purity(c) == s.Purity.PURE

    if d == i:
        return i
    if isinstance(d, s.BinOp) and d.op in ("+", "-"):
        if d.left == i and const(d.right):
            return s.BinOp("-" if d.op == "+" else "+", i, d.right)
        if d.op == "+" and d.right == i and const(d.left):
            return s.BinOp("-", i, d.left)
    raise NotInvertible(
        f"cannot invert index expression {pp.expr(d)}; supported patterns are "
        f"{INVERTIBLE_PATTERNS.replace('i', binder)} with {binder} not free in c", d.loc)


# ----------------------------------------------------------------------------
# Projection

def project_ep(program: s.Program, target: str) -> EndpointProgram:
    return EpProjector(program, target).project()


def project_all(program: s.Program) -> dict[str, EndpointProgram]:
    return {ep.name: project_ep(program, ep.name) for ep in program.choreography.endpoints}


def _guard(cond: s.Expr, stmt: s.Stmt) -> s.Stmt:
    if cond == s.TRUE:
        return stmt
    return s.If(cond, stmt if isinstance(stmt, s.Block) else s.Block((stmt,)), s.Block())


def _in_range(lo: s.Expr, x: s.Expr, hi: s.Expr) -> s.Expr:
    return s.BinOp("&&", s.BinOp("<=", lo, x), s.BinOp("<", x, hi))


def _is_empty(st: s.Stmt) -> bool:
    return isinstance(st, s.Block) and all(_is_empty(x) for x in st.stmts)


def _flat(stmts: list[s.Stmt]) -> s.Block:
    return s.Block(tuple(x for x in stmts if not _is_empty(x)))


class EpProjector:
    def __init__(self, program: s.Program, target: str):
        self.program = program
        self.chor = program.choreography
        self.target = target
        decl = self.chor.endpoint(target)
        taken = {n.name for d in program.decls for n in s.walk(d) if isinstance(n, s.Var)}
        taken |= {n for d in program.decls for n in s.bound_vars(d)}
        taken |= {p.name for p in self.chor.params} | {e.name for e in self.chor.endpoints}
        self.family = isinstance(decl, s.FamilyDecl)
        self.self_index = s.fresh_name("j", taken) if self.family else None
        self.rules: list[str] = []
        self.table: list[ChannelEntry] = []

    def fire(self, rule: str) -> None:
        self.rules.append(rule)

    @property
    def j(self) -> s.Expr:
        return s.Var(self.self_index)

    def project(self) -> EndpointProgram:
        body = self.block(self.chor.body)
        if self.table != list(build_channel_table(self.chor).entries):
            raise AssertionError("channel table disagrees with the lexical site order")
        return EndpointProgram(self.target, self.self_index, body, tuple(self.rules), loc=self.chor.loc)

    # -- expressions ---------------------------------------------------------

    def expr(self, h: s.Expr) -> s.Expr:
        """Local view of an ``&&``/``**`` list of endpoint and ``\\chor`` expressions."""
        parts = s.conjuncts(h, ("&&", "**"))
        if len(parts) > 1:
            self.fire("EpAnd")
        out = []
        for part in parts:
            if isinstance(part, s.ChorExpr):
                self.fire("EpChor")
                out.append(s.TRUE)
            elif isinstance(part, s.EndpointExpr):
                out.append(self.endpoint_expr(part))
            elif isinstance(part, s.BinOp) and part.op == "==>":
                out.append(s.implies(part.left, self.expr(part.right)))
            else:
                out.append(part)
        op = "**" if isinstance(h, s.BinOp) and h.op == "**" else "&&"
        return s.conj(*out, op=op)

    def endpoint_expr(self, e: s.EndpointExpr) -> s.Expr:
        alpha = e.target
        if s.sort(alpha) != self.target:
            self.fire("EpExprSkip")
            return s.TRUE
        if isinstance(alpha, s.Singular):
            self.fire("EpExpr")
            return e.body
        if isinstance(alpha, s.FamilyIndex):
            self.fire("EpExprIndex")
            return s.implies(s.BinOp("==", self.j, alpha.index), e.body)
        self.fire("EpRange")
        return s.implies(_in_range(alpha.lo, self.j, alpha.hi), s.subst_vars(e.body, {alpha.var: self.j}))

    # -- statements ----------------------------------------------------------

    def block(self, b: s.ChorBlock) -> s.Block:
        return _flat([self.stmt(x) for x in b.stmts])

    def stmt(self, st: s.ChorStmt) -> s.Stmt:
        if isinstance(st, s.EndpointStmt):
            return self.endpoint_stmt(st)
        if isinstance(st, s.Communicate):
            return self.comm(st)
        if isinstance(st, s.ChorIf):
            self.fire("EpIf")
            cond = self.expr(st.cond)
            then, orelse = self.block(st.then), self.block(st.orelse)
            if cond == s.TRUE and not then.stmts and not orelse.stmts:
                return EMPTY
            return s.If(cond, then, orelse, loc=st.loc)
        if isinstance(st, s.ChorWhile):
            self.fire("EpWhile")
            cond = self.expr(st.cond)
            body = self.block(st.body)
            if cond == s.TRUE and not body.stmts:
                return EMPTY
            return s.While(s.TRUE, cond, body, loc=st.loc)
        if isinstance(st, s.ChorAssert):
            e = self.expr(st.expr)
            return EMPTY if e == s.TRUE else s.AssertStmt(e, loc=st.loc)
        raise UnsupportedSyntax(f"no endpoint rule for {type(st).__name__}", st.loc)

    def endpoint_stmt(self, st: s.EndpointStmt) -> s.Stmt:
        alpha = st.target
        if s.sort(alpha) != self.target:
            self.fire("EpAssignSkip")
            return EMPTY
        self.fire("EpAssign")
        inner = st.inner
        if isinstance(inner, s.EpAssign):
            local: s.Stmt = s.Assign(inner.target, inner.value, loc=st.loc)
        else:
            local = s.CallStmt(inner.recv, inner.method, inner.args, loc=st.loc)
        if isinstance(alpha, s.Singular):
            return local
        if isinstance(alpha, s.FamilyIndex):
            return _guard(s.BinOp("==", self.j, alpha.index), local)
        return _guard(_in_range(alpha.lo, self.j, alpha.hi), s.subst_vars(local, {alpha.var: self.j}))

    def comm(self, st: s.Communicate) -> s.Stmt:
        site = len(self.table)
        self.table.append(ChannelEntry(site, s.sort(st.sender), s.sort(st.receiver)))
        r, p = st.sender, st.receiver
        if self.target not in (s.sort(r), s.sort(p)):
            self.fire("EpCommSkip")
            return EMPTY
        self.fire("EpComm")
        if not isinstance(r, s.FamilyRange) and s.sort(r) == s.sort(p) and _index(r) == _index(p):
            # Self-communication within one instance is a local copy.
            local = s.Assign(st.dest, st.msg, loc=st.loc)
            if isinstance(r, s.FamilyIndex):
                return _guard(s.BinOp("==", self.j, r.index), local)
            return local
        send = self.send(st, site) if s.sort(r) == self.target else EMPTY
        recv = self.recv(st, site) if s.sort(p) == self.target else EMPTY
        return s.Block((send, recv), loc=st.loc)

    def send(self, st: s.Communicate, site: int) -> s.Stmt:
        r, p = st.sender, st.receiver
        if isinstance(r, s.Singular):
            self.fire("EpSend")
            return Send(ChanRef(site, s.IntLit(0), _index(p)), st.msg)
        if isinstance(r, s.FamilyIndex):
            self.fire("EpIndexSend")
            return _guard(s.BinOp("==", self.j, r.index), Send(ChanRef(site, r.index, _index(p)), st.msg))
        self.fire("EpRangeSend")
        at = {r.var: self.j}
        out = Send(ChanRef(site, self.j, s.subst_vars(_index(p), at)), s.subst_vars(st.msg, at))
        return _guard(_in_range(r.lo, self.j, r.hi), out)

    def recv(self, st: s.Communicate, site: int) -> s.Stmt:
        r, p = st.sender, st.receiver
        if isinstance(r, s.FamilyRange):
            if not isinstance(p, s.FamilyIndex):
                raise UnsupportedSyntax("a ranged communication must target an indexed family member", st.loc)
            self.fire("EpRangeReceive")
            try:
                inverse = invert_index_expr(p.index, r.var)
            except NotInvertible as exc:
                raise UnsupportedSyntax(str(exc), st.loc) from None
            src = s.subst_vars(inverse, {r.var: self.j})
            member = s.Index(s.Var(p.family), p.index)
            dest = s.rebuild(st.dest, lambda c: s.Index(s.Var(p.family), self.j) if c == member else c) \
                if isinstance(st.dest, s.Field) and st.dest.obj == member else s.subst_vars(st.dest, {r.var: src})
            return _guard(_in_range(r.lo, src, r.hi), Recv(ChanRef(site, src, self.j), dest))
        chan = ChanRef(site, _index(r), _index(p))
        if isinstance(p, s.Singular):
            self.fire("EpReceive")
            return Recv(chan, st.dest)
        self.fire("EpIndexReceive")
        return _guard(s.BinOp("==", self.j, p.index), Recv(chan, st.dest))


def _index(t: s.Target) -> s.Expr:
    return t.index if isinstance(t, s.FamilyIndex) else s.IntLit(0)


# ----------------------------------------------------------------------------
# Text form

def _chan(c: ChanRef) -> str:
    return f"chan{c.site}[{pp.expr(c.sender)} -> {pp.expr(c.receiver)}]"


def ep_stmt_lines(st: s.Stmt, depth: int) -> list[str]:
    ind = pp.INDENT * depth
    if isinstance(st, Send):
        return [f"{ind}{_chan(st.chan)}.writeValue({pp.expr(st.value)});"]
    if isinstance(st, Recv):
        return [f"{ind}{pp.expr(st.target)} = {_chan(st.chan)}.readValue();"]
    if isinstance(st, s.Block):
        return [f"{ind}{{", *ep_body(st, depth + 1), f"{ind}}}"]
    if isinstance(st, s.If):
        lines = [f"{ind}if ({pp.expr(st.cond)}) {{", *ep_body(st.then, depth + 1)]
        if st.orelse.stmts:
            lines += [f"{ind}}} else {{", *ep_body(st.orelse, depth + 1)]
        return lines + [f"{ind}}}"]
    if isinstance(st, s.While):
        return [f"{ind}while ({pp.expr(st.cond)}) {{", *ep_body(st.body, depth + 1), f"{ind}}}"]
    return pp.stmt_lines(st, depth)


def ep_body(b: s.Block, depth: int) -> list[str]:
    return [line for st in b.stmts if not _is_empty(st) for line in ep_stmt_lines(st, depth)]


def pretty_ep(e: EndpointProgram) -> str:
    head = f"endpoint {e.sort}[{e.self_index}]" if e.self_index else f"endpoint {e.sort}"
    return "\n".join([f"{head} {{", *ep_body(e.body, 1), "}"]) + "\n"
