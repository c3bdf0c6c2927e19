"""Verification IR: the sequential, annotated program produced by choreographic projection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from . import pretty as pp
from . import serial
from . import syntax as s


class VStmt(s.Node):
    pass


@dataclass(frozen=True)
class VBlock(VStmt):
    stmts: tuple[VStmt, ...] = ()


@dataclass(frozen=True)
class VAssign(VStmt):
    """Assign a field, or a fresh local when ``target`` is a :class:`Var`."""

    target: s.Expr
    value: s.Expr


@dataclass(frozen=True)
class VAssert(VStmt):
    expr: s.Expr
    check: str = "assert"  # assert | unanimity | injectivity | invariant | contract
    site: str = ""


@dataclass(frozen=True)
class VExhale(VStmt):
    expr: s.Expr
    owner: s.Target | None = None
    site: str = ""


@dataclass(frozen=True)
class VInhale(VStmt):
    expr: s.Expr
    owner: s.Target | None = None
    site: str = ""


@dataclass(frozen=True)
class VIf(VStmt):
    cond: s.Expr
    then: VBlock
    orelse: VBlock = VBlock()


@dataclass(frozen=True)
class VWhile(VStmt):
    invariant: s.Expr
    cond: s.Expr
    body: VBlock
    site: str = ""


@dataclass(frozen=True)
class VCall(VStmt):
    """Method call; ``strat`` selects the confinement-checked variant."""

    recv: s.Expr
    method: str
    args: tuple[s.Expr, ...] = ()
    strat: bool = False


@dataclass(frozen=True)
class VPar(VStmt):
    var: str
    lo: s.Expr
    hi: s.Expr
    requires: s.Expr
    ensures: s.Expr
    body: VBlock
    site: str = ""


@dataclass(frozen=True)
class VConfined(VStmt):
    target: s.Target
    body: VBlock
    site: str = ""


@dataclass(frozen=True)
class VNewEndpoint(VStmt):
    name: str
    cls: str
    args: tuple[s.Expr, ...] = ()


@dataclass(frozen=True)
class VNewFamily(VStmt):
    name: str
    var: str
    size: s.Expr
    cls: str
    args: tuple[s.Expr, ...] = ()


@dataclass(frozen=True)
class VerificationProgram(s.Node):
    name: str
    params: tuple[s.Param, ...]
    decls: tuple[Union[s.ClassDecl, s.FunctionDecl, s.PredicateDecl], ...]
    setup: tuple[VStmt, ...]
    body: VBlock
    strat_methods: tuple[str, ...] = ()
    rules: tuple[str, ...] = ()

    @property
    def program(self) -> s.Program:
        """Declarations wrapped as a program, for method and function lookup."""
        return s.Program(self.decls)


serial.register(VBlock, VAssign, VAssert, VExhale, VInhale, VIf, VWhile, VCall, VPar,
                VConfined, VNewEndpoint, VNewFamily, VerificationProgram)


# ----------------------------------------------------------------------------
# Text form

def _owner(t: s.Target | None) -> str:
    return f" @{pp.target(t)}" if t is not None else ""


def vstmt_lines(st: VStmt, depth: int) -> list[str]:
    ind = pp.INDENT * depth
    if isinstance(st, VBlock):
        return [f"{ind}{{", *vblock_body(st, depth + 1), f"{ind}}}"]
    if isinstance(st, VAssign):
        return [f"{ind}{pp.expr(st.target)} = {pp.expr(st.value)};"]
    if isinstance(st, VAssert):
        tag = "" if st.check == "assert" else f" /* {st.check} */"
        return [f"{ind}assert {pp.expr(st.expr)};{tag}"]
    if isinstance(st, VExhale):
        return [f"{ind}exhale{_owner(st.owner)} {pp.expr(st.expr)};"]
    if isinstance(st, VInhale):
        return [f"{ind}inhale{_owner(st.owner)} {pp.expr(st.expr)};"]
    if isinstance(st, VIf):
        lines = [f"{ind}if ({pp.expr(st.cond)}) {{", *vblock_body(st.then, depth + 1)]
        if st.orelse.stmts:
            lines += [f"{ind}}} else {{", *vblock_body(st.orelse, depth + 1)]
        return lines + [f"{ind}}}"]
    if isinstance(st, VWhile):
        inv = [] if st.invariant == s.TRUE else [f"{ind}loop_invariant {pp.expr(st.invariant)};"]
        return [*inv, f"{ind}while ({pp.expr(st.cond)}) {{", *vblock_body(st.body, depth + 1), f"{ind}}}"]
    if isinstance(st, VCall):
        suffix = "@confined" if st.strat else ""
        args = ", ".join(pp.expr(a) for a in st.args)
        return [f"{ind}{pp.expr(st.recv, 9)}.{st.method}{suffix}({args});"]
    if isinstance(st, VPar):
        lines = []
        if st.requires != s.TRUE:
            lines.append(f"{ind}requires {pp.expr(st.requires)};")
        if st.ensures != s.TRUE:
            lines.append(f"{ind}ensures {pp.expr(st.ensures)};")
        return [*lines, f"{ind}par (int {st.var} = {pp.expr(st.lo)} .. {pp.expr(st.hi)}) {{",
                *vblock_body(st.body, depth + 1), f"{ind}}}"]
    if isinstance(st, VConfined):
        return [f"{ind}confined {pp.target(st.target)} {{", *vblock_body(st.body, depth + 1), f"{ind}}}"]
    if isinstance(st, VNewEndpoint):
        return [f"{ind}{st.name} = new {st.cls}({', '.join(pp.expr(a) for a in st.args)});"]
    if isinstance(st, VNewFamily):
        args = ", ".join(pp.expr(a) for a in st.args)
        return [f"{ind}{st.name} = seq {{ new {st.cls}({args}) | {st.var} in [0, {pp.expr(st.size)}) }};"]
    raise TypeError(f"cannot print {type(st).__name__}")


def vblock_body(b: VBlock, depth: int) -> list[str]:
    return [line for st in b.stmts for line in vstmt_lines(st, depth)]


def pretty_vir(v: VerificationProgram) -> str:
    params = ", ".join(f"{p.type} {p.name}" for p in v.params)
    lines = [f"verification {v.name}({params}) {{"]
    for st in v.setup:
        lines += vstmt_lines(st, 1)
    lines.append("")
    lines += vblock_body(v.body, 1)
    lines.append("}")
    return "\n".join(lines) + "\n"
