"""Deterministic pretty-printer; ``parse(pretty(p))`` reproduces ``p``."""

from __future__ import annotations

from . import syntax as s

INDENT = "    "

_PREC = {"==>": 1, "**": 2, "||": 3, "&&": 4, "+": 6, "-": 6, "*": 7, "/": 7, "%": 7}
for _op in s.COMPARISON_OPS:
    _PREC[_op] = 5
_UNARY = 8
_POSTFIX = 9
_ATOM = 10


def _prec(e: s.Expr) -> int:
    if isinstance(e, s.BinOp):
        return _PREC[e.op]
    if isinstance(e, s.UnOp):
        return _UNARY
    if isinstance(e, s.IntLit) and e.value < 0:
        return _UNARY
    if isinstance(e, (s.Field, s.Index)):
        return _POSTFIX
    return _ATOM


def expr(e: s.Expr, min_prec: int = 0) -> str:
    text = _expr(e)
    return f"({text})" if _prec(e) < min_prec else text


def _expr(e: s.Expr) -> str:
    if isinstance(e, s.BinOp):
        p = _PREC[e.op]
        if e.op == "==>":
            lp, rp = p + 1, p
        elif e.op in s.COMPARISON_OPS:
            lp, rp = p + 1, p + 1
        else:
            lp, rp = p, p + 1
        return f"{expr(e.left, lp)} {e.op} {expr(e.right, rp)}"
    if isinstance(e, s.UnOp):
        return f"{e.op}{expr(e.operand, _UNARY)}"
    if isinstance(e, s.Var):
        return e.name
    if isinstance(e, s.IntLit):
        return str(e.value)
    if isinstance(e, s.BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, s.FracLit):
        return f"{e.num}\\{e.den}"
    if isinstance(e, s.This):
        return "this"
    if isinstance(e, s.Field):
        return f"{expr(e.obj, _POSTFIX)}.{e.name}"
    if isinstance(e, s.Index):
        return f"{expr(e.seq, _POSTFIX)}[{expr(e.index)}]"
    if isinstance(e, (s.FnCall, s.PredApply)):
        return f"{e.name}({', '.join(expr(a) for a in e.args)})"
    if isinstance(e, s.SeqLit):
        return f"seq<{type_ref(e.elem)}>{{{', '.join(expr(a) for a in e.items)}}}"
    if isinstance(e, s.Perm):
        return f"Perm({expr(e.location)}, {expr(e.amount)})"
    if isinstance(e, s.EndpointExpr):
        return f"(\\endpoint {target(e.target)}; {expr(e.body)})"
    if isinstance(e, s.ChorExpr):
        return f"(\\chor {expr(e.body)})"
    if isinstance(e, s.Confined):
        return f"(\\confined {target(e.target)}; {expr(e.body)})"
    if isinstance(e, s.Msg):
        return "\\msg"
    if isinstance(e, s.Sender):
        return "\\sender"
    if isinstance(e, s.Receiver):
        return "\\receiver"
    if isinstance(e, s.Forall):
        return f"(\\forall {e.var} in [{expr(e.lo)}, {expr(e.hi)}) :: {expr(e.body)})"
    raise TypeError(f"cannot print {type(e).__name__}")


def target(t: s.Target) -> str:
    if isinstance(t, s.Singular):
        return t.name
    if isinstance(t, s.FamilyIndex):
        return f"{t.family}[{expr(t.index)}]"
    return f"{t.family}[{t.var} := {expr(t.lo)} .. {expr(t.hi)}]"


def type_ref(t: s.TypeRef) -> str:
    return str(t)


def _params(params: tuple[s.Param, ...]) -> str:
    return ", ".join(f"{type_ref(p.type)} {p.name}" for p in params)


def _args(args: tuple[s.Expr, ...]) -> str:
    return ", ".join(expr(a) for a in args)


def _contract(requires: s.Expr, ensures: s.Expr, ind: str) -> list[str]:
    lines = []
    if requires != s.TRUE:
        lines.append(f"{ind}requires {expr(requires)};")
    if ensures != s.TRUE:
        lines.append(f"{ind}ensures {expr(ensures)};")
    return lines


def _invariant(inv: s.Expr, ind: str) -> list[str]:
    return [] if inv == s.TRUE else [f"{ind}loop_invariant {expr(inv)};"]


def stmt_lines(st: s.Stmt, depth: int) -> list[str]:
    ind = INDENT * depth
    if isinstance(st, s.Block):
        return [f"{ind}{{", *block_body(st, depth + 1), f"{ind}}}"]
    if isinstance(st, s.Assign):
        return [f"{ind}{expr(st.target)} = {expr(st.value)};"]
    if isinstance(st, s.LocalDecl):
        init = f" = {expr(st.init)}" if st.init is not None else ""
        return [f"{ind}{type_ref(st.type)} {st.name}{init};"]
    if isinstance(st, s.CallStmt):
        return [f"{ind}{expr(st.recv, _POSTFIX)}.{st.method}({_args(st.args)});"]
    if isinstance(st, s.AssertStmt):
        return [f"{ind}assert {expr(st.expr)};"]
    if isinstance(st, s.Inhale):
        return [f"{ind}inhale {expr(st.expr)};"]
    if isinstance(st, s.Exhale):
        return [f"{ind}exhale {expr(st.expr)};"]
    if isinstance(st, s.If):
        lines = [f"{ind}if ({expr(st.cond)}) {{", *block_body(st.then, depth + 1)]
        if st.orelse.stmts:
            lines += [f"{ind}}} else {{", *block_body(st.orelse, depth + 1)]
        return lines + [f"{ind}}}"]
    if isinstance(st, s.While):
        return [*_invariant(st.invariant, ind), f"{ind}while ({expr(st.cond)}) {{",
                *block_body(st.body, depth + 1), f"{ind}}}"]
    raise TypeError(f"cannot print {type(st).__name__}")


def block_body(b: s.Block, depth: int) -> list[str]:
    return [line for st in b.stmts for line in stmt_lines(st, depth)]


def chor_stmt_lines(st: s.ChorStmt, depth: int) -> list[str]:
    ind = INDENT * depth
    if isinstance(st, s.ChorIf):
        lines = [f"{ind}if ({expr(st.cond)}) {{", *chor_body(st.then, depth + 1)]
        if st.orelse.stmts:
            lines += [f"{ind}}} else {{", *chor_body(st.orelse, depth + 1)]
        return lines + [f"{ind}}}"]
    if isinstance(st, s.ChorWhile):
        return [*_invariant(st.invariant, ind), f"{ind}while ({expr(st.cond)}) {{",
                *chor_body(st.body, depth + 1), f"{ind}}}"]
    if isinstance(st, s.ChorAssert):
        return [f"{ind}assert {expr(st.expr)};"]
    if isinstance(st, s.EndpointStmt):
        inner = st.inner
        if isinstance(inner, s.EpAssign):
            body = f"{expr(inner.target)} := {expr(inner.value)};"
        else:
            body = f"{expr(inner.recv, _POSTFIX)}.{inner.method}({_args(inner.args)});"
        return [f"{ind}endpoint {target(st.target)}: {body}"]
    if isinstance(st, s.Communicate):
        lines = []
        if st.invariant is not None:
            lines.append(f"{ind}channel_invariant {expr(st.invariant)};")
        lines.append(f"{ind}communicate {target(st.sender)}: {expr(st.msg)} -> "
                     f"{target(st.receiver)}: {expr(st.dest)};")
        return lines
    raise TypeError(f"cannot print {type(st).__name__}")


def chor_body(b: s.ChorBlock, depth: int) -> list[str]:
    return [line for st in b.stmts for line in chor_stmt_lines(st, depth)]


def decl_lines(d: s.Decl) -> list[str]:
    if isinstance(d, s.ClassDecl):
        lines = [f"class {d.name} {{"]
        lines += [f"{INDENT}{type_ref(f.type)} {f.name};" for f in d.fields]
        members = ([d.ctor] if d.ctor else []) + list(d.methods)
        for m in members:
            lines.append("")
            lines += _contract(m.requires, m.ensures, INDENT)
            head = m.name if m is d.ctor else f"{type_ref(m.ret)} {m.name}"
            lines.append(f"{INDENT}{head}({_params(m.params)}) {{")
            lines += block_body(m.body, 2)
            lines.append(f"{INDENT}}}")
        return lines + ["}"]
    if isinstance(d, s.PredicateDecl):
        return [f"resource {d.name}({_params(d.params)}) = {expr(d.body)};"]
    if isinstance(d, s.FunctionDecl):
        return [*_contract(d.requires, d.ensures, ""),
                f"pure {type_ref(d.ret)} {d.name}({_params(d.params)}) = {expr(d.body)};"]
    if isinstance(d, s.Choreography):
        lines = [*_contract(d.requires, d.ensures, ""), f"choreography {d.name}({_params(d.params)}) {{"]
        for ep in d.endpoints:
            if isinstance(ep, s.EndpointDecl):
                lines.append(f"{INDENT}endpoint {ep.name} = {ep.cls}({_args(ep.args)});")
            else:
                lines.append(f"{INDENT}endpoint {ep.name}[{ep.var} := 0 .. {expr(ep.size)}] = "
                             f"{ep.cls}({_args(ep.args)});")
        lines.append("")
        lines += _contract(d.run_requires, d.run_ensures, INDENT)
        lines.append(f"{INDENT}run {{")
        lines += chor_body(d.body, 2)
        lines.append(f"{INDENT}}}")
        return lines + ["}"]
    raise TypeError(f"cannot print {type(d).__name__}")


def pretty(p: s.Program) -> str:
    chunks = []
    if p.pragmas:
        chunks.append("\n".join(f"//! {x}" for x in p.pragmas))
    chunks += ["\n".join(decl_lines(d)) for d in p.decls]
    return "\n\n".join(chunks) + "\n"
