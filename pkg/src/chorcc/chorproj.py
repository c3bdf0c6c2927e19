"""Choreographic projection: one sequential verification program per choreography.

Every rule application is appended to ``Projector.rules`` so callers can
check which rules a corpus exercises.
"""

from __future__ import annotations

from . import syntax as s
from .diagnostics import ResolutionError, UnsupportedSyntax
from .vir import (VAssert, VAssign, VBlock, VCall, VConfined, VerificationProgram, VExhale, VIf,
                  VInhale, VNewEndpoint, VNewFamily, VPar, VStmt, VWhile)
from .wellformed import Scope, endpoint_types, type_of

CP_RULES = (
    "CpExpr", "CpExprSkip", "CpAssign", "CpIf", "CpWhile", "CpMethodCall", "CpComm",
    "CpExprRange", "CpExprIndex", "CpMethodCallRange", "CpCommRange",
)

PARAM_ASSIGN_HINT = (
    "assignments have no parameterized form; define a method on the endpoint "
    "class that writes the field and call it over the range instead"
)


def project_chor(program: s.Program) -> VerificationProgram:
    """Project the program's choreography to a verification program."""
    return Projector(program).project()


def _site(node: s.Node) -> str:
    return str(node.loc) if node.loc is not None else ""


class Projector:
    def __init__(self, program: s.Program):
        self.program = program
        self.chor = program.choreography
        self.rules: list[str] = []
        self.strat: set[str] = set()
        self._taken = {n for d in program.decls for node in s.walk(d)
                       for n in _names(node)}
        self._msg_count = 0

    def fire(self, rule: str) -> None:
        self.rules.append(rule)

    def fresh(self, base: str) -> str:
        name = s.fresh_name(base, self._taken)
        self._taken.add(name)
        return name

    def family_size(self, name: str) -> s.Expr:
        decl = self.chor.endpoint(name)
        if not isinstance(decl, s.FamilyDecl):
            raise ResolutionError(f"{name} is not a family")
        return decl.size

    # -- entry ---------------------------------------------------------------

    def project(self) -> VerificationProgram:
        chor = self.chor
        setup: list[VStmt] = []
        if chor.requires != s.TRUE:
            setup.append(VAssert(chor.requires, "contract", _site(chor)))
        for ep in chor.endpoints:
            if isinstance(ep, s.EndpointDecl):
                setup.append(VNewEndpoint(ep.name, ep.cls, ep.args, loc=ep.loc))
            else:
                setup.append(VNewFamily(ep.name, ep.var, ep.size, ep.cls, ep.args, loc=ep.loc))
        body: list[VStmt] = []
        if chor.run_requires != s.TRUE:
            body.append(VAssert(self.cp_resource(chor.run_requires), "contract", _site(chor)))
        body += self.cp_block(chor.body).stmts
        for post in (chor.run_ensures, chor.ensures):
            if post != s.TRUE:
                body.append(VAssert(self.cp_resource(post), "contract", _site(chor)))
        decls = tuple(d for d in self.program.decls if not isinstance(d, s.Choreography))
        return VerificationProgram(
            chor.name, chor.params, decls, tuple(setup), VBlock(tuple(body)),
            tuple(sorted(self.strat)), tuple(self.rules), loc=chor.loc,
        )

    # -- expressions ---------------------------------------------------------

    def cp_expr(self, h: s.Expr, confine: s.Target | None = None) -> s.Expr:
        """Project an ``&&``-list of endpoint expressions."""
        parts = []
        for part in s.conjuncts(h):
            if isinstance(part, s.ChorExpr):
                raise UnsupportedSyntax("\\chor is not allowed in a branch or loop condition", part.loc)
            parts.append(self._conjunct(part, confine))
        return s.conj(*parts)

    def cp_resource(self, r: s.Expr, confine: s.Target | None = None) -> s.Expr:
        """Project a choreographic assertion; ``\\chor`` bodies survive unconfined."""
        parts = []
        for part in s.conjuncts(r, ("&&", "**")):
            if isinstance(part, s.ChorExpr):
                parts.append(part.body if confine is None else s.TRUE)
            elif isinstance(part, s.BinOp) and part.op == "==>":
                parts.append(s.implies(part.left, self.cp_resource(part.right, confine)))
            else:
                parts.append(self._conjunct(part, confine))
        return s.conj(*parts, op="**")

    def _conjunct(self, part: s.Expr, confine: s.Target | None) -> s.Expr:
        if not isinstance(part, s.EndpointExpr):
            _reject_qp(part)
            return part
        alpha, body = part.target, part.body
        if any(isinstance(n, s.EndpointExpr) for n in s.walk(body)):
            raise UnsupportedSyntax("nested endpoint expression", part.loc)
        _reject_qp(body)
        if confine is None:
            if isinstance(alpha, s.FamilyRange):
                self.fire("CpExprRange")
                member = s.FamilyIndex(alpha.family, s.Var(alpha.var))
                return s.Forall(alpha.var, alpha.lo, alpha.hi, s.Confined(member, body), loc=part.loc)
            self.fire("CpExpr")
            return s.Confined(alpha, body, loc=part.loc)
        if s.covers(alpha, confine) == s.Coverage.NO:
            self.fire("CpExprSkip")
            return s.TRUE
        if isinstance(alpha, s.Singular):
            self.fire("CpExpr")
            return body
        if not isinstance(confine, s.FamilyIndex):
            raise UnsupportedSyntax(f"cannot confine {s.sort(alpha)} to a singular endpoint", part.loc)
        self.fire("CpExprIndex")
        j = confine.index
        if isinstance(alpha, s.FamilyIndex):
            return s.implies(s.BinOp("==", j, alpha.index), body)
        guard = s.conj(s.BinOp("<=", alpha.lo, j), s.BinOp("<", j, alpha.hi))
        return s.implies(guard, s.subst_vars(body, {alpha.var: j}))

    def unanimous(self, h: s.Expr) -> s.Expr:
        """Assertion that every endpoint instance agrees on its local view of ``h``."""
        sorts: list[str] = []
        for part in s.conjuncts(h):
            if isinstance(part, s.EndpointExpr) and s.sort(part.target) not in sorts:
                sorts.append(s.sort(part.target))
        singular = [x for x in sorts if isinstance(self.chor.endpoint(x), s.EndpointDecl)]
        families = [x for x in sorts if x not in singular]
        views = {x: s.Confined(s.Singular(x), self.cp_expr(h, s.Singular(x))) for x in singular}
        if singular:
            pivot = views[singular[0]]
            rest = singular[1:]
        else:
            pivot = self.cp_expr(h)
            rest = []
        terms = [s.BinOp("==", views[x], pivot) for x in rest]
        for fam in families:
            j = self.fresh("j")
            member = s.FamilyIndex(fam, s.Var(j))
            view = s.Confined(member, self.cp_expr(h, member))
            terms.append(s.Forall(j, s.IntLit(0), self.family_size(fam), s.BinOp("==", view, pivot)))
        return s.conj(*terms)

    # -- statements ----------------------------------------------------------

    def cp_block(self, block: s.ChorBlock) -> VBlock:
        out: list[VStmt] = []
        for st in block.stmts:
            out += self.cp_stmt(st)
        return VBlock(tuple(out), loc=block.loc)

    def cp_stmt(self, st: s.ChorStmt) -> list[VStmt]:
        if isinstance(st, s.ChorIf):
            return self.cp_if(st)
        if isinstance(st, s.ChorWhile):
            return self.cp_while(st)
        if isinstance(st, s.ChorAssert):
            return [VAssert(self.cp_resource(st.expr), "assert", _site(st), loc=st.loc)]
        if isinstance(st, s.EndpointStmt):
            if isinstance(st.inner, s.EpAssign):
                return [self.cp_assign(st.target, st.inner.target, st.inner.value, st)]
            if isinstance(st.target, s.FamilyRange):
                return [self.cp_method_call_range(st.target, st.inner, st)]
            return [self.cp_method_call(st.target, st.inner, st)]
        if isinstance(st, s.Communicate):
            if isinstance(st.sender, s.FamilyRange):
                return [self.cp_comm_range(st)]
            return [self.cp_comm(st)]
        raise UnsupportedSyntax(f"no projection rule for {type(st).__name__}", st.loc)

    def cp_if(self, st: s.ChorIf) -> list[VStmt]:
        self.fire("CpIf")
        check = VAssert(self.unanimous(st.cond), "unanimity", _site(st))
        cond = self.cp_expr(st.cond)
        return [check, VIf(cond, self.cp_block(st.then), self.cp_block(st.orelse), loc=st.loc)]

    def cp_while(self, st: s.ChorWhile) -> list[VStmt]:
        self.fire("CpWhile")
        unanimity = self.unanimous(st.cond)
        invariant = self.cp_resource(st.invariant)
        cond = self.cp_expr(st.cond)
        body = self.cp_block(st.body)
        body = VBlock(body.stmts + (VAssert(unanimity, "unanimity", _site(st)),), loc=body.loc)
        return [VAssert(unanimity, "unanimity", _site(st)),
                VWhile(invariant, cond, body, _site(st), loc=st.loc)]

    def cp_assign(self, target: s.Target, loc: s.Expr, value: s.Expr, node: s.Node | None = None) -> VStmt:
        if isinstance(target, s.FamilyRange):
            raise UnsupportedSyntax(PARAM_ASSIGN_HINT, node.loc if node else None)
        self.fire("CpAssign")
        site = _site(node) if node else ""
        return VConfined(target, VBlock((VAssign(loc, value),)), site, loc=node.loc if node else None)

    def _method(self, recv: s.Expr, name: str, target: s.Target, node: s.Node) -> s.MethodDecl:
        scope = Scope(dict(endpoint_types(self.chor)))
        if isinstance(target, s.FamilyRange):
            scope.vars[target.var] = s.INT
        ty = type_of(self.program, recv, scope)
        cls = self.program.classes.get(ty.name) if ty is not None else None
        if cls is None:
            raise ResolutionError(f"{_site(node)}: cannot resolve the receiver of {name}()")
        method = cls.method(name)
        self.strat.add(f"{cls.name}.{name}")
        return method

    def cp_method_call(self, target: s.Target, call: s.EpCall, node: s.Node) -> VStmt:
        self._method(call.recv, call.method, target, node)
        self.fire("CpMethodCall")
        inner = VCall(call.recv, call.method, call.args, strat=True, loc=call.loc)
        return VConfined(target, VBlock((inner,)), _site(node), loc=node.loc)

    def cp_method_call_range(self, target: s.FamilyRange, call: s.EpCall, node: s.Node) -> VStmt:
        member = s.Index(s.Var(target.family), s.Var(target.var))
        if call.recv != member:
            raise UnsupportedSyntax(
                f"a ranged call must be made on {target.family}[{target.var}] itself so its "
                "footprint stays predictable", node.loc)
        if any(s.purity(a) > s.Purity.PURE for a in call.args):
            raise UnsupportedSyntax("arguments of a ranged call must be pure", node.loc)
        method = self._method(call.recv, call.method, target, node)
        self.fire("CpMethodCallRange")
        bind = {p.name: a for p, a in zip(method.params, call.args)}
        pre = s.subst_vars(s.contract_pre(self.program, method, member), bind)
        post = s.subst_vars(s.contract_post(self.program, method, member), bind)
        footprint = sorted(_this_fields(self.program, method))
        extra_pre = [s.Perm(s.Field(member, f), s.IntLit(1)) for f in footprint if f not in _perm_fields(pre, member)]
        extra_post = [s.Perm(s.Field(member, f), s.IntLit(1)) for f in footprint if f not in _perm_fields(post, member)]
        body = VBlock((VCall(member, call.method, call.args, strat=True, loc=call.loc),))
        return VPar(target.var, target.lo, target.hi,
                    s.conj(*extra_pre, pre, op="**"), s.conj(*extra_post, post, op="**"),
                    body, _site(node), loc=node.loc)

    def _instantiate(self, st: s.Communicate, value: s.Expr, sender: s.Expr, receiver: s.Expr) -> s.Expr:
        inv = st.invariant if st.invariant is not None else s.TRUE
        return s.substitute(inv, s.Subst(msg=value, sender=sender, receiver=receiver))

    def cp_comm(self, st: s.Communicate) -> VStmt:
        if isinstance(st.receiver, s.FamilyRange):
            raise UnsupportedSyntax("a ranged receiver needs a ranged sender", st.loc)
        self.fire("CpComm")
        v = s.Var(self.fresh("msg"))
        r, p = st.sender, st.receiver
        inst = self._instantiate(st, v, s.target_expr(r), s.target_expr(p))
        site = _site(st)
        return VBlock((
            VConfined(r, VBlock((VAssign(v, st.msg),)), site),
            VExhale(inst, r, site),
            VInhale(inst, p, site),
            VConfined(p, VBlock((VAssign(st.dest, v),)), site),
        ), loc=st.loc)

    def cp_comm_range(self, st: s.Communicate) -> VStmt:
        sender = st.sender
        assert isinstance(sender, s.FamilyRange)
        if not isinstance(st.receiver, s.FamilyIndex):
            raise UnsupportedSyntax("a ranged communication must target an indexed family member", st.loc)
        i = sender.var
        src = s.Index(s.Var(sender.family), s.Var(i))
        d = st.receiver.index
        dst = s.Index(s.Var(st.receiver.family), d)
        for n in s.walk(st.msg):
            if isinstance(n, s.This) or (isinstance(n, s.Field) and n.obj != src):
                raise UnsupportedSyntax(
                    f"the message of a ranged communication may only read fields of "
                    f"{sender.family}[{i}]", st.loc)
        if not (isinstance(st.dest, s.Field) and st.dest.obj == dst):
            raise UnsupportedSyntax(
                "the destination of a ranged communication must be a field of the receiver", st.loc)
        self.fire("CpCommRange")
        i2 = self.fresh(f"{i}_")
        distinct = s.implies(s.BinOp("!=", s.Var(i), s.Var(i2)),
                             s.BinOp("!=", d, s.subst_vars(d, {i: s.Var(i2)})))
        injective = s.Forall(i, sender.lo, sender.hi, s.Forall(i2, sender.lo, sender.hi, distinct))
        read = sorted({n.name for n in s.walk(st.msg) if isinstance(n, s.Field)})
        footprint = [s.Perm(s.Field(src, f), s.FracLit(1, 2)) for f in read]
        footprint.append(s.Perm(st.dest, s.IntLit(1)))
        contract = s.conj(*footprint, op="**")
        v = s.Var(self.fresh("msg"))
        member = s.FamilyIndex(sender.family, s.Var(i))
        receiver = s.FamilyIndex(st.receiver.family, d)
        inst = self._instantiate(st, v, src, dst)
        site = _site(st)
        body = VBlock((
            VConfined(member, VBlock((VAssign(v, st.msg),)), site),
            VExhale(inst, member, site),
            VInhale(inst, receiver, site),
            VConfined(receiver, VBlock((VAssign(st.dest, v),)), site),
        ))
        return VBlock((
            VAssert(injective, "injectivity", site),
            VPar(i, sender.lo, sender.hi, contract, contract, body, site),
        ), loc=st.loc)


def _names(node: s.Node) -> set[str]:
    if isinstance(node, s.Var):
        return {node.name}
    if isinstance(node, (s.Forall, s.FamilyRange, s.FamilyDecl)):
        return {node.var, *([node.name] if isinstance(node, s.FamilyDecl) else [])}
    if isinstance(node, (s.Param, s.LocalDecl, s.EndpointDecl)):
        return {node.name}
    return set()


def _reject_qp(expr: s.Expr) -> None:
    for n in s.walk(expr):
        if isinstance(n, s.Forall) and s.purity(n.body) == s.Purity.RESOURCE:
            raise UnsupportedSyntax("quantified permissions are not supported by projection", n.loc)


def _this_fields(program: s.Program, method: s.MethodDecl, seen: set[str] | None = None) -> set[str]:
    """Fields accessed through ``this`` by ``method`` and the methods it calls on ``this``."""
    seen = set() if seen is None else seen
    if method.name in seen:
        return set()
    seen.add(method.name)
    out = {n.name for n in s.walk(method.body) if isinstance(n, s.Field) and isinstance(n.obj, s.This)}
    owner = next((c for c in program.classes.values() if method in c.methods), None)
    for n in s.walk(method.body):
        if isinstance(n, s.CallStmt) and isinstance(n.recv, s.This) and owner is not None:
            out |= _this_fields(program, owner.method(n.method), seen)
    return out


def _perm_fields(contract: s.Expr, member: s.Expr) -> set[str]:
    return {n.location.name for n in s.walk(contract)
            if isinstance(n, s.Perm) and isinstance(n.location, s.Field) and n.location.obj == member}
