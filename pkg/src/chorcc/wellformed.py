"""Static well-formedness: scoping, resolution, purity and placement rules."""

from __future__ import annotations

from dataclasses import dataclass, field

from . import syntax as s
from .diagnostics import Diagnostic, Loc, ResolutionError, Rule, Severity

_NOWHERE = Loc(0, 0)


@dataclass
class Scope:
    """What an expression may refer to at one program point."""

    vars: dict[str, s.TypeRef | None] = field(default_factory=dict)
    this: s.TypeRef | None = None
    placeholders: bool = False

    def child(self, **extra: s.TypeRef | None) -> Scope:
        return Scope({**self.vars, **extra}, self.this, self.placeholders)


def endpoint_types(chor: s.Choreography) -> dict[str, s.TypeRef]:
    out = {}
    for d in chor.endpoints:
        cls = s.TypeRef(d.cls)
        out[d.name] = cls if isinstance(d, s.EndpointDecl) else s.TypeRef("seq", (cls,))
    return out


def type_of(program: s.Program, expr: s.Expr, scope: Scope) -> s.TypeRef | None:
    """Best-effort static type of ``expr``; ``None`` when unknown."""
    if isinstance(expr, s.Var):
        return scope.vars.get(expr.name)
    if isinstance(expr, s.This):
        return scope.this
    if isinstance(expr, s.IntLit):
        return s.INT
    if isinstance(expr, s.BoolLit):
        return s.BOOLEAN
    if isinstance(expr, s.Index):
        seq = type_of(program, expr.seq, scope)
        return seq.args[0] if seq is not None and seq.name == "seq" and seq.args else None
    if isinstance(expr, s.Field):
        obj = type_of(program, expr.obj, scope)
        cls = program.classes.get(obj.name) if obj is not None else None
        return cls.field_type(expr.name) if cls is not None else None
    if isinstance(expr, s.SeqLit):
        return s.TypeRef("seq", (expr.elem,))
    if isinstance(expr, s.FnCall):
        fn = program.functions.get(expr.name)
        return fn.ret if fn is not None else None
    if isinstance(expr, s.BinOp):
        if expr.op in s.ARITH_OPS:
            left = type_of(program, expr.left, scope)
            return left if left is not None and left.name == "seq" else s.INT
        return s.BOOLEAN
    if isinstance(expr, s.UnOp):
        return s.BOOLEAN if expr.op == "!" else s.INT
    return s.BOOLEAN


def check_wellformed(program: s.Program) -> list[Diagnostic]:
    """All well-formedness diagnostics for ``program``, in traversal order."""
    return _Checker(program).run()


def errors(diagnostics: list[Diagnostic]) -> list[Diagnostic]:
    return [d for d in diagnostics if d.severity is Severity.ERROR]


class _Checker:
    def __init__(self, program: s.Program):
        self.p = program
        self.diags: list[Diagnostic] = []
        self.chor = next((d for d in program.decls if isinstance(d, s.Choreography)), None)
        self.heap_functions = frozenset(
            f.name for f in program.functions.values()
            if s.purity(f.body) >= s.Purity.HEAP
        )

    def report(self, rule: Rule, message: str, node: s.Node | None, severity=Severity.ERROR) -> None:
        loc = node.loc if node is not None and node.loc is not None else _NOWHERE
        self.diags.append(Diagnostic(severity, rule, message, loc))

    def run(self) -> list[Diagnostic]:
        self.check_names()
        for d in self.p.decls:
            if isinstance(d, s.ClassDecl):
                self.check_class(d)
            elif isinstance(d, s.PredicateDecl):
                scope = Scope({p.name: p.type for p in d.params})
                self.check_plain(d.body, scope, s.Purity.RESOURCE)
            elif isinstance(d, s.FunctionDecl):
                scope = Scope({p.name: p.type for p in d.params})
                self.check_plain(d.requires, scope, s.Purity.HEAP)
                self.check_plain(d.body, scope, s.Purity.HEAP)
                self.check_plain(d.ensures, scope.child(result=d.ret), s.Purity.HEAP)
            elif isinstance(d, s.Choreography):
                self.check_choreography(d)
        return self.diags

    # -- names -----------------------------------------------------------

    def check_names(self) -> None:
        chors = [d for d in self.p.decls if isinstance(d, s.Choreography)]
        if not chors:
            self.report(Rule.MISSING_CHOREOGRAPHY, "program declares no choreography", self.p)
        for extra in chors[1:]:
            self.report(Rule.MULTIPLE_CHOREOGRAPHIES, f"second choreography {extra.name}", extra)
        self._unique(self.p.decls, "declaration")
        for d in self.p.decls:
            if isinstance(d, s.ClassDecl):
                self._unique(d.fields, f"field of {d.name}")
                self._unique(d.methods, f"method of {d.name}")
            if isinstance(d, s.Choreography):
                self._unique(d.params, "parameter")
                self._unique(d.endpoints, "endpoint")
                clash = {p.name for p in d.params} & set(d.sorts)
                for name in sorted(clash):
                    self.report(Rule.DUPLICATE, f"{name} is both a parameter and an endpoint", d)

    def _unique(self, items, what: str) -> None:
        seen = set()
        for item in items:
            if item.name in seen:
                self.report(Rule.DUPLICATE, f"duplicate {what} {item.name!r}", item)
            seen.add(item.name)

    # -- classes ---------------------------------------------------------

    def check_class(self, cls: s.ClassDecl) -> None:
        this = s.TypeRef(cls.name)
        for m in ([cls.ctor] if cls.ctor else []) + list(cls.methods):
            scope = Scope({p.name: p.type for p in m.params}, this)
            self.check_plain(m.requires, scope, s.Purity.RESOURCE)
            self.check_plain(m.ensures, scope, s.Purity.RESOURCE)
            self.check_block(m.body, scope)

    def check_block(self, block: s.Block, scope: Scope) -> None:
        scope = scope.child()
        for st in block.stmts:
            self.check_stmt(st, scope)

    def check_stmt(self, st: s.Stmt, scope: Scope) -> None:
        if isinstance(st, s.Block):
            self.check_block(st, scope)
        elif isinstance(st, s.LocalDecl):
            if st.init is not None:
                self.check_plain(st.init, scope, s.Purity.HEAP)
            if st.name in scope.vars:
                self.report(Rule.BINDER_SCOPE, f"local {st.name!r} shadows an existing name", st)
            scope.vars[st.name] = st.type
        elif isinstance(st, s.Assign):
            if not isinstance(st.target, (s.Field, s.Var)):
                self.report(Rule.ASSIGNABLE, "assignment target must be a field or local", st)
            self.check_plain(st.target, scope, s.Purity.HEAP)
            self.check_plain(st.value, scope, s.Purity.HEAP)
        elif isinstance(st, s.CallStmt):
            self.check_plain(st.recv, scope, s.Purity.HEAP)
            for a in st.args:
                self.check_plain(a, scope, s.Purity.HEAP)
            self.check_method(st.recv, st.method, st.args, scope, st)
        elif isinstance(st, s.AssertStmt):
            self.check_plain(st.expr, scope, s.Purity.HEAP)
        elif isinstance(st, (s.Inhale, s.Exhale)):
            kind = "inhale" if isinstance(st, s.Inhale) else "exhale"
            self.report(Rule.INHALE_EXHALE, f"{kind} in source code is unchecked by projection", st,
                        Severity.WARNING)
            self.check_plain(st.expr, scope, s.Purity.RESOURCE)
        elif isinstance(st, s.If):
            self.check_plain(st.cond, scope, s.Purity.HEAP)
            self.check_block(st.then, scope)
            self.check_block(st.orelse, scope)
        elif isinstance(st, s.While):
            self.check_plain(st.invariant, scope, s.Purity.RESOURCE)
            self.check_plain(st.cond, scope, s.Purity.HEAP)
            self.check_block(st.body, scope)

    def check_method(self, recv: s.Expr, name: str, args, scope: Scope, node: s.Node) -> None:
        ty = type_of(self.p, recv, scope)
        cls = self.p.classes.get(ty.name) if ty is not None else None
        if cls is None:
            self.report(Rule.RESOLVE, f"cannot determine the class of the receiver of {name}()", node)
            return
        method = next((m for m in cls.methods if m.name == name), None)
        if method is None:
            self.report(Rule.RESOLVE, f"class {cls.name} has no method {name!r}", node)
        elif len(method.params) != len(args):
            self.report(Rule.RESOLVE, f"{cls.name}.{name} expects {len(method.params)} argument(s)", node)

    # -- expressions -----------------------------------------------------

    def check_plain(self, expr: s.Expr, scope: Scope, level: s.Purity, what: str = "") -> None:
        """Expression outside any choreographic context."""
        self.check_refs(expr, scope)
        for n in s.walk(expr):
            if isinstance(n, s.EndpointExpr):
                self.report(Rule.ENDPOINT_POSITION, "endpoint expression outside a choreographic condition", n)
            elif isinstance(n, s.ChorExpr):
                self.report(Rule.CHOR_POSITION, "\\chor is only allowed in choreographic assertions", n)
            elif isinstance(n, (s.Msg, s.Sender, s.Receiver)) and not scope.placeholders:
                self.report(Rule.PLACEHOLDER, "channel placeholder outside a channel invariant", n)
        self.check_purity(expr, level, what)

    def check_purity(self, expr: s.Expr, level: s.Purity, what: str = "") -> None:
        found = s.purity(expr, self.heap_functions)
        if found > level:
            names = {s.Purity.PURE: "pure", s.Purity.HEAP: "heap", s.Purity.RESOURCE: "resource"}
            where = f" in {what}" if what else ""
            self.report(Rule.PURITY, f"{names[found]} expression where a {names[level]} one is required{where}", expr)

    def check_refs(self, expr: s.Expr, scope: Scope) -> None:
        if isinstance(expr, s.Var):
            if expr.name not in scope.vars:
                self.report(Rule.BINDER_SCOPE, f"unbound name {expr.name!r}", expr)
            return
        if isinstance(expr, s.This):
            if scope.this is None:
                self.report(Rule.BINDER_SCOPE, "'this' outside a method", expr)
            return
        if isinstance(expr, s.Forall):
            self.check_refs(expr.lo, scope)
            self.check_refs(expr.hi, scope)
            self.fresh(expr.var, scope, expr)
            self.check_refs(expr.body, scope.child(**{expr.var: s.INT}))
            return
        if isinstance(expr, s.EndpointExpr):
            inner = self.target(expr.target, scope)
            self.check_refs(expr.body, inner)
            return
        if isinstance(expr, s.Field):
            ty = type_of(self.p, expr.obj, scope)
            cls = self.p.classes.get(ty.name) if ty is not None else None
            if cls is not None and cls.field_type(expr.name) is None:
                self.report(Rule.RESOLVE, f"class {cls.name} has no field {expr.name!r}", expr)
        if isinstance(expr, s.FnCall):
            fn = self.p.functions.get(expr.name)
            if fn is None:
                self.report(Rule.RESOLVE, f"unknown function {expr.name!r}", expr)
            elif len(fn.params) != len(expr.args):
                self.report(Rule.RESOLVE, f"{expr.name} expects {len(fn.params)} argument(s)", expr)
        if isinstance(expr, s.PredApply):
            pred = self.p.predicates.get(expr.name)
            if pred is None:
                self.report(Rule.RESOLVE, f"unknown predicate {expr.name!r}", expr)
            elif len(pred.params) != len(expr.args):
                self.report(Rule.RESOLVE, f"{expr.name} expects {len(pred.params)} argument(s)", expr)
        for child in s.children(expr):
            if isinstance(child, s.Expr):
                self.check_refs(child, scope)

    def fresh(self, var: str, scope: Scope, node: s.Node) -> None:
        if var in scope.vars:
            self.report(Rule.BINDER_SCOPE, f"binder {var!r} shadows an existing name", node)

    def target(self, t: s.Target, scope: Scope) -> Scope:
        """Check a target and return the scope its body sees."""
        name = s.sort(t)
        try:
            if self.chor is None:
                raise ResolutionError(name)
            decl = self.chor.endpoint(name)
        except ResolutionError:
            self.report(Rule.RESOLVE, f"unknown endpoint {name!r}", t)
            return scope
        if isinstance(t, s.Singular) and isinstance(decl, s.FamilyDecl):
            self.report(Rule.RESOLVE, f"family {name} must be indexed", t)
        if not isinstance(t, s.Singular) and isinstance(decl, s.EndpointDecl):
            self.report(Rule.RESOLVE, f"{name} is a singular endpoint, not a family", t)
        if isinstance(t, s.FamilyIndex):
            self.check_refs(t.index, scope)
            self.check_purity(t.index, s.Purity.PURE, "a family index")
        if isinstance(t, s.FamilyRange):
            for e in (t.lo, t.hi):
                self.check_refs(e, scope)
                self.check_purity(e, s.Purity.PURE, "a range bound")
            self.fresh(t.var, scope, t)
            return scope.child(**{t.var: s.INT})
        return scope

    # -- choreography ----------------------------------------------------

    def check_choreography(self, chor: s.Choreography) -> None:
        self.chor = chor
        params = Scope({p.name: p.type for p in chor.params})
        self.check_plain(chor.requires, params, s.Purity.PURE, "a choreography precondition")
        visible = params.child()
        for ep in chor.endpoints:
            if ep.cls not in self.p.classes:
                self.report(Rule.RESOLVE, f"unknown class {ep.cls!r}", ep)
            else:
                cls = self.p.classes[ep.cls]
                arity = len(cls.ctor.params) if cls.ctor else 0
                if arity != len(ep.args):
                    self.report(Rule.RESOLVE, f"constructor of {ep.cls} expects {arity} argument(s)", ep)
            if isinstance(ep, s.EndpointDecl):
                for a in ep.args:
                    self.check_plain(a, visible, s.Purity.HEAP)
            else:
                self.check_plain(ep.size, params, s.Purity.PURE, "a family size")
                self.fresh(ep.var, visible, ep)
                inner = visible.child(**{ep.var: s.INT})
                for a in ep.args:
                    self.check_plain(a, inner, s.Purity.PURE, "family constructor arguments")
            visible.vars.update({k: v for k, v in endpoint_types(chor).items() if k == ep.name})
        scope = params.child(**endpoint_types(chor))
        self.check_rchor(chor.ensures, scope)
        self.check_rchor(chor.run_requires, scope)
        self.check_rchor(chor.run_ensures, scope)
        self.check_chor_block(chor.body, scope)

    def check_chor_block(self, block: s.ChorBlock, scope: Scope) -> None:
        for st in block.stmts:
            self.check_chor_stmt(st, scope)

    def check_chor_stmt(self, st: s.ChorStmt, scope: Scope) -> None:
        if isinstance(st, (s.ChorIf, s.ChorWhile)):
            if isinstance(st, s.ChorWhile):
                self.check_rchor(st.invariant, scope)
            self.check_hchor(st.cond, scope)
            bodies = [st.then, st.orelse] if isinstance(st, s.ChorIf) else [st.body]
            for b in bodies:
                self.check_chor_block(b, scope)
            cond_sorts = s.target_sorts(st.cond)
            body_sorts = set().union(*(s.target_sorts(b) for b in bodies))
            for name in sorted(body_sorts - cond_sorts):
                self.report(Rule.PARTICIPATION,
                            f"{name} takes part in the body but not in the condition", st, Severity.WARNING)
        elif isinstance(st, s.ChorAssert):
            self.check_rchor(st.expr, scope)
        elif isinstance(st, s.EndpointStmt):
            inner = self.target(st.target, scope)
            if isinstance(st.inner, s.EpAssign):
                if not isinstance(st.inner.target, s.Field):
                    self.report(Rule.ASSIGNABLE, "endpoint assignment target must be a field", st.inner)
                self.check_plain(st.inner.target, inner, s.Purity.HEAP)
                self.check_plain(st.inner.value, inner, s.Purity.HEAP)
            else:
                self.check_plain(st.inner.recv, inner, s.Purity.HEAP)
                for a in st.inner.args:
                    self.check_plain(a, inner, s.Purity.HEAP)
                self.check_method(st.inner.recv, st.inner.method, st.inner.args, inner, st)
        elif isinstance(st, s.Communicate):
            sender_scope = self.target(st.sender, scope)
            receiver_scope = self.target(st.receiver, sender_scope)
            self.check_plain(st.msg, sender_scope, s.Purity.HEAP)
            if not isinstance(st.dest, s.Field):
                self.report(Rule.ASSIGNABLE, "receive location must be a field", st.dest)
            self.check_plain(st.dest, receiver_scope, s.Purity.HEAP)
            if st.invariant is not None:
                inv_scope = receiver_scope.child()
                inv_scope.placeholders = True
                self.check_plain(st.invariant, inv_scope, s.Purity.RESOURCE)

    def check_hchor(self, cond: s.Expr, scope: Scope) -> None:
        for part in s.conjuncts(cond):
            if isinstance(part, s.ChorExpr):
                self.report(Rule.CHOR_POSITION, "\\chor is not allowed in branch or loop conditions", part)
                continue
            if not isinstance(part, s.EndpointExpr):
                self.report(Rule.CHOR_CONDITION,
                            "choreographic conditions must be endpoint expressions joined by &&", part)
                self.check_plain(part, scope, s.Purity.HEAP)
                continue
            self.check_endpoint_body(part, scope, s.Purity.HEAP)

    def check_rchor(self, expr: s.Expr, scope: Scope) -> None:
        self.check_polarity(expr, True)
        self._rchor(expr, scope)

    def _rchor(self, expr: s.Expr, scope: Scope) -> None:
        for part in s.conjuncts(expr, ("&&", "**")):
            if isinstance(part, s.BinOp) and part.op == "==>":
                self.check_plain(part.left, scope, s.Purity.PURE, "a choreographic implication")
                self._rchor(part.right, scope)
            elif isinstance(part, s.EndpointExpr):
                self.check_endpoint_body(part, scope, s.Purity.RESOURCE)
            elif isinstance(part, s.ChorExpr):
                self.check_plain(part.body, scope, s.Purity.RESOURCE)
            else:
                if s.purity(part) > s.Purity.PURE:
                    self.report(Rule.CHOR_CONDITION,
                                "heap access in a choreographic assertion needs \\endpoint or \\chor", part)
                self.check_refs(part, scope)
                for n in s.walk(part):
                    if isinstance(n, s.ChorExpr):
                        self.report(Rule.CHOR_POSITION, "\\chor must be a top-level conjunct", n)
                    elif isinstance(n, (s.Msg, s.Sender, s.Receiver)):
                        self.report(Rule.PLACEHOLDER, "channel placeholder outside a channel invariant", n)

    def check_endpoint_body(self, e: s.EndpointExpr, scope: Scope, level: s.Purity) -> None:
        inner = self.target(e.target, scope)
        for n in s.walk(e.body):
            if isinstance(n, s.EndpointExpr):
                self.report(Rule.ENDPOINT_POSITION, "nested endpoint expression", n)
        self.check_plain_no_endpoint(e.body, inner, level)

    def check_plain_no_endpoint(self, expr: s.Expr, scope: Scope, level: s.Purity) -> None:
        self.check_refs(expr, scope)
        for n in s.walk(expr):
            if isinstance(n, s.ChorExpr):
                self.report(Rule.CHOR_POSITION, "\\chor inside an endpoint expression", n)
            elif isinstance(n, (s.Msg, s.Sender, s.Receiver)):
                self.report(Rule.PLACEHOLDER, "channel placeholder outside a channel invariant", n)
        self.check_purity(expr, level)

    def check_polarity(self, expr: s.Expr, positive: bool) -> None:
        if isinstance(expr, s.EndpointExpr):
            if not positive:
                self.report(Rule.ENDPOINT_POSITIVE, "endpoint expression in a negative position", expr)
            return
        if isinstance(expr, s.BinOp) and expr.op in ("&&", "**"):
            self.check_polarity(expr.left, positive)
            self.check_polarity(expr.right, positive)
            return
        if isinstance(expr, s.BinOp) and expr.op == "==>":
            self.check_polarity(expr.left, False)
            self.check_polarity(expr.right, positive)
            return
        for child in s.children(expr):
            if isinstance(child, s.Expr):
                self.check_polarity(child, False)
