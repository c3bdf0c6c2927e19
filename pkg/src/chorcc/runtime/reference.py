"""Reference semantics: global-view execution of a choreography."""

from __future__ import annotations

from .. import syntax as s
from .machine import Env, Machine, _bool, _int, site_of
from .report import Kind
from .values import Heap, Value


class ChorMachine(Machine):
    """Executes the choreography as one sequential program; communications are copies."""

    def __init__(self, program: s.Program, params: dict[str, Value], **kw):
        self.chor = program.choreography
        super().__init__(program, params, self.chor.params, **kw)

    def run(self) -> Heap:
        chor = self.chor
        self.setup(chor)
        site = site_of(chor)
        self.check(Kind.CONTRACT, _bool(self.eval(chor.run_requires, {}), "requires"), site, "run precondition")
        self.block(chor.body, {})
        for post in (chor.run_ensures, chor.ensures):
            self.check(Kind.CONTRACT, _bool(self.eval(post, {}), "ensures"), site, "postcondition")
        return self.heap

    def block(self, b: s.ChorBlock, env: Env) -> None:
        for st in b.stmts:
            self.stmt(st, env)

    def indices(self, t: s.FamilyRange, env: Env) -> range:
        return range(_int(self.eval(t.lo, env), "range bound"), _int(self.eval(t.hi, env), "range bound"))

    def stmt(self, st: s.ChorStmt, env: Env) -> None:
        site = site_of(st)
        if isinstance(st, s.EndpointStmt):
            if isinstance(st.target, s.FamilyRange):
                for k in self.indices(st.target, env):
                    self.local(st.inner, {**env, st.target.var: k}, site)
            else:
                self.owner(st.target, env)
                self.local(st.inner, env, site)
        elif isinstance(st, s.Communicate):
            if isinstance(st.sender, s.FamilyRange):
                for k in self.indices(st.sender, env):
                    inner = {**env, st.sender.var: k}
                    self.assign(st.dest, self.eval(st.msg, inner), inner, site)
            else:
                self.assign(st.dest, self.eval(st.msg, env), env, site)
        elif isinstance(st, s.ChorIf):
            if _bool(self.eval(st.cond, env), "condition"):
                self.block(st.then, env)
            else:
                self.block(st.orelse, env)
        elif isinstance(st, s.ChorWhile):
            while True:
                self.burn()
                self.check(Kind.INVARIANT, _bool(self.eval(st.invariant, env), "invariant"), site, "loop invariant")
                if not _bool(self.eval(st.cond, env), "condition"):
                    break
                self.block(st.body, env)
        elif isinstance(st, s.ChorAssert):
            self.check(Kind.ASSERT, _bool(self.eval(st.expr, env), "assert"), site, "assertion")
        else:
            raise TypeError(f"unknown statement {type(st).__name__}")

    def local(self, inner: s.Node, env: Env, site: str) -> None:
        if isinstance(inner, s.EpAssign):
            self.assign(inner.target, self.eval(inner.value, env), env, site)
        else:
            self.call(self.eval(inner.recv, env), inner.method, [self.eval(a, env) for a in inner.args], site)


def run_choreography(program: s.Program, params: dict[str, Value], **kw) -> Heap:
    """Run the choreography in its global view and return the final heap."""
    return ChorMachine(program, params, **kw).run()
