"""Dynamic checker for verification programs.

Every emitted check is evaluated: asserts, contracts, confinement of heap
access, permission transfer along channels and disjointness of par blocks.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable

from .. import syntax as s
from ..vir import (VAssert, VAssign, VBlock, VCall, VConfined, VerificationProgram, VExhale, VIf,
                   VInhale, VNewEndpoint, VNewFamily, VPar, VStmt, VWhile)
from .machine import Env, Machine, _bool, _int, site_of
from .report import CHECK_KINDS, Failure, Kind, RunReport
from .values import Owner, Ref, RuntimeFault, Value

Location = tuple[int, str]


@dataclass
class Scope:
    owner: Owner
    site: str = ""
    flagged: bool = False
    denied: set = field(default_factory=set)


@dataclass
class Footprint:
    reads: set = field(default_factory=set)
    writes: set = field(default_factory=set)


class IRMachine(Machine):
    def __init__(self, v: VerificationProgram, params: dict[str, Value], **kw):
        super().__init__(v.program, params, v.params, **kw)
        self.v = v
        self.report = RunReport("ir")
        self.ledger: dict[Location, dict[Owner, Fraction]] = {}
        self.inflight: dict[str, dict[Location, Fraction]] = defaultdict(lambda: defaultdict(Fraction))
        self.scope: Scope | None = None
        self.footprints: list[Footprint] = []

    # -- reporting -----------------------------------------------------------

    def fail(self, kind: Kind, site: str, message: str) -> None:
        self.report.failures.append(Failure(kind, site, message))

    def check(self, kind: Kind, ok: bool, site: str, message: str) -> None:
        if ok:
            self.report.passed[kind] += 1
        else:
            self.fail(kind, site, message)

    def show_owner(self, owner: Owner) -> str:
        family = isinstance(self.globals.get(owner[0]), tuple)
        return f"{owner[0]}[{owner[1]}]" if family else owner[0]

    # -- heap hooks ----------------------------------------------------------

    def on_new(self, ref: Ref) -> None:
        obj = self.heap.get(ref)
        for name in obj.fields:
            self.ledger[(ref.oid, name)] = {obj.owner: Fraction(1)}

    def _access(self, ref: Value, name: str, write: bool, site: str) -> None:
        obj = self.heap.get(ref)
        loc = (ref.oid, name)
        for fp in self.footprints:
            (fp.writes if write else fp.reads).add(loc)
        scope = self.scope
        if scope is None:
            return
        site = site or scope.site
        if obj.owner != scope.owner:
            if not scope.flagged:
                scope.flagged = True
                verb = "writes" if write else "reads"
                self.fail(Kind.CONFINEMENT, site,
                          f"code confined to {self.show_owner(scope.owner)} {verb} {obj.cls}.{name} "
                          f"owned by {self.show_owner(obj.owner)}")
            return
        held = self.ledger.get(loc, {}).get(scope.owner, Fraction(0))
        if (held < 1 if write else held <= 0) and (loc, write) not in scope.denied:
            scope.denied.add((loc, write))
            need = "write (full)" if write else "read"
            self.fail(Kind.PERMISSION, site, f"{self.show_owner(scope.owner)} lacks {need} permission "
                                             f"for {obj.cls}.{name} (holds {held})")

    def read(self, ref: Value, name: str, site: str) -> Value:
        value = super().read(ref, name, site)
        self._access(ref, name, False, site)
        return value

    def write(self, ref: Value, name: str, value: Value, site: str) -> None:
        super().write(ref, name, value, site)
        self._access(ref, name, True, site)

    def perm(self, ref: Value, name: str, amount: Fraction, site: str) -> bool:
        obj = self.heap.get(ref)
        holder = self.scope.owner if self.scope is not None else obj.owner
        return self.ledger.get((ref.oid, name), {}).get(holder, Fraction(0)) >= amount

    def confine(self, owner: Owner, thunk: Callable[[], Any], site: str) -> Any:
        outer = self.scope
        if outer is not None:
            if outer.owner != owner and not outer.flagged:
                outer.flagged = True
                self.fail(Kind.CONFINEMENT, site, f"code confined to {self.show_owner(outer.owner)} "
                                                  f"enters the memory of {self.show_owner(owner)}")
            return thunk()
        self.scope = Scope(owner, site)
        try:
            return thunk()
        finally:
            self.scope = outer

    def call(self, recv: Value, name: str, args: list[Value], site: str, strat: bool = False) -> None:
        if not strat:
            return super().call(recv, name, args, site)
        owner = self.heap.get(recv).owner
        self.confine(owner, lambda: super(IRMachine, self).call(recv, name, args, site), site)

    # -- permission transfer -------------------------------------------------

    def _resource_parts(self, expr: s.Expr, env: Env) -> list[s.Expr]:
        out = []
        for part in s.conjuncts(expr, ("&&", "**")):
            if isinstance(part, s.BinOp) and part.op == "==>" and s.purity(part.left) < s.Purity.RESOURCE:
                if _bool(self.eval(part.left, env), "==>"):
                    out += self._resource_parts(part.right, env)
            else:
                out.append(part)
        return out

    def _perm_location(self, p: s.Perm, env: Env) -> tuple[Location, Fraction]:
        if not isinstance(p.location, s.Field):
            raise RuntimeFault("Perm expects a field location")
        ref = self.eval(p.location.obj, env)
        if not isinstance(ref, Ref):
            raise RuntimeFault("Perm location must be an object field")
        return (ref.oid, p.location.name), self.amount(p.amount, env)

    def exhale(self, st: VExhale, env: Env) -> None:
        site = st.site or site_of(st)
        owner = self.owner(st.owner, env)

        def body() -> None:
            for part in self._resource_parts(st.expr, env):
                if isinstance(part, s.Perm):
                    loc, amt = self._perm_location(part, env)
                    holdings = self.ledger.setdefault(loc, {})
                    held = holdings.get(owner, Fraction(0))
                    if held < amt:
                        self.fail(Kind.PERMISSION, site, f"{self.show_owner(owner)} exhales {amt} of a "
                                                         f"permission it holds only {held} of")
                        continue
                    holdings[owner] = held - amt
                    self.inflight[site][loc] += amt
                else:
                    self.check(Kind.EXHALE, _bool(self.eval(part, env), "exhale"), site,
                               "channel invariant does not hold for the sent value")

        self.confine(owner, body, site)
        self.conservation(site)

    def inhale(self, st: VInhale, env: Env) -> None:
        site = st.site or site_of(st)
        owner = self.owner(st.owner, env)
        for part in self._resource_parts(st.expr, env):
            if not isinstance(part, s.Perm):
                continue
            loc, amt = self._perm_location(part, env)
            pool = self.inflight[site]
            if pool[loc] < amt:
                self.fail(Kind.PERMISSION, site, f"{self.show_owner(owner)} inhales {amt} of a permission "
                                                 f"that is not in flight")
                continue
            pool[loc] -= amt
            holdings = self.ledger.setdefault(loc, {})
            holdings[owner] = holdings.get(owner, Fraction(0)) + amt
        self.conservation(site)

    def conservation(self, site: str) -> None:
        self.report.conservation_checks += 1
        for loc, holdings in self.ledger.items():
            total = sum(holdings.values(), Fraction(0))
            total += sum((pool.get(loc, Fraction(0)) for pool in self.inflight.values()), Fraction(0))
            if total != 1 or any(v < 0 for v in holdings.values()):
                self.fail(Kind.CONSERVATION, site, f"permissions for object {loc[0]} field {loc[1]} "
                                                   f"total {total}")

    # -- statements ----------------------------------------------------------

    def run(self) -> RunReport:
        env: Env = {}
        for st in self.v.setup:
            self.vexec(st, env)
        self.vexec(self.v.body, env)
        self.report.heap = self.heap.snapshot()
        return self.report

    def vexec(self, st: VStmt, env: Env) -> None:
        site = site_of(st)
        if isinstance(st, VBlock):
            for x in st.stmts:
                self.vexec(x, env)
        elif isinstance(st, VAssign):
            self.assign(st.target, self.eval(st.value, env), env, site)
        elif isinstance(st, VAssert):
            kind = CHECK_KINDS[st.check]
            self.check(kind, _bool(self.eval(st.expr, env), st.check), st.site or site, f"{st.check} check")
        elif isinstance(st, VExhale):
            self.exhale(st, env)
        elif isinstance(st, VInhale):
            self.inhale(st, env)
        elif isinstance(st, VIf):
            self.vexec(st.then if _bool(self.eval(st.cond, env), "condition") else st.orelse, env)
        elif isinstance(st, VWhile):
            while True:
                self.burn()
                self.check(Kind.INVARIANT, _bool(self.eval(st.invariant, env), "invariant"),
                           st.site or site, "loop invariant")
                if not _bool(self.eval(st.cond, env), "condition"):
                    break
                self.vexec(st.body, env)
        elif isinstance(st, VCall):
            recv = self.eval(st.recv, env)
            self.call(recv, st.method, [self.eval(a, env) for a in st.args], site, strat=st.strat)
        elif isinstance(st, VConfined):
            owner = self.owner(st.target, env)
            self.confine(owner, lambda: self.vexec(st.body, env), st.site or site)
        elif isinstance(st, VPar):
            self.par(st, env)
        elif isinstance(st, VNewEndpoint):
            self.new_endpoint(st.name, st.cls, st.args, env, site)
        elif isinstance(st, VNewFamily):
            self.new_family(st.name, st.var, st.size, st.cls, st.args, env, site)
        else:
            raise RuntimeFault(f"cannot execute {type(st).__name__}")

    def par(self, st: VPar, env: Env) -> None:
        site = st.site or site_of(st)
        lo = _int(self.eval(st.lo, env), "par bound")
        hi = _int(self.eval(st.hi, env), "par bound")
        prints: list[tuple[int, Footprint]] = []
        for k in range(lo, hi):
            inner = {**env, st.var: k}
            self.check(Kind.CONTRACT, _bool(self.eval(st.requires, inner), "requires"), site,
                       f"par precondition for {st.var} = {k}")
            fp = Footprint()
            self.footprints.append(fp)
            try:
                self.vexec(st.body, inner)
            finally:
                self.footprints.remove(fp)
            self.check(Kind.CONTRACT, _bool(self.eval(st.ensures, inner), "ensures"), site,
                       f"par postcondition for {st.var} = {k}")
            prints.append((k, fp))
        ok = True
        for a in range(len(prints)):
            for b in range(a + 1, len(prints)):
                (ka, fa), (kb, fb) = prints[a], prints[b]
                clash = (fa.writes & (fb.writes | fb.reads)) | (fb.writes & fa.reads)
                if clash:
                    ok = False
                    oid, name = min(clash)
                    self.fail(Kind.PAR_DISJOINTNESS, site, f"iterations {st.var} = {ka} and {kb} both "
                                                           f"touch object {oid} field {name}")
        if ok:
            self.report.passed[Kind.PAR_DISJOINTNESS] += 1


def run_verification_ir(v: VerificationProgram, params: dict[str, Value], **kw) -> RunReport:
    """Execute the verification program and record the outcome of every check."""
    return IRMachine(v, params, **kw).run()
