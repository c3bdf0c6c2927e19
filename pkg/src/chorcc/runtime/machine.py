"""Shared evaluator for expressions and method bodies.

Subclasses specialize heap access, ``Perm`` and confinement through the
``read``/``write``/``perm``/``confine``/``check`` hooks.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Any, Callable

from .. import syntax as s
from .report import Kind
from .values import Heap, Owner, Ref, RuntimeFault, Value, default_value, show

Env = dict[str, Any]

DEFAULT_FUEL = 2_000_000


class FuelExhausted(RuntimeFault):
    pass


def site_of(node: s.Node | None) -> str:
    return str(node.loc) if node is not None and node.loc is not None else ""


def _int(v: Value, what: str) -> int:
    if type(v) is not int:
        raise RuntimeFault(f"{what}: expected an integer, got {show(v)}")
    return v


def _bool(v: Value, what: str) -> bool:
    if type(v) is not bool:
        raise RuntimeFault(f"{what}: expected a boolean, got {show(v)}")
    return v


def _div(a: int, b: int) -> int:
    if b == 0:
        raise RuntimeFault("division by zero")
    q = abs(a) // abs(b)
    return q if (a < 0) == (b < 0) else -q


_ARITH: dict[str, Callable[[int, int], int]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": _div,
    "%": lambda a, b: a - b * _div(a, b),
}

_ORDER: dict[str, Callable[[Any, Any], bool]] = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


class Machine:
    """Sequential interpreter over a heap of owner-tagged objects."""

    def __init__(self, program: s.Program, params: dict[str, Value],
                 declared: tuple[s.Param, ...] = (), fuel: int = DEFAULT_FUEL):
        self.program = program
        self.heap = Heap()
        missing = [p.name for p in declared if p.name not in params]
        if missing:
            raise RuntimeFault(f"missing value for parameter(s) {', '.join(missing)}")
        self.globals: Env = dict(params)
        self.fuel = fuel

    # -- hooks ---------------------------------------------------------------

    def read(self, ref: Value, name: str, site: str) -> Value:
        obj = self.heap.get(ref)
        if name not in obj.fields:
            raise RuntimeFault(f"{obj.cls} has no field {name}")
        return obj.fields[name]

    def write(self, ref: Value, name: str, value: Value, site: str) -> None:
        obj = self.heap.get(ref)
        if name not in obj.fields:
            raise RuntimeFault(f"{obj.cls} has no field {name}")
        obj.fields[name] = value

    def perm(self, ref: Value, name: str, amount: Fraction, site: str) -> bool:
        return True

    def confine(self, owner: Owner, thunk: Callable[[], Any], site: str) -> Any:
        return thunk()

    def check(self, kind: Kind, ok: bool, site: str, message: str) -> None:
        if not ok:
            raise RuntimeFault(f"{kind.value} failed at {site or '?'}: {message}")

    def on_new(self, ref: Ref) -> None:
        pass

    def burn(self) -> None:
        self.fuel -= 1
        if self.fuel < 0:
            raise FuelExhausted("step limit exceeded; the program may not terminate")

    # -- construction --------------------------------------------------------

    def construct(self, cls_name: str, args: list[Value], owner: Owner, site: str) -> Ref:
        cls = self.program.cls(cls_name)
        ref = self.heap.new(cls, owner)
        self.on_new(ref)
        if cls.ctor is not None:
            self.run_method(ref, cls.ctor, args, site)
        elif args:
            raise RuntimeFault(f"{cls_name} takes no constructor arguments")
        return ref

    def new_endpoint(self, name: str, cls: str, args: tuple[s.Expr, ...], env: Env, site: str) -> None:
        values = [self.eval(a, env) for a in args]
        self.globals[name] = self.construct(cls, values, (name, 0), site)

    def new_family(self, name: str, var: str, size: s.Expr, cls: str,
                   args: tuple[s.Expr, ...], env: Env, site: str) -> None:
        n = _int(self.eval(size, env), f"size of {name}")
        if n < 0:
            raise RuntimeFault(f"family {name} has negative size {n}")
        refs = []
        for k in range(n):
            inner = {**env, var: k}
            values = [self.eval(a, inner) for a in args]
            refs.append(self.construct(cls, values, (name, k), site))
        self.globals[name] = tuple(refs)

    def setup(self, chor: s.Choreography) -> None:
        self.check(Kind.CONTRACT, _bool(self.eval(chor.requires, {}), "requires"), site_of(chor),
                   "choreography precondition")
        for ep in chor.endpoints:
            if isinstance(ep, s.EndpointDecl):
                self.new_endpoint(ep.name, ep.cls, ep.args, {}, site_of(ep))
            else:
                self.new_family(ep.name, ep.var, ep.size, ep.cls, ep.args, {}, site_of(ep))

    def owner(self, target: s.Target, env: Env) -> Owner:
        if isinstance(target, s.Singular):
            return (target.name, 0)
        if isinstance(target, s.FamilyIndex):
            k = _int(self.eval(target.index, env), "family index")
            family = self.lookup(target.family, env)
            if not isinstance(family, tuple) or not 0 <= k < len(family):
                raise RuntimeFault(f"index {k} is out of range for family {target.family}")
            return (target.family, k)
        raise RuntimeFault("a family range does not name a single owner")

    # -- methods -------------------------------------------------------------

    def call(self, recv: Value, name: str, args: list[Value], site: str, strat: bool = False) -> None:
        obj = self.heap.get(recv)
        method = self.program.cls(obj.cls).method(name)
        self.run_method(recv, method, args, site)

    def run_method(self, this: Ref, method: s.MethodDecl, args: list[Value], site: str) -> None:
        if len(args) != len(method.params):
            raise RuntimeFault(f"{method.name} expects {len(method.params)} argument(s), got {len(args)}")
        env: Env = {"this": this, **{p.name: a for p, a in zip(method.params, args)}}
        if method.requires != s.TRUE:
            self.check(Kind.CONTRACT, _bool(self.eval(method.requires, env), "requires"), site,
                       f"precondition of {method.name}")
        self.exec(method.body, env)
        if method.ensures != s.TRUE:
            self.check(Kind.CONTRACT, _bool(self.eval(method.ensures, env), "ensures"), site,
                       f"postcondition of {method.name}")

    # -- statements ----------------------------------------------------------

    def assign(self, target: s.Expr, value: Value, env: Env, site: str) -> None:
        if isinstance(target, s.Var):
            env[target.name] = value
        elif isinstance(target, s.Field):
            self.write(self.eval(target.obj, env), target.name, value, site)
        else:
            raise RuntimeFault(f"cannot assign to {type(target).__name__}")

    def exec(self, st: s.Stmt, env: Env) -> None:
        site = site_of(st)
        if isinstance(st, s.Block):
            for x in st.stmts:
                self.exec(x, env)
        elif isinstance(st, s.Assign):
            self.assign(st.target, self.eval(st.value, env), env, site)
        elif isinstance(st, s.LocalDecl):
            env[st.name] = self.eval(st.init, env) if st.init is not None else default_value(st.type)
        elif isinstance(st, s.CallStmt):
            self.call(self.eval(st.recv, env), st.method, [self.eval(a, env) for a in st.args], site)
        elif isinstance(st, s.AssertStmt):
            self.check(Kind.ASSERT, _bool(self.eval(st.expr, env), "assert"), site, "assertion")
        elif isinstance(st, s.Exhale):
            self.check(Kind.EXHALE, _bool(self.eval(st.expr, env), "exhale"), site, "exhaled assertion")
        elif isinstance(st, s.Inhale):
            pass
        elif isinstance(st, s.If):
            if _bool(self.eval(st.cond, env), "condition"):
                self.exec(st.then, env)
            else:
                self.exec(st.orelse, env)
        elif isinstance(st, s.While):
            while True:
                self.burn()
                if st.invariant != s.TRUE:
                    self.check(Kind.INVARIANT, _bool(self.eval(st.invariant, env), "invariant"), site,
                               "loop invariant")
                if not _bool(self.eval(st.cond, env), "condition"):
                    break
                self.exec(st.body, env)
        else:
            raise RuntimeFault(f"cannot execute {type(st).__name__}")

    # -- expressions ---------------------------------------------------------

    def lookup(self, name: str, env: Env) -> Value:
        if name in env:
            return env[name]
        if name in self.globals:
            return self.globals[name]
        raise RuntimeFault(f"unbound variable {name}")

    def eval(self, e: s.Expr, env: Env) -> Value:
        if isinstance(e, s.Var):
            return self.lookup(e.name, env)
        if isinstance(e, (s.IntLit, s.BoolLit)):
            return e.value
        if isinstance(e, s.FracLit):
            return Fraction(e.num, e.den)
        if isinstance(e, s.This):
            return self.lookup("this", env)
        if isinstance(e, s.Field):
            return self.read(self.eval(e.obj, env), e.name, site_of(e))
        if isinstance(e, s.Index):
            seq = self.eval(e.seq, env)
            k = _int(self.eval(e.index, env), "index")
            if not isinstance(seq, tuple):
                raise RuntimeFault(f"cannot index {show(seq)}")
            if not 0 <= k < len(seq):
                raise RuntimeFault(f"index {k} out of range [0, {len(seq)})")
            return seq[k]
        if isinstance(e, s.BinOp):
            return self.binop(e, env)
        if isinstance(e, s.UnOp):
            v = self.eval(e.operand, env)
            if e.op == "!":
                return not _bool(v, "!")
            return -_int(v, "-")
        if isinstance(e, s.FnCall):
            fn = self.program.functions.get(e.name)
            if fn is None:
                raise RuntimeFault(f"unknown function {e.name}")
            args = {p.name: self.eval(a, env) for p, a in zip(fn.params, e.args)}
            return self.eval(fn.body, args)
        if isinstance(e, s.PredApply):
            pred = self.program.predicates.get(e.name)
            if pred is None:
                raise RuntimeFault(f"unknown predicate {e.name}")
            return self.eval(pred.body, {p.name: self.eval(a, env) for p, a in zip(pred.params, e.args)})
        if isinstance(e, s.SeqLit):
            return tuple(self.eval(x, env) for x in e.items)
        if isinstance(e, s.Perm):
            if not isinstance(e.location, s.Field):
                raise RuntimeFault("Perm expects a field location")
            ref = self.eval(e.location.obj, env)
            return self.perm(ref, e.location.name, self.amount(e.amount, env), site_of(e))
        if isinstance(e, s.Forall):
            lo = _int(self.eval(e.lo, env), "forall bound")
            hi = _int(self.eval(e.hi, env), "forall bound")
            return all(_bool(self.eval(e.body, {**env, e.var: k}), "forall body") for k in range(lo, hi))
        if isinstance(e, s.Confined):
            owner = self.owner(e.target, env)
            return self.confine(owner, lambda: self.eval(e.body, env), site_of(e))
        if isinstance(e, s.EndpointExpr):
            t = e.target
            if isinstance(t, s.FamilyRange):
                lo = _int(self.eval(t.lo, env), "range bound")
                hi = _int(self.eval(t.hi, env), "range bound")
                return all(_bool(self.eval(e.body, {**env, t.var: k}), "endpoint expression")
                           for k in range(lo, hi))
            return self.eval(e.body, env)
        if isinstance(e, s.ChorExpr):
            return self.eval(e.body, env)
        raise RuntimeFault(f"cannot evaluate {type(e).__name__}")

    def amount(self, e: s.Expr, env: Env) -> Fraction:
        v = self.eval(e, env)
        if type(v) is int or isinstance(v, Fraction):
            amt = Fraction(v)
            if 0 < amt <= 1:
                return amt
        raise RuntimeFault(f"permission amount must lie in (0, 1], got {show(v)}")

    def binop(self, e: s.BinOp, env: Env) -> Value:
        op = e.op
        if op in ("&&", "**"):
            return _bool(self.eval(e.left, env), op) and _bool(self.eval(e.right, env), op)
        if op == "||":
            return _bool(self.eval(e.left, env), op) or _bool(self.eval(e.right, env), op)
        if op == "==>":
            return (not _bool(self.eval(e.left, env), op)) or _bool(self.eval(e.right, env), op)
        a = self.eval(e.left, env)
        b = self.eval(e.right, env)
        if op == "==":
            return type(a) is type(b) and a == b
        if op == "!=":
            return not (type(a) is type(b) and a == b)
        if op in _ORDER:
            return _ORDER[op](_int(a, op), _int(b, op))
        if op == "+" and isinstance(a, tuple) and isinstance(b, tuple):
            return a + b
        return _ARITH[op](_int(a, op), _int(b, op))
