"""Recursive-descent parser for ``.chor`` source files.

Operator precedence, loosest first::

    ==>  (right associative)
    **
    ||
    &&
    == != < <= > >=  (non associative)
    + -
    * / %
    ! - (prefix)
    .field  .m(args)  [index]
"""

from __future__ import annotations

from dataclasses import dataclass

from . import syntax as s
from .diagnostics import Diagnostic, Loc, ParseError, Rule, Severity, SourceFile
from .lexer import Token, tokenize

CMP_OPS = frozenset(s.COMPARISON_OPS)


class _Error(Exception):
    def __init__(self, message: str, loc: Loc):
        super().__init__(message)
        self.message = message
        self.loc = loc


@dataclass(frozen=True)
class _MethodCall(s.Expr):
    """Method call; legal only in statement position."""

    recv: s.Expr
    method: str
    args: tuple[s.Expr, ...] = ()


def parse(src: SourceFile | str, path: str = "<string>") -> s.Program:
    """Parse a whole program; raises :class:`ParseError` with all diagnostics."""
    if isinstance(src, str):
        src = SourceFile(path, src)
    return _Parser(src).program()


def parse_expr(text: str) -> s.Expr:
    p = _Parser(SourceFile("<expr>", text))
    try:
        e = p.expr()
        p.expect_kind("eof")
    except _Error as err:
        raise ParseError([Diagnostic(Severity.ERROR, Rule.SYNTAX, err.message, err.loc)]) from None
    return e


class _Parser:
    def __init__(self, src: SourceFile):
        self.src = src
        self.tokens = tokenize(src)
        self.pos = 0
        self.diagnostics: list[Diagnostic] = []
        self.predicates = {
            self.tokens[i + 1].text
            for i, t in enumerate(self.tokens[:-1])
            if t.kind == "kw" and t.text == "resource" and self.tokens[i + 1].kind == "ident"
        }

    # -- token helpers -------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k) if k else self.tok
        return t.kind in ("kw", "op") and t.text == text

    def accept(self, text: str) -> Token | None:
        if self.at(text):
            t = self.tok
            self.pos += 1
            return t
        return None

    def expect(self, text: str) -> Token:
        t = self.accept(text)
        if t is None:
            raise _Error(f"expected {text!r}, found {self.describe(self.tok)}", self.tok.loc)
        return t

    def expect_kind(self, kind: str) -> Token:
        if self.tok.kind != kind:
            raise _Error(f"expected {kind}, found {self.describe(self.tok)}", self.tok.loc)
        t = self.tok
        self.pos += 1
        return t

    def ident(self) -> str:
        return self.expect_kind("ident").text

    @staticmethod
    def describe(t: Token) -> str:
        return "end of file" if t.kind == "eof" else repr(t.text)

    def error(self, err: _Error) -> None:
        self.diagnostics.append(Diagnostic(Severity.ERROR, Rule.SYNTAX, err.message, err.loc))

    def recover(self) -> None:
        """Skip to just after the next ``;`` or to the next ``}``."""
        depth = 0
        while self.tok.kind != "eof":
            if self.at("{"):
                depth += 1
            elif self.at("}"):
                if depth == 0:
                    return
                depth -= 1
            elif self.at(";") and depth == 0:
                self.pos += 1
                return
            self.pos += 1

    # -- declarations --------------------------------------------------------

    def program(self) -> s.Program:
        pragmas = []
        decls = []
        start = self.tok.loc
        while self.tok.kind != "eof":
            if self.tok.kind == "pragma":
                pragmas.append(self.tok.text)
                self.pos += 1
                continue
            before = self.pos
            try:
                decls.append(self.decl())
            except _Error as err:
                self.error(err)
                self.recover()
                if self.at("}"):
                    self.pos += 1
                if self.pos == before:
                    self.pos += 1
        if not any(isinstance(d, s.Choreography) for d in decls) and not self.diagnostics:
            self.diagnostics.append(Diagnostic(
                Severity.ERROR, Rule.MISSING_CHOREOGRAPHY, "program declares no choreography", start))
        if self.diagnostics:
            raise ParseError(self.diagnostics)
        return s.Program(tuple(decls), tuple(pragmas), loc=start)

    def contract(self) -> tuple[s.Expr, s.Expr]:
        requires: list[s.Expr] = []
        ensures: list[s.Expr] = []
        while True:
            if self.accept("requires"):
                requires.append(self.expr())
                self.expect(";")
            elif self.accept("ensures"):
                ensures.append(self.expr())
                self.expect(";")
            else:
                break
        return _join(requires), _join(ensures)

    def decl(self) -> s.Decl:
        loc = self.tok.loc
        if self.accept("class"):
            return self.class_decl(loc)
        if self.accept("resource"):
            name = self.ident()
            params = self.params()
            self.expect("=")
            body = self.expr()
            self.expect(";")
            return s.PredicateDecl(name, params, body, loc=loc)
        requires, ensures = self.contract()
        if self.accept("pure"):
            ret = self.type_ref()
            name = self.ident()
            params = self.params()
            self.expect("=")
            body = self.expr()
            self.expect(";")
            return s.FunctionDecl(name, ret, params, requires, ensures, body, loc=loc)
        if self.accept("choreography"):
            return self.choreography(requires, ensures, loc)
        raise _Error(f"expected a declaration, found {self.describe(self.tok)}", self.tok.loc)

    def class_decl(self, loc: Loc) -> s.ClassDecl:
        name = self.ident()
        self.expect("{")
        fields, methods, ctor = [], [], None
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise _Error("unterminated class", self.tok.loc)
            mloc = self.tok.loc
            try:
                requires, ensures = self.contract()
                if self.tok.kind == "ident" and self.tok.text == name and self.at("(", 1):
                    self.pos += 1
                    params = self.params()
                    body = self.block()
                    if ctor is not None:
                        raise _Error(f"class {name} declares more than one constructor", mloc)
                    ctor = s.MethodDecl(name, s.TypeRef("void"), params, requires, ensures, body, loc=mloc)
                    continue
                ty = self.type_ref()
                member = self.ident()
                if self.accept(";"):
                    fields.append(s.FieldDecl(ty, member, loc=mloc))
                    continue
                params = self.params()
                body = self.block()
                methods.append(s.MethodDecl(member, ty, params, requires, ensures, body, loc=mloc))
            except _Error as err:
                self.error(err)
                self.recover()
        self.expect("}")
        return s.ClassDecl(name, tuple(fields), tuple(methods), ctor, loc=loc)

    def params(self) -> tuple[s.Param, ...]:
        self.expect("(")
        out = []
        if not self.at(")"):
            while True:
                ploc = self.tok.loc
                ty = self.type_ref()
                out.append(s.Param(ty, self.ident(), loc=ploc))
                if not self.accept(","):
                    break
        self.expect(")")
        return tuple(out)

    def type_ref(self) -> s.TypeRef:
        loc = self.tok.loc
        name = self.ident()
        if name == "seq":
            self.expect("<")
            elem = self.type_ref()
            self.expect(">")
            return s.TypeRef("seq", (elem,), loc=loc)
        return s.TypeRef(name, loc=loc)

    def choreography(self, requires: s.Expr, ensures: s.Expr, loc: Loc) -> s.Choreography:
        name = self.ident()
        params = self.params()
        self.expect("{")
        endpoints: list = []
        run = None
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise _Error("unterminated choreography", self.tok.loc)
            dloc = self.tok.loc
            try:
                if self.accept("endpoint"):
                    endpoints.append(self.endpoint_decl(dloc))
                    continue
                run_requires, run_ensures = self.contract()
                self.expect("run")
                if run is not None:
                    raise _Error("choreography declares more than one run block", dloc)
                run = (run_requires, run_ensures, self.chor_block())
            except _Error as err:
                self.error(err)
                self.recover()
        self.expect("}")
        if run is None:
            raise _Error(f"choreography {name} has no run block", loc)
        return s.Choreography(name, params, requires, ensures, tuple(endpoints), *run, loc=loc)

    def endpoint_decl(self, loc: Loc) -> s.EndpointDecl | s.FamilyDecl:
        name = self.ident()
        if self.accept("["):
            var = self.ident()
            self.expect(":=")
            zero = self.tok
            lo = self.expr()
            if lo != s.IntLit(0):
                raise _Error("endpoint families are indexed from 0", zero.loc)
            self.expect("..")
            size = self.expr()
            self.expect("]")
            self.expect("=")
            cls = self.ident()
            args = self.args()
            self.expect(";")
            return s.FamilyDecl(name, var, size, cls, args, loc=loc)
        self.expect("=")
        cls = self.ident()
        args = self.args()
        self.expect(";")
        return s.EndpointDecl(name, cls, args, loc=loc)

    # -- choreographic statements -------------------------------------------

    def chor_block(self) -> s.ChorBlock:
        loc = self.expect("{").loc
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise _Error("unterminated block", self.tok.loc)
            try:
                stmts.append(self.chor_stmt())
            except _Error as err:
                self.error(err)
                self.recover()
        self.expect("}")
        return s.ChorBlock(tuple(stmts), loc=loc)

    def chor_stmt(self) -> s.ChorStmt:
        loc = self.tok.loc
        if self.accept("if"):
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            then = self.chor_block()
            orelse = s.ChorBlock()
            if self.accept("else"):
                if self.at("if"):
                    inner_loc = self.tok.loc
                    orelse = s.ChorBlock((self.chor_stmt(),), loc=inner_loc)
                else:
                    orelse = self.chor_block()
            return s.ChorIf(cond, then, orelse, loc=loc)
        if self.accept("assert"):
            e = self.expr()
            self.expect(";")
            return s.ChorAssert(e, loc=loc)
        if self.at("loop_invariant") or self.at("while"):
            invariant = self.invariants()
            self.expect("while")
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            return s.ChorWhile(invariant, cond, self.chor_block(), loc=loc)
        if self.accept("endpoint"):
            target = self.target()
            self.expect(":")
            return s.EndpointStmt(target, self.ep_stmt(), loc=loc)
        if self.at("channel_invariant") or self.at("communicate"):
            invariant = None
            if self.accept("channel_invariant"):
                invariant = self.expr()
                self.expect(";")
            self.expect("communicate")
            sender = self.target()
            self.expect(":")
            msg = self.expr()
            self.expect("->")
            receiver = self.target()
            self.expect(":")
            dest = self.expr()
            self.expect(";")
            return s.Communicate(invariant, sender, msg, receiver, dest, loc=loc)
        raise _Error(f"expected a choreographic statement, found {self.describe(self.tok)}", loc)

    def invariants(self) -> s.Expr:
        parts = []
        while self.accept("loop_invariant"):
            parts.append(self.expr())
            self.expect(";")
        return _join(parts)

    def ep_stmt(self) -> s.EpAssign | s.EpCall:
        loc = self.tok.loc
        lhs = self.postfix(allow_call=True)
        if isinstance(lhs, _MethodCall):
            self.expect(";")
            return s.EpCall(lhs.recv, lhs.method, lhs.args, loc=loc)
        self.expect(":=")
        value = self.expr()
        self.expect(";")
        return s.EpAssign(lhs, value, loc=loc)

    def target(self) -> s.Target:
        loc = self.tok.loc
        name = self.ident()
        if not self.accept("["):
            return s.Singular(name, loc=loc)
        if self.tok.kind == "ident" and self.at(":=", 1):
            var = self.ident()
            self.expect(":=")
            lo = self.expr()
            self.expect("..")
            hi = self.expr()
            self.expect("]")
            return s.FamilyRange(name, var, lo, hi, loc=loc)
        index = self.expr()
        self.expect("]")
        return s.FamilyIndex(name, index, loc=loc)

    # -- method statements ---------------------------------------------------

    def block(self) -> s.Block:
        loc = self.expect("{").loc
        stmts = []
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise _Error("unterminated block", self.tok.loc)
            try:
                stmts.append(self.stmt())
            except _Error as err:
                self.error(err)
                self.recover()
        self.expect("}")
        return s.Block(tuple(stmts), loc=loc)

    def stmt(self) -> s.Stmt:
        loc = self.tok.loc
        if self.at("{"):
            return self.block()
        for kw, cls in (("assert", s.AssertStmt), ("inhale", s.Inhale), ("exhale", s.Exhale)):
            if self.accept(kw):
                e = self.expr()
                self.expect(";")
                return cls(e, loc=loc)
        if self.accept("if"):
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            then = self.block()
            orelse = s.Block()
            if self.accept("else"):
                if self.at("if"):
                    inner_loc = self.tok.loc
                    orelse = s.Block((self.stmt(),), loc=inner_loc)
                else:
                    orelse = self.block()
            return s.If(cond, then, orelse, loc=loc)
        if self.at("loop_invariant") or self.at("while"):
            invariant = self.invariants()
            self.expect("while")
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            return s.While(invariant, cond, self.block(), loc=loc)
        if self.tok.kind == "ident" and (
            self.peek().kind == "ident" or (self.tok.text == "seq" and self.at("<", 1))
        ):
            ty = self.type_ref()
            name = self.ident()
            init = self.expr() if self.accept("=") else None
            self.expect(";")
            return s.LocalDecl(ty, name, init, loc=loc)
        lhs = self.postfix(allow_call=True)
        if isinstance(lhs, _MethodCall):
            self.expect(";")
            return s.CallStmt(lhs.recv, lhs.method, lhs.args, loc=loc)
        self.expect("=")
        value = self.expr()
        self.expect(";")
        return s.Assign(lhs, value, loc=loc)

    # -- expressions ---------------------------------------------------------

    def args(self) -> tuple[s.Expr, ...]:
        self.expect("(")
        out = []
        if not self.at(")"):
            while True:
                out.append(self.expr())
                if not self.accept(","):
                    break
        self.expect(")")
        return tuple(out)

    def expr(self) -> s.Expr:
        loc = self.tok.loc
        left = self.sep()
        if self.accept("==>"):
            return s.BinOp("==>", left, self.expr(), loc=loc)
        return left

    def _left_assoc(self, ops: tuple[str, ...], sub) -> s.Expr:
        loc = self.tok.loc
        left = sub()
        while True:
            for op in ops:
                if self.accept(op):
                    left = s.BinOp(op, left, sub(), loc=loc)
                    break
            else:
                return left

    def sep(self) -> s.Expr:
        return self._left_assoc(("**",), self.disj)

    def disj(self) -> s.Expr:
        return self._left_assoc(("||",), self.conj)

    def conj(self) -> s.Expr:
        return self._left_assoc(("&&",), self.comparison)

    def comparison(self) -> s.Expr:
        loc = self.tok.loc
        left = self.additive()
        if self.tok.kind == "op" and self.tok.text in CMP_OPS:
            op = self.tok.text
            self.pos += 1
            right = self.additive()
            if self.tok.kind == "op" and self.tok.text in CMP_OPS:
                raise _Error("comparison operators are non-associative; add parentheses", self.tok.loc)
            return s.BinOp(op, left, right, loc=loc)
        return left

    def additive(self) -> s.Expr:
        return self._left_assoc(("+", "-"), self.multiplicative)

    def multiplicative(self) -> s.Expr:
        return self._left_assoc(("*", "/", "%"), self.unary)

    def unary(self) -> s.Expr:
        loc = self.tok.loc
        for op in ("!", "-"):
            if self.accept(op):
                return s.UnOp(op, self.unary(), loc=loc)
        return self.postfix()

    def postfix(self, allow_call: bool = False) -> s.Expr:
        e = self.primary()
        while True:
            loc = self.tok.loc
            if self.accept("."):
                name = self.ident()
                if self.at("("):
                    args = self.args()
                    if not (allow_call and not self.at(".") and not self.at("[")):
                        raise _Error("method calls are only allowed as statements", loc)
                    return _MethodCall(e, name, args, loc=e.loc)
                e = s.Field(e, name, loc=e.loc)
            elif self.accept("["):
                index = self.expr()
                self.expect("]")
                e = s.Index(e, index, loc=e.loc)
            else:
                return e

    def primary(self) -> s.Expr:
        t = self.tok
        loc = t.loc
        if t.kind == "int":
            self.pos += 1
            return s.IntLit(int(t.text), loc=loc)
        if t.kind == "frac":
            self.pos += 1
            num, den = t.text.split("\\")
            if int(den) == 0:
                raise _Error("zero denominator in fraction", loc)
            return s.FracLit(int(num), int(den), loc=loc)
        if self.accept("true"):
            return s.BoolLit(True, loc=loc)
        if self.accept("false"):
            return s.BoolLit(False, loc=loc)
        if self.accept("this"):
            return s.This(loc=loc)
        if self.accept("\\msg"):
            return s.Msg(loc=loc)
        if self.accept("\\sender"):
            return s.Sender(loc=loc)
        if self.accept("\\receiver"):
            return s.Receiver(loc=loc)
        if self.accept("Perm"):
            self.expect("(")
            location = self.expr()
            if not isinstance(location, s.Field):
                raise _Error("Perm expects a field location", location.loc or loc)
            self.expect(",")
            amount = self.expr()
            self.expect(")")
            return s.Perm(location, amount, loc=loc)
        if t.kind == "ident":
            if t.text == "seq" and self.at("<", 1):
                self.pos += 1
                self.expect("<")
                elem = self.type_ref()
                self.expect(">")
                self.expect("{")
                items = []
                if not self.at("}"):
                    while True:
                        items.append(self.expr())
                        if not self.accept(","):
                            break
                self.expect("}")
                return s.SeqLit(elem, tuple(items), loc=loc)
            self.pos += 1
            if self.at("("):
                args = self.args()
                cls = s.PredApply if t.text in self.predicates else s.FnCall
                return cls(t.text, args, loc=loc)
            return s.Var(t.text, loc=loc)
        if self.accept("("):
            if self.accept("\\endpoint"):
                target = self.target()
                self.expect(";")
                body = self.expr()
                self.expect(")")
                return s.EndpointExpr(target, body, loc=loc)
            if self.accept("\\chor"):
                body = self.expr()
                self.expect(")")
                return s.ChorExpr(body, loc=loc)
            if self.accept("\\forall"):
                var = self.ident()
                if not (self.tok.kind == "ident" and self.tok.text == "in"):
                    raise _Error("expected 'in' after quantified variable", self.tok.loc)
                self.pos += 1
                self.expect("[")
                lo = self.expr()
                self.expect(",")
                hi = self.expr()
                self.expect(")")
                self.expect("::")
                body = self.expr()
                self.expect(")")
                return s.Forall(var, lo, hi, body, loc=loc)
            e = self.expr()
            self.expect(")")
            return e
        raise _Error(f"expected an expression, found {self.describe(t)}", loc)


def _join(parts: list[s.Expr]) -> s.Expr:
    if not parts:
        return s.TRUE
    out = parts[0]
    for p in parts[1:]:
        out = s.BinOp("&&", out, p, loc=p.loc)
    return out
