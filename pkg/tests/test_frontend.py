import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chorcc import serial
from chorcc import syntax as s
from chorcc.diagnostics import ParseError, SchemaError
from chorcc.lexer import tokenize
from chorcc.parser import parse, parse_expr
from chorcc.pretty import expr as pexpr
from chorcc.pretty import pretty

from conftest import mini


# -- lexer -------------------------------------------------------------------

def test_tokens_cover_fractions_keywords_and_pragmas():
    toks = tokenize("//! params: n=1\nPerm(a.x, 1\\2) \\endpoint // dropped\n")
    kinds = [(t.kind, t.text) for t in toks]
    assert kinds[0] == ("pragma", "params: n=1")
    assert ("frac", "1\\2") in kinds
    assert ("kw", "Perm") in kinds
    assert ("kw", "\\endpoint") in kinds
    assert kinds[-1][0] == "eof"
    assert all(t.text != "dropped" for t in toks)


def test_token_locations_are_one_based():
    toks = tokenize("a\n  b")
    assert (toks[0].loc.line, toks[0].loc.col) == (1, 1)
    assert (toks[1].loc.line, toks[1].loc.col) == (2, 3)


# -- parser ------------------------------------------------------------------

def test_precedence_ladder():
    e = parse_expr("a + b * c == d && e ==> f ** g")
    assert e.op == "==>"
    assert e.left == s.BinOp("&&", parse_expr("a + b * c == d"), s.Var("e"))
    assert e.right == s.BinOp("**", s.Var("f"), s.Var("g"))
    assert parse_expr("a + b * c").right.op == "*"


def test_implication_is_right_associative():
    e = parse_expr("a ==> b ==> c")
    assert e == s.BinOp("==>", s.Var("a"), s.BinOp("==>", s.Var("b"), s.Var("c")))


def test_comparisons_do_not_chain():
    with pytest.raises(ParseError):
        parse_expr("a < b < c")


def test_choreographic_expressions():
    e = parse_expr("(\\endpoint F[i := 0 .. n]; F[i].x > 0)")
    assert isinstance(e, s.EndpointExpr)
    assert e.target == s.FamilyRange("F", "i", s.IntLit(0), s.Var("n"))
    assert parse_expr("(\\chor a.x == b.x)") == s.ChorExpr(parse_expr("a.x == b.x"))
    assert parse_expr("Perm(a.x, 1\\2)") == s.Perm(parse_expr("a.x"), s.FracLit(1, 2))


def test_endpoint_and_communicate_statements():
    p = parse(mini("""
        channel_invariant \\msg >= 0;
        communicate F[i := 0 .. n - 1]: F[i].x -> G[i + 1]: G[i + 1].y;
        endpoint F[2]: F[2].bump();
        endpoint a: a.x := a.y + 1;
    """))
    body = p.choreography.body.stmts
    comm, call, assign = body
    assert isinstance(comm, s.Communicate)
    assert comm.invariant == parse_expr("\\msg >= 0")
    assert comm.receiver == s.FamilyIndex("G", parse_expr("i + 1"))
    assert isinstance(call.inner, s.EpCall) and call.target == s.FamilyIndex("F", s.IntLit(2))
    assert assign.inner == s.EpAssign(parse_expr("a.x"), parse_expr("a.y + 1"))


def test_parse_errors_are_collected_with_locations():
    src = mini("endpoint a: a.x := ;\n        endpoint b: b.x := 1 1;")
    with pytest.raises(ParseError) as info:
        parse(src)
    diags = info.value.diagnostics
    assert len(diags) >= 2
    assert all(d.loc.line > 0 for d in diags)


def test_missing_choreography_is_reported():
    with pytest.raises(ParseError) as info:
        parse("class A { int x; }")
    assert any(d.rule.value == "missing-choreography" for d in info.value.diagnostics)


def test_family_must_start_at_zero():
    src = mini("").replace("F[i := 0 .. n]", "F[i := 1 .. n]")
    with pytest.raises(ParseError):
        parse(src)


# -- pretty-printer and JSON -------------------------------------------------

def test_corpus_round_trips(programs):
    for name, p in programs.items():
        text = pretty(p)
        again = parse(text)
        assert again == p, name
        assert pretty(again) == text, name


def test_corpus_json_round_trips(programs):
    for name, p in programs.items():
        text = serial.to_json(p)
        assert serial.from_json(text) == p, name
        assert serial.to_json(serial.from_json(text)) == text


def test_json_keeps_locations(programs):
    p = programs["ring"]
    back = serial.from_json(serial.to_json(p))
    assert back.choreography.loc == p.choreography.loc


def test_schema_errors_carry_a_path():
    doc = json.loads(serial.to_json(parse_expr("a + 1"), key="expr"))
    doc["expr"]["children"]["op"] = 7
    with pytest.raises(SchemaError) as info:
        serial.from_json(json.dumps(doc), key="expr")
    assert info.value.path == "$.expr.children.op"
    doc["expr"]["kind"] = "Nope"
    with pytest.raises(SchemaError, match="unknown node kind"):
        serial.from_json(json.dumps(doc), key="expr")
    with pytest.raises(SchemaError, match="schema"):
        serial.from_json(json.dumps({"schema": 99, "expr": {}}), key="expr")


names = st.sampled_from(["a", "b", "n", "x"])


def exprs():
    leaves = st.one_of(
        names.map(s.Var),
        st.integers(0, 50).map(s.IntLit),
        st.booleans().map(s.BoolLit),
        names.map(lambda n: s.Field(s.Var(n), "x")),
    )

    def grow(children):
        ops = st.sampled_from(["+", "-", "*", "/", "%", "==", "!=", "<", "<=", "&&", "||", "==>", "**"])
        return st.one_of(
            st.builds(s.BinOp, ops, children, children),
            st.builds(s.UnOp, st.sampled_from(["!", "-"]), children),
            st.builds(lambda n, e: s.ChorExpr(e), names, children),
            st.builds(lambda n, e: s.EndpointExpr(s.Singular(n), e), names, children),
        )

    return st.recursive(leaves, grow, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(exprs())
def test_expression_print_parse_round_trip(e):
    assert parse_expr(pexpr(e)) == e
