from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from chorcc import serial
from chorcc import syntax as s
from chorcc.diagnostics import NotInvertible, UnsupportedSyntax
from chorcc.epproj import (EP_RULES, ChanRef, EndpointProgram, EpProjector, Recv, Send, build_channel_table,
                           invert_index_expr, pretty_ep, project_all, project_ep)
from chorcc.parser import parse, parse_expr
from chorcc.runtime.machine import Machine

from conftest import mini

E = parse_expr
GOLDEN = Path(__file__).parent / "golden"
EMPTY = s.Block()


def ep(body: str, target: str) -> EndpointProgram:
    return project_ep(parse(mini(body)), target)


def stmts(body: str, target: str):
    return ep(body, target).body.stmts


def walk_all(node):
    yield node
    for child in s.children(node):
        yield from walk_all(child)


# -- statements --------------------------------------------------------------

def test_assignment_is_kept_by_its_owner_only():
    assert stmts("endpoint a: a.x := 1;", "a") == (s.Assign(E("a.x"), s.IntLit(1)),)
    assert stmts("endpoint a: a.x := 1;", "b") == ()


def test_indexed_owner_is_guarded_by_the_self_index():
    out = ep("endpoint F[3]: F[3].x := 1;", "F")
    assert out.self_index == "j"
    assert out.body.stmts == (s.If(E("j == 3"), s.Block((s.Assign(E("F[3].x"), s.IntLit(1)),)), EMPTY),)


def test_ranged_call_is_guarded_and_instantiated():
    (guarded,) = stmts("endpoint F[i := 1 .. n]: F[i].bump();", "F")
    assert guarded.cond == E("1 <= j && j < n")
    assert guarded.then.stmts == (s.CallStmt(E("F[j]"), "bump", ()),)


def test_communication_sends_then_receives():
    assert stmts("communicate a: a.x -> b: b.y;", "a") == (
        s.Block((Send(ChanRef(0, s.IntLit(0), s.IntLit(0)), E("a.x")), EMPTY)),)
    assert stmts("communicate a: a.x -> b: b.y;", "b") == (
        s.Block((EMPTY, Recv(ChanRef(0, s.IntLit(0), s.IntLit(0)), E("b.y")))),)
    assert stmts("communicate a: a.x -> b: b.y;", "c") == ()


def test_shift_projects_to_guarded_send_and_inverted_receive():
    body = "communicate F[i := 0 .. n - 1]: F[i].x -> G[i + 1]: G[i + 1].y;"
    (send_block,) = stmts(body, "F")
    send = send_block.stmts[0]
    assert send.cond == E("0 <= j && j < n - 1")
    assert send.then.stmts == (Send(ChanRef(0, E("j"), E("j + 1")), E("F[j].x")),)
    (recv_block,) = stmts(body, "G")
    recv = recv_block.stmts[1]
    assert recv.cond == E("0 <= j - 1 && j - 1 < n - 1")
    assert recv.then.stmts == (Recv(ChanRef(0, E("j - 1"), E("j")), E("G[j].y")),)


def test_indexed_send_and_receive():
    (block,) = stmts("communicate F[0]: F[0].x -> G[2]: G[2].y;", "G")
    assert block.stmts[1] == s.If(E("j == 2"), s.Block((Recv(ChanRef(0, E("0"), E("2")), E("G[2].y")),)), EMPTY)


def test_self_communication_is_a_local_copy():
    assert stmts("communicate a: a.x -> a: a.y;", "a") == (s.Assign(E("a.y"), E("a.x")),)


def test_uninvertible_receiver_index_is_rejected():
    with pytest.raises(UnsupportedSyntax, match="i \\+ c"):
        ep("communicate F[i := 0 .. n]: F[i].x -> G[2 * i]: G[2 * i].y;", "G")


def test_irrelevant_if_is_dropped_and_relevant_body_kept():
    src = "if ((\\endpoint a; a.x > 0)) { communicate a: a.x -> b: b.y; }"
    assert stmts(src, "c") == ()
    (branch,) = stmts(src, "b")
    assert branch.cond == s.TRUE and branch.then.stmts


def test_expressions():
    pr = EpProjector(parse(mini("")), "F")
    assert pr.expr(E("(\\chor a.x == b.x)")) == s.TRUE
    assert pr.expr(E("(\\endpoint F[2]; F[2].x > 0)")) == E("j == 2 ==> F[2].x > 0")
    assert pr.expr(E("(\\endpoint b; b.x > 0)")) == s.TRUE
    assert pr.expr(E("(\\endpoint F[i := 0 .. n]; F[i].x > 0) && (\\endpoint a; a.x > 0)")) == \
        E("0 <= j && j < n ==> F[j].x > 0")
    assert {"EpChor", "EpExprIndex", "EpExprSkip", "EpRange", "EpAnd"} <= set(pr.rules)


def test_self_index_avoids_clashes():
    src = mini("endpoint F[i := 0 .. n]: F[i].bump();").replace("int n", "int j").replace(".. n]", ".. j]")
    assert project_ep(parse(src), "F").self_index == "j1"


def test_empty_run_projects_to_empty_programs():
    for prog in project_all(parse(mini(""))).values():
        assert prog.body.stmts == ()


# -- channel table -----------------------------------------------------------

def test_channel_table_sites_follow_lexical_order():
    p = parse(mini("communicate a: a.x -> b: b.y; if ((\\endpoint b; b.x > 0)) { communicate b: b.x -> c: c.y; }"))
    table = build_channel_table(p.choreography)
    assert [(e.site, e.sender, e.receiver) for e in table.entries] == [(0, "a", "b"), (1, "b", "c")]
    assert build_channel_table(parse(mini("")).choreography).entries == ()


def test_ring_channel_table(programs):
    assert build_channel_table(programs["ring"].choreography).to_dict() == {"0": {"sender": "F", "receiver": "G"}}


def test_tables_agree_across_targets(programs):
    for p in programs.values():
        tables = []
        for ep_decl in p.choreography.endpoints:
            pr = EpProjector(p, ep_decl.name)
            pr.project()
            tables.append(pr.table)
        assert all(t == tables[0] for t in tables)


# -- inverter ----------------------------------------------------------------

@pytest.mark.parametrize("d, inverse", [("i + 1", "i - 1"), ("i", "i"), ("i - 3", "i + 3"), ("2 + i", "i - 2")])
def test_inverse_examples(d, inverse):
    assert invert_index_expr(E(d), "i") == E(inverse)


@pytest.mark.parametrize("d", ["c - i", "2 * i", "i + i", "i + a.x", "-i"])
def test_not_invertible(d):
    with pytest.raises(NotInvertible):
        invert_index_expr(E(d.replace("c", "3")), "i")


@given(st.sampled_from(["i", "i + c", "i - c", "c + i"]), st.integers(-5, 5), st.integers(-100, 100))
def test_inverse_round_trip(pattern, c, i):
    d = s.subst_vars(E(pattern.replace("c", "k")), {"k": s.IntLit(c)})
    inv = invert_index_expr(d, "i")
    m = Machine(s.Program(()), {})
    assert m.eval(inv, {"i": m.eval(d, {"i": i})}) == i


# -- properties over the corpus ----------------------------------------------

def test_all_rules_fire_on_the_corpus(programs):
    fired = {r for p in programs.values() for prog in project_all(p).values() for r in prog.rules}
    assert fired == set(EP_RULES)


def test_output_has_no_choreographic_nodes(programs):
    for p in programs.values():
        for prog in project_all(p).values():
            assert not any(isinstance(n, (s.EndpointExpr, s.ChorExpr, s.Msg, s.Sender, s.Receiver))
                           for n in walk_all(prog))


def test_send_precedes_receive(programs):
    for p in programs.values():
        for prog in project_all(p).values():
            for n in walk_all(prog):
                if isinstance(n, s.Block) and len(n.stmts) == 2:
                    kinds = [type(x) for x in walk_all(n)]
                    if Send in kinds and Recv in kinds:
                        assert kinds.index(Send) < kinds.index(Recv)


def test_endpoint_program_json_round_trip(programs):
    for p in programs.values():
        for prog in project_all(p).values():
            assert serial.from_json(serial.to_json(prog)) == prog


@pytest.mark.parametrize("sort", ["c", "F", "G"])
def test_ring_golden(programs, sort):
    assert pretty_ep(project_ep(programs["ring"], sort)) == (GOLDEN / f"ring.{sort}.ep.txt").read_text()
