import dataclasses

import pytest

from chorcc import syntax as s
from chorcc.chorproj import project_chor
from chorcc.epproj import ChanRef, Recv, Send, project_all
from chorcc.parser import parse, parse_expr
from chorcc.runtime import (RANDOM, Kind, Ref, RuntimeFault, heap_json, merge_and_compare, parse_params,
                            run_choreography, run_endpoints, run_verification_ir)
from chorcc.runtime.machine import Machine
from chorcc.runtime.reference import ChorMachine
from chorcc.runtime.report import Diff, merge_fragments

from conftest import mini


def reference(body: str, n: int = 3) -> ChorMachine:
    m = ChorMachine(parse(mini(body)), {"n": n})
    m.run()
    return m


def field(m: ChorMachine, name: str, k: int | None, f: str):
    ref = m.globals[name] if k is None else m.globals[name][k]
    return m.heap.get(ref).fields[f]


# -- values and expressions --------------------------------------------------

def test_parse_params():
    assert parse_params("n=3, ok=true,neg=-2") == {"n": 3, "ok": True, "neg": -2}
    assert parse_params("") == {}
    with pytest.raises(ValueError):
        parse_params("n")


@pytest.mark.parametrize("text, value", [("7 / 2", 3), ("-7 / 2", -3), ("-7 % 2", -1), ("7 % -2", 1)])
def test_division_truncates_towards_zero(text, value):
    assert Machine(s.Program(()), {}).eval(parse_expr(text), {}) == value


def test_division_by_zero_is_a_fault():
    with pytest.raises(RuntimeFault):
        Machine(s.Program(()), {}).eval(parse_expr("1 / 0"), {})


# -- reference semantics -----------------------------------------------------

def test_communication_copies_the_value():
    m = reference("communicate a: a.x -> b: b.y;")
    assert field(m, "b", None, "y") == 1
    assert field(m, "a", None, "x") == 1


def test_ranged_shift():
    m = reference("communicate F[i := 0 .. n - 1]: F[i].x -> G[i + 1]: G[i + 1].y;", n=4)
    assert [field(m, "G", k, "y") for k in range(4)] == [0, 0, 1, 2]


def test_empty_family():
    m = reference("endpoint F[i := 0 .. n]: F[i].bump(); communicate F[i := 0 .. n - 1]: F[i].x -> G[i + 1]: G[i + 1].y;",
                  n=0)
    assert m.globals["F"] == ()


def test_failed_assertion_is_a_fault():
    with pytest.raises(RuntimeFault):
        reference("assert (\\endpoint a; a.x == 2);")


def test_out_of_range_index_is_a_fault():
    with pytest.raises(RuntimeFault):
        reference("endpoint F[5]: F[5].bump();", n=3)


def test_owners_are_tagged(programs):
    heap = run_choreography(programs["ring"], {"n": 2, "rounds": 1}).snapshot()
    assert [o["owner"] for o in heap] == [["c", 0], ["F", 0], ["F", 1], ["G", 0], ["G", 1]]


# -- verification IR checks --------------------------------------------------

def ir(body: str, n: int = 3):
    return run_verification_ir(project_chor(parse(mini(body))), {"n": n})


def test_clean_program_passes():
    report = ir("channel_invariant \\msg >= 0; communicate a: a.x -> b: b.y; endpoint a: a.bump();")
    assert report.verdict == "PASS"
    assert report.passed[Kind.UNANIMITY] == 0


def test_permission_transfer_and_double_exhale():
    body = ("channel_invariant Perm(\\sender.y, 1); communicate a: a.x -> b: b.y;"
            "channel_invariant Perm(\\sender.y, 1); communicate a: a.x -> b: b.y;")
    report = ir(body)
    kinds = [f.kind for f in report.failures]
    assert kinds.count(Kind.PERMISSION) == 2  # exhale without holding, then inhale with nothing in flight
    assert Kind.CONSERVATION not in kinds


def test_call_without_permission_is_flagged():
    body = "channel_invariant Perm(\\sender.y, 1); communicate a: a.x -> b: b.y; endpoint a: a.bump();"
    report = ir(body)
    assert report.count(Kind.PERMISSION) >= 1


def test_foreign_write_breaks_confinement():
    report = ir("endpoint a: b.y := 4;")
    assert report.count(Kind.CONFINEMENT) == 1


def test_non_injective_ranged_communication_is_caught():
    report = ir("communicate F[i := 0 .. n]: F[i].x -> G[0]: G[0].y;")
    assert report.count(Kind.INJECTIVITY) == 1
    assert ir("communicate F[i := 0 .. n]: F[i].x -> G[0]: G[0].y;", n=1).verdict == "PASS"


def test_disunanimous_branch_is_caught():
    report = ir("if ((\\endpoint a; a.x > 0) && (\\endpoint b; b.x > 5)) { }")
    assert report.count(Kind.UNANIMITY) == 1


def test_exhale_checks_the_channel_invariant():
    report = ir("channel_invariant \\msg > 5; communicate a: a.x -> b: b.y;")
    assert report.count(Kind.EXHALE) == 1


def test_conservation_is_checked_at_every_transfer(programs):
    n, rounds = 4, 2
    report = run_verification_ir(project_chor(programs["ring"]), {"n": n, "rounds": rounds})
    assert report.verdict == "PASS"
    assert report.conservation_checks == 2 * (n - 1) * rounds


# -- endpoint simulator ------------------------------------------------------

def test_send_and_receive_pair(programs):
    p = programs["exchange"]
    fragments, report = run_endpoints(p, project_all(p), {"a0": 3, "b0": 5})
    assert report.verdict == "PASS"
    assert merge_and_compare(fragments, run_choreography(p, {"a0": 3, "b0": 5}).snapshot()).equal


def test_receive_without_send_deadlocks(programs):
    p = programs["exchange"]
    eps = project_all(p)
    eps["a"] = dataclasses.replace(eps["a"], body=s.Block())
    _, report = run_endpoints(p, eps, {"a0": 3, "b0": 5})
    assert report.deadlock and report.verdict == "DEADLOCK"
    assert report.blocked and "b" in report.blocked[0]


def test_hand_written_channel_programs():
    p = parse(mini(""))
    progs = project_all(p)
    chan = ChanRef(0, s.IntLit(0), s.IntLit(0))
    progs["a"] = dataclasses.replace(progs["a"], body=s.Block((Send(chan, s.Field(s.Var("a"), "x")),)))
    progs["b"] = dataclasses.replace(progs["b"], body=s.Block((Recv(chan, s.Field(s.Var("b"), "y")),)))
    fragments, report = run_endpoints(p, progs, {"n": 2}, schedule=RANDOM, seed=3)
    assert report.verdict == "PASS"
    b_obj = next(iter(fragments[("b", 0)].values()))
    assert b_obj["fields"]["y"] == 1


def test_foreign_access_is_reported():
    p = parse(mini(""))
    progs = project_all(p)
    progs["a"] = dataclasses.replace(progs["a"], body=s.Block((s.Assign(s.Field(s.Var("b"), "y"), s.IntLit(1)),)))
    _, report = run_endpoints(p, progs, {"n": 0})
    assert report.count(Kind.FOREIGN_ACCESS) == 1


def test_fuel_limit_stops_divergent_programs():
    p = parse(mini(""))
    progs = project_all(p)
    loop = s.While(s.TRUE, s.TRUE, s.Block())
    progs["a"] = dataclasses.replace(progs["a"], body=s.Block((loop,)))
    _, report = run_endpoints(p, progs, {"n": 0}, fuel=500)
    assert report.count(Kind.FUEL) == 1


# -- heap comparison ---------------------------------------------------------

def test_merge_and_compare_reports_differences():
    obj = {"id": 0, "class": "Cell", "owner": ["a", 0], "fields": {"x": 1, "y": 0}}
    other = {"id": 1, "class": "Cell", "owner": ["b", 0], "fields": {"x": 2, "y": 0}}
    assert str(merge_and_compare({("a", 0): {0: obj}, ("b", 0): {1: other}}, [obj, other])) == "EQUAL"
    changed = dict(other, fields={"x": 2, "y": 9})
    verdict = merge_and_compare({("a", 0): {0: obj}, ("b", 0): {1: changed}}, [obj, other])
    assert verdict.diffs == [Diff(1, "y", 9, 0)]
    assert str(verdict).startswith("DIFF")


def test_overlapping_fragments_are_rejected():
    obj = {"id": 0, "class": "Cell", "owner": ["a", 0], "fields": {}}
    with pytest.raises(AssertionError):
        merge_fragments({("a", 0): {0: obj}, ("b", 0): {0: obj}})


def test_heap_json_is_canonical(programs):
    h1 = run_choreography(programs["ring"], {"n": 3, "rounds": 2}).snapshot()
    h2 = run_choreography(programs["ring"], {"n": 3, "rounds": 2}).snapshot()
    assert heap_json(h1) == heap_json(h2)
    assert Ref(2) < Ref(3)
