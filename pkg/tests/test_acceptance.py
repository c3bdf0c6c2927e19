"""End-to-end acceptance checks over the shipped corpus.

Each test records one PASS/FAIL line; the lines are printed in the pytest
terminal summary and also when the module is run as a script.
"""

import dataclasses
import json
import time

import pytest

from chorcc import corpus, serial
from chorcc import syntax as s
from chorcc.chorproj import CP_RULES, project_chor
from chorcc.cli import EXIT_DEADLOCK, main
from chorcc.diagnostics import NotInvertible
from chorcc.epproj import EMPTY, EP_RULES, EpProjector, Send, invert_index_expr, project_all
from chorcc.parser import parse, parse_expr
from chorcc.pretty import pretty
from chorcc.runtime import (RANDOM, Kind, heap_json, merge_and_compare, run_choreography, run_endpoints,
                            run_verification_ir)
from chorcc.runtime.ircheck import IRMachine
from chorcc.runtime.machine import Machine

# Pinned tolerances.
EQUIV_BUDGET_S = 30.0
FAMILY_SIZES = range(0, 9)
INVERTER_CONSTANTS = range(-5, 6)
INVERTER_INDICES = range(-100, 101)
SCHEDULE_SEEDS = 100
RING_N = 4
INJECTIVITY_MUTANT_N = 4

RESULTS: list[str] = []


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d}: {title} ({detail})"
    RESULTS.append(line)
    print(line)
    assert ok, line


def sweep_runs():
    """Every corpus program at every family size in the pinned range."""
    for entry in corpus.entries():
        program = entry.program
        sweep = corpus.sweep_of(program)
        base = entry.params()
        for n in FAMILY_SIZES:
            yield entry.name, program, {**base, sweep.name: n} if sweep else base


def mutate(name: str, old: str, new: str):
    text = corpus.load(name).text
    assert old in text, f"mutation anchor missing in {name}"
    return parse(text.replace(old, new))


# -- 1 -----------------------------------------------------------------------

def test_01_projection_equivalence():
    names = {e.name for e in corpus.entries()}
    start = time.perf_counter()
    mismatches, runs = [], 0
    for name, program, params in sweep_runs():
        reference = run_choreography(program, params).snapshot()
        fragments, report = run_endpoints(program, project_all(program), params)
        verdict = merge_and_compare(fragments, reference)
        runs += 1
        if report.verdict != "PASS" or not verdict.equal:
            mismatches.append(f"{name} {params}: {report.verdict} {verdict}")
    elapsed = time.perf_counter() - start
    ok = len(names) >= 6 and not mismatches and elapsed < EQUIV_BUDGET_S
    record(1, "projection equivalence", ok,
           f"{len(names)} programs, {runs} runs, {len(mismatches)} mismatches, {elapsed:.2f}s < {EQUIV_BUDGET_S:.0f}s")


# -- 2 -----------------------------------------------------------------------

def test_02_rule_coverage():
    cp, ep = set(), set()
    for entry in corpus.entries():
        cp |= set(project_chor(entry.program).rules)
        for prog in project_all(entry.program).values():
            ep |= set(prog.rules)
    missing = sorted((set(CP_RULES) - cp) | (set(EP_RULES) - ep))
    ok = len(CP_RULES) == 11 and len(EP_RULES) == 18 and not missing
    record(2, "rule coverage", ok, f"{len(cp)}/{len(CP_RULES)} Cp, {len(ep)}/{len(EP_RULES)} Ep, missing {missing}")


# -- 3 -----------------------------------------------------------------------

def test_03_inverter():
    m = Machine(s.Program(()), {})
    failures, checked = [], 0
    for pattern in ("i", "i + c", "i - c", "c + i"):
        for c in INVERTER_CONSTANTS:
            d = s.subst_vars(parse_expr(pattern.replace("c", "k")), {"k": s.IntLit(c)})
            inverse = invert_index_expr(d, "i")
            for i in INVERTER_INDICES:
                checked += 1
                if m.eval(inverse, {"i": m.eval(d, {"i": i})}) != i:
                    failures.append((pattern, c, i))
    rejected = 0
    for bad in ("3 - i", "2 * i"):
        try:
            invert_index_expr(parse_expr(bad), "i")
        except NotInvertible:
            rejected += 1
    ok = not failures and rejected == 2
    record(3, "index inverter", ok, f"{checked} round trips, {len(failures)} wrong, {rejected}/2 rejected")


# -- 4 -----------------------------------------------------------------------

def test_04_injectivity():
    mutant = mutate("broadcast", "-> W[i]: W[i].val", "-> W[0]: W[0].val")
    params = {**corpus.default_params(mutant), "n": INJECTIVITY_MUTANT_N}
    caught = run_verification_ir(project_chor(mutant), params).count(Kind.INJECTIVITY)
    false_alarms, passes = 0, 0
    for _, program, params in sweep_runs():
        report = run_verification_ir(project_chor(program), params)
        false_alarms += report.count(Kind.INJECTIVITY)
        passes += report.passed[Kind.INJECTIVITY]
    ok = caught == 1 and false_alarms == 0 and passes > 0
    record(4, "injectivity", ok, f"mutant failures {caught}, corpus failures {false_alarms}, corpus passes {passes}")


# -- 5 -----------------------------------------------------------------------

class CountingIR(IRMachine):
    transfers = 0

    def exhale(self, st, env):
        self.transfers += 1
        super().exhale(st, env)

    def inhale(self, st, env):
        self.transfers += 1
        super().inhale(st, env)


def test_05_permission_conservation():
    violations, checks, transfers, unclean = 0, 0, 0, []
    for name, program, params in sweep_runs():
        m = CountingIR(project_chor(program), params)
        report = m.run()
        violations += report.count(Kind.CONSERVATION)
        checks += report.conservation_checks
        transfers += m.transfers
        if report.verdict != "PASS":
            unclean.append(f"{name} {params}")
    ok = violations == 0 and checks == transfers > 0 and not unclean
    record(5, "permission conservation", ok,
           f"{checks} checks for {transfers} exhale/inhale steps, {violations} violations, {len(unclean)} unclean runs")


# -- 6 -----------------------------------------------------------------------

def test_06_confinement():
    mutant = mutate("exchange", "endpoint a: a.bump();", "endpoint a: b.y := 9;\n        endpoint a: a.bump();")
    caught = run_verification_ir(project_chor(mutant), corpus.default_params(mutant)).count(Kind.CONFINEMENT)
    clean = sum(run_verification_ir(project_chor(p), params).count(Kind.CONFINEMENT)
                for _, p, params in sweep_runs())
    ok = caught == 1 and clean == 0
    record(6, "confinement", ok, f"mutant failures {caught}, corpus failures {clean}")


# -- 7 -----------------------------------------------------------------------

def without_first_send(body: s.Block) -> tuple[s.Block, int]:
    """Copy of ``body`` with its first ``Send`` replaced by an empty block."""
    removed: list[Send] = []

    def go(st: s.Stmt) -> s.Stmt:
        if isinstance(st, Send) and not removed:
            removed.append(st)
            return EMPTY
        if isinstance(st, s.Block):
            return dataclasses.replace(st, stmts=tuple(go(x) for x in st.stmts))
        if isinstance(st, s.If):
            return dataclasses.replace(st, then=go(st.then), orelse=go(st.orelse))
        if isinstance(st, s.While):
            return dataclasses.replace(st, body=go(st.body))
        return st

    return go(body), len(removed)


def test_07_deadlock_detection(tmp_path, capsys):
    entry = corpus.load("exchange")
    programs = project_all(entry.program)
    body, removed = without_first_send(programs["a"].body)
    programs["a"] = dataclasses.replace(programs["a"], body=body)
    _, report = run_endpoints(entry.program, programs, entry.params())
    # Neither endpoint can finish: the blocked set is exactly the unfinished set {a, b}.
    exact = report.deadlock and sorted(b.split()[0] for b in report.blocked) == ["a", "b"]

    for name, prog in programs.items():
        (tmp_path / f"{name}.ep.json").write_text(serial.to_json(prog))
    src = tmp_path / "exchange.chor"
    src.write_text(entry.text)
    code = main(["run", str(src), "--mode", "endpoints", "--programs", str(tmp_path), "--json"])
    doc = json.loads(capsys.readouterr().out)
    ok = removed == 1 and exact and report.verdict == "DEADLOCK" and code == EXIT_DEADLOCK \
        and doc["result"]["endpoints"][0]["verdict"] == "DEADLOCK"
    record(7, "deadlock detection", ok, f"verdict {report.verdict}, blocked {report.blocked}, exit code {code}")


# -- 8 -----------------------------------------------------------------------

def test_08_schedule_independence():
    entry = corpus.load("ring")
    program = entry.program
    params = {**entry.params(), "n": RING_N}
    programs = project_all(program)
    reference = run_choreography(program, params).snapshot()
    heaps, verdicts = set(), set()
    for seed in range(SCHEDULE_SEEDS):
        _, report = run_endpoints(program, programs, params, schedule=RANDOM, seed=seed)
        heaps.add(heap_json(report.heap))
        verdicts.add(report.verdict)
    ok = len(heaps) == 1 and verdicts == {"PASS"} and heaps == {heap_json(reference)}
    record(8, "schedule independence", ok, f"ring n={RING_N}, {SCHEDULE_SEEDS} seeds, {len(heaps)} distinct heap(s)")


# -- 9 -----------------------------------------------------------------------

def test_09_frontend_round_trip():
    bad = []
    entries = corpus.entries()
    for entry in entries:
        p = parse(entry.text)
        text = pretty(p)
        again = parse(text)
        if again != p or pretty(again) != text:
            bad.append(f"{entry.name}: pretty")
        j = serial.to_json(p)
        if serial.from_json(j) != p or serial.to_json(serial.from_json(j)) != j:
            bad.append(f"{entry.name}: json")
    record(9, "frontend round trip", not bad, f"{len(entries)} files, failures {bad}")


# -- 10 ----------------------------------------------------------------------

TARGETS = (s.Singular, s.FamilyIndex, s.FamilyRange)
CHOR_STMTS = (s.EndpointStmt, s.Communicate, s.ChorIf, s.ChorWhile, s.ChorAssert)


def test_10_skip_soundness():
    checked, bad = 0, []
    for entry in corpus.entries():
        program = entry.program
        sorts = [e.name for e in program.choreography.endpoints]
        nodes = list(s.walk(program.choreography.body))
        for st in (n for n in nodes if isinstance(n, CHOR_STMTS)):
            involved = {s.sort(t) for t in s.walk(st) if isinstance(t, TARGETS)}
            for sort in sorts:
                if sort in involved:
                    continue
                checked += 1
                if EpProjector(program, sort).stmt(st) != EMPTY:
                    bad.append(f"{entry.name}: {type(st).__name__} at {sort}")
        for e in (n for n in nodes if isinstance(n, s.EndpointExpr)):
            for sort in sorts:
                if sort == s.sort(e.target):
                    continue
                checked += 1
                if EpProjector(program, sort).endpoint_expr(e) != s.TRUE:
                    bad.append(f"{entry.name}: endpoint expression at {sort}")
        for e in (n for n in nodes if isinstance(n, s.ChorExpr)):
            for sort in sorts:
                checked += 1
                if EpProjector(program, sort).expr(e) != s.TRUE:
                    bad.append(f"{entry.name}: chor expression at {sort}")
    record(10, "skip soundness", checked > 0 and not bad, f"{checked} statement/sort pairs, failures {bad}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
