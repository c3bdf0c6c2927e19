"""Concurrent execution of endpoint programs over FIFO channels.

Each endpoint instance is a generator-based task. The scheduler resumes one
runnable task at a time; a task blocked on an empty channel is not runnable,
so deadlock is exactly the state where no unfinished task can run.
"""

from __future__ import annotations

import random
from collections import defaultdict, deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Optional

from .. import syntax as s
from ..epproj import ChanRef, EndpointProgram, Recv, Send
from .machine import DEFAULT_FUEL, Env, FuelExhausted, Machine, _bool, _int, site_of
from .report import Failure, Kind, RunReport, merge_fragments
from .values import Owner, Value

ChannelKey = tuple[int, int, int]

ROUND_ROBIN = "round-robin"
RANDOM = "random"


@dataclass
class Task:
    owner: Owner
    gen: Iterator[Optional[ChannelKey]]
    waiting: Optional[ChannelKey] = None
    done: bool = False


class EndpointMachine(Machine):
    def __init__(self, program: s.Program, params: dict[str, Value], **kw):
        self.chor = program.choreography
        super().__init__(program, params, self.chor.params, **kw)
        self.report = RunReport("endpoints")
        self.current: Owner | None = None
        self.channels: dict[ChannelKey, deque] = defaultdict(deque)
        self._flagged: set = set()

    def check(self, kind: Kind, ok: bool, site: str, message: str) -> None:
        if ok:
            self.report.passed[kind] += 1
        else:
            self.report.failures.append(Failure(kind, site, f"{self.show_current()}: {message}"))

    def show_current(self) -> str:
        if self.current is None:
            return "setup"
        sort, k = self.current
        return f"{sort}[{k}]" if isinstance(self.globals.get(sort), tuple) else sort

    def _own(self, ref: Value, name: str, site: str) -> None:
        obj = self.heap.get(ref)
        if self.current is None or obj.owner == self.current:
            return
        key = (self.current, ref.oid, name)
        if key not in self._flagged:
            self._flagged.add(key)
            self.report.failures.append(Failure(
                Kind.FOREIGN_ACCESS, site, f"{self.show_current()} touches {obj.cls}.{name} of another endpoint"))

    def read(self, ref: Value, name: str, site: str) -> Value:
        value = super().read(ref, name, site)
        self._own(ref, name, site)
        return value

    def write(self, ref: Value, name: str, value: Value, site: str) -> None:
        super().write(ref, name, value, site)
        self._own(ref, name, site)

    def perm(self, ref: Value, name: str, amount: Fraction, site: str) -> bool:
        return self.heap.get(ref).owner == self.current

    # -- tasks ---------------------------------------------------------------

    def chan(self, c: ChanRef, env: Env) -> ChannelKey:
        return (c.site, _int(self.eval(c.sender, env), "channel index"),
                _int(self.eval(c.receiver, env), "channel index"))

    def task(self, st: s.Stmt, env: Env) -> Iterator[Optional[ChannelKey]]:
        """Run ``st``, yielding after each step; yields a channel key while blocked on it."""
        if isinstance(st, s.Block):
            for x in st.stmts:
                yield from self.task(x, env)
        elif isinstance(st, Send):
            key = self.chan(st.chan, env)
            self.channels[key].append(self.eval(st.value, env))
            yield None
        elif isinstance(st, Recv):
            key = self.chan(st.chan, env)
            while not self.channels[key]:
                yield key
            self.assign(st.target, self.channels[key].popleft(), env, site_of(st))
            yield None
        elif isinstance(st, s.If):
            branch = st.then if _bool(self.eval(st.cond, env), "condition") else st.orelse
            yield from self.task(branch, env)
        elif isinstance(st, s.While):
            while _bool(self.eval(st.cond, env), "condition"):
                yield from self.task(st.body, env)
                yield None
        else:
            self.exec(st, env)
            yield None

    def spawn(self, programs: dict[str, EndpointProgram]) -> list[Task]:
        tasks = []
        for ep in self.chor.endpoints:
            prog = programs.get(ep.name)
            if prog is None:
                raise ValueError(f"no endpoint program for {ep.name}")
            if isinstance(ep, s.EndpointDecl):
                tasks.append(Task((ep.name, 0), self.task(prog.body, {})))
            else:
                if prog.self_index is None:
                    raise ValueError(f"endpoint program for family {ep.name} has no self index")
                for k in range(len(self.globals[ep.name])):
                    tasks.append(Task((ep.name, k), self.task(prog.body, {prog.self_index: k})))
        return tasks

    def run(self, programs: dict[str, EndpointProgram], schedule: str = ROUND_ROBIN,
            seed: int | None = None) -> tuple[dict[Owner, dict], RunReport]:
        self.setup(self.chor)
        tasks = self.spawn(programs)
        rng = random.Random(seed)
        self.report.seed = seed
        cursor = 0
        while True:
            live = [t for t in tasks if not t.done]
            if not live:
                break
            runnable = [t for t in live if t.waiting is None or self.channels[t.waiting]]
            if not runnable:
                self.report.deadlock = True
                self.report.blocked = [f"{self._name(t.owner)} waits on channel {t.waiting}" for t in live]
                self.report.failures.append(Failure(Kind.DEADLOCK, "", "every unfinished endpoint is blocked"))
                break
            if schedule == RANDOM:
                t = rng.choice(runnable)
            else:
                order = tasks[cursor:] + tasks[:cursor]
                t = next(x for x in order if x in runnable)
                cursor = (tasks.index(t) + 1) % len(tasks)
            self.current = t.owner
            try:
                self.burn()
                t.waiting = next(t.gen)
            except StopIteration:
                t.done = True
            except FuelExhausted as exc:
                self.report.failures.append(Failure(Kind.FUEL, "", str(exc)))
                break
            finally:
                self.current = None
        fragments = {t.owner: self.heap.fragment(t.owner) for t in tasks}
        self.report.heap = merge_fragments(fragments)
        return fragments, self.report

    def _name(self, owner: Owner) -> str:
        self.current, saved = owner, self.current
        try:
            return self.show_current()
        finally:
            self.current = saved


def run_endpoints(program: s.Program, programs: dict[str, EndpointProgram], params: dict[str, Value],
                  schedule: str = ROUND_ROBIN, seed: int | None = None,
                  fuel: int = DEFAULT_FUEL) -> tuple[dict[Owner, dict], RunReport]:
    """Run one task per endpoint instance; returns heap fragments per instance and the report."""
    return EndpointMachine(program, params, fuel=fuel).run(programs, schedule, seed)
