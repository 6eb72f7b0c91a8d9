"""Exclusive-write, binary fan-in machine.

Each scheduled point runs at its time step.  Accumulations fold one operand
per step into a cell; the trace records every step so that concurrent
writes and reads of values that are not ready yet can be found afterwards.
Values are always computed, so execution carries on past violations.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .affine import Point, TimeVector, pad_time, shift_inner
from .sare import (
    Program,
    PointwiseEquation,
    ReduceEquation,
    accesses,
    eval_expr,
    reduction_fibers,
)

OPS = {"+": lambda a, b: a + b, "max": max, "min": min}


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class Source:
    var: str
    point: Point
    lane: tuple[int, ...]
    time: TimeVector | None  # None: an input that is there from the start

    def to_json(self) -> list:
        return [self.var, list(self.point), list(self.lane), None if self.time is None else list(self.time)]


@dataclass(frozen=True)
class Event:
    time: TimeVector
    kind: str  # compute | accumulate
    target: str
    point: Point
    lane: tuple[int, ...]
    sources: tuple[Source, ...]
    ops: int
    latency: int = 1

    def cell(self) -> tuple:
        return (self.target, self.point, self.lane)

    def to_json(self) -> dict:
        # field order is part of the trace format
        return {
            "time": list(self.time),
            "kind": self.kind,
            "target": self.target,
            "point": list(self.point),
            "lane": list(self.lane),
            "sources": [s.to_json() for s in self.sources],
            "ops": self.ops,
            "latency": self.latency,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Event":
        srcs = tuple(
            Source(v, tuple(p), tuple(l), None if t is None else tuple(t)) for v, p, l, t in d["sources"]
        )
        return cls(
            tuple(d["time"]), d["kind"], d["target"], tuple(d["point"]), tuple(d["lane"]), srcs, int(d["ops"]),
            int(d.get("latency", 1)),
        )


@dataclass(frozen=True)
class Violation:
    kind: str  # concurrent-write | causality | fan-in
    time: TimeVector
    target: str
    point: Point
    events: tuple[int, ...]
    detail: str = ""

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "time": list(self.time),
            "target": self.target,
            "point": list(self.point),
            "events": list(self.events),
            "detail": self.detail,
        }


@dataclass
class MachineTrace:
    events: list[Event]
    values: dict[str, dict[Point, int]] = field(default_factory=dict)
    produced: dict[str, dict[Point, TimeVector | None]] = field(default_factory=dict)

    def sort(self):
        self.events.sort(key=lambda e: (e.time, e.target, e.point, e.lane))

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_json()) + "\n" for e in self.events)

    @classmethod
    def from_jsonl(cls, text: str) -> "MachineTrace":
        events = []
        for n, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            try:
                events.append(Event.from_json(json.loads(line)))
            except (AttributeError, KeyError, TypeError, ValueError) as exc:
                raise SimulationError(f"trace line {n}: {exc}") from exc
        return cls(events)

    def ops_by(self, var: str) -> dict[Point, int]:
        out: dict[Point, int] = {}
        for e in self.events:
            if e.target == var:
                out[e.point] = out.get(e.point, 0) + e.ops
        return out


# ---------------------------------------------------------------- inputs and oracle


def make_inputs(program: Program, params, seed: int = 0) -> dict[str, dict[Point, int]]:
    """Input values: the program's init rule when present, else seeded integers in [-9, 9]."""
    rng = random.Random(seed)
    out = {}
    for v in program.inputs:
        rule = program.init_rule(v.name)
        pts = v.domain.enumerate(params)
        if rule is not None:
            out[v.name] = {p: rule(p, params)[0] for p in pts}
        else:
            out[v.name] = {p: rng.randint(-9, 9) for p in pts}
    return out


def oracle(program: Program, params, inputs: Mapping[str, Mapping[Point, int]]) -> dict[str, dict[Point, int]]:
    """Direct evaluation; reductions fold their operands in lexicographic order."""
    memo: dict[tuple[str, Point], int] = {}
    fibers = {eq.result: reduction_fibers(program, eq, params) for eq in program.reduce_equations}
    active: set = set()

    def value(var: str, p: Point) -> int:
        key = (var, p)
        if key in memo:
            return memo[key]
        v = program.var(var)
        if v.is_input:
            try:
                return inputs[var][p]
            except KeyError:
                raise SimulationError(f"no input value for {var}{p}") from None
        if key in active:
            raise SimulationError(f"cyclic dependence through {var}{p}")
        active.add(key)
        eq = program.equation_for(var)
        if isinstance(eq, PointwiseEquation):
            res = eval_expr(eq.expr, value, p, params)
        else:
            pts = fibers[var][p]
            res = value(eq.body, pts[0])
            for q in pts[1:]:
                res = OPS[eq.op](res, value(eq.body, q))
        active.discard(key)
        memo[key] = res
        return res

    return {
        v.name: {p: value(v.name, p) for p in v.domain.enumerate(params)} for v in program.variables
    }


# ---------------------------------------------------------------- simulation


def _later(a: TimeVector, b: TimeVector) -> TimeVector:
    return max(a, b)


def simulate(program: Program, schedule, params, inputs: Mapping[str, Mapping[Point, int]]) -> MachineTrace:
    """Run every point of ``program`` at the times ``schedule`` assigns."""
    dims = schedule.dims
    for v in program.variables:
        if not v.is_input and not schedule.has(v.name):
            raise SimulationError(f"{v.name} has no schedule")
    fibers = {eq.result: reduction_fibers(program, eq, params) for eq in program.reduce_equations}
    events: list[Event] = []
    values: dict[str, dict[Point, int]] = {v.name: {} for v in program.variables}
    produced: dict[str, dict[Point, TimeVector | None]] = {v.name: {} for v in program.variables}
    active: set = set()

    def when(var: str, p: Point) -> TimeVector:
        return pad_time(schedule.time(var, p, params), dims)

    def get(var: str, p: Point) -> tuple[int, TimeVector | None]:
        if p in values[var]:
            return values[var][p], produced[var][p]
        v = program.var(var)
        if v.is_input:
            try:
                val = inputs[var][p]
            except KeyError:
                raise SimulationError(f"no input value for {var}{p}") from None
            t = when(var, p) if schedule.has(var) else None
            values[var][p], produced[var][p] = val, t
            return val, t
        if (var, p) in active:
            raise SimulationError(f"cyclic dependence through {var}{p}")
        active.add((var, p))
        eq = program.equation_for(var)
        if isinstance(eq, PointwiseEquation):
            val, t = _compute(eq, p)
        else:
            val, t = _reduce(eq, p)
        active.discard((var, p))
        values[var][p], produced[var][p] = val, t
        return val, t

    def _compute(eq: PointwiseEquation, p: Point):
        t = when(eq.result, p)
        srcs = []
        for acc in accesses(eq.expr):
            q = acc.index_map(p, params)
            _, tq = get(acc.var, q)
            srcs.append(Source(acc.var, q, (), tq))
        val = eval_expr(eq.expr, lambda var, q: get(var, q)[0], p, params)
        events.append(Event(t, "compute", eq.result, p, (), tuple(srcs), 0, eq.latency))
        return val, t

    def _reduce(eq: ReduceEquation, p: Point):
        deadline = when(eq.result, p)
        pts = fibers[eq.result][p]
        operands = []
        for q in pts:
            val, tq = get(eq.body, q)
            operands.append((q, val, tq, Source(eq.body, q, (), tq)))
        fold = OPS[eq.op]
        if eq.role in ("slice", "tile"):
            return _boxwise(eq, p, operands, fold, deadline)
        operands.sort(key=lambda o: (_avail(o[2], dims), o[0]))
        if len(operands) == 1 and eq.role == "tiles":
            return operands[0][1], operands[0][2]
        return _chain(eq.result, p, (), [(o[1], o[2], o[3]) for o in operands], fold, deadline)

    def _chain(target, p, lane, items, fold, deadline):
        """Fold ``items`` (value, time, source) one per step into one cell."""
        if len(items) == 1:
            val, t, src = items[0]
            e = min(shift_inner(_avail(t, dims), 1), deadline)
            events.append(Event(e, "accumulate", target, p, lane, (src,), 0))
            return val, e
        (v1, t1, s1), (v2, t2, s2) = items[0], items[1]
        e = min(shift_inner(_later(_avail(t1, dims), _avail(t2, dims)), 1), deadline)
        events.append(Event(e, "accumulate", target, p, lane, (s1, s2), 1))
        acc = fold(v1, v2)
        for v, t, s in items[2:]:
            e = min(_later(shift_inner(e, 1), shift_inner(_avail(t, dims), 1)), deadline)
            events.append(Event(e, "accumulate", target, p, lane, (s,), 1))
            acc = fold(acc, v)
        return acc, e

    def _boxwise(eq, p, operands, fold, deadline):
        if len(operands) == 1:
            return operands[0][1], operands[0][2]
        # partials keyed by the (shrinking) body coordinates; the last dimension goes first
        partial = {o[0]: (o[1], o[2], o[3]) for o in operands}
        width = len(operands[0][0])
        for k in range(width - 1, -1, -1):
            groups: dict[tuple, list] = {}
            for key in sorted(partial):
                groups.setdefault(key[:k], []).append(partial[key])
            partial = {}
            for lane, items in groups.items():
                if len(items) == 1:
                    partial[lane] = items[0]
                    continue
                val, t = _chain(eq.result, p, lane, items, fold, deadline)
                partial[lane] = (val, t, Source(eq.result, p, lane, t))
        val, t, _ = partial[()]
        return val, t

    for v in program.variables:
        for p in v.domain.enumerate(params):
            get(v.name, p)
    trace = MachineTrace(events, values, produced)
    trace.sort()
    return trace


def _avail(t: TimeVector | None, dims: int) -> TimeVector:
    # inputs nobody schedules are ready at step 0 for placement purposes
    return (0,) * dims if t is None else t


# ---------------------------------------------------------------- checks


def check_exclusive_writes(trace: MachineTrace) -> list[Violation]:
    cells: dict[tuple, list[int]] = {}
    for n, e in enumerate(trace.events):
        cells.setdefault((e.time,) + e.cell(), []).append(n)
    out = []
    for (time, target, point, lane), ids in sorted(cells.items()):
        if len(ids) > 1:
            where = f" lane {lane}" if lane else ""
            out.append(
                Violation("concurrent-write", time, target, point, tuple(ids), f"{len(ids)} writes{where}")
            )
    return out


def check_causality(trace: MachineTrace, schedule=None) -> list[Violation]:
    """Every read must come at least the producer's latency after the value exists.

    Inputs that no schedule covers are treated as always available.
    """
    out = []
    for n, e in enumerate(trace.events):
        for s in e.sources:
            if s.time is None:
                continue
            need = shift_inner(s.time, e.latency if e.kind == "compute" else 1)
            if e.time < need:
                out.append(
                    Violation(
                        "causality",
                        e.time,
                        e.target,
                        e.point,
                        (n,),
                        f"reads {s.var}{s.point} produced at {s.time}, ready at {need}",
                    )
                )
    return out


def check_fan_in(trace: MachineTrace) -> list[Violation]:
    out = []
    for n, e in enumerate(trace.events):
        if e.ops > 1 or (e.kind == "accumulate" and len(e.sources) > 2):
            out.append(Violation("fan-in", e.time, e.target, e.point, (n,), f"{e.ops} operations"))
    return out


def all_violations(trace: MachineTrace) -> list[Violation]:
    return check_exclusive_writes(trace) + check_causality(trace) + check_fan_in(trace)


def work_per_owner(trace: MachineTrace, names: Iterable[str], width: int) -> dict[Point, int]:
    """Total fold operations spent on each result point, across its partial variables."""
    names = set(names)
    out: dict[Point, int] = {}
    for e in trace.events:
        if e.target in names:
            z = e.point[:width]
            out[z] = out.get(z, 0) + e.ops
    return out


def value_mismatches(trace: MachineTrace, expected: Mapping[str, Mapping[Point, int]], names: Iterable[str]) -> list[str]:
    out = []
    for name in names:
        got = trace.values.get(name, {})
        for p, v in expected[name].items():
            if got.get(p) != v:
                out.append(f"{name}{p}: simulated {got.get(p)}, expected {v}")
    return out
