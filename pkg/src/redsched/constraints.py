"""Scheduling constraint systems.

Constraints are instantiated at one concrete parameter binding.  Each one
states that a vector of linear expressions over the template unknowns is
lexicographically non-negative, and remembers which recurrence rule and
which (z_X, t, b) instance produced it.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .affine import AffineFunction, Point, TimeVector, _bind
from .decomposition import SliceDecomposition, TileDecomposition
from .sare import Program, PointwiseEquation, ReduceEquation, accesses, dependences, reduction_fibers

MAX_TIME_DIMS = 2
ORIGINS = frozenset({"2", "3", "7", "8", "9", "10", "15", "16", "19", "20", "21", "22", "23", "24"})


class ConstraintError(ValueError):
    pass


# ---------------------------------------------------------------- linear expressions


@dataclass(frozen=True)
class LinearExpr:
    coeffs: tuple[tuple[str, int], ...] = ()
    constant: int = 0

    @classmethod
    def of(cls, coeffs: Mapping[str, int] | None = None, constant: int = 0) -> "LinearExpr":
        items = tuple(sorted((k, v) for k, v in (coeffs or {}).items() if v))
        return cls(items, constant)

    def as_dict(self) -> dict[str, int]:
        return dict(self.coeffs)

    def __add__(self, other) -> "LinearExpr":
        if isinstance(other, int):
            return LinearExpr(self.coeffs, self.constant + other)
        acc = self.as_dict()
        for k, v in other.coeffs:
            acc[k] = acc.get(k, 0) + v
        return LinearExpr.of(acc, self.constant + other.constant)

    __radd__ = __add__

    def __neg__(self) -> "LinearExpr":
        return LinearExpr(tuple((k, -v) for k, v in self.coeffs), -self.constant)

    def __sub__(self, other) -> "LinearExpr":
        return self + (-other)

    def value(self, assignment: Mapping[str, int]) -> int:
        return self.constant + sum(v * assignment[k] for k, v in self.coeffs)

    def unknowns(self) -> set[str]:
        return {k for k, _ in self.coeffs}

    def __str__(self):
        from .affine import format_linear

        return format_linear(dict(self.coeffs), self.constant)


TimeExpr = tuple[LinearExpr, ...]


def vec_sub(a: TimeExpr, b: TimeExpr) -> TimeExpr:
    return tuple(x - y for x, y in zip(a, b))


def vec_shift(a: TimeExpr, k: int) -> TimeExpr:
    """Add ``k`` to the innermost component."""
    return a[:-1] + (a[-1] + k,)


def const_vec(values: Sequence[int]) -> TimeExpr:
    return tuple(LinearExpr((), v) for v in values)


def lex_nonneg(values: Sequence[int]) -> bool:
    for v in values:
        if v != 0:
            return v > 0
    return True


# ---------------------------------------------------------------- templates


@dataclass(frozen=True)
class ScheduleTemplate:
    """Unknown affine schedule of one variable."""

    var: str
    index_names: tuple[str, ...]
    param_names: tuple[str, ...]
    dims: int

    @property
    def columns(self) -> tuple[str, ...]:
        return self.index_names + self.param_names + ("1",)

    def unknown(self, row: int, col: str) -> str:
        return f"{self.var}[{row}][{col}]"

    @property
    def unknowns(self) -> list[str]:
        return [self.unknown(r, c) for r in range(self.dims) for c in self.columns]

    def at(self, point: Point, params: Mapping[str, int]) -> TimeExpr:
        vals = tuple(point) + _bind(self.param_names, params) + (1,)
        return tuple(
            LinearExpr.of({self.unknown(r, c): v for c, v in zip(self.columns, vals)}) for r in range(self.dims)
        )

    def instantiate(self, assignment: Mapping[str, int]) -> AffineFunction:
        n = len(self.index_names) + len(self.param_names)
        rows = [[assignment.get(self.unknown(r, c), 0) for c in self.columns[:n]] for r in range(self.dims)]
        const = [assignment.get(self.unknown(r, "1"), 0) for r in range(self.dims)]
        return AffineFunction.build(self.index_names, self.param_names, rows, const)


@dataclass
class ScheduleSpace:
    """Which variables get unknown schedules and which are pinned."""

    dims: int
    templates: dict[str, ScheduleTemplate] = field(default_factory=dict)
    fixed: dict[str, AffineFunction] = field(default_factory=dict)
    points: dict[str, list[Point]] = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.dims <= MAX_TIME_DIMS:
            raise ConstraintError(f"time dimensionality must be 1..{MAX_TIME_DIMS}")

    def add_template(self, var: str, index_names, param_names, points) -> ScheduleTemplate:
        if var in self.fixed:
            raise ConstraintError(f"{var} already has a fixed schedule")
        tpl = ScheduleTemplate(var, tuple(index_names), tuple(param_names), self.dims)
        self.templates[var] = tpl
        self.points[var] = sorted(points)
        return tpl

    def fix(self, var: str, fn: AffineFunction, points=()):
        if var in self.templates:
            raise ConstraintError(f"{var} already has a template")
        self.fixed[var] = fn.pad_rows(self.dims)
        self.points[var] = sorted(points)

    def scheduled(self, var: str) -> bool:
        return var in self.templates or var in self.fixed

    def time(self, var: str, point: Point, params: Mapping[str, int]) -> TimeExpr:
        if var in self.templates:
            return self.templates[var].at(point, params)
        if var in self.fixed:
            return const_vec(self.fixed[var](point, params))
        # unscheduled inputs count as available at step 0
        return const_vec((0,) * self.dims)

    @property
    def unknowns(self) -> list[str]:
        return [u for t in self.templates.values() for u in t.unknowns]


# ---------------------------------------------------------------- constraint systems


@dataclass(frozen=True)
class LexConstraint:
    """``expr`` is lexicographically >= 0."""

    origin: str
    instance: tuple[tuple[str, tuple[int, ...]], ...]
    expr: TimeExpr
    note: str = ""
    # the (variable, point) whose times the two sides are, when a side is one point's time
    refs: tuple = (None, None)

    def holds(self, assignment: Mapping[str, int]) -> bool:
        return lex_nonneg([e.value(assignment) for e in self.expr])

    def describe(self) -> str:
        inst = ", ".join(f"{k}={v}" for k, v in self.instance)
        body = "(" + ", ".join(str(e) for e in self.expr) + ") >= 0"
        return f"[{self.origin}] {inst}: {body}" + (f"  # {self.note}" if self.note else "")

    def to_json(self) -> dict:
        return {
            "origin": self.origin,
            "instance": {k: list(v) for k, v in self.instance},
            "rows": [{"coeffs": e.as_dict(), "constant": e.constant} for e in self.expr],
            "note": self.note,
            "refs": [None if r is None else [r[0], list(r[1])] for r in self.refs],
        }

    @classmethod
    def from_json(cls, d: dict) -> "LexConstraint":
        expr = tuple(LinearExpr.of({k: int(v) for k, v in r["coeffs"].items()}, int(r["constant"])) for r in d["rows"])
        inst = tuple((k, tuple(v)) for k, v in d.get("instance", {}).items())
        refs = tuple(None if r is None else (r[0], tuple(r[1])) for r in d.get("refs", (None, None)))
        return cls(d["origin"], inst, expr, d.get("note", ""), refs)


@dataclass
class ConstraintSystem:
    space: ScheduleSpace
    params: dict[str, int]
    constraints: list[LexConstraint] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    def add(self, origin: str, lhs: TimeExpr, rhs: TimeExpr, note: str = "", refs=(None, None), **instance):
        """Record lhs >= rhs (lexicographically)."""
        if origin not in ORIGINS:
            raise ConstraintError(f"unknown origin tag {origin!r}")
        inst = tuple((k, tuple(v)) for k, v in instance.items())
        self.constraints.append(LexConstraint(origin, inst, vec_sub(lhs, rhs), note, tuple(refs)))

    def extend(self, other: "ConstraintSystem") -> "ConstraintSystem":
        if other.space is not self.space:
            raise ConstraintError("cannot merge systems over different schedule spaces")
        self.constraints.extend(other.constraints)
        self.flags.extend(other.flags)
        return self

    def origins(self) -> set[str]:
        return {c.origin for c in self.constraints}

    def by_origin(self, origin: str) -> list[LexConstraint]:
        return [c for c in self.constraints if c.origin == origin]

    def check_unknowns(self):
        declared = set(self.space.unknowns)
        for c in self.constraints:
            for e in c.expr:
                missing = e.unknowns() - declared
                if missing:
                    raise ConstraintError(f"constraint {c.describe()} uses undeclared {sorted(missing)}")

    def to_json(self) -> dict:
        return {
            "params": dict(sorted(self.params.items())),
            "time_dims": self.space.dims,
            "unknowns": self.space.unknowns,
            "fixed": {k: v.to_text() for k, v in sorted(self.space.fixed.items())},
            # a list, since the unknown order follows template order
            "templates": [
                {"var": k, "indices": list(t.index_names), "params": list(t.param_names)}
                for k, t in self.space.templates.items()
            ],
            "points": {k: [list(p) for p in v] for k, v in self.space.points.items()},
            "flags": list(self.flags),
            "constraints": [c.to_json() for c in self.constraints],
        }

    @classmethod
    def from_json(cls, d: dict) -> "ConstraintSystem":
        from .sare import parse_affine_map

        try:
            params = {k: int(v) for k, v in d["params"].items()}
            space = ScheduleSpace(int(d["time_dims"]))
            points = {k: [tuple(p) for p in v] for k, v in d.get("points", {}).items()}
            for var, text in d.get("fixed", {}).items():
                space.fix(var, parse_affine_map(text, tuple(params)), points.get(var, ()))
            for t in d["templates"]:
                space.add_template(t["var"], t["indices"], t["params"], points.get(t["var"], ()))
            cons = [LexConstraint.from_json(c) for c in d["constraints"]]
        except (AttributeError, KeyError, TypeError, ValueError) as exc:
            raise ConstraintError(f"malformed constraint system: {exc}") from exc
        system = cls(space, params, cons, list(d.get("flags", [])))
        if space.unknowns != list(d.get("unknowns", space.unknowns)):
            raise ConstraintError("malformed constraint system: unknown order does not match its templates")
        system.check_unknowns()
        return system


def unit(dims: int, k: int) -> TimeVector:
    """(0, ..., 0, k)."""
    return (0,) * (dims - 1) + (k,)


def _avail(space: ScheduleSpace, dec: SliceDecomposition, sl, params) -> TimeExpr:
    # every point of a slice shares one time, so the first point stands for it
    return space.time(dec.equation.body, sl.points[0], params)


# ---------------------------------------------------------------- emitters


def pram_constraints(program: Program, eq: ReduceEquation, space: ScheduleSpace, params) -> ConstraintSystem:
    """Unbounded fan-in: the result follows every operand by one step."""
    sys = ConstraintSystem(space, dict(params))
    fibers = reduction_fibers(program, eq, params, strict=False)
    for z_x, pts in sorted(fibers.items()):
        if not pts:
            sys.flags.append(f"{eq.result}{z_x} has an empty reduction domain")
            continue
        x = space.time(eq.result, z_x, params)
        for z_r in pts:
            r = space.time(eq.body, z_r, params)
            sys.add("3", x, vec_shift(r, 1), refs=((eq.result, z_x), (eq.body, z_r)), z_X=z_x, z_R=z_r)
    return sys


def gupta_constraints(dec: SliceDecomposition, space: ScheduleSpace, params, form: str = "reduced") -> ConstraintSystem:
    """Slice constraints.

    ``reduced`` bounds each partial by its slice size and the result by the
    slack of every slice; ``full`` chains the result one step after every
    partial instead of the slack bound; ``both`` emits all three families.
    """
    if form not in ("reduced", "full", "both"):
        raise ConstraintError(f"unknown form {form!r}")
    sys = ConstraintSystem(space, dict(params))
    X = dec.equation.result
    temp = dec.temp_name
    for sl in dec.all_slices():
        t = _avail(space, dec, sl, params)
        key, src = sl.owner + sl.time, (dec.equation.body, sl.points[0])
        x = space.time(X, sl.owner, params)
        tx = space.time(temp, key, params)
        sys.add("7", tx, vec_shift(t, sl.size), refs=((temp, key), src), z_X=sl.owner, t=sl.time)
        if form in ("full", "both"):
            sys.add("8", x, vec_shift(tx, 1), refs=((X, sl.owner), (temp, key)), z_X=sl.owner, t=sl.time)
        if form in ("reduced", "both"):
            sys.add("10", x, vec_shift(t, sl.size), "slack", refs=((X, sl.owner), src), z_X=sl.owner, t=sl.time)
    return sys


def exclusive_write_fix(dec: SliceDecomposition, space: ScheduleSpace, params) -> ConstraintSystem:
    """Leave enough steps to fold the slice partials one at a time."""
    sys = ConstraintSystem(space, dict(params))
    X = dec.equation.result
    for z_x in dec.owners():
        x = space.time(X, z_x, params)
        sys.add("15", x, const_vec(unit(space.dims, dec.size_prime(z_x))), "size'", refs=((X, z_x), None), z_X=z_x)
    return sys


def equitemporal_constraints(dec: SliceDecomposition, space: ScheduleSpace, params) -> ConstraintSystem:
    """When the body schedule is an unknown, pin every slice to one time step."""
    sys = ConstraintSystem(space, dict(params))
    body = dec.equation.body
    if body not in space.templates:
        return sys
    for sl in dec.all_slices():
        p0 = sl.points[0]
        first = space.time(body, p0, params)
        for p in sl.points[1:]:
            other = space.time(body, p, params)
            sys.add("7", other, first, "equitemporal", refs=((body, p), (body, p0)), z_X=sl.owner, t=sl.time, p=p)
            sys.add("7", first, other, "equitemporal", refs=((body, p0), (body, p)), z_X=sl.owner, t=sl.time, p=p)
    return sys


def tiled_constraints(tdec: TileDecomposition, space: ScheduleSpace, params) -> ConstraintSystem:
    dec = tdec.slices
    sys = ConstraintSystem(space, dict(params))
    X, temp, tile = dec.equation.result, dec.temp_name, tdec.tile_name
    s = tdec.tile_size
    by_slice = tdec.by_slice
    for sl in dec.all_slices():
        t = _avail(space, dec, sl, params)
        key, src = sl.owner + sl.time, (dec.equation.body, sl.points[0])
        tiles = by_slice[(sl.owner, sl.time)]
        tau = len(tiles)
        for tl in tiles:
            lam = space.time(tile, key + (tl.number,), params)
            cost = tdec.tile_cost(sl, tl)
            note = "full tile" if tl.full else "partial tile"
            sys.add("21", lam, vec_shift(t, cost), note, refs=((tile, key + (tl.number,)), src), z_X=sl.owner, t=sl.time, b=(tl.number,))
        span = tau + sl.dims * s
        tx = space.time(temp, key, params)
        sys.add("22", tx, vec_shift(t, span), refs=((temp, key), src), z_X=sl.owner, t=sl.time)
        x = space.time(X, sl.owner, params)
        sys.add("23", x, vec_shift(t, span), refs=((X, sl.owner), src), z_X=sl.owner, t=sl.time)
    for z_x in dec.owners():
        x = space.time(X, z_x, params)
        sys.add("24", x, const_vec(unit(space.dims, dec.size_prime(z_x))), "size'", refs=((X, z_x), None), z_X=z_x)
    return sys


def pointwise_constraints(program: Program, space: ScheduleSpace, params) -> ConstraintSystem:
    """Causality for pointwise equations, plus non-negative start for scheduled inputs."""
    sys = ConstraintSystem(space, dict(params))
    zero = const_vec((0,) * space.dims)
    for eq in program.equations:
        if not isinstance(eq, PointwiseEquation) or not space.scheduled(eq.result):
            continue
        for z in program.var(eq.result).domain.enumerate(params):
            lam = space.time(eq.result, z, params)
            for acc in accesses(eq.expr):
                src = acc.index_map(z, params)
                prod = space.time(acc.var, src, params)
                sys.add("2", lam, vec_shift(prod, eq.latency), f"reads {acc.var}", refs=((eq.result, z), (acc.var, src)), z=z, src=src)
    for v in program.inputs:
        if v.name in space.templates:
            for z in v.domain.enumerate(params):
                sys.add("2", space.time(v.name, z, params), zero, "input available", refs=((v.name, z), None), z=z)
    return sys


def slowdown(fn: AffineFunction, factor: int = 2) -> AffineFunction:
    """Stretch a schedule along its innermost dimension (a baseline remedy)."""
    return fn.scale_inner(factor)


# ---------------------------------------------------------------- condition checks


def check_conditions(dec: SliceDecomposition, times: Mapping[tuple[Point, TimeVector], TimeVector] | None = None) -> list[dict]:
    """Per result point: span T, slice count E, and the two feasibility tests.

    ``times`` maps (z_X, slice key) to the slice's actual availability;
    without it the slice keys themselves are used.
    """
    out = []
    for z_x, group in dec.slices:
        actual = [tuple((times or {}).get((z_x, sl.time), sl.time)) for sl in group]
        inner = [a[-1] for a in actual]
        T = max(inner) - min(inner) + 1
        hyper = len(set(actual))
        size_p = dec.size_prime(z_x)
        out.append(
            {
                "z_X": list(z_x),
                "first": min(inner),
                "last": max(inner),
                "T": T,
                "E": len(group),
                "hyperplanes": hyper,
                "size_prime": size_p,
                "span_ok": T + 1 > size_p,
                "write_ok": hyper + 1 > size_p,
            }
        )
    return out


@dataclass(frozen=True)
class SlackEntry:
    z_x: Point
    t: TimeVector
    slack: TimeVector
    size: int
    satisfied: bool


def slack_satisfied(slack: Sequence[int], size: int) -> bool:
    """The leading nonzero outer component decides; with none, the innermost must cover ``size``."""
    for v in slack[:-1]:
        if v:
            return v > 0
    return slack[-1] >= size


def slack_report(dec: SliceDecomposition, time_of: Callable[[str, Point], TimeVector]) -> list[SlackEntry]:
    out = []
    X, body = dec.equation.result, dec.equation.body
    for sl in dec.all_slices():
        x = time_of(X, sl.owner)
        t = time_of(body, sl.points[0])
        sk = tuple(a - b for a, b in zip(x, t))
        out.append(SlackEntry(sl.owner, sl.time, sk, sl.size, slack_satisfied(sk, sl.size)))
    return out


# ---------------------------------------------------------------- tiling legality

Theta = Callable[[Point, Mapping[str, int]], Sequence[int]]


@dataclass(frozen=True)
class LegalityWitness:
    consumer: str
    producer: str
    consumer_point: Point
    producer_point: Point
    difference: tuple[int, ...]

    def __str__(self):
        return (
            f"{self.consumer}{self.consumer_point} <- {self.producer}{self.producer_point}: "
            f"theta difference {self.difference}"
        )


def tiling_legality(program: Program, thetas: Mapping[str, Theta], params, deps=None) -> tuple[bool, list[LegalityWitness]]:
    """Every non-reduction dependence must cross the tiling hyperplanes forwards."""
    deps = dependences(program) if deps is None else deps
    witnesses = []
    for dep in deps:
        if dep.kind == "reduction":
            continue
        if dep.consumer not in thetas or dep.producer not in thetas:
            raise ConstraintError(f"no tiling function for {dep.consumer} or {dep.producer}")
        th_c, th_p = thetas[dep.consumer], thetas[dep.producer]
        for z in program.var(dep.consumer).domain.enumerate(params):
            src = dep.index_map(z, params)
            diff = tuple(a - b for a, b in zip(th_c(z, params), th_p(src, params)))
            if any(v < 0 for v in diff):
                witnesses.append(LegalityWitness(dep.consumer, dep.producer, z, tuple(src), diff))
    return not witnesses, witnesses


def slice_tiling_legal(program: Program, tdec: TileDecomposition, params) -> tuple[bool, list[LegalityWitness]]:
    """Orthogonal tiling of every slice, checked against dependences inside a slice."""
    dec = tdec.slices
    body = dec.equation.body
    where: dict[Point, tuple] = {}
    for (z_x, t), tiles in tdec.tiles:
        for tl in tiles:
            for p in tl.points:
                where[p] = (z_x, t, tl.coords)
    theta = lambda p, _params: where[tuple(p)][2]
    witnesses = []
    for dep in dependences(program):
        if dep.kind == "reduction" or dep.consumer != body or dep.producer != body:
            continue
        for z in program.var(body).domain.enumerate(params):
            src = tuple(dep.index_map(z, params))
            if z not in where or src not in where or where[z][:2] != where[src][:2]:
                continue
            a, b = theta(z, params), theta(src, params)
            diff = tuple(x - y for x, y in zip(a, b))
            if any(v < 0 for v in diff):
                witnesses.append(LegalityWitness(body, body, z, src, diff))
    return not witnesses, witnesses
