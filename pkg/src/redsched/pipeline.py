"""End-to-end runs: decompose, constrain, solve, rewrite, simulate."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from typing import Mapping

from .affine import AffineFunction
from .constraints import (
    ConstraintSystem,
    ScheduleSpace,
    check_conditions,
    equitemporal_constraints,
    exclusive_write_fix,
    gupta_constraints,
    pointwise_constraints,
    pram_constraints,
    slack_report,
    tiled_constraints,
)
from .decomposition import SliceDecomposition, TileDecomposition, rewrite_program, slice_reduction, tile_slices
from .sare import Program, parse_affine_map, parse_program, reduction_fibers
from .simulator import (
    MachineTrace,
    all_violations,
    make_inputs,
    oracle,
    simulate,
    value_mismatches,
    work_per_owner,
)
from .solver import Schedule, SolveResult, TileSizeChoice, optimize_tile_size, solve, verify

REGIMES = ("pram", "gupta", "fixed", "tiled")
MODES = ("fixed", "joint")


class PipelineError(ValueError):
    pass


@dataclass
class RunConfig:
    params: dict[str, int]
    regime: str = "fixed"
    lambda_r: str | dict[str, str] | None = None  # None searches candidate normals
    lambda_mode: str = "fixed"
    tile_size: int | str | None = None  # int, "auto" or None
    bound: int = 8
    seed: int = 42
    form: str = "reduced"

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise PipelineError(f"unknown regime {self.regime!r}; choose from {', '.join(REGIMES)}")
        if self.lambda_mode not in MODES:
            raise PipelineError(f"unknown lambda mode {self.lambda_mode!r}")
        if self.regime == "tiled" and self.tile_size is None:
            raise PipelineError("the tiled regime needs a tile size or 'auto'")
        if isinstance(self.tile_size, int) and self.tile_size < 1:
            raise PipelineError("tile size must be at least 1")
        if self.bound < 1:
            raise PipelineError("coefficient bound must be at least 1")

    def to_json(self) -> dict:
        return {
            "params": dict(sorted(self.params.items())),
            "regime": self.regime,
            "lambda_r": self.lambda_r,
            "lambda_mode": self.lambda_mode,
            "tile_size": self.tile_size,
            "bound": self.bound,
            "seed": self.seed,
            "form": self.form,
        }

    @classmethod
    def from_json(cls, d: dict) -> "RunConfig":
        return cls(
            {k: int(v) for k, v in d["params"].items()}, d["regime"], d.get("lambda_r"), d.get("lambda_mode", "fixed"),
            d.get("tile_size"), int(d.get("bound", 8)), int(d.get("seed", 42)), d.get("form", "reduced"),
        )


@dataclass
class PipelineResult:
    config: RunConfig
    program: Program
    rewritten: Program
    lambdas: dict[str, AffineFunction]
    decomps: list[SliceDecomposition]
    tilings: list[TileDecomposition]
    tile_choices: dict[str, TileSizeChoice]
    system: ConstraintSystem
    result: SolveResult
    verified: bool = False
    failed: str = ""
    conditions: dict[str, list] = field(default_factory=dict)
    slack: dict[str, list] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.result.ok

    @property
    def schedule(self) -> Schedule | None:
        return self.result.schedule

    def report(self) -> dict:
        out = {
            "config": self.config.to_json(),
            "status": self.result.status,
            "message": self.result.message,
            "lambda_r": {k: v.to_text() for k, v in sorted(self.lambdas.items())},
            "verified": self.verified,
            "failed_constraint": self.failed,
            "constraints": len(self.system.constraints),
            "flags": list(self.system.flags),
            "tile_size": {k: v.to_json() for k, v in sorted(self.tile_choices.items())},
        }
        if self.schedule is not None:
            out["makespan"] = list(self.result.objective[0])
            out["schedule"] = {k: f.to_text() for k, f in sorted(self.schedule.functions.items())}
            out["conditions"] = self.conditions
            out["slack"] = {
                k: [
                    {"z_X": list(e.z_x), "t": list(e.t), "slack": list(e.slack), "size": e.size, "satisfied": e.satisfied}
                    for e in v
                ]
                for k, v in sorted(self.slack.items())
            }
        return out


def resolve_lambdas(program: Program, spec) -> dict[str, AffineFunction]:
    """One body schedule per reduction, keyed by the reduction's result."""
    out = {}
    for eq in program.reduce_equations:
        text = spec.get(eq.result) if isinstance(spec, Mapping) else spec
        if text is None:
            raise PipelineError(f"no body schedule given for {eq.result}")
        fn = parse_affine_map(text, program.params) if isinstance(text, str) else text
        body = program.var(eq.body)
        if fn.n_in != body.dim:
            raise PipelineError(f"body schedule {fn} does not fit {eq.body} ({body.dim} indices)")
        if fn.n_out > 2:
            raise PipelineError("body schedules have at most 2 time dimensions")
        out[eq.result] = fn.rename(body.domain.index_names)
    return out


def candidate_normals(dim: int) -> list[tuple[int, ...]]:
    """Nonzero vectors over {-1, 0, 1}, simplest first."""
    vecs = [v for v in itertools.product((0, 1, -1), repeat=dim) if any(v)]
    return sorted(vecs, key=lambda v: (sum(map(abs, v)), [(x != 0, x < 0) for x in v][::-1]))


def _normal_map(body_names, params, normal) -> AffineFunction:
    return AffineFunction.build(body_names, params, [list(normal) + [0] * len(params)])


def run(program: Program, config: RunConfig) -> PipelineResult:
    if config.lambda_r is None:
        return search(program, config)
    lambdas = resolve_lambdas(program, config.lambda_r)
    return run_with(program, config, lambdas)


def search(program: Program, config: RunConfig) -> PipelineResult:
    """Try every candidate normal per reduction; keep the fastest feasible result."""
    options = []
    for eq in program.reduce_equations:
        body = program.var(eq.body)
        options.append(
            [(eq.result, _normal_map(body.domain.index_names, program.params, n)) for n in candidate_normals(body.dim)]
        )
    best = None
    for combo in itertools.product(*options):
        res = run_with(program, config, dict(combo))
        # a reversed normal only shifts every time below zero, so rank by elapsed steps
        key = (not res.ok, _latency(res) if res.ok else 0, res.result.objective if res.ok else ())
        if best is None or key < best[0]:
            best = (key, res)
    if best is None:
        raise PipelineError("program has no reductions to search body schedules for")
    return best[1]


def _latency(res: PipelineResult) -> int:
    """Outer time from the earliest scheduled point to the latest."""
    params = res.config.params
    times = [
        res.schedule.time(var, p, params)[0]
        for var, pts in res.system.space.points.items()
        if res.schedule.has(var)
        for p in pts
    ]
    return max(times) - min(times) if times else 0


def _template(space: ScheduleSpace, program: Program, name: str, params):
    v = program.var(name)
    # generated variables carry no parameters of their own but live in the same family
    space.add_template(name, v.domain.index_names, program.params, v.domain.enumerate(params))


@dataclass
class Prepared:
    """Everything a run builds before solving."""

    rewritten: Program
    decomps: list[SliceDecomposition]
    tilings: list[TileDecomposition]
    tile_choices: dict[str, TileSizeChoice]
    system: ConstraintSystem


def prepare(program: Program, config: RunConfig, lambdas: Mapping[str, AffineFunction]) -> Prepared:
    params = config.params
    missing = set(program.params) - set(params)
    if missing:
        raise PipelineError(f"unbound parameters: {', '.join(sorted(missing))}")
    extra = set(params) - set(program.params)
    if extra:
        raise PipelineError(f"unknown parameters: {', '.join(sorted(extra))}")
    dims = max([f.n_out for f in lambdas.values()] + [1])
    space = ScheduleSpace(dims)

    bodies = {}
    for eq in program.reduce_equations:
        if eq.result in lambdas:
            prev = bodies.get(eq.body)
            if prev is not None and prev != lambdas[eq.result]:
                raise PipelineError(f"{eq.body} is given two different body schedules")
            bodies[eq.body] = lambdas[eq.result]
    if config.lambda_mode == "fixed":
        for body, fn in bodies.items():
            space.fix(body, fn, program.var(body).domain.enumerate(params))

    decomps, tilings, choices = [], [], {}
    rewritten = program
    if config.regime != "pram":
        for eq in program.reduce_equations:
            if eq.result not in lambdas:
                raise PipelineError(f"no body schedule for {eq.result}")
            dec = slice_reduction(program, eq, lambdas[eq.result], params)
            decomps.append(dec)
            tdec = None
            if config.regime == "tiled":
                if config.tile_size == "auto":
                    if all(sl.dims == 0 for sl in dec.all_slices()):
                        # nothing to balance on point slices; unit tiles add nothing
                        s = 1
                    else:
                        choice = optimize_tile_size(dec)
                        choices[eq.result] = choice
                        s = choice.s
                else:
                    s = int(config.tile_size)
                tdec = tile_slices(dec, s)
                tilings.append(tdec)
            rewritten = rewrite_program(rewritten, dec, tdec)

    for v in rewritten.variables:
        if space.scheduled(v.name):
            continue
        if not v.is_input or (v.name in bodies and config.lambda_mode == "joint"):
            _template(space, rewritten, v.name, params)
    # partial variables that the rewrite left out still carry constraints
    for dec in decomps:
        if not space.scheduled(dec.temp_name):
            pts = [sl.owner + sl.time for sl in dec.all_slices()]
            names = tuple(f"z{k}" for k in range(len(dec.result_names))) + tuple(f"t{k}" for k in range(dec.time_dims))
            space.add_template(dec.temp_name, names, program.params, pts)
    for tdec in tilings:
        if not space.scheduled(tdec.tile_name):
            dec = tdec.slices
            pts = [z + t + (tl.number,) for (z, t), tiles in tdec.tiles for tl in tiles]
            names = tuple(f"z{k}" for k in range(len(dec.result_names))) + tuple(f"t{k}" for k in range(dec.time_dims)) + ("b",)
            space.add_template(tdec.tile_name, names, program.params, pts)

    system = pointwise_constraints(rewritten, space, params)
    if config.regime == "pram":
        for eq in program.reduce_equations:
            system.extend(pram_constraints(program, eq, space, params))
    for k, dec in enumerate(decomps):
        system.extend(equitemporal_constraints(dec, space, params))
        if config.regime == "tiled":
            system.extend(tiled_constraints(tilings[k], space, params))
        else:
            system.extend(gupta_constraints(dec, space, params, config.form))
            if config.regime == "fixed":
                system.extend(exclusive_write_fix(dec, space, params))
    system.check_unknowns()
    return Prepared(rewritten, decomps, tilings, choices, system)


def run_with(program: Program, config: RunConfig, lambdas: Mapping[str, AffineFunction]) -> PipelineResult:
    params = config.params
    prep = prepare(program, config, lambdas)
    decomps = prep.decomps
    result = solve(prep.system, config.bound)
    res = PipelineResult(
        config, program, prep.rewritten, dict(lambdas), decomps, prep.tilings, prep.tile_choices, prep.system, result
    )
    system = prep.system
    if result.ok:
        sched = result.schedule
        sched.meta = {"config": config.to_json(), "lambda_r": {k: v.to_text() for k, v in sorted(lambdas.items())}}
        ok, bad = verify(sched, system)
        res.verified, res.failed = ok, (bad.describe() if bad else "")
        for dec in decomps:
            X = dec.equation.result

            def time_of(var, p, _s=sched):
                return _s.time(var, p, params)

            times = {(sl.owner, sl.time): time_of(dec.equation.body, sl.points[0]) for sl in dec.all_slices()}
            res.conditions[X] = check_conditions(dec, times)
            res.slack[X] = slack_report(dec, time_of)
    return res


# ---------------------------------------------------------------- simulation


@dataclass
class SimulationReport:
    trace: MachineTrace
    violations: list
    mismatches: list[str]
    work: dict[str, dict]  # per original reduction: z_X -> (ops, |P| - 1)

    @property
    def clean(self) -> bool:
        return not self.violations and not self.mismatches

    @property
    def work_ok(self) -> bool:
        return all(ops == need for per in self.work.values() for ops, need in per.values())

    def to_json(self) -> dict:
        return {
            "violations": [v.to_json() for v in self.violations],
            "mismatches": self.mismatches,
            "work": {
                k: [{"z_X": list(z), "ops": ops, "expected": need} for z, (ops, need) in sorted(v.items())]
                for k, v in sorted(self.work.items())
            },
            "clean": self.clean,
        }


def simulate_result(program: Program, rewritten: Program, schedule: Schedule, params, seed: int = 42) -> SimulationReport:
    inputs = make_inputs(program, params, seed)
    trace = simulate(rewritten, schedule, params, inputs)
    expected = oracle(program, params, inputs)
    names = [v.name for v in program.variables]
    mismatches = value_mismatches(trace, expected, names)
    work = {}
    for eq in program.reduce_equations:
        width = program.var(eq.result).dim
        partials = [eq.result, f"Temp{eq.result}", f"Tile_Temp{eq.result}"]
        got = work_per_owner(trace, partials, width)
        fib = reduction_fibers(program, eq, params)
        work[eq.result] = {z: (got.get(z, 0), len(pts) - 1) for z, pts in fib.items()}
    return SimulationReport(trace, all_violations(trace), mismatches, work)


def load_program(path) -> Program:
    try:
        with open(path) as fh:
            return parse_program(fh.read())
    except OSError as exc:
        raise PipelineError(f"cannot read {path}: {exc}") from exc


# ---------------------------------------------------------------- random corpus

SHAPES = {
    "triangle": "0<=j and j<=i and i<=N",
    "square": "0<=i and i<=N and 0<=j and j<=N",
    "band": "0<=i and i<=N and i<=j and j<=i+2",
}
PROJECTIONS = {"row": ("(i,j -> i)", "i", "0<=i and i<=N"), "col": ("(i,j -> j)", "j", None), "all": ("(i,j -> )", "", None)}


@dataclass(frozen=True)
class CorpusProgram:
    seed: int
    text: str
    params: dict
    lambdas: dict[str, str]
    mode: str  # computed bodies cannot be pinned, so their schedules are searched jointly

    @property
    def program(self) -> Program:
        return parse_program(self.text)


def random_program(seed: int) -> CorpusProgram:
    rng = random.Random(seed)
    shape = rng.choice(sorted(SHAPES))
    proj_kind = rng.choice(sorted(PROJECTIONS))
    op = rng.choice(["+", "max", "min"])
    N = rng.randint(1, 6)
    chain = rng.random() < 0.5
    second = rng.choice([None, "pointwise", "reduce"])
    body_dom = SHAPES[shape]
    lines = ["param N;", f"input A {{i,j | {body_dom}}};"]
    if chain:
        lines.append(f"var R {{i,j | {body_dom}}};")
        lines.append(f"R(i,j) = A(i,j) * {rng.randint(1, 3)} + {rng.randint(-2, 2)};")
        body = "R"
    else:
        body = "A"
    proj, idx, _ = PROJECTIONS[proj_kind]
    out_dom = _image_domain(shape, proj_kind)
    lines.append(f"var X {{{idx} | {out_dom}}};" if idx else "var X {};")
    lines.append(f"X({idx}) = reduce({op}, {proj}, {body}(i,j));")
    lam_axis = rng.choice(["i", "j", "i+j", "i-j"])
    lambdas = {"X": f"(i,j -> {lam_axis})"}
    if second == "pointwise":
        if idx:
            lines.append(f"var Y {{{idx} | {out_dom}}};")
            lines.append(f"Y({idx}) = X({idx}) + {rng.randint(-3, 3)};")
        else:
            lines.append("var Y {};")
            lines.append(f"Y() = X() * {rng.randint(1, 3)};")
    elif second == "reduce" and idx:
        op2 = rng.choice(["+", "max", "min"])
        lines.append("var Z {};")
        lines.append(f"Z() = reduce({op2}, ({idx} -> ), X({idx}));")
        lambdas["Z"] = f"({idx} -> {idx})"
    mode = "joint" if chain or "Z" in lambdas else "fixed"
    return CorpusProgram(seed, "\n".join(lines) + "\n", {"N": N}, lambdas, mode)


def _image_domain(shape: str, kind: str) -> str:
    if kind == "all":
        return ""
    if shape == "band" and kind == "col":
        return "0<=j and j<=N+2"
    return f"0<={'i' if kind == 'row' else 'j'} and {'i' if kind == 'row' else 'j'}<=N"
