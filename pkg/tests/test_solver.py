import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from redsched.constraints import ConstraintSystem, ScheduleSpace
from redsched.decomposition import slice_reduction
from redsched.pipeline import RunConfig, prepare, random_program, resolve_lambdas, run
from redsched.sare import parse_affine_map
from redsched.solver import (
    Schedule,
    SolverError,
    compile_system,
    exhaustive,
    optimize_tile_size,
    solve,
    value_order,
    verify,
)


def _system(program, regime, lam, n, **kw):
    config = RunConfig({"N": n}, regime, lam, **kw)
    return prepare(program, config, resolve_lambdas(program, lam)).system


def _two_cycle():
    space = ScheduleSpace(1)
    x = space.add_template("X", (), (), [()])
    y = space.add_template("Y", (), (), [()])
    system = ConstraintSystem(space, {})
    system.add("2", x.at((), {}), y.at((), {}) + (), note="x after y")
    system.add("2", y.at((), {}), (x.at((), {})[0] + 1,), note="y after x")
    return system


def test_value_order_is_by_magnitude_negative_first():
    assert value_order(-2, 2) == [0, -1, 1, -2, 2]
    assert value_order(1, 3) == [1, 2, 3]


@pytest.mark.parametrize("n", [3, 5, 8, 12])
def test_scalar_triangle_needs_two_n(fixture_program, n):
    res = solve(_system(fixture_program("triangle.sare"), "gupta", "(i,j->i)", n), 8)
    assert res.ok
    assert res.objective[0] == (2 * n,)
    assert res.schedule.functions["X"].to_text() == "( -> 2*N)"


def test_full_form_adds_one_step(fixture_program):
    res = solve(_system(fixture_program("triangle.sare"), "gupta", "(i,j->i)", 4, form="full"), 8)
    assert res.objective[0] == (9,)


def test_exclusive_write_fix_on_counter_example(fixture_program):
    prog = fixture_program("rows.sare")
    loose = solve(_system(prog, "gupta", "(i,j->j)", 3, lambda_mode="joint"), 8)
    tight = solve(_system(prog, "fixed", "(i,j->j)", 3, lambda_mode="joint"), 8)
    assert loose.schedule.functions["X"].to_text() == "(i -> 1)"
    assert tight.schedule.functions["X"].to_text() == "(i -> N+1)"
    assert tight.objective[0] == (4,)


def test_bound_exhaustion_is_distinguished(fixture_program):
    res = solve(_system(fixture_program("triangle.sare"), "gupta", "(i,j->i)", 3), 1)
    assert res.status == "bound-exhausted"
    assert "larger bound" in res.message


def test_true_infeasibility():
    res = solve(_two_cycle(), 4)
    assert res.status == "infeasible"
    assert exhaustive(_two_cycle(), 2).status == "infeasible"


def test_node_limit(fixture_program):
    system = _system(fixture_program("square.sare"), "tiled", "(i,j->i)", 6, tile_size=1)
    with pytest.raises(SolverError, match="nodes"):
        solve(system, 8, node_limit=1, method="bnb")


@pytest.mark.parametrize("method", ["bnb", "auto"])
@pytest.mark.parametrize(
    "name, regime, lam, n, kw",
    [
        ("triangle.sare", "gupta", "(i,j->i)", 3, {}),
        ("triangle.sare", "fixed", "(i,j->i)", 2, {"form": "both"}),
        ("rows.sare", "gupta", "(i,j->j)", 2, {"lambda_mode": "joint"}),
        ("rows.sare", "pram", "(i,j->j)", 3, {}),
        ("square.sare", "tiled", "(i,j->i)", 3, {"tile_size": 2}),
    ],
)
def test_search_equals_enumeration_on_fixtures(fixture_program, method, name, regime, lam, n, kw):
    system = _system(fixture_program(name), regime, lam, n, **kw)
    count = len(compile_system(system).unknowns)
    bound = max(b for b in range(1, 9) if (2 * b + 1) ** count <= 300_000 or b == 1)
    got, want = solve(system, bound, method=method), exhaustive(system, bound, limit=10**7)
    assert (got.status, got.objective) == (want.status, want.objective)
    if got.ok:
        assert got.schedule.functions == want.schedule.functions


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(seed=st.integers(0, 300), regime=st.sampled_from(["pram", "gupta", "fixed", "tiled"]), bound=st.integers(1, 2))
def test_search_equals_enumeration_on_random_programs(seed, regime, bound):
    cp = random_program(seed)
    config = RunConfig(cp.params, regime, cp.lambdas, cp.mode, "auto" if regime == "tiled" else None)
    system = prepare(cp.program, config, resolve_lambdas(cp.program, cp.lambdas)).system
    count = len(compile_system(system).unknowns)
    if (2 * bound + 1) ** count > 400_000:
        bound = 1
    if 3**count > 400_000:
        return
    want = exhaustive(system, bound, limit=10**6)
    for method in ("bnb", "auto"):
        got = solve(system, bound, method=method)
        assert (got.ok, got.objective) == (want.ok, want.objective)


def test_verify_reports_first_violation(fixture_program):
    system = _system(fixture_program("triangle.sare"), "gupta", "(i,j->i)", 3)
    res = solve(system, 8)
    ok, bad = verify(res.schedule, system)
    assert ok and bad is None
    early = Schedule(dict(res.schedule.functions, X=parse_affine_map("( -> N)", ("N",))))
    ok, bad = verify(early, system)
    assert not ok and bad.origin == "10"


def test_schedule_json_round_trip(fixture_program):
    res = solve(_system(fixture_program("square.sare"), "tiled", "(i,j->i)", 4, tile_size=2), 8)
    text = res.schedule.dumps()
    again = Schedule.loads(text)
    assert again.functions == res.schedule.functions
    assert again.objective == res.schedule.objective
    assert again.dumps() == text


@pytest.mark.parametrize("text", ["", "[]", "{\"variables\": 3}", "{\"variables\": {\"X\": {\"indices\": []}}}"])
def test_malformed_schedule(text):
    with pytest.raises(SolverError):
        Schedule.loads(text)


def test_slowed_schedule_doubles_inner_time(fixture_program):
    res = solve(_system(fixture_program("triangle.sare"), "gupta", "(i,j->i)", 3), 8)
    slow = res.schedule.slowed(2)
    assert slow.time("X", (), {"N": 3}) == (12,)
    assert slow.meta["slowdown"] == 2


def test_tile_size_choice_on_square(fixture_program):
    prog = fixture_program("square.sare")
    dec = slice_reduction(prog, prog.reduce_equations[0], parse_affine_map("(i,j->i)", ("N",)), {"N": 9})
    choice = optimize_tile_size(dec)
    assert (choice.s, choice.objective) == (3, 0)
    assert set(choice.omegas.values()) == {0}
    assert choice.to_json()["s"] == 3


def test_tile_size_choice_needs_extent(fixture_program):
    prog = fixture_program("rows.sare")
    dec = slice_reduction(prog, prog.reduce_equations[0], parse_affine_map("(i,j->j)", ("N",)), {"N": 3})
    with pytest.raises(SolverError, match="zero-dimensional"):
        optimize_tile_size(dec)


def test_pipeline_objective_is_stable(fixture_program):
    prog = fixture_program("square.sare")
    a = run(prog, RunConfig({"N": 5}, "tiled", "(i,j->i)", tile_size="auto"))
    b = run(prog, RunConfig({"N": 5}, "tiled", "(i,j->i)", tile_size="auto"))
    assert a.schedule.dumps() == b.schedule.dumps()
