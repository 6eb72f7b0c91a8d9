import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from redsched.pipeline import RunConfig, random_program, run, simulate_result
from redsched.simulator import (
    MachineTrace,
    SimulationError,
    check_causality,
    check_exclusive_writes,
    check_fan_in,
    make_inputs,
    simulate,
)
from redsched.solver import Schedule


def _run(program, regime, lam, n, **kw):
    res = run(program, RunConfig({"N": n}, regime, lam, **kw))
    assert res.ok and res.verified
    return res, simulate_result(program, res.rewritten, res.schedule, {"N": n})


@pytest.mark.parametrize("n", [2, 3, 7])
def test_gupta_schedule_writes_concurrently(fixture_program, n):
    _, sim = _run(fixture_program("rows.sare"), "gupta", "(i,j->j)", n, lambda_mode="joint")
    writes = [v for v in sim.violations if v.kind == "concurrent-write"]
    # every row with two or more partials collides once, at its first fold
    assert len(writes) == n - 1
    assert {v.target for v in writes} == {"X"}
    assert not sim.mismatches


@pytest.mark.parametrize("n", [2, 3, 7])
def test_fixed_schedule_is_clean(fixture_program, n):
    _, sim = _run(fixture_program("rows.sare"), "fixed", "(i,j->j)", n, lambda_mode="joint")
    assert sim.clean and sim.work_ok


@pytest.mark.parametrize("regime", ["gupta", "fixed"])
def test_pinned_body_times_do_not_collide(fixture_program, regime):
    # with R pinned to j the partials of a row arrive one step apart
    res, sim = _run(fixture_program("rows.sare"), regime, "(i,j->j)", 4)
    assert res.result.objective[0] == (5,)
    assert sim.clean


def test_reduced_form_drops_one_hop(fixture_program):
    _, reduced = _run(fixture_program("triangle.sare"), "gupta", "(i,j->i)", 4)
    _, full = _run(fixture_program("triangle.sare"), "gupta", "(i,j->i)", 4, form="full")
    assert [v.kind for v in reduced.violations] == ["causality"]
    assert full.violations == []


def test_tiled_square_is_clean(fixture_program):
    res, sim = _run(fixture_program("square.sare"), "tiled", "(i,j->i)", 9, tile_size="auto")
    assert sim.clean and sim.work_ok
    # folds are placed greedily, so the result may land before its deadline
    assert res.schedule.time("X", (), {"N": 9}) == (15,)
    assert max(e.time for e in sim.trace.events) <= (15,)


@pytest.mark.parametrize("seed", [2, 3])
def test_fix_is_not_sufficient_in_general(seed):
    # the exclusive-write fix leaves concurrent writes on these corpus programs
    cp = random_program(seed)
    res = run(cp.program, RunConfig(cp.params, "fixed", cp.lambdas, cp.mode))
    assert res.ok and res.verified
    sim = simulate_result(cp.program, res.rewritten, res.schedule, cp.params)
    assert any(v.kind == "concurrent-write" for v in sim.violations)
    assert not sim.mismatches and sim.work_ok


def test_band_counter_example_needs_one_more_step():
    cp = random_program(2)
    res = run(cp.program, RunConfig(cp.params, "fixed", cp.lambdas, cp.mode))
    x_time = max(res.schedule.time("X", p, cp.params) for p in cp.program.var("X").domain.enumerate(cp.params))
    sim = simulate_result(cp.program, res.rewritten, res.schedule, cp.params)
    clash = [v for v in sim.violations if v.kind == "concurrent-write"]
    assert x_time == (9,)
    assert all(v.time <= x_time for v in clash)


def test_trace_jsonl_round_trip(fixture_program):
    _, sim = _run(fixture_program("square.sare"), "tiled", "(i,j->i)", 4, tile_size=2)
    text = sim.trace.to_jsonl()
    again = MachineTrace.from_jsonl(text)
    assert again.to_jsonl() == text
    assert check_exclusive_writes(again) == check_exclusive_writes(sim.trace)
    assert check_fan_in(again) == []


@pytest.mark.parametrize("text", ["{}\n", "not json\n", "[1, 2]\n"])
def test_bad_trace_lines(text):
    with pytest.raises(SimulationError, match="line 1"):
        MachineTrace.from_jsonl(text)


def test_missing_schedule_is_an_error(fixture_program):
    prog = fixture_program("triangle.sare")
    with pytest.raises(SimulationError):
        simulate(prog, Schedule({}), {"N": 2}, make_inputs(prog, {"N": 2}, 0))


def test_inputs_are_seeded(fixture_program):
    prog = fixture_program("triangle.sare")
    assert make_inputs(prog, {"N": 3}, 5) == make_inputs(prog, {"N": 3}, 5)
    assert make_inputs(prog, {"N": 3}, 5) != make_inputs(prog, {"N": 3}, 6)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 500), regime=st.sampled_from(["pram", "gupta", "fixed", "tiled"]))
def test_values_match_and_fan_in_is_binary(seed, regime):
    cp = random_program(seed)
    res = run(cp.program, RunConfig(cp.params, regime, cp.lambdas, cp.mode, "auto" if regime == "tiled" else None))
    if not res.ok:
        return
    sim = simulate_result(cp.program, res.rewritten, res.schedule, cp.params, seed)
    assert not sim.mismatches
    assert check_fan_in(sim.trace) == []
    if regime != "pram":
        assert sim.work_ok
    assert check_causality(sim.trace) == [v for v in sim.violations if v.kind == "causality"]
