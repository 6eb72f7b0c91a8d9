import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from redsched.constraints import (
    ORIGINS,
    ConstraintError,
    ConstraintSystem,
    LinearExpr,
    ScheduleSpace,
    check_conditions,
    lex_nonneg,
    slack_satisfied,
    slowdown,
    tiling_legality,
)
from redsched.decomposition import slice_reduction
from redsched.pipeline import RunConfig, prepare, resolve_lambdas
from redsched.sare import parse_affine_map


def _prep(program, regime, lam, n, **kw):
    config = RunConfig({"N": n}, regime, lam, **kw)
    return prepare(program, config, resolve_lambdas(program, lam))


@pytest.mark.parametrize(
    "regime, form, expected",
    [
        ("pram", "reduced", {"3"}),
        ("gupta", "reduced", {"7", "10"}),
        ("gupta", "full", {"7", "8"}),
        ("gupta", "both", {"7", "8", "10"}),
        ("fixed", "reduced", {"7", "10", "15"}),
    ],
)
def test_regimes_emit_their_tags(fixture_program, regime, form, expected):
    prep = _prep(fixture_program("triangle.sare"), regime, "(i,j->i)", 4, form=form)
    assert prep.system.origins() == expected


def test_tiled_regime_tags(fixture_program):
    prep = _prep(fixture_program("square.sare"), "tiled", "(i,j->i)", 5, tile_size=2)
    assert {"21", "22", "23", "24"} <= prep.system.origins() <= ORIGINS


def test_joint_mode_adds_equitemporal_rows(fixture_program):
    prep = _prep(fixture_program("triangle.sare"), "gupta", "(i,j->i)", 3, lambda_mode="joint")
    notes = {c.note for c in prep.system.by_origin("7")}
    assert "equitemporal" in notes
    assert "2" in prep.system.origins()


def test_slack_rows_on_triangle(fixture_program):
    prep = _prep(fixture_program("triangle.sare"), "gupta", "(i,j->i)", 3)
    rows = prep.system.by_origin("10")
    # lambda_X >= t + size for each row slice t; X is a scalar so only N and 1 appear
    consts = sorted(c.expr[0].constant for c in rows)
    assert consts == sorted(-(t + max(1, t)) for t in range(4))


def test_unknown_origin_rejected():
    space = ScheduleSpace(1)
    system = ConstraintSystem(space, {})
    with pytest.raises(ConstraintError):
        system.add("99", (LinearExpr.of(),), (LinearExpr.of(),))


def test_space_dimension_limits():
    with pytest.raises(ConstraintError):
        ScheduleSpace(3)


def test_conditions_on_triangle(fixture_program):
    program = fixture_program("triangle.sare")
    eq = program.reduce_equations[0]
    dec = slice_reduction(program, eq, parse_affine_map("(i,j->i)", ("N",)), {"N": 5})
    (c,) = check_conditions(dec)
    assert (c["T"], c["E"], c["size_prime"]) == (6, 6, 6)
    assert c["span_ok"] and c["write_ok"]


def test_conditions_flag_simultaneous_partials(fixture_program):
    program = fixture_program("rows.sare")
    eq = program.reduce_equations[0]
    dec = slice_reduction(program, eq, parse_affine_map("(i,j->j)", ("N",)), {"N": 3})
    # every partial available at the same step: more partials than distinct steps
    times = {(sl.owner, sl.time): (0,) for sl in dec.all_slices()}
    flags = {tuple(c["z_X"]): c["write_ok"] for c in check_conditions(dec, times)}
    assert flags[(0,)] and not flags[(3,)]


@pytest.mark.parametrize(
    "slack, size, ok",
    [((0, 3), 3, True), ((0, 2), 3, False), ((1, -5), 3, True), ((0, 0), 1, False), ((4,), 4, True), ((-1, 9), 1, False)],
)
def test_multidimensional_slack_rule(slack, size, ok):
    assert slack_satisfied(slack, size) is ok


@given(st.lists(st.integers(-3, 3), min_size=1, max_size=3))
def test_lex_nonneg_matches_tuple_order(vals):
    assert lex_nonneg(vals) == (tuple(vals) >= (0,) * len(vals))


def test_slowdown_scales_inner_row():
    fn = parse_affine_map("(i,j -> i, j+1)")
    assert slowdown(fn)((2, 3), {}) == (2, 8)


def test_backward_dependence_gets_witness(fixture_program):
    prog = fixture_program("backward.sare")
    back = parse_affine_map("(i -> -i)", ("N",))
    ok, witnesses = tiling_legality(prog, {"A": back, "B": back}, {"N": 3})
    assert not ok
    assert [(w.consumer_point, w.producer_point, w.difference) for w in witnesses] == [
        ((1,), (0,), (-1,)), ((2,), (1,), (-1,)), ((3,), (2,), (-1,)),
    ]
    fwd = parse_affine_map("(i -> i)", ("N",))
    assert tiling_legality(prog, {"A": fwd, "B": fwd}, {"N": 3}) == (True, [])


def test_missing_tiling_function(fixture_program):
    prog = fixture_program("backward.sare")
    with pytest.raises(ConstraintError):
        tiling_legality(prog, {"A": parse_affine_map("(i -> i)", ("N",))}, {"N": 3})


def test_system_json_round_trip(fixture_program):
    prep = _prep(fixture_program("square.sare"), "tiled", "(i,j->i)", 4, tile_size=2)
    data = json.loads(json.dumps(prep.system.to_json()))
    again = ConstraintSystem.from_json(data)
    assert again.to_json() == data
    assert [c.describe() for c in again.constraints] == [c.describe() for c in prep.system.constraints]


def test_malformed_system_json():
    with pytest.raises(ConstraintError):
        ConstraintSystem.from_json({"params": {}})
