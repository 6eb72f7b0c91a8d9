import pytest

from redsched.sare import (
    ParseError,
    SareError,
    check_accesses,
    dependences,
    format_program,
    parse_program,
    reduction_fibers,
)
from redsched.simulator import make_inputs, oracle

TRIANGLE = """
param N;
input R {i,j | 0<=j and j<=i and i<=N};
var X {i | 0<=i and i<=N};
X(i) = reduce(+, (i,j -> i), R(i,j));
"""


def test_fixtures_parse(fixture_program):
    for name in ("triangle.sare", "rows.sare", "square.sare", "backward.sare"):
        prog = fixture_program(name)
        assert prog.params == ("N",)


def test_reduction_fibers_of_triangle():
    prog = parse_program(TRIANGLE)
    fibers = reduction_fibers(prog, prog.reduce_equations[0], {"N": 3})
    assert {z: len(p) for z, p in fibers.items()} == {(0,): 1, (1,): 2, (2,): 3, (3,): 4}


def test_empty_fiber_is_reported():
    text = TRIANGLE.replace("var X {i | 0<=i and i<=N}", "var X {i | 0<=i and i<=N+1}")
    prog = parse_program(text)
    with pytest.raises(SareError, match="empty"):
        reduction_fibers(prog, prog.reduce_equations[0], {"N": 2})
    assert reduction_fibers(prog, prog.reduce_equations[0], {"N": 2}, strict=False)[(3,)] == []


def test_oracle_sums_rows():
    prog = parse_program(TRIANGLE + "init R(i,j) = j;\n")
    inputs = make_inputs(prog, {"N": 4}, seed=1)
    vals = oracle(prog, {"N": 4}, inputs)
    assert vals["X"] == {(i,): i * (i + 1) // 2 for i in range(5)}


@pytest.mark.parametrize("op, expected", [("max", 4), ("min", 0)])
def test_oracle_max_min(op, expected):
    prog = parse_program(TRIANGLE.replace("reduce(+", f"reduce({op}") + "init R(i,j) = j;\n")
    vals = oracle(prog, {"N": 4}, make_inputs(prog, {"N": 4}, 0))
    assert vals["X"][(4,)] == expected


def test_pointwise_chain_and_latency():
    text = """
param N;
input A {i | 0<=i and i<=N};
var B {i | 1<=i and i<=N};
B(i) = A(i-1) * 2 + (A(i) - 3) @latency 2;
"""
    prog = parse_program(text)
    assert prog.equation_for("B").latency == 2
    inputs = {"A": {(i,): i for i in range(4)}}
    assert oracle(prog, {"N": 3}, inputs)["B"] == {(1,): -2, (2,): 1, (3,): 4}
    kinds = {(d.consumer, d.producer, d.kind) for d in dependences(prog)}
    assert kinds == {("B", "A", "pointwise")}


@pytest.mark.parametrize(
    "text, needle",
    [
        ("param N;\nvar X {i | 0<=i and i<=N};\nX(i) = Y(i);", "unknown variable"),
        ("param N;\ninput A {i | 0<=i and i*i<=N};", "non-affine"),
        ("param N;\ninput A {i | 0<=i and i<=M};", "unknown index or parameter"),
        ("param N;\ninput A {i | 0<=i and i<=N};\nvar X {};\nX() = reduce(*, (i -> ), A(i));", "operator"),
        ("param N;\ninput A {i | 0<=i and i<=N};\nvar X {};\nX() = reduce(+, (i -> ), A(k));", "own indices"),
        ("param N;\ninput A {i | 0<=i and i<=N} ?", "unexpected character"),
        ("", "no program"),
    ],
)
def test_parse_errors(text, needle):
    with pytest.raises(ParseError, match=needle):
        parse_program(text)


def test_parse_error_carries_position():
    with pytest.raises(ParseError) as info:
        parse_program("param N;\ninput A {i | 0<=i and i<=Q};")
    assert info.value.line == 2


def test_out_of_domain_access_is_caught():
    prog = parse_program("param N;\ninput A {i | 0<=i and i<=N};\nvar B {i | 0<=i and i<=N};\nB(i) = A(i+1);")
    with pytest.raises(SareError):
        check_accesses(prog, {"N": 3})


def test_format_round_trip(fixture_program):
    for name in ("triangle.sare", "rows.sare", "square.sare", "backward.sare"):
        prog = fixture_program(name)
        again = parse_program(format_program(prog))
        assert format_program(again) == format_program(prog)
