import re

from redsched.pipeline import RunConfig, run
from redsched.sare import parse_program
from redsched.svg import render_all, render_variable


def _plots(program, n, regime, lam, **kw):
    res = run(program, RunConfig({"N": n}, regime, lam, **kw))
    return res, render_all(res.rewritten, res.schedule, {"N": n}, res.decomps, res.tilings)


def test_triangle_plot_counts(fixture_program):
    _, plots = _plots(fixture_program("triangle.sare"), 9, "gupta", "(i,j->i)")
    (plot,) = plots.plots
    assert plot.var == "R"
    assert len(re.findall(r'class="point"', plot.svg)) == 55
    assert len(re.findall(r'class="slice"', plot.svg)) == 10
    assert plot.tiles == 0
    assert plot.svg.startswith("<svg") and plot.svg.rstrip().endswith("</svg>")


def test_tile_outlines_on_multiples(fixture_program):
    res, plots = _plots(fixture_program("square.sare"), 9, "tiled", "(i,j->i)", tile_size=3)
    body = next(p for p in plots.plots if p.var == "R")
    assert body.tiles == 30
    starts = sorted({tl.box.lower[1] for _, tiles in res.tilings[0].tiles for tl in tiles})
    assert starts == [0, 3, 6]


def test_colour_follows_time(fixture_program):
    _, plots = _plots(fixture_program("triangle.sare"), 3, "gupta", "(i,j->i)")
    svg = plots.plots[0].svg
    by_row = {}
    for fill, i in re.findall(r'fill="(#[0-9a-f]{6})" stroke="black"[^>]*><title>R\((\d+),\d+\)', svg):
        by_row.setdefault(i, set()).add(fill)
    assert all(len(v) == 1 for v in by_row.values())
    assert len({next(iter(v)) for v in by_row.values()}) == 4


def test_three_dimensional_variables_are_skipped():
    prog = parse_program(
        "param N;\ninput A {i,j,k | 0<=i and i<=N and 0<=j and j<=N and 0<=k and k<=N};\n"
        "var X {};\nX() = reduce(+, (i,j,k -> ), A(i,j,k));\n"
    )
    plots = render_all(prog, None, {"N": 1})
    assert plots.plots == []
    assert plots.notices and "A" in plots.notices[0]


def test_unscheduled_points_are_grey(fixture_program):
    plot = render_variable(fixture_program("triangle.sare"), "R", None, {"N": 2})
    assert plot.points == 6
    assert plot.svg.count("unscheduled") == 6


def test_rendering_is_deterministic(fixture_program):
    _, a = _plots(fixture_program("square.sare"), 4, "tiled", "(i,j->i)", tile_size=2)
    _, b = _plots(fixture_program("square.sare"), 4, "tiled", "(i,j->i)", tile_size=2)
    assert [p.svg for p in a.plots] == [p.svg for p in b.plots]
