"""Iteration-space plots: one SVG per two-dimensional variable."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence
from xml.sax.saxutils import escape

from .decomposition import SliceDecomposition, TileDecomposition
from .sare import Program
from .solver import Schedule

CELL = 32
MARGIN = 48
RADIUS = 9
PAD = 13  # half-width of a slice band around its bounding box

# evenly spaced stops from a perceptually ordered ramp (dark blue to yellow)
RAMP = [
    (68, 1, 84), (72, 40, 120), (62, 74, 137), (49, 104, 142), (38, 130, 142),
    (31, 158, 137), (53, 183, 121), (110, 206, 88), (181, 222, 43), (253, 231, 37),
]
UNSCHEDULED = "#bbbbbb"


@dataclass
class Plot:
    var: str
    svg: str
    points: int
    bands: int
    tiles: int


@dataclass
class PlotSet:
    plots: list[Plot] = field(default_factory=list)
    notices: list[str] = field(default_factory=list)


def _colour(rank: int, n: int) -> str:
    if n <= 1:
        r, g, b = RAMP[0]
    else:
        x = rank * (len(RAMP) - 1) / (n - 1)
        k = min(int(x), len(RAMP) - 2)
        f = x - k
        lo, hi = RAMP[k], RAMP[k + 1]
        r, g, b = (round(a + (c - a) * f) for a, c in zip(lo, hi))
    return f"#{r:02x}{g:02x}{b:02x}"


def _fmt_time(t) -> str:
    return "(" + ",".join(str(v) for v in t) + ")"


def render_variable(
    program: Program,
    name: str,
    schedule: Schedule | None,
    params: Mapping[str, int],
    decomps: Sequence[SliceDecomposition] = (),
    tilings: Sequence[TileDecomposition] = (),
) -> Plot:
    var = program.var(name)
    if var.dim != 2:
        raise ValueError(f"{name} has {var.dim} index dimensions; only 2-D variables are plotted")
    pts = sorted(var.domain.enumerate(params))
    times = {}
    if schedule is not None and schedule.has(name):
        times = {p: tuple(schedule.time(name, p, params)) for p in pts}
    order = sorted(set(times.values()))
    rank = {t: k for k, t in enumerate(order)}

    if pts:
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    else:
        x0 = x1 = y0 = y1 = 0
    width = (x1 - x0) * CELL + 2 * MARGIN
    height = (y1 - y0) * CELL + 2 * MARGIN + 24

    # first index runs left to right, second bottom to top
    def px(p):
        return MARGIN + (p[0] - x0) * CELL, MARGIN + (y1 - p[1]) * CELL

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f"<title>{escape(name)}</title>",
        '<rect width="100%" height="100%" fill="white"/>',
    ]
    names = var.domain.index_names
    out.append(f'<text x="{MARGIN}" y="{height - 8}">{escape(name)}: {escape(names[0])} right, {escape(names[1])} up</text>')

    bands = 0
    for dec in decomps:
        if dec.equation.body != name:
            continue
        out.append(f'<g class="slices" data-reduction="{escape(dec.equation.result)}">')
        for sl in dec.all_slices():
            lo, hi = sl.box.lower, sl.box.upper
            ax, ay = px((lo[0], hi[1]))
            bx, by = px((hi[0], lo[1]))
            label = f"{dec.equation.result}{_fmt_time(sl.owner)} t={_fmt_time(sl.time)}"
            out.append(
                f'<rect class="slice" x="{ax - PAD}" y="{ay - PAD}" width="{bx - ax + 2 * PAD}" '
                f'height="{by - ay + 2 * PAD}" rx="{PAD}" fill="#4477aa" fill-opacity="0.08" '
                f'stroke="#4477aa" stroke-dasharray="3 3"><title>{escape(label)}</title></rect>'
            )
            bands += 1
        out.append("</g>")

    tiles = 0
    for tdec in tilings:
        if tdec.slices.equation.body != name:
            continue
        out.append(f'<g class="tiles" data-size="{tdec.tile_size}">')
        for (z, t), group in tdec.tiles:
            for tl in group:
                lo, hi = tl.box.lower, tl.box.upper
                ax, ay = px((lo[0], hi[1]))
                bx, by = px((hi[0], lo[1]))
                r = RADIUS + 3
                label = f"tile {tl.number} of {_fmt_time(z)} t={_fmt_time(t)}"
                out.append(
                    f'<rect class="tile" x="{ax - r}" y="{ay - r}" width="{bx - ax + 2 * r}" '
                    f'height="{by - ay + 2 * r}" fill="none" stroke="#cc3311" stroke-width="1.5">'
                    f"<title>{escape(label)}</title></rect>"
                )
                tiles += 1
        out.append("</g>")

    out.append('<g class="points">')
    for p in pts:
        cx, cy = px(p)
        if p in times:
            fill = _colour(rank[times[p]], len(order))
            label = f"{name}{_fmt_time(p)} at {_fmt_time(times[p])}"
        else:
            fill = UNSCHEDULED
            label = f"{name}{_fmt_time(p)} unscheduled"
        out.append(
            f'<circle class="point" cx="{cx}" cy="{cy}" r="{RADIUS}" fill="{fill}" stroke="black" '
            f'stroke-width="0.5"><title>{escape(label)}</title></circle>'
        )
    out.append("</g>")

    # legend: one swatch per distinct time, capped to keep the image small
    if order:
        lx = width - MARGIN + 8
        shown = order if len(order) <= 12 else order[:6] + order[-6:]
        for k, t in enumerate(shown):
            y = MARGIN + k * 14
            out.append(f'<rect x="{lx - 40}" y="{y - 9}" width="10" height="10" fill="{_colour(rank[t], len(order))}"/>')
            out.append(f'<text x="{lx - 26}" y="{y}">{escape(_fmt_time(t))}</text>')
    out.append("</svg>")
    return Plot(name, "\n".join(out) + "\n", len(pts), bands, tiles)


def render_all(
    program: Program,
    schedule: Schedule | None,
    params: Mapping[str, int],
    decomps: Sequence[SliceDecomposition] = (),
    tilings: Sequence[TileDecomposition] = (),
) -> PlotSet:
    """Plot every 2-D variable; variables of higher dimension are skipped with a notice."""
    result = PlotSet()
    for v in program.variables:
        if v.dim > 2:
            result.notices.append(f"skipped {v.name}: {v.dim} index dimensions cannot be drawn in the plane")
        elif v.dim == 2:
            result.plots.append(render_variable(program, v.name, schedule, params, decomps, tilings))
    return result
