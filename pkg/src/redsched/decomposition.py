"""Split reductions into equitemporal slices and tiles.

Given a body schedule, every result point's reduction domain is cut into
slices of co-available points (the ``TempX`` partials) and, optionally,
each slice into hypercubic tiles (the ``Tile_TempX`` partials).
"""

from __future__ import annotations

from dataclasses import dataclass
from .affine import AffineError, AffineFunction, BoundingBox, Point, PointSet, TimeVector, bounding_box
from .sare import PointMap, Program, ReduceEquation, SareError, Variable, reduction_fibers


@dataclass(frozen=True)
class Slice:
    owner: Point
    time: TimeVector
    points: tuple[Point, ...]
    box: BoundingBox

    @property
    def size(self) -> int:
        # a lone point still costs one step to land in its accumulator
        return max(1, self.box.diagonal_norm)

    @property
    def dims(self) -> int:
        return self.box.active_dims


@dataclass(frozen=True)
class SliceDecomposition:
    equation: ReduceEquation
    lambda_r: AffineFunction
    params: tuple[tuple[str, int], ...]
    slices: tuple[tuple[Point, tuple[Slice, ...]], ...]
    result_names: tuple[str, ...]
    time_dims: int

    @property
    def by_owner(self) -> dict[Point, tuple[Slice, ...]]:
        return dict(self.slices)

    def owners(self) -> list[Point]:
        return [z for z, _ in self.slices]

    def all_slices(self) -> list[Slice]:
        return [s for _, group in self.slices for s in group]

    def first(self, z_x: Point) -> TimeVector:
        return self.by_owner[z_x][0].time

    def last(self, z_x: Point) -> TimeVector:
        return self.by_owner[z_x][-1].time

    def count(self, z_x: Point) -> int:
        """Number of nonempty slices of ``z_x``."""
        return len(self.by_owner[z_x])

    def span(self, z_x: Point) -> int:
        """Time steps from first to last availability, inclusive, innermost dimension."""
        return self.last(z_x)[-1] - self.first(z_x)[-1] + 1

    def size_prime(self, z_x: Point) -> int:
        """Linear steps needed to fold all slice partials of ``z_x``."""
        return self.count(z_x)

    @property
    def temp_name(self) -> str:
        return f"Temp{self.equation.result}"


def slice_reduction(program: Program, eq: ReduceEquation, lambda_r: AffineFunction, params) -> SliceDecomposition:
    body = program.var(eq.body)
    if lambda_r.n_in != body.dim:
        raise AffineError(
            f"body schedule takes {lambda_r.n_in} indices but {eq.body} has {body.dim}"
        )
    if lambda_r.n_out == 0:
        raise AffineError("body schedule must have at least one time dimension")
    if isinstance(eq.projection, AffineFunction) and lambda_r.in_names != eq.projection.in_names:
        lambda_r = lambda_r.rename(eq.projection.in_names)
    fibers = reduction_fibers(program, eq, params)
    out = []
    for z_x in sorted(fibers):
        groups: dict[TimeVector, list[Point]] = {}
        for p in fibers[z_x]:
            groups.setdefault(lambda_r(p, params), []).append(p)
        slices = tuple(
            Slice(z_x, t, tuple(sorted(pts)), bounding_box(pts)) for t, pts in sorted(groups.items())
        )
        out.append((z_x, slices))
    names = program.var(eq.result).domain.index_names
    return SliceDecomposition(
        eq, lambda_r, tuple(sorted(params.items())), tuple(out), tuple(names), lambda_r.n_out
    )


@dataclass(frozen=True)
class Tile:
    number: int  # 1-based position within its slice
    coords: tuple[int, ...]
    points: tuple[Point, ...]
    full: bool
    box: BoundingBox


@dataclass(frozen=True)
class TileDecomposition:
    slices: SliceDecomposition
    tile_size: int
    tiles: tuple[tuple[tuple[Point, TimeVector], tuple[Tile, ...]], ...]

    @property
    def by_slice(self) -> dict[tuple[Point, TimeVector], tuple[Tile, ...]]:
        return dict(self.tiles)

    def count(self, z_x: Point, t: TimeVector) -> int:
        return len(self.by_slice[(z_x, t)])

    def tile_cost(self, sl: Slice, tile: Tile) -> int:
        """Steps charged to one tile: d*s for full tiles, actual extent sum for partial ones."""
        if tile.full:
            return sl.dims * self.tile_size
        active = [k for k, (l, u) in enumerate(zip(sl.box.lower, sl.box.upper)) if u > l]
        return max(1, sum(tile.box.extents[k] for k in active))

    @property
    def tile_name(self) -> str:
        return f"Tile_Temp{self.slices.equation.result}"


def tile_slices(dec: SliceDecomposition, s: int) -> TileDecomposition:
    if s < 1:
        raise SareError("tile size must be at least 1")
    out = []
    for sl in dec.all_slices():
        lo = sl.box.lower
        active = [k for k, (l, u) in enumerate(zip(sl.box.lower, sl.box.upper)) if u > l]
        groups: dict[tuple[int, ...], list[Point]] = {}
        for p in sl.points:
            key = tuple((p[k] - lo[k]) // s for k in active)
            groups.setdefault(key, []).append(p)
        tiles = []
        for b, key in enumerate(sorted(groups), start=1):
            pts = tuple(groups[key])
            box = bounding_box(pts)
            full = bool(active) and all(box.extents[k] == s for k in active)
            tiles.append(Tile(b, key, pts, full, box))
        out.append(((sl.owner, sl.time), tuple(tiles)))
    return TileDecomposition(dec, s, tuple(out))


def tile_cost_omega(dec: SliceDecomposition, s: int) -> dict[tuple[Point, TimeVector], int]:
    """d*s - tau per slice; the quantity the tile-size search balances."""
    tdec = tile_slices(dec, s)
    return {
        (sl.owner, sl.time): sl.dims * s - tdec.count(sl.owner, sl.time) for sl in dec.all_slices()
    }


def _fresh(program: Program, name: str) -> str:
    if any(v.name == name for v in program.variables):
        raise SareError(f"cannot introduce {name!r}: the program already declares it")
    return name


def rewrite_program(program: Program, dec: SliceDecomposition, tdec: TileDecomposition | None = None) -> Program:
    """Replace the decomposed reduction by its slice (and tile) accumulation chain."""
    eq = dec.equation
    if eq not in program.equations:
        raise SareError("decomposition was not built from this program")
    if tdec is not None and tdec.slices is not dec:
        raise SareError("tile decomposition does not belong to this slice decomposition")
    single_slices = all(len(g) == 1 for _, g in dec.slices)
    single_tiles = tdec is None or all(len(t) == 1 for _, t in tdec.tiles)
    if single_slices and single_tiles:
        return program

    zn = tuple(f"z{k}" for k in range(len(dec.result_names)))
    tn = tuple(f"t{k}" for k in range(dec.time_dims))
    temp = _fresh(program, dec.temp_name)
    temp_points = [z + sl.time for sl in dec.all_slices() for z in [sl.owner]]
    temp_var = Variable(temp, PointSet.of(zn + tn, temp_points))
    n_z = len(zn)
    to_owner = AffineFunction.build(
        zn + tn, (), [[1 if c == r else 0 for c in range(n_z + len(tn))] for r in range(n_z)]
    )
    final = ReduceEquation(eq.result, eq.op, to_owner, temp, role="result")

    if tdec is None:
        proj = eq.projection.stack(dec.lambda_r)
        temp_eq = ReduceEquation(temp, eq.op, proj, eq.body, role="slice")
        return program.replace_equation(eq, [temp_var], [temp_eq, final])

    tile = _fresh(program, tdec.tile_name)
    table = {}
    tile_points = []
    for (z_x, t), tiles in tdec.tiles:
        for tl in tiles:
            tile_points.append(z_x + t + (tl.number,))
            for p in tl.points:
                table[p] = z_x + t + (tl.number,)
    body_names = program.var(eq.body).domain.index_names
    tile_var = Variable(tile, PointSet.of(zn + tn + ("b",), tile_points))
    tile_eq = ReduceEquation(tile, eq.op, PointMap.of(body_names, table, n_z + len(tn) + 1), eq.body, role="tile")
    width = n_z + len(tn)
    drop_b = AffineFunction.build(
        zn + tn + ("b",), (), [[1 if c == r else 0 for c in range(width + 1)] for r in range(width)]
    )
    temp_eq = ReduceEquation(temp, eq.op, drop_b, tile, role="tiles")
    return program.replace_equation(eq, [temp_var, tile_var], [tile_eq, temp_eq, final])
