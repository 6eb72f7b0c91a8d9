"""Exact integer search for schedule coefficients.

The objective is lexicographic: latest time step over every scheduled
point, then the 1-norm of the coefficients, then a fixed preference order
on values (0, -1, 1, -2, 2, ...) read unknown by unknown.  The last key
makes optima unique, so branch-and-bound and brute force agree exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, linprog, milp

from .affine import AffineFunction, TimeVector
from .constraints import ConstraintSystem, LexConstraint
from .decomposition import SliceDecomposition, tile_cost_omega


class SolverError(ValueError):
    pass


def rank(v: int) -> int:
    return 2 * v if v >= 0 else -2 * v - 1


def value_order(lo: int, hi: int) -> list[int]:
    vals = [v for k in range(0, max(abs(lo), abs(hi)) + 1) for v in ((k,) if k == 0 else (-k, k))]
    return [v for v in vals if lo <= v <= hi]


# ---------------------------------------------------------------- schedules


@dataclass
class Schedule:
    functions: dict[str, AffineFunction]
    objective: tuple = ()
    bound: int = 0
    meta: dict = field(default_factory=dict)

    def time(self, var: str, point, params: Mapping[str, int]) -> TimeVector:
        return self.functions[var](point, params)

    def has(self, var: str) -> bool:
        return var in self.functions

    @property
    def dims(self) -> int:
        return max((f.n_out for f in self.functions.values()), default=1)

    def makespan(self) -> TimeVector:
        return tuple(self.objective[0]) if self.objective else ()

    def slowed(self, factor: int = 2) -> "Schedule":
        funcs = {k: f.scale_inner(factor) for k, f in self.functions.items()}
        meta = dict(self.meta, slowdown=factor)
        return Schedule(funcs, self.objective, self.bound, meta)

    def to_json(self) -> dict:
        return {
            "variables": {
                name: {
                    "indices": list(f.in_names),
                    "params": list(f.param_names),
                    "matrix": [list(r) for r in f.matrix],
                    "constant": list(f.constant),
                    "text": f.to_text(),
                }
                for name, f in sorted(self.functions.items())
            },
            "objective": {
                "makespan": list(self.objective[0]) if self.objective else None,
                "norm": self.objective[1] if self.objective else None,
            },
            "bound": self.bound,
            "meta": self.meta,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, data: dict) -> "Schedule":
        try:
            funcs = {
                name: AffineFunction.build(v["indices"], v["params"], v["matrix"], v["constant"])
                for name, v in data["variables"].items()
            }
            obj = data.get("objective") or {}
            objective = (tuple(obj["makespan"]), obj["norm"]) if obj.get("makespan") is not None else ()
            return cls(funcs, objective, int(data.get("bound", 0)), dict(data.get("meta", {})))
        except (AttributeError, KeyError, TypeError, ValueError) as exc:
            raise SolverError(f"malformed schedule: {exc}") from exc

    @classmethod
    def loads(cls, text: str) -> "Schedule":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SolverError(f"malformed schedule: {exc}") from exc
        if not isinstance(data, dict):
            raise SolverError("malformed schedule: expected an object")
        return cls.from_json(data)


def assignment_of(schedule: Schedule, system: ConstraintSystem) -> dict[str, int]:
    out = {}
    for var, tpl in system.space.templates.items():
        if var not in schedule.functions:
            raise SolverError(f"schedule lacks {var}")
        fn = schedule.functions[var].pad_rows(tpl.dims)
        if fn.n_out != tpl.dims:
            raise SolverError(f"{var} has {fn.n_out} time dimensions, expected {tpl.dims}")
        for r in range(tpl.dims):
            row = tuple(fn.matrix[r]) + (fn.constant[r],)
            for col, v in zip(tpl.columns, row):
                out[tpl.unknown(r, col)] = v
    return out


def verify(schedule: Schedule, system: ConstraintSystem) -> tuple[bool, LexConstraint | None]:
    """Substitute the coefficients and check every constraint exactly."""
    assignment = assignment_of(schedule, system)
    for c in system.constraints:
        if not c.holds(assignment):
            return False, c
    return True, None


def schedule_from(system: ConstraintSystem, assignment: Mapping[str, int], objective=(), bound=0) -> Schedule:
    funcs = {var: tpl.instantiate(assignment) for var, tpl in system.space.templates.items()}
    funcs.update(system.space.fixed)
    return Schedule(funcs, objective, bound)


# ---------------------------------------------------------------- compiled form


@dataclass
class Compiled:
    unknowns: list[str]
    levels: list[tuple[np.ndarray, np.ndarray]]  # per component: (A, b), rows aligned across levels
    obj: list[tuple[np.ndarray, np.ndarray]]  # per component: (G, h) over scheduled points
    dims: int
    floor: np.ndarray  # per objective row, a bound stated by one constraint alone
    groups: list[tuple[np.ndarray, np.ndarray]]  # (unknown cols, objective rows) per template
    edges: tuple[np.ndarray, np.ndarray, np.ndarray]  # T(p) >= T(q) + c, outer component


NEG, POS = -(2**60), 2**60


def compile_system(system: ConstraintSystem) -> Compiled:
    unknowns = system.space.unknowns
    col = {u: k for k, u in enumerate(unknowns)}
    n, dims = len(unknowns), system.space.dims
    seen = {}
    for c in system.constraints:
        rows = []
        for e in c.expr:
            row = np.zeros(n + 1, dtype=np.int64)
            for k, v in e.coeffs:
                row[col[k]] += v
            row[n] = e.constant
            rows.append(row)
        key = b"".join(r.tobytes() for r in rows)
        seen.setdefault(key, rows)
    mats = list(seen.values())
    levels = []
    for k in range(dims):
        block = np.array([m[k] for m in mats], dtype=np.int64).reshape(len(mats), n + 1)
        levels.append((block[:, :n], block[:, n]))
    obj = []
    space = system.space
    groups, start = [], 0
    for var, pts in space.points.items():
        if var in space.templates:
            cols = np.array([col[u] for u in space.templates[var].unknowns], dtype=np.int64)
            groups.append((cols, np.arange(start, start + len(pts), dtype=np.int64)))
        start += len(pts)
    for k in range(dims):
        rows = []
        for var, pts in space.points.items():
            for p in pts:
                e = space.time(var, p, system.params)[k]
                row = np.zeros(n + 1, dtype=np.int64)
                for u, v in e.coeffs:
                    row[col[u]] += v
                row[n] = e.constant
                rows.append(row)
        block = np.array(rows, dtype=np.int64).reshape(len(rows), n + 1)
        obj.append((block[:, :n], block[:, n]))
    floor, edges = _time_edges(system, obj)
    return Compiled(unknowns, levels, obj, dims, floor, groups, edges)


def _time_edges(system: ConstraintSystem, obj):
    """Read constraints between two point times as difference edges on outer components.

    T(p) >= T(q) + c becomes an edge (p, q, c); a constraint against a constant
    becomes a floor on T(p).  Lexicographic order implies both for the outer
    component.
    """
    rows = {}
    k = 0
    for var, pts in system.space.points.items():
        for p in pts:
            rows[(var, tuple(p))] = k
            k += 1
    h = obj[0][1]
    floor = np.full(k, NEG, dtype=np.int64)
    ep, eq, ec = [], [], []
    for c in system.constraints:
        left, right = c.refs
        pl = rows.get((left[0], tuple(left[1]))) if left else None
        if pl is None:
            continue
        pr = rows.get((right[0], tuple(right[1]))) if right else None
        # expr = T(left) - T(right) - shift; an unscheduled right side is already a constant
        outer = c.expr[0].constant
        if pr is None:
            if right is not None and system.space.scheduled(right[0]):
                continue
            floor[pl] = max(floor[pl], int(h[pl]) - outer)
        else:
            ep.append(pl)
            eq.append(pr)
            ec.append(int(h[pl]) - int(h[pr]) - outer)
    edges = tuple(np.array(v, dtype=np.int64) for v in (ep, eq, ec))
    return floor, edges


def _row_max(A, b, lo, hi):
    M = np.where(A > 0, A * hi, A * lo)
    return M, M.sum(axis=1) + b


def _tighten(A, b, lo, hi):
    """One round of interval propagation for A x + b >= 0; None when infeasible."""
    if A.shape[0] == 0:
        return lo, hi
    M, S = _row_max(A, b, lo, hi)
    if (S < 0).any():
        return None
    R = S[:, None] - M
    with np.errstate(divide="ignore"):
        safe = np.where(A == 0, 1, A)
        low = np.where(A > 0, -(R // safe), np.iinfo(np.int64).min)
        up = np.where(A < 0, R // np.where(A < 0, -A, 1), np.iinfo(np.int64).max)
    lo = np.maximum(lo, low.max(axis=0))
    hi = np.minimum(hi, up.min(axis=0))
    if (lo > hi).any():
        return None
    return lo, hi


def _norm_budget(lo, hi, lb0, lb_norm, incumbent):
    """Once the makespan cannot beat the incumbent, the norm must not exceed it either."""
    if lb0 < incumbent[0][0]:
        return lo, hi
    if lb_norm >= incumbent[1]:
        return None
    mins = np.where(lo > 0, lo, np.where(hi < 0, -hi, 0))
    budget = incumbent[1] - 1 - int(mins.sum())
    if budget < 0:
        return None
    cap = mins + budget
    lo, hi = np.maximum(lo, -cap), np.minimum(hi, cap)
    if (lo > hi).any():
        return None
    return lo, hi


def _lex_values(levels, x):
    return [A @ x + b for A, b in levels]


def _lex_ok(vals) -> np.ndarray:
    """Elementwise lexicographic non-negativity across a list of component arrays."""
    ok = np.zeros(vals[0].shape, dtype=bool)
    undecided = np.ones(vals[0].shape, dtype=bool)
    for v in vals:
        ok |= undecided & (v > 0)
        undecided &= v == 0
    return ok | undecided


def _objective(comp: Compiled, x) -> tuple:
    if comp.obj[0][0].shape[0] == 0:
        span = (0,) * comp.dims
    else:
        cols = np.stack([G @ x + h for G, h in comp.obj], axis=1)
        span = max(map(tuple, cols.tolist()))
    return (tuple(int(v) for v in span), int(np.abs(x).sum()))


@dataclass
class SolveResult:
    status: str  # optimal | infeasible | bound-exhausted
    schedule: Schedule | None
    objective: tuple = ()
    nodes: int = 0
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


class _Found(Exception):
    pass


def solve(system: ConstraintSystem, bound: int = 8, node_limit: int = 2_000_000, method: str = "auto") -> SolveResult:
    """Lexicographically best coefficients in [-bound, bound].

    ``bnb`` runs the branch-and-bound alone.  ``auto`` first asks a MILP
    solver for the optimal (makespan, norm) pair and then lets the same
    search pick the preferred assignment reaching it, which skips the
    optimality proof.
    """
    if bound < 1:
        raise SolverError("coefficient bound must be at least 1")
    if method not in ("auto", "bnb"):
        raise SolverError(f"unknown method {method!r}")
    comp = compile_system(system)
    n = len(comp.unknowns)
    lo0 = np.full(n, -bound, dtype=np.int64)
    hi0 = np.full(n, bound, dtype=np.int64)
    best: list = [None, None]  # objective, x
    target = None
    if method == "auto" and n and comp.obj[0][0].shape[0]:
        seeded = _milp_optimum(comp, bound)
        if seeded is not None:
            target, fallback = seeded
            best[0] = (target[0], target[1] + 1)
    nodes = 0
    A0, b0 = comp.levels[0]
    G0, h0 = comp.obj[0]
    has_obj = G0.shape[0] > 0
    rownorm = np.abs(G0).max(axis=1) if has_obj else None
    ep, eq_, ec = comp.edges

    def time_bounds(lo, hi, cap):
        """Bounds on the outer time component of every scheduled point."""
        tmin = np.maximum(np.where(G0 > 0, G0 * lo, G0 * hi).sum(axis=1) + h0, comp.floor)
        tmax = np.where(G0 > 0, G0 * hi, G0 * lo).sum(axis=1) + h0
        if cap is not None:
            tmax = np.minimum(tmax, cap)
        for _ in range(16):
            nmin, nmax = tmin.copy(), tmax.copy()
            np.maximum.at(nmin, ep, tmin[eq_] + ec)
            np.minimum.at(nmax, eq_, tmax[ep] - ec)
            if np.array_equal(nmin, tmin) and np.array_equal(nmax, tmax):
                break
            tmin, tmax = nmin, nmax
        if (tmin > tmax).any():
            return None
        return tmin, tmax

    def norm_bound(lo, hi, tb) -> int:
        """Sum over templates of the larger of two bounds on their coefficient 1-norm.

        A point whose time is at least v in size needs coefficients of total
        size v / (largest coordinate of the point) to reach it.
        """
        absmin = np.where(lo > 0, lo, np.where(hi < 0, -hi, 0))
        if tb is None:
            return int(absmin.sum())
        need = np.maximum(0, np.maximum(tb[0], -tb[1]))
        total = 0
        for cols, rows in comp.groups:
            part = int(absmin[cols].sum())
            if rows.size:
                rn = rownorm[rows]
                ratio = np.where(rn > 0, -(-need[rows] // np.where(rn > 0, rn, 1)), 0)
                part = max(part, int(ratio.max()))
            total += part
        return total

    def propagate(lo, hi):
        """Tighten coefficient intervals; returns (lo, hi, time bounds) or None."""
        tb = None
        for _ in range(50):
            before = (lo.copy(), hi.copy())
            r = _tighten(A0, b0, lo, hi)
            if r is None:
                return None
            lo, hi = r
            # deeper components only bind once every outer one is forced to zero
            forced = np.ones(A0.shape[0], dtype=bool)
            for k in range(1, comp.dims):
                Ap, bp = comp.levels[k - 1]
                _, smax = _row_max(Ap, bp, lo, hi)
                forced &= smax <= 0
                if forced.any():
                    Ak, bk = comp.levels[k]
                    r = _tighten(Ak[forced], bk[forced], lo, hi)
                    if r is None:
                        return None
                    lo, hi = r
            if has_obj:
                cap = None
                if best[0] is not None:
                    # later leaves lose ties, so only strict improvements are worth finding
                    cap = best[0][0][0]
                    if comp.dims == 1 and norm_bound(lo, hi, tb) >= best[0][1]:
                        cap -= 1
                tb = time_bounds(lo, hi, cap)
                if tb is None:
                    return None
                r = _tighten(np.vstack([G0, -G0]), np.concatenate([h0 - tb[0], tb[1] - h0]), lo, hi)
                if r is None:
                    return None
                lo, hi = r
            if (comp.dims == 1 or target is not None) and best[0] is not None and has_obj:
                lb0 = int(tb[0].max()) if comp.dims == 1 else POS
                r = _norm_budget(lo, hi, lb0, norm_bound(lo, hi, tb), best[0])
                if r is None:
                    return None
                lo, hi = r
            if np.array_equal(before[0], lo) and np.array_equal(before[1], hi):
                break
        return lo, hi, tb

    def dominated(lo, hi, tb) -> bool:
        if best[0] is None or tb is None:
            return False
        lb0, norm = int(tb[0].max()), norm_bound(lo, hi, tb)
        span0 = best[0][0][0]
        if lb0 > span0:
            return True
        return (comp.dims == 1 and lb0 == span0 or target is not None) and norm >= best[0][1]

    def leaf(x):
        vals = _lex_values(comp.levels, x)
        if vals[0].size and not _lex_ok(vals).all():
            return
        obj = _objective(comp, x)
        if best[0] is None or obj < best[0]:
            best[0], best[1] = obj, x.copy()
            if obj == target:
                raise _Found

    def dfs(k, lo, hi):
        nonlocal nodes
        nodes += 1
        if nodes > node_limit:
            raise SolverError(f"search exceeded {node_limit} nodes")
        r = propagate(lo, hi)
        if r is None:
            return
        lo, hi, tb = r
        if dominated(lo, hi, tb):
            return
        while k < n and lo[k] == hi[k]:
            k += 1
        if k == n:
            leaf(lo)
            return
        for v in value_order(int(lo[k]), int(hi[k])):
            l2, h2 = lo.copy(), hi.copy()
            l2[k] = h2[k] = v
            dfs(k + 1, l2, h2)

    try:
        dfs(0, lo0, hi0)
    except _Found:
        pass
    if target is not None and best[1] is None:
        best[0], best[1] = target, fallback
    if best[0] is None:
        status, msg = _diagnose(comp, bound)
        return SolveResult(status, None, (), nodes, msg)
    assignment = {u: int(v) for u, v in zip(comp.unknowns, best[1])}
    sched = schedule_from(system, assignment, best[0], bound)
    return SolveResult("optimal", sched, best[0], nodes, "")


def _milp_optimum(comp: Compiled, bound: int):
    """Optimal (makespan, norm) from MILP solves, checked exactly; None if unusable.

    Two-dimensional systems get one binary per constraint row choosing between
    a positive outer component and a zero outer with non-negative inner one,
    and one binary per point marking the points that reach the outer makespan.
    """
    A0, b0 = comp.levels[0]
    G0, h0 = comp.obj[0]
    n, dims = len(comp.unknowns), comp.dims
    R, P = A0.shape[0], G0.shape[0]
    two = dims == 2
    nd, ng = (R, P) if two else (0, 0)
    width = 2 * n + dims + nd + ng
    X, U, M0 = 0, n, 2 * n
    M1, D, Gm = 2 * n + 1, 2 * n + dims, 2 * n + dims + nd

    def block(k):
        return np.zeros((k, width))

    rows = []
    a = block(R)
    a[:, X:X + n] = A0
    rows.append(LinearConstraint(a, -b0, np.inf))
    a = block(n)
    a[:, X:X + n], a[:, U:U + n] = -np.eye(n), np.eye(n)
    rows.append(LinearConstraint(a, 0, np.inf))
    a = block(n)
    a[:, X:X + n], a[:, U:U + n] = np.eye(n), np.eye(n)
    rows.append(LinearConstraint(a, 0, np.inf))
    a = block(P)
    a[:, M0], a[:, X:X + n] = 1, -G0
    rows.append(LinearConstraint(a, h0, np.inf))
    lower = np.concatenate([np.full(n, -bound), np.zeros(n), np.full(dims, -np.inf), np.zeros(nd + ng)])
    upper = np.concatenate([np.full(n, bound), np.full(n, bound), np.full(dims, np.inf), np.ones(nd + ng)])
    integrality = np.concatenate([np.ones(n), np.zeros(n + dims), np.ones(nd + ng)])
    deep = []
    if two:
        A1, b1 = comp.levels[1]
        G1, h1 = comp.obj[1]
        big_a = np.maximum(0, np.abs(A1).sum(axis=1) * bound - b1)
        a = block(R)
        a[:, X:X + n], a[:, D:D + R] = A0, np.eye(R)
        rows.append(LinearConstraint(a, 1 - b0, np.inf))
        a = block(R)
        a[:, X:X + n], a[:, D:D + R] = A1, -np.diag(big_a)
        rows.append(LinearConstraint(a, -b1 - big_a, np.inf))
        tmax1 = np.abs(G1).sum(axis=1) * bound + h1
        floor1 = float((h1 - np.abs(G1).sum(axis=1) * bound).min()) if P else 0.0
        lower[M1] = floor1
        big_g = tmax1 - floor1
        # only points sitting at the outer makespan constrain the inner one
        a = block(P)
        a[:, X:X + n], a[:, Gm:Gm + P] = -G0, np.eye(P)
        deep.append((a, "outer"))
        a = block(P)
        a[:, M1], a[:, X:X + n], a[:, Gm:Gm + P] = 1, -G1, -np.diag(big_g)
        deep.append((LinearConstraint(a, h1 - big_g, np.inf), None))
    opts = {"mip_rel_gap": 0.0, "time_limit": 60.0, "presolve": False}
    # HiGHS presolve has been seen to declare feasible small models infeasible

    def phase(cost, cons):
        res = milp(cost, constraints=cons, integrality=integrality, bounds=Bounds(lower, upper), options=opts)
        if res.status != 0:
            return None
        x = np.rint(res.x[:n]).astype(np.int64)
        return x if _feasible(comp, x) else None

    cost = np.zeros(width)
    cost[M0] = 1
    x = phase(cost, rows)
    if x is None:
        return None
    span = _objective(comp, x)[0]
    lower[M0] = upper[M0] = span[0]
    if two:
        outer = LinearConstraint(deep[0][0], h0 - span[0] + 1, np.inf)
        rows = rows + [outer, deep[1][0]]
        cost = np.zeros(width)
        cost[M1] = 1
        x = phase(cost, rows)
        if x is None:
            return None
        span = _objective(comp, x)[0]
        upper[M1] = span[1]
    cost = np.zeros(width)
    cost[U:U + n] = 1
    x = phase(cost, rows)
    if x is None:
        return None
    return _objective(comp, x), x


def _feasible(comp: Compiled, x) -> bool:
    vals = _lex_values(comp.levels, x)
    return not vals[0].size or bool(_lex_ok(vals).all())


def _diagnose(comp: Compiled, bound: int) -> tuple[str, str]:
    """Tell true infeasibility apart from a coefficient bound that is too small."""
    A, b = comp.levels[0]
    n = len(comp.unknowns)
    if A.shape[0] == 0 or n == 0:
        return "infeasible", "no integer assignment satisfies the constraints"
    # the outer components alone must already be satisfiable over the rationals
    res = linprog(np.zeros(n), A_ub=-A.astype(float), b_ub=b.astype(float), bounds=[(None, None)] * n, method="highs")
    if res.status == 2:
        return "infeasible", "constraints are infeasible even without a coefficient bound"
    return "bound-exhausted", f"no schedule with coefficients in [-{bound}, {bound}]; try a larger bound"


# ---------------------------------------------------------------- brute force


def exhaustive(system: ConstraintSystem, bound: int, limit: int = 20_000_000, chunk: int = 200_000) -> SolveResult:
    """Enumerate every coefficient vector in the box and keep the best one."""
    comp = compile_system(system)
    n = len(comp.unknowns)
    total = (2 * bound + 1) ** n
    if total > limit:
        raise SolverError(f"{total} assignments exceed the enumeration limit {limit}")
    width = 2 * bound + 1
    ranks = np.array(sorted(range(-bound, bound + 1), key=rank), dtype=np.int64)
    best = None
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        X = np.empty((idx.size, n), dtype=np.int64)
        rest = idx.copy()
        for k in range(n - 1, -1, -1):  # mixed radix, first unknown most significant
            X[:, k] = ranks[rest % width]
            rest //= width
        if comp.levels[0][0].shape[0]:
            ok = _lex_ok([X @ A.T + b for A, b in comp.levels]).all(axis=1)
        else:
            ok = np.ones(idx.size, dtype=bool)
        if not ok.any():
            continue
        Xf = X[ok]
        if comp.obj[0][0].shape[0]:
            comps = [Xf @ G.T + h for G, h in comp.obj]  # (m, P) each
            span = _lex_max_rows(comps)
        else:
            span = np.zeros((Xf.shape[0], comp.dims), dtype=np.int64)
        norm = np.abs(Xf).sum(axis=1)
        # rows are already in preference order, so the first minimum is the tie winner
        keys = np.column_stack([span, norm])
        order = np.lexsort(keys.T[::-1])
        i = order[0]
        cand = (tuple(int(v) for v in span[i]), int(norm[i]))
        if best is None or cand < best[0]:
            best = (cand, Xf[i].copy())
    if best is None:
        status, msg = _diagnose(comp, bound)
        return SolveResult(status, None, (), total, msg)
    assignment = {u: int(v) for u, v in zip(comp.unknowns, best[1])}
    return SolveResult("optimal", schedule_from(system, assignment, best[0], bound), best[0], total)


def _lex_max_rows(comps):
    """Per candidate row, the lexicographic maximum over points of the component vectors."""
    m, P = comps[0].shape
    keep = np.ones((m, P), dtype=bool)
    out = []
    for c in comps:
        masked = np.where(keep, c, np.iinfo(np.int64).min)
        top = masked.max(axis=1)
        keep &= c == top[:, None]
        out.append(top)
    return np.column_stack(out)


# ---------------------------------------------------------------- tile size


@dataclass(frozen=True)
class TileSizeChoice:
    s: int
    omegas: dict
    objective: int

    def to_json(self) -> dict:
        return {
            "s": self.s,
            "objective": self.objective,
            "omega": [{"z_X": list(z), "t": list(t), "omega": w} for (z, t), w in sorted(self.omegas.items())],
        }


def optimize_tile_size(dec: SliceDecomposition, s_max: int | None = None) -> TileSizeChoice:
    """Balance d*s against the tile count: minimise max |omega|, smaller s on ties."""
    if all(sl.dims == 0 for sl in dec.all_slices()):
        raise SolverError("all slices are zero-dimensional; tile size selection does not apply")
    if s_max is None:
        s_max = max(max(sl.box.extents) for sl in dec.all_slices())
    if s_max < 1:
        raise SolverError("tile size range must include 1")
    best = None
    for s in range(1, s_max + 1):
        om = tile_cost_omega(dec, s)
        score = max(abs(w) for w in om.values())
        if best is None or score < best.objective:
            best = TileSizeChoice(s, om, score)
    return best
