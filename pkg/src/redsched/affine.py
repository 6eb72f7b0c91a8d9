"""Exact integer affine geometry: affine maps, polyhedral domains, point sets.

Every quantity here is a plain Python ``int``; nothing is ever rounded.
Domains are enumerated by scanning one dimension at a time, with the bounds
of each dimension obtained from a Fourier-Motzkin projection of the
constraints onto the leading dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from math import gcd
from typing import Iterable, Mapping, Sequence

Point = tuple[int, ...]
TimeVector = tuple[int, ...]


class AffineError(ValueError):
    pass


class UnboundedDomainError(AffineError):
    pass


def _bind(param_names: Sequence[str], params: Mapping[str, int]) -> tuple[int, ...]:
    try:
        return tuple(int(params[name]) for name in param_names)
    except KeyError as exc:
        raise AffineError(f"unbound parameter {exc.args[0]!r}") from None


def shift_inner(t: TimeVector, k: int) -> TimeVector:
    """Add ``k`` to the innermost component of a time vector."""
    if not t:
        raise AffineError("cannot shift a zero-dimensional time vector")
    return t[:-1] + (t[-1] + k,)


def pad_time(t: TimeVector, dims: int) -> TimeVector:
    """Left-pad with zeros so that ``t`` has ``dims`` components."""
    if len(t) > dims:
        raise AffineError(f"time vector {t} has more than {dims} dimensions")
    return (0,) * (dims - len(t)) + tuple(t)


@dataclass(frozen=True)
class AffineFunction:
    """z -> A (z p)^T + c over named index and parameter dimensions."""

    in_names: tuple[str, ...]
    param_names: tuple[str, ...]
    matrix: tuple[tuple[int, ...], ...]
    constant: tuple[int, ...]

    def __post_init__(self):
        width = len(self.in_names) + len(self.param_names)
        if len(self.matrix) != len(self.constant):
            raise AffineError("row count differs from constant length")
        for row in self.matrix:
            if len(row) != width:
                raise AffineError(f"row {row} does not have {width} columns")

    @classmethod
    def build(cls, in_names, param_names, matrix, constant=None) -> "AffineFunction":
        matrix = tuple(tuple(int(v) for v in row) for row in matrix)
        if constant is None:
            constant = (0,) * len(matrix)
        return cls(tuple(in_names), tuple(param_names), matrix, tuple(int(v) for v in constant))

    @classmethod
    def identity(cls, in_names, param_names=()) -> "AffineFunction":
        n, q = len(in_names), len(param_names)
        rows = [[1 if c == r else 0 for c in range(n + q)] for r in range(n)]
        return cls.build(in_names, param_names, rows)

    @classmethod
    def constant_map(cls, in_names, param_names, values) -> "AffineFunction":
        width = len(in_names) + len(param_names)
        return cls.build(in_names, param_names, [[0] * width for _ in values], values)

    @property
    def n_in(self) -> int:
        return len(self.in_names)

    @property
    def n_out(self) -> int:
        return len(self.matrix)

    def __call__(self, point: Sequence[int], params: Mapping[str, int]) -> TimeVector:
        return evaluate(self, point, params)

    def index_part(self, row: int) -> tuple[int, ...]:
        return self.matrix[row][: self.n_in]

    def param_part(self, row: int) -> tuple[int, ...]:
        return self.matrix[row][self.n_in :]

    def stack(self, other: "AffineFunction") -> "AffineFunction":
        """Concatenate the output rows of two maps over the same space."""
        if (self.in_names, self.param_names) != (other.in_names, other.param_names):
            raise AffineError("cannot stack maps over different spaces")
        return AffineFunction(
            self.in_names, self.param_names, self.matrix + other.matrix, self.constant + other.constant
        )

    def rename(self, in_names: Sequence[str]) -> "AffineFunction":
        if len(in_names) != self.n_in:
            raise AffineError("rename must keep the index dimensionality")
        return AffineFunction(tuple(in_names), self.param_names, self.matrix, self.constant)

    def scale_inner(self, factor: int) -> "AffineFunction":
        if not self.matrix:
            return self
        rows = list(self.matrix)
        rows[-1] = tuple(factor * v for v in rows[-1])
        const = self.constant[:-1] + (factor * self.constant[-1],)
        return AffineFunction(self.in_names, self.param_names, tuple(rows), const)

    def pad_rows(self, dims: int) -> "AffineFunction":
        if self.n_out > dims:
            raise AffineError(f"map has {self.n_out} outputs, more than {dims}")
        zero = (0,) * (self.n_in + len(self.param_names))
        extra = dims - self.n_out
        return AffineFunction(
            self.in_names,
            self.param_names,
            (zero,) * extra + self.matrix,
            (0,) * extra + self.constant,
        )

    def to_text(self) -> str:
        outs = []
        names = self.in_names + self.param_names
        for row, c in zip(self.matrix, self.constant):
            outs.append(format_linear(dict(zip(names, row)), c))
        return "(" + ",".join(self.in_names) + " -> " + ",".join(outs) + ")"

    def __str__(self):
        return self.to_text()


def format_linear(coeffs: Mapping[str, int], constant: int) -> str:
    parts = []
    for name, c in coeffs.items():
        if c == 0:
            continue
        mag = abs(c)
        term = name if mag == 1 else f"{mag}*{name}"
        parts.append(("-" if c < 0 else "+", term))
    if constant or not parts:
        parts.append(("-" if constant < 0 else "+", str(abs(constant))))
    text = ""
    for i, (sign, term) in enumerate(parts):
        if i == 0:
            text = term if sign == "+" else "-" + term
        else:
            text += sign + term
    return text


def evaluate(fn: AffineFunction, point: Sequence[int], params: Mapping[str, int]) -> TimeVector:
    if len(point) != fn.n_in:
        raise AffineError(f"point {tuple(point)} has {len(point)} dims, expected {fn.n_in}")
    full = tuple(int(v) for v in point) + _bind(fn.param_names, params)
    return tuple(
        sum(a * x for a, x in zip(row, full)) + c for row, c in zip(fn.matrix, fn.constant)
    )


@dataclass(frozen=True)
class Constraint:
    """sum(coeffs * (z p)) + constant >= 0"""

    coeffs: tuple[int, ...]
    constant: int

    def value(self, full: Sequence[int]) -> int:
        return sum(a * x for a, x in zip(self.coeffs, full)) + self.constant


def _normalize(coeffs: Sequence[int], constant: int) -> tuple[tuple[int, ...], int]:
    g = reduce(gcd, (abs(c) for c in coeffs), 0)
    if g > 1:
        # tightening is exact over the integers
        return tuple(c // g for c in coeffs), constant // g
    return tuple(coeffs), constant


@dataclass(frozen=True)
class Domain:
    """Integer points satisfying a conjunction of affine inequalities."""

    index_names: tuple[str, ...]
    param_names: tuple[str, ...]
    constraints: tuple[Constraint, ...] = ()

    @classmethod
    def build(cls, index_names, param_names, rows: Iterable[tuple[Sequence[int], int]]) -> "Domain":
        width = len(index_names) + len(param_names)
        cons = []
        for coeffs, const in rows:
            if len(coeffs) != width:
                raise AffineError(f"constraint has {len(coeffs)} columns, expected {width}")
            cons.append(Constraint(tuple(int(c) for c in coeffs), int(const)))
        return cls(tuple(index_names), tuple(param_names), tuple(cons))

    @property
    def dim(self) -> int:
        return len(self.index_names)

    def intersect(self, rows: Iterable[tuple[Sequence[int], int]]) -> "Domain":
        extra = Domain.build(self.index_names, self.param_names, rows)
        return Domain(self.index_names, self.param_names, self.constraints + extra.constraints)

    def contains(self, point: Sequence[int], params: Mapping[str, int]) -> bool:
        if len(point) != self.dim:
            return False
        full = tuple(point) + _bind(self.param_names, params)
        return all(c.value(full) >= 0 for c in self.constraints)

    def enumerate(self, params: Mapping[str, int]) -> list[Point]:
        return enumerate_points(self, params)


@dataclass(frozen=True)
class PointSet:
    """A finite explicit point set; used for variables introduced by rewriting."""

    index_names: tuple[str, ...]
    points: frozenset

    @classmethod
    def of(cls, index_names, points) -> "PointSet":
        return cls(tuple(index_names), frozenset(tuple(p) for p in points))

    @property
    def dim(self) -> int:
        return len(self.index_names)

    @property
    def param_names(self) -> tuple[str, ...]:
        return ()

    def contains(self, point, params=None) -> bool:
        return tuple(point) in self.points

    def enumerate(self, params=None) -> list[Point]:
        return sorted(self.points)


def _bound_system(domain: Domain, params: Mapping[str, int]):
    """Constraints with parameters substituted: list of (coeffs over indices, const)."""
    bound = _bind(domain.param_names, params)
    n = domain.dim
    system = []
    for c in domain.constraints:
        const = c.constant + sum(a * p for a, p in zip(c.coeffs[n:], bound))
        system.append(_normalize(c.coeffs[:n], const))
    return system


def _eliminate(system, k):
    """Fourier-Motzkin elimination of variable ``k`` (rational projection)."""
    pos, neg, rest = [], [], []
    for coeffs, const in system:
        a = coeffs[k]
        (pos if a > 0 else neg if a < 0 else rest).append((coeffs, const))
    out = set(rest)
    for pc, pk in pos:
        for nc, nk in neg:
            a, b = pc[k], -nc[k]
            coeffs = tuple(b * x + a * y for x, y in zip(pc, nc))
            out.add(_normalize(coeffs, b * pk + a * nk))
    # drop tautologies; keep infeasible constant rows so scanning stops early
    return sorted(c for c in out if any(c[0]) or c[1] < 0)


def _projections(system, n):
    """proj[k] holds constraints mentioning only dimensions 0..k."""
    proj = [None] * n
    current = list(system)
    for k in range(n - 1, -1, -1):
        proj[k] = current
        if k > 0:
            current = _eliminate(current, k) if current else current
    return proj


def enumerate_points(domain: Domain, params: Mapping[str, int]) -> list[Point]:
    """All integer points of ``domain`` in lexicographic order."""
    system = _bound_system(domain, params)
    n = domain.dim
    if any(not any(c) and k < 0 for c, k in system):
        return []
    if n == 0:
        return [()]
    proj = _projections(system, n)
    out: list[Point] = []

    def scan(prefix: list[int], k: int):
        lo, hi = None, None
        for coeffs, const in proj[k]:
            a = coeffs[k]
            rest = const + sum(x * y for x, y in zip(coeffs[:k], prefix))
            if a == 0:
                if any(coeffs[k + 1 :]):
                    continue
                if rest < 0:
                    return
                continue
            if any(coeffs[k + 1 :]):
                continue
            if a > 0:  # a*x + rest >= 0  ->  x >= ceil(-rest / a)
                b = -((rest) // a)
                lo = b if lo is None else max(lo, b)
            else:  # x <= floor(rest / -a)
                b = rest // (-a)
                hi = b if hi is None else min(hi, b)
        if lo is None or hi is None:
            raise UnboundedDomainError(
                f"dimension {domain.index_names[k]!r} is unbounded under {dict(params)}"
            )
        for x in range(lo, hi + 1):
            prefix.append(x)
            if k + 1 == n:
                if all(sum(a * v for a, v in zip(c, prefix)) + kk >= 0 for c, kk in system):
                    out.append(tuple(prefix))
            else:
                scan(prefix, k + 1)
            prefix.pop()

    scan([], 0)
    return out


@dataclass(frozen=True)
class BoundingBox:
    lower: tuple[int, ...]
    upper: tuple[int, ...]

    @property
    def extents(self) -> tuple[int, ...]:
        """Number of integer positions spanned per dimension."""
        return tuple(u - l + 1 for l, u in zip(self.lower, self.upper))

    @property
    def diagonal_norm(self) -> int:
        """1-norm of the principal diagonal."""
        return sum(u - l for l, u in zip(self.lower, self.upper))

    @property
    def active_dims(self) -> int:
        return sum(1 for l, u in zip(self.lower, self.upper) if u > l)


def bounding_box(points: Sequence[Sequence[int]]) -> BoundingBox:
    if not points:
        raise AffineError("bounding box of an empty point list")
    cols = list(zip(*points))
    if not cols:
        return BoundingBox((), ())
    return BoundingBox(tuple(min(c) for c in cols), tuple(max(c) for c in cols))


def preimage(fn: AffineFunction, target: Sequence[int], domain: Domain, params=None) -> Domain:
    """Points of ``domain`` mapped onto ``target`` by ``fn``."""
    if fn.n_out != len(target):
        raise AffineError(f"map has {fn.n_out} outputs but target has {len(target)} entries")
    if fn.n_in != domain.dim:
        raise AffineError("map input dimensionality differs from the domain's")
    rows = []
    names = domain.param_names
    for r, t in enumerate(target):
        idx = fn.index_part(r)
        par = dict(zip(fn.param_names, fn.param_part(r)))
        missing = set(par) - set(names)
        if any(par[m] for m in missing):
            raise AffineError(f"map uses parameters {sorted(missing)} unknown to the domain")
        coeffs = tuple(idx) + tuple(par.get(p, 0) for p in names)
        const = fn.constant[r] - int(t)
        rows.append((coeffs, const))
        rows.append((tuple(-c for c in coeffs), -const))
    return domain.intersect(rows)
