"""Systems of affine recurrence equations: program model and text format.

The accepted grammar is documented in ``docs/sare-grammar.md``. A program
declares size parameters, input and computed variables over polyhedral
domains, and one defining equation per computed variable: either a
pointwise expression over affine accesses or a reduction.
"""

from __future__ import annotations

import operator
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence, Union

from .affine import AffineError, AffineFunction, Domain, Point, PointSet, format_linear, preimage

OPERATORS: dict[str, Callable[[int, int], int]] = {"+": operator.add, "max": max, "min": min}


class SareError(ValueError):
    """Structural problem with a program."""


class ParseError(SareError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.message, self.line, self.col = message, line, col


# ---------------------------------------------------------------- model


@dataclass(frozen=True)
class Variable:
    name: str
    domain: Union[Domain, PointSet]
    is_input: bool = False

    @property
    def dim(self) -> int:
        return self.domain.dim


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Access:
    var: str
    index_map: AffineFunction  # consumer indices -> producer indices


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - *
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


Expr = Union[Const, Access, BinOp, Neg]

_BINOPS = {"+": operator.add, "-": operator.sub, "*": operator.mul}


def eval_expr(expr: Expr, fetch: Callable[[str, Point], int], point: Point, params) -> int:
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Access):
        return fetch(expr.var, expr.index_map(point, params))
    if isinstance(expr, Neg):
        return -eval_expr(expr.operand, fetch, point, params)
    return _BINOPS[expr.op](
        eval_expr(expr.left, fetch, point, params), eval_expr(expr.right, fetch, point, params)
    )


def accesses(expr: Expr) -> list[Access]:
    if isinstance(expr, Access):
        return [expr]
    if isinstance(expr, Neg):
        return accesses(expr.operand)
    if isinstance(expr, BinOp):
        return accesses(expr.left) + accesses(expr.right)
    return []


@dataclass(frozen=True)
class PointMap:
    """Explicit projection used by rewritten programs (e.g. tile membership)."""

    in_names: tuple[str, ...]
    table: tuple[tuple[Point, Point], ...]
    n_out: int

    @classmethod
    def of(cls, in_names, mapping: Mapping[Point, Point], n_out: int) -> "PointMap":
        return cls(tuple(in_names), tuple(sorted(mapping.items())), n_out)

    @property
    def n_in(self) -> int:
        return len(self.in_names)

    def __call__(self, point, params=None) -> Point | None:
        return self._lookup.get(tuple(point))

    @property
    def _lookup(self) -> dict:
        cached = self.__dict__.get("_lookup_cache")
        if cached is None:
            cached = dict(self.table)
            object.__setattr__(self, "_lookup_cache", cached)
        return cached


@dataclass(frozen=True)
class PointwiseEquation:
    result: str
    index_names: tuple[str, ...]
    expr: Expr
    latency: int = 1


# Roles tell the simulator how an accumulation is organised:
#   result  - a reduction as written by the user (linear, never aliased)
#   slice   - equitemporal slice partial (co-available operands, box order)
#   tile    - tile partial inside a slice (box order)
#   tiles   - combination of a slice's tile partials (linear)
ROLES = ("result", "slice", "tile", "tiles")


@dataclass(frozen=True)
class ReduceEquation:
    result: str
    op: str
    projection: Union[AffineFunction, PointMap]
    body: str
    role: str = "result"

    def __post_init__(self):
        if self.op not in OPERATORS:
            raise SareError(f"unsupported reduction operator {self.op!r}")
        if self.role not in ROLES:
            raise SareError(f"unknown accumulation role {self.role!r}")


Equation = Union[PointwiseEquation, ReduceEquation]


@dataclass(frozen=True)
class Program:
    params: tuple[str, ...]
    variables: tuple[Variable, ...]
    equations: tuple[Equation, ...]
    inits: tuple[tuple[str, AffineFunction], ...] = ()
    _index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        names = [v.name for v in self.variables]
        dup = {n for n in names if names.count(n) > 1}
        if dup:
            raise SareError(f"duplicate variable {sorted(dup)[0]!r}")
        self._index.update({v.name: v for v in self.variables})
        _validate(self)

    def var(self, name: str) -> Variable:
        try:
            return self._index[name]
        except KeyError:
            raise SareError(f"unknown variable {name!r}") from None

    def equation_for(self, name: str) -> Equation | None:
        for eq in self.equations:
            if eq.result == name:
                return eq
        return None

    @property
    def reduce_equations(self) -> list[ReduceEquation]:
        return [e for e in self.equations if isinstance(e, ReduceEquation)]

    @property
    def inputs(self) -> list[Variable]:
        return [v for v in self.variables if v.is_input]

    def init_rule(self, name: str) -> AffineFunction | None:
        return dict(self.inits).get(name)

    def replace_equation(self, old: Equation, new_vars, new_eqs) -> "Program":
        eqs = []
        for e in self.equations:
            eqs.extend(new_eqs if e is old else [e])
        return Program(self.params, self.variables + tuple(new_vars), tuple(eqs), self.inits)


def _validate(prog: Program):
    defined = {}
    for eq in prog.equations:
        v = prog.var(eq.result)
        if v.is_input:
            raise SareError(f"input {v.name!r} cannot have a defining equation")
        if eq.result in defined:
            raise SareError(f"variable {eq.result!r} has more than one defining equation")
        defined[eq.result] = eq
        if isinstance(eq, PointwiseEquation):
            if len(eq.index_names) != v.dim:
                raise SareError(f"{v.name} has {v.dim} indices, equation uses {len(eq.index_names)}")
            if eq.latency < 0:
                raise SareError("latency must be non-negative")
            for acc in accesses(eq.expr):
                target = prog.var(acc.var)
                if acc.index_map.n_out != target.dim:
                    raise SareError(
                        f"access to {acc.var} has {acc.index_map.n_out} indices, expected {target.dim}"
                    )
        else:
            body = prog.var(eq.body)
            if eq.projection.n_in != body.dim:
                raise SareError(f"projection of {eq.result} expects {eq.projection.n_in} body indices")
            if eq.projection.n_out != v.dim:
                raise SareError(f"projection of {eq.result} yields {eq.projection.n_out} indices, expected {v.dim}")
    for v in prog.variables:
        if not v.is_input and v.name not in defined:
            raise SareError(f"variable {v.name!r} has no defining equation")
    for name, rule in prog.inits:
        if not prog.var(name).is_input:
            raise SareError(f"init given for non-input {name!r}")


# ---------------------------------------------------------------- queries


@dataclass(frozen=True)
class Dependence:
    """consumer(z) reads producer(index_map(z)); for reductions the map runs body -> result."""

    consumer: str
    producer: str
    index_map: Union[AffineFunction, PointMap]
    kind: str  # "reduction" | "pointwise"


def dependences(program: Program) -> list[Dependence]:
    deps = []
    for eq in program.equations:
        if isinstance(eq, ReduceEquation):
            deps.append(Dependence(eq.result, eq.body, eq.projection, "reduction"))
        else:
            for acc in accesses(eq.expr):
                deps.append(Dependence(eq.result, acc.var, acc.index_map, "pointwise"))
    return deps


def reduction_fibers(program: Program, eq: ReduceEquation, params, strict: bool = True) -> dict[Point, list[Point]]:
    """Map each result point to its body points (lexicographic).

    With ``strict`` an empty fiber is an error, since the reduction has no
    value there.
    """
    body = program.var(eq.body)
    result = program.var(eq.result)
    fibers: dict[Point, list[Point]] = {p: [] for p in result.domain.enumerate(params)}
    for z in body.domain.enumerate(params):
        target = eq.projection(z, params)
        if target is not None and target in fibers:
            fibers[target].append(z)
    empty = [p for p, pts in fibers.items() if not pts]
    if empty and strict:
        raise SareError(f"reduction {eq.result}{empty[0]} has an empty reduction domain")
    return fibers


def reduction_domain(program: Program, eq: ReduceEquation, z_x: Sequence[int], params) -> Domain:
    """The body points projected onto ``z_x`` (the parametrized reduction domain)."""
    result = program.var(eq.result)
    body = program.var(eq.body)
    z_x = tuple(z_x)
    if len(z_x) != result.dim or not result.domain.contains(z_x, params):
        raise SareError(f"{z_x} is outside Dom({eq.result})")
    if not isinstance(eq.projection, AffineFunction) or not isinstance(body.domain, Domain):
        raise SareError("reduction_domain needs an affine projection over a polyhedral body")
    dom = preimage(eq.projection, z_x, body.domain, params)
    if not dom.enumerate(params):
        raise SareError(f"P({eq.result}{z_x}) is empty; the reduction is undefined there")
    return dom


def check_accesses(program: Program, params) -> None:
    """Every pointwise access must land in the accessed variable's domain."""
    for eq in program.equations:
        if not isinstance(eq, PointwiseEquation):
            continue
        for z in program.var(eq.result).domain.enumerate(params):
            for acc in accesses(eq.expr):
                q = acc.index_map(z, params)
                if not program.var(acc.var).domain.contains(q, params):
                    raise SareError(f"{eq.result}{z} reads {acc.var}{q} outside its domain")


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)|(?P<comment>#[^\n]*)|(?P<int>\d+)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op><=|>=|==|->|[<>{}()|,;=+\-*@])"
)
KEYWORDS = {"param", "input", "var", "init", "reduce", "and", "max", "min"}


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks, pos, line, col0 = [], 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - col0 + 1)
        kind = m.lastgroup
        if kind == "nl":
            line, col0 = line + 1, m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, m.start() - col0 + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - col0 + 1))
    return toks


class _Parser:
    def __init__(self, text: str, params: Sequence[str] = ()):
        self.toks = _tokenize(text)
        self.i = 0
        self.params: list[str] = list(params)

    # token helpers
    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.tok
        raise ParseError(msg, tok.line, tok.col)

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind in ("op", "name"):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> _Tok:
        tok = self.tok
        if not self.accept(text):
            self.fail(f"expected {text!r}, found {tok.text or 'end of input'!r}")
        return tok

    def name(self) -> str:
        tok = self.tok
        if tok.kind != "name" or tok.text in KEYWORDS:
            self.fail(f"expected a name, found {tok.text or 'end of input'!r}")
        self.i += 1
        return tok.text

    def names(self, close: str) -> list[str]:
        out = []
        if self.tok.text != close:
            out.append(self.name())
            while self.accept(","):
                out.append(self.name())
        return out

    # affine expressions over a fixed set of index names plus parameters
    def affine(self, idx: Sequence[str]) -> tuple[dict[str, int], int]:
        coeffs: dict[str, int] = {}
        const = 0
        sign = 1
        if self.accept("-"):
            sign = -1
        else:
            self.accept("+")
        while True:
            c, name = self.aterm(idx)
            if name is None:
                const += sign * c
            else:
                coeffs[name] = coeffs.get(name, 0) + sign * c
            if self.accept("+"):
                sign = 1
            elif self.tok.text == "-" and self.toks[self.i + 1].text != ">":
                self.i += 1
                sign = -1
            else:
                return coeffs, const

    def aterm(self, idx) -> tuple[int, str | None]:
        tok = self.tok
        if tok.kind == "int":
            self.i += 1
            if self.accept("*"):
                return int(tok.text), self.known(idx)
            return int(tok.text), None
        if tok.kind == "name":
            name = self.known(idx)
            if self.accept("*"):
                t = self.tok
                if t.kind != "int":
                    self.fail("non-affine product")
                self.i += 1
                return int(t.text), name
            return 1, name
        self.fail(f"expected an affine term, found {tok.text or 'end of input'!r}")

    def known(self, idx) -> str:
        tok = self.tok
        name = self.name()
        if name not in idx and name not in self.params:
            self.fail(f"unknown index or parameter {name!r}", tok)
        return name

    def affine_row(self, idx) -> tuple[list[int], int]:
        coeffs, const = self.affine(idx)
        cols = list(idx) + list(self.params)
        return [coeffs.get(n, 0) for n in cols], const

    def affine_map(self, idx, outs_close: str = ")") -> AffineFunction:
        rows, consts = [], []
        if self.tok.text != outs_close:
            while True:
                r, c = self.affine_row(idx)
                rows.append(r)
                consts.append(c)
                if not self.accept(","):
                    break
        return AffineFunction.build(idx, self.params, rows, consts)

    def domain(self) -> Domain:
        self.expect("{")
        idx = self.names("|") if self.tok.text not in ("|", "}") else []
        if len(set(idx)) != len(idx):
            self.fail("repeated index name")
        rows = []
        if self.accept("|"):
            if self.tok.text != "}":
                rows.extend(self.comparison(idx))
                while self.accept("and"):
                    rows.extend(self.comparison(idx))
        self.expect("}")
        return Domain.build(idx, self.params, rows)

    def comparison(self, idx):
        lhs, lc = self.affine_row(idx)
        tok = self.tok
        if tok.text not in ("<=", ">=", "<", ">", "=="):
            self.fail(f"expected a comparison, found {tok.text or 'end of input'!r}")
        self.i += 1
        rhs, rc = self.affine_row(idx)
        diff = [b - a for a, b in zip(lhs, rhs)]  # rhs - lhs
        dc = rc - lc
        neg = [-d for d in diff]
        if tok.text == "<=":
            return [(diff, dc)]
        if tok.text == "<":
            return [(diff, dc - 1)]
        if tok.text == ">=":
            return [(neg, -dc)]
        if tok.text == ">":
            return [(neg, -dc - 1)]
        return [(diff, dc), (neg, -dc)]

    # value expressions
    def expr(self, idx) -> Expr:
        node = self.term(idx)
        while self.tok.text in ("+", "-"):
            op = self.tok.text
            self.i += 1
            node = BinOp(op, node, self.term(idx))
        return node

    def term(self, idx) -> Expr:
        node = self.factor(idx)
        while self.accept("*"):
            node = BinOp("*", node, self.factor(idx))
        return node

    def factor(self, idx) -> Expr:
        tok = self.tok
        if tok.kind == "int":
            self.i += 1
            return Const(int(tok.text))
        if self.accept("-"):
            return Neg(self.factor(idx))
        if self.accept("("):
            node = self.expr(idx)
            self.expect(")")
            return node
        if tok.kind == "name" and tok.text not in KEYWORDS:
            name = self.name()
            self.expect("(")
            fn = self.affine_map(idx)
            self.expect(")")
            return Access(name, fn)
        self.fail(f"unexpected {tok.text or 'end of input'!r} in expression")


@dataclass
class _Decl:
    name: str
    domain: Domain
    is_input: bool
    tok: _Tok


def parse_program(text: str) -> Program:
    p = _Parser(text)
    if p.tok.kind == "eof":
        raise ParseError("no program")
    decls: dict[str, _Decl] = {}
    eqs: list[tuple[Equation, _Tok]] = []
    inits: list[tuple[str, AffineFunction, _Tok]] = []
    while p.tok.kind != "eof":
        tok = p.tok
        if p.accept("param"):
            while True:
                n = p.name()
                if n in p.params:
                    p.fail(f"duplicate parameter {n!r}", tok)
                p.params.append(n)
                if not p.accept(","):
                    break
            p.expect(";")
        elif p.tok.text in ("input", "var"):
            is_input = p.tok.text == "input"
            p.i += 1
            ntok = p.tok
            name = p.name()
            if name in decls:
                p.fail(f"duplicate variable {name!r}", ntok)
            decls[name] = _Decl(name, p.domain(), is_input, ntok)
            p.expect(";")
        elif p.accept("init"):
            name = p.name()
            p.expect("(")
            idx = p.names(")")
            p.expect(")")
            p.expect("=")
            row, const = p.affine_row(idx)
            p.expect(";")
            inits.append((name, AffineFunction.build(idx, p.params, [row], [const]), tok))
        elif tok.kind == "name":
            eqs.append((_equation(p), tok))
        else:
            p.fail(f"unexpected {tok.text!r}")
    # parameters declared after domains would silently change widths
    width_params = tuple(p.params)
    variables = []
    for d in decls.values():
        if d.domain.param_names != width_params:
            d.domain = _widen_domain(d.domain, width_params)
        variables.append(Variable(d.name, d.domain, d.is_input))
    known = set(decls)
    final_eqs = []
    for eq, tok in eqs:
        for name in _names_used(eq):
            if name not in known:
                raise ParseError(f"unknown variable {name!r}", tok.line, tok.col)
        final_eqs.append(_widen_equation(eq, width_params))
    for name, _, tok in inits:
        if name not in known:
            raise ParseError(f"unknown variable {name!r}", tok.line, tok.col)
    try:
        return Program(
            width_params,
            tuple(variables),
            tuple(final_eqs),
            tuple((n, _widen_map(f, width_params)) for n, f, _ in inits),
        )
    except (SareError, AffineError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(str(exc)) from None


def _equation(p: _Parser) -> Equation:
    result = p.name()
    idx: list[str] = []
    if p.accept("("):
        idx = p.names(")")
        p.expect(")")
    p.expect("=")
    if p.accept("reduce"):
        p.expect("(")
        tok = p.tok
        if p.accept("+"):
            op = "+"
        elif p.accept("max"):
            op = "max"
        elif p.accept("min"):
            op = "min"
        else:
            p.fail(f"unsupported reduction operator {tok.text!r}")
        p.expect(",")
        p.expect("(")
        body_idx = p.names("->")
        p.expect("->")
        proj = p.affine_map(body_idx)
        p.expect(")")
        p.expect(",")
        btok = p.tok
        body = p.name()
        p.expect("(")
        used = p.names(")")
        p.expect(")")
        if used != body_idx:
            p.fail("reduction body must be accessed with the projection's own indices", btok)
        if len(idx) != proj.n_out:
            p.fail(f"{result} has {len(idx)} indices but the projection yields {proj.n_out}", btok)
        p.expect(")")
        p.expect(";")
        return ReduceEquation(result, op, proj, body)
    expr = p.expr(idx)
    latency = 1
    if p.accept("@"):
        if p.name() != "latency":
            p.fail("only @latency annotations are supported", p.toks[p.i - 1])
        t = p.tok
        if t.kind != "int":
            p.fail("expected an integer latency")
        p.i += 1
        latency = int(t.text)
    p.expect(";")
    return PointwiseEquation(result, tuple(idx), expr, latency)


def _names_used(eq: Equation) -> list[str]:
    if isinstance(eq, ReduceEquation):
        return [eq.result, eq.body]
    return [eq.result] + [a.var for a in accesses(eq.expr)]


def _widen_map(fn: AffineFunction, params) -> AffineFunction:
    if fn.param_names == tuple(params):
        return fn
    n = fn.n_in
    rows = []
    for row in fn.matrix:
        old = dict(zip(fn.param_names, row[n:]))
        rows.append(tuple(row[:n]) + tuple(old.get(q, 0) for q in params))
    return AffineFunction.build(fn.in_names, params, rows, fn.constant)


def _widen_domain(dom: Domain, params) -> Domain:
    n = dom.dim
    rows = []
    for c in dom.constraints:
        old = dict(zip(dom.param_names, c.coeffs[n:]))
        rows.append((tuple(c.coeffs[:n]) + tuple(old.get(q, 0) for q in params), c.constant))
    return Domain.build(dom.index_names, params, rows)


def _widen_expr(e: Expr, params) -> Expr:
    if isinstance(e, Access):
        return Access(e.var, _widen_map(e.index_map, params))
    if isinstance(e, Neg):
        return Neg(_widen_expr(e.operand, params))
    if isinstance(e, BinOp):
        return BinOp(e.op, _widen_expr(e.left, params), _widen_expr(e.right, params))
    return e


def _widen_equation(eq: Equation, params) -> Equation:
    if isinstance(eq, ReduceEquation):
        return ReduceEquation(eq.result, eq.op, _widen_map(eq.projection, params), eq.body, eq.role)
    return PointwiseEquation(eq.result, eq.index_names, _widen_expr(eq.expr, params), eq.latency)


def parse_affine_map(text: str, params: Sequence[str] = ()) -> AffineFunction:
    """Parse ``(i,j -> i-j, N)`` style map text."""
    p = _Parser(text, params)
    p.expect("(")
    idx = p.names("->")
    p.expect("->")
    fn = p.affine_map(idx)
    p.expect(")")
    if p.tok.kind != "eof":
        p.fail(f"trailing input {p.tok.text!r}")
    return fn


# ---------------------------------------------------------------- printing


def _fmt_access_args(fn: AffineFunction) -> str:
    names = fn.in_names + fn.param_names
    return ",".join(format_linear(dict(zip(names, row)), c) for row, c in zip(fn.matrix, fn.constant))


def format_expr(e: Expr, prec: int = 0) -> str:
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, Access):
        return f"{e.var}({_fmt_access_args(e.index_map)})"
    if isinstance(e, Neg):
        return "-" + format_expr(e.operand, 3)
    mine = 1 if e.op in "+-" else 2
    text = f"{format_expr(e.left, mine)} {e.op} {format_expr(e.right, mine + 1)}"
    return f"({text})" if mine < prec else text


def _fmt_domain(dom: Domain) -> str:
    names = dom.index_names + dom.param_names
    conds = [
        f"0 <= {format_linear(dict(zip(names, c.coeffs)), c.constant)}" for c in dom.constraints
    ]
    head = ",".join(dom.index_names)
    if not conds:
        return "{" + head + "}"
    return "{" + head + " | " + " and ".join(conds) + "}"


def format_program(prog: Program) -> str:
    lines = []
    if prog.params:
        lines.append("param " + ", ".join(prog.params) + ";")
    for v in prog.variables:
        if not isinstance(v.domain, Domain):
            raise SareError(f"{v.name} has an explicit point-set domain and cannot be printed")
        lines.append(f"{'input' if v.is_input else 'var'} {v.name} {_fmt_domain(v.domain)};")
    for name, rule in prog.inits:
        lines.append(f"init {name}({','.join(rule.in_names)}) = {_fmt_access_args(rule)};")
    for eq in prog.equations:
        if isinstance(eq, ReduceEquation):
            if not isinstance(eq.projection, AffineFunction):
                raise SareError(f"{eq.result} uses an explicit projection and cannot be printed")
            proj = eq.projection
            out_names = [f"o{k}" for k in range(proj.n_out)]
            lines.append(
                f"{eq.result}({','.join(out_names)}) = reduce({eq.op}, "
                f"({','.join(proj.in_names)} -> {_fmt_access_args(proj)}), "
                f"{eq.body}({','.join(proj.in_names)}));"
            )
        else:
            lat = f" @latency {eq.latency}" if eq.latency != 1 else ""
            lines.append(f"{eq.result}({','.join(eq.index_names)}) = {format_expr(eq.expr)}{lat};")
    return "\n".join(lines) + "\n"
