"""Command-line entry point: schedule, simulate, plot and explain SARE programs."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .constraints import check_conditions
from .pipeline import (
    REGIMES,
    RunConfig,
    load_program,
    prepare,
    resolve_lambdas,
    run,
    simulate_result,
)
from .solver import Schedule, SolverError
from .svg import render_all

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_VERIFY = 0, 1, 2, 3


class InputError(Exception):
    pass


def _dump(path: str, data) -> None:
    with open(path, "w") as fh:
        fh.write(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _params(items) -> dict[str, int]:
    out = {}
    for item in items or []:
        for part in item.split(","):
            if not part.strip():
                continue
            name, sep, value = part.partition("=")
            name = name.strip()
            if not sep or not name:
                raise InputError(f"parameter binding {part!r} is not of the form NAME=VALUE")
            if name in out:
                raise InputError(f"parameter {name} is bound twice")
            try:
                out[name] = int(value)
            except ValueError:
                raise InputError(f"parameter {name} needs an integer value, got {value!r}") from None
    return out


def _lambda_spec(items):
    """A single map applies to every reduction; RESULT=MAP entries name one each."""
    if not items:
        return None
    if len(items) == 1 and not _named(items[0]):
        return items[0]
    spec = {}
    for item in items:
        if not _named(item):
            raise InputError("with several --lambda-r values each must be RESULT=MAP")
        name, _, text = item.partition("=")
        spec[name.strip()] = text.strip()
    return spec


def _named(item: str) -> bool:
    head = item.split("=", 1)[0]
    return "=" in item and "(" not in head and head.strip().isidentifier()


def _tile_size(text):
    if text is None or text == "auto":
        return text
    try:
        return int(text)
    except ValueError:
        raise InputError(f"--tile-size takes 'auto' or an integer, got {text!r}") from None


def _config(args) -> RunConfig:
    return RunConfig(
        _params(args.params), args.regime, _lambda_spec(args.lambda_r), args.lambda_mode,
        _tile_size(args.tile_size), args.coeff_bound, args.seed, args.form,
    )


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _write_plots(program, schedule, params, decomps, tilings, out) -> list[str]:
    plots = render_all(program, schedule, params, decomps, tilings)
    for note in plots.notices:
        print(f"notice: {note}", file=sys.stderr)
    paths = []
    for p in plots.plots:
        path = os.path.join(out, f"{p.var}.svg")
        with open(path, "w") as fh:
            fh.write(p.svg)
        paths.append(path)
    return paths


def _summary(report: dict) -> str:
    lines = [f"status: {report['status']}"]
    if report.get("message"):
        lines.append(f"  {report['message']}")
    for k, v in report.get("lambda_r", {}).items():
        lines.append(f"lambda_R[{k}] = {v}")
    for k, v in report.get("tile_size", {}).items():
        lines.append(f"tile size for {k}: s={v['s']} (max |omega| {v['objective']})")
    if "makespan" in report:
        lines.append(f"makespan: {tuple(report['makespan'])}")
        for k, v in report["schedule"].items():
            lines.append(f"  {k}: {v}")
        lines.append(f"verified against constraints: {report['verified']}")
        for k, conds in report.get("conditions", {}).items():
            bad_span = sum(1 for c in conds if not c["span_ok"])
            bad_write = sum(1 for c in conds if not c["write_ok"])
            lines.append(f"  {k}: span condition fails on {bad_span}, write condition fails on {bad_write} of {len(conds)}")
    return "\n".join(lines)


# ---------------------------------------------------------------- commands


def cmd_schedule(args) -> int:
    program = load_program(args.input)
    config = _config(args)
    try:
        res = run(program, config)
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    out = _outdir(args)
    report = res.report()
    _dump(os.path.join(out, "constraints.json"), res.system.to_json())
    _dump(os.path.join(out, "report.json"), report)
    print(_summary(report))
    if not res.ok:
        print(f"error: {res.result.status}: {res.result.message}", file=sys.stderr)
        return EXIT_INFEASIBLE
    with open(os.path.join(out, "schedule.json"), "w") as fh:
        fh.write(res.schedule.dumps() + "\n")
    if args.plot:
        _write_plots(res.rewritten, res.schedule, config.params, res.decomps, res.tilings, out)
    if not res.verified:
        print(f"error: schedule violates {res.failed}", file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def _load_schedule(args):
    """Rebuild the rewritten program a saved schedule belongs to."""
    path = args.schedule or os.path.join(args.out, "schedule.json")
    try:
        with open(path) as fh:
            schedule = Schedule.loads(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read schedule {path}: {exc}") from exc
    meta = schedule.meta
    if "config" not in meta or "lambda_r" not in meta:
        raise InputError(f"{path} carries no run configuration")
    try:
        config = RunConfig.from_json(meta["config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path} has a malformed run configuration: {exc}") from exc
    given = _params(args.params)
    if given and given != config.params:
        raise InputError(f"parameters {given} differ from those the schedule was built for {config.params}")
    program = load_program(args.input)
    lambdas = resolve_lambdas(program, meta["lambda_r"])
    prep = prepare(program, config, lambdas)
    for v in prep.rewritten.variables:
        need = not v.is_input or schedule.has(v.name)
        if not need:
            continue
        if not schedule.has(v.name):
            raise InputError(f"schedule has no time function for {v.name}; was it built for this program?")
        if schedule.functions[v.name].n_in != v.dim:
            raise InputError(f"schedule for {v.name} expects {schedule.functions[v.name].n_in} indices, program has {v.dim}")
    return program, config, prep, schedule


def cmd_simulate(args) -> int:
    program, config, prep, schedule = _load_schedule(args)
    seed = args.seed if args.seed is not None else config.seed
    rep = simulate_result(program, prep.rewritten, schedule, config.params, seed)
    out = _outdir(args)
    with open(os.path.join(out, "trace.jsonl"), "w") as fh:
        fh.write(rep.trace.to_jsonl())
    data = rep.to_json()
    data["work_efficient"] = rep.work_ok
    data["oracle_agrees"] = not rep.mismatches
    _dump(os.path.join(out, "violations.json"), data)
    counts = {}
    for v in rep.violations:
        counts[v.kind] = counts.get(v.kind, 0) + 1
    print(f"events: {len(rep.trace.events)}")
    print(f"violations: {dict(sorted(counts.items())) or 'none'}")
    print(f"oracle agreement: {'yes' if not rep.mismatches else f'no ({len(rep.mismatches)} mismatches)'}")
    print(f"work efficient: {'yes' if rep.work_ok else 'no'}")
    return EXIT_OK if rep.clean else EXIT_VERIFY


def cmd_plot(args) -> int:
    program, config, prep, schedule = _load_schedule(args)
    out = _outdir(args)
    for path in _write_plots(prep.rewritten, schedule, config.params, prep.decomps, prep.tilings, out):
        print(path)
    return EXIT_OK


def cmd_explain(args) -> int:
    """Print the decomposition and the constraint system without solving."""
    program = load_program(args.input)
    config = _config(args)
    if config.lambda_r is None:
        raise InputError("explain needs --lambda-r")
    lambdas = resolve_lambdas(program, config.lambda_r)
    prep = prepare(program, config, lambdas)
    for dec in prep.decomps:
        X = dec.equation.result
        print(f"reduction {X} over {dec.equation.body} with lambda_R = {dec.lambda_r.to_text()}")
        for c in check_conditions(dec):
            print(
                f"  {X}{tuple(c['z_X'])}: {len(dec.by_owner[tuple(c['z_X'])])} slices, span {c['T']}, "
                f"size' {c['size_prime']}"
            )
        for sl in dec.all_slices():
            print(f"    t={sl.time} size {sl.size} dims {sl.dims} points {len(sl.points)}")
    for tdec in prep.tilings:
        print(f"tiles for {tdec.slices.equation.result}: s={tdec.tile_size}")
    print(f"rewritten program variables: {', '.join(v.name for v in prep.rewritten.variables)}")
    print(f"{len(prep.system.constraints)} constraints")
    for origin in sorted(prep.system.origins(), key=lambda o: (len(o), o)):
        group = prep.system.by_origin(origin)
        print(f"[{origin}] {len(group)}")
        for c in group[: args.limit]:
            print(f"  {c.describe()}")
        if len(group) > args.limit:
            print(f"  ... {len(group) - args.limit} more")
    return EXIT_OK


# ---------------------------------------------------------------- parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="redsched", description="Schedule reductions in affine recurrence equations.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, solve=True):
        p.add_argument("input", help="SARE program file")
        p.add_argument("--params", action="append", metavar="N=9", help="parameter bindings, repeatable or comma separated")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--seed", type=int, default=None if not solve else 42, help="seed for generated inputs")
        if solve:
            p.add_argument("--regime", choices=REGIMES, default="fixed")
            p.add_argument("--lambda-r", action="append", metavar="MAP",
                           help="body schedule such as '(i,j->i)', or RESULT=MAP per reduction; omit to search")
            p.add_argument("--lambda-mode", choices=("fixed", "joint"), default="fixed",
                           help="pin bodies to lambda_R or only use it to slice")
            p.add_argument("--tile-size", default=None, help="'auto' or an integer (tiled regime)")
            p.add_argument("--coeff-bound", type=int, default=8, help="coefficient bound B (default 8)")
            p.add_argument("--form", choices=("reduced", "full", "both"), default="reduced",
                           help="which result constraints the gupta and fixed regimes emit")
        else:
            p.add_argument("--schedule", help="schedule JSON (default: OUT/schedule.json)")

    p = sub.add_parser("schedule", help="decompose, constrain and solve")
    common(p)
    p.add_argument("--plot", action="store_true", help="also write SVG plots")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("simulate", help="run a saved schedule on the exclusive-write machine")
    common(p, solve=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("plot", help="write SVG iteration-space plots for a saved schedule")
    common(p, solve=False)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("explain", help="print slices and constraints without solving")
    common(p)
    p.add_argument("--limit", type=int, default=20, help="constraints shown per origin")
    p.set_defaults(func=cmd_explain)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ValueError, OSError) as exc:
        # every library error type derives from ValueError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
