"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 model or input error, 3 runtime
failure (state-space cap exceeded, non-convergence, numerical blow-up).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis, dsl, odelimit, stategraph
from .engine import DEFAULT_SEED, Mode, RunSpec, run
from .engine.kernel import BACKEND
from .model import (
    Configuration,
    GcpsModel,
    ModelError,
    PopulationProtocol,
    Transition,
    gcps_to_pp,
    pp_to_gcps,
)
from .presets import PRESETS, preset_text

EXIT_USAGE = 1
EXIT_MODEL = 2
EXIT_RUNTIME = 3


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read(path: str) -> str:
    p = Path(path)
    if p.is_file():
        return p.read_text(encoding="utf-8")
    name = p.name.removesuffix(".gcps")
    if not p.parent.parts and name in PRESETS:
        return preset_text(name)
    raise InputError(f"{path}: no such file (presets: {', '.join(PRESETS)})")


def load_model(path: str) -> GcpsModel:
    text = _read(path)
    try:
        return dsl.parse_model(text)
    except dsl.ParseError as exc:
        raise InputError(f"{path}: {exc}") from None


def _int_list(text: str, n: int, what: str) -> list[int]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != n or not all(p.isdigit() for p in parts):
        raise UsageError(f"{what} needs {n} non-negative integers, got {text!r}")
    return [int(p) for p in parts]


def _float_list(text: str, n: int, what: str) -> list[float]:
    parts = [p for p in text.replace(",", " ").split() if p]
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"{what}: not numbers: {text!r}") from None
    if len(vals) != n:
        raise UsageError(f"{what} needs {n} values, got {len(vals)}")
    return vals


def _one_symbol_init(m: GcpsModel, text: str) -> Configuration:
    if not m.is_one_symbol:
        raise UsageError("--init only supports one-symbol models")
    counts = _int_list(text, m.n_cells, "--init")
    return Configuration.from_counts([{m.alphabet[0]: n} for n in counts])


def rescale(counts: list[int], agents: int) -> list[int]:
    """Distribute ``agents`` over cells proportionally to ``counts`` (largest remainder)."""
    total = sum(counts)
    if total == 0:
        shares = [agents] + [0] * (len(counts) - 1)
        return shares
    exact = [agents * c / total for c in counts]
    base = [math.floor(x) for x in exact]
    order = sorted(range(len(counts)), key=lambda q: (-(exact[q] - base[q]), q))
    for q in order[: agents - sum(base)]:
        base[q] += 1
    return base


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _record(value: str):
    if value in ("all", "final"):
        return value
    if value.startswith("stride="):
        k = value.split("=", 1)[1]
        if k.isdigit() and int(k) >= 1:
            return int(k)
    raise argparse.ArgumentTypeError("expected all, final or stride=k")


def _seed(value: str) -> int:
    try:
        s = int(value, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {value!r}") from None
    if not 0 <= s < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return s


def _initial(args, m: GcpsModel) -> Configuration:
    if getattr(args, "init", None):
        return _one_symbol_init(m, args.init)
    if getattr(args, "agents", None) is not None:
        if not m.is_one_symbol:
            raise UsageError("--agents only supports one-symbol models")
        counts = rescale(list(m.initial.token_counts()), args.agents)
        return Configuration.from_counts([{m.alphabet[0]: n} for n in counts])
    return m.initial


def cmd_run(args) -> None:
    m = load_model(args.model)
    spec = RunSpec(Mode(args.mode), max_steps=args.max_steps, max_time=args.max_time,
                   until_halt=args.until_halt, seed=args.seed, record=args.record)
    t = run(m, _initial(args, m), spec)
    if args.format == "json":
        doc = {"model": m.name, "mode": spec.mode.value, "seed": spec.seed,
               "steps": t.steps, "halted": t.halted, "stop_reason": t.stop_reason,
               "final_time": float(t.times[-1]), "final": list(t.final.token_counts())}
        _emit(args, json.dumps(doc, indent=1) + "\n")
    else:
        _emit(args, t.to_csv())


def cmd_ensemble(args) -> None:
    m = load_model(args.model)
    grid = odelimit._grid(args.grid_dt, args.t_end)
    spec = RunSpec(Mode(args.mode), max_time=args.t_end, seed=args.seed, record="all")
    e = analysis.ensemble(m, _initial(args, m), spec, args.runs, grid, jobs=args.jobs)
    if args.format == "json":
        doc = {"runs": e.runs, "master_seed": e.master_seed, "times": e.times.tolist(),
               "mean": e.mean.tolist(), "std": e.std.tolist()}
        _emit(args, json.dumps(doc) + "\n")
    else:
        _emit(args, e.to_csv())


def cmd_graph(args) -> None:
    m = load_model(args.model)
    g = stategraph.build_state_graph(m, _initial(args, m), args.max_nodes)
    scc = stategraph.terminal_sccs(g)
    if args.dot:
        Path(args.dot).write_text(stategraph.to_dot(g, scc), encoding="utf-8")
    if args.condensation_dot:
        Path(args.condensation_dot).write_text(stategraph.condensation_to_dot(g, scc),
                                               encoding="utf-8")
    halting = g.halting_nodes()
    doc = {
        "nodes": g.n_nodes,
        "edges": len(g.edges),
        "root": list(g.cell_counts(g.root)),
        "components": len(scc.components),
        "terminal_components": [[list(g.cell_counts(v)) for v in scc.components[c]]
                                for c in scc.terminal_components()],
        "halting": [list(g.cell_counts(v)) for v in halting],
        "generated_set": sorted({g.cell_counts(v)[m.output_cell - 1] for v in halting}),
    }
    _emit(args, json.dumps(doc, indent=1) + "\n")


def _load_system(path: str) -> tuple[odelimit.OdeSystem, GcpsModel | None]:
    text = _read(path)
    if path.endswith(".json"):
        try:
            return dsl.parse_ode_system(text), None
        except dsl.ParseError as exc:
            raise InputError(f"{path}: {exc}") from None
    m = load_model(path)
    return odelimit.derive_odes(m), m


def cmd_ode(args) -> None:
    s, m = _load_system(args.model)
    if args.init:
        y0 = _float_list(args.init, s.n_vars, "--init")
    elif m is not None:
        y0 = [float(x) for x in m.initial.token_counts()]
    elif args.fixed_point or args.t_end is not None:
        raise UsageError("--init is required for an ODE system file")
    if args.fixed_point:
        point = odelimit.find_fixed_point(s, y0, tol=args.tol, dt=args.dt,
                                          max_time=args.t_end)
        total = float(point.sum())
        doc = {"fixed_point": point.tolist(),
               "shares": (point / total).tolist() if total > 0 else None}
        _emit(args, json.dumps(doc, indent=1) + "\n")
    elif args.t_end is not None:
        if args.dt is None:
            raise UsageError("--dt is required with --t-end")
        _emit(args, odelimit.integrate(s, y0, args.dt, args.t_end).to_csv())
    else:
        _emit(args, dsl.serialize_ode_system(s))


def cmd_synth(args) -> None:
    text = _read(args.system)
    try:
        s = dsl.parse_ode_system(text)
    except dsl.ParseError as exc:
        raise InputError(f"{args.system}: {exc}") from None
    init = _int_list(args.init, s.n_vars, "--init") if args.init else None
    m = odelimit.odes_to_gcps(s, init)
    _emit(args, dsl.serialize_model(m))


def _read_csv(path: str) -> tuple[np.ndarray, np.ndarray, list[str]]:
    rows = list(csv.reader(io.StringIO(_read(path))))
    if not rows or rows[0][0] != "time":
        raise InputError(f"{path}: expected a CSV with a leading 'time' column")
    head = rows[0]
    if any(h.startswith("mean_") for h in head):
        cols = [n for n, h in enumerate(head) if h.startswith("mean_")]
    elif any(h.startswith("Y_") for h in head):
        cols = [n for n, h in enumerate(head) if h.startswith("Y_")]
    elif any(h.startswith("cell_") for h in head):
        cols = [n for n, h in enumerate(head) if h.startswith("cell_")]
    else:
        raise InputError(f"{path}: no value columns (mean_*, Y_* or cell_*)")
    try:
        times = np.array([float(r[0]) for r in rows[1:]])
        values = np.array([[float(r[c]) for c in cols] for r in rows[1:]])
    except (ValueError, IndexError):
        raise InputError(f"{path}: malformed row") from None
    return times, values.reshape(len(times), len(cols)), [head[c] for c in cols]


def cmd_compare(args) -> None:
    ta, va, _ = _read_csv(args.first)
    tb, vb, _ = _read_csv(args.second)
    try:
        report = analysis.compare_series(ta, va, tb, vb)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    _emit(args, report.to_json())


def _parse_population(text: str) -> dict[str, int]:
    out: dict[str, int] = {}
    for item in text.replace(",", " ").split():
        sym, _, n = item.partition("=")
        if not n.isdigit():
            raise UsageError(f"--input expects sym=count items, got {item!r}")
        out[sym] = out.get(sym, 0) + int(n)
    return out


def pp_from_json(text: str) -> PopulationProtocol:
    try:
        doc = json.loads(text)
        delta = []
        for entry in doc["delta"]:
            if len(entry) not in (4, 5):
                raise ValueError("delta entries are [q1,q2,q1p,q2p(,rate)]")
            q = [str(x) for x in entry[:4]]
            delta.append(Transition(*q, float(entry[4]) if len(entry) == 5 else 1.0))
        return PopulationProtocol(tuple(str(s) for s in doc["states"]),
                                  tuple(str(s) for s in doc["inputs"]),
                                  {str(k): str(v) for k, v in doc["init_map"].items()},
                                  {str(k): int(v) for k, v in doc["output_map"].items()},
                                  tuple(delta))
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"bad protocol document: {exc}") from None


def pp_to_json(p: PopulationProtocol) -> str:
    doc = {
        "states": list(p.states),
        "inputs": list(p.inputs),
        "init_map": {k: p.init_map[k] for k in p.inputs},
        "output_map": {k: p.output_map[k] for k in p.states},
        "delta": [[t.q1, t.q2, t.q1p, t.q2p, t.rate] for t in p.delta],
    }
    return json.dumps(doc, indent=1) + "\n"


def cmd_convert(args) -> None:
    if args.source.endswith(".json"):
        p = pp_from_json(_read(args.source))
        if not args.input:
            raise UsageError("converting a protocol needs --input sym=count ...")
        m, _ = pp_to_gcps(p, _parse_population(args.input))
        _emit(args, dsl.serialize_model(m))
    else:
        m = load_model(args.source)
        _emit(args, pp_to_json(gcps_to_pp(m)))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_seed, default=DEFAULT_SEED,
                        help=f"64-bit seed of the PCG64 generator (default {DEFAULT_SEED})")
    common.add_argument("--out", help="output file (default: standard output)")
    common.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="output format where both are supported (default csv)")

    parser = _Parser(prog="gcps", description="Generalized communicating P systems in the "
                     "fair sequential mode: simulation, state graphs and ODE limits.")
    parser.add_argument("--version", action="version", version=f"gcps 0.1.0 ({BACKEND} kernel)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", parents=[common], help="simulate one run and write its trajectory")
    p.add_argument("model", help="model file or preset name")
    p.add_argument("--mode", choices=[m.value for m in Mode], default="ssa",
                   help="seq, maxpar, equi (equiprobable), ssa (Gillespie direct), "
                        "ssa-fr (first reaction)")
    stop = p.add_mutually_exclusive_group(required=True)
    stop.add_argument("--max-steps", type=int, help="stop after N events")
    stop.add_argument("--max-time", type=float, help="stop at time T (steps for discrete modes)")
    stop.add_argument("--until-halt", action="store_true", help="run until no rule applies")
    p.add_argument("--record", type=_record, default="all", help="all | stride=k | final")
    p.add_argument("--init", help="per-cell token counts overriding the model's initial state")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("ensemble", parents=[common], help="mean/std over independent runs")
    p.add_argument("model")
    p.add_argument("--mode", choices=[m.value for m in Mode], default="ssa")
    p.add_argument("--runs", type=int, required=True, help="number of runs")
    p.add_argument("--grid-dt", type=float, required=True, help="spacing of the sampling grid")
    p.add_argument("--t-end", "--max-time", dest="t_end", type=float, required=True,
                   help="end of the sampling grid and of every run")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--init", help="per-cell token counts overriding the model's initial state")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("graph", parents=[common], help="state graph, SCCs and halting set")
    p.add_argument("model")
    p.add_argument("--max-nodes", type=int, default=stategraph.DEFAULT_MAX_NODES,
                   help="node cap (default 10^6)")
    p.add_argument("--dot", help="write the state graph in DOT format to this path")
    p.add_argument("--condensation-dot", help="write the SCC condensation in DOT format")
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--agents", type=int, help="rescale the initial state to N tokens")
    grp.add_argument("--init", help="per-cell token counts for the root configuration")
    p.set_defaults(func=cmd_graph)

    p = sub.add_parser("ode", parents=[common], help="derive, integrate or solve the ODE limit")
    p.add_argument("model", help="model file/preset, or an ODE system .json")
    p.add_argument("--dt", type=float, help="RK4 step")
    p.add_argument("--t-end", type=float, help="integrate up to T (max time with --fixed-point)")
    p.add_argument("--fixed-point", action="store_true", help="integrate to a stationary point")
    p.add_argument("--tol", type=float, default=1e-9, help="fixed-point tolerance")
    p.add_argument("--init", help="initial values (default: the model's token counts)")
    p.set_defaults(func=cmd_ode)

    p = sub.add_parser("synth", parents=[common], help="ODE system JSON to a model file")
    p.add_argument("system")
    p.add_argument("--init", help="initial token counts per cell")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("compare", parents=[common], help="compare two CSV series (JSON report)")
    p.add_argument("first", help="ensemble, trajectory or ODE CSV")
    p.add_argument("second", help="reference CSV on the same grid")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("convert", parents=[common],
                       help="protocol JSON <-> model file (by extension)")
    p.add_argument("source", help=".json protocol or .gcps model")
    p.add_argument("--input", help="input population for a protocol, e.g. 'x=3 y=2'")
    p.set_defaults(func=cmd_convert)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:   # --help, --version or a usage error
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        args.func(args)
    except UsageError as exc:
        print(f"gcps: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, ModelError, OSError) as exc:
        print(f"gcps: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (stategraph.StateSpaceTooLarge, odelimit.NonConvergence, odelimit.IntegrationError,
            OverflowError) as exc:
        print(f"gcps: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"gcps: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


if __name__ == "__main__":
    sys.exit(main())
