"""Command-line interface: validation, lowering, costing, suggestions,
execution, an interactive guided session, and the HTTP service."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .costmodel import (
    MachineParams,
    estimate,
    parse_machine_config,
    rank_tile_suggestions,
)
from .executor import execute, reference_execute
from .guide import GuidedSession
from .imageio import read_image, synthetic_input, write_image
from .ir import PipelineError, dependency_graph_view, inverse_topological_order
from .lowering import lower, parse_schedule_script, pretty_print
from .parser import parse_pipeline
from .schedule import default_schedule


def _load_pipeline(path: str):
    return parse_pipeline(Path(path).read_text())


def _load_machine(path: str | None) -> MachineParams:
    if path is None:
        return MachineParams()
    return parse_machine_config(Path(path).read_text())


def _load_schedule(p, path: str | None):
    if path is None:
        return default_schedule(p)
    return parse_schedule_script(p, Path(path).read_text())


def _cmd_check(args) -> int:
    p = _load_pipeline(args.file)
    print(f"pipeline {p.name}: OK")
    print(f"  output {p.output} {'x'.join(map(str, p.output_extent))}")
    graph = dependency_graph_view(p)
    print(f"  funcs: {', '.join(p.funcs)}")
    print(f"  schedule order: {' -> '.join(inverse_topological_order(p))}")
    print("  edges:")
    for e in graph["edges"]:
        print(f"    {e['src']} -> {e['dst']}")
    return 0


def _cmd_lower(args) -> int:
    p = _load_pipeline(args.file)
    s = _load_schedule(p, args.schedule)
    print(pretty_print(lower(p, s), markers=args.markers), end="")
    return 0


def _cmd_cost(args) -> int:
    p = _load_pipeline(args.file)
    s = _load_schedule(p, args.schedule)
    m = _load_machine(args.machine)
    est = estimate(p, s, m)
    print(f"total   {est.total:.1f}")
    print(f"load    {est.load:.1f}")
    print(f"store   {est.store:.1f}")
    print(f"compute {est.compute:.1f}")
    print(f"{'func':<12}{'points':>12}{'compute':>14}{'load':>14}{'store':>12}{'evals':>12}")
    for name, fc in est.per_func.items():
        print(
            f"{name:<12}{fc.points:>12}{fc.compute:>14.1f}{fc.load:>14.1f}"
            f"{fc.store:>12.1f}{fc.evals:>12}"
        )
    return 0


def _cmd_suggest(args) -> int:
    p = _load_pipeline(args.file)
    s = _load_schedule(p, args.schedule)
    m = _load_machine(args.machine)
    rows = rank_tile_suggestions(p, s, args.func, m, k=args.top)
    print(f"{'range_x':>8}{'range_y':>8}{'total':>16}{'load':>14}{'store':>14}{'compute':>14}")
    for (rx, ry), est in rows:
        print(
            f"{rx:>8}{ry:>8}{est.total:>16.1f}{est.load:>14.1f}"
            f"{est.store:>14.1f}{est.compute:>14.1f}"
        )
    return 0


def _cmd_run(args) -> int:
    p = _load_pipeline(args.file)
    if args.size:
        w, h = (int(v) for v in args.size.lower().split("x"))
        out_dims = p.funcs[p.output].dims
        ext = (w, h) + p.output_extent[2:] if len(out_dims) > 2 else (w, h)[: len(out_dims)]
        p = p.with_extent(ext)
    s = _load_schedule(p, args.schedule)
    inputs = {}
    for item in args.input or []:
        name, _, path = item.partition("=")
        if not path:
            if len(p.inputs) != 1:
                print("error: use name=path with multiple inputs", file=sys.stderr)
                return 2
            name, path = p.inputs[0], name
        inputs[name] = read_image(path)
    if args.synthetic:
        for name in p.inputs:
            if name not in inputs:
                inputs[name] = synthetic_input(p.funcs[name].extent)
    result = execute(p, s, inputs)
    if args.output:
        write_image(args.output, result.output)
    r = result.report
    print(f"wall_time_s {r.wall_time:.4f}")
    print(f"{'func':<12}{'evaluations':>14}{'stores':>12}{'loads':>12}")
    for name in p.funcs:
        if name in r.evaluations or name in r.loads:
            print(
                f"{name:<12}{r.evaluations.get(name, 0):>14}"
                f"{r.stores.get(name, 0):>12}{r.loads.get(name, 0):>12}"
            )
    print(f"total_evaluations {r.total_evaluations()}")
    if args.check_reference:
        ref = reference_execute(p, inputs)
        same = np.array_equal(ref.data, result.output.data)
        print(f"reference_match {'yes' if same else 'NO'}")
        return 0 if same else 1
    return 0


def _cmd_guide(args) -> int:
    p = _load_pipeline(args.file)
    m = _load_machine(args.machine)
    sess = GuidedSession(p, m)
    print(f"Guided session for pipeline '{p.name}'.")
    print("Commands: <number> choose, t <x> <y> custom tile, u undo, q quit.\n")
    while True:
        ins = sess.current_instruction()
        c = ins.current_cost
        print(f"{ins.text}  [total {c.total:.0f} = load {c.load:.0f} "
              f"+ store {c.store:.0f} + compute {c.compute:.0f}]")
        if sess.done:
            break
        for i, o in enumerate(sess.list_options()):
            print(f"  {i}) {o.description:<44} cost {o.cost.total:.0f}")
        try:
            line = input("> ").strip()
        except EOFError:
            return 0
        try:
            if line == "q":
                return 0
            if line == "u":
                sess.undo()
            elif line.startswith("t "):
                _, rx, ry = line.split()
                sess.custom_tile(int(rx), int(ry))
            elif line:
                sess.choose(sess.list_options()[int(line)].option_id)
        except (PipelineError, ValueError, IndexError) as exc:
            print(f"error: {exc}")
    print("\nFinal schedule:")
    print(sess.export_schedule())
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    app = create_app(state_dir=args.state_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="tileguide", description=__doc__)
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="parse and validate a pipeline")
    c.add_argument("file")
    c.set_defaults(fn=_cmd_check)

    c = sub.add_parser("lower", help="print the lowered loop nest")
    c.add_argument("file")
    c.add_argument("--schedule")
    c.add_argument("--markers", action="store_true")
    c.set_defaults(fn=_cmd_lower)

    c = sub.add_parser("cost", help="print the cost estimate breakdown")
    c.add_argument("file")
    c.add_argument("--schedule")
    c.add_argument("--machine")
    c.set_defaults(fn=_cmd_cost)

    c = sub.add_parser("suggest", help="top tile-range suggestions for a func")
    c.add_argument("file")
    c.add_argument("--func", required=True)
    c.add_argument("--schedule")
    c.add_argument("--machine")
    c.add_argument("--top", type=int, default=5)
    c.set_defaults(fn=_cmd_suggest)

    c = sub.add_parser("run", help="execute a schedule over images")
    c.add_argument("file")
    c.add_argument("--schedule")
    c.add_argument("--input", action="append", metavar="NAME=PATH")
    c.add_argument("--synthetic", action="store_true",
                   help="fill missing inputs with a deterministic pattern")
    c.add_argument("--output")
    c.add_argument("--size", help="re-target output extent, e.g. 64x64")
    c.add_argument("--check-reference", action="store_true")
    c.set_defaults(fn=_cmd_run)

    c = sub.add_parser("guide", help="interactive guided session in the terminal")
    c.add_argument("file")
    c.add_argument("--machine")
    c.set_defaults(fn=_cmd_guide)

    c = sub.add_parser("serve", help="host the HTTP JSON API (and UI if built)")
    c.add_argument("--host", default="127.0.0.1")
    c.add_argument("--port", type=int, default=None)
    c.add_argument("--state-dir")
    c.set_defaults(fn=_cmd_serve)

    args = ap.parse_args(argv)
    if args.command == "serve" and args.port is None:
        import os

        args.port = int(os.environ.get("TILEGUIDE_PORT", "8787"))
    try:
        return args.fn(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
