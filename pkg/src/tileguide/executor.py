"""Instrumented interpreter for lowered nests, plus the scheduling-free
reference evaluator that defines the pipeline's ground-truth output.

Execution is single threaded and bitwise deterministic: binary float64
ops are IEEE-exact elementwise, sqrt is correctly rounded, and exp is
evaluated through a scalar map so the same input value always rounds the
same way regardless of array shape.  Parallel/vectorized markers are
cost-model annotations only and are ignored here.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .ir import FuncKind, Pipeline, PipelineError
from .lowering import (
    EBin,
    ECall,
    ENode,
    ENum,
    ERead,
    EScope,
    EVar,
    Expansion,
    LoweredNest,
    NestItem,
    ReadSite,
    iter_tiles,
    lower,
)
from .schedule import Schedule

Box = dict[str, tuple[int, int]]  # per-dim inclusive [lo, hi]


class ReadOutOfRegionError(PipelineError):
    pass


class MissingInputError(PipelineError):
    pass


@dataclass
class Buffer:
    """A float64 grid with a per-dim origin (regions may start below zero)."""

    dims: tuple[str, ...]
    origin: tuple[int, ...]
    data: np.ndarray

    @property
    def extent(self) -> tuple[int, ...]:
        return self.data.shape

    @staticmethod
    def for_box(dims: tuple[str, ...], box: Box) -> "Buffer":
        origin = tuple(box[d][0] for d in dims)
        shape = tuple(box[d][1] - box[d][0] + 1 for d in dims)
        return Buffer(dims, origin, np.empty(shape, dtype=np.float64))

    @staticmethod
    def from_array(dims: tuple[str, ...], data: np.ndarray) -> "Buffer":
        return Buffer(dims, (0,) * data.ndim, np.asarray(data, dtype=np.float64))


@dataclass
class InstrumentationReport:
    evaluations: dict[str, int] = field(default_factory=dict)
    stores: dict[str, int] = field(default_factory=dict)
    loads: dict[str, int] = field(default_factory=dict)
    wall_time: float = 0.0

    def total_evaluations(self) -> int:
        return sum(self.evaluations.values())


@dataclass
class ExecResult:
    output: Buffer
    report: InstrumentationReport


def _box_size(box: Box) -> int:
    n = 1
    for lo, hi in box.values():
        n *= hi - lo + 1
    return n


np.seterr(all="ignore")


def _exp(v):
    """Value-deterministic exp: identical rounding at every array position."""
    if isinstance(v, float):
        return math.exp(v)
    flat = np.asarray(v, dtype=np.float64).ravel()
    out = np.fromiter((math.exp(x) for x in flat), dtype=np.float64, count=flat.size)
    return out.reshape(np.shape(v))


def _sqrt(v):
    # IEEE 754 requires correctly rounded sqrt, so the vector path is safe.
    if isinstance(v, float):
        return math.sqrt(v) if v >= 0 else float("nan")
    return np.sqrt(v)


_BINOPS = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: a / b,
}


class _EvalCtx:
    """Per-stmt-evaluation context shared by the compiled closures."""

    __slots__ = ("box", "coords_i", "coords_f", "size")

    def __init__(self, box: Box, dims: tuple[str, ...]):
        self.box = box
        self.coords_i = {}
        self.coords_f = {}
        ndim = len(dims)
        for axis, d in enumerate(dims):
            lo, hi = box[d]
            idx = np.arange(lo, hi + 1, dtype=np.int64)
            shape = [1] * ndim
            shape[axis] = hi - lo + 1
            self.coords_i[d] = idx.reshape(shape)
            self.coords_f[d] = idx.astype(np.float64).reshape(shape)
        self.size = _box_size(box)


class _Machine:
    def __init__(self, pipeline: Pipeline, nest: LoweredNest | None, count: bool = True):
        self.pipeline = pipeline
        self.nest = nest
        self.count = count
        self.evaluations: dict[str, int] = {}
        self.stores: dict[str, int] = {}
        self.loads: dict[str, int] = {}
        self.buffers: dict[str, Buffer] = {}
        self._compiled: dict[str, object] = {}

    def bump(self, table: dict[str, int], func: str, n: int) -> None:
        if self.count:
            table[func] = table.get(func, 0) + n

    def eval_box(self, func: str, root: ENode, box: Box, dims: tuple[str, ...]):
        fn = self._compiled.get(func)
        if fn is None:
            fn = self._compile(func, root, dims)
            self._compiled[func] = fn
        return fn(_EvalCtx(box, dims))

    # -- closure compilation --------------------------------------------------

    def _compile(self, stmt_func: str, node: ENode, dims: tuple[str, ...]):
        axis_of = {d: i for i, d in enumerate(dims)}
        evaluations = self.evaluations
        loads = self.loads
        count = self.count

        if isinstance(node, ENum):
            v = node.value
            return lambda ctx: v
        if isinstance(node, EVar):
            d, off = node.dim, float(node.offset)
            if off == 0.0:
                return lambda ctx: ctx.coords_f[d]
            return lambda ctx: ctx.coords_f[d] + off
        if isinstance(node, EBin):
            op = _BINOPS[node.op]
            lhs = self._compile(stmt_func, node.lhs, dims)
            rhs = self._compile(stmt_func, node.rhs, dims)
            return lambda ctx: op(lhs(ctx), rhs(ctx))
        if isinstance(node, ECall):
            fn = _exp if node.fn == "exp" else _sqrt
            arg = self._compile(stmt_func, node.arg, dims)
            return lambda ctx: fn(arg(ctx))
        if isinstance(node, EScope):
            g = node.func
            body = self._compile(stmt_func, node.body, dims)
            if not count:
                return body

            def scoped(ctx):
                evaluations[g] = evaluations.get(g, 0) + ctx.size
                return body(ctx)

            return scoped

        assert isinstance(node, ERead)
        target = node.target
        forms = node.forms
        clamped = node.clamped
        buffers = self.buffers
        ndim = len(dims)

        def read(ctx):
            buf = buffers.get(target)
            if buf is None:
                raise MissingInputError(f"no buffer for '{target}'")
            if count:
                loads[stmt_func] = loads.get(stmt_func, 0) + ctx.size
            box = ctx.box
            data = buf.data
            origin = buf.origin
            indexers = []
            var_axes = []
            inside = True
            for axis, form in enumerate(forms):
                var, off = form
                n = data.shape[axis]
                if var is None:
                    j = off - origin[axis]
                    if not 0 <= j < n:
                        inside = False
                        break
                    indexers.append(j)
                else:
                    lo, hi = box[var]
                    rlo, rhi = lo + off - origin[axis], hi + off - origin[axis]
                    if rlo < 0 or rhi >= n:
                        inside = False
                        break
                    indexers.append(slice(rlo, rhi + 1))
                    var_axes.append(axis_of[var])
            if inside:
                got = data[tuple(indexers)]
                if isinstance(got, np.ndarray):
                    # place each sliced axis on its consumer axis, 1 elsewhere
                    shape = [1] * ndim
                    for length, axis in zip(got.shape, var_axes):
                        shape[axis] = length
                    got = got.reshape(shape)
                return got
            if not clamped:
                raise ReadOutOfRegionError(
                    f"'{stmt_func}' reads '{target}' outside its region "
                    f"(box {box}, forms {forms}, buffer origin {origin} "
                    f"shape {data.shape})"
                )
            gather = []
            for axis, form in enumerate(forms):
                var, off = form
                n = data.shape[axis]
                if var is None:
                    j = off - origin[axis]
                    gather.append(min(max(j, 0), n - 1))
                else:
                    idx = ctx.coords_i[var] + (off - origin[axis])
                    gather.append(np.minimum(np.maximum(idx, 0), n - 1))
            return data[tuple(gather)]

        return read


# ---------------------------------------------------------------------------
# Dynamic region inference (concrete mirror of the lowering-time pass)
# ---------------------------------------------------------------------------


def _translate_box(src_box: Box, site: ReadSite, target_dims: tuple[str, ...]) -> Box:
    out: Box = {}
    for d, (var, off) in zip(target_dims, site.forms):
        if var is None:
            out[d] = (off, off)
        else:
            lo, hi = src_box[var]
            out[d] = (lo + off, hi + off)
    return out


def _hull_box(a: Box | None, b: Box) -> Box:
    if a is None:
        return dict(b)
    return {d: (min(a[d][0], b[d][0]), max(a[d][1], b[d][1])) for d in a}


def _subtree_pairs(item: NestItem, box: Box, exps: dict[str, Expansion]):
    """All (func, union box) stmt pairs in an item's subtree for one instance."""
    pairs = [(item.func, box)]
    inner = _body_boxes(item.inner_children, list(pairs), exps)
    for c in item.inner_children:
        pairs.extend(_subtree_pairs(c, inner[id(c)], exps))
    outer = _body_boxes(item.outer_children, list(pairs), exps)
    for c in item.outer_children:
        pairs.extend(_subtree_pairs(c, outer[id(c)], exps))
    return pairs


def _body_boxes(children, primary_pairs, exps) -> dict[int, Box]:
    out: dict[int, Box] = {}
    acc = list(primary_pairs)
    for child in reversed(children):
        b: Box | None = None
        for sf, sbox in acc:
            for site in exps[sf].reads:
                if site.target != child.func:
                    continue
                b = _hull_box(b, _translate_box(sbox, site, child.dims))
        if b is None:
            raise ReadOutOfRegionError(f"'{child.func}' has no reader in scope")
        out[id(child)] = b
        acc = _subtree_pairs(child, b, exps) + acc
    return out


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def execute(
    p: Pipeline,
    s: Schedule,
    inputs: dict[str, np.ndarray | Buffer],
    nest: LoweredNest | None = None,
    _shrink: tuple[str, str, str] | None = None,
) -> ExecResult:
    """Run a schedule over concrete inputs with exact instrumentation.

    `_shrink` is a testing hook: (func, dim, "lo"|"hi") narrows every
    inferred region of that func by one, which must trip the read assert.
    """
    if nest is None:
        nest = lower(p, s)
    m = _Machine(p, nest)
    _bind_inputs(p, m, inputs)
    exps = nest.expansions

    def shrink(func: str, box: Box) -> Box:
        if _shrink is None or _shrink[0] != func:
            return box
        _, d, side = _shrink
        lo, hi = box[d]
        box = dict(box)
        box[d] = (lo + 1, hi) if side == "lo" else (lo, hi - 1)
        if box[d][0] > box[d][1]:
            raise ReadOutOfRegionError(f"region of '{func}' shrank to empty")
        return box

    def fill(item: NestItem, box: Box, buf: Buffer) -> None:
        arr = m.eval_box(item.func, exps[item.func].root, box, item.dims)
        size = _box_size(box)
        m.bump(m.evaluations, item.func, size)
        m.bump(m.stores, item.func, size)
        idx = tuple(
            slice(box[d][0] - buf.origin[a], box[d][1] - buf.origin[a] + 1)
            for a, d in enumerate(item.dims)
        )
        shape = tuple(box[d][1] - box[d][0] + 1 for d in item.dims)
        buf.data[idx] = np.broadcast_to(arr, shape)

    def run_item(item: NestItem, box: Box) -> None:
        box = shrink(item.func, box)
        buf = Buffer.for_box(item.dims, box)
        if item.split is None:
            fill(item, box, buf)
        else:
            xlo, xhi = box["x"]
            xtiles = iter_tiles(xlo, xhi - xlo + 1, item.split.range_x)
            if "y" in item.dims:
                ylo, yhi = box["y"]
                ytiles = iter_tiles(ylo, yhi - ylo + 1, item.split.range_y)
            else:
                ytiles = [None]
            for tx in xtiles:
                for ty in ytiles:
                    tile: Box = dict(box)
                    tile["x"] = (tx[0], tx[0] + tx[1] - 1)
                    if ty is not None:
                        tile["y"] = (ty[0], ty[0] + ty[1] - 1)
                    run_tile(item, tile, buf)
        m.buffers[item.func] = buf

    def run_tile(item: NestItem, tile: Box, buf: Buffer) -> None:
        primary = _subtree_pairs_primary(item, tile)
        boxes = _body_boxes(item.outer_children, primary, exps)
        pushed = []
        for c in item.outer_children:
            run_item(c, boxes[id(c)])
            pushed.append(c.func)
        if item.inner_children:
            for point in _iter_points(tile, item.dims):
                pboxes = _body_boxes(item.inner_children, [(item.func, point)], exps)
                ppushed = []
                for c in item.inner_children:
                    run_item(c, pboxes[id(c)])
                    ppushed.append(c.func)
                fill(item, point, buf)
                for f in ppushed:
                    del m.buffers[f]
        else:
            fill(item, tile, buf)
        for f in pushed:
            del m.buffers[f]

    def _subtree_pairs_primary(item: NestItem, tile: Box):
        pairs = [(item.func, tile)]
        inner = _body_boxes(item.inner_children, list(pairs), exps)
        for c in item.inner_children:
            pairs.extend(_subtree_pairs(c, inner[id(c)], exps))
        return pairs

    t0 = time.perf_counter()
    out_item = nest.root_items[-1]
    out_box: Box = {
        d: (0, e - 1) for d, e in zip(out_item.dims, p.output_extent)
    }
    root_boxes = _body_boxes(
        nest.root_items[:-1], _subtree_pairs(out_item, out_box, exps), exps
    )
    for it in nest.root_items[:-1]:
        run_item(it, root_boxes[id(it)])
    run_item(out_item, out_box)

    report = InstrumentationReport(
        m.evaluations, m.stores, m.loads, time.perf_counter() - t0
    )
    return ExecResult(m.buffers[p.output], report)


def _iter_points(box: Box, dims: tuple[str, ...]):
    def rec(i: int, acc: Box):
        if i == len(dims):
            yield dict(acc)
            return
        d = dims[i]
        lo, hi = box[d]
        for v in range(lo, hi + 1):
            acc[d] = (v, v)
            yield from rec(i + 1, acc)

    yield from rec(0, {})


def _bind_inputs(p: Pipeline, m: _Machine, inputs: dict) -> None:
    for f in p.funcs.values():
        if f.kind is not FuncKind.INPUT:
            continue
        if f.name not in inputs:
            raise MissingInputError(f"missing input '{f.name}'")
        given = inputs[f.name]
        buf = given if isinstance(given, Buffer) else Buffer.from_array(f.dims, given)
        if buf.data.shape != f.extent:
            raise MissingInputError(
                f"input '{f.name}' has shape {buf.data.shape}, declared {f.extent}"
            )
        m.buffers[f.name] = buf


def reference_execute(p: Pipeline, inputs: dict) -> Buffer:
    """Ground-truth output: direct expansion of the output expression,
    evaluated pointwise over the full output extent with no scheduling."""
    from .lowering import _expand_func
    from .schedule import Decision, Schedule, ROOT

    s = Schedule({p.output: Decision.at(ROOT)})
    exp = _expand_func(p, s, p.output)
    m = _Machine(p, None, count=False)
    _bind_inputs(p, m, inputs)
    out_dims = p.funcs[p.output].dims
    box: Box = {d: (0, e - 1) for d, e in zip(out_dims, p.output_extent)}
    buf = Buffer.for_box(out_dims, box)
    arr = m.eval_box(p.output, exp.root, box, out_dims)
    buf.data[...] = np.broadcast_to(arr, buf.data.shape)
    return buf
