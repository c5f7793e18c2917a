"""Core IR for stencil pipelines.

A pipeline is a DAG of grid functions over 1-3 canonical dimensions
(x, y, c).  Functions are either externally supplied inputs, clamped
views of an input (``clamp_edge``), or pointwise expressions that may
access other functions at constant stencil offsets.  All values are
float64.  Everything here is immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping, Union

CANONICAL_DIMS = ("x", "y", "c")
INTRINSICS = ("exp", "sqrt")

#: Model weight of one intrinsic call, in units of one binary op.
DEFAULT_INTRINSIC_WEIGHT = 10


class PipelineError(Exception):
    """Base for all pipeline construction and validation failures."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        if line is not None:
            where = f"line {line}" + (f", col {col}" if col is not None else "")
            message = f"{where}: {message}"
        super().__init__(message)


class PipelineSyntaxError(PipelineError):
    pass


class UnknownIdentifierError(PipelineError):
    pass


class ArityMismatchError(PipelineError):
    pass


class CyclicDependencyError(PipelineError):
    pass


class NonAffineAccessError(PipelineError):
    pass


class NoDirectDependencyError(PipelineError):
    pass


# ---------------------------------------------------------------------------
# Expressions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float
    # raw source text; kept so access args can insist on integer literals
    text: str = field(default="", compare=False)
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class ParamRef:
    name: str
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class VarRef:
    name: str
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class AffineIndex:
    """One access argument: ``var + offset`` or a bare integer coordinate."""

    var: str | None
    offset: int

    def __str__(self) -> str:
        if self.var is None:
            return str(self.offset)
        if self.offset == 0:
            return self.var
        sign = "+" if self.offset > 0 else "-"
        return f"{self.var} {sign} {abs(self.offset)}"


@dataclass(frozen=True)
class Access:
    func: str
    args: tuple[AffineIndex, ...]
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    lhs: Expr
    rhs: Expr
    pos: tuple[int, int] | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Call:
    fn: str  # exp | sqrt
    arg: Expr
    pos: tuple[int, int] | None = field(default=None, compare=False)


Expr = Union[Num, ParamRef, VarRef, Access, BinOp, Call]


def walk_expr(e: Expr) -> Iterator[Expr]:
    yield e
    if isinstance(e, BinOp):
        yield from walk_expr(e.lhs)
        yield from walk_expr(e.rhs)
    elif isinstance(e, Call):
        yield from walk_expr(e.arg)


def access_sites(e: Expr) -> Iterator[Access]:
    for node in walk_expr(e):
        if isinstance(node, Access):
            yield node


# ---------------------------------------------------------------------------
# Functions and pipelines
# ---------------------------------------------------------------------------


class FuncKind(Enum):
    INPUT = "input"
    CLAMP = "clamp_edge"
    COMPUTED = "computed"


@dataclass(frozen=True)
class FuncDef:
    name: str
    dims: tuple[str, ...]
    kind: FuncKind
    expr: Expr | None = None  # COMPUTED only
    clamp_source: str | None = None  # CLAMP only: wrapped input name
    extent: tuple[int, ...] | None = None  # INPUT only, aligned with dims
    line: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Pipeline:
    name: str
    params: Mapping[str, float]
    funcs: Mapping[str, FuncDef]  # insertion order = declaration order
    output: str
    output_extent: tuple[int, ...]

    @property
    def declared(self) -> list[str]:
        """Schedulable (non-input) func names in declaration order."""
        return [f.name for f in self.funcs.values() if f.kind is not FuncKind.INPUT]

    @property
    def inputs(self) -> list[str]:
        return [f.name for f in self.funcs.values() if f.kind is FuncKind.INPUT]

    def func(self, name: str) -> FuncDef:
        try:
            return self.funcs[name]
        except KeyError:
            raise UnknownIdentifierError(f"unknown func '{name}'") from None

    def _dep_maps(self) -> tuple[dict[str, list[str]], dict[str, list[str]]]:
        cached = getattr(self, "_deps", None)
        if cached is not None:
            return cached
        producers: dict[str, list[str]] = {}
        for f in self.funcs.values():
            if f.kind is FuncKind.INPUT:
                producers[f.name] = []
            elif f.kind is FuncKind.CLAMP:
                producers[f.name] = [f.clamp_source]
            else:
                seen: list[str] = []
                for a in access_sites(f.expr):
                    if a.func not in seen:
                        seen.append(a.func)
                producers[f.name] = seen
        consumers = {
            name: [g for g in self.funcs if name in producers[g]] for name in self.funcs
        }
        object.__setattr__(self, "_deps", (producers, consumers))
        return producers, consumers

    def producers(self, name: str) -> list[str]:
        """Funcs directly read by `name`, in first-access order, deduplicated."""
        self.func(name)
        return self._dep_maps()[0][name]

    def consumers(self, name: str) -> list[str]:
        """Funcs that directly read `name`, in declaration order."""
        self.func(name)
        return self._dep_maps()[1][name]

    def with_extent(self, extent: tuple[int, ...]) -> "Pipeline":
        """Re-target the pipeline at a new output size.

        Inputs are resized in x/y to match; a channel dimension keeps its
        declared depth.  Used by the "run at size WxH" surfaces.
        """
        out_dims = self.funcs[self.output].dims
        if len(extent) != len(out_dims):
            raise PipelineError(
                f"extent {extent} has {len(extent)} dims, output has {len(out_dims)}"
            )
        funcs: dict[str, FuncDef] = {}
        for f in self.funcs.values():
            if f.kind is FuncKind.INPUT:
                new_ext = tuple(
                    extent[list(out_dims).index(d)] if d in out_dims[:2] else e
                    for d, e in zip(f.dims, f.extent)
                )
                funcs[f.name] = FuncDef(f.name, f.dims, f.kind, extent=new_ext, line=f.line)
            else:
                funcs[f.name] = f
        return Pipeline(self.name, self.params, funcs, self.output, tuple(extent))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate_pipeline(p: Pipeline) -> None:
    """Check all structural invariants; raises a PipelineError subclass."""
    if p.output not in p.funcs:
        raise UnknownIdentifierError(f"output '{p.output}' is not declared")
    if p.funcs[p.output].kind is not FuncKind.COMPUTED:
        raise PipelineError(f"output '{p.output}' must be a computed func")
    if len(p.output_extent) != len(p.funcs[p.output].dims):
        raise ArityMismatchError(
            f"output extent has {len(p.output_extent)} dims, "
            f"'{p.output}' has {len(p.funcs[p.output].dims)}"
        )

    for f in p.funcs.values():
        if not 1 <= len(f.dims) <= 3:
            raise PipelineError(f"func '{f.name}' must have 1-3 dims", f.line)
        if tuple(f.dims) != CANONICAL_DIMS[: len(f.dims)]:
            raise PipelineError(
                f"func '{f.name}' dims must be a prefix of {CANONICAL_DIMS}, got {f.dims}",
                f.line,
            )
        if f.kind is FuncKind.INPUT:
            if f.extent is None or len(f.extent) != len(f.dims):
                raise PipelineError(f"input '{f.name}' needs a per-dim extent", f.line)
            if any(e < 1 for e in f.extent):
                raise PipelineError(f"input '{f.name}' extent must be >= 1", f.line)
        elif f.kind is FuncKind.CLAMP:
            src = p.funcs.get(f.clamp_source)
            if src is None:
                raise UnknownIdentifierError(
                    f"clamp_edge source '{f.clamp_source}' is not declared", f.line
                )
            if src.kind is not FuncKind.INPUT:
                raise PipelineError(
                    f"clamp_edge may only wrap an input, '{f.clamp_source}' is {src.kind.value}",
                    f.line,
                )
        else:
            if f.expr is None:
                raise PipelineError(f"computed func '{f.name}' has no expression", f.line)
            _validate_expr(p, f)

    for name in p.params:
        if name in CANONICAL_DIMS:
            raise PipelineError(f"param '{name}' shadows a loop variable")

    _check_acyclic(p)

    # Unreferenced funcs have no well-defined place in the scheduling order.
    for f in p.funcs.values():
        if f.name != p.output and not p.consumers(f.name):
            raise PipelineError(f"func '{f.name}' is never used", f.line)


def _validate_expr(p: Pipeline, f: FuncDef) -> None:
    for node in walk_expr(f.expr):
        if isinstance(node, VarRef) and node.name not in f.dims:
            raise UnknownIdentifierError(
                f"'{node.name}' is not a dim of '{f.name}' nor a param",
                *(node.pos or (f.line, None)),
            )
        if isinstance(node, ParamRef) and node.name not in p.params:
            raise UnknownIdentifierError(
                f"unknown identifier '{node.name}'", *(node.pos or (f.line, None))
            )
        if isinstance(node, Access):
            target = p.funcs.get(node.func)
            if target is None:
                raise UnknownIdentifierError(
                    f"access to undeclared func '{node.func}'",
                    *(node.pos or (f.line, None)),
                )
            if len(node.args) != len(target.dims):
                raise ArityMismatchError(
                    f"'{node.func}' has {len(target.dims)} dims, accessed with "
                    f"{len(node.args)} args",
                    *(node.pos or (f.line, None)),
                )
            for i, arg in enumerate(node.args):
                if arg.var is None:
                    continue
                if arg.var != target.dims[i]:
                    raise NonAffineAccessError(
                        f"arg {i} of '{node.func}' must use var '{target.dims[i]}', "
                        f"got '{arg.var}'",
                        *(node.pos or (f.line, None)),
                    )
                if arg.var not in f.dims:
                    raise UnknownIdentifierError(
                        f"'{arg.var}' is not a dim of '{f.name}'",
                        *(node.pos or (f.line, None)),
                    )


def _check_acyclic(p: Pipeline) -> None:
    WHITE, GREY, BLACK = 0, 1, 2
    state = {name: WHITE for name in p.funcs}

    def visit(name: str, stack: list[str]) -> None:
        state[name] = GREY
        stack.append(name)
        for dep in p.producers(name):
            if state.get(dep, BLACK) is GREY:
                cycle = stack[stack.index(dep):] + [dep]
                raise CyclicDependencyError(
                    "cyclic dependency: " + " -> ".join(cycle), p.funcs[name].line
                )
            if state.get(dep) is WHITE:
                visit(dep, stack)
        stack.pop()
        state[name] = BLACK

    for name in p.funcs:
        if state[name] is WHITE:
            visit(name, [])


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def inverse_topological_order(p: Pipeline) -> list[str]:
    """Schedulable funcs ordered from the output toward the inputs.

    Every consumer precedes all of its producers.  Among funcs that are
    simultaneously ready, the one declared latest is emitted first, which
    keeps the order hugging the output end of the source text.
    """
    declared = p.declared
    decl_index = {name: i for i, name in enumerate(p.funcs)}
    consumers = {name: set(p.consumers(name)) & set(declared) for name in declared}
    emitted: list[str] = []
    done: set[str] = set()
    remaining = set(declared)
    while remaining:
        ready = [f for f in remaining if consumers[f] <= done]
        assert ready, "cycle slipped past validation"
        nxt = max(ready, key=lambda f: decl_index[f])
        emitted.append(nxt)
        done.add(nxt)
        remaining.remove(nxt)
    return emitted


@dataclass(frozen=True)
class FootprintDim:
    """Per-dimension access interval of one consumer onto one producer.

    ``rel`` is the [lo, hi] hull of ``var + offset`` accesses, relative to
    the consumer point.  ``abs`` is the hull of constant-coordinate
    accesses.  A dimension has at least one of the two.
    """

    rel: tuple[int, int] | None
    abs: tuple[int, int] | None


@dataclass(frozen=True)
class Footprint:
    producer: str
    dims: tuple[str, ...]
    per_dim: tuple[FootprintDim, ...]

    def interval(self, dim: str) -> tuple[int, int]:
        """Relative [lo, hi] for a dim (0,0 when only constant accesses)."""
        fd = self.per_dim[self.dims.index(dim)]
        return fd.rel if fd.rel is not None else (0, 0)


def footprint(p: Pipeline, consumer: str, producer: str) -> Footprint:
    """Union of all direct access offsets from `consumer` onto `producer`."""
    cf = p.func(consumer)
    pf = p.func(producer)
    if cf.kind is FuncKind.CLAMP:
        if producer != cf.clamp_source:
            raise NoDirectDependencyError(f"'{consumer}' does not read '{producer}'")
        per_dim = tuple(FootprintDim((0, 0), None) for _ in pf.dims)
        return Footprint(producer, pf.dims, per_dim)
    if cf.kind is not FuncKind.COMPUTED:
        raise NoDirectDependencyError(f"'{consumer}' does not read '{producer}'")
    rel: list[tuple[int, int] | None] = [None] * len(pf.dims)
    abs_: list[tuple[int, int] | None] = [None] * len(pf.dims)
    found = False
    for site in access_sites(cf.expr):
        if site.func != producer:
            continue
        found = True
        for i, arg in enumerate(site.args):
            if arg.var is None:
                cur = abs_[i]
                abs_[i] = (
                    (arg.offset, arg.offset)
                    if cur is None
                    else (min(cur[0], arg.offset), max(cur[1], arg.offset))
                )
            else:
                cur = rel[i]
                rel[i] = (
                    (arg.offset, arg.offset)
                    if cur is None
                    else (min(cur[0], arg.offset), max(cur[1], arg.offset))
                )
    if not found:
        raise NoDirectDependencyError(f"'{consumer}' does not read '{producer}'")
    return Footprint(
        producer, pf.dims, tuple(FootprintDim(r, a) for r, a in zip(rel, abs_))
    )


def ops_per_point(f: FuncDef, intrinsic_weight: int = DEFAULT_INTRINSIC_WEIGHT) -> int:
    """Arithmetic work per evaluated point of a computed func's own body."""
    if f.kind is not FuncKind.COMPUTED:
        raise PipelineError(f"'{f.name}' is not a computed func")
    total = 0
    for node in walk_expr(f.expr):
        if isinstance(node, BinOp):
            total += 1
        elif isinstance(node, Call):
            total += intrinsic_weight
    return total


def dependency_graph_view(p: Pipeline, highlighted: str | None = None) -> dict:
    """Graph document for the UI: all funcs as nodes, producer->consumer edges."""
    if highlighted is not None and highlighted not in p.funcs:
        raise UnknownIdentifierError(f"unknown highlight func '{highlighted}'")
    nodes = [
        {"name": f.name, "kind": f.kind.value, "highlighted": f.name == highlighted}
        for f in p.funcs.values()
    ]
    decl = {name: i for i, name in enumerate(p.funcs)}
    edges = set()
    for name in p.funcs:
        for producer in p.producers(name):
            edges.add((producer, name))
    edge_list = sorted(edges, key=lambda e: (decl[e[0]], decl[e[1]]))
    return {
        "nodes": nodes,
        "edges": [{"src": a, "dst": b} for a, b in edge_list],
    }
