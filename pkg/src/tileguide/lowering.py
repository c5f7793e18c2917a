"""Lowering of (Pipeline, Schedule) to a loop nest with inferred regions.

The lowered form is a tree of per-func subtrees: an unsplit func is one
loop block over its region; a split func is an outer block over its tile
ranges containing an inner block over one tile.  Producers scheduled at a
location become children of the corresponding block, inserted before the
subtree that uses them.

Region bookkeeping is exact.  Every func's per-instance regions are
described per dimension by "classes": arithmetic runs of concrete boxes
``[lo + i*stride, lo + i*stride + extent - 1]`` with a multiplicity, which
the cost model sums in closed form and the executor reproduces tile by
tile.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

from .ir import (
    Access,
    BinOp,
    Call,
    Expr,
    FuncKind,
    Num,
    ParamRef,
    Pipeline,
    PipelineError,
    VarRef,
    inverse_topological_order,
)
from .schedule import (
    ConsumerNotScheduledError,
    Decision,
    InvalidPositionError,
    LocationOption,
    Position,
    RangeError,
    Schedule,
    TileSplit,
    validate_schedule,
)

DEFAULT_VECTOR_WIDTH = 8

#: Fixed qualitative palette; funcs map to it by declaration index.
PALETTE = (
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
    "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#86bcb6", "#d37295",
)


class LoweringError(PipelineError):
    pass


# ---------------------------------------------------------------------------
# Tile arithmetic
# ---------------------------------------------------------------------------


def tile_extent(parent_extent: int, rng: int) -> int:
    """Nominal tile size when a loop of `parent_extent` is split `rng` ways."""
    if parent_extent < 1:
        raise RangeError(f"parent extent must be >= 1, got {parent_extent}")
    if not 1 <= rng <= parent_extent:
        raise RangeError(f"tile range {rng} out of bounds [1, {parent_extent}]")
    return -(-parent_extent // rng)


def iter_tiles(lo: int, extent: int, rng: int) -> list[tuple[int, int]]:
    """Non-empty (tile_lo, tile_extent) pairs covering [lo, lo+extent) exactly.

    The last tile is clamped and a range coarser than the extent degrades
    to one point per tile (partial instances of a split func can be
    smaller than its nominal range).  Coverage always equals `extent`.
    """
    t = tile_extent(extent, min(rng, extent))
    tiles = []
    for i in range(rng):
        e = min(t, extent - i * t)
        if e <= 0:
            break
        tiles.append((lo + i * t, e))
    return tiles


# ---------------------------------------------------------------------------
# Dimension classes: exact multiset of per-instance intervals
# ---------------------------------------------------------------------------

# (lo, stride, n, extent, mult): n boxes [lo+i*stride, lo+i*stride+extent-1],
# each occurring `mult` times.
DimClass = tuple[int, int, int, int, int]

_CLASS_BUDGET = 200_000


def class_total_extent(classes: list[DimClass]) -> int:
    return sum(n * e * m for (_, _, n, e, m) in classes)


def class_count(classes: list[DimClass]) -> int:
    return sum(n * m for (_, _, n, _, m) in classes)


def class_hull(classes: list[DimClass]) -> tuple[int, int]:
    lo = min(c[0] for c in classes)
    hi = max(c[0] + (c[2] - 1) * c[1] + c[3] - 1 for c in classes)
    return lo, hi


def class_max_extent(classes: list[DimClass]) -> int:
    return max(c[3] for c in classes)


def _merge_classes(classes: list[DimClass]) -> list[DimClass]:
    merged: dict[tuple[int, int, int, int], int] = {}
    for lo, s, n, e, m in classes:
        if n == 1:
            s = 0
        key = (lo, s, n, e)
        merged[key] = merged.get(key, 0) + m
    out = [(lo, s, n, e, m) for (lo, s, n, e), m in merged.items()]
    if len(out) > _CLASS_BUDGET:
        raise LoweringError("region class budget exceeded; schedule too irregular")
    return out


def split_classes(classes: list[DimClass], rng: int) -> list[DimClass]:
    """Tile every box of every class `rng` ways (ceil sizes, last tile clamped)."""
    out: list[DimClass] = []
    for lo, s, n, e, m in classes:
        t = tile_extent(e, min(rng, e))
        k = -(-e // t)  # non-empty tiles per box
        last = e - (k - 1) * t
        if n > 1 and last == t and k * t == s:
            # consecutive boxes tile into one uniform run
            out.append((lo, t, n * k, t, m))
            continue
        for i in range(n):
            base = lo + i * s
            if last == t:
                out.append((base, t, k, t, m))
            else:
                if k > 1:
                    out.append((base, t, k - 1, t, m))
                out.append((base + (k - 1) * t, 0, 1, last, m))
        if len(out) > _CLASS_BUDGET:
            raise LoweringError("region class budget exceeded; schedule too irregular")
    return _merge_classes(out)


def pointify_classes(classes: list[DimClass]) -> list[DimClass]:
    """Decompose boxes into unit-extent instances (per-point hosting)."""
    out: list[DimClass] = []
    for lo, s, n, e, m in classes:
        if n == 1:
            out.append((lo, 1, e, 1, m))
        elif s == e:
            out.append((lo, 1, n * e, 1, m))
        else:
            for i in range(n):
                out.append((lo + i * s, 1, e, 1, m))
    return _merge_classes(out)


# ---------------------------------------------------------------------------
# Symbolic per-dimension offsets (regions relative to a reference box)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RelAbs:
    """A box side per dim: relative [a, b] to the reference box, absolute, or both."""

    rel: tuple[int, int] | None = None
    abs: tuple[int, int] | None = None

    def shift(self, c: int) -> "RelAbs":
        rel = (self.rel[0] + c, self.rel[1] + c) if self.rel else None
        ab = (self.abs[0] + c, self.abs[1] + c) if self.abs else None
        return RelAbs(rel, ab)

    def merge(self, other: "RelAbs") -> "RelAbs":
        rel = _hull2(self.rel, other.rel)
        ab = _hull2(self.abs, other.abs)
        return RelAbs(rel, ab)


def _hull2(a: tuple[int, int] | None, b: tuple[int, int] | None):
    if a is None:
        return b
    if b is None:
        return a
    return (min(a[0], b[0]), max(a[1], b[1]))


IDENTITY = RelAbs(rel=(0, 0))

Entries = dict[str, RelAbs]  # per canonical dim of one func


def _compose(child: Entries, stmt: Entries) -> Entries:
    """Offsets of a stmt box relative to the grandparent, given both hops."""
    out: Entries = {}
    for d, e in stmt.items():
        rel = None
        ab = e.abs
        if e.rel is not None:
            ce = child.get(d)
            assert ce is not None, f"rel offset references missing dim {d}"
            if ce.rel is not None:
                rel = (ce.rel[0] + e.rel[0], ce.rel[1] + e.rel[1])
            if ce.abs is not None:
                ab = _hull2(ab, (ce.abs[0] + e.rel[0], ce.abs[1] + e.rel[1]))
        out[d] = RelAbs(rel, ab)
    return out


def apply_relabs(ref_classes: dict[str, list[DimClass]], ref_dims: tuple[str, ...],
                 dim: str, ra: RelAbs) -> list[DimClass]:
    """Concrete classes for one func dim given its offsets to the reference box."""
    rel_part: list[DimClass] = []
    if ra.rel is not None:
        a, b = ra.rel
        assert dim in ref_dims, f"rel offset for dim {dim} outside reference dims"
        for lo, s, n, e, m in ref_classes[dim]:
            rel_part.append((lo + a, s, n, e + (b - a), m))
    if ra.abs is None:
        return _merge_classes(rel_part)
    al, ah = ra.abs
    if ra.rel is None:
        count = class_count(ref_classes[dim]) if dim in ref_dims else 1
        return [(al, 0, 1, ah - al + 1, count)]
    # mixed: hull every concrete box with the absolute interval
    out: list[DimClass] = []
    for lo, s, n, e, m in rel_part:
        for i in range(n):
            blo = lo + i * s
            bhi = blo + e - 1
            hlo, hhi = min(blo, al), max(bhi, ah)
            out.append((hlo, 0, 1, hhi - hlo + 1, m))
            if len(out) > _CLASS_BUDGET:
                raise LoweringError("region class budget exceeded (mixed access)")
    return _merge_classes(out)


# ---------------------------------------------------------------------------
# Inline expansion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ENum:
    value: float


@dataclass(frozen=True)
class EVar:
    dim: str
    offset: int


@dataclass(frozen=True)
class EBin:
    op: str
    lhs: "ENode"
    rhs: "ENode"


@dataclass(frozen=True)
class ECall:
    fn: str
    arg: "ENode"


Form = tuple[Optional[str], int]  # (consumer dim | None, offset)


@dataclass(frozen=True)
class ERead:
    """Read of a materialized func (or input) at per-dim affine coordinates."""

    target: str
    forms: tuple[Form, ...]
    clamped: bool  # clamp coordinates into the target's extent (inputs only)


@dataclass(frozen=True)
class EScope:
    """Marks the expansion of one inlined producer, for evaluation counting."""

    func: str
    body: "ENode"


ENode = Union[ENum, EVar, EBin, ECall, ERead, EScope]


@dataclass(frozen=True)
class ReadSite:
    target: str
    forms: tuple[Form, ...]
    clamped: bool


@dataclass
class Expansion:
    """A materialized func's expression with all inline producers folded in."""

    func: str
    root: ENode
    reads: list[ReadSite]
    scope_counts: dict[str, int]
    bin_count: int
    call_count: int


def _expand_func(p: Pipeline, s: Schedule, func: str) -> Expansion:
    reads: list[ReadSite] = []
    scope_counts: dict[str, int] = {}
    counts = {"bin": 0, "call": 0}

    f = p.funcs[func]
    identity = {d: (d, 0) for d in f.dims}

    def make_read(target: str, forms: tuple[Form, ...]) -> ENode:
        tf = p.funcs[target]
        if tf.kind is FuncKind.INPUT:
            node = ERead(target, forms, clamped=False)
            reads.append(ReadSite(target, forms, False))
            return node
        if tf.kind is FuncKind.CLAMP:
            if s.is_materialized(target):
                node = ERead(target, forms, clamped=False)
                reads.append(ReadSite(target, forms, False))
                return node
            scope_counts[target] = scope_counts.get(target, 0) + 1
            inner = ERead(tf.clamp_source, forms, clamped=True)
            reads.append(ReadSite(tf.clamp_source, forms, True))
            return EScope(target, inner)
        if s.is_materialized(target):
            node = ERead(target, forms, clamped=False)
            reads.append(ReadSite(target, forms, False))
            return node
        scope_counts[target] = scope_counts.get(target, 0) + 1
        subst = {d: form for d, form in zip(tf.dims, forms)}
        return EScope(target, expand(tf.expr, subst))

    def expand(e: Expr, subst: dict[str, Form]) -> ENode:
        if isinstance(e, Num):
            return ENum(e.value)
        if isinstance(e, ParamRef):
            return ENum(p.params[e.name])
        if isinstance(e, VarRef):
            var, off = subst[e.name]
            if var is None:
                return ENum(float(off))
            return EVar(var, off)
        if isinstance(e, BinOp):
            counts["bin"] += 1
            return EBin(e.op, expand(e.lhs, subst), expand(e.rhs, subst))
        if isinstance(e, Call):
            counts["call"] += 1
            return ECall(e.fn, expand(e.arg, subst))
        assert isinstance(e, Access)
        forms = []
        for arg in e.args:
            if arg.var is None:
                forms.append((None, arg.offset))
            else:
                var, off = subst[arg.var]
                forms.append((var, off + arg.offset) if var is not None else (None, off + arg.offset))
        return make_read(e.func, tuple(forms))

    if f.kind is FuncKind.CLAMP:
        forms = tuple((d, 0) for d in f.dims)
        root: ENode = ERead(f.clamp_source, forms, clamped=True)
        reads.append(ReadSite(f.clamp_source, forms, True))
    else:
        root = expand(f.expr, identity)
    return Expansion(func, root, reads, scope_counts, counts["bin"], counts["call"])


# ---------------------------------------------------------------------------
# Nest structure
# ---------------------------------------------------------------------------


@dataclass
class NestItem:
    func: str
    dims: tuple[str, ...]
    split: TileSplit | None
    outer_children: list["NestItem"] = field(default_factory=list)
    inner_children: list["NestItem"] = field(default_factory=list)

    @property
    def block_ids(self) -> tuple[str, ...]:
        if self.split is not None:
            return (f"{self.func}.outer", f"{self.func}.inner")
        return (f"{self.func}.loop",)

    def subtree_funcs(self) -> set[str]:
        out = {self.func}
        for c in self.outer_children + self.inner_children:
            out |= c.subtree_funcs()
        return out


@dataclass
class FuncInfo:
    """Exact region accounting for one materialized func."""

    func: str
    dims: tuple[str, ...]
    inst_classes: dict[str, list[DimClass]]  # per-instance (buffer) regions
    tile_classes: dict[str, list[DimClass]]  # stmt granularity (split tiles)
    outer_mult: int
    depth: int

    @property
    def points(self) -> int:
        total = self.outer_mult
        for d in self.dims:
            total *= class_total_extent(self.inst_classes[d])
        return total

    @property
    def instances(self) -> int:
        total = self.outer_mult
        for d in self.dims:
            total *= class_count(self.inst_classes[d])
        return total

    def region(self) -> dict[str, tuple[int, int]]:
        return {d: class_hull(self.inst_classes[d]) for d in self.dims}

    def nominal_inst(self, d: str) -> int:
        return class_max_extent(self.inst_classes[d])

    def nominal_tile(self, d: str) -> int:
        return class_max_extent(self.tile_classes[d])


@dataclass
class LoweredNest:
    pipeline: Pipeline
    schedule: Schedule
    root_items: list[NestItem]  # output subtree last
    expansions: dict[str, Expansion]
    info: dict[str, FuncInfo]
    vector_width: int

    def item(self, func: str) -> NestItem:
        def find(items: list[NestItem]) -> NestItem | None:
            for it in items:
                if it.func == func:
                    return it
                got = find(it.outer_children) or find(it.inner_children)
                if got:
                    return got
            return None

        it = find(self.root_items)
        if it is None:
            raise LoweringError(f"'{func}' is not materialized in this nest")
        return it

    def stmt_path(self, func: str) -> tuple[str, ...]:
        """Block-id chain from root down to a func's compute statement."""

        def find(items: list[NestItem], prefix: tuple[str, ...]):
            for it in items:
                ids = it.block_ids
                if it.func == func:
                    return prefix + ids
                if it.split is not None:
                    got = find(it.outer_children, prefix + ids[:1])
                    if got:
                        return got
                    got = find(it.inner_children, prefix + ids)
                    if got:
                        return got
            return None

        path = find(self.root_items, ())
        if path is None:
            raise LoweringError(f"'{func}' is not materialized in this nest")
        return path


def _materialized_order(p: Pipeline, s: Schedule) -> list[str]:
    return [f for f in inverse_topological_order(p) if s.is_materialized(f)]


def _resolve_body(root_items: list[NestItem], path: tuple[str, ...]) -> list[NestItem]:
    """The children list addressed by a block-id path."""
    body = root_items
    i = 0
    while i < len(path):
        pid = path[i]
        hosting = None
        for it in body:
            if it.split is not None and pid == f"{it.func}.outer":
                if i + 1 < len(path) and path[i + 1] == f"{it.func}.inner":
                    hosting = it.inner_children
                    i += 2
                else:
                    hosting = it.outer_children
                    i += 1
                break
            if it.split is None and pid == f"{it.func}.loop":
                raise InvalidPositionError(
                    f"block '{pid}' is an unsplit loop and hosts no children"
                )
        if hosting is None:
            raise InvalidPositionError(f"no block '{pid}' at this path")
        body = hosting
    return body


def _build_items(p: Pipeline, s: Schedule, expansions: dict[str, Expansion]) -> list[NestItem]:
    root_items: list[NestItem] = []
    items: dict[str, NestItem] = {}

    def readers_of(func: str) -> set[str]:
        return {
            g
            for g, exp in expansions.items()
            if any(r.target == func for r in exp.reads)
        }

    def earliest_use_index(body: list[NestItem], func: str) -> int:
        rd = readers_of(func)
        for i, it in enumerate(body):
            if it.subtree_funcs() & rd:
                return i
        raise InvalidPositionError(
            f"'{func}' has no use inside its requested block; position is stale"
        )

    for func in _materialized_order(p, s):
        d = s.decision(func)
        item = NestItem(func, p.funcs[func].dims, d.split)
        items[func] = item
        pos = d.position
        if func == p.output:
            root_items.append(item)
            continue
        body = _resolve_body(root_items, pos.path)
        if pos.is_root:
            body.insert(earliest_use_index(body, func), item)
        else:
            anchor = getattr(pos, "anchor", None)
            if anchor is None:
                idx = len(body) if pos.index is None else pos.index
                if not 0 <= idx <= len(body):
                    raise InvalidPositionError(
                        f"slot {pos.index} out of range for '{func}'"
                    )
            elif anchor == "__primary__":
                idx = len(body)
            else:
                idx = next(
                    (i for i, it in enumerate(body) if it.func == anchor), None
                )
                if idx is None:
                    raise InvalidPositionError(
                        f"anchor '{anchor}' for '{func}' is gone; position is stale"
                    )
            body.insert(idx, item)

    # Every materialized func must be computed before all of its readers,
    # within a body that encloses them.  A body's implicit tail is the
    # owner's own continuation (inner block and statement).
    def check_children(children: list[NestItem], tail_funcs: set[str]) -> None:
        for i, it in enumerate(children):
            rd = readers_of(it.func) & set(items)
            later = set(tail_funcs)
            for other in children[i + 1:]:
                later |= other.subtree_funcs()
            if not rd <= later:
                raise InvalidPositionError(
                    f"'{it.func}' is not visible to all of its readers "
                    f"({sorted(rd - later)}); position is stale"
                )

    def check_item(it: NestItem) -> None:
        check_children(it.inner_children, {it.func})
        inner_funcs: set[str] = {it.func}
        for c in it.inner_children:
            inner_funcs |= c.subtree_funcs()
        check_children(it.outer_children, inner_funcs)
        for c in it.outer_children + it.inner_children:
            check_item(c)

    check_children(root_items[:-1], root_items[-1].subtree_funcs())
    for it in root_items:
        check_item(it)
    return root_items


# ---------------------------------------------------------------------------
# Symbolic region inference over the nest
# ---------------------------------------------------------------------------


class _Symbolic:
    def __init__(self, expansions: dict[str, Expansion]):
        self.expansions = expansions
        self.catalogs: dict[int, list[tuple[str, Entries]]] = {}
        self.body_offsets: dict[int, Entries] = {}  # keyed by id(NestItem)

    def catalog(self, item: NestItem) -> list[tuple[str, Entries]]:
        cached = self.catalogs.get(id(item))
        if cached is not None:
            return cached
        identity = {d: IDENTITY for d in item.dims}
        primary: list[tuple[str, Entries]] = [(item.func, identity)]
        inner_offs = self.offsets_for_body(item.inner_children, list(primary))
        for child in item.inner_children:
            for sf, se in self.catalog(child):
                primary.append((sf, _compose(inner_offs[id(child)], se)))
        outer_offs = self.offsets_for_body(item.outer_children, list(primary))
        full = list(primary)
        for child in item.outer_children:
            for sf, se in self.catalog(child):
                full.append((sf, _compose(outer_offs[id(child)], se)))
        self.catalogs[id(item)] = full
        return full

    def offsets_for_body(
        self, children: list[NestItem], primary_catalog: list[tuple[str, Entries]]
    ) -> dict[int, Entries]:
        """Offsets of each child's region relative to the body's reference box."""
        offs: dict[int, Entries] = {}
        acc = list(primary_catalog)
        for child in reversed(children):
            target = child.func
            tdims = child.dims
            entries: Entries = {}
            for sf, se in acc:
                for site in self.expansions[sf].reads:
                    if site.target != target:
                        continue
                    for dim, form in zip(tdims, site.forms):
                        var, off = form
                        if var is None:
                            ra = RelAbs(None, (off, off))
                        else:
                            ra = se[var].shift(off)
                        entries[dim] = entries.get(dim, RelAbs(None, None)).merge(ra)
            if len(entries) != len(tdims):
                raise InvalidPositionError(
                    f"'{target}' has no use inside its block; position is stale"
                )
            offs[id(child)] = entries
            self.body_offsets[id(child)] = entries
            composed = [
                (sf, _compose(entries, se)) for sf, se in self.catalog(child)
            ]
            acc = composed + acc
        return offs


def _build_info(
    p: Pipeline, root_items: list[NestItem], sym: _Symbolic
) -> dict[str, FuncInfo]:
    info: dict[str, FuncInfo] = {}
    output_item = root_items[-1]
    out_dims = output_item.dims
    out_classes = {
        d: [(0, 0, 1, e, 1)] for d, e in zip(out_dims, p.output_extent)
    }

    # run the symbolic pass over the whole root body
    sym.offsets_for_body(root_items[:-1], sym.catalog(output_item))

    def fill(
        item: NestItem,
        ref_classes: dict[str, list[DimClass]],
        ref_dims: tuple[str, ...],
        ref_mult: int,
        entries: Entries | None,
        depth: int,
    ) -> None:
        if entries is None:  # the primary item: region == reference box
            inst = {d: list(ref_classes[d]) for d in item.dims}
        else:
            inst = {
                d: apply_relabs(ref_classes, ref_dims, d, entries[d])
                for d in item.dims
            }
        mult = ref_mult
        for d in ref_dims:
            if d not in item.dims:
                mult *= class_count(ref_classes[d])
        if item.split is not None:
            tiles = dict(inst)
            tiles["x"] = split_classes(inst["x"], item.split.range_x)
            if "y" in item.dims:
                tiles["y"] = split_classes(inst["y"], item.split.range_y)
        else:
            tiles = inst
        info[item.func] = FuncInfo(item.func, item.dims, inst, tiles, mult, depth)
        for child in item.outer_children:
            fill(child, tiles, item.dims, mult, sym.body_offsets[id(child)], depth + 1)
        if item.inner_children:
            points = {d: pointify_classes(tiles[d]) for d in item.dims}
            for child in item.inner_children:
                fill(child, points, item.dims, mult, sym.body_offsets[id(child)], depth + 2)

    for item in root_items:
        entries = None if item is output_item else sym.body_offsets[id(item)]
        fill(item, out_classes, out_dims, 1, entries, 0)
    return info


def _check_input_bounds(p: Pipeline, nest: LoweredNest) -> None:
    """Direct (unclamped) input reads must stay inside the declared extents."""
    for func, exp in nest.expansions.items():
        fi = nest.info[func]
        for site in exp.reads:
            tf = p.funcs[site.target]
            if tf.kind is not FuncKind.INPUT or site.clamped:
                continue
            for i, (dim, ext) in enumerate(zip(tf.dims, tf.extent)):
                var, off = site.forms[i]
                if var is None:
                    lo = hi = off
                else:
                    rlo, rhi = class_hull(fi.inst_classes[var])
                    lo, hi = rlo + off, rhi + off
                if lo < 0 or hi > ext - 1:
                    raise LoweringError(
                        f"'{func}' reads input '{site.target}' outside its extent "
                        f"({dim}: [{lo}, {hi}] vs [0, {ext - 1}]); wrap it with clamp_edge"
                    )


def _expansions_for(p: Pipeline, s: Schedule) -> dict[str, Expansion]:
    """Expansions depend only on which funcs are materialized, so cache them
    per pipeline keyed by that set."""
    materialized = frozenset(f for f in s.decisions if s.is_materialized(f))
    cache = getattr(p, "_expansion_cache", None)
    if cache is None:
        cache = {}
        object.__setattr__(p, "_expansion_cache", cache)
    hit = cache.get(materialized)
    if hit is None:
        hit = {
            f: _expand_func(p, s, f)
            for f in inverse_topological_order(p)
            if s.is_materialized(f)
        }
        cache[materialized] = hit
    return hit


def lower(
    p: Pipeline, s: Schedule, vector_width: int = DEFAULT_VECTOR_WIDTH
) -> LoweredNest:
    """Deterministically lower a schedule; undecided funcs default to inline."""
    validate_schedule(p, s)
    expansions = _expansions_for(p, s)
    root_items = _build_items(p, s, expansions)
    sym = _Symbolic(expansions)
    info = _build_info(p, root_items, sym)
    nest = LoweredNest(p, s, root_items, expansions, info, vector_width)
    _check_input_bounds(p, nest)
    return nest


# ---------------------------------------------------------------------------
# Block view, pretty printer, tile visualization
# ---------------------------------------------------------------------------


@dataclass
class StmtView:
    func: str
    region: dict[str, tuple[int, int]]
    tile_size: dict[str, int]


@dataclass
class BlockView:
    id: str
    func: str
    level: str  # outer | inner | loop
    loops: list[tuple[str, int]]  # (display var, extent)
    markers: list[str]
    body: list[Union["BlockView", StmtView]]


def build_blocks(nest: LoweredNest) -> list[BlockView]:
    p = nest.pipeline

    def item_blocks(item: NestItem, outermost_output: bool) -> BlockView:
        fi = nest.info[item.func]
        stmt = StmtView(
            item.func,
            fi.region(),
            {d: fi.nominal_tile(d) for d in item.dims},
        )
        vec = fi.nominal_tile("x") >= nest.vector_width
        if item.split is None:
            loops = [(d, fi.nominal_inst(d)) for d in item.dims]
            markers = (["parallel"] if outermost_output else []) + (
                ["vectorized"] if vec else []
            )
            return BlockView(
                f"{item.func}.loop", item.func, "loop", loops, markers, [stmt]
            )
        outer_loops = [("x_outer", item.split.range_x)]
        inner_loops = [("x_inner", fi.nominal_tile("x"))]
        if "y" in item.dims:
            outer_loops.append(("y_outer", item.split.range_y))
            inner_loops.append(("y_inner", fi.nominal_tile("y")))
        if "c" in item.dims:
            inner_loops.append(("c", fi.nominal_inst("c")))
        inner = BlockView(
            f"{item.func}.inner",
            item.func,
            "inner",
            inner_loops,
            ["vectorized"] if vec else [],
            [item_blocks(c, False) for c in item.inner_children] + [stmt],
        )
        outer = BlockView(
            f"{item.func}.outer",
            item.func,
            "outer",
            outer_loops,
            ["parallel"] if outermost_output else [],
            [item_blocks(c, False) for c in item.outer_children] + [inner],
        )
        return outer

    return [
        item_blocks(it, it.func == p.output) for it in nest.root_items
    ]


def pretty_print(nest: LoweredNest, markers: bool = False) -> str:
    """Loop-listing rendering of the nest (`for x in 0..255` style)."""
    lines: list[str] = []

    def emit(node: Union[BlockView, StmtView], depth: int) -> None:
        if isinstance(node, StmtView):
            dims = ", ".join(node.region.keys())
            lines.append("  " * depth + f"{node.func}({dims}) = ...")
            return
        d = depth
        for i, (var, extent) in enumerate(node.loops):
            suffix = ""
            if markers and i == 0 and node.markers:
                suffix = "  [" + ", ".join(node.markers) + "]"
            lines.append("  " * d + f"for {var} in 0..{extent - 1}{suffix}")
            d += 1
        for child in node.body:
            emit(child, d)

    for b in build_blocks(nest):
        emit(b, 0)
    return "\n".join(lines) + "\n"


def func_color(p: Pipeline, func: str) -> str:
    decl = list(p.funcs)
    return PALETTE[decl.index(func) % len(PALETTE)]


@dataclass
class TileVizEntry:
    block_id: str
    func: str
    width: int
    height: int
    color: str
    markers: list[str]
    depth: int


def view_model(nest: LoweredNest, image_extent: tuple[int, ...]) -> list[TileVizEntry]:
    """One display tile per loop block, divided top-down by tile ranges."""
    p = nest.pipeline
    width = image_extent[0]
    height = image_extent[1] if len(image_extent) > 1 else 1
    entries: list[TileVizEntry] = []

    def walk(block: BlockView, tile: tuple[int, int], depth: int) -> None:
        w, h = tile
        if block.level == "outer":
            ranges = dict(block.loops)
            rx = ranges.get("x_outer", 1)
            ry = ranges.get("y_outer", 1)
            w = tile_extent(w, min(rx, w))
            h = tile_extent(h, min(ry, h))
        entries.append(
            TileVizEntry(
                block.id, block.func, w, h, func_color(p, block.func),
                list(block.markers), depth,
            )
        )
        for child in block.body:
            if isinstance(child, BlockView):
                walk(child, (w, h), depth + 1)

    for b in build_blocks(nest):
        walk(b, (width, height), 0)
    return entries


# ---------------------------------------------------------------------------
# Schedule editing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnchoredPosition(Position):
    """Position plus the sibling it was inserted before, for stable replay."""

    anchor: str | None = None  # sibling func name, or "__primary__"


def valid_compute_locations(
    p: Pipeline, s: Schedule, func: str
) -> list[LocationOption]:
    """Inline plus every position from root down to the deepest block that
    still encloses all use sites of `func`."""
    f = p.funcs.get(func)
    if f is None or f.kind is FuncKind.INPUT:
        raise InvalidPositionError(f"'{func}' is not schedulable")
    if func == p.output:
        raise InvalidPositionError(f"output '{func}' is fixed at root")
    for consumer in p.consumers(func):
        if p.funcs[consumer].kind is not FuncKind.INPUT and consumer not in s.decisions:
            raise ConsumerNotScheduledError(
                f"consumer '{consumer}' of '{func}' has no decision yet"
            )
    nest = lower(p, s.with_decision(func, Decision(inline=True)))
    # with `func` forced inline, its use sites are the stmts whose
    # expansions fold it in
    users = [
        g for g, exp in nest.expansions.items()
        if exp.scope_counts.get(func, 0) > 0
    ]
    paths = [nest.stmt_path(g) for g in users]
    prefix = paths[0]
    for path in paths[1:]:
        i = 0
        while i < len(prefix) and i < len(path) and prefix[i] == path[i]:
            i += 1
        prefix = prefix[:i]

    options = [LocationOption(None, "inline")]

    def add_level(path: tuple[str, ...]) -> None:
        body = _resolve_body(nest.root_items, path)
        rd = set(users)
        idx = len(body)
        anchor = "__primary__"
        for i, it in enumerate(body):
            if it.subtree_funcs() & rd:
                idx = i
                anchor = it.func
                break
        if not path:
            pos = AnchoredPosition((), None, None)
            label = f"at root, before {anchor if anchor != '__primary__' else 'the output'}"
        else:
            pos = AnchoredPosition(path, idx, anchor)
            kind = "per tile" if path[-1].endswith(".outer") else "per point"
            before = anchor if anchor != "__primary__" else body_owner(path)
            label = f"inside {path[-1]} ({kind}), before {before}"
        options.append(LocationOption(pos, label))

    def body_owner(path: tuple[str, ...]) -> str:
        return path[-1].split(".")[0]

    add_level(())
    for i, block_id in enumerate(prefix):
        if block_id.endswith(".loop"):
            continue
        add_level(prefix[: i + 1])
    return options


def apply_compute_location(
    p: Pipeline, s: Schedule, func: str, choice: Union[LocationOption, Position, str, None]
) -> Schedule:
    """Apply one of the valid compute locations (or 'inline') for `func`."""
    if isinstance(choice, LocationOption):
        target = choice.position
    elif isinstance(choice, str):
        if choice != "inline":
            raise InvalidPositionError(f"unknown location {choice!r}")
        target = None
    else:
        target = choice
    options = valid_compute_locations(p, s, func)
    if target is None:
        if not any(o.inline for o in options):
            raise InvalidPositionError(f"'{func}' cannot be inlined")
        return s.with_decision(func, Decision(inline=True))
    for o in options:
        if o.inline:
            continue
        op = o.position
        if op.path == target.path and (
            op.index == target.index or op.is_root
        ):
            return s.with_decision(func, Decision.at(op))
    raise InvalidPositionError(
        f"position {target} is not currently valid for '{func}'"
    )


def apply_tile_range(
    p: Pipeline, s: Schedule, func: str, range_x: int, range_y: int = 1
) -> Schedule:
    """Record a tile split for a materialized func; ranges checked against
    the func's region extents at its location."""
    d = s.decision(func)
    if d.inline:
        raise RangeError(f"'{func}' is inlined; tiling does not apply")
    if not (isinstance(range_x, int) and isinstance(range_y, int)):
        raise RangeError("tile ranges must be integers")
    # instance extents do not depend on the func's own split
    nest = lower(p, s)
    fi = nest.info[func]
    dims = fi.dims
    ext_x = fi.nominal_inst("x")
    if not 1 <= range_x <= ext_x:
        raise RangeError(f"range_x {range_x} out of bounds [1, {ext_x}] for '{func}'")
    if "y" in dims:
        ext_y = fi.nominal_inst("y")
        if not 1 <= range_y <= ext_y:
            raise RangeError(f"range_y {range_y} out of bounds [1, {ext_y}] for '{func}'")
    else:
        range_y = 1  # 1-D funcs only tile x
    return s.with_decision(func, replace(d, split=TileSplit(range_x, range_y)))


# ---------------------------------------------------------------------------
# Schedule scripts
# ---------------------------------------------------------------------------


def format_schedule_script(p: Pipeline, s: Schedule) -> str:
    """Export a schedule as replayable script text.

    Slots are renumbered to the order the script itself replays in
    (inverse topological), so importing reproduces the schedule exactly.
    """
    nest = lower(p, s)
    order = _materialized_order(p, s)
    emitted: set[str] = set()
    lines: list[str] = []
    for func in order:
        d = s.decision(func)
        pos = d.position
        if func == p.output or pos.is_root:
            lines.append(f"compute {func} at root")
        else:
            body = _resolve_body(nest.root_items, pos.path)
            final_index = next(i for i, it in enumerate(body) if it.func == func)
            slot = sum(
                1 for it in body[:final_index] if it.func in emitted
            )
            lines.append(f"compute {func} at {'/'.join(pos.path)} slot {slot}")
        if d.split is not None:
            lines.append(f"tile {func} {d.split.range_x} {d.split.range_y}")
        emitted.add(func)
    return "\n".join(lines) + "\n"


def parse_schedule_script(p: Pipeline, text: str) -> Schedule:
    """Parse and apply a schedule script against a default schedule."""
    from .schedule import default_schedule

    s = default_schedule(p)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stmt = raw.split("#", 1)[0].strip()
        if not stmt:
            continue
        parts = stmt.split()
        try:
            if parts[0] == "compute":
                func = parts[1]
                if parts[2:] == ["inline"]:
                    s = apply_compute_location(p, s, func, "inline")
                elif parts[2:] == ["at", "root"]:
                    if func != p.output:
                        s = apply_compute_location(p, s, func, Position((), None))
                elif len(parts) == 6 and parts[2] == "at" and parts[4] == "slot":
                    path = tuple(parts[3].split("/"))
                    s = apply_compute_location(
                        p, s, func, Position(path, int(parts[5]))
                    )
                else:
                    raise InvalidPositionError(f"bad compute line: {stmt!r}")
            elif parts[0] == "tile" and len(parts) == 4:
                s = apply_tile_range(p, s, parts[1], int(parts[2]), int(parts[3]))
            else:
                raise InvalidPositionError(f"bad schedule line: {stmt!r}")
        except (PipelineError, ValueError, IndexError) as exc:
            raise InvalidPositionError(f"line {lineno}: {exc}") from exc
    return s
