"""Analytical schedule cost: exact load/store/compute counting over the
lowered nest, plus ranking helpers for compute locations and tile ranges.

Counts (points, stores, load sites) are exact and must agree with the
instrumented interpreter.  Weights model locality: a load is cheap when
either the producer's per-instance allocation or the consumer's per-tile
read window fits in cache, which is what makes tile-size choice a real
trade-off (small tiles read small windows but recompute halo points).
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from .ir import FuncKind, Pipeline, PipelineError
from .lowering import (
    Expansion,
    FuncInfo,
    LoweredNest,
    ReadSite,
    lower,
    valid_compute_locations,
    apply_compute_location,
    apply_tile_range,
)
from .schedule import (
    Decision,
    LocationOption,
    Schedule,
    TileSplit,
    TilingNotApplicableError,
)


@dataclass(frozen=True)
class MachineParams:
    cache_bytes: int = 32768
    weight_op: float = 1.0
    weight_store: float = 2.0
    weight_load_cached: float = 1.0
    weight_load_uncached: float = 8.0
    vector_width: int = 8
    bytes_per_element: int = 8
    intrinsic_op_weight: int = 10

    def __post_init__(self):
        if self.cache_bytes <= 0 or self.vector_width < 1 or self.bytes_per_element < 1:
            raise PipelineError("machine params must be positive")
        for w in (self.weight_op, self.weight_store, self.weight_load_cached,
                  self.weight_load_uncached):
            if w <= 0:
                raise PipelineError("cost weights must be > 0")


def parse_machine_config(text: str) -> MachineParams:
    """Load machine params from `key = value` lines (# comments allowed)."""
    known = {f.name: f.type for f in fields(MachineParams)}
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stmt = raw.split("#", 1)[0].strip()
        if not stmt:
            continue
        key, eq, val = (s.strip() for s in stmt.partition("="))
        if not eq or key not in known:
            raise PipelineError(f"line {lineno}: unknown machine param {key!r}")
        try:
            values[key] = float(val) if "weight" in key and "intrinsic" not in key else int(val)
        except ValueError:
            raise PipelineError(f"line {lineno}: bad value {val!r}") from None
    return MachineParams(**values)


@dataclass(frozen=True)
class FuncCost:
    points: int
    compute: float
    load: float
    store: float
    evals: int

    @property
    def total(self) -> float:
        return self.compute + self.load + self.store


@dataclass(frozen=True)
class CostEstimate:
    total: float
    load: float
    store: float
    compute: float
    per_func: dict[str, FuncCost]

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "load": self.load,
            "store": self.store,
            "compute": self.compute,
        }


def _alloc_bytes(nest: LoweredNest, m: MachineParams, target: str) -> int:
    tf = nest.pipeline.funcs[target]
    if tf.kind is FuncKind.INPUT:
        n = 1
        for e in tf.extent:
            n *= e
        return n * m.bytes_per_element
    fi = nest.info[target]
    n = 1
    for d in fi.dims:
        n *= fi.nominal_inst(d)
    return n * m.bytes_per_element


def _read_groups(exp: Expansion) -> dict[str, list[ReadSite]]:
    groups: dict[str, list[ReadSite]] = {}
    for site in exp.reads:
        groups.setdefault(site.target, []).append(site)
    return groups


def _footprint_extents(
    p: Pipeline, sites: list[ReadSite], scope_extent: dict[str, int]
) -> list[int]:
    """Per target dim, the size of the window one consumer tile reads."""
    target = p.funcs[sites[0].target]
    out = []
    for i, d in enumerate(target.dims):
        rel_lo = rel_hi = None
        abs_lo = abs_hi = None
        scope = 1
        for site in sites:
            var, off = site.forms[i]
            if var is None:
                abs_lo = off if abs_lo is None else min(abs_lo, off)
                abs_hi = off if abs_hi is None else max(abs_hi, off)
            else:
                rel_lo = off if rel_lo is None else min(rel_lo, off)
                rel_hi = off if rel_hi is None else max(rel_hi, off)
                scope = scope_extent[var]
        ext = 0
        if rel_lo is not None:
            ext = scope + (rel_hi - rel_lo)
        if abs_lo is not None:
            ext = max(ext, abs_hi - abs_lo + 1)
        if target.kind is FuncKind.INPUT:
            ext = min(ext, target.extent[i])
        out.append(ext)
    return out


def _load_weight(
    p: Pipeline,
    m: MachineParams,
    alloc_bytes: int,
    sites: list[ReadSite],
    scope_extent: dict[str, int],
) -> float:
    fp = 1
    for e in _footprint_extents(p, sites, scope_extent):
        fp *= e
    locality = min(alloc_bytes, fp * m.bytes_per_element)
    return m.weight_load_cached if locality <= m.cache_bytes else m.weight_load_uncached


def estimate(
    p: Pipeline,
    s: Schedule,
    m: MachineParams = MachineParams(),
    nest: LoweredNest | None = None,
) -> CostEstimate:
    """Closed-form cost of a (possibly partial) schedule.

    Funcs without a decision count as inline, matching the guided flow
    where not-yet-visited funcs default to the inline schedule.
    """
    if nest is None:
        nest = lower(p, s, m.vector_width)
    per_func: dict[str, FuncCost] = {}
    inline_evals: dict[str, int] = {}
    total_load = total_store = total_compute = 0.0

    for func, exp in nest.expansions.items():
        fi = nest.info[func]
        points = fi.points
        eff_ops = exp.bin_count + m.intrinsic_op_weight * exp.call_count
        vec = m.vector_width if fi.nominal_tile("x") >= m.vector_width else 1
        compute = points * eff_ops * m.weight_op / vec
        store = points * m.weight_store
        scope = {d: fi.nominal_tile(d) for d in fi.dims}
        load = 0.0
        for target, sites in _read_groups(exp).items():
            w = _load_weight(p, m, _alloc_bytes(nest, m, target), sites, scope)
            load += len(sites) * points * w
        per_func[func] = FuncCost(points, compute, load, store, points)
        total_load += load
        total_store += store
        total_compute += compute
        for g, count in exp.scope_counts.items():
            inline_evals[g] = inline_evals.get(g, 0) + count * points

    for g, evals in inline_evals.items():
        if g not in per_func:
            per_func[g] = FuncCost(0, 0.0, 0.0, 0.0, evals)

    return CostEstimate(
        total_load + total_store + total_compute,
        total_load,
        total_store,
        total_compute,
        per_func,
    )


def rank_compute_locations(
    p: Pipeline, s: Schedule, func: str, m: MachineParams = MachineParams()
) -> list[tuple[LocationOption, CostEstimate]]:
    """Cost of every valid compute location, in option order."""
    out = []
    for option in valid_compute_locations(p, s, func):
        trial = apply_compute_location(p, s, func, option)
        out.append((option, estimate(p, trial, m)))
    return out


def _candidate_grid(parent_tile: tuple[int, ...]) -> np.ndarray:
    """(n, 2) array of multiples-of-four (range_x, range_y) candidates."""
    w = parent_tile[0]
    if w < 4:
        raise TilingNotApplicableError(
            f"parent tile width {w} is below the minimum tiling quantum of 4"
        )
    xs = np.arange(4, 4 * (w // 4) + 1, 4, dtype=np.int64)
    if len(parent_tile) == 1:
        ys = np.array([1], dtype=np.int64)
    else:
        h = parent_tile[1]
        if h < 4:
            raise TilingNotApplicableError(
                f"parent tile height {h} is below the minimum tiling quantum of 4"
            )
        ys = np.arange(4, 4 * (h // 4) + 1, 4, dtype=np.int64)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def tile_range_candidates(parent_tile: tuple[int, ...]) -> list[tuple[int, int]]:
    """Multiples-of-four tile ranges for the given parent tile extents.

    1-D parents tile x only (range_y fixed at 1).
    """
    return [(int(rx), int(ry)) for rx, ry in _candidate_grid(parent_tile)]


def _has_nest_children(nest: LoweredNest, func: str) -> bool:
    item = nest.item(func)
    return bool(item.outer_children or item.inner_children)


def _sweep_totals(
    p: Pipeline,
    m: MachineParams,
    nest: LoweredNest,
    func: str,
    cands: np.ndarray,  # (n, 2) of (rx, ry)
) -> np.ndarray:
    """Totals for every candidate via the incremental formula: only the
    cursor func's compute discount and load weights vary with its split."""
    base_est = estimate(p, nest.schedule, m, nest=nest)
    f_terms = base_est.per_func[func]
    base = base_est.total - f_terms.total

    fi = nest.info[func]
    exp = nest.expansions[func]
    points = fi.points
    eff_ops = exp.bin_count + m.intrinsic_op_weight * exp.call_count

    rx = cands[:, 0].astype(np.int64)
    ry = cands[:, 1].astype(np.int64)
    w_inst = fi.nominal_inst("x")
    tx = -(w_inst // -rx)
    scope = {"x": tx}
    if "y" in fi.dims:
        h_inst = fi.nominal_inst("y")
        scope["y"] = -(h_inst // -ry)
    if "c" in fi.dims:
        scope["c"] = np.full_like(rx, fi.nominal_inst("c"))

    vec = np.where(tx >= m.vector_width, float(m.vector_width), 1.0)
    compute = points * eff_ops * m.weight_op / vec
    store = points * m.weight_store
    load = np.zeros(len(cands), dtype=np.float64)
    for target, sites in _read_groups(exp).items():
        tf = p.funcs[target]
        alloc = _alloc_bytes(nest, m, target)
        fp = np.ones(len(cands), dtype=np.float64)
        for i, d in enumerate(tf.dims):
            rel_lo = rel_hi = None
            abs_lo = abs_hi = None
            scope_e = None
            for site in sites:
                var, off = site.forms[i]
                if var is None:
                    abs_lo = off if abs_lo is None else min(abs_lo, off)
                    abs_hi = off if abs_hi is None else max(abs_hi, off)
                else:
                    rel_lo = off if rel_lo is None else min(rel_lo, off)
                    rel_hi = off if rel_hi is None else max(rel_hi, off)
                    scope_e = scope[var]
            ext = np.zeros(len(cands), dtype=np.float64)
            if rel_lo is not None:
                ext = scope_e + (rel_hi - rel_lo)
            if abs_lo is not None:
                ext = np.maximum(ext, abs_hi - abs_lo + 1)
            if tf.kind is FuncKind.INPUT:
                ext = np.minimum(ext, tf.extent[i])
            fp *= ext
        locality = np.minimum(float(alloc), fp * m.bytes_per_element)
        w = np.where(locality <= m.cache_bytes, m.weight_load_cached, m.weight_load_uncached)
        load += len(sites) * points * w
    return base + compute + store + load


def rank_tile_suggestions(
    p: Pipeline,
    s: Schedule,
    func: str,
    m: MachineParams = MachineParams(),
    k: int = 5,
) -> list[tuple[tuple[int, int], CostEstimate]]:
    """Top-k tile ranges by estimated total, ascending; ties break toward
    smaller (range_y, range_x)."""
    d = s.decision(func)
    if d.inline:
        raise TilingNotApplicableError(f"'{func}' is inlined; tiling does not apply")
    # the func's instance region does not depend on its own split, so the
    # current schedule serves for extents whatever its split state
    nest = lower(p, s, m.vector_width)
    fi = nest.info[func]
    parent = tuple(fi.nominal_inst(d2) for d2 in fi.dims if d2 in ("x", "y"))
    arr = _candidate_grid(parent)

    def with_split(rx: int, ry: int) -> Schedule:
        return s.with_decision(func, replace(d, split=TileSplit(int(rx), int(ry))))

    if _has_nest_children(nest, func):
        scored = []
        for rx, ry in arr:
            scored.append((estimate(p, with_split(rx, ry), m).total, ry, rx))
        scored.sort()
        top = [(int(rx), int(ry)) for (_, ry, rx) in scored[:k]]
    else:
        totals = _sweep_totals(p, m, nest, func, arr)
        order = np.lexsort((arr[:, 0], arr[:, 1], totals))
        top = [tuple(int(v) for v in arr[i]) for i in order[:k]]

    exact = [((rx, ry), estimate(p, with_split(rx, ry), m)) for rx, ry in top]
    exact.sort(key=lambda e: (e[1].total, e[0][1], e[0][0]))
    return exact[:k]
