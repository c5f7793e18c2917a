"""Guided optimization sessions.

A session walks the pipeline's funcs in inverse topological order, output
first.  Each func gets a compute-location phase and then, when tiling
applies at the chosen spot, a tile-range phase; the output's location is
fixed at root so it starts directly in its tile phase.  Tiling applies to
funcs computed at root level whose region admits at least one
multiple-of-four range; everything else skips the tile phase (inlined
funcs have no loops of their own, and nested placements take their loop
structure from the enclosing tile).
"""

from __future__ import annotations

from dataclasses import dataclass

from .costmodel import (
    CostEstimate,
    MachineParams,
    estimate,
    rank_compute_locations,
    rank_tile_suggestions,
    tile_range_candidates,
)
from .ir import Pipeline, PipelineError, inverse_topological_order
from .lowering import (
    LocationOption,
    apply_compute_location,
    apply_tile_range,
    lower,
    format_schedule_script,
    tile_extent,
)
from .schedule import Schedule, TilingNotApplicableError, default_schedule

PHASE_COMPUTE = "compute_location"
PHASE_TILE = "tile_range"
PHASE_DONE = "done"

TEMPLATE_TILE = "Choose or type the tile range of Func {name}."
TEMPLATE_COMPUTE = "Choose the compute location of Func {name}."
TEMPLATE_DONE = "Done!"


class GuideError(PipelineError):
    pass


class StaleOptionError(GuideError):
    pass


class EmptyHistoryError(GuideError):
    pass


@dataclass(frozen=True)
class Instruction:
    text: str
    highlighted_func: str | None
    current_cost: CostEstimate


@dataclass(frozen=True)
class GuideOption:
    option_id: str
    description: str
    cost: CostEstimate
    location: LocationOption | None = None
    ranges: tuple[int, int] | None = None


@dataclass(frozen=True)
class _Snapshot:
    cursor: int
    phase: str
    schedule: Schedule
    options: tuple[GuideOption, ...]
    seq: int


class GuidedSession:
    """Single-writer state machine over one pipeline; mutations must be
    externally serialized, reads are safe between them."""

    def __init__(self, pipeline: Pipeline, machine: MachineParams | None = None):
        self.pipeline = pipeline
        self.machine = machine or MachineParams()
        self.order = inverse_topological_order(pipeline)
        self.schedule = default_schedule(pipeline)
        self.cursor = 0
        self.phase = PHASE_TILE
        self.seq = 0
        self.history: list[_Snapshot] = []
        self.log: list[dict] = []
        self.options: tuple[GuideOption, ...] = ()
        if not self._tiling_applicable(self.order[0]):
            self._advance_to_next_func()
        self._refresh_options()

    # -- phase machinery -----------------------------------------------------

    @property
    def done(self) -> bool:
        return self.phase == PHASE_DONE

    @property
    def current_func(self) -> str | None:
        return None if self.done else self.order[self.cursor]

    def _tiling_applicable(self, func: str) -> bool:
        d = self.schedule.decision(func)
        if d.inline or not d.position.is_root:
            return False
        nest = lower(self.pipeline, self.schedule, self.machine.vector_width)
        fi = nest.info[func]
        parent = tuple(fi.nominal_inst(x) for x in fi.dims if x in ("x", "y"))
        try:
            tile_range_candidates(parent)
        except TilingNotApplicableError:
            return False
        return True

    def _advance_to_next_func(self) -> None:
        self.cursor += 1
        if self.cursor >= len(self.order):
            self.phase = PHASE_DONE
        else:
            self.phase = PHASE_COMPUTE

    def _after_decision(self) -> None:
        if self.phase == PHASE_COMPUTE and self._tiling_applicable(self.current_func):
            self.phase = PHASE_TILE
        else:
            self._advance_to_next_func()

    def _refresh_options(self) -> None:
        if self.done:
            self.options = ()
            return
        func = self.current_func
        opts: list[GuideOption] = []
        if self.phase == PHASE_COMPUTE:
            for i, (loc, cost) in enumerate(
                rank_compute_locations(self.pipeline, self.schedule, func, self.machine)
            ):
                oid = f"s{self.seq}:loc:" + (
                    "inline" if loc.inline
                    else "root" if loc.position.is_root
                    else f"{'/'.join(loc.position.path)}@{loc.position.index}"
                )
                opts.append(GuideOption(oid, loc.label, cost, location=loc))
        else:
            nest = lower(self.pipeline, self.schedule, self.machine.vector_width)
            fi = nest.info[func]
            for (rx, ry), cost in rank_tile_suggestions(
                self.pipeline, self.schedule, func, self.machine
            ):
                tw = tile_extent(fi.nominal_inst("x"), rx)
                th = tile_extent(fi.nominal_inst("y"), ry) if "y" in fi.dims else 1
                desc = f"x{rx}, y{ry} (tile {tw}x{th})"
                opts.append(
                    GuideOption(f"s{self.seq}:tile:{rx}x{ry}", desc, cost, ranges=(rx, ry))
                )
        self.options = tuple(opts)

    def _push_history(self) -> None:
        self.history.append(
            _Snapshot(self.cursor, self.phase, self.schedule, self.options, self.seq)
        )

    # -- public API ------------------------------------------------------------

    def current_instruction(self) -> Instruction:
        cost = estimate(self.pipeline, self.schedule, self.machine)
        if self.done:
            return Instruction(TEMPLATE_DONE, None, cost)
        name = self.current_func
        template = TEMPLATE_TILE if self.phase == PHASE_TILE else TEMPLATE_COMPUTE
        return Instruction(template.format(name=name), name, cost)

    def list_options(self) -> tuple[GuideOption, ...]:
        if self.done:
            raise GuideError("session is done; no options to list")
        return self.options

    def choose(self, option_id: str) -> None:
        if self.done:
            raise GuideError("session is done")
        chosen = next((o for o in self.options if o.option_id == option_id), None)
        if chosen is None:
            raise StaleOptionError(f"option {option_id!r} is stale or unknown")
        self._push_history()
        func = self.current_func
        if chosen.location is not None:
            self.schedule = apply_compute_location(
                self.pipeline, self.schedule, func, chosen.location
            )
        else:
            rx, ry = chosen.ranges
            self.schedule = apply_tile_range(self.pipeline, self.schedule, func, rx, ry)
        self.seq += 1
        self._after_decision()
        self._refresh_options()
        self.log.append({"op": "choose", "option_id": option_id})

    def custom_tile(self, range_x: int, range_y: int) -> None:
        if self.phase != PHASE_TILE:
            raise GuideError("not in a tile-range phase")
        func = self.current_func
        new_schedule = apply_tile_range(
            self.pipeline, self.schedule, func, range_x, range_y
        )
        self._push_history()
        self.schedule = new_schedule
        self.seq += 1
        self._after_decision()
        self._refresh_options()
        self.log.append({"op": "tile", "range_x": range_x, "range_y": range_y})

    def undo(self) -> None:
        if not self.history:
            raise EmptyHistoryError("nothing to undo")
        snap = self.history.pop()
        self.cursor = snap.cursor
        self.phase = snap.phase
        self.schedule = snap.schedule
        self.options = snap.options
        self.seq = snap.seq
        self.log.append({"op": "undo"})

    def reset(self) -> None:
        while self.history:
            self.undo()

    def export_schedule(self) -> str:
        return format_schedule_script(self.pipeline, self.schedule)

    @classmethod
    def replay(
        cls,
        pipeline: Pipeline,
        events: list[dict],
        machine: MachineParams | None = None,
    ) -> "GuidedSession":
        sess = cls(pipeline, machine)
        for ev in events:
            if ev["op"] == "choose":
                sess.choose(ev["option_id"])
            elif ev["op"] == "tile":
                sess.custom_tile(ev["range_x"], ev["range_y"])
            elif ev["op"] == "undo":
                sess.undo()
            else:
                raise GuideError(f"unknown replay op {ev['op']!r}")
        return sess


def start_session(
    pipeline: Pipeline, machine: MachineParams | None = None
) -> GuidedSession:
    return GuidedSession(pipeline, machine)
