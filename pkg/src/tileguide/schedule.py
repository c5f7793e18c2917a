"""Schedule values: per-func compute-location and tile-split decisions.

Schedules are persistent values; every edit returns a new Schedule, which
makes history and undo in the guided session trivial.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ir import FuncKind, Pipeline, PipelineError


class ScheduleError(PipelineError):
    pass


class InvalidPositionError(ScheduleError):
    pass


class ConsumerNotScheduledError(ScheduleError):
    pass


class RangeError(ScheduleError):
    pass


class TilingNotApplicableError(ScheduleError):
    pass


@dataclass(frozen=True)
class Position:
    """A loop-nest insertion point: block-id path from root plus body slot.

    ``index=None`` means the canonical slot, immediately before the earliest
    subtree that uses the func (always the case at root).
    """

    path: tuple[str, ...] = ()
    index: int | None = None

    @property
    def is_root(self) -> bool:
        return not self.path

    def __str__(self) -> str:
        if self.is_root:
            return "root"
        return f"{'/'.join(self.path)} slot {self.index}"


ROOT = Position()


@dataclass(frozen=True)
class TileSplit:
    range_x: int
    range_y: int = 1


@dataclass(frozen=True)
class Decision:
    inline: bool
    position: Position | None = None
    split: TileSplit | None = None

    @staticmethod
    def at(position: Position, split: TileSplit | None = None) -> "Decision":
        return Decision(False, position, split)


INLINE = Decision(inline=True)


@dataclass(frozen=True)
class Schedule:
    decisions: dict[str, Decision] = field(default_factory=dict)

    def decision(self, func: str) -> Decision:
        """Decision for a func; funcs without one default to inline."""
        return self.decisions.get(func, INLINE)

    def with_decision(self, func: str, d: Decision) -> "Schedule":
        new = dict(self.decisions)
        new[func] = d
        return Schedule(new)

    def is_materialized(self, func: str) -> bool:
        return not self.decision(func).inline


@dataclass(frozen=True)
class LocationOption:
    """One valid compute location: a Position, or inline when position is None."""

    position: Position | None
    label: str

    @property
    def inline(self) -> bool:
        return self.position is None


def default_schedule(p: Pipeline) -> Schedule:
    """Output materialized at root, everything else inlined into its users."""
    decisions: dict[str, Decision] = {}
    for f in p.funcs.values():
        if f.kind is FuncKind.INPUT:
            continue
        decisions[f.name] = Decision.at(ROOT) if f.name == p.output else INLINE
    return Schedule(decisions)


def validate_schedule(p: Pipeline, s: Schedule) -> None:
    """Structural checks that do not require lowering."""
    for name, d in s.decisions.items():
        f = p.funcs.get(name)
        if f is None:
            raise ScheduleError(f"decision for undeclared func '{name}'")
        if f.kind is FuncKind.INPUT:
            raise ScheduleError(f"input '{name}' cannot carry a schedule decision")
        if name == p.output and (d.inline or not d.position.is_root):
            raise ScheduleError(f"output '{name}' must be computed at root")
        if d.inline and d.split is not None:
            raise ScheduleError(f"inline func '{name}' cannot have a tile split")
        if d.split is not None:
            if d.split.range_x < 1 or d.split.range_y < 1:
                raise RangeError(f"tile ranges for '{name}' must be >= 1")
            if len(f.dims) < 2 and d.split.range_y != 1:
                raise RangeError(f"1-D func '{name}' cannot tile y")
