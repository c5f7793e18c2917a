from __future__ import annotations

import random
from importlib.resources import files

import numpy as np
import pytest

from tileguide.costmodel import MachineParams
from tileguide.ir import Pipeline, inverse_topological_order
from tileguide.lowering import (
    apply_compute_location,
    apply_tile_range,
    lower,
    valid_compute_locations,
)
from tileguide.parser import parse_pipeline
from tileguide.schedule import Schedule, default_schedule


def corpus_source(name: str) -> str:
    return files("tileguide").joinpath(f"data/{name}").read_text()


@pytest.fixture(scope="session")
def gaussian() -> Pipeline:
    return parse_pipeline(corpus_source("gaussian.pipe"))


@pytest.fixture(scope="session")
def unsharp() -> Pipeline:
    return parse_pipeline(corpus_source("unsharp.pipe"))


@pytest.fixture(scope="session")
def machine() -> MachineParams:
    return MachineParams()


# ---------------------------------------------------------------------------
# Random pipelines and schedules for property tests
# ---------------------------------------------------------------------------


def random_pipeline_source(rng: random.Random, max_extent: int = 16) -> str:
    """A small random stencil pipeline: clamped input, a constant-indexed
    1-D lut, and a chain of stencil funcs feeding the output."""
    w = rng.randrange(6, max_extent + 1)
    h = rng.randrange(6, max_extent + 1)
    lines = [
        "pipeline randpipe",
        f"param gain = {rng.uniform(0.5, 1.5):.3f}",
        f"input src(x, y) : {w}x{h}",
        "func lut(x) = 0.5 + 0.25*x",
        "func edge = clamp_edge(src)",
    ]
    n_funcs = rng.randrange(2, 4)
    names = [f"f{i}" for i in range(n_funcs)]
    producers = ["edge"]
    lut_used = False
    for i, name in enumerate(names):
        terms = []
        n_taps = rng.randrange(1, 4)
        for t in range(n_taps):
            # always consume the previous stage so every func stays live
            src = producers[-1] if t == 0 else rng.choice(producers)
            dx, dy = rng.randrange(-2, 3), rng.randrange(-2, 3)
            def fmt(v, d):
                if d == 0:
                    return v
                return f"{v} + {d}" if d > 0 else f"{v} - {-d}"
            use_lut = i == len(names) - 1 and not lut_used or rng.random() < 0.4
            coeff = rng.choice(["lut(0)", "lut(1)", "lut(2)"]) if use_lut else (
                rng.choice(["0.25", "0.5", "gain"])
            )
            lut_used = lut_used or use_lut
            terms.append(f"{coeff}*{src}({fmt('x', dx)}, {fmt('y', dy)})")
        expr = " + ".join(terms)
        if rng.random() < 0.3:
            expr = f"sqrt({expr} + 2)"
        lines.append(f"func {name}(x, y) = {expr}")
        producers.append(name)
    lines.append(f"output {names[-1]} : {w}x{h}")
    return "\n".join(lines) + "\n"


def random_schedule(p: Pipeline, rng: random.Random, max_range: int = 8) -> Schedule:
    """A random valid schedule reached through the public editing ops.

    Per-point placements are only drawn for funcs whose expansion stays
    small, which keeps a 200-schedule corpus executable in seconds while
    still covering every placement kind.
    """
    s = default_schedule(p)
    order = inverse_topological_order(p)

    def maybe_tile(func: str) -> None:
        nonlocal s
        if rng.random() >= 0.5:
            return
        fi = lower(p, s).info[func]
        rx = rng.randrange(1, min(fi.nominal_inst("x"), max_range) + 1)
        ry = 1
        if "y" in fi.dims:
            ry = rng.randrange(1, min(fi.nominal_inst("y"), max_range) + 1)
        s = apply_tile_range(p, s, func, rx, ry)

    maybe_tile(order[0])
    for func in order[1:]:
        options = valid_compute_locations(p, s, func)
        trial = apply_compute_location(p, s, func, options[1])
        expansion_size = lower(p, trial).expansions[func].bin_count

        def weight(o) -> float:
            if o.inline:
                return 3.0
            pos = o.position
            if pos.is_root:
                return 2.0
            if pos.path[-1].endswith(".inner"):
                return 0.4 if expansion_size <= 48 else 0.0
            return 1.5

        weights = [weight(o) for o in options]
        choice = rng.choices(options, weights)[0]
        s = apply_compute_location(p, s, func, choice)
        if not choice.inline:
            maybe_tile(func)
    return s
