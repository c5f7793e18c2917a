"""Guided schedule optimization for stencil image-processing pipelines."""

from .ir import Pipeline, PipelineError, footprint, inverse_topological_order, ops_per_point
from .parser import format_pipeline, parse_pipeline
from .schedule import Schedule, default_schedule
from .lowering import (
    apply_compute_location,
    apply_tile_range,
    lower,
    parse_schedule_script,
    format_schedule_script,
    pretty_print,
    tile_extent,
    valid_compute_locations,
    view_model,
)

__version__ = "0.1.0"

__all__ = [
    "Pipeline",
    "PipelineError",
    "Schedule",
    "apply_compute_location",
    "apply_tile_range",
    "default_schedule",
    "footprint",
    "format_pipeline",
    "format_schedule_script",
    "inverse_topological_order",
    "lower",
    "ops_per_point",
    "parse_pipeline",
    "parse_schedule_script",
    "pretty_print",
    "tile_extent",
    "valid_compute_locations",
    "view_model",
]
