import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tileguide.lowering import (
    LoweringError,
    apply_compute_location,
    apply_tile_range,
    build_blocks,
    class_total_extent,
    func_color,
    iter_tiles,
    lower,
    pointify_classes,
    pretty_print,
    split_classes,
    tile_extent,
    valid_compute_locations,
    view_model,
)
from tileguide.parser import parse_pipeline
from tileguide.schedule import RangeError, default_schedule

from conftest import random_schedule


# -- tile arithmetic ---------------------------------------------------------


def test_tile_extent_worked_examples():
    assert tile_extent(2560, 4) == 640
    assert tile_extent(1600, 52) == 31
    assert tile_extent(640, 20) == 32
    assert tile_extent(31, 31) == 1


def test_tile_extent_trivial():
    for n in (1, 7, 256):
        assert tile_extent(n, 1) == n
        assert tile_extent(n, n) == 1


def test_tile_extent_bounds():
    with pytest.raises(RangeError):
        tile_extent(8, 0)
    with pytest.raises(RangeError):
        tile_extent(8, 9)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 4096), st.data())
def test_tile_coverage(extent, data):
    rng = data.draw(st.integers(1, extent))
    tiles = iter_tiles(0, extent, rng)
    assert sum(e for _, e in tiles) == extent
    assert len(tiles) <= rng
    assert all(e >= 1 for _, e in tiles)
    # contiguous, in order
    pos = 0
    for lo, e in tiles:
        assert lo == pos
        pos += e


def test_1600_by_52_last_tile():
    tiles = iter_tiles(0, 1600, 52)
    assert tiles[0][1] == 31 and tiles[-1][1] == 19
    assert len(tiles) == 52


# -- dim class machinery ------------------------------------------------------


def brute_force_split(boxes, rng):
    out = []
    for lo, e in boxes:
        out.extend(iter_tiles(lo, e, rng))
    return sorted(out)


def classes_to_boxes(classes):
    boxes = []
    for lo, s, n, e, m in classes:
        for i in range(n):
            boxes.extend([(lo + i * s, e)] * m)
    return sorted(boxes)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 200), st.data())
def test_split_classes_matches_brute_force(extent, data):
    rng = data.draw(st.integers(1, extent))
    classes = [(5, 0, 1, extent, 1)]
    got = classes_to_boxes(split_classes(classes, rng))
    want = sorted(brute_force_split([(5, extent)], rng))
    assert got == want


def test_split_classes_nested():
    first = split_classes([(0, 0, 1, 2560, 1)], 4)
    second = split_classes(first, 20)
    assert class_total_extent(second) == 2560
    boxes = classes_to_boxes(second)
    assert len(boxes) == 80 and all(e == 32 for _, e in boxes)


def test_pointify():
    classes = split_classes([(0, 0, 1, 10, 1)], 3)  # tiles 4,4,2
    pts = pointify_classes(classes)
    assert class_total_extent(pts) == 10
    assert all(e == 1 for _, _, _, e, _ in pts)


# -- lowering ------------------------------------------------------------------


def test_default_gaussian_listing(gaussian):
    nest = lower(gaussian, default_schedule(gaussian))
    assert pretty_print(nest) == (
        "for x in 0..255\n"
        "  for y in 0..255\n"
        "    blur(x, y) = ...\n"
    )
    assert len(nest.root_items) == 1


def test_blur_y_at_root_region(gaussian):
    s = default_schedule(gaussian)
    opts = valid_compute_locations(gaussian, s, "blur_y")
    s = apply_compute_location(gaussian, s, "blur_y", opts[1])
    nest = lower(gaussian, s)
    fi = nest.info["blur_y"]
    assert fi.region() == {"x": (-3, 258), "y": (0, 255)}
    assert fi.points == 262 * 256 == 67072


def test_two_pass_tiled_listing_shape(gaussian):
    s = apply_tile_range(gaussian, default_schedule(gaussian), "blur", 32, 16)
    opts = valid_compute_locations(gaussian, s, "blur_y")
    per_tile = next(
        o for o in opts
        if o.position is not None and o.position.path == ("blur.outer",)
    )
    s = apply_compute_location(gaussian, s, "blur_y", per_tile)
    nest = lower(gaussian, s)
    assert pretty_print(nest) == (
        "for x_outer in 0..31\n"
        "  for y_outer in 0..15\n"
        "    for x in 0..13\n"
        "      for y in 0..15\n"
        "        blur_y(x, y) = ...\n"
        "    for x_inner in 0..7\n"
        "      for y_inner in 0..15\n"
        "        blur(x, y) = ...\n"
    )
    assert nest.info["blur_y"].points == 114688


def test_lowering_determinism(gaussian):
    rng = random.Random(11)
    for _ in range(5):
        s = random_schedule(gaussian.with_extent((32, 32)), rng)
        p = gaussian.with_extent((32, 32))
        a, b = lower(p, s), lower(p, s)
        assert pretty_print(a) == pretty_print(b)
        assert {f: i.points for f, i in a.info.items()} == {
            f: i.points for f, i in b.info.items()
        }


def test_unsplit_consumer_offers_only_inline_and_root():
    p = parse_pipeline(
        "pipeline p\n"
        "func g(x, y) = 1\n"
        "func f(x, y) = g(x, y)\n"
        "output f : 16x16\n"
    )
    opts = valid_compute_locations(p, default_schedule(p), "g")
    assert [o.inline for o in opts] == [True, False]
    assert opts[1].position.is_root


def test_split_consumer_offers_four_locations(gaussian):
    s = apply_tile_range(gaussian, default_schedule(gaussian), "blur", 32, 16)
    opts = valid_compute_locations(gaussian, s, "blur_y")
    assert len(opts) == 4
    paths = [None if o.inline else o.position.path for o in opts]
    assert paths == [None, (), ("blur.outer",), ("blur.outer", "blur.inner")]


def test_kernel_location_is_lca_of_uses(gaussian):
    # blur tiled, blur_y per tile: kernel is used by both blur_y (outer body)
    # and blur (inner); the deepest common block is blur.outer.
    s = apply_tile_range(gaussian, default_schedule(gaussian), "blur", 32, 16)
    opts = valid_compute_locations(gaussian, s, "blur_y")
    s = apply_compute_location(gaussian, s, "blur_y", opts[2])
    kopts = valid_compute_locations(gaussian, s, "kernel")
    deepest = kopts[-1].position
    assert deepest.path == ("blur.outer",)


def test_position_prefixes_resolve(gaussian):
    from tileguide.lowering import _resolve_body

    s = apply_tile_range(gaussian, default_schedule(gaussian), "blur", 32, 16)
    nest = lower(gaussian, s)
    for o in valid_compute_locations(gaussian, s, "blur_y"):
        if o.inline:
            continue
        path = o.position.path
        for i in range(len(path) + 1):
            _resolve_body(nest.root_items, path[:i])  # must not raise


def test_unclamped_out_of_range_read_is_lowering_error():
    src = (
        "pipeline p\n"
        "input src(x, y) : 8x8\n"
        "func f(x, y) = src(x - 1, y)\n"
        "output f : 8x8\n"
    )
    p = parse_pipeline(src)
    with pytest.raises(LoweringError, match="clamp_edge"):
        lower(p, default_schedule(p))


def test_apply_tile_range_bounds(gaussian):
    s = default_schedule(gaussian)
    with pytest.raises(RangeError):
        apply_tile_range(gaussian, s, "blur", 0, 4)
    with pytest.raises(RangeError):
        apply_tile_range(gaussian, s, "blur", 257, 1)
    with pytest.raises(RangeError):
        apply_tile_range(gaussian, s, "blur_y", 4, 4)  # inlined


def test_apply_tile_range_1d_forces_y(gaussian):
    s = default_schedule(gaussian)
    opts = valid_compute_locations(gaussian, s, "kernel")
    s = apply_compute_location(gaussian, s, "kernel", opts[1])
    s = apply_tile_range(gaussian, s, "kernel", 2, 999)
    assert s.decision("kernel").split.range_y == 1


# -- view model ----------------------------------------------------------------


def test_view_model_fig3_arithmetic(unsharp):
    s = apply_tile_range(unsharp, default_schedule(unsharp), "unsharp", 4, 52)
    opts = valid_compute_locations(unsharp, s, "ratio")
    per_tile = next(
        o for o in opts
        if o.position is not None and o.position.path == ("unsharp.outer",)
    )
    s = apply_compute_location(unsharp, s, "ratio", per_tile)
    s = apply_tile_range(unsharp, s, "ratio", 20, 31)
    viz = view_model(lower(unsharp, s), unsharp.output_extent)
    sizes = {(e.width, e.height) for e in viz}
    assert (640, 31) in sizes
    assert (32, 1) in sizes


def test_view_model_unsplit_root_is_full_image(gaussian):
    viz = view_model(lower(gaussian, default_schedule(gaussian)), (256, 256))
    assert (viz[0].width, viz[0].height) == (256, 256)


def test_view_model_colors_stable(gaussian):
    s = default_schedule(gaussian)
    a = view_model(lower(gaussian, s), (256, 256))
    b = view_model(lower(gaussian, s), (256, 256))
    assert [e.color for e in a] == [e.color for e in b]
    assert func_color(gaussian, "blur") == func_color(gaussian, "blur")


def test_markers(gaussian):
    s = apply_tile_range(gaussian, default_schedule(gaussian), "blur", 32, 16)
    blocks = build_blocks(lower(gaussian, s))
    outer = blocks[0]
    assert "parallel" in outer.markers
    inner = outer.body[-1]
    assert "vectorized" in inner.markers  # tile x extent 8 >= vector width 8
    s2 = apply_tile_range(gaussian, default_schedule(gaussian), "blur", 64, 1)
    blocks2 = build_blocks(lower(gaussian, s2))
    assert "vectorized" not in blocks2[0].body[-1].markers  # tile x extent 4


def test_view_model_one_entry_per_block(gaussian):
    s = apply_tile_range(gaussian, default_schedule(gaussian), "blur", 32, 16)
    opts = valid_compute_locations(gaussian, s, "blur_y")
    s = apply_compute_location(gaussian, s, "blur_y", opts[2])
    nest = lower(gaussian, s)

    def count_blocks(views):
        return sum(
            1 + count_blocks([b for b in v.body if isinstance(b, type(v))])
            for v in views
        )

    blocks = build_blocks(nest)
    n_blocks = count_blocks(blocks)
    assert len(view_model(nest, (256, 256))) == n_blocks == 3
