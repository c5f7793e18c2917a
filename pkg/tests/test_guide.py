import random

import pytest

from tileguide.costmodel import estimate
from tileguide.guide import (
    EmptyHistoryError,
    GuideError,
    GuidedSession,
    StaleOptionError,
    start_session,
)
from tileguide.ir import inverse_topological_order
from tileguide.lowering import lower, parse_schedule_script, pretty_print
from tileguide.parser import parse_pipeline
from tileguide.schedule import validate_schedule


def test_start_session_gaussian(gaussian):
    sess = start_session(gaussian)
    ins = sess.current_instruction()
    assert ins.text == "Choose or type the tile range of Func blur."
    assert ins.highlighted_func == "blur"
    assert sess.phase == "tile_range"
    assert len(sess.list_options()) <= 5


def test_start_session_unsharp(unsharp):
    sess = start_session(unsharp)
    assert sess.current_instruction().highlighted_func == "unsharp"


def test_single_pixel_pipeline_starts_done():
    p = parse_pipeline("pipeline p\nfunc f(x, y) = 1\noutput f : 1x1\n")
    sess = start_session(p)
    assert sess.done
    assert sess.current_instruction().text == "Done!"
    with pytest.raises(GuideError):
        sess.list_options()


def test_instruction_templates_and_done(gaussian):
    sess = start_session(gaussian)
    texts = [sess.current_instruction().text]
    while not sess.done:
        sess.choose(sess.list_options()[0].option_id)
        texts.append(sess.current_instruction().text)
    assert texts[-1] == "Done!"
    for t in texts[:-1]:
        assert t.startswith("Choose ")
    with pytest.raises(GuideError):
        sess.choose("s0:loc:root")


def test_inline_choice_skips_tile_phase(gaussian):
    sess = start_session(gaussian)
    sess.choose(sess.list_options()[0].option_id)  # blur tile
    assert sess.current_func == "blur_y"
    inline = next(o for o in sess.list_options() if o.location and o.location.inline)
    sess.choose(inline.option_id)
    # straight to the next func, no tile phase for an inlined func
    assert sess.current_func == "bounded"
    assert sess.phase == "compute_location"


def test_non_root_placement_skips_tile_phase(gaussian):
    sess = start_session(gaussian)
    sess.choose(sess.list_options()[1].option_id)
    deep = [o for o in sess.list_options() if o.location and o.location.position
            and o.location.position.path]
    sess.choose(deep[0].option_id)
    assert sess.current_func == "bounded"


def test_custom_tile_classic_ranges(gaussian):
    sess = start_session(gaussian)
    sess.custom_tile(32, 16)
    nest = lower(gaussian, sess.schedule)
    assert "for x_outer in 0..31" in pretty_print(nest)
    # degenerate accepted
    sess2 = start_session(gaussian)
    sess2.custom_tile(1, 1)
    assert sess2.current_func == "blur_y"


def test_custom_tile_rejects_bad_ranges(gaussian):
    sess = start_session(gaussian)
    from tileguide.schedule import RangeError

    with pytest.raises(RangeError):
        sess.custom_tile(0, 4)
    # session state unchanged after the failed call
    assert sess.phase == "tile_range"
    assert sess.current_func == "blur"
    with pytest.raises(GuideError):
        sess.choose(sess.list_options()[0].option_id + "zzz")


def test_undo_restores_exact_state(gaussian):
    sess = start_session(gaussian)
    before = (sess.cursor, sess.phase, sess.schedule, sess.options, sess.seq)
    sess.choose(sess.list_options()[2].option_id)
    sess.undo()
    assert (sess.cursor, sess.phase, sess.schedule, sess.options, sess.seq) == before


def test_undo_at_start_errors(gaussian):
    with pytest.raises(EmptyHistoryError):
        start_session(gaussian).undo()


def test_n_choices_n_undos(gaussian):
    sess = start_session(gaussian)
    initial = (sess.cursor, sess.phase, sess.schedule, sess.options)
    n = 0
    while not sess.done:
        sess.choose(sess.list_options()[0].option_id)
        n += 1
    for _ in range(n):
        sess.undo()
    assert (sess.cursor, sess.phase, sess.schedule, sess.options) == initial


def test_stale_option_after_undo(gaussian):
    sess = start_session(gaussian)
    sess.choose(sess.list_options()[0].option_id)
    later_option = sess.list_options()[0].option_id
    sess.undo()
    with pytest.raises(StaleOptionError):
        sess.choose(later_option)


def test_export_round_trip(gaussian):
    sess = start_session(gaussian)
    while not sess.done:
        sess.choose(sess.list_options()[min(1, len(sess.list_options()) - 1)].option_id)
    script = sess.export_schedule()
    replayed = parse_schedule_script(gaussian, script)
    assert replayed == sess.schedule
    assert estimate(gaussian, replayed) == estimate(gaussian, sess.schedule)


def test_default_export_is_root_only(gaussian):
    sess = start_session(gaussian)
    assert sess.export_schedule() == "compute blur at root\n"


def test_replay_determinism(gaussian):
    rng = random.Random(4)
    sess = start_session(gaussian)
    while not sess.done:
        if sess.phase == "tile_range" and rng.random() < 0.4:
            sess.custom_tile(rng.randrange(1, 9), rng.randrange(1, 9))
        else:
            opts = sess.list_options()
            sess.choose(opts[rng.randrange(len(opts))].option_id)
        if rng.random() < 0.2 and sess.history:
            sess.undo()
    twin = GuidedSession.replay(gaussian, sess.log)
    assert twin.schedule == sess.schedule
    assert estimate(gaussian, twin.schedule) == estimate(gaussian, sess.schedule)


def test_cost_display_consistency(gaussian):
    sess = start_session(gaussian)
    while not sess.done:
        ins = sess.current_instruction()
        fresh = estimate(sess.pipeline, sess.schedule, sess.machine)
        assert ins.current_cost == fresh
        sess.choose(sess.list_options()[0].option_id)


def test_highlight_order_matches_inverse_topo(gaussian, unsharp):
    for p in (gaussian, unsharp.with_extent((64, 64, 3))):
        sess = start_session(p)
        seen = []
        while not sess.done:
            f = sess.current_instruction().highlighted_func
            if not seen or seen[-1] != f:
                seen.append(f)
            sess.choose(sess.list_options()[0].option_id)
        assert seen == inverse_topological_order(p)


def test_fuzz_sessions_stay_valid(gaussian):
    rng = random.Random(99)
    p = gaussian.with_extent((32, 32))
    for _ in range(10):
        sess = start_session(p)
        for _ in range(30):
            if sess.done:
                break
            roll = rng.random()
            try:
                if roll < 0.15 and sess.history:
                    sess.undo()
                elif roll < 0.3 and sess.phase == "tile_range":
                    sess.custom_tile(rng.randrange(-2, 40), rng.randrange(-2, 40))
                else:
                    opts = sess.list_options()
                    sess.choose(opts[rng.randrange(len(opts))].option_id)
            except (GuideError, Exception):
                pass
            validate_schedule(p, sess.schedule)
            lower(p, sess.schedule)  # must stay lowerable
