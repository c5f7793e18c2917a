import itertools
import random

import pytest

from tileguide.ir import (
    NoDirectDependencyError,
    PipelineError,
    UnknownIdentifierError,
    dependency_graph_view,
    footprint,
    inverse_topological_order,
    ops_per_point,
)
from tileguide.parser import parse_pipeline

from conftest import random_pipeline_source


def all_inverse_topological_orders(p):
    """Brute-force oracle: every permutation of the schedulable funcs in
    which each consumer precedes all of its producers."""
    declared = p.declared
    consumers = {f: set(p.consumers(f)) & set(declared) for f in declared}
    valid = []
    for perm in itertools.permutations(declared):
        pos = {f: i for i, f in enumerate(perm)}
        if all(all(pos[c] < pos[f] for c in consumers[f]) for f in declared):
            valid.append(list(perm))
    return valid


def test_gaussian_order_is_valid_and_tiebroken(gaussian):
    order = inverse_topological_order(gaussian)
    assert order == ["blur", "blur_y", "bounded", "kernel"]
    assert order in all_inverse_topological_orders(gaussian)


def test_unsharp_order(unsharp):
    assert inverse_topological_order(unsharp) == [
        "unsharp", "ratio", "sharpen", "blur", "blur_y", "gray", "bounded", "kernel",
    ]


def test_single_func_order():
    p = parse_pipeline("pipeline p\nfunc f(x, y) = 1\noutput f : 4x4\n")
    assert inverse_topological_order(p) == ["f"]


def test_random_orders_are_valid():
    rng = random.Random(3)
    for _ in range(20):
        p = parse_pipeline(random_pipeline_source(rng))
        order = inverse_topological_order(p)
        assert order in all_inverse_topological_orders(p)
        assert order[0] == p.output


def test_footprint_examples(gaussian):
    fp = footprint(gaussian, "blur", "blur_y")
    assert fp.interval("x") == (-3, 3)
    assert fp.interval("y") == (0, 0)
    fp = footprint(gaussian, "blur_y", "bounded")
    assert fp.interval("x") == (0, 0)
    assert fp.interval("y") == (-3, 3)


def test_footprint_identity_access():
    p = parse_pipeline(
        "pipeline p\n"
        "func g(x, y) = 2\n"
        "func f(x, y) = g(x, y)\n"
        "output f : 4x4\n"
    )
    fp = footprint(p, "f", "g")
    assert fp.interval("x") == (0, 0) and fp.interval("y") == (0, 0)


def test_footprint_constant_access(gaussian):
    fp = footprint(gaussian, "blur", "kernel")
    assert fp.per_dim[0].rel is None
    assert fp.per_dim[0].abs == (0, 3)


def test_footprint_no_direct_dependency(gaussian):
    with pytest.raises(NoDirectDependencyError):
        footprint(gaussian, "blur", "bounded")


def test_ops_per_point(gaussian):
    p = parse_pipeline(
        "pipeline p\n"
        "func a(x, y) = 3\n"
        "func g(x, y) = a(x, y)\n"
        "func h(x, y) = a(x, y) + g(x, y)\n"
        "output h : 4x4\n"
    )
    assert ops_per_point(p.funcs["g"]) == 0
    assert ops_per_point(p.funcs["h"]) == 1
    assert ops_per_point(gaussian.funcs["blur"]) == 10  # 4 mul + 6 add


def test_ops_per_point_counts_ast_nodes(gaussian):
    # independent oracle: walk the AST counting operators and intrinsics
    from tileguide.ir import BinOp, Call, walk_expr

    for func in ("kernel", "blur_y", "blur"):
        f = gaussian.funcs[func]
        expected = sum(
            1 if isinstance(n, BinOp) else 10 if isinstance(n, Call) else 0
            for n in walk_expr(f.expr)
        )
        assert ops_per_point(f) == expected


def test_ops_per_point_requires_computed(gaussian):
    with pytest.raises(PipelineError):
        ops_per_point(gaussian.funcs["input"])


def test_dependency_graph_gaussian(gaussian):
    g = dependency_graph_view(gaussian, highlighted="blur_y")
    edges = {(e["src"], e["dst"]) for e in g["edges"]}
    assert edges == {
        ("input", "bounded"),
        ("bounded", "blur_y"),
        ("kernel", "blur_y"),
        ("kernel", "blur"),
        ("blur_y", "blur"),
    }
    flags = [n["name"] for n in g["nodes"] if n["highlighted"]]
    assert flags == ["blur_y"]


def test_dependency_graph_no_highlight(gaussian):
    g = dependency_graph_view(gaussian)
    assert not any(n["highlighted"] for n in g["nodes"])


def test_dependency_graph_unsharp_ratio(unsharp):
    g = dependency_graph_view(unsharp, highlighted="ratio")
    assert [n["name"] for n in g["nodes"] if n["highlighted"]] == ["ratio"]


def test_dependency_graph_unknown_highlight(gaussian):
    with pytest.raises(UnknownIdentifierError):
        dependency_graph_view(gaussian, highlighted="nope")


def test_with_extent(unsharp):
    small = unsharp.with_extent((64, 64, 3))
    assert small.output_extent == (64, 64, 3)
    assert small.funcs["input"].extent == (64, 64, 3)
