import json

import pytest

from conftest import LINE4_NODES, LINE4_RELATIVES, line4_snapshot, space_of, uniform
from nettree.construct import build, insert_point
from nettree.metric import MetricSpace
from nettree.tree_core import NEG_INF, NetTree, Params, new_tree, split_jump
from nettree.validate import (GLOBAL_CAP, brute_force_nn, check_centers, check_global, check_local,
                              check_nets, size_stats, validate_all)

P = Params.for_construction()


@pytest.fixture
def built():
    return build(space_of(uniform(150, 2, 8)), P, seed=4)


def _nid(t, key):
    return t.engine.find(*key)


def test_clean_tree_passes(built):
    rep = validate_all(built, "all", oracle=True)
    assert rep.passed, rep.failures()
    assert set(rep.names()) >= {"structure", "local_packing", "local_covering", "local_parent",
                                "semi_compression", "relative_symmetry", "global_covering",
                                "global_packing", "net_packing", "net_covering"}
    doc = json.loads(rep.to_json())
    assert doc["passed"] is True


def test_broken_covering_edge(built):
    t = built
    finite = [k for k in t.node_keys() if abs(k.level) < 10**6]
    k = min(finite, key=lambda k: k.level)
    # a higher node whose covering ball misses k's point
    far = next(f for f in finite
               if f.level > k.level and f.point != k.point
               and t.space.distance(f.point, k.point) > P.cc * P.tau ** f.level)
    t.engine.set_parent(_nid(t, k), _nid(t, far))
    rep = check_local(t)
    assert not rep["local_covering"].passed
    assert rep["nesting"].passed


def test_asymmetric_relative(line4_tree):
    t = line4_tree
    t.engine.add_relative(_nid(t, (0, 1)), _nid(t, (0, 0)))
    rep = check_local(t)
    assert not rep["relative_symmetry"].passed
    assert not rep["relative_level"].passed
    assert rep["local_packing"].passed


def test_relative_too_far(line4_tree):
    t = line4_tree
    t.engine.link(_nid(t, (0, 0)), _nid(t, (2, 3)))
    rep = check_local(t)
    assert not rep["relative_level"].passed


def test_missing_relative_found_by_oracle():
    rel = [r for r in LINE4_RELATIVES if r != ((0, 0), (1, 0))]
    t = NetTree.from_json(line4_snapshot(LINE4_NODES, rel))
    assert not check_local(t, oracle=True)["relative_completeness"].passed


def test_compression_violation(built):
    t = built
    p = t.root.point
    top = t.level_range(p)[1]
    split_jump(t, p, top + 1)
    rep = check_local(t)
    assert not rep["semi_compression"].passed


def test_packing_violation():
    # two points 1 apart, both claiming level 2 of NT(6,1,1)
    sp = MetricSpace([[0.0], [1.0]])
    t = new_tree(P, sp, 0)
    e = t.engine
    root, leaf0 = e.root, e.find(0, NEG_INF)
    a, b = e.new_node(0, 2), e.new_node(1, 2)
    lf1 = e.new_node(1, NEG_INF)
    e.set_parent(a, root)
    e.set_parent(b, root)
    e.set_parent(leaf0, a)
    e.set_parent(lf1, b)
    e.link(a, b)
    e.mark_inserted(1)
    rep = check_local(t)
    assert not rep["local_packing"].passed
    assert not check_nets(t)["net_packing"].passed


def test_wrong_ring_and_stale_center():
    sp = space_of(uniform(60, 2, 3))
    t = new_tree(P, sp, 0)
    for p in range(1, 20):
        insert_point(t, p)
    assert check_centers(t).passed
    x = t.uninserted[0]
    c = t.center_of(x)
    e = t.engine
    ring = 0 if t.ring_of(x) == "outer" else 1
    e.set_center(x, _nid(t, c), ring)
    rep = check_centers(t)
    assert rep["centers"].passed and not rep["rings"].passed
    e.set_center(x, e.root, 1)
    rep = check_centers(t)
    assert not rep["centers"].passed


def test_global_cap(built):
    big = build(space_of(uniform(GLOBAL_CAP + 1, 1, 0)), P)
    with pytest.raises(ValueError):
        check_global(big)
    assert check_global(big, force=True).passed
    assert check_global(built).passed


def test_brute_force_nn_tie():
    sp = MetricSpace([[1.0], [-1.0], [5.0]])
    assert brute_force_nn(sp, [0, 1, 2], [0.0]) == (0, 1.0)
    assert brute_force_nn(sp, [2, 1], [0.0]) == (1, 1.0)
    with pytest.raises(ValueError):
        brute_force_nn(sp, [], [0.0])


def test_size_stats(line4_tree):
    s = size_stats(line4_tree)
    assert s["nodes"] == 16 and s["compressed_nodes"] == 13
    assert s["relative_edges"] == 6
    assert s["per_point_node_counts"] == [8, 2, 3, 3]
    assert s["max_relatives"] == 2
