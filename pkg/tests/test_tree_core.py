import json
import math

import pytest

from conftest import LINE4_NODES, LINE4_RELATIVES, line4_snapshot, space_of, uniform
from nettree.construct import build
from nettree.errors import InputError, ParameterError, StateError
from nettree.metric import MetricSpace
from nettree.tree_core import (NEG_INF, POS_INF, NetTree, NodeKey, Params, new_tree, radius,
                               split_jump, to_compressed, try_remove_node, uncompressed_size)
from nettree.validate import check_local, validate_all


def test_default_params():
    p = Params.for_construction()
    assert (p.tau, p.cp, p.cc, p.cr) == (6.0, 1.0, 1.0, 6.0)
    assert p.ann_factor == pytest.approx(7.5)
    assert p.global_constants == pytest.approx((0.3, 1.2))


@pytest.mark.parametrize("kw, needle", [
    (dict(tau=4), "tau must be at least 5"),
    (dict(cc=3), "cc must be below"),
    (dict(cp=1, cc=0.5), "cc must be at least cp"),
    (dict(tau=5, cc=1.6), "2\\*cc/cp \\+ 2"),
    (dict(tau=float("nan")), "finite"),
])
def test_construction_params_rejected(kw, needle):
    with pytest.raises(ParameterError, match=needle):
        Params.for_construction(**kw)


def test_validation_params_are_lenient():
    p = Params.for_validation(2, 1, 1, 4)
    assert p.validation_only
    with pytest.raises(ParameterError):
        Params.for_validation(1, 1, 1, 1)
    with pytest.raises(ParameterError):
        new_tree(p, MetricSpace([[0.0]]), 0)


def test_radius():
    p = Params.for_construction()
    assert radius(p, 2, 1.0) == 36.0
    assert radius(p, -1, p.cr) == 1.0
    assert radius(p, NEG_INF, 5.0) == 0.0
    assert radius(p, POS_INF, 5.0) == math.inf


def test_node_key_str():
    assert str(NodeKey(3, 4)) == "3^4"
    assert str(NodeKey(0, POS_INF)) == "0^+inf"
    assert str(NodeKey(1, NEG_INF)) == "1^-inf"


def test_new_tree():
    sp = MetricSpace([[0.0], [5.0]])
    t = new_tree(Params.for_construction(), sp, 1)
    assert t.root == NodeKey(1, POS_INF)
    assert t.leaf_of(1) == NodeKey(1, NEG_INF)
    assert t.parent(NodeKey(1, NEG_INF)) == t.root
    assert t.inserted == [1] and t.uninserted == [0]
    assert t.center_of(0) == t.root
    with pytest.raises(StateError):
        new_tree(Params.for_construction(), MetricSpace([], 1), 0)


class TestLine4:
    def test_counts(self, line4_tree):
        assert len(line4_tree) == 16
        assert to_compressed(line4_tree) == 13
        assert uncompressed_size(line4_tree) == 21

    def test_structure(self, line4_tree):
        t = line4_tree
        assert t.root == NodeKey(0, POS_INF)
        assert t.parent((3, 4)) == (0, 5)
        assert t.parent((2, 3)) == (0, 4)
        assert t.parent((1, 0)) == (0, 1)
        assert sorted(t.relatives((0, 3))) == [(2, 3), (3, 3)]
        assert t.relatives((0, 1)) == []
        assert t.level_range(2) == (2, 3)
        assert t.top_level(3) == 4

    def test_validates(self, line4_tree):
        rep = check_local(line4_tree, oracle=True)
        assert rep.passed, rep.failures()
        assert validate_all(line4_tree, "global").passed

    def test_round_trip(self, line4_tree):
        again = NetTree.from_json(line4_tree.to_json())
        assert again.to_json() == line4_tree.to_json()
        assert again.params == line4_tree.params

    def test_try_remove(self, line4_tree):
        t = line4_tree
        # 0^1 has two children; 0^2 has a relative
        assert not try_remove_node(t, (0, 1))
        assert not try_remove_node(t, (0, 2))
        assert len(t) == 16

    def test_remove_after_dropping_relatives(self):
        rel = [r for r in LINE4_RELATIVES if (0, 2) not in r]
        t = NetTree.from_json(line4_snapshot(relatives=rel))
        assert try_remove_node(t, (0, 2))
        assert (0, 2) not in t
        assert t.parent((0, 1)) == (0, 3)
        assert (0, 1) in t.children((0, 3))

    def test_split_jump(self, line4_tree):
        t = line4_tree
        # 2^2 jumps straight to its leaf; split at level 1
        k = split_jump(t, 2, 1)
        assert k == (2, 1)
        assert t.parent((2, 1)) == (2, 2)
        assert t.parent((2, NEG_INF)) == (2, 1)
        assert t.children((2, 1)) == [(2, NEG_INF)]
        assert len(t) == 17
        # new node is an only child with one child and no relatives
        assert try_remove_node(t, (2, 1))
        assert len(t) == 16


class TestSnapshot:
    def test_built_tree_round_trip(self, tmp_path):
        t = build(space_of(uniform(200, 2, 1)), Params.for_construction(), seed=3)
        f = tmp_path / "t.json"
        t.save(f)
        back = NetTree.load(f)
        assert back.to_json() == t.to_json()
        assert back.params == t.params and not back.params.validation_only
        assert check_local(back).passed

    def test_garbage(self):
        with pytest.raises(InputError):
            NetTree.from_json("{not json")
        with pytest.raises(InputError):
            NetTree.from_json(json.dumps({"format": "x"}))

    def test_dangling_reference(self):
        doc = json.loads(line4_snapshot())
        for r in doc["nodes"]:
            if r["point"] == 1 and r["level"] == 0:
                r["parent"] = [1, 7]
        with pytest.raises(InputError, match="missing node"):
            NetTree.from_json(json.dumps(doc))

    def test_inconsistent_children_are_reported(self):
        doc = json.loads(line4_snapshot())
        for r in doc["nodes"]:
            if r["point"] == 0 and r["level"] == 5:
                r["children"] = r["children"][:1]
        t = NetTree.from_json(json.dumps(doc))
        assert t.load_issues
        assert not check_local(t)["structure"].passed

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            NetTree.load(tmp_path / "nope.json")
