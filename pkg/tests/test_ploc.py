import math

import hypothesis as hyp
import hypothesis.strategies as hys
import pytest

from conftest import clustered, space_of, uniform
from nettree.construct import build, insert_point, permutation
from nettree.errors import StateError
from nettree.metric import MetricSpace
from nettree.ploc import brute_force_center, brute_force_centers, center_function, take_center
from nettree.tree_core import POS_INF, Params, new_tree, split_jump
from nettree.validate import check_centers

P = Params.for_construction()


@pytest.fixture
def line3():
    t = new_tree(P, MetricSpace([[0.0], [100.0], [250.0]]), 0)
    insert_point(t, 1)
    return t


def test_center_function(line3):
    assert center_function(line3, 2, (1, 2)) == (150.0, 2)
    assert center_function(line3, 2, (0, 3)) == (250.0, 3)
    assert center_function(line3, 2, (0, 2)) == (math.inf, POS_INF)
    assert center_function(line3, 2, (0, POS_INF)) == (250.0, POS_INF)


def test_centers_and_rings(line3):
    assert line3.center_of(2) == (1, 2)
    assert brute_force_center(line3, 2) == (1, 2)
    # inner ring of 1^2 reaches cp*tau/2 = 3
    assert line3.ring_of(2) == "outer"
    with pytest.raises(StateError):
        brute_force_center(line3, 1)


def test_take_center(line3):
    assert take_center(line3, 2) == (1, 2)
    assert line3.center_of(2) is None
    with pytest.raises(StateError):
        take_center(line3, 2)
    with pytest.raises(StateError):
        take_center(line3, 0)


def test_split_moves_points():
    t = new_tree(P, MetricSpace([[0.0], [1.0], [40.0], [3.0]]), 0)
    insert_point(t, 2)
    assert check_centers(t).passed
    split_jump(t, 2, 0)
    split_jump(t, 0, -1)
    rep = check_centers(t)
    assert rep.passed, rep.failures()
    assert t.center_of(1) == (0, -1)


def test_bootstrap_cells():
    sp = space_of(uniform(50, 2, 0))
    t = new_tree(P, sp, 3)
    assert all(t.center_of(x) == t.root for x in t.uninserted)
    assert all(t.ring_of(x) == "outer" for x in t.uninserted)
    assert check_centers(t).passed


@pytest.mark.parametrize("gen, dim", [(uniform, 1), (uniform, 3), (clustered, 2)])
def test_maintained_matches_brute_force(gen, dim, engine_cls):
    sp = space_of(gen(150, dim, 11))
    mismatches = []

    def hook(tree, p):
        want = brute_force_centers(tree)
        for x, (key, ring) in want.items():
            if tree.center_of(x) != key or tree.ring_of(x) != ring:
                mismatches.append((p, x))

    build(sp, P, seed=1, engine_cls=engine_cls, after_insert=hook)
    assert mismatches == []


@hyp.settings(max_examples=30, deadline=None)
@hyp.given(hys.lists(hys.integers(-500, 500), min_size=2, max_size=30, unique=True), hys.integers(0, 999))
def test_line_matches_brute_force(xs, seed):
    sp = MetricSpace([[float(x)] for x in xs])
    order = permutation(len(xs), seed)
    t = new_tree(P, sp, order[0])
    for p in order[1:]:
        rep = check_centers(t)
        assert rep.passed, rep.failures()
        insert_point(t, p)
