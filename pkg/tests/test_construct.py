import math

import hypothesis as hyp
import hypothesis.strategies as hys
import pytest

from conftest import clustered, space_of, uniform
from nettree.construct import SHUFFLE_ALGORITHM, build, insert_point, insertion_level, permutation
from nettree.errors import InputError, ParameterError, StateError
from nettree.metric import MetricSpace
from nettree.tree_core import NEG_INF, POS_INF, NodeKey, Params, new_tree
from nettree.validate import check_centers, check_local

P = Params.for_construction()


@pytest.mark.parametrize("d, h", [(100.0, 2), (6.0, 0), (6.000001, 1), (1.0, -1), (0.5, -1), (0.1, -2), (216.0, 2)])
def test_insertion_level_examples(d, h):
    assert insertion_level(d, P) == h


@hyp.given(hys.floats(min_value=1e-200, max_value=1e200, allow_nan=False, allow_infinity=False),
           hys.sampled_from([5.0, 6.0, 7.5, 12.0]))
def test_insertion_level_brackets(d, tau):
    prm = Params.for_construction(tau=tau)
    h = insertion_level(d, prm)
    assert d <= prm.cr * prm.tau ** h
    assert prm.cr * prm.tau ** (h - 1) < d


@pytest.mark.parametrize("d", [0.0, -1.0, math.inf, math.nan])
def test_insertion_level_rejects(d):
    with pytest.raises(InputError):
        insertion_level(d, P)


def _tree(points):
    return new_tree(P, MetricSpace(points), 0)


def _parents(t):
    return {str(k): str(t.parent(k)) for k in t.node_keys()}


def test_trace_small_line():
    t = _tree([[0.0], [2.0], [11.0]])
    out = insert_point(t, 1)
    assert out.inserted_node == (1, 0) and out.promotions == 0
    assert t.parent((1, 0)) == (0, 1)
    assert t.relatives((1, 0)) == [(0, 0)]
    out = insert_point(t, 2)
    assert out.inserted_node == (2, 1) and out.promotions == 0
    assert t.parent((2, 1)) == (0, 2)
    assert (0, 2) in t and t.parent((0, 2)) == t.root
    assert t.relatives((2, 1)) == [(0, 1)]
    assert check_local(t, oracle=True).passed


def test_trace_promotion():
    t = _tree([[0.0], [100.0], [250.0]])
    assert insert_point(t, 1).inserted_node == (1, 2)
    assert t.parent((1, 2)) == (0, 3)
    # 250 is centred at 100^2, lands at level 2 and is promoted once
    assert t.center_of(2) == (1, 2)
    out = insert_point(t, 2)
    assert out.promotions == 1
    assert out.inserted_node == (2, 3)
    assert _parents(t) == {
        "0^+inf": "None", "0^4": "0^+inf", "0^3": "0^4", "0^2": "0^3", "0^-inf": "0^2",
        "1^2": "0^3", "1^-inf": "1^2", "2^3": "0^4", "2^2": "2^3", "2^-inf": "2^2",
    }
    assert check_local(t, oracle=True).passed


def test_insert_errors():
    t = _tree([[0.0], [1.0]])
    with pytest.raises(StateError):
        insert_point(t, 0)
    with pytest.raises(StateError):
        insert_point(t, 7)
    insert_point(t, 1)
    with pytest.raises(StateError):
        insert_point(t, 1)


def test_permutation():
    assert permutation(0, 1) == [] and permutation(1, 9) == [0]
    p = permutation(1000, 42)
    assert sorted(p) == list(range(1000))
    assert p == permutation(1000, 42)
    assert p != permutation(1000, 43)
    assert SHUFFLE_ALGORITHM == "fisher-yates/splitmix64"


def test_permutation_pinned():
    assert permutation(8, 0) == _reference_perm(8, 0)
    assert permutation(50, 12345) == _reference_perm(50, 12345)


def _reference_perm(n, seed):
    # independent transcription of splitmix64 + Fisher-Yates
    m = (1 << 64) - 1
    s = seed
    out = list(range(n))

    def nxt():
        nonlocal s
        s = (s + 0x9E3779B97F4A7C15) & m
        z = s
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & m
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & m
        return z ^ (z >> 31)

    for i in range(n - 1, 0, -1):
        lim = (1 << 64) - (1 << 64) % (i + 1)
        r = nxt()
        while r >= lim:
            r = nxt()
        j = r % (i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def test_build_deterministic(engine_cls):
    sp = space_of(uniform(300, 2, 5))
    a = build(sp, P, seed=7, engine_cls=engine_cls)
    b = build(sp, P, seed=7, engine_cls=engine_cls)
    assert a.to_json() == b.to_json()
    assert a.stats() == b.stats()
    assert a.build_info["order"] == permutation(300, 7)
    assert a.build_info["shuffle_algorithm"] == SHUFFLE_ALGORITHM


def test_build_trivial():
    t = build(MetricSpace([], 3), P)
    assert len(t) == 0 and t.root is None
    t = build(MetricSpace([[1.0, 2.0]]), P)
    assert sorted(t.node_keys()) == [NodeKey(0, NEG_INF), NodeKey(0, POS_INF)]
    assert check_local(t).passed


def test_build_rejects_validation_params():
    with pytest.raises(ParameterError):
        build(MetricSpace([[0.0]]), Params.for_validation(2, 1, 1, 4))


@pytest.mark.parametrize("tau, cc", [(5, 1), (6, 1), (8, 1.5), (12, 1), (20, 1)])
@pytest.mark.parametrize("gen", [uniform, clustered])
def test_build_valid_every_step(tau, cc, gen, engine_cls):
    prm = Params.for_construction(tau=tau, cc=cc)
    sp = space_of(gen(120, 2, tau))
    bad = []

    def hook(tree, p):
        if not check_local(tree, oracle=True).passed or not check_centers(tree).passed:
            bad.append(p)

    t = build(sp, prm, seed=tau, engine_cls=engine_cls, after_insert=hook)
    assert bad == []
    assert t.uninserted == []


@hyp.settings(max_examples=40, deadline=None)
@hyp.given(hys.lists(hys.tuples(hys.integers(-60, 60), hys.integers(-60, 60)), min_size=1, max_size=40,
                     unique=True),
           hys.integers(0, 2**32))
def test_build_valid_random(pts, seed):
    sp = MetricSpace([[float(x), float(y)] for x, y in pts])
    t = build(sp, P, seed=seed)
    rep = check_local(t, oracle=True)
    assert rep.passed, rep.failures()
    assert sorted(t.inserted) == list(range(len(pts)))
