import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nettree.errors import DuplicatePointError, InputError
from nettree.metric import MetricSpace, Point, distance, load_points, pairwise_distances

coord = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False)
# integer-valued, so nonzero differences never underflow when squared
icoord = st.integers(-10**6, 10**6).map(float)


def test_distance_examples():
    assert distance(Point(0, (0.0,)), Point(1, (0.0,))) == 0.0
    assert distance(Point(0, (0.0, 0.0)), Point(1, (3.0, 4.0))) == 5.0
    assert distance(Point(0, (0.0,)), Point(1, (2.0,))) == 2.0


def test_distance_dimension_mismatch():
    with pytest.raises(InputError):
        distance(Point(0, (0.0,)), Point(1, (0.0, 1.0)))


@given(st.lists(icoord, min_size=3, max_size=3), st.lists(icoord, min_size=3, max_size=3),
       st.lists(icoord, min_size=3, max_size=3))
def test_metric_axioms(a, b, c):
    pa, pb, pc = Point(0, tuple(a)), Point(1, tuple(b)), Point(2, tuple(c))
    ab, bc, ac = distance(pa, pb), distance(pb, pc), distance(pa, pc)
    assert ab == distance(pb, pa)
    assert ab >= 0
    assert (ab == 0) == (tuple(a) == tuple(b))
    # 4 ulps of slack for accumulated rounding
    assert ac <= (ab + bc) + 4 * math.ulp(max(ab + bc, 1e-300))


@settings(max_examples=50)
@given(st.lists(st.lists(coord, min_size=4, max_size=4), min_size=1, max_size=20))
def test_vectorised_distance_matches_scalar(rows):
    X = np.array(rows)
    d = pairwise_distances(X, X[::-1])
    for i in range(len(rows)):
        assert d[i] == distance(Point(0, tuple(rows[i])), Point(1, tuple(rows[-1 - i])))


def test_space_rejects_bad_input():
    with pytest.raises(DuplicatePointError):
        MetricSpace([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(InputError):
        MetricSpace([[1.0, 1.0], [1.0]])
    with pytest.raises(InputError):
        MetricSpace([[float("nan")]])


def test_space_basics():
    sp = MetricSpace([[0.0], [2.0], [11.0], [28.0]])
    assert len(sp) == 4 and sp.dim == 1
    assert [p.id for p in sp] == [0, 1, 2, 3]
    assert sp.distance(0, 1) == 2.0
    assert not sp.coords.flags.writeable
    assert list(sp.distances_from([1.0])) == [1.0, 1.0, 10.0, 27.0]


def test_load_points_line(tmp_path):
    f = tmp_path / "line.csv"
    f.write_text("0\n2\n11\n28\n")
    sp = load_points(f, 1)
    assert len(sp) == 4
    assert [p.id for p in sp] == [0, 1, 2, 3]
    assert [p.coords for p in sp] == [(0.0,), (2.0,), (11.0,), (28.0,)]


def test_load_points_empty(tmp_path):
    f = tmp_path / "empty.csv"
    f.write_text("")
    sp = load_points(f, 2)
    assert len(sp) == 0 and sp.dim == 2


def test_load_points_duplicate_names_lines(tmp_path):
    f = tmp_path / "dup.csv"
    f.write_text("1,1\n2,2\n1,1\n")
    with pytest.raises(DuplicatePointError, match="line 3 duplicates line 1"):
        load_points(f, 2)


@pytest.mark.parametrize("text, where", [("1,2\n3\n", ":2:"), ("1,x\n", ":1:"), ("1,inf\n", ":1:")])
def test_load_points_malformed(tmp_path, text, where):
    f = tmp_path / "bad.csv"
    f.write_text(text)
    with pytest.raises(InputError, match=where):
        load_points(f, 2)


def test_load_points_missing_file(tmp_path):
    with pytest.raises(InputError):
        load_points(tmp_path / "nope.csv", 1)
