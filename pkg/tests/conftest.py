import json

import numpy as np
import pytest

from nettree import _backend
from nettree.metric import MetricSpace
from nettree.tree_core import NetTree

ENGINES = [pytest.param(_backend.PythonEngine, id="python")]
if _backend.CompiledEngine is not None:
    ENGINES.append(pytest.param(_backend.CompiledEngine, id="compiled"))


def uniform(n, dim, seed):
    return np.random.default_rng(seed).random((n, dim))


def clustered(n, dim, seed, spread=0.01):
    rng = np.random.default_rng(seed)
    k = max(1, n // 100)
    centers = rng.random((k, dim))
    labels = rng.integers(0, k, n)
    return centers[labels] + rng.normal(0.0, spread, (n, dim))


def space_of(X):
    return MetricSpace(np.unique(np.asarray(X, dtype=float), axis=0))


# The 4-point line instance drawn as the semi-compressed tree in NT(2,1,1), cr=4.
# Point ids follow the coordinates 0, 2, 11, 28.
LINE4_POINTS = [[0.0], [2.0], [11.0], [28.0]]
LINE4_NODES = {
    # (point, level): parent
    (0, "+inf"): None,
    (0, 5): (0, "+inf"),
    (0, 4): (0, 5),
    (3, 4): (0, 5),
    (0, 3): (0, 4),
    (2, 3): (0, 4),
    (3, 3): (3, 4),
    (0, 2): (0, 3),
    (2, 2): (2, 3),
    (0, 1): (0, 2),
    (0, 0): (0, 1),
    (1, 0): (0, 1),
    (0, "-inf"): (0, 0),
    (1, "-inf"): (1, 0),
    (2, "-inf"): (2, 2),
    (3, "-inf"): (3, 3),
}
LINE4_RELATIVES = [
    ((0, 4), (3, 4)),
    ((0, 3), (2, 3)),
    ((0, 3), (3, 3)),
    ((2, 3), (3, 3)),
    ((0, 2), (2, 2)),
    ((0, 0), (1, 0)),
]


def line4_snapshot(nodes=LINE4_NODES, relatives=LINE4_RELATIVES) -> str:
    rel = {k: [] for k in nodes}
    for a, b in relatives:
        rel[a].append(list(b))
        rel[b].append(list(a))
    kids = {k: [] for k in nodes}
    for k, p in nodes.items():
        if p is not None:
            kids[p].append(list(k))
    recs = [{"point": k[0], "level": k[1], "parent": None if p is None else list(p),
             "children": kids[k], "relatives": rel[k]} for k, p in nodes.items()]
    doc = {"format": "nettree-snapshot/1",
           "params": {"tau": 2.0, "cp": 1.0, "cc": 1.0, "cr": 4.0},
           "validation_only": True, "n": 4, "dim": 1,
           "points": LINE4_POINTS, "nodes": recs}
    return json.dumps(doc)


@pytest.fixture
def line4_tree():
    return NetTree.from_json(line4_snapshot())


@pytest.fixture(params=ENGINES)
def engine_cls(request):
    return request.param


# -- acceptance summary -----------------------------------------------------

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(num, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when == "teardown":
        return
    num, title = mark.args
    entry = _CRITERIA.setdefault(num, {"title": title, "passed": True, "secs": 0.0, "notes": []})
    # setup time counts too: shared sweeps are built in fixtures
    entry["secs"] += rep.duration
    if rep.when == "setup" and rep.passed:
        return
    entry["passed"] &= rep.passed
    entry["notes"].extend(v for k, v in item.user_properties if k == "note")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        e = _CRITERIA[num]
        status = "PASS" if e["passed"] else "FAIL"
        notes = "; ".join(e["notes"])
        line = f"criterion {num} [{status}] {e['title']} ({e['secs']:.1f} s)"
        terminalreporter.write_line(line + (f": {notes}" if notes else ""))
