"""Build-time comparison of the pure-Python and compiled engines.

Usage: python3 benchmarks/bench_engines.py [--sizes 1000,4000] [--dims 2,5] [--repeats 3]

Both engines must produce identical snapshots; the script checks this on
every cell before reporting timings.
"""

import argparse
import statistics
import time

import numpy as np

from nettree import _backend
from nettree.construct import build
from nettree.metric import MetricSpace
from nettree.tree_core import Params


def _time(space, params, seed, engine_cls):
    t0 = time.perf_counter()
    tree = build(space, params, seed=seed, engine_cls=engine_cls)
    return time.perf_counter() - t0, tree


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1000,4000")
    ap.add_argument("--dims", default="2,5")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    if _backend.CompiledEngine is None:
        raise SystemExit("compiled engine not available; reinstall with Cython present")
    params = Params.for_construction()
    print(f"{'dim':>4} {'n':>7} {'python s':>10} {'compiled s':>11} {'speedup':>8}")
    for dim in map(int, args.dims.split(",")):
        for n in map(int, args.sizes.split(",")):
            X = np.unique(np.random.default_rng(n + dim).random((n, dim)), axis=0)
            space = MetricSpace(X)
            py, cc = [], []
            for r in range(args.repeats):
                tp, a = _time(space, params, r, _backend.PythonEngine)
                tc, b = _time(space, params, r, _backend.CompiledEngine)
                if a.to_json() != b.to_json():
                    raise SystemExit(f"engines disagree at dim={dim} n={n} seed={r}")
                py.append(tp)
                cc.append(tc)
            mp, mc = statistics.median(py), statistics.median(cc)
            print(f"{dim:>4} {n:>7} {mp:>10.3f} {mc:>11.3f} {mp / mc:>7.1f}x", flush=True)


if __name__ == "__main__":
    main()
