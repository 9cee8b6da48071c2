"""Command-line front end: ``nettree build|query|validate|bench``.

Exit codes: 0 success, 1 validation failure, 2 parameter error, 3 input or
I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import _backend
from .construct import SHUFFLE_ALGORITHM, build, permutation
from .errors import InputError, NetTreeError, ParameterError
from .metric import load_points
from .query import ann
from .tree_core import NetTree, Params
from .validate import GLOBAL_CAP, check_centers, size_stats, validate_all

EXIT_OK, EXIT_INVALID, EXIT_PARAM, EXIT_INPUT = 0, 1, 2, 3


class _Fail(Exception):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code


def _parse_kv_params(items: list[str]) -> Params:
    vals = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or key not in ("tau", "cp", "cc", "cr"):
            raise _Fail(EXIT_PARAM, f"bad parameter {item!r}; expected tau=, cp=, cc=, cr=")
        try:
            vals[key] = float(value)
        except ValueError:
            raise _Fail(EXIT_PARAM, f"bad value in {item!r}") from None
    missing = {"tau", "cp", "cc", "cr"} - vals.keys()
    if missing:
        raise _Fail(EXIT_PARAM, f"missing validation parameters: {', '.join(sorted(missing))}")
    return Params.for_validation(vals["tau"], vals["cp"], vals["cc"], vals["cr"])


def _engine(name: str):
    if name == "python":
        return _backend.PythonEngine
    if name == "compiled":
        if _backend.CompiledEngine is None:
            raise _Fail(EXIT_PARAM, "compiled engine is not available in this install")
        return _backend.CompiledEngine
    return None


def stats_record(tree: NetTree) -> dict:
    s = tree.stats()
    size = size_stats(tree)
    info = tree.build_info
    return {
        "n": len(tree.space),
        "dim": tree.space.dim,
        "params": tree.params.to_dict(),
        "seed": info.get("seed"),
        "shuffle_algorithm": info.get("shuffle_algorithm", SHUFFLE_ALGORITHM),
        "nodes": size["nodes"],
        "relative_edges": size["relative_edges"],
        "compressed_nodes": size["compressed_nodes"],
        "max_children": size["max_children"],
        "max_relatives": size["max_relatives"],
        "touches": {"basic": s["basic"], "split": s["split"], "merge": s["merge"]},
        "distance_total": s["distance_total"],
        "max_pair_touches": s["max_pair"],
        "structural_ops": s["nodes_created"] + s["nodes_removed"] + s["rel_writes"],
        "promotions_total": s["promotions"],
        "build_wall_time_ms": info.get("build_wall_time_ms", 0.0),
    }


def _write(path: str, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise _Fail(EXIT_INPUT, f"cannot write {path}: {exc.strerror}") from None


# -- subcommands --------------------------------------------------------------


def cmd_build(args) -> int:
    if args.validate_only_params:
        raise _Fail(EXIT_PARAM, _build_param_message(_parse_kv_params(args.validate_only_params)))
    if not args.input:
        raise _Fail(EXIT_INPUT, "missing --input")
    if args.dim is None:
        raise _Fail(EXIT_INPUT, "missing --dim")
    params = Params.for_construction(args.tau, args.cp, args.cc)
    space = load_points(args.input, args.dim)
    mismatches: list[str] = []
    hook = None
    if args.oracle_check:
        def hook(tree, p):
            rep = check_centers(tree)
            for c in rep.failures():
                mismatches.extend(f"after inserting {p}: {v}" for v in c.violations)
    tree = build(space, params, args.seed, engine_cls=_engine(args.engine), after_insert=hook)
    if args.out:
        _write(args.out, tree.to_json())
    record = stats_record(tree)
    if args.oracle_check:
        record["oracle_mismatches"] = len(mismatches)
    if args.stats:
        _write(args.stats, json.dumps(record, indent=1) + "\n")
    if mismatches:
        for m in mismatches[:20]:
            print(m, file=sys.stderr)
        print(f"oracle check failed: {len(mismatches)} center mismatches", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def _build_param_message(p: Params) -> str:
    try:
        Params(p.tau, p.cp, p.cc, p.cr)
    except ParameterError as exc:
        return f"validation-only parameters cannot be used to build a tree: {exc}"
    return "validation-only parameters cannot be used to build a tree; use --tau/--cp/--cc"


def _read_queries(path: str, dim: int) -> list[tuple[float, ...]]:
    rows = []
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            if len(fields) != dim:
                raise InputError(f"{path}:{lineno}: expected {dim} values, found {len(fields)}")
            try:
                row = tuple(float(f) for f in fields)
            except ValueError:
                raise InputError(f"{path}:{lineno}: not a number") from None
            if not all(math.isfinite(v) for v in row):
                raise InputError(f"{path}:{lineno}: non-finite coordinate")
            rows.append(row)
    return rows


def cmd_query(args) -> int:
    for flag in ("tree", "queries", "out"):
        if not getattr(args, flag):
            raise _Fail(EXIT_INPUT, f"missing --{flag}")
    tree = NetTree.load(args.tree)
    queries = _read_queries(args.queries, tree.space.dim)
    lines = []
    for i, q in enumerate(queries):
        r = ann(tree, q)
        lines.append(f"{i},{r.point},{r.distance!r},{r.bound_factor!r}\n")
    _write(args.out, "".join(lines))
    return EXIT_OK


def cmd_validate(args) -> int:
    if not args.tree:
        raise _Fail(EXIT_INPUT, "missing --tree")
    tree = NetTree.load(args.tree)
    if args.validate_only_params:
        p = _parse_kv_params(args.validate_only_params)
        tree.params = p
    if args.points:
        pts = load_points(args.points, tree.space.dim)
        if len(pts) != len(tree.space) or not np.array_equal(pts.coords, tree.space.coords):
            raise _Fail(EXIT_INPUT, f"points in {args.points} do not match the snapshot")
    if args.mode in ("global", "all") and len(tree.space) > GLOBAL_CAP and not args.force:
        raise _Fail(EXIT_PARAM, f"global check on {len(tree.space)} points exceeds the cap of "
                                f"{GLOBAL_CAP}; pass --force to run it anyway")
    rep = validate_all(tree, mode=args.mode, oracle=args.oracle, force=True)
    print(rep.to_json())
    return EXIT_OK if rep.passed else EXIT_INVALID


def cmd_bench(args) -> int:
    if not args.input:
        raise _Fail(EXIT_INPUT, "missing --input")
    if args.dim is None:
        raise _Fail(EXIT_INPUT, "missing --dim")
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        raise _Fail(EXIT_PARAM, f"bad --sizes {args.sizes!r}") from None
    if not sizes or min(sizes) < 1 or args.repeats < 1:
        raise _Fail(EXIT_PARAM, "sizes and repeats must be positive")
    params = Params.for_construction(args.tau, args.cp, args.cc)
    space = load_points(args.input, args.dim)
    if max(sizes) > len(space):
        raise _Fail(EXIT_INPUT, f"size {max(sizes)} exceeds the {len(space)} points in {args.input}")
    order = permutation(len(space), args.seed_base)
    records = []
    for n in sizes:
        sub = space.subset(order[:n])
        for r in range(args.repeats):
            tree = build(sub, params, args.seed_base + r, engine_cls=_engine(args.engine))
            rec = stats_record(tree)
            rec["repeat"] = r
            rec["backend"] = tree.backend
            records.append(rec)
    text = json.dumps(records, indent=1) + "\n"
    table = _summary(records)
    if args.out:
        _write(args.out, text)
        print(table)
    else:
        print(text, end="")
        print(table, file=sys.stderr)
    return EXIT_OK


def _summary(records: list[dict]) -> str:
    by_n: dict[int, list[dict]] = {}
    for rec in records:
        by_n.setdefault(rec["n"], []).append(rec)
    lines = [f"{'n':>8} {'touches/(n lg n)':>17} {'nodes/n':>8} {'rel_edges/n':>12} {'ops/n':>8} {'ms':>9}"]
    for n in sorted(by_n):
        recs = by_n[n]
        norm = n * math.log2(n) if n > 1 else 1.0
        t = np.mean([sum(r["touches"].values()) / norm for r in recs])
        nodes = np.mean([r["nodes"] / n for r in recs])
        edges = np.mean([r["relative_edges"] / n for r in recs])
        ops = np.mean([r["structural_ops"] / n for r in recs])
        ms = np.mean([r["build_wall_time_ms"] for r in recs])
        lines.append(f"{n:>8} {t:>17.3f} {nodes:>8.3f} {edges:>12.3f} {ops:>8.3f} {ms:>9.1f}")
    return "\n".join(lines)


# -- entry point --------------------------------------------------------------


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nettree", description="Semi-compressed local net-trees.")
    sub = ap.add_subparsers(dest="command", required=True)

    def tree_params(p):
        p.add_argument("--tau", type=float, default=6.0)
        p.add_argument("--cp", type=float, default=1.0)
        p.add_argument("--cc", type=float, default=1.0)
        p.add_argument("--engine", choices=("auto", "python", "compiled"), default="auto")

    b = sub.add_parser("build", help="build a tree from a CSV point file")
    b.add_argument("--input")
    b.add_argument("--dim", type=int)
    tree_params(b)
    b.add_argument("--seed", type=int, default=42)
    b.add_argument("--out", default="tree.json")
    b.add_argument("--stats", default="stats.json")
    b.add_argument("--oracle-check", action="store_true",
                   help="verify every center against brute force after each insertion (small n)")
    b.add_argument("--validate-only-params", nargs="+", metavar="KEY=VALUE",
                   help="relaxed parameters; always rejected for building")
    b.set_defaults(func=cmd_build)

    q = sub.add_parser("query", help="approximate nearest neighbours from a snapshot")
    q.add_argument("--tree")
    q.add_argument("--queries")
    q.add_argument("--out")
    q.set_defaults(func=cmd_query)

    v = sub.add_parser("validate", help="check a snapshot's invariants")
    v.add_argument("--tree")
    v.add_argument("--points")
    v.add_argument("--mode", choices=("local", "global", "all"), default="all")
    v.add_argument("--force", action="store_true", help="run the global check above the size cap")
    v.add_argument("--oracle", action="store_true", help="add quadratic oracle checks")
    v.add_argument("--validate-only-params", nargs="+", metavar="KEY=VALUE",
                   help="override the snapshot's parameters, e.g. tau=2 cp=1 cc=1 cr=4")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("bench", help="build-cost sweep over prefix sizes")
    s.add_argument("--input")
    s.add_argument("--dim", type=int)
    s.add_argument("--sizes", default="1024,2048,4096,8192")
    s.add_argument("--repeats", type=int, default=5)
    s.add_argument("--seed-base", type=int, default=1000)
    s.add_argument("--out")
    tree_params(s)
    s.set_defaults(func=cmd_bench)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except _Fail as exc:
        print(f"nettree {args.command}: {exc}", file=sys.stderr)
        return exc.code
    except ParameterError as exc:
        print(f"nettree {args.command}: parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except (InputError, OSError) as exc:
        print(f"nettree {args.command}: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NetTreeError as exc:
        print(f"nettree {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
