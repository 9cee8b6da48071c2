"""Points, the Euclidean distance contract, and CSV ingestion.

Every distance in the package is computed with the same arithmetic: squared
coordinate differences summed in index order, then a single square root.
The vectorised helpers below reproduce that order exactly so that a numpy
oracle and the scalar path agree bit for bit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DuplicatePointError, InputError

__all__ = [
    "Point",
    "MetricSpace",
    "distance",
    "load_points",
    "pairwise_distances",
]


@dataclass(frozen=True)
class Point:
    id: int
    coords: tuple[float, ...]

    @property
    def dim(self) -> int:
        return len(self.coords)


def _euclid(a: Sequence[float], b: Sequence[float]) -> float:
    s = 0.0
    for x, y in zip(a, b):
        t = x - y
        s += t * t
    return math.sqrt(s)


def distance(a: Point, b: Point) -> float:
    """Euclidean distance between two points of the same dimension."""
    if len(a.coords) != len(b.coords):
        raise InputError(f"dimension mismatch: {len(a.coords)} vs {len(b.coords)}")
    return _euclid(a.coords, b.coords)


def pairwise_distances(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Row-by-row distances ``d(X[k], Y[k])`` (broadcasting allowed).

    Accumulates per coordinate in order so results match :func:`distance`.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    s = None
    for k in range(X.shape[-1]):
        t = X[..., k] - Y[..., k]
        s = t * t if s is None else s + t * t
    if s is None:
        return np.zeros(np.broadcast_shapes(X.shape[:-1], Y.shape[:-1]))
    return np.sqrt(s)


class MetricSpace:
    """An immutable set of distinct points in R^dim under the Euclidean metric."""

    kind = "euclidean"

    def __init__(self, coords: Iterable[Sequence[float]], dim: int | None = None):
        rows = [tuple(float(v) for v in c) for c in coords]
        if dim is None:
            if not rows:
                raise InputError("cannot infer the dimension of an empty point set")
            dim = len(rows[0])
        if dim < 1:
            raise InputError(f"dimension must be positive, got {dim}")
        seen: dict[tuple[float, ...], int] = {}
        for i, r in enumerate(rows):
            if len(r) != dim:
                raise InputError(f"point {i} has {len(r)} coordinates, expected {dim}")
            if not all(math.isfinite(v) for v in r):
                raise InputError(f"point {i} has a non-finite coordinate")
            if r in seen:
                raise DuplicatePointError(f"points {seen[r]} and {i} have identical coordinates")
            seen[r] = i
        self.dim = dim
        self.points = tuple(Point(i, r) for i, r in enumerate(rows))
        self._array = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
        self._array.setflags(write=False)

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, i: int) -> Point:
        return self.points[i]

    def __iter__(self):
        return iter(self.points)

    @property
    def coords(self) -> np.ndarray:
        """Read-only ``(n, dim)`` float64 array of coordinates."""
        return self._array

    def distance(self, i: int, j: int) -> float:
        return _euclid(self.points[i].coords, self.points[j].coords)

    def distances_from(self, x: Sequence[float], ids=None) -> np.ndarray:
        """Distances from an arbitrary location to the given point ids (all by default)."""
        X = self._array if ids is None else self._array[np.asarray(ids, dtype=np.intp)]
        return pairwise_distances(X, np.asarray(x, dtype=np.float64)[None, :])

    def subset(self, ids: Sequence[int]) -> "MetricSpace":
        return MetricSpace([self.points[i].coords for i in ids], self.dim)


def load_points(path: str | Path, dim: int) -> MetricSpace:
    """Read a headerless CSV with exactly ``dim`` real values per line.

    Whitespace-only lines are skipped.  Ids follow file order over the
    remaining rows.
    """
    if dim < 1:
        raise InputError(f"dimension must be positive, got {dim}")
    rows: list[tuple[float, ...]] = []
    seen: dict[tuple[float, ...], int] = {}
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            if len(fields) != dim:
                raise InputError(f"{path}:{lineno}: expected {dim} values, found {len(fields)}")
            try:
                row = tuple(float(f) for f in fields)
            except ValueError:
                raise InputError(f"{path}:{lineno}: not a number in {','.join(fields)!r}") from None
            if not all(math.isfinite(v) for v in row):
                raise InputError(f"{path}:{lineno}: non-finite coordinate")
            if row in seen:
                raise DuplicatePointError(
                    f"{path}: line {lineno} duplicates line {seen[row]}"
                )
            seen[row] = lineno
            rows.append(row)
    return MetricSpace(rows, dim)

