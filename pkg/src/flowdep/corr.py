"""Pearson correlation of log-domain variables under joint thresholds.

A population of :class:`~flowdep.metrics.LogPoints` is cut into nested
subpopulations by simultaneous lower bounds on size and duration, and the
product-moment coefficient of a chosen variable pair is reported for each
one, together with the share of the population it retains.
"""
from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (ConfigError, DegenerateMarginalError, DomainError,
                     InsufficientDataError)
from .metrics import LogPoints

KB = 1000  # decimal kilobyte

DEFAULT_DURATION_THRESHOLDS_S = (0.0, 0.01, 0.1, 1.0, 5.0, 100.0)
DEFAULT_SIZE_THRESHOLDS_BYTES = (0.0, 1 * KB, 10 * KB, 100 * KB)


class Pair(enum.Enum):
    SIZE_DURATION = "size-duration"
    SIZE_RATE = "size-rate"
    DURATION_RATE = "duration-rate"

    def columns(self, points: LogPoints) -> tuple[np.ndarray, np.ndarray]:
        x, y = _PAIR_FIELDS[self]
        return getattr(points, x), getattr(points, y)


_PAIR_FIELDS = {
    Pair.SIZE_DURATION: ("log_size", "log_duration"),
    Pair.SIZE_RATE: ("log_size", "log_rate"),
    Pair.DURATION_RATE: ("log_duration", "log_rate"),
}


def pearson(xs, ys) -> float:
    """Product-moment correlation, by two-pass mean-centred summation.

    Raises
    ------
    InsufficientDataError
        Fewer than two observations.
    DegenerateMarginalError
        Either sample is constant.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-d sequences of equal length")
    if x.shape[0] < 2:
        raise InsufficientDataError("insufficient data")
    # exact test: a computed variance of a constant can be a rounding residue
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateMarginalError("degenerate marginal")
    dx = x - x.mean()
    dy = y - y.mean()
    sxy = np.dot(dx, dy)
    r = sxy / math.sqrt(np.dot(dx, dx) * np.dot(dy, dy))
    return float(min(1.0, max(-1.0, r)))


@dataclass
class PairMoments:
    """Mergeable first and second moments of a bivariate sample.

    Chunks are reduced independently with :meth:`from_arrays` and combined
    with :meth:`merge` using the pairwise update of Chan, Golub and LeVeque,
    which keeps the centred sums accurate without a second pass over all
    data. Merging in a fixed order gives a reproducible result.
    """

    n: int = 0
    mean_x: float = 0.0
    mean_y: float = 0.0
    sxx: float = 0.0
    syy: float = 0.0
    sxy: float = 0.0

    @classmethod
    def from_arrays(cls, x, y):
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        n = x.shape[0]
        if n == 0:
            return cls()
        mx, my = x.mean(), y.mean()
        dx, dy = x - mx, y - my
        return cls(n, float(mx), float(my), float(np.dot(dx, dx)),
                   float(np.dot(dy, dy)), float(np.dot(dx, dy)))

    def merge(self, other: PairMoments) -> PairMoments:
        if other.n == 0:
            return self
        if self.n == 0:
            return other
        n = self.n + other.n
        ddx = other.mean_x - self.mean_x
        ddy = other.mean_y - self.mean_y
        w = self.n * other.n / n
        return PairMoments(
            n,
            self.mean_x + ddx * other.n / n,
            self.mean_y + ddy * other.n / n,
            self.sxx + other.sxx + ddx * ddx * w,
            self.syy + other.syy + ddy * ddy * w,
            self.sxy + other.sxy + ddx * ddy * w,
        )

    def correlation(self) -> float:
        if self.n < 2:
            raise InsufficientDataError("insufficient data")
        if self.sxx <= 0 or self.syy <= 0:
            raise DegenerateMarginalError("degenerate marginal")
        r = self.sxy / math.sqrt(self.sxx * self.syy)
        return min(1.0, max(-1.0, r))


@dataclass(frozen=True)
class ThresholdGrid:
    size_thresholds_bytes: tuple[float, ...] = DEFAULT_SIZE_THRESHOLDS_BYTES
    duration_thresholds_s: tuple[float, ...] = DEFAULT_DURATION_THRESHOLDS_S

    def __post_init__(self):
        for name in ("size_thresholds_bytes", "duration_thresholds_s"):
            values = tuple(float(v) for v in getattr(self, name))
            if not values:
                raise ConfigError(f"{name} is empty")
            if any(not (v >= 0 and math.isfinite(v)) for v in values):
                raise ConfigError(f"{name} must be finite and non-negative")
            if any(b <= a for a, b in zip(values, values[1:])):
                raise ConfigError(f"{name} must be strictly ascending")
            object.__setattr__(self, name, values)

    @property
    def shape(self):
        return len(self.duration_thresholds_s), len(self.size_thresholds_bytes)


@dataclass(frozen=True)
class CorrCell:
    duration_min_s: float
    size_min_bytes: float
    pair: Pair
    n: int
    population_pct: float
    coefficient: float | None  # None when undefined

    @property
    def defined(self):
        return self.coefficient is not None


@dataclass(frozen=True)
class CorrGrid:
    grid: ThresholdGrid
    pair: Pair
    cells: tuple[tuple[CorrCell, ...], ...]  # [duration row][size column]
    total_n: int

    def coefficients(self) -> np.ndarray:
        """Coefficient matrix with NaN for undefined cells."""
        return np.array([[np.nan if c.coefficient is None else c.coefficient for c in row]
                         for row in self.cells])

    def counts(self) -> np.ndarray:
        return np.array([[c.n for c in row] for row in self.cells], dtype=np.int64)


def _threshold_mask(points: LogPoints, size_min_bytes, duration_min_s):
    mask = np.ones(len(points), dtype=bool)
    if size_min_bytes > 0:
        mask &= points.log_size > math.log10(size_min_bytes)
    if duration_min_s > 0:
        mask &= points.log_duration > math.log10(duration_min_s)
    return mask


def apply_thresholds(points: LogPoints, size_min_bytes: float = 0.0,
                     duration_min_s: float = 0.0) -> tuple[LogPoints, float]:
    """Keep points with size > *size_min_bytes* and duration > *duration_min_s*.

    Comparisons are strict and made on the log scale; a threshold of 0
    admits everything. Returns the subset and its percentage of *points*.
    """
    if size_min_bytes < 0 or duration_min_s < 0:
        raise ConfigError("thresholds must be non-negative")
    mask = _threshold_mask(points, size_min_bytes, duration_min_s)
    n = int(mask.sum())
    pct = 100.0 * n / len(points) if len(points) else 0.0
    return points.select(mask), pct


def _cell(points, x, y, pair, d, s):
    mask = _threshold_mask(points, s, d)
    n = int(mask.sum())
    try:
        coef = pearson(x[mask], y[mask])
    except (InsufficientDataError, DegenerateMarginalError):
        coef = None
    return CorrCell(d, s, pair, n, 100.0 * n / len(points), coef)


def corr_grid(points: LogPoints, grid: ThresholdGrid | None = None,
              pair: Pair = Pair.SIZE_RATE, threads: int = 1) -> CorrGrid:
    """Correlation of *pair* in every (duration, size) threshold cell.

    Cells are independent and may be evaluated on *threads* workers; the
    result does not depend on the worker count.
    """
    grid = grid or ThresholdGrid()
    pair = Pair(pair)
    if len(points) == 0:
        raise DomainError("empty population")
    x, y = pair.columns(points)
    keys = [(d, s) for d in grid.duration_thresholds_s for s in grid.size_thresholds_bytes]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            flat = list(pool.map(lambda k: _cell(points, x, y, pair, *k), keys))
    else:
        flat = [_cell(points, x, y, pair, d, s) for d, s in keys]
    ncol = len(grid.size_thresholds_bytes)
    cells = tuple(tuple(flat[i:i + ncol]) for i in range(0, len(flat), ncol))
    return CorrGrid(grid, pair, cells, len(points))


def _fmt_threshold(v):
    return f"{v:g}"


def format_grid_tsv(result: CorrGrid) -> str:
    """Render a grid as TSV: one row per duration threshold, cells ``coef|pct|n``."""
    header = ["duration_s\\size_bytes"] + [
        ">" + _fmt_threshold(s) for s in result.grid.size_thresholds_bytes]
    lines = ["\t".join(header)]
    for d, row in zip(result.grid.duration_thresholds_s, result.cells):
        cells = []
        for c in row:
            coef = "NA" if c.coefficient is None else f"{c.coefficient:.6f}"
            cells.append(f"{coef}|{c.population_pct:.4f}|{c.n}")
        lines.append("\t".join([">" + _fmt_threshold(d)] + cells))
    return "\n".join(lines) + "\n"


def grid_to_dict(result: CorrGrid) -> dict:
    return {
        "pair": result.pair.value,
        "total_n": result.total_n,
        "size_thresholds_bytes": list(result.grid.size_thresholds_bytes),
        "duration_thresholds_s": list(result.grid.duration_thresholds_s),
        "cells": [
            [{
                "duration_min_s": c.duration_min_s,
                "size_min_bytes": c.size_min_bytes,
                "n": c.n,
                "population_pct": c.population_pct,
                "coefficient": "NA" if c.coefficient is None else c.coefficient,
            } for c in row]
            for row in result.cells
        ],
    }


def format_grid_json(result: CorrGrid, **extra) -> str:
    return json.dumps({**extra, **grid_to_dict(result)}, indent=2) + "\n"
