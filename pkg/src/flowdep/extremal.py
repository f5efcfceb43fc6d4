"""Extremal dependence of two heavy-tailed variables.

Both marginals are standardised with the inverse complementary rank
transform (value -> n / descending rank), the pairs are mapped to polar
coordinates, and the angles of the largest-radius samples are summarised by
the extremal dependence measure

    EDM = 1 - (4/pi)^2 * mean((theta - pi/4)^2)

which is 0 when the extremes hug the axes, 1 when they sit on the diagonal
and 2/3 for angles spread uniformly over [0, pi/2].
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from decimal import Decimal
from typing import NamedTuple

import numpy as np
from scipy.stats import rankdata

from .errors import ConfigError, DomainError

DEFAULT_FRACTIONS = (0.0001, 0.0002, 0.0005, 0.001, 0.002, 0.005,
                     0.01, 0.02, 0.05, 0.10, 0.20)
UNIFORM_EDM = 2.0 / 3.0
INDEPENDENCE_BELOW = 0.4
DEPENDENCE_ABOVE = 0.75
HISTOGRAM_BINS = 64
MIN_CURVE_SAMPLES = 100

_QUARTER_PI = math.pi / 4
_HALF_PI = math.pi / 2


class PolarSample(NamedTuple):
    radius: float
    theta: float


@dataclass(frozen=True, eq=False)
class PolarSamples:
    """Polar coordinates stored column-wise; indexing yields :class:`PolarSample`."""

    radius: np.ndarray
    theta: np.ndarray

    def __len__(self):
        return self.radius.shape[0]

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return PolarSample(float(self.radius[idx]), float(self.theta[idx]))
        return PolarSamples(self.radius[idx], self.theta[idx])


def icrt(values) -> np.ndarray:
    """Inverse complementary rank transform.

    Each value is replaced by ``n / r`` where ``r`` is its rank counted from
    the largest (largest = 1). Ties share the average of the ranks they span.
    Input order is preserved.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] == 0:
        raise DomainError("icrt needs a non-empty 1-d sample")
    if not np.all(np.isfinite(x)):
        raise DomainError("icrt input must be finite")
    ranks = rankdata(-x, method="average")
    return x.shape[0] / ranks


def to_polar(xs, ys, norm: str = "l2") -> PolarSamples:
    """Map positive pairs to (radius, angle) with the angle in (0, pi/2).

    *norm* selects the radius: ``"l2"`` (Euclidean) or ``"l1"`` (x + y).
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("xs and ys must be 1-d sequences of equal length")
    if not (np.all(x > 0) and np.all(y > 0)):
        raise DomainError("polar coordinates need strictly positive values")
    if norm == "l2":
        radius = np.hypot(x, y)
    elif norm == "l1":
        radius = x + y
    else:
        raise ConfigError(f"unknown norm {norm!r}")
    return PolarSamples(radius, np.arctan2(y, x))


def top_count(p: float, n: int) -> int:
    """Number of samples kept by fraction *p* of *n*: ceil(p * n), at least 1."""
    if not 0 < p <= 1:
        raise ConfigError(f"fraction must lie in (0, 1], got {p!r}")
    # decimal product so 0.0001 * 10**6 is exactly 100, not 100.00000000000001
    return max(1, math.ceil(Decimal(repr(float(p))) * n))


def _descending_order(radius):
    # stable sort on the negation: equal radii keep input order
    return np.argsort(-radius, kind="stable")


def top_fraction(samples: PolarSamples, p: float) -> PolarSamples:
    """The ``ceil(p * n)`` samples of largest radius, largest first.

    Ties at the cutoff are resolved in favour of earlier samples.
    """
    if len(samples) == 0:
        raise DomainError("no samples")
    k = top_count(p, len(samples))
    return samples[_descending_order(samples.radius)[:k]]


def edm(angles) -> float:
    """Extremal dependence measure of a set of angles in [0, pi/2]."""
    theta = np.asarray(angles, dtype=np.float64)
    if theta.ndim != 1 or theta.shape[0] == 0:
        raise DomainError("edm needs at least one angle")
    if not np.all((theta >= 0) & (theta <= _HALF_PI)):
        raise DomainError("angles must lie in [0, pi/2]")
    # scaled inside the square so each term is exactly within [0, 1]
    return float(1.0 - np.mean(((theta - _QUARTER_PI) / _QUARTER_PI) ** 2))


def interpret(value: float) -> str:
    """Reading of an EDM value against the usual reference bands."""
    if value < INDEPENDENCE_BELOW:
        return "extremal independence"
    if value > DEPENDENCE_ABOVE:
        return "strong extremal dependence"
    return "inconclusive"


@dataclass(frozen=True, eq=False)
class EdmCurve:
    fractions: tuple[float, ...]
    k_values: tuple[int, ...]
    edm_values: tuple[float, ...]
    n: int
    norm: str = "l2"
    angles: tuple[np.ndarray, ...] = field(default=(), repr=False)

    def annotations(self) -> list[str]:
        return [interpret(v) for v in self.edm_values]

    def histograms(self, bins: int = HISTOGRAM_BINS):
        """Angle counts per fraction over uniform bins on [0, pi/2]."""
        edges = np.linspace(0.0, _HALF_PI, bins + 1)
        counts = [np.histogram(a, bins=edges)[0] for a in self.angles]
        return edges, counts


def edm_curve(xs, ys, fractions=DEFAULT_FRACTIONS, norm: str = "l2") -> EdmCurve:
    """EDM of the top-radius subsets for each fraction in *fractions*.

    The pipeline is ICRT on each marginal, polar mapping, then for every
    fraction the ``ceil(p * n)`` largest radii. Angles of every subset are
    kept on the result for diagnostics.
    """
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError("xs and ys must have equal length")
    if x.shape[0] < MIN_CURVE_SAMPLES:
        raise DomainError(f"edm curve needs at least {MIN_CURVE_SAMPLES} pairs")
    fractions = tuple(float(p) for p in fractions)
    if not fractions:
        raise ConfigError("no fractions given")
    if any(b <= a for a, b in zip(fractions, fractions[1:])):
        raise ConfigError("fractions must be strictly ascending")
    n = x.shape[0]
    ks = tuple(top_count(p, n) for p in fractions)
    polar = to_polar(icrt(x), icrt(y), norm=norm)
    order = _descending_order(polar.radius)
    angles = tuple(polar.theta[order[:k]] for k in ks)
    values = tuple(edm(a) for a in angles)
    return EdmCurve(fractions, ks, values, n, norm, angles)


def format_curve_tsv(curve: EdmCurve) -> str:
    lines = ["fraction\tk\tedm"]
    for p, k, v in zip(curve.fractions, curve.k_values, curve.edm_values):
        lines.append(f"{p:g}\t{k}\t{v:.6f}")
    return "\n".join(lines) + "\n"


def curve_to_dict(curve: EdmCurve) -> dict:
    return {
        "n": curve.n,
        "norm": curve.norm,
        "reference": {"uniform": UNIFORM_EDM,
                      "independence_below": INDEPENDENCE_BELOW,
                      "dependence_above": DEPENDENCE_ABOVE},
        "points": [{"fraction": p, "k": k, "edm": v, "annotation": a}
                   for p, k, v, a in zip(curve.fractions, curve.k_values,
                                         curve.edm_values, curve.annotations())],
    }


def format_curve_json(curve: EdmCurve, **extra) -> str:
    return json.dumps({**extra, **curve_to_dict(curve)}, indent=2) + "\n"


def format_histogram_tsv(curve: EdmCurve, bins: int = HISTOGRAM_BINS) -> str:
    edges, counts = curve.histograms(bins)
    lines = ["fraction\tbin_lo\tbin_hi\tcount"]
    for p, c in zip(curve.fractions, counts):
        for lo, hi, m in zip(edges[:-1], edges[1:], c):
            lines.append(f"{p:g}\t{lo:.6f}\t{hi:.6f}\t{m}")
    return "\n".join(lines) + "\n"
