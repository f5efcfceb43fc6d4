"""Correlation of a bivariate normal truncated on its first coordinate.

For ``(X, Y)`` bivariate normal with correlation ``rho`` and ``X`` restricted
to ``X > a``, put ``t = (a - mu1) / sigma1``, ``C = P(X > a)`` and

    u = t * exp(-t**2 / 2) / (sqrt(2 pi) C) - exp(-t**2) / (2 pi C**2)

Then ``Corr(X, Y | X > a) = rho * sqrt(1 + u) / sqrt(1 + rho**2 u)``.
``1 + u`` is the variance of a standard normal truncated below at ``t``,
so the truncated correlation never exceeds ``|rho|`` in magnitude.

The ratio ``exp(-t**2/2) / (sqrt(2 pi) C)`` is evaluated through the scaled
complementary error function, which stays accurate far into the upper
tail where ``C`` itself underflows relative to 1.

The module also carries a seeded Monte Carlo estimator used to check the
closed form, a simulator for log-normal (size, duration) populations and a
moment estimator to fit one to data.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx, ndtr

from .corr import PairMoments, pearson
from .errors import ConfigError, DegenerateMarginalError, DomainError
from .ingest import ConnectionSummary
from .metrics import LogPoints

_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
MC_CHUNK = 1_000_000
MIN_SURVIVORS = 100


@dataclass(frozen=True)
class BivariateNormalParams:
    """Means, standard deviations and correlation of a bivariate normal.

    For simulated traffic the first coordinate is log10(size) and the second
    log10(duration).
    """

    mu1: float
    mu2: float
    sigma1: float
    sigma2: float
    rho: float

    def __post_init__(self):
        vals = (self.mu1, self.mu2, self.sigma1, self.sigma2, self.rho)
        if not all(math.isfinite(v) for v in vals):
            raise ConfigError("parameters must be finite")
        if not (self.sigma1 > 0 and self.sigma2 > 0):
            raise ConfigError("sigma1 and sigma2 must be positive")
        if abs(self.rho) > 1:
            raise ConfigError("rho must lie in [-1, 1]")


# Calibration, not ground truth: chosen by least squares against the
# published simulated-data coefficient table (24 cells, default grid).
DEFAULT_SIMULATION_PARAMS = BivariateNormalParams(
    mu1=3.42, mu2=0.0, sigma1=0.93, sigma2=1.23, rho=0.47)


@dataclass(frozen=True)
class TruncationSpec:
    a: float
    t: float
    c: float

    @classmethod
    def from_threshold(cls, params: BivariateNormalParams, a: float):
        t = (a - params.mu1) / params.sigma1
        return cls(a, t, float(ndtr(-t)))


def inverse_mills(t):
    """phi(t) / (1 - Phi(t)) for the standard normal, stable for large t."""
    return _SQRT_2_OVER_PI / erfcx(np.asarray(t, dtype=np.float64) / math.sqrt(2.0))


def variance_ratio(t):
    """Var(Z | Z > t) for standard normal Z, i.e. ``1 + u`` above."""
    lam = inverse_mills(t)
    return 1.0 + t * lam - lam * lam


def truncated_corr_t(rho: float, t: float) -> float:
    """Truncated correlation as a function of ``rho`` and standardised cut ``t``."""
    if not abs(rho) <= 1:
        raise ConfigError("rho must lie in [-1, 1]")
    if math.isnan(t) or t == math.inf:
        raise DomainError("truncation point must be below +inf")
    if t == -math.inf:
        return float(rho)
    v = float(variance_ratio(t))
    v = min(1.0, max(0.0, v))
    u = v - 1.0
    denom = math.sqrt(1.0 + rho * rho * u)
    if denom == 0.0:  # |rho| = 1 with a degenerate truncated variance
        return float(math.copysign(1.0, rho))
    return float(rho * math.sqrt(v) / denom)


def truncated_corr(params: BivariateNormalParams, a: float) -> float:
    """Corr(X, Y | X > a); ``a = -inf`` means no truncation and returns rho."""
    if a == -math.inf:
        return float(params.rho)
    return truncated_corr_t(params.rho, (a - params.mu1) / params.sigma1)


def _draw(rng, params, n):
    z1 = rng.standard_normal(n)
    z2 = rng.standard_normal(n)
    x = params.mu1 + params.sigma1 * z1
    y = params.mu2 + params.sigma2 * (params.rho * z1
                                      + math.sqrt(1.0 - params.rho ** 2) * z2)
    return x, y


def mc_truncated_corr(params: BivariateNormalParams, a: float, n_samples: int,
                      seed=0, threads: int = 1, full_output: bool = False):
    """Monte Carlo estimate of Corr(X, Y | X > a).

    Samples are drawn in chunks of ``MC_CHUNK``, each from its own child of
    ``SeedSequence(seed)``; chunk moments are merged in chunk order, so the
    estimate is identical for every *threads* value.

    Returns
    -------
    float or (float, int)
        The sample correlation of surviving pairs, and with *full_output*
        also the number of survivors.
    """
    if n_samples < 10_000:
        raise ConfigError("n_samples must be at least 10^4")
    sizes = [MC_CHUNK] * (n_samples // MC_CHUNK)
    if n_samples % MC_CHUNK:
        sizes.append(n_samples % MC_CHUNK)
    children = np.random.SeedSequence(seed).spawn(len(sizes))

    def chunk(i):
        x, y = _draw(np.random.default_rng(children[i]), params, sizes[i])
        keep = x > a
        return PairMoments.from_arrays(x[keep], y[keep])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(chunk, range(len(sizes))))
    else:
        parts = [chunk(i) for i in range(len(sizes))]
    total = PairMoments()
    for p in parts:
        total = total.merge(p)
    if total.n < MIN_SURVIVORS:
        raise DomainError("truncation too severe")
    r = total.correlation()
    return (r, total.n) if full_output else r


def mc_standard_error(r: float, n: int) -> float:
    """Large-sample standard error of a Pearson estimate, (1 - r^2)/sqrt(n)."""
    return (1.0 - r * r) / math.sqrt(n)


def simulate_loglog_points(params: BivariateNormalParams, n: int, seed=0) -> LogPoints:
    """Draw *n* (log10 size, log10 duration) pairs; log rate follows by subtraction."""
    if n < 1:
        raise ConfigError("n must be positive")
    log_size, log_duration = _draw(np.random.default_rng(seed), params, n)
    return LogPoints.from_logs(log_size, log_duration)


def simulate_flow_summaries(params: BivariateNormalParams, n: int, seed=0
                            ) -> list[ConnectionSummary]:
    """Simulated connections in raw units, sizes rounded up to whole bytes."""
    pts = simulate_loglog_points(params, n, seed)
    sizes = np.maximum(1, np.ceil(10.0 ** pts.log_size)).astype(np.int64)
    durations = 10.0 ** pts.log_duration
    width = len(str(n - 1))
    return [ConnectionSummary(f"sim{i:0{width}d}", int(s), float(d))
            for i, (s, d) in enumerate(zip(sizes.tolist(), durations.tolist()))]


def estimate_params(points: LogPoints) -> BivariateNormalParams:
    """Sample means, standard deviations (n - 1) and correlation of the log pairs."""
    if len(points) < 2:
        raise DegenerateMarginalError("degenerate marginal: fewer than two points")
    x, y = points.log_size, points.log_duration
    rho = pearson(x, y)
    return BivariateNormalParams(float(x.mean()), float(y.mean()),
                                 float(x.std(ddof=1)), float(y.std(ddof=1)), rho)
