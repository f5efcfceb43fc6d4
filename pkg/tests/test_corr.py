import json
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowdep.corr import (Pair, PairMoments, ThresholdGrid, apply_thresholds, corr_grid,
                          format_grid_json, format_grid_tsv, pearson)
from flowdep.errors import (ConfigError, DegenerateMarginalError, DomainError,
                            InsufficientDataError)
from flowdep.metrics import LogPoints
from flowdep.truncnorm import DEFAULT_SIMULATION_PARAMS, simulate_loglog_points


def exact_pearson(xs, ys):
    """Textbook formula in exact rationals, square root at 50 digits."""
    xs = [Fraction(x) for x in xs]
    ys = [Fraction(y) for y in ys]
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = sum((x - mx) ** 2 for x in xs)
    syy = sum((y - my) ** 2 for y in ys)
    with mpmath.workdps(50):
        prod = sxx * syy
        return float(mpmath.mpf(sxy.numerator) / sxy.denominator
                     / mpmath.sqrt(mpmath.mpf(prod.numerator) / prod.denominator))


class TestPearson:
    def test_perfect(self):
        assert pearson([1, 2, 3], [1, 2, 3]) == 1.0
        assert pearson([1, 2, 3], [3, 2, 1]) == -1.0

    def test_against_exact_oracle(self):
        expected = exact_pearson([1, 2, 3, 4], [1, 3, 2, 5])
        assert expected == pytest.approx(0.8315218406202999, abs=1e-15)
        assert pearson([1, 2, 3, 4], [1, 3, 2, 5]) == pytest.approx(expected, abs=1e-14)

    def test_insufficient(self):
        with pytest.raises(InsufficientDataError, match="insufficient data"):
            pearson([1.0], [2.0])

    def test_degenerate(self):
        with pytest.raises(DegenerateMarginalError, match="degenerate marginal"):
            pearson([0.1, 0.1, 0.1], [1, 2, 3])

    def test_stable_with_large_offset(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(1000)
        y = x + rng.standard_normal(1000)
        assert pearson(x + 1e9, y - 1e9) == pytest.approx(pearson(x, y), abs=1e-6)

    @given(st.lists(st.tuples(st.integers(-1000, 1000), st.integers(-1000, 1000)),
                    min_size=3, max_size=40))
    @settings(max_examples=200)
    def test_matches_exact_oracle_on_integers(self, rows):
        xs, ys = zip(*rows)
        if len(set(xs)) < 2 or len(set(ys)) < 2:
            return
        assert pearson(xs, ys) == pytest.approx(exact_pearson(xs, ys), abs=1e-12)


samples = st.integers(0, 2**32 - 1).map(np.random.default_rng)


@given(samples)
@settings(max_examples=100)
def test_symmetry_and_affine_invariance(rng):
    n = int(rng.integers(3, 300))
    x = rng.standard_normal(n)
    y = 0.3 * x + rng.standard_normal(n)
    a = float(rng.uniform(0.01, 100))
    b = float(rng.uniform(-100, 100))
    r = pearson(x, y)
    assert abs(pearson(y, x) - r) <= 1e-12
    assert abs(pearson(a * x + b, y) - r) <= 1e-9
    assert -1.0 <= r <= 1.0


def test_pair_moments_merge_matches_direct():
    rng = np.random.default_rng(4)
    x = rng.standard_normal(10_000) + 5
    y = 0.5 * x + rng.standard_normal(10_000)
    total = PairMoments()
    for lo in range(0, 10_000, 1234):
        total = total.merge(PairMoments.from_arrays(x[lo:lo + 1234], y[lo:lo + 1234]))
    assert total.n == 10_000
    assert total.correlation() == pytest.approx(pearson(x, y), abs=1e-12)


# (size bytes, duration s); size > 10 kB and duration > 1 s keeps rows 2, 5, 6
EIGHT = [(5000, 2), (20000, 0.5), (20000, 3), (10000, 5), (150000, 1.0),
         (99999, 1.5), (11000, 100), (1, 0.001)]


class TestApplyThresholds:
    def setup_method(self):
        self.points = LogPoints.from_raw(*zip(*EIGHT))

    def test_noop(self):
        subset, pct = apply_thresholds(self.points, 0, 0)
        assert len(subset) == 8 and pct == 100.0

    def test_all_below(self):
        subset, pct = apply_thresholds(self.points, 10**9, 0)
        assert len(subset) == 0 and pct == 0.0

    def test_hand_count(self):
        subset, pct = apply_thresholds(self.points, 10_000, 1.0)
        expected = LogPoints.from_raw([20000, 99999, 11000], [3, 1.5, 100])
        np.testing.assert_array_equal(subset.log_size, expected.log_size)
        assert pct == 37.5

    def test_negative_threshold(self):
        with pytest.raises(ConfigError):
            apply_thresholds(self.points, -1, 0)


class TestGrid:
    def test_grid_validation(self):
        with pytest.raises(ConfigError):
            ThresholdGrid((0, 10, 10), (0,))
        with pytest.raises(ConfigError):
            ThresholdGrid((0,), (-1, 1))
        assert ThresholdGrid().shape == (6, 4)

    def test_single_cell_collinear(self):
        pts = LogPoints.from_raw([10, 100, 1000], [2.0, 2.0, 2.0])
        g = corr_grid(pts, ThresholdGrid((0,), (0,)), Pair.SIZE_RATE)
        (cell,) = g.cells[0]
        assert cell.coefficient == pytest.approx(1.0, abs=1e-12)
        assert cell.population_pct == 100.0 and cell.n == 3

    def test_empty_cell_is_undefined(self):
        pts = LogPoints.from_raw([10, 100, 1000, 5000], [1.0, 2.0, 3.0, 0.5])
        g = corr_grid(pts, ThresholdGrid((0, 10**6), (0,)), Pair.SIZE_DURATION)
        full, empty = g.cells[0]
        assert full.coefficient is not None
        assert empty.n == 0 and empty.coefficient is None and empty.population_pct == 0.0
        assert "NA|0.0000|0" in format_grid_tsv(g)
        assert json.loads(format_grid_json(g))["cells"][0][1]["coefficient"] == "NA"

    def test_empty_population(self):
        with pytest.raises(DomainError, match="empty population"):
            corr_grid(LogPoints.empty())

    def test_tsv_layout(self):
        pts = simulate_loglog_points(DEFAULT_SIMULATION_PARAMS, 5000, seed=1)
        lines = format_grid_tsv(corr_grid(pts)).splitlines()
        assert len(lines) == 7
        assert lines[0].split("\t") == ["duration_s\\size_bytes", ">0", ">1000", ">10000",
                                        ">100000"]
        assert [ln.split("\t")[0] for ln in lines[1:]] == [">0", ">0.01", ">0.1", ">1", ">5",
                                                           ">100"]
        assert all(len(ln.split("\t")) == 5 for ln in lines)

    def test_rate_pair_consistency(self):
        pts = simulate_loglog_points(DEFAULT_SIMULATION_PARAMS, 10_000, seed=3)
        r_stored = pearson(pts.log_size, pts.log_rate)
        r_raw = pearson(pts.log_size, pts.log_size - pts.log_duration)
        assert abs(r_stored - r_raw) <= 1e-12

    def test_threads_do_not_change_result(self):
        pts = simulate_loglog_points(DEFAULT_SIMULATION_PARAMS, 20_000, seed=9)
        a = corr_grid(pts, threads=1)
        b = corr_grid(pts, threads=8)
        assert format_grid_tsv(a) == format_grid_tsv(b)

    def test_simulated_direction(self):
        pts = simulate_loglog_points(DEFAULT_SIMULATION_PARAMS, 300_000, seed=5)
        coef = corr_grid(pts, pair=Pair.SIZE_RATE).coefficients()
        assert np.all(np.diff(coef[:, 0]) > 0)
        assert np.all(np.diff(coef[0, :]) < 0)


@given(samples)
@settings(max_examples=30, deadline=None)
def test_nesting_and_monotone_counts(rng):
    n = int(rng.integers(1, 500))
    pts = LogPoints.from_logs(rng.normal(3.5, 1.0, n), rng.normal(-0.5, 1.0, n))
    g = corr_grid(pts)
    counts = g.counts()
    assert np.all(np.diff(counts, axis=0) <= 0)
    assert np.all(np.diff(counts, axis=1) <= 0)
    for row in g.cells:
        for c in row:
            assert c.population_pct == pytest.approx(100 * c.n / n, abs=1e-9)
    s1, d1 = 1000, 0.1
    s2, d2 = 10_000, 1.0
    sub1, _ = apply_thresholds(pts, s1, d1)
    sub2, _ = apply_thresholds(pts, s2, d2)
    assert set(sub2.log_size.tolist()) <= set(sub1.log_size.tolist())
