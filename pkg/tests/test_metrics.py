import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flowdep.errors import DomainError
from flowdep.ingest import ConnectionSummary, aggregate_connections, parse_packet_events
from flowdep.metrics import LogLogPoint, LogPoints, batch_log_points, to_log_point


@pytest.mark.parametrize("size, duration, expected", [
    (1000, 10, (3.0, 1.0, 2.0)),
    (1, 1, (0.0, 0.0, 0.0)),
])
def test_exact_powers(size, duration, expected):
    assert to_log_point(size, duration) == LogLogPoint(*expected)


def test_derived_point():
    p = to_log_point(150000, 2.25)
    assert p.log_size == pytest.approx(5.17609, abs=5e-6)
    assert p.log_duration == pytest.approx(0.35218, abs=5e-6)
    assert p.log_rate == pytest.approx(4.82391, abs=5e-6)
    assert p.log_rate == pytest.approx(math.log10(150000 / 2.25), abs=1e-12)


@pytest.mark.parametrize("size, duration", [(0, 1.0), (-5, 1.0), (10, 0.0), (10, -1.0),
                                            (10, math.inf)])
def test_domain(size, duration):
    with pytest.raises(DomainError):
        to_log_point(size, duration)


def test_batch_empty_and_order():
    assert len(batch_log_points([])) == 0
    summaries = [ConnectionSummary("a", 10, 1.0), ConnectionSummary("b", 1000, 0.1),
                 ConnectionSummary("c", 100, 10.0)]
    pts = batch_log_points(summaries)
    assert list(pts) == [(1.0, 0.0, 1.0), (3.0, -1.0, 4.0), (2.0, 1.0, 1.0)]


def test_batch_fixture_matches_rowwise_log10(data_dir):
    with open(data_dir / "packets_10conn.csv") as fh:
        conns = aggregate_connections(parse_packet_events(fh))
    pts = batch_log_points(conns)
    for c, p in zip(conns, pts):
        assert p.log_size == pytest.approx(math.log10(c.size_bytes), abs=1e-15)
        assert p.log_duration == pytest.approx(math.log10(c.duration_s), abs=1e-15)
        assert p.log_rate == p.log_size - p.log_duration


def test_batch_error_names_connection():
    with pytest.raises(DomainError, match="bad"):
        batch_log_points([ConnectionSummary("ok", 1, 1.0), ConnectionSummary("bad", 0, 1.0)])


positive_sizes = st.integers(1, 10**12)
positive_durations = st.floats(1e-6, 1e6, allow_nan=False)


@given(st.lists(st.tuples(positive_sizes, positive_durations), min_size=1, max_size=50))
def test_rate_identity(rows):
    sizes, durations = zip(*rows)
    pts = LogPoints.from_raw(sizes, durations)
    resid = pts.log_rate + pts.log_duration - pts.log_size
    assert np.max(np.abs(resid)) <= 1e-12


@given(st.lists(st.tuples(st.integers(1, 10**9), positive_durations), min_size=1, max_size=50))
def test_scaling_sizes_by_ten(rows):
    sizes, durations = zip(*rows)
    base = LogPoints.from_raw(sizes, durations)
    scaled = LogPoints.from_raw([10 * s for s in sizes], durations)
    np.testing.assert_allclose(scaled.log_size - base.log_size, 1.0, atol=1e-12)
    np.testing.assert_allclose(scaled.log_rate - base.log_rate, 1.0, atol=1e-12)
    np.testing.assert_array_equal(scaled.log_duration, base.log_duration)


def test_logpoints_sequence_behaviour():
    pts = LogPoints.from_logs([1.0, 2.0, 3.0], [0.5, 0.5, 0.5])
    assert len(pts) == 3
    assert pts[1] == LogLogPoint(2.0, 0.5, 1.5)
    assert list(pts[1:].log_size) == [2.0, 3.0]
