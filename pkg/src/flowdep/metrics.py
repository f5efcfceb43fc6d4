"""Log-domain analysis points.

Every correlation in flowdep is computed on base-10 logarithms of size,
duration and rate. The rate is never recomputed from raw bytes/seconds:
``log_rate`` is formed once as ``log_size - log_duration`` and stored, so
the identity holds bit for bit everywhere downstream.
"""
from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError


class LogLogPoint(NamedTuple):
    log_size: float
    log_duration: float
    log_rate: float


def to_log_point(size_bytes: float, duration_s: float) -> LogLogPoint:
    if not size_bytes >= 1:
        raise DomainError(f"size must be at least 1 byte, got {size_bytes!r}")
    if not (duration_s > 0 and math.isfinite(duration_s)):
        raise DomainError(f"duration must be positive, got {duration_s!r}")
    # np.log10 so scalar and batch conversions agree bit for bit
    log_size = float(np.log10(size_bytes))
    log_duration = float(np.log10(duration_s))
    return LogLogPoint(log_size, log_duration, log_size - log_duration)


@dataclass(frozen=True, eq=False)
class LogPoints(Sequence):
    """Column store of :class:`LogLogPoint` values.

    Behaves as a read-only sequence of points while exposing the three
    columns as float64 arrays for vectorised work.
    """

    log_size: np.ndarray
    log_duration: np.ndarray
    log_rate: np.ndarray

    @classmethod
    def from_logs(cls, log_size, log_duration):
        log_size = np.ascontiguousarray(log_size, dtype=np.float64)
        log_duration = np.ascontiguousarray(log_duration, dtype=np.float64)
        if log_size.shape != log_duration.shape or log_size.ndim != 1:
            raise ValueError("log_size and log_duration must be 1-d and equal length")
        return cls(log_size, log_duration, log_size - log_duration)

    @classmethod
    def from_raw(cls, sizes, durations):
        """Build points from raw byte counts and durations in seconds."""
        sizes = np.asarray(sizes, dtype=np.float64)
        durations = np.asarray(durations, dtype=np.float64)
        if sizes.size and not np.all(sizes >= 1):
            raise DomainError("size must be at least 1 byte")
        if durations.size and not np.all((durations > 0) & np.isfinite(durations)):
            raise DomainError("duration must be positive")
        return cls.from_logs(np.log10(sizes), np.log10(durations))

    @classmethod
    def empty(cls):
        return cls.from_logs(np.empty(0), np.empty(0))

    def __len__(self):
        return self.log_size.shape[0]

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            return LogLogPoint(float(self.log_size[idx]), float(self.log_duration[idx]),
                               float(self.log_rate[idx]))
        return LogPoints(self.log_size[idx], self.log_duration[idx], self.log_rate[idx])

    def select(self, mask) -> LogPoints:
        return LogPoints(self.log_size[mask], self.log_duration[mask], self.log_rate[mask])


def batch_log_points(summaries) -> LogPoints:
    """Convert connection or ADU summaries to log points, preserving order.

    Raises
    ------
    DomainError
        Naming the ``conn_id`` of the first summary with a non-positive size
        or duration.
    """
    summaries = list(summaries)
    sizes = np.empty(len(summaries))
    durations = np.empty(len(summaries))
    for i, s in enumerate(summaries):
        if not s.size_bytes >= 1 or not (s.duration_s > 0 and math.isfinite(s.duration_s)):
            raise DomainError(f"invalid size/duration for conn_id {s.conn_id!r}")
        sizes[i] = s.size_bytes
        durations[i] = s.duration_s
    return LogPoints.from_raw(sizes, durations)
