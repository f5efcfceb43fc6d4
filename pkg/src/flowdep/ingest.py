"""Trace ingestion: packet events, connection and ADU summaries.

Two textual input formats are understood, both UTF-8 CSV without a header
row; lines starting with ``#`` and blank lines are skipped.

packet events
    ``conn_id,timestamp,direction,payload_bytes,dst_port`` with direction
    ``A`` (initiator to responder) or ``B`` (the reverse).
flow summaries
    ``conn_id,size_bytes,duration_s,is_http`` with is_http ``0`` or ``1``.

ADU summaries are written as
``conn_id,adu_index,direction,size_bytes,duration_s,is_http``.

Timestamps are held as integer nanoseconds so that durations are formed by
a single exact subtraction followed by one conversion to seconds.
"""
from __future__ import annotations

import enum
import math
import re
import warnings
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence

from .errors import ConfigError, ParseError

DEFAULT_HTTP_PORTS = frozenset({80, 8080})
DEFAULT_QUIET_THRESHOLD_S = 0.5

_TIMESTAMP_RE = re.compile(r"^(\d+)(?:\.(\d{1,9}))?$")
_UINT_RE = re.compile(r"^\d+$")
_NS_PER_S = 1_000_000_000


class DuplicateConnectionWarning(UserWarning):
    pass


class Direction(enum.Enum):
    A_TO_B = "A"
    B_TO_A = "B"


@dataclass(frozen=True)
class PacketEvent:
    """One data-carrying packet seen on a connection."""

    conn_id: str
    timestamp_ns: int
    direction: Direction
    payload_bytes: int
    dst_port: int

    @property
    def timestamp(self) -> float:
        return self.timestamp_ns / _NS_PER_S

    @classmethod
    def from_seconds(cls, conn_id, timestamp, direction, payload_bytes, dst_port):
        return cls(conn_id, parse_timestamp(str(timestamp)), Direction(direction),
                   payload_bytes, dst_port)


@dataclass(frozen=True)
class ConnectionSummary:
    conn_id: str
    size_bytes: int
    duration_s: float
    packet_count: int | None = None  # unknown for pre-aggregated input
    is_http: bool = False
    dst_ports: frozenset = field(default=frozenset(), compare=False)


@dataclass(frozen=True)
class AduSummary:
    conn_id: str
    adu_index: int
    direction: Direction
    size_bytes: int
    duration_s: float
    is_http: bool = False


def _iter_lines(stream) -> Iterator[tuple[int, str]]:
    """Yield ``(line_number, text)`` for every data line of *stream*."""
    for lineno, raw in enumerate(stream, start=1):
        line = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        yield lineno, line


def _split(line, lineno, expected):
    parts = line.split(",")
    if len(parts) != expected:
        raise ParseError(f"expected {expected} fields, got {len(parts)}",
                         lineno, "record")
    if not parts[0]:
        raise ParseError("empty conn_id", lineno, "conn_id")
    return parts


def _uint(text, lineno, name):
    if not _UINT_RE.match(text):
        raise ParseError(f"invalid {name}", lineno, name)
    return int(text)


def parse_timestamp(text: str) -> int:
    """Convert decimal seconds to integer nanoseconds without rounding."""
    m = _TIMESTAMP_RE.match(text)
    if m is None:
        raise ValueError(f"invalid timestamp {text!r}")
    whole, frac = m.group(1), m.group(2) or ""
    return int(whole) * _NS_PER_S + int(frac.ljust(9, "0"))


def parse_packet_events(stream) -> Iterator[PacketEvent]:
    """Parse the packet-event CSV format.

    The result is a generator, so arbitrarily long traces can be streamed.

    Raises
    ------
    ParseError
        On the first malformed line, naming its line number and field.
    """
    for lineno, line in _iter_lines(stream):
        conn_id, ts, direction, payload, port = _split(line, lineno, 5)
        try:
            ts_ns = parse_timestamp(ts)
        except ValueError:
            raise ParseError("invalid timestamp", lineno, "timestamp") from None
        try:
            direction = Direction(direction)
        except ValueError:
            raise ParseError("invalid direction", lineno, "direction") from None
        payload = _uint(payload, lineno, "payload_bytes")
        port = _uint(port, lineno, "dst_port")
        if port > 65535:
            raise ParseError("invalid dst_port", lineno, "dst_port")
        yield PacketEvent(conn_id, ts_ns, direction, payload, port)


def classify_http(summary: ConnectionSummary, http_ports: Iterable[int]) -> bool:
    """True iff any destination port observed on the connection is an HTTP port."""
    return not summary.dst_ports.isdisjoint(http_ports)


def aggregate_connections(events: Iterable[PacketEvent],
                          http_ports: Iterable[int] = DEFAULT_HTTP_PORTS
                          ) -> list[ConnectionSummary]:
    """Collapse packet events into one summary per connection.

    Events may arrive in any order. Size is the payload total over both
    directions and duration the span between the first and last packet.
    Connections whose duration is zero (including every single-packet
    connection) or that carried no payload at all are dropped. Output is
    sorted by ``conn_id``.
    """
    http_ports = frozenset(http_ports)
    # conn_id -> [first_ns, last_ns, bytes, packets, ports]
    acc: dict[str, list] = {}
    for ev in events:
        st = acc.get(ev.conn_id)
        if st is None:
            acc[ev.conn_id] = [ev.timestamp_ns, ev.timestamp_ns, ev.payload_bytes,
                               1, {ev.dst_port}]
            continue
        if ev.timestamp_ns < st[0]:
            st[0] = ev.timestamp_ns
        elif ev.timestamp_ns > st[1]:
            st[1] = ev.timestamp_ns
        st[2] += ev.payload_bytes
        st[3] += 1
        st[4].add(ev.dst_port)

    out = []
    for conn_id in sorted(acc):
        first, last, size, count, ports = acc[conn_id]
        if last == first or size == 0:
            continue
        summary = ConnectionSummary(conn_id, size, (last - first) / _NS_PER_S,
                                    count, dst_ports=frozenset(ports))
        out.append(replace(summary, is_http=classify_http(summary, http_ports)))
    return out


def _group_sorted(events):
    groups: dict[str, list[PacketEvent]] = defaultdict(list)
    for ev in events:
        groups[ev.conn_id].append(ev)
    for conn_id in sorted(groups):
        evs = groups[conn_id]
        # full key so equal timestamps still order deterministically
        evs.sort(key=lambda e: (e.timestamp_ns, e.direction.value,
                                e.payload_bytes, e.dst_port))
        yield conn_id, evs


def candidate_adus(events: Iterable[PacketEvent],
                   quiet_threshold_s: float = DEFAULT_QUIET_THRESHOLD_S,
                   http_ports: Iterable[int] = DEFAULT_HTTP_PORTS
                   ) -> list[AduSummary]:
    """Split every connection into candidate ADUs, before any filtering.

    A new ADU starts whenever the direction of consecutive data packets
    changes or the gap between them exceeds *quiet_threshold_s*.
    Zero-payload packets are not data packets and are ignored. The result
    keeps zero-duration candidates; ``adu_index`` counts candidates.
    """
    if not quiet_threshold_s > 0:
        raise ConfigError("quiet_threshold_s must be positive")
    quiet_ns = quiet_threshold_s * _NS_PER_S
    http_ports = frozenset(http_ports)
    out = []
    for conn_id, evs in _group_sorted(events):
        is_http = not http_ports.isdisjoint(e.dst_port for e in evs)
        cur = None  # [direction, first_ns, last_ns, bytes]
        idx = 0
        for ev in evs:
            if ev.payload_bytes == 0:
                continue
            if (cur is not None and ev.direction is cur[0]
                    and ev.timestamp_ns - cur[2] <= quiet_ns):
                cur[2] = ev.timestamp_ns
                cur[3] += ev.payload_bytes
                continue
            if cur is not None:
                out.append(AduSummary(conn_id, idx, cur[0], cur[3],
                                      (cur[2] - cur[1]) / _NS_PER_S, is_http))
                idx += 1
            cur = [ev.direction, ev.timestamp_ns, ev.timestamp_ns, ev.payload_bytes]
        if cur is not None:
            out.append(AduSummary(conn_id, idx, cur[0], cur[3],
                                  (cur[2] - cur[1]) / _NS_PER_S, is_http))
    return out


def segment_adus(events: Iterable[PacketEvent],
                 quiet_threshold_s: float = DEFAULT_QUIET_THRESHOLD_S,
                 http_ports: Iterable[int] = DEFAULT_HTTP_PORTS) -> list[AduSummary]:
    """Segment connections into ADUs, dropping zero-duration ones.

    Surviving ADUs are renumbered so ``adu_index`` is consecutive from 0
    within each connection.
    """
    out = []
    next_idx: dict[str, int] = defaultdict(int)
    for adu in candidate_adus(events, quiet_threshold_s, http_ports):
        if adu.duration_s <= 0:
            continue
        idx = next_idx[adu.conn_id]
        next_idx[adu.conn_id] += 1
        out.append(AduSummary(adu.conn_id, idx, adu.direction, adu.size_bytes,
                              adu.duration_s, adu.is_http))
    return out


def _positive_duration(text, lineno):
    try:
        value = float(text)
    except ValueError:
        raise ParseError("invalid duration_s", lineno, "duration_s") from None
    if not math.isfinite(value):
        raise ParseError("invalid duration_s", lineno, "duration_s")
    if value <= 0:
        raise ParseError("non-positive duration", lineno, "duration_s")
    return value


def _positive_size(text, lineno):
    size = _uint(text, lineno, "size_bytes")
    if size == 0:
        raise ParseError("non-positive size", lineno, "size_bytes")
    return size


def _flag(text, lineno):
    if text not in ("0", "1"):
        raise ParseError("invalid is_http", lineno, "is_http")
    return text == "1"


def _dedupe(records, kind):
    table = {}
    for key, rec, lineno in records:
        if key in table:
            warnings.warn(f"duplicate {kind} {key!r} at line {lineno}; last line wins",
                          DuplicateConnectionWarning, stacklevel=3)
        table[key] = rec
    return list(table.values())


def parse_flow_summaries(stream) -> list[ConnectionSummary]:
    """Parse the flow-summary CSV format.

    A conn_id that appears more than once keeps the values of its last line
    (at the position of its first) and triggers a
    :class:`DuplicateConnectionWarning`.
    """
    return _flow_records(_iter_lines(stream))


def _flow_records(lines):
    def records():
        for lineno, line in lines:
            conn_id, size, duration, is_http = _split(line, lineno, 4)
            rec = ConnectionSummary(conn_id, _positive_size(size, lineno),
                                    _positive_duration(duration, lineno),
                                    is_http=_flag(is_http, lineno))
            yield conn_id, rec, lineno

    return _dedupe(records(), "conn_id")


def parse_adu_summaries(stream) -> list[AduSummary]:
    return _adu_records(_iter_lines(stream))


def _adu_records(lines):
    def records():
        for lineno, line in lines:
            conn_id, idx, direction, size, duration, is_http = _split(line, lineno, 6)
            try:
                direction = Direction(direction)
            except ValueError:
                raise ParseError("invalid direction", lineno, "direction") from None
            rec = AduSummary(conn_id, _uint(idx, lineno, "adu_index"), direction,
                             _positive_size(size, lineno),
                             _positive_duration(duration, lineno),
                             _flag(is_http, lineno))
            yield (conn_id, rec.adu_index), rec, lineno

    return _dedupe(records(), "ADU")


def read_summaries(stream) -> list[ConnectionSummary] | list[AduSummary]:
    """Read either flow-summary or ADU CSV, chosen by the first data line's width."""
    lines = list(_iter_lines(stream))
    if not lines:
        return []
    width = lines[0][1].count(",") + 1
    if width == 6:
        return _adu_records(lines)
    if width == 4:
        return _flow_records(lines)
    raise ParseError(f"unrecognised record width {width}", lines[0][0], "record")


def _check_id(conn_id):
    if "," in conn_id or "\n" in conn_id:
        raise ConfigError(f"conn_id {conn_id!r} cannot be written as CSV")
    return conn_id


def format_flow_summary(s: ConnectionSummary) -> str:
    return f"{_check_id(s.conn_id)},{s.size_bytes},{float(s.duration_s)!r},{int(s.is_http)}"


def format_adu_summary(a: AduSummary) -> str:
    return (f"{_check_id(a.conn_id)},{a.adu_index},{a.direction.value},"
            f"{a.size_bytes},{float(a.duration_s)!r},{int(a.is_http)}")


def write_flow_summaries(summaries: Iterable[ConnectionSummary], stream) -> None:
    for s in summaries:
        stream.write(format_flow_summary(s) + "\n")


def write_adu_summaries(adus: Iterable[AduSummary], stream) -> None:
    for a in adus:
        stream.write(format_adu_summary(a) + "\n")


def http_only(summaries: Sequence) -> list:
    return [s for s in summaries if s.is_http]
