"""From packets to a joint-threshold correlation grid.

Run with ``python demos/01_ingest_and_correlate.py`` from the repository root.

The walk-through aggregates a small packet trace into connections, splits the
connections into application data units, and then moves to a simulated
population large enough for the threshold grid to be meaningful.
"""
from pathlib import Path

import numpy as np

from flowdep.corr import Pair, ThresholdGrid, corr_grid, format_grid_tsv
from flowdep.ingest import aggregate_connections, parse_packet_events, segment_adus
from flowdep.metrics import batch_log_points
from flowdep.truncnorm import DEFAULT_SIMULATION_PARAMS, simulate_loglog_points

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"

# %% A ten-connection trace. Single-packet, zero-span and payload-free
# connections carry no usable (size, duration) pair and are dropped.
with open(DATA / "packets_10conn.csv") as fh:
    events = list(parse_packet_events(fh))
conns = aggregate_connections(events)
print(f"{len(events)} packets -> {len(conns)} connections")
for c in conns:
    print(f"  {c.conn_id}  {c.size_bytes:>5d} B  {c.duration_s:>10.6f} s  http={c.is_http}")

# %% ADUs: a new unit starts when the sender flips or the line goes quiet.
with open(DATA / "packets_adu20.csv") as fh:
    adus = segment_adus(parse_packet_events(fh))
print("\nADUs of a persistent connection")
for a in adus:
    print(f"  #{a.adu_index} {a.direction.value}  {a.size_bytes:>5d} B  {a.duration_s:.3f} s")

# %% The log domain turns rate into a difference.
pts = batch_log_points(conns)
print("\nmax |log_rate - (log_size - log_duration)| =",
      float(np.max(np.abs(pts.log_rate - (pts.log_size - pts.log_duration)))))

# %% A realistic population: 1.4 million simulated log-normal flows.
sim = simulate_loglog_points(DEFAULT_SIMULATION_PARAMS, 1_433_924, seed=0)
grid = corr_grid(sim, ThresholdGrid(), Pair.SIZE_RATE)
print("\nsize-rate correlation by joint threshold (coef|% of population|n)")
print(format_grid_tsv(grid))

coef = grid.coefficients()
print("Raising the duration floor strengthens the size-rate link:",
      " -> ".join(f"{v:.3f}" for v in coef[:, 0]))
print("Raising the size floor weakens it:",
      " -> ".join(f"{v:.3f}" for v in coef[0, :]))
