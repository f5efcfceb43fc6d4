"""Do large sizes and large rates arrive together?

Run with ``python demos/03_extremal_dependence.py``.

Correlation says little about the extremes of heavy-tailed data. The extremal
dependence measure (EDM) looks only at the largest points after a rank
transform and asks whether they sit near the diagonal or hug the axes.
"""
import numpy as np

from flowdep.extremal import edm_curve, format_curve_tsv
from flowdep.truncnorm import DEFAULT_SIMULATION_PARAMS, simulate_loglog_points

rng = np.random.default_rng(3)
n = 100_000


def pareto(size):
    return rng.pareto(1.0, size) + 1.0


def show(label, x, y):
    curve = edm_curve(x, y)
    print(f"\n{label}")
    print(format_curve_tsv(curve), end="")
    print("reading at 5%:", curve.annotations()[curve.fractions.index(0.05)])


# %% Three reference shapes.
x = pareto(n)
show("comonotone (y = x)", x, x)
show("independent Pareto pair", pareto(n), pareto(n))
big, small = pareto(n), rng.uniform(0.0, 1.0, n)
first = np.arange(n) % 2 == 0
show("axis hugging", np.where(first, big, small), np.where(first, small, big))

# %% The simulated flow population in the original (not log) scale. The rank
# transform makes the result identical for any monotone rescaling.
pts = simulate_loglog_points(DEFAULT_SIMULATION_PARAMS, n, seed=4)
show("simulated size vs rate", 10.0 ** pts.log_size, 10.0 ** pts.log_rate)
