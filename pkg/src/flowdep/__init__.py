"""Size, duration and rate dependence analysis for Internet flows.

Submodules
----------
ingest     packet events -> connection and ADU summaries, CSV formats
metrics    log10 analysis points
corr       Pearson correlation over joint size/duration threshold grids
truncnorm  truncated bivariate normal correlation, simulation, Monte Carlo
extremal   ICRT, polar coordinates and the extremal dependence measure
cli        the ``flowdep`` command
"""
__version__ = "0.1.0"
