"""Figure rendering for uavmec run artifacts.

Consumes only the CSV/JSON files a run writes (trace.csv, positions.csv,
summary.json); no coupling to the simulator's internals.
"""

from .figures import PlotSpec, SchemaError, render, running_mean

__all__ = ["PlotSpec", "SchemaError", "render", "running_mean"]
