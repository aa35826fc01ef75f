"""Batch figure rendering for sampler trajectory/summary artifacts."""

from .io import ScalingData, SchemaError, TrajectoryData, read_scaling, read_summary, read_trajectory
from .render import FIGURE_KINDS, FigureSpec, fit_loglog_slope, render

__version__ = "0.1.0"

__all__ = [
    "SchemaError", "TrajectoryData", "ScalingData",
    "read_trajectory", "read_scaling", "read_summary",
    "FIGURE_KINDS", "FigureSpec", "fit_loglog_slope", "render",
    "__version__",
]
