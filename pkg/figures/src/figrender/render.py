"""Figure rendering for sampler artifacts.

Four kinds, matching the experiment outputs they read:

* ``trace``          -- parameter coordinates against step, full run
* ``trace_tail``     -- the last ``tail_window`` recorded steps only
* ``scaling_loglog`` -- variance against particle count on log-log axes with
  the fitted slope annotated and a slope -1 guide; the slope is recomputed
  from the CSV and must agree with the summary JSON when one is supplied
* ``comparison``     -- per-algorithm parameter norms on a log scale; runs
  that left the float range end in a terminal marker at their last finite step

Rendering is deterministic (fixed style, no randomness) and strictly
read-only on its inputs.  One figure per output file, vector format by
default.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .io import SchemaError, read_scaling, read_summary, read_trajectory

__all__ = ["FigureSpec", "render", "fit_loglog_slope", "FIGURE_KINDS"]

FIGURE_KINDS = ("trace", "trace_tail", "scaling_loglog", "comparison")

_STYLE = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 120,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "svg.hashsalt": "figrender",
    "font.size": 10,
}


@dataclass
class FigureSpec:
    kind: str
    inputs: list
    output: str
    coordinates: Optional[list] = None
    tail_window: Optional[int] = None
    theta_star: Optional[list] = None
    summary_json: Optional[str] = None
    labels: Optional[list] = None
    title: Optional[str] = None

    @classmethod
    def from_dict(cls, raw: dict) -> "FigureSpec":
        import dataclasses
        unknown = set(raw) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise SchemaError(f"unknown figure-spec key(s) {sorted(unknown)}")
        for key in ("kind", "inputs", "output"):
            if key not in raw:
                raise SchemaError(f"figure spec missing {key!r}")
        spec = cls(**raw)
        if spec.kind not in FIGURE_KINDS:
            raise SchemaError(f"kind must be one of {FIGURE_KINDS}, got {spec.kind!r}")
        return spec


def fit_loglog_slope(n_values, values) -> float:
    """OLS slope of log(values) against log(n_values); mirrors the producer's fit."""
    x = np.log(np.asarray(n_values, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    xc = x - x.mean()
    return float(np.sum(xc * (y - y.mean())) / np.sum(xc * xc))


def _select_coordinates(data, coordinates):
    if coordinates is None:
        return list(range(data.d_theta))
    for c in coordinates:
        if not (0 <= c < data.d_theta):
            raise SchemaError(f"{data.path}: coordinate {c} out of range (d={data.d_theta})")
    return list(coordinates)


def _plot_traces(ax, data, coords, theta_star):
    for c in coords:
        ax.plot(data.steps, data.theta[:, c], lw=0.8, label=f"theta_{c}")
    if theta_star is not None:
        for c in coords:
            if c < len(theta_star):
                ax.axhline(theta_star[c], color="k", ls="--", lw=0.7, alpha=0.6)
    ax.set_xlabel("step")
    ax.set_ylabel("parameter value")
    ax.legend(loc="best", fontsize=8)


def _render_trace(spec: FigureSpec, ax) -> None:
    data = read_trajectory(spec.inputs[0])
    coords = _select_coordinates(data, spec.coordinates)
    _plot_traces(ax, data, coords, spec.theta_star)


def _render_trace_tail(spec: FigureSpec, ax) -> None:
    data = read_trajectory(spec.inputs[0])
    coords = _select_coordinates(data, spec.coordinates)
    window = spec.tail_window if spec.tail_window is not None else len(data.steps)
    if window > len(data.steps):
        warnings.warn(f"tail window {window} exceeds trajectory length "
                      f"{len(data.steps)}; clamping", stacklevel=2)
        window = len(data.steps)
    tail = TailView(data, window)
    _plot_traces(ax, tail, coords, spec.theta_star)


class TailView:
    """Last-w-records view of a trajectory, quacking like TrajectoryData."""

    def __init__(self, data, window):
        self.path = data.path
        self.steps = data.steps[-window:]
        self.theta = data.theta[-window:]
        self.d_theta = data.d_theta


def _render_scaling(spec: FigureSpec, ax) -> float:
    data = read_scaling(spec.inputs[0])
    slope = fit_loglog_slope(data.n_particles, data.variance_mean)
    if spec.summary_json is not None:
        reference = read_summary(spec.summary_json).get("fitted_slope")
        if reference is None or abs(slope - reference) > 1e-9:
            raise SchemaError(
                f"recomputed slope {slope!r} disagrees with summary fitted_slope {reference!r}")
    ax.loglog(data.n_particles, data.variance_mean, "o-", label="variance")
    anchor = data.variance_mean[0] * data.n_particles[0]
    ax.loglog(data.n_particles, anchor / data.n_particles, "k--", lw=0.8, label="slope -1 guide")
    ax.annotate(f"fitted slope = {slope:.4f}", xy=(0.05, 0.08), xycoords="axes fraction")
    ax.set_xlabel("particles N")
    ax.set_ylabel("stationary parameter variance")
    ax.legend(loc="best", fontsize=8)
    return slope


def _render_comparison(spec: FigureSpec, ax) -> None:
    labels = spec.labels or [Path(p).stem.replace("_trajectory", "") for p in spec.inputs]
    if len(labels) != len(spec.inputs):
        raise SchemaError("labels must match inputs one-to-one")
    for path, label in zip(spec.inputs, labels):
        data = read_trajectory(path)
        with np.errstate(over="ignore", invalid="ignore"):
            norms = np.sqrt(np.sum(data.theta**2, axis=1))
        finite = np.isfinite(norms) & (norms > 0)
        ax.plot(data.steps[finite], norms[finite], lw=1.0, label=label)
        if not finite.all() or data.diverged.any():
            # terminal marker at the last finite step of a diverging run
            last = int(np.max(np.nonzero(finite)[0])) if finite.any() else 0
            ax.plot(data.steps[last], norms[last] if finite[last] else 1.0, "x",
                    ms=9, mew=2, color=ax.lines[-1].get_color())
    ax.set_yscale("log")
    ax.set_xlabel("step")
    ax.set_ylabel("|theta|")
    ax.legend(loc="best", fontsize=8)


def render(spec: FigureSpec) -> Path:
    """Render one figure to ``spec.output``; returns the written path."""
    for p in spec.inputs:
        if not Path(p).exists():
            raise SchemaError(f"input does not exist: {p}")
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        try:
            if spec.kind == "trace":
                _render_trace(spec, ax)
            elif spec.kind == "trace_tail":
                _render_trace_tail(spec, ax)
            elif spec.kind == "scaling_loglog":
                _render_scaling(spec, ax)
            elif spec.kind == "comparison":
                _render_comparison(spec, ax)
            if spec.title:
                ax.set_title(spec.title)
            fig.tight_layout()
            # embedded timestamps would break byte-determinism of the output
            metadata = {"Date": None} if out.suffix == ".svg" else (
                {"CreationDate": None} if out.suffix == ".pdf" else None)
            fig.savefig(out, metadata=metadata)
        finally:
            plt.close(fig)
    return out
