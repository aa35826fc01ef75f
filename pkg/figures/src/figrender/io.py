"""Readers for the delimited trajectory/scaling artifacts and summary JSON.

Only the documented schemas are consumed:

* trajectory CSV: ``step,theta_0,...,theta_{d-1},rescaled_norm_sq,diverged``
* scaling CSV:    ``n_particles,variance_mean,variance_0,...,n_repeats``
* summary JSON:   free-form dict; ``fitted_slope`` is what the scaling figure
  cross-checks.

Reading is strictly read-only; inputs are never touched beyond open-for-read.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["SchemaError", "TrajectoryData", "ScalingData", "read_trajectory",
           "read_scaling", "read_summary"]

_TRAJ_HEADER = re.compile(r"^step(,theta_\d+)+,rescaled_norm_sq,diverged$")
_SCALING_HEADER = re.compile(r"^n_particles,variance_mean(,variance_\d+)+,n_repeats$")


class SchemaError(ValueError):
    """An input file does not match the documented artifact schema."""


@dataclass
class TrajectoryData:
    path: Path
    steps: np.ndarray          # (n,)
    theta: np.ndarray          # (n, d)
    rescaled_norm_sq: np.ndarray
    diverged: np.ndarray       # bool (n,)

    @property
    def d_theta(self) -> int:
        return self.theta.shape[1]


@dataclass
class ScalingData:
    path: Path
    n_particles: np.ndarray
    variance_mean: np.ndarray
    per_coordinate: np.ndarray  # (n, d)


def read_trajectory(path) -> TrajectoryData:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or not _TRAJ_HEADER.match(lines[0]):
        raise SchemaError(f"{path}: not a trajectory CSV (header {lines[0][:80]!r})")
    d = lines[0].count("theta_")
    rows = [line.split(",") for line in lines[1:] if line]
    if any(len(r) != d + 3 for r in rows):
        raise SchemaError(f"{path}: ragged rows")
    steps = np.array([int(r[0]) for r in rows])
    theta = np.array([[float(x) for x in r[1 : 1 + d]] for r in rows])
    rns = np.array([float(r[d + 1]) for r in rows])
    diverged = np.array([r[d + 2] == "1" for r in rows])
    return TrajectoryData(path, steps, theta, rns, diverged)


def read_scaling(path) -> ScalingData:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or not _SCALING_HEADER.match(lines[0]):
        raise SchemaError(f"{path}: not a scaling CSV (header {lines[0][:80]!r})")
    d = lines[0].count("variance_") - 1
    rows = [line.split(",") for line in lines[1:] if line]
    n = np.array([int(r[0]) for r in rows])
    mean = np.array([float(r[1]) for r in rows])
    per = np.array([[float(x) for x in r[2 : 2 + d]] for r in rows])
    return ScalingData(path, n, mean, per)


def read_summary(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from None
