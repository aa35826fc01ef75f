"""Wasserstein-2 and moment diagnostics for sampler output.

Multivariate W2 between two clouds is intentionally not computed (it is an
assignment problem); everything downstream needs only the exact distance to a
Dirac and per-coordinate 1-D W2 via the sorted coupling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InputError
from .potentials import PotentialModel
from .sampler import RunConfig, Trajectory, run

__all__ = [
    "w2_empirical_1d",
    "w2_to_point",
    "MomentSummary",
    "estimate_moments",
    "ScalingReport",
    "variance_vs_n_study",
    "divergence_summary",
    "fit_loglog_slope",
]


def w2_empirical_1d(a: np.ndarray, b: np.ndarray, seed: int = 0) -> float:
    """W2 between two empirical 1-D measures via the sorted (comonotone) coupling.

    With unequal sample counts the larger set is resampled with replacement
    down to the smaller count, using the given seed.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise InputError("w2_empirical_1d: empty sample set")
    if a.size != b.size:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
        m = min(a.size, b.size)
        if a.size > m:
            a = rng.choice(a, size=m, replace=True)
        if b.size > m:
            b = rng.choice(b, size=m, replace=True)
    sa = np.sort(a)
    sb = np.sort(b)
    return float(np.sqrt(np.mean((sa - sb) ** 2)))


def w2_to_point(samples: np.ndarray, point) -> float:
    """Exact W2 between an empirical measure and the Dirac at ``point``."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.size == 0:
        raise InputError("w2_to_point: empty sample set")
    point = np.atleast_1d(np.asarray(point, dtype=float))
    if point.shape != (samples.shape[1],):
        raise InputError("w2_to_point: dimension mismatch")
    sq = np.sum((samples - point) ** 2, axis=1)
    return float(np.sqrt(np.mean(sq)))


@dataclass
class MomentSummary:
    mean: np.ndarray
    variance: np.ndarray          # unbiased, ddof=1
    mean_se: np.ndarray
    variance_se: np.ndarray       # Gaussian approximation var*sqrt(2/(M-1))
    norm_sq_mean: float
    norm_4th_mean: float
    n_samples: int


def estimate_moments(samples: np.ndarray) -> MomentSummary:
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    m = samples.shape[0]
    if m < 1:
        raise InputError("estimate_moments: empty sample set")
    mean = samples.mean(axis=0)
    if m >= 2:
        var = samples.var(axis=0, ddof=1)
        var_se = var * math.sqrt(2.0 / (m - 1))
    else:
        var = np.full(samples.shape[1], np.nan)
        var_se = np.full(samples.shape[1], np.nan)
    nrm2 = np.sum(samples**2, axis=1)
    return MomentSummary(mean, var, np.sqrt(var / m) if m >= 2 else np.full_like(mean, np.nan),
                         var_se, float(nrm2.mean()), float((nrm2**2).mean()), m)


def fit_loglog_slope(n_values: Sequence[float], values: Sequence[float]) -> float:
    """Ordinary least squares slope of log(values) against log(n_values)."""
    x = np.log(np.asarray(n_values, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    xc = x - x.mean()
    return float(np.sum(xc * (y - y.mean())) / np.sum(xc * xc))


@dataclass
class ScalingReport:
    n_values: list
    variances: dict               # N -> per-coordinate variance of the final iterate
    variance_means: dict          # N -> coordinate-averaged variance
    fitted_slope: Optional[float]
    estimator: str = "final_iterate"
    invalid: dict = field(default_factory=dict)   # N -> reason


def variance_vs_n_study(model: PotentialModel, algorithm: str, n_values: Sequence[int],
                        n_repeats: int, template: RunConfig) -> ScalingReport:
    """Variance of the final theta iterate across repeat runs, per particle count.

    Each (N, repeat) cell runs with a seed derived from the template seed, so
    the whole study is reproducible and cells could run in any order or in
    parallel.  A diverged repeat invalidates its N with a report entry.
    The slope is fit on coordinate-averaged variances over the valid N.
    """
    n_values = sorted(int(n) for n in n_values)
    root = np.random.SeedSequence(template.seed)
    children = root.spawn(len(n_values) * n_repeats)
    variances = {}
    variance_means = {}
    invalid = {}
    for i, n in enumerate(n_values):
        finals = np.empty((n_repeats, model.d_theta))
        bad = None
        for r in range(n_repeats):
            seed = children[i * n_repeats + r].generate_state(1, dtype=np.uint64)[0]
            cfg = RunConfig(algorithm=algorithm, lam=template.lam, n_particles=n,
                            n_steps=template.n_steps, seed=int(seed), init=template.init,
                            record_every=max(1, template.n_steps), time_scaled=template.time_scaled)
            traj = run(cfg, model)
            if traj.final.diverged:
                bad = f"repeat {r} diverged at step {traj.final.step}"
                break
            finals[r] = traj.final.theta
        if bad is not None:
            invalid[n] = bad
            continue
        var = finals.var(axis=0, ddof=1)
        variances[n] = var
        variance_means[n] = float(var.mean())
    valid = [n for n in n_values if n in variance_means]
    slope = fit_loglog_slope(valid, [variance_means[n] for n in valid]) if len(valid) >= 2 else None
    return ScalingReport(n_values, variances, variance_means, slope, invalid=invalid)


def divergence_summary(traj: Trajectory) -> dict:
    """Scan a trajectory's divergence flags and norms."""
    diverged = any(r.diverged for r in traj.records)
    first = next((r.step for r in traj.records if r.diverged), None)
    norms = [math.sqrt(r.rescaled_norm_sq) for r in traj.records if math.isfinite(r.rescaled_norm_sq)]
    return {
        "diverged": diverged,
        "first_step": first,
        "max_norm": max(norms) if norms else math.inf,
    }
