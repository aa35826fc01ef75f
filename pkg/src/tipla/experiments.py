"""Experiment orchestration: runs, sweeps, property suites, and their artifacts.

Artifacts per run are a trajectory CSV with header
``step,theta_0,...,theta_{d-1},rescaled_norm_sq,diverged`` (floats as shortest
round-trip decimals, diverged as 0/1) and a summary JSON carrying the config
echo, final theta, last-window statistics, divergence info, W2 to the known
maximizer when there is one, and wall time.  Sweep kinds additionally write a
combined scaling CSV.  Identical configurations produce byte-identical CSVs;
summaries differ only in wall time.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ExperimentConfig, stepsize_warning
from .errors import ConfigurationError
from .metrics import divergence_summary, variance_vs_n_study, w2_to_point
from .potentials import (PotentialModel, build_model, finite_difference_check,
                         probe_coordinate_dissipativity, probe_dissipativity,
                         probe_growth_order, probe_strong_convexity, sample_ball)
from .sampler import RunConfig, Trajectory, run
from .taming import TamingSpec, check_property_1, check_property_2, check_property_3, p_from_growth_order

__all__ = ["run_experiment", "run_property_suite", "write_trajectory_csv",
           "write_summary_json", "trajectory_summary", "SCHEMA_VERSION", "PropertySuiteFailure"]

SCHEMA_VERSION = 1


class PropertySuiteFailure(RuntimeError):
    """Raised after a property suite writes its report with failures in it."""


# ---------------------------------------------------------------------------
# writers
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_trajectory_csv(path, traj: Trajectory, d_theta: int) -> None:
    header = "step," + ",".join(f"theta_{k}" for k in range(d_theta)) + ",rescaled_norm_sq,diverged"
    lines = [header]
    for rec in traj.records:
        theta = ",".join(_fmt(t) for t in rec.theta)
        lines.append(f"{rec.step},{theta},{_fmt(rec.rescaled_norm_sq)},{int(rec.diverged)}")
    Path(path).write_text("\n".join(lines) + "\n")


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_json_safe(float(v)) for v in obj.ravel()]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def write_summary_json(path, summary: dict) -> None:
    Path(path).write_text(json.dumps(_json_safe(summary), indent=2, sort_keys=True) + "\n")


def trajectory_summary(traj: Trajectory, model: PotentialModel, cfg_echo: dict,
                       burn_in_fraction: float = 0.5) -> dict:
    """Final state, last-window moments and divergence info for one trajectory."""
    div = divergence_summary(traj)
    final = traj.final
    summary = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg_echo,
        "sampler": traj.config_echo,
        "final_step": final.step,
        "final_theta": final.theta,
        "divergence": div,
        "wall_time_s": traj.wall_time,
        "last_window": None,
    }
    if not div["diverged"]:
        cutoff = final.step * burn_in_fraction
        window = traj.theta_array()[traj.steps() >= cutoff]
        entry = {
            "fraction": burn_in_fraction,
            "n_records": int(window.shape[0]),
            "mean": window.mean(axis=0),
            "variance": window.var(axis=0, ddof=1) if window.shape[0] >= 2 else None,
        }
        if model.known_maximizer is not None:
            entry["w2_to_maximizer"] = w2_to_point(window, model.known_maximizer)
        summary["last_window"] = entry
    return summary


# ---------------------------------------------------------------------------
# experiment kinds
# ---------------------------------------------------------------------------

def _single_run(cfg: ExperimentConfig, model, out: Path, seed_override, strict, log) -> dict:
    rc = cfg.run_config(seed_override=seed_override, strict=strict)
    _warn_stepsize(cfg, model, strict, log)
    spec = cfg.taming_spec(model, rc.algorithm, rc.lam, rc.n_particles)
    traj = run(rc, model, spec)
    write_trajectory_csv(out / "trajectory.csv", traj, model.d_theta)
    summary = trajectory_summary(traj, model, cfg.canonical(), cfg.burn_in_fraction())
    write_summary_json(out / "summary.json", summary)
    log(f"single_run: {traj.final.step} steps, diverged={summary['divergence']['diverged']}")
    return summary


def _algorithm_comparison(cfg: ExperimentConfig, model, out: Path, seed_override, strict, log) -> dict:
    algos = list(cfg.sweep["algorithms"])
    combined = {"schema_version": SCHEMA_VERSION, "config": cfg.canonical(), "algorithms": {}}
    for algo in algos:
        rc = cfg.run_config(seed_override=seed_override, strict=strict, algorithm=algo)
        _warn_stepsize(cfg, model, strict, log, algorithm=algo)
        spec = cfg.taming_spec(model, algo, rc.lam, rc.n_particles)
        traj = run(rc, model, spec)
        write_trajectory_csv(out / f"{algo}_trajectory.csv", traj, model.d_theta)
        summary = trajectory_summary(traj, model, cfg.canonical(), cfg.burn_in_fraction())
        write_summary_json(out / f"{algo}_summary.json", summary)
        combined["algorithms"][algo] = {
            "divergence": summary["divergence"],
            "final_theta": summary["final_theta"],
            "final_theta_norm": float(np.linalg.norm(np.asarray(traj.final.theta))),
        }
        log(f"{algo}: diverged={summary['divergence']['diverged']} "
            f"first_step={summary['divergence']['first_step']}")
    write_summary_json(out / "comparison_summary.json", combined)
    return combined


def _n_sweep(cfg: ExperimentConfig, model, out: Path, seed_override, strict, log) -> dict:
    rows = []
    combined = {"schema_version": SCHEMA_VERSION, "config": cfg.canonical(), "cells": {}}
    master = int(seed_override if seed_override is not None else cfg.run["seed"])
    children = np.random.SeedSequence(master).spawn(len(cfg.sweep["n_values"]))
    for child, n in zip(children, cfg.sweep["n_values"]):
        seed = int(child.generate_state(1, dtype=np.uint64)[0])
        rc = cfg.run_config(seed_override=seed, strict=strict, n_particles=int(n))
        _warn_stepsize(cfg, model, strict, log, n_particles=int(n))
        spec = cfg.taming_spec(model, rc.algorithm, rc.lam, rc.n_particles)
        traj = run(rc, model, spec)
        write_trajectory_csv(out / f"n{n}_trajectory.csv", traj, model.d_theta)
        summary = trajectory_summary(traj, model, cfg.canonical(), cfg.burn_in_fraction())
        write_summary_json(out / f"n{n}_summary.json", summary)
        combined["cells"][str(n)] = summary["divergence"]
        final_norm = float(np.linalg.norm(np.asarray(traj.final.theta)))
        rows.append((int(n), final_norm, summary["divergence"]["diverged"]))
        log(f"N={n}: diverged={summary['divergence']['diverged']}")
    lines = ["n_particles,final_theta_norm,diverged"]
    lines += [f"{n},{_fmt(v)},{int(d)}" for n, v, d in rows]
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    write_summary_json(out / "sweep_summary.json", combined)
    return combined


def _variance_study(cfg: ExperimentConfig, model, out: Path, seed_override, strict, log) -> dict:
    rc = cfg.run_config(seed_override=seed_override, strict=strict)
    n_values = [int(n) for n in cfg.sweep["n_values"]]
    n_repeats = int(cfg.sweep.get("n_repeats", 50))
    report = variance_vs_n_study(model, rc.algorithm, n_values, n_repeats, rc)
    header = ("n_particles,variance_mean,"
              + ",".join(f"variance_{k}" for k in range(model.d_theta)) + ",n_repeats")
    lines = [header]
    for n in report.n_values:
        if n not in report.variance_means:
            continue
        per = ",".join(_fmt(v) for v in report.variances[n])
        lines.append(f"{n},{_fmt(report.variance_means[n])},{per},{n_repeats}")
    (out / "scaling.csv").write_text("\n".join(lines) + "\n")
    summary = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.canonical(),
        "n_values": report.n_values,
        "n_repeats": n_repeats,
        "variance_means": {str(n): v for n, v in report.variance_means.items()},
        "variances": {str(n): v for n, v in report.variances.items()},
        "fitted_slope": report.fitted_slope,
        "estimator": report.estimator,
        "invalid": report.invalid,
    }
    write_summary_json(out / "study_summary.json", summary)
    slope = "n/a" if report.fitted_slope is None else f"{report.fitted_slope:.4f}"
    log(f"variance study: slope={slope}, invalid={report.invalid or 'none'}")
    return summary


def run_experiment(cfg: ExperimentConfig, out_dir, seed_override: Optional[int] = None,
                   strict: bool = False, quiet: bool = False) -> dict:
    """Execute an experiment configuration; artifacts land in ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log = (lambda msg: None) if quiet else (lambda msg: print(msg, flush=True))
    if cfg.kind == "property_suite":
        report = run_property_suite(models=cfg.suite.get("models"),
                                    kinds=cfg.suite.get("kinds"),
                                    sample_budget=int(cfg.suite.get("sample_budget", 10_000)),
                                    radius=float(cfg.suite.get("radius", 5.0)),
                                    seed=int(cfg.suite.get("suite_seed", 0)))
        write_summary_json(out / "property_report.json", report)
        log(f"property suite: passed={report['passed']}")
        if not report["passed"]:
            raise PropertySuiteFailure("property suite reported failures")
        return report
    model = cfg.build_model()
    if cfg.kind == "single_run":
        return _single_run(cfg, model, out, seed_override, strict, log)
    if cfg.kind == "algorithm_comparison":
        return _algorithm_comparison(cfg, model, out, seed_override, strict, log)
    if cfg.kind == "n_sweep":
        return _n_sweep(cfg, model, out, seed_override, strict, log)
    if cfg.kind == "variance_study":
        return _variance_study(cfg, model, out, seed_override, strict, log)
    raise ConfigurationError(f"unhandled experiment kind {cfg.kind!r}")


def _warn_stepsize(cfg, model, strict, log, algorithm=None, n_particles=None) -> None:
    msg = stepsize_warning(cfg, model, algorithm=algorithm, n_particles=n_particles)
    if msg is None:
        return
    if strict:
        raise ConfigurationError(msg)
    log(f"warning: {msg}")


# ---------------------------------------------------------------------------
# property suite
# ---------------------------------------------------------------------------

_DEFAULT_SUITE_MODELS = ("logistic", "toy", "mixed", "quadratic")


def _suite_models(names) -> dict:
    out = {}
    for name in names:
        if name == "toy":
            out[name] = build_model("toy", m=1, d_theta=2, d_x=2)
        elif name == "logistic":
            out[name] = build_model("logistic", d_x=3, d_y=900, sigma2=0.1,
                                    theta_star=[2.0, 5.0, -1.0], data_seed=0)
        else:
            out[name] = build_model(name, d=2)
    return out


def run_property_suite(models=None, kinds=None, sample_budget: int = 10_000,
                       radius: float = 5.0, seed: int = 0,
                       model_objects: Optional[dict] = None) -> dict:
    """Run every probe and taming-property check; returns a machine-readable report.

    ``model_objects`` lets callers swap in deliberately corrupted models (for
    sabotage testing); otherwise models are built from their identifiers.
    The coordinate-wise taming checks only run for models whose per-coordinate
    dissipativity certificate holds with its side constraint, mirroring what
    the theory requires of that taming kind.
    """
    if model_objects is None:
        model_objects = _suite_models(models if models is not None else _DEFAULT_SUITE_MODELS)
    kinds = tuple(kinds) if kinds is not None else ("uniform", "coordinatewise")
    report = {"schema_version": SCHEMA_VERSION, "sample_budget": sample_budget,
              "radius": radius, "models": {}, "passed": True}

    def record(entry, name, ok, detail):
        entry[name] = {"passed": bool(ok), **detail}
        if not ok:
            report["passed"] = False

    for idx, (name, model) in enumerate(model_objects.items()):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, idx])))
        entry = {}

        mu_est = probe_strong_convexity(model, sample_budget, radius, rng)
        record(entry, "strong_convexity", mu_est >= model.convexity_mu - 1e-9,
               {"estimate": mu_est, "stored_mu": model.convexity_mu})

        k5 = probe_growth_order(model, sample_budget, radius, rng)
        k10 = probe_growth_order(model, sample_budget, 2 * radius, rng)
        ratio_cap = 2.0 ** (model.growth_order_ell + 1.0) * 1.1
        record(entry, "growth", math.isfinite(k5) and k10 / k5 < ratio_cap,
               {"k_estimate": k5, "k_estimate_2r": k10, "ratio_cap": ratio_cap})

        diss = probe_dissipativity(model, sample_budget, radius, rng)
        record(entry, "dissipativity", diss >= -1e-9, {"worst_margin": diss})

        coord = probe_coordinate_dissipativity(model, sample_budget, radius, rng)
        entry["coordinate_dissipativity"] = {
            "a3i_holds": coord.a3i_holds, "a3i_margin": coord.a3i_margin,
            "a3ii_holds": coord.a3ii_holds, "a3ii_margin": coord.a3ii_margin,
            "mu": coord.mu, "rho": coord.rho, "constraint_ok": coord.constraint_ok,
        }
        a3_certified = (model.a3 is not None
                        and ((model.a3.form == "i" and coord.a3i_holds)
                             or (model.a3.form == "ii" and bool(coord.a3ii_holds)
                                 and bool(coord.constraint_ok))))
        entry["coordinate_dissipativity"]["certified"] = a3_certified
        if model.a3 is not None and model.a3.form == "i" and not coord.a3i_holds:
            report["passed"] = False
        if model.a3 is not None and model.a3.form == "ii" and not coord.a3ii_holds:
            report["passed"] = False

        fd_rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 7])))
        point = sample_ball(fd_rng, 1, model.d, radius)[0]
        fd = finite_difference_check(model, point[: model.d_theta], point[model.d_theta :])
        record(entry, "finite_difference", fd.max_rel_error < 1e-4,
               {"max_rel_error": fd.max_rel_error, "cancellation_warning": fd.cancellation_warning})

        growth_k = max(k5, k10)
        entry["taming"] = {}
        for kind in kinds:
            if kind == "coordinatewise" and not a3_certified:
                entry["taming"][kind] = {"skipped": "no per-coordinate dissipativity certificate"}
                continue
            tame_entry = {}
            for lam in (1e-2, 1e-4):
                for n_particles in ((1, 10, 100) if kind == "uniform" else (1,)):
                    spec = TamingSpec(kind, model.convexity_mu, lam, n_particles,
                                      p_from_growth_order(model.growth_order_ell))
                    V = sample_ball(rng, sample_budget, model.d, radius)
                    p1 = check_property_1(model, spec, V)
                    p2 = check_property_2(model, spec, V, growth_k)
                    p3 = check_property_3(model, spec, V)
                    key = f"lambda={lam:g},N={n_particles}"
                    tame_entry[key] = {
                        "property_1": {"passed": p1.passed, "worst_margin": p1.worst},
                        "property_2": {"passed": p2.passed, "worst_ratio": p2.worst, "c1": p2.detail["c1"]},
                        "property_3": {"passed": p3.passed, "worst_margin": p3.worst},
                    }
                    if not (p1.passed and p2.passed and p3.passed):
                        report["passed"] = False
            entry["taming"][kind] = tame_entry

        report["models"][name] = entry
    return report
