"""Experiment configuration: TOML parsing, validation and round-trip writing.

A configuration file has four blocks plus an experiment kind::

    kind = "single_run"          # n_sweep | algorithm_comparison | variance_study | property_suite

    [model]
    id = "quadratic"             # logistic | toy | mixed | quadratic
    d = 2                        # model-specific parameters follow

    [run]
    algorithm = "tipla_c"
    lambda = 1e-3
    n_particles = 100
    n_steps = 1000
    seed = 1

    [run.init]
    theta0 = [0.0, 0.0]
    particle_init = "gaussian"
    mean = "zero"
    cov_scale = 1.0

    [taming]
    kind = "coordinatewise"      # none | uniform | coordinatewise

    [output]
    dir = "out"

Minimal flat files (model = "...", algorithm = "...", N = ..., lambda = ...,
steps = ..., seed = ...) are accepted and normalized into the same structure.
Unknown keys are rejected with their path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import tomli

from .errors import ConfigurationError
from .potentials import PotentialModel, build_model
from .sampler import ALGORITHMS, InitPolicy, RunConfig, default_taming_spec, stepsize_limit
from .taming import TAMING_KINDS, TamingSpec, p_from_growth_order

__all__ = ["ExperimentConfig", "parse_config", "parse_config_text", "write_config", "EXPERIMENT_KINDS"]

EXPERIMENT_KINDS = ("single_run", "n_sweep", "algorithm_comparison", "variance_study", "property_suite")

_MODEL_KEYS = {"id", "d", "d_theta", "d_x", "m", "sigma2", "d_y", "theta_star", "data_seed", "data_csv"}
_RUN_KEYS = {"algorithm", "lambda", "n_particles", "n_steps", "seed", "record_every",
             "time_scaled", "stop_on_divergence", "init"}
_INIT_KEYS = {"theta0", "particle_init", "mean", "cov_scale", "sigma2", "value"}
_TAMING_KEYS = {"kind", "mu", "p_exponent"}
_OUTPUT_KEYS = {"dir", "formats", "burn_in_fraction"}
_SWEEP_KEYS = {"n_values", "n_repeats", "algorithms"}
_SUITE_KEYS = {"models", "kinds", "sample_budget", "radius", "suite_seed"}
_FLAT_KEYS = {"model": ("model", "id"), "algorithm": ("run", "algorithm"), "N": ("run", "n_particles"),
              "lambda": ("run", "lambda"), "steps": ("run", "n_steps"), "seed": ("run", "seed")}


@dataclass
class ExperimentConfig:
    kind: str
    model: dict
    run: dict
    taming: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    suite: dict = field(default_factory=dict)

    # -- materialization ----------------------------------------------------

    def build_model(self) -> PotentialModel:
        params = {k: v for k, v in self.model.items() if k != "id"}
        return build_model(self.model["id"], **params)

    def init_policy(self) -> InitPolicy:
        raw = dict(self.run.get("init", {}))
        return InitPolicy(
            theta0=raw.get("theta0", "zeros"),
            particle_init=raw.get("particle_init", "gaussian"),
            mean=raw.get("mean", "theta0"),
            cov_scale=raw.get("cov_scale", 1.0),
            sigma2=raw.get("sigma2"),
            value=raw.get("value"),
        )

    def run_config(self, seed_override: Optional[int] = None, strict: bool = False,
                   algorithm: Optional[str] = None, n_particles: Optional[int] = None) -> RunConfig:
        r = self.run
        return RunConfig(
            algorithm=algorithm or r["algorithm"],
            lam=float(r["lambda"]),
            n_particles=int(n_particles if n_particles is not None else r["n_particles"]),
            n_steps=int(r["n_steps"]),
            seed=int(seed_override if seed_override is not None else r["seed"]),
            init=self.init_policy(),
            record_every=int(r.get("record_every", 1)),
            time_scaled=bool(r.get("time_scaled", True)),
            stop_on_divergence=bool(r.get("stop_on_divergence", False)),
            strict=strict,
        )

    def taming_spec(self, model: PotentialModel, algorithm: str, lam: float,
                    n_particles: int) -> TamingSpec:
        base = default_taming_spec(algorithm, model, lam, n_particles)
        kind = self.taming.get("kind", base.kind)
        mu = float(self.taming.get("mu", model.convexity_mu))
        if kind == "none":
            return TamingSpec("none", mu, lam)
        p = self.taming.get("p_exponent")
        p = float(p) if p is not None else p_from_growth_order(model.growth_order_ell)
        if kind == "uniform":
            return TamingSpec("uniform", mu, lam, n_particles, p)
        return TamingSpec("coordinatewise", mu, lam)

    def burn_in_fraction(self) -> float:
        return float(self.output.get("burn_in_fraction", 0.5))

    def canonical(self) -> dict:
        out = {"kind": self.kind, "model": dict(self.model), "run": dict(self.run)}
        out["run"]["init"] = dict(self.run.get("init", {}))
        if self.taming:
            out["taming"] = dict(self.taming)
        if self.output:
            out["output"] = dict(self.output)
        if self.sweep:
            out["sweep"] = dict(self.sweep)
        if self.suite:
            out["suite"] = dict(self.suite)
        return out


def _reject_unknown(table: dict, allowed: set, path: str) -> None:
    unknown = set(table) - allowed
    if unknown:
        raise ConfigurationError(f"unknown key(s) {sorted(unknown)} in [{path}]")


def _validate(cfg: ExperimentConfig) -> ExperimentConfig:
    if cfg.kind not in EXPERIMENT_KINDS:
        raise ConfigurationError(f"kind: must be one of {EXPERIMENT_KINDS}, got {cfg.kind!r}")
    _reject_unknown(cfg.model, _MODEL_KEYS, "model")
    _reject_unknown(cfg.run, _RUN_KEYS, "run")
    _reject_unknown(cfg.run.get("init", {}), _INIT_KEYS, "run.init")
    _reject_unknown(cfg.taming, _TAMING_KEYS, "taming")
    _reject_unknown(cfg.output, _OUTPUT_KEYS, "output")
    _reject_unknown(cfg.sweep, _SWEEP_KEYS, "sweep")
    _reject_unknown(cfg.suite, _SUITE_KEYS, "suite")

    if cfg.kind == "property_suite":
        return cfg

    if "id" not in cfg.model:
        raise ConfigurationError("model.id: required")
    for key in ("algorithm", "lambda", "n_particles", "n_steps", "seed"):
        if key not in cfg.run:
            raise ConfigurationError(f"run.{key}: required")
    if cfg.run["algorithm"] not in ALGORITHMS:
        raise ConfigurationError(f"run.algorithm: must be one of {ALGORITHMS}")
    if not float(cfg.run["lambda"]) > 0:
        raise ConfigurationError("run.lambda: must be positive")
    if int(cfg.run["n_particles"]) < 1:
        raise ConfigurationError("run.n_particles: must be >= 1")
    if int(cfg.run["n_steps"]) < 0:
        raise ConfigurationError("run.n_steps: must be >= 0")
    kind = cfg.taming.get("kind")
    if kind is not None and kind not in TAMING_KINDS:
        raise ConfigurationError(f"taming.kind: must be one of {TAMING_KINDS}")
    if cfg.kind == "variance_study" and "n_values" not in cfg.sweep:
        raise ConfigurationError("sweep.n_values: required for variance_study")
    if cfg.kind == "n_sweep" and "n_values" not in cfg.sweep:
        raise ConfigurationError("sweep.n_values: required for n_sweep")
    if cfg.kind == "algorithm_comparison" and "algorithms" not in cfg.sweep:
        raise ConfigurationError("sweep.algorithms: required for algorithm_comparison")
    return cfg


def stepsize_warning(cfg: ExperimentConfig, model: PotentialModel,
                     algorithm: Optional[str] = None, n_particles: Optional[int] = None) -> Optional[str]:
    """Theorem stepsize check; a violation is a warning unless running strict."""
    algorithm = algorithm or cfg.run["algorithm"]
    n = int(n_particles if n_particles is not None else cfg.run["n_particles"])
    lam = float(cfg.run["lambda"])
    limit = stepsize_limit(algorithm, model, n)
    if limit is not None and lam >= limit:
        return f"run.lambda: {lam} >= theoretical stepsize limit {limit:.6g} for {algorithm}"
    return None


def parse_config_text(text: str) -> ExperimentConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigurationError(f"TOML syntax error: {exc}") from None

    # flat shorthand keys fold into the nested form
    nested = {"model": dict(raw.pop("model", {}) if isinstance(raw.get("model"), dict) else {}),
              "run": dict(raw.pop("run", {})),
              "taming": dict(raw.pop("taming", {})),
              "output": dict(raw.pop("output", {})),
              "sweep": dict(raw.pop("sweep", {})),
              "suite": dict(raw.pop("suite", {}))}
    kind = raw.pop("kind", "single_run")
    for key, (table, name) in _FLAT_KEYS.items():
        if key in raw:
            nested[table][name] = raw.pop(key)
    if raw:
        raise ConfigurationError(f"unknown top-level key(s) {sorted(raw)}")
    cfg = ExperimentConfig(kind=kind, model=nested["model"], run=nested["run"],
                           taming=nested["taming"], output=nested["output"],
                           sweep=nested["sweep"], suite=nested["suite"])
    return _validate(cfg)


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    return parse_config_text(path.read_text())


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        if isinstance(v, float) and not math.isfinite(v):
            raise ConfigurationError("cannot serialize non-finite float")
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k} = {_toml_value(x)}" for k, x in v.items()) + "}"
    raise ConfigurationError(f"cannot serialize {type(v).__name__} to TOML")


def write_config(cfg: ExperimentConfig, path) -> None:
    """Write the canonical TOML form; parse(write(cfg)) reproduces cfg."""
    lines = [f'kind = "{cfg.kind}"', ""]
    for name in ("model", "run", "taming", "output", "sweep", "suite"):
        table = getattr(cfg, name)
        if not table:
            continue
        lines.append(f"[{name}]")
        sub = {}
        for k, v in table.items():
            if isinstance(v, dict) and name == "run" and k == "init":
                sub[k] = v
                continue
            lines.append(f"{k} = {_toml_value(v)}")
        for k, v in sub.items():
            lines.append("")
            lines.append(f"[{name}.{k}]")
            for kk, vv in v.items():
                lines.append(f"{kk} = {_toml_value(vv)}")
        lines.append("")
    Path(path).write_text("\n".join(lines))
