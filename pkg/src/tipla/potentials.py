"""Potential models: joint negative log-densities U(theta, x) with analytic gradients.

Four built-in models are provided:

* ``logistic``   -- Bayesian logistic regression with a thin-tailed (quartic)
  generalized-Gaussian prior on the latent regression coefficients.
* ``toy``        -- higher-order polynomial potential of order ``4m`` whose
  maximizer is the origin; drives the superlinear-stability experiments.
* ``mixed``      -- the ``m=1`` polynomial potential with an extra theta.x cross
  term, which breaks per-coordinate dissipativity in its plain form.
* ``quadratic``  -- an analytically solvable Gaussian diagnostic whose
  theta-marginal of the N-particle invariant measure has per-coordinate
  variance exactly 1/N.

Every model stores its convexity constant mu and polynomial growth order ell
as metadata; the probes in this module validate those constants numerically
but never estimate them from data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import ConfigurationError, InputError

__all__ = [
    "GradientValue",
    "PotentialModel",
    "LogisticRegressionModel",
    "HigherOrderToyModel",
    "MixedTermToyModel",
    "QuadraticDiagnosticModel",
    "A3Certificate",
    "build_model",
    "eval_gradient",
    "logistic_regression_gradient",
    "higher_order_toy_gradient",
    "mixed_term_toy_gradient",
    "quadratic_diagnostic_gradient",
    "finite_difference_check",
    "probe_strong_convexity",
    "probe_growth_order",
    "probe_dissipativity",
    "probe_coordinate_dissipativity",
    "sample_ball",
    "make_logistic_data",
    "sample_generalized_gaussian",
]


class GradientValue(NamedTuple):
    """Joint gradient of U: the theta block and the x block."""

    g_theta: np.ndarray
    g_x: np.ndarray


@dataclass(frozen=True)
class A3Certificate:
    """Per-coordinate dissipativity constants a model is certified with.

    ``form`` is "i" for the plain per-coordinate condition
    h_i(v) v_i >= (mu/2) v_i^2 - |h0_i|^2/(2 mu), or "ii" for the relaxed pair
    form with cross-coefficient rho (requires d_theta == d_x).  ``constraint_ok``
    records whether the side condition 4 rho < mu of the relaxed form holds.
    """

    form: str
    mu: float
    rho: float = 0.0

    @property
    def constraint_ok(self) -> bool:
        if self.form == "ii":
            return 4.0 * self.rho < self.mu
        return True


class PotentialModel:
    """Base class: metadata plus vectorized potential/gradient evaluation.

    Subclasses implement ``potential_pairs`` and ``grad_pairs`` operating on
    row-paired batches ``Theta (n, d_theta)`` / ``X (n, d_x)``.  All methods are
    pure functions of their inputs and safe to call concurrently.
    """

    name: str = "abstract"
    d_theta: int
    d_x: int
    growth_order_ell: float
    convexity_mu: float
    known_maximizer: Optional[np.ndarray] = None
    a3: Optional[A3Certificate] = None
    model_params: dict

    def potential_pairs(self, Theta: np.ndarray, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grad_pairs(self, Theta: np.ndarray, X: np.ndarray) -> GradientValue:
        raise NotImplementedError

    # -- conveniences -------------------------------------------------------

    @property
    def d(self) -> int:
        return self.d_theta + self.d_x

    def potential(self, theta: np.ndarray, x: np.ndarray) -> float:
        theta = np.asarray(theta, dtype=float)
        x = np.asarray(x, dtype=float)
        return float(self.potential_pairs(theta[None, :], x[None, :])[0])

    def gradient(self, theta: np.ndarray, x: np.ndarray) -> GradientValue:
        theta = np.asarray(theta, dtype=float)
        x = np.asarray(x, dtype=float)
        gt, gx = self.grad_pairs(theta[None, :], x[None, :])
        return GradientValue(gt[0], gx[0])

    def grad_joint(self, V: np.ndarray) -> np.ndarray:
        """Gradient on stacked joint vectors ``V (n, d_theta + d_x)``."""
        V = np.atleast_2d(np.asarray(V, dtype=float))
        gt, gx = self.grad_pairs(V[:, : self.d_theta], V[:, self.d_theta :])
        return np.concatenate([gt, gx], axis=1)

    @property
    def grad_zero_norm(self) -> float:
        """|h(0)|, the joint gradient norm at the origin."""
        g = self.grad_joint(np.zeros((1, self.d)))
        return float(np.sqrt(np.sum(g * g)))

    @property
    def dissipativity_offset(self) -> float:
        """b = |h(0)|^2 / (2 mu) in the dissipativity bound <v,h(v)> >= mu/2 |v|^2 - b."""
        return self.grad_zero_norm**2 / (2.0 * self.convexity_mu)

    def _check_pair_shapes(self, theta, x) -> None:
        theta = np.asarray(theta)
        x = np.asarray(x)
        if theta.shape != (self.d_theta,) or x.shape != (self.d_x,):
            raise ConfigurationError(
                f"{self.name}: expected shapes ({self.d_theta},)/({self.d_x},), "
                f"got {theta.shape}/{x.shape}"
            )


class LogisticRegressionModel(PotentialModel):
    """Logistic regression with a quartic-tailed prior centered at theta.

    U(theta, x) = (1/sigma^4) sum_k (x_k - theta_k)^4
                + (1/sigma^2) sum_k (x_k - theta_k)^2
                - sum_j [ y_j log s(u_j.x) + (1 - y_j) log(1 - s(u_j.x)) ]

    with s the logistic function, covariates ``u_j`` and binary labels ``y_j``.
    """

    name = "logistic"

    def __init__(self, covariates: np.ndarray, labels: np.ndarray, sigma2: float,
                 theta_star: Optional[np.ndarray] = None):
        if sigma2 <= 0:
            raise ConfigurationError("logistic: sigma2 must be positive")
        covariates = np.asarray(covariates, dtype=float)
        labels = np.asarray(labels, dtype=float)
        if covariates.ndim != 2 or labels.shape != (covariates.shape[0],):
            raise ConfigurationError("logistic: covariates (d_y, d_x) and labels (d_y,) must match")
        if not np.all((labels == 0) | (labels == 1)):
            raise ConfigurationError("logistic: labels must be binary")
        self.covariates = covariates
        self.labels = labels
        self.sigma2 = float(sigma2)
        self.d_x = covariates.shape[1]
        self.d_theta = self.d_x
        # Remark on growth: the prior contributes cubic gradient growth, so ell = 2.
        self.growth_order_ell = 2.0
        self.convexity_mu = 2.0 / self.sigma2
        self.known_maximizer = None if theta_star is None else np.asarray(theta_star, dtype=float)
        self.a3 = None  # the data term breaks per-coordinate dissipativity
        self.model_params = {"sigma2": self.sigma2, "d_y": covariates.shape[0]}

    @staticmethod
    def _sigmoid(t: np.ndarray) -> np.ndarray:
        return 0.5 * (1.0 + np.tanh(0.5 * t))

    def potential_pairs(self, Theta, X):
        r = X - Theta
        prior = np.sum(r**4, axis=1) / self.sigma2**2 + np.sum(r**2, axis=1) / self.sigma2
        T = X @ self.covariates.T  # (n, d_y)
        # -y log s(t) - (1-y) log s(-t), written with logaddexp for stability
        data = np.sum(self.labels * np.logaddexp(0.0, -T) + (1.0 - self.labels) * np.logaddexp(0.0, T), axis=1)
        return prior + data

    def grad_pairs(self, Theta, X):
        r = X - Theta
        prior = (4.0 / self.sigma2**2) * r**3 + (2.0 / self.sigma2) * r
        S = self._sigmoid(X @ self.covariates.T)
        g_x = prior + (S - self.labels) @ self.covariates
        return GradientValue(-prior, g_x)


class HigherOrderToyModel(PotentialModel):
    """Polynomial potential of order 4m plus its quartic (m=1) companion.

    U(theta, x) = |x|^(4m) + (|x|^(2m)+1)(|theta|^(2m)+1) + |theta|^(4m)
                + |x|^4   + (|x|^2+1)(|theta|^2+1)        + |theta|^4
    """

    name = "toy"

    def __init__(self, m: int = 1, d_theta: int = 2, d_x: int = 2):
        if m < 1 or int(m) != m:
            raise ConfigurationError("toy: m must be a positive integer")
        self.m = int(m)
        self.d_theta = int(d_theta)
        self.d_x = int(d_x)
        self.growth_order_ell = 4.0 * self.m - 2.0
        self.convexity_mu = 2.0
        self.known_maximizer = np.zeros(self.d_theta)
        # Per-coordinate dissipativity holds with coefficient 2 on the square, i.e. mu = 4.
        self.a3 = A3Certificate(form="i", mu=4.0)
        self.model_params = {"m": self.m}

    def potential_pairs(self, Theta, X):
        rx = np.sum(X * X, axis=1)
        rt = np.sum(Theta * Theta, axis=1)
        m = self.m
        return (rx**(2 * m) + (rx**m + 1.0) * (rt**m + 1.0) + rt**(2 * m)
                + rx**2 + (rx + 1.0) * (rt + 1.0) + rt**2)

    def grad_pairs(self, Theta, X):
        rx = np.sum(X * X, axis=1)
        rt = np.sum(Theta * Theta, axis=1)
        m = float(self.m)
        cx = 4.0 * m * rx ** (2.0 * m - 1.0) + 2.0 * m * (rt**m + 1.0) * rx ** (m - 1.0) \
            + 4.0 * rx + 2.0 * (rt + 1.0)
        ct = 4.0 * m * rt ** (2.0 * m - 1.0) + 2.0 * m * (rx**m + 1.0) * rt ** (m - 1.0) \
            + 4.0 * rt + 2.0 * (rx + 1.0)
        return GradientValue(ct[:, None] * Theta, cx[:, None] * X)


class MixedTermToyModel(PotentialModel):
    """The m=1 polynomial potential with an additional theta.x cross term.

    U(theta, x) = theta.x + |x|^4 + (|x|^2+1)(|theta|^2+1) + |theta|^4.
    Plain per-coordinate dissipativity fails; the relaxed pair form holds
    with (mu, rho) = (3, 1/2).
    """

    name = "mixed"

    def __init__(self, d: int = 2):
        self.d_theta = int(d)
        self.d_x = int(d)
        self.growth_order_ell = 3.0
        self.convexity_mu = 1.0
        self.known_maximizer = None
        self.a3 = A3Certificate(form="ii", mu=3.0, rho=0.5)
        self.model_params = {}

    def potential_pairs(self, Theta, X):
        rx = np.sum(X * X, axis=1)
        rt = np.sum(Theta * Theta, axis=1)
        cross = np.sum(Theta * X, axis=1)
        return cross + rx**2 + (rx + 1.0) * (rt + 1.0) + rt**2

    def grad_pairs(self, Theta, X):
        rx = np.sum(X * X, axis=1)
        rt = np.sum(Theta * Theta, axis=1)
        g_x = (4.0 * rx + 2.0 * (rt + 1.0))[:, None] * X + Theta
        g_t = (4.0 * rt + 2.0 * (rx + 1.0))[:, None] * Theta + X
        return GradientValue(g_t, g_x)


class QuadraticDiagnosticModel(PotentialModel):
    """Analytically solvable diagnostic: U(theta, x) = |x - theta|^2/2 + |theta|^2/2.

    The theta-marginal of the N-particle invariant measure is Gaussian with
    per-coordinate variance 1/N, which grounds the invariant-measure and
    variance-scaling checks.  The strong-convexity constant is the smallest
    eigenvalue (3 - sqrt(5))/2 of the per-coordinate Hessian [[2,-1],[-1,1]].
    """

    name = "quadratic"

    def __init__(self, d: int = 2):
        self.d_theta = int(d)
        self.d_x = int(d)
        self.growth_order_ell = 1.0  # smallest admissible choice; taming is a safety net here
        self.convexity_mu = (3.0 - np.sqrt(5.0)) / 2.0
        self.known_maximizer = np.zeros(self.d_theta)
        # Best Young-inequality constants; note 4*rho >= mu, so the side constraint fails.
        self.a3 = A3Certificate(form="ii", mu=1.0, rho=0.5)
        self.model_params = {}

    def potential_pairs(self, Theta, X):
        r = X - Theta
        return 0.5 * np.sum(r * r, axis=1) + 0.5 * np.sum(Theta * Theta, axis=1)

    def grad_pairs(self, Theta, X):
        r = X - Theta
        return GradientValue(Theta - r, r)


# ---------------------------------------------------------------------------
# registry / functional front-ends
# ---------------------------------------------------------------------------

def make_logistic_data(d_x: int, d_y: int, sigma2: float, theta_star: np.ndarray,
                       seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Synthesize covariates and labels for the logistic model.

    Covariates are uniform on (-1, 1)^d_x.  Labels are self-consistent: one
    latent x is drawn from the quartic prior centered at theta_star, then
    y_j ~ Bernoulli(s(u_j . x)).
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    theta_star = np.asarray(theta_star, dtype=float)
    covariates = rng.uniform(-1.0, 1.0, size=(d_y, d_x))
    x_latent = sample_generalized_gaussian(rng, theta_star, sigma2, (d_x,))
    probs = LogisticRegressionModel._sigmoid(covariates @ x_latent)
    labels = (rng.uniform(size=d_y) < probs).astype(float)
    return covariates, labels


def sample_generalized_gaussian(rng: np.random.Generator, mean: np.ndarray, sigma2: float,
                                shape: tuple) -> np.ndarray:
    """Exact rejection sampler for the density ~ exp(-z^4/sigma^4 - z^2/sigma^2) + mean.

    Proposal is N(0, sigma^2/2); acceptance probability exp(-z^4/sigma^4).
    Coordinates are independent because the prior factorizes.
    """
    if sigma2 <= 0:
        raise ConfigurationError("sigma2 must be positive")
    n = int(np.prod(shape))
    out = np.empty(n)
    filled = 0
    scale = np.sqrt(sigma2 / 2.0)
    while filled < n:
        todo = n - filled
        z = rng.standard_normal(todo) * scale
        accept = rng.uniform(size=todo) < np.exp(-(z**4) / sigma2**2)
        k = int(np.count_nonzero(accept))
        out[filled : filled + k] = z[accept]
        filled += k
    return out.reshape(shape) + np.broadcast_to(np.asarray(mean, dtype=float), shape)


def build_model(identifier: str, **params) -> PotentialModel:
    """Construct a built-in model from its string identifier and parameters."""
    if identifier == "logistic":
        sigma2 = params.get("sigma2", 0.1)
        if "covariates" in params:
            cov, lab = params["covariates"], params["labels"]
        elif "data_csv" in params and params["data_csv"] is not None:
            raw = np.loadtxt(params["data_csv"], delimiter=",", ndmin=2)
            cov, lab = raw[:, :-1], raw[:, -1]
        else:
            d_x = params.get("d_x", params.get("d", 3))
            d_y = params.get("d_y", 900)
            theta_star = np.asarray(params.get("theta_star", [2.0, 5.0, -1.0]), dtype=float)
            if theta_star.shape != (d_x,):
                raise ConfigurationError("logistic: theta_star length must equal d_x")
            cov, lab = make_logistic_data(d_x, d_y, sigma2, theta_star, seed=params.get("data_seed", 0))
            return LogisticRegressionModel(cov, lab, sigma2, theta_star=theta_star)
        return LogisticRegressionModel(cov, lab, sigma2, theta_star=params.get("theta_star"))
    if identifier == "toy":
        return HigherOrderToyModel(m=params.get("m", 1),
                                   d_theta=params.get("d_theta", params.get("d", 2)),
                                   d_x=params.get("d_x", params.get("d", 2)))
    if identifier == "mixed":
        return MixedTermToyModel(d=params.get("d", params.get("d_theta", 2)))
    if identifier == "quadratic":
        return QuadraticDiagnosticModel(d=params.get("d", params.get("d_theta", 2)))
    raise ConfigurationError(f"unknown model identifier {identifier!r}")


def eval_gradient(model: PotentialModel, theta, x) -> GradientValue:
    """Validated single-pair gradient evaluation."""
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    model._check_pair_shapes(theta, x)
    if not (np.all(np.isfinite(theta)) and np.all(np.isfinite(x))):
        raise InputError("eval_gradient: non-finite input")
    return model.gradient(theta, x)


def logistic_regression_gradient(params: LogisticRegressionModel, theta, x) -> GradientValue:
    return eval_gradient(params, theta, x)


def higher_order_toy_gradient(m: int, theta, x) -> GradientValue:
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    return eval_gradient(HigherOrderToyModel(m=m, d_theta=len(theta), d_x=len(x)), theta, x)


def mixed_term_toy_gradient(theta, x) -> GradientValue:
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    if len(theta) != len(x):
        raise ConfigurationError("mixed: cross term requires d_theta == d_x")
    return eval_gradient(MixedTermToyModel(d=len(theta)), theta, x)


def quadratic_diagnostic_gradient(theta, x) -> GradientValue:
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    if len(theta) != len(x):
        raise ConfigurationError("quadratic: requires d_theta == d_x")
    return eval_gradient(QuadraticDiagnosticModel(d=len(theta)), theta, x)


# ---------------------------------------------------------------------------
# numerical probes
# ---------------------------------------------------------------------------

def sample_ball(rng: np.random.Generator, n: int, d: int, radius: float) -> np.ndarray:
    """n points uniform in the d-ball of the given radius."""
    z = rng.standard_normal((n, d))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    r = radius * rng.uniform(size=(n, 1)) ** (1.0 / d)
    return z * r


@dataclass
class FiniteDifferenceReport:
    max_rel_error: float
    cancellation_warning: bool
    per_step_errors: dict = field(default_factory=dict)


def finite_difference_check(model: PotentialModel, theta, x,
                            h_steps: tuple = (1e-5, 1e-6)) -> FiniteDifferenceReport:
    """Compare the analytic gradient against central differences of U.

    Runs every step size, keeps the best, and flags cancellation when the
    smaller step is worse than the larger one.  Relative error uses
    max(1, |analytic|) in the denominator to avoid blowup near zero gradients.
    """
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)
    model._check_pair_shapes(theta, x)
    v = np.concatenate([theta, x])
    d = v.size
    gt, gx = model.gradient(theta, x)
    analytic = np.concatenate([gt, gx])

    errors = {}
    for h in h_steps:
        Vp = np.repeat(v[None, :], d, axis=0) + h * np.eye(d)
        Vm = np.repeat(v[None, :], d, axis=0) - h * np.eye(d)
        up = model.potential_pairs(Vp[:, : model.d_theta], Vp[:, model.d_theta :])
        um = model.potential_pairs(Vm[:, : model.d_theta], Vm[:, model.d_theta :])
        fd = (up - um) / (2.0 * h)
        rel = np.abs(fd - analytic) / np.maximum(1.0, np.abs(analytic))
        errors[h] = float(np.max(rel))
    ordered = sorted(errors)  # ascending step size
    warn = len(ordered) >= 2 and errors[ordered[0]] > errors[ordered[-1]]
    return FiniteDifferenceReport(min(errors.values()), warn, errors)


def probe_strong_convexity(model: PotentialModel, n_pairs: int, radius: float,
                           rng: np.random.Generator, scales: tuple = (1.0, 0.1)) -> float:
    """Lower bound estimate of <v - v', h(v) - h(v')> / |v - v'|^2 over random pairs.

    Pairs are sampled uniformly in balls at ``radius * scale`` for each scale;
    the small-scale pass is what gives the probe power against inflated
    constants, since the convexity modulus of the polynomial models binds near
    the origin.
    """
    if n_pairs < 1:
        raise InputError("n_pairs must be >= 1")
    est = np.inf
    for scale in scales:
        remaining = n_pairs // len(scales) if scale != scales[0] else n_pairs - (len(scales) - 1) * (n_pairs // len(scales))
        r = radius * scale
        while remaining > 0:
            chunk = min(remaining, 4096)
            V = sample_ball(rng, chunk, model.d, r)
            W = sample_ball(rng, chunk, model.d, r)
            diff = V - W
            nrm2 = np.sum(diff * diff, axis=1)
            ok = nrm2 > 1e-24  # degenerate pairs are dropped, never divided by
            if not np.any(ok):
                continue
            gdiff = model.grad_joint(V[ok]) - model.grad_joint(W[ok])
            ratios = np.sum(diff[ok] * gdiff, axis=1) / nrm2[ok]
            est = min(est, float(np.min(ratios)))
            remaining -= int(np.count_nonzero(ok))
    return est


def probe_growth_order(model: PotentialModel, n_samples: int, radius: float,
                       rng: np.random.Generator) -> float:
    """Estimate K in |h(v)| <= K (1 + |v|^(ell+1)) as the max sample ratio."""
    V = sample_ball(rng, n_samples, model.d, radius)
    G = model.grad_joint(V)
    num = np.linalg.norm(G, axis=1)
    den = 1.0 + np.linalg.norm(V, axis=1) ** (model.growth_order_ell + 1.0)
    return float(np.max(num / den))


def probe_dissipativity(model: PotentialModel, n_samples: int, radius: float,
                        rng: np.random.Generator) -> float:
    """Worst margin of <v, h(v)> - (mu/2 |v|^2 - b), normalized by (1 + |v|^2)."""
    V = sample_ball(rng, n_samples, model.d, radius)
    G = model.grad_joint(V)
    nrm2 = np.sum(V * V, axis=1)
    margin = np.sum(V * G, axis=1) - (0.5 * model.convexity_mu * nrm2 - model.dissipativity_offset)
    return float(np.min(margin / (1.0 + nrm2)))


@dataclass
class CoordinateDissipativityReport:
    a3i_margin: float
    a3i_holds: bool
    a3ii_margin: Optional[float]
    a3ii_holds: Optional[bool]
    mu: float
    rho: Optional[float]
    constraint_ok: Optional[bool]


def probe_coordinate_dissipativity(model: PotentialModel, n_samples: int, radius: float,
                                   rng: np.random.Generator,
                                   tol: float = 1e-9) -> CoordinateDissipativityReport:
    """Check the per-coordinate dissipativity conditions samplewise.

    The plain form is tested with the model's certified constants (falling back
    to the convexity constant); the relaxed pair form is tested whenever
    d_theta == d_x.  Margins are normalized by (1 + |v_i|^2).
    """
    cert = model.a3
    mu = cert.mu if cert is not None else model.convexity_mu
    rho = cert.rho if cert is not None and cert.form == "ii" else 0.0

    V = sample_ball(rng, n_samples, model.d, radius)
    Theta, X = V[:, : model.d_theta], V[:, model.d_theta :]
    gt, gx = model.grad_pairs(Theta, X)
    g0 = model.grad_joint(np.zeros((1, model.d)))[0]
    h0_sq = g0 * g0

    joint = np.concatenate([Theta, X], axis=1)
    gj = np.concatenate([gt, gx], axis=1)
    m_i = gj * joint - (0.5 * mu * joint**2 - h0_sq[None, :] / (2.0 * mu))
    a3i_margin = float(np.min(m_i / (1.0 + joint**2)))
    a3i_holds = a3i_margin >= -tol

    a3ii_margin = None
    a3ii_holds = None
    constraint_ok = None
    if model.d_theta == model.d_x:
        h0t, h0x = h0_sq[: model.d_theta], h0_sq[model.d_theta :]
        mt = gt * Theta - (0.5 * mu * Theta**2 - rho * X**2 - h0t[None, :] / (2.0 * mu))
        mx = gx * X - (0.5 * mu * X**2 - rho * Theta**2 - h0x[None, :] / (2.0 * mu))
        norm_t = 1.0 + Theta**2 + X**2
        a3ii_margin = float(min(np.min(mt / norm_t), np.min(mx / norm_t)))
        a3ii_holds = a3ii_margin >= -tol
        constraint_ok = 4.0 * rho < mu
    return CoordinateDissipativityReport(a3i_margin, a3i_holds, a3ii_margin, a3ii_holds,
                                         mu, rho if model.d_theta == model.d_x else None,
                                         constraint_ok)
