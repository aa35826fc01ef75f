import numpy as np
import pytest

from tipla.errors import ConfigurationError, InputError
from tipla.potentials import (HigherOrderToyModel, LogisticRegressionModel,
                              MixedTermToyModel, QuadraticDiagnosticModel,
                              build_model, eval_gradient, finite_difference_check,
                              higher_order_toy_gradient, mixed_term_toy_gradient,
                              probe_coordinate_dissipativity, probe_dissipativity,
                              probe_growth_order, probe_strong_convexity,
                              quadratic_diagnostic_gradient, sample_ball,
                              sample_generalized_gaussian)

from conftest import rng


def all_models():
    return [
        build_model("logistic", d_x=3, d_y=900, sigma2=0.1, theta_star=[2.0, 5.0, -1.0], data_seed=0),
        build_model("toy", m=1, d_theta=2, d_x=2),
        build_model("mixed", d=2),
        build_model("quadratic", d=2),
    ]


# ---------------------------------------------------------------------------
# analytic gradient values
# ---------------------------------------------------------------------------

def test_quadratic_gradient_vanishes_at_origin():
    g = quadratic_diagnostic_gradient(np.zeros(2), np.zeros(2))
    assert np.all(g.g_theta == 0) and np.all(g.g_x == 0)


def test_quadratic_gradient_simple_point():
    g = quadratic_diagnostic_gradient(np.array([1.0]), np.array([1.0]))
    assert g.g_x[0] == 0.0
    assert g.g_theta[0] == 1.0


def test_toy_gradient_unit_vector():
    # every term of g_x contributes at x = e1, theta = 0: 4 + 2 + 4 + 2 = 12
    g = higher_order_toy_gradient(1, np.zeros(3), np.array([1.0, 0.0, 0.0]))
    assert np.allclose(g.g_x, [12.0, 0.0, 0.0])
    assert np.all(g.g_theta == 0)


def test_toy_gradient_zero():
    g = higher_order_toy_gradient(3, np.zeros(2), np.zeros(2))
    assert np.all(g.g_theta == 0) and np.all(g.g_x == 0)


def test_mixed_gradient_values():
    g = mixed_term_toy_gradient(np.array([0.0]), np.array([1.0]))
    assert g.g_x[0] == 6.0
    assert g.g_theta[0] == 1.0
    with pytest.raises(ConfigurationError):
        mixed_term_toy_gradient(np.zeros(2), np.zeros(3))


def test_logistic_gradient_prior_cancels_at_x_eq_theta():
    model = all_models()[0]
    theta = np.array([0.3, -0.2, 1.0])
    g = eval_gradient(model, theta, theta)
    assert np.allclose(g.g_theta, 0.0)
    s = 1.0 / (1.0 + np.exp(-model.covariates @ theta))
    expected = -(model.labels - s) @ model.covariates
    assert np.allclose(g.g_x, expected)


def test_logistic_gradient_single_datum():
    model = LogisticRegressionModel(np.array([[1.0]]), np.array([1.0]), sigma2=1.0)
    g = eval_gradient(model, np.zeros(1), np.zeros(1))
    assert g.g_x[0] == pytest.approx(-0.5)


def test_eval_gradient_validation():
    model = build_model("quadratic", d=2)
    with pytest.raises(ConfigurationError):
        eval_gradient(model, np.zeros(3), np.zeros(2))
    with pytest.raises(InputError):
        eval_gradient(model, np.array([np.nan, 0.0]), np.zeros(2))


def test_logistic_rejects_bad_sigma_and_labels():
    with pytest.raises(ConfigurationError):
        LogisticRegressionModel(np.ones((4, 2)), np.zeros(4), sigma2=0.0)
    with pytest.raises(ConfigurationError):
        LogisticRegressionModel(np.ones((4, 2)), np.array([0.0, 1.0, 2.0, 0.0]), sigma2=1.0)


def test_toy_rejects_bad_m():
    with pytest.raises(ConfigurationError):
        HigherOrderToyModel(m=0)


# ---------------------------------------------------------------------------
# finite-difference oracle
# ---------------------------------------------------------------------------

def test_finite_differences_quadratic_exact():
    model = build_model("quadratic", d=3)
    r = rng(1)
    for _ in range(5):
        v = sample_ball(r, 1, model.d, 5.0)[0]
        rep = finite_difference_check(model, v[:3], v[3:])
        assert rep.max_rel_error < 1e-8


def test_finite_differences_toy_m15():
    model = build_model("toy", m=15, d_theta=2, d_x=2)
    r = rng(2)
    v = sample_ball(r, 1, model.d, 1.0)[0]
    rep = finite_difference_check(model, v[:2], v[2:])
    assert rep.max_rel_error < 1e-4


def test_finite_differences_logistic():
    model = all_models()[0]
    r = rng(3)
    v = sample_ball(r, 1, model.d, 5.0)[0]
    rep = finite_difference_check(model, v[:3], v[3:])
    assert rep.max_rel_error < 1e-5


@pytest.mark.parametrize("model", all_models(), ids=lambda m: m.name)
def test_finite_differences_random_points(model):
    r = rng(4)
    V = sample_ball(r, 50, model.d, 5.0)
    worst = max(
        finite_difference_check(model, v[: model.d_theta], v[model.d_theta :]).max_rel_error
        for v in V
    )
    assert worst < 1e-4


# ---------------------------------------------------------------------------
# assumption probes
# ---------------------------------------------------------------------------

def test_quadratic_mu_matches_hessian_eigenvalue_oracle():
    # per-coordinate Hessian of U = |x-theta|^2/2 + |theta|^2/2 in (theta_k, x_k)
    hess = np.array([[2.0, -1.0], [-1.0, 1.0]])
    mu_oracle = float(np.min(np.linalg.eigvalsh(hess)))
    model = build_model("quadratic", d=2)
    assert model.convexity_mu == pytest.approx(mu_oracle, abs=1e-15)
    assert model.convexity_mu == pytest.approx(0.381966, abs=1e-6)


@pytest.mark.parametrize("model", all_models(), ids=lambda m: m.name)
def test_probe_strong_convexity_respects_stored_mu(model):
    est = probe_strong_convexity(model, 10_000, 5.0, rng(5))
    assert est >= model.convexity_mu - 1e-9


def test_probe_strong_convexity_lower_bounds():
    assert probe_strong_convexity(build_model("toy", m=1), 4000, 5.0, rng(6)) >= 2.0
    lg = all_models()[0]
    assert probe_strong_convexity(lg, 4000, 5.0, rng(7)) >= 2.0 / 0.1
    assert probe_strong_convexity(build_model("quadratic", d=2), 4000, 5.0, rng(8)) >= 0.3819


@pytest.mark.parametrize("model", all_models(), ids=lambda m: m.name)
def test_probe_dissipativity(model):
    assert probe_dissipativity(model, 10_000, 5.0, rng(9)) >= -1e-9


@pytest.mark.parametrize("model", all_models(), ids=lambda m: m.name)
def test_growth_constant_stable_under_radius_doubling(model):
    k5 = probe_growth_order(model, 10_000, 5.0, rng(10))
    k10 = probe_growth_order(model, 10_000, 10.0, rng(11))
    assert np.isfinite(k5) and np.isfinite(k10)
    assert k10 / k5 < 2.0 ** (model.growth_order_ell + 1.0) * 1.1


def test_coordinate_dissipativity_toy():
    rep = probe_coordinate_dissipativity(build_model("toy", m=1), 10_000, 5.0, rng(12))
    assert rep.a3i_holds
    assert rep.mu / 2.0 == pytest.approx(2.0)  # h_i(v) v_i >= 2 v_i^2


def test_coordinate_dissipativity_mixed():
    rep = probe_coordinate_dissipativity(build_model("mixed", d=2), 10_000, 5.0, rng(13))
    assert not rep.a3i_holds           # the cross term breaks the plain form
    assert rep.a3ii_holds
    assert rep.mu == 3.0 and rep.rho == 0.5
    assert rep.constraint_ok


def test_coordinate_dissipativity_quadratic():
    # Young's inequality oracle on g_x*x = x^2 - x*theta and g_theta*theta = 2 theta^2 - x*theta:
    # theta*x <= theta^2/2 + x^2/2 gives (mu, rho) = (1, 1/2), but 4*rho >= mu.
    rep = probe_coordinate_dissipativity(build_model("quadratic", d=2), 10_000, 5.0, rng(14))
    assert rep.a3ii_holds
    assert rep.mu == 1.0 and rep.rho == 0.5
    assert not rep.constraint_ok


def test_coordinate_dissipativity_logistic_fails():
    rep = probe_coordinate_dissipativity(all_models()[0], 10_000, 5.0, rng(15))
    assert not rep.a3i_holds


# ---------------------------------------------------------------------------
# metadata and helpers
# ---------------------------------------------------------------------------

def test_growth_orders_and_mu():
    assert build_model("logistic", d_x=2, d_y=10, sigma2=0.5, theta_star=[0.0, 0.0]).growth_order_ell == 2.0
    assert build_model("toy", m=15).growth_order_ell == 58.0
    assert build_model("mixed").growth_order_ell == 3.0
    assert build_model("quadratic").growth_order_ell == 1.0
    assert build_model("toy", m=4).convexity_mu == 2.0
    assert build_model("mixed").convexity_mu == 1.0


def test_dissipativity_offset_recomputable():
    model = all_models()[0]
    b = model.grad_zero_norm**2 / (2.0 * model.convexity_mu)
    assert model.dissipativity_offset == pytest.approx(b)
    assert np.isfinite(b)
    for m in all_models()[1:]:
        assert m.dissipativity_offset == 0.0  # h(0) = 0 for the polynomial models


def test_gradients_finite_on_finite_inputs():
    for model in all_models():
        V = sample_ball(rng(16), 200, model.d, 5.0)
        G = model.grad_joint(V)
        assert np.all(np.isfinite(G))


def test_toy_m15_finite_at_large_radius():
    model = build_model("toy", m=15, d_theta=2, d_x=2)
    V = sample_ball(rng(17), 100, model.d, 5.0)
    assert np.all(np.isfinite(model.grad_joint(V)))


def test_generalized_gaussian_sampler_moments():
    # density ~ exp(-z^4/s^4 - z^2/s^2): symmetric, variance below the proposal's
    s2 = 0.1
    z = sample_generalized_gaussian(rng(18), np.zeros(1), s2, (200_000, 1)).ravel()
    assert abs(z.mean()) < 3 * z.std() / np.sqrt(z.size)
    # quadrature oracle for the variance
    from numpy.polynomial.legendre import leggauss
    t, w = leggauss(400)
    half = 5 * np.sqrt(s2)
    u = t * half
    dens = np.exp(-(u**4) / s2**2 - u**2 / s2)
    var_oracle = np.sum(w * u**2 * dens) / np.sum(w * dens)
    assert z.var() == pytest.approx(var_oracle, rel=0.02)


def test_unknown_model_identifier():
    with pytest.raises(ConfigurationError):
        build_model("pendulum")


def test_logistic_csv_roundtrip(tmp_path):
    cov, lab = np.array([[0.5, -0.2], [0.1, 0.9], [-0.7, 0.3]]), np.array([1.0, 0.0, 1.0])
    rows = np.column_stack([cov, lab])
    path = tmp_path / "data.csv"
    np.savetxt(path, rows, delimiter=",")
    model = build_model("logistic", sigma2=0.2, data_csv=str(path))
    assert model.d_x == 2
    assert np.allclose(model.covariates, cov)
    assert np.allclose(model.labels, lab)
