import math

import numpy as np
import pytest

from tipla.errors import ConfigurationError
from tipla.potentials import build_model, probe_growth_order, sample_ball
from tipla.taming import (TamingSpec, check_property_1, check_property_2,
                          check_property_3, p_from_growth_order, tame_coordinatewise,
                          tame_joint, tame_none, tame_uniform)

from conftest import rng


def _tame_vec(fn, g, v, spec, d_theta):
    """Apply a taming map to one joint gradient/state pair."""
    g = np.asarray(g, dtype=float)[None, :]
    v = np.asarray(v, dtype=float)[None, :]
    tt, tx = fn(g[:, :d_theta], g[:, d_theta:], v[:, :d_theta], v[:, d_theta:], spec)
    return np.concatenate([tt, tx], axis=1)[0]


def test_p_from_growth_order():
    assert p_from_growth_order(1.0) == 3.0
    assert p_from_growth_order(2.0) == 5.0
    assert p_from_growth_order(58.0) == 117.0   # toy m=15: ell = 4m - 2
    with pytest.raises(ConfigurationError):
        p_from_growth_order(0.0)


def test_uniform_taming_worked_example():
    # d=1, mu=1, v=0, h=2, lambda=1, N=1: (2-0)/(1+1*1*2) + 0 = 2/3
    spec = TamingSpec("uniform", mu=1.0, lam=1.0, n_particles=1, p_exponent=3.0)
    out = _tame_vec(tame_uniform, [2.0, 0.0], [0.0, 0.0], spec, 1)
    assert out[0] == pytest.approx(2.0 / 3.0)


def test_coordinatewise_taming_worked_example():
    # d=2, mu=1, v=0, h=(2,-3), lambda=1: (2/3, -3/4)
    spec = TamingSpec("coordinatewise", mu=1.0, lam=1.0)
    out = _tame_vec(tame_coordinatewise, [2.0, -3.0], [0.0, 0.0], spec, 1)
    assert out[0] == pytest.approx(2.0 / 3.0)
    assert out[1] == pytest.approx(-3.0 / 4.0)


@pytest.mark.parametrize("kind", ["uniform", "coordinatewise"])
def test_identity_on_mu_v_line(kind):
    # h(v) = mu v makes the numerator vanish: taming must return mu v exactly
    r = rng(0)
    for lam in (1.0, 1e-2, 1e-6):
        for n in (1, 100):
            spec = TamingSpec(kind, mu=1.7, lam=lam, n_particles=n, p_exponent=5.0)
            v = r.standard_normal(6)
            fn = tame_uniform if kind == "uniform" else tame_coordinatewise
            out = _tame_vec(fn, 1.7 * v, v, spec, 3)
            assert np.allclose(out, 1.7 * v, rtol=0, atol=0)


def test_uniform_margin_at_mu_v_is_exactly_the_cap():
    spec = TamingSpec("uniform", mu=2.0, lam=1e-2, n_particles=10, p_exponent=5.0)
    v = np.array([0.4, -1.0, 2.0, 0.1])
    out = _tame_vec(tame_uniform, 2.0 * v, v, spec, 2)
    bound = spec.mu * np.linalg.norm(v) + spec.uniform_growth_cap
    assert bound - np.linalg.norm(out) == pytest.approx(spec.uniform_growth_cap)


def test_uniform_scale_log_space():
    # N = 1 reduces to sqrt(lambda) exactly
    spec = TamingSpec("uniform", mu=1.0, lam=1e-4, n_particles=1, p_exponent=117.0)
    assert spec.uniform_scale == math.sqrt(1e-4)
    # N = 10^4, p = 117 underflows naive exponentiation but not the log form
    spec = TamingSpec("uniform", mu=1.0, lam=1e-4, n_particles=10_000, p_exponent=117.0)
    assert spec.uniform_scale > 0.0
    assert np.isfinite(spec.uniform_scale)
    assert np.isfinite(spec.uniform_growth_cap) and spec.uniform_growth_cap > 1e100


def test_taming_passes_non_finite_through():
    spec = TamingSpec("uniform", mu=1.0, lam=1e-2, n_particles=1, p_exponent=3.0)
    g = np.array([np.inf, 0.0])
    out = _tame_vec(tame_uniform, g, np.zeros(2), spec, 1)
    assert not np.all(np.isfinite(out))
    spec = TamingSpec("coordinatewise", mu=1.0, lam=1e-2)
    out = _tame_vec(tame_coordinatewise, np.array([np.nan, 1.0]), np.zeros(2), spec, 1)
    assert np.isnan(out[0]) and np.isfinite(out[1])


def test_odd_symmetry():
    # both maps commute with a global sign flip when h is odd
    model = build_model("toy", m=2, d_theta=2, d_x=2)
    V = sample_ball(rng(1), 200, model.d, 4.0)
    for kind in ("uniform", "coordinatewise"):
        spec = TamingSpec(kind, model.convexity_mu, 1e-3, 4, p_from_growth_order(model.growth_order_ell))
        assert np.allclose(tame_joint(model, spec, V), -tame_joint(model, spec, -V), rtol=1e-12, atol=0)


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        TamingSpec("uniform", mu=1.0, lam=0.0, n_particles=1, p_exponent=3.0)
    with pytest.raises(ConfigurationError):
        TamingSpec("uniform", mu=1.0, lam=1.0, n_particles=0, p_exponent=3.0)
    with pytest.raises(ConfigurationError):
        TamingSpec("uniform", mu=1.0, lam=1.0, n_particles=1, p_exponent=None)
    with pytest.raises(ConfigurationError):
        TamingSpec("sideways", mu=1.0, lam=1.0)
    TamingSpec("none", mu=0.0, lam=0.0)  # parameters unused for the identity


def test_tame_none_is_same_objects():
    g = np.ones((3, 2))
    out = tame_none(g, g, g, g, TamingSpec("none", 1.0, 1.0))
    assert out[0] is g and out[1] is g


# ---------------------------------------------------------------------------
# certified properties on the built-in models
# ---------------------------------------------------------------------------

def certified_pairs():
    toy = build_model("toy", m=1, d_theta=2, d_x=2)
    mixed = build_model("mixed", d=2)
    quad = build_model("quadratic", d=2)
    logistic = build_model("logistic", d_x=3, d_y=900, sigma2=0.1,
                           theta_star=[2.0, 5.0, -1.0], data_seed=0)
    pairs = [(m, "uniform") for m in (toy, mixed, quad, logistic)]
    pairs += [(toy, "coordinatewise"), (mixed, "coordinatewise")]
    return pairs


@pytest.mark.parametrize("model,kind", certified_pairs(), ids=lambda p: getattr(p, "name", p))
def test_property_suite_on_models(model, kind):
    r = rng(2)
    K = probe_growth_order(model, 4000, 5.0, r)
    for lam in (1e-2, 1e-4):
        for n in ((1, 10, 100) if kind == "uniform" else (1,)):
            spec = TamingSpec(kind, model.convexity_mu, lam, n, p_from_growth_order(model.growth_order_ell))
            V = sample_ball(r, 10_000, model.d, 5.0)
            assert check_property_1(model, spec, V).passed
            assert check_property_2(model, spec, V, K).passed
            assert check_property_3(model, spec, V).passed


def test_property_2_zero_gap_on_mu_v_line():
    spec = TamingSpec("coordinatewise", mu=2.0, lam=1e-3)
    v = np.array([1.0, -2.0, 0.5, 3.0])
    out = _tame_vec(tame_coordinatewise, 2.0 * v, v, spec, 2)
    assert np.allclose(out, 2.0 * v, atol=0)


def test_gap_shrinks_with_lambda_like_sqrt():
    # |tamed - h| scales as lambda^(1/2): halving lambda multiplies the gap by
    # ~1/sqrt(2) in the linear regime (not by 1/2 -- the denominator is 1 + O(sqrt(lam)))
    model = build_model("toy", m=1, d_theta=2, d_x=2)
    v = np.array([1.5, -0.5, 2.0, 1.0])
    raw = model.grad_joint(v[None, :])[0]
    gaps = []
    for lam in (1e-8, 5e-9, 2.5e-9):  # sqrt(lam)|h - mu v| << 1 here
        spec = TamingSpec("coordinatewise", model.convexity_mu, lam)
        gaps.append(np.linalg.norm(tame_joint(model, spec, v[None, :])[0] - raw))
    assert gaps[0] > gaps[1] > gaps[2]
    for a, b in zip(gaps, gaps[1:]):
        assert b / a == pytest.approx(1.0 / math.sqrt(2.0), rel=5e-3)


def test_gap_monotone_in_lambda_uniform():
    model = build_model("mixed", d=2)
    V = sample_ball(rng(3), 100, model.d, 4.0)
    raw = model.grad_joint(V)
    prev = None
    for lam in (1e-2, 1e-3, 1e-4):
        spec = TamingSpec("uniform", model.convexity_mu, lam, 4, p_from_growth_order(model.growth_order_ell))
        gap = np.linalg.norm(tame_joint(model, spec, V) - raw, axis=1)
        if prev is not None:
            assert np.all(gap <= prev + 1e-15)
        prev = gap


def test_property_1_coordinatewise_bound_form():
    # |tamed| <= mu |v| + (d_theta + d_x) / sqrt(lambda)
    model = build_model("mixed", d=3)
    V = sample_ball(rng(4), 5000, model.d, 5.0)
    spec = TamingSpec("coordinatewise", model.convexity_mu, 1e-3)
    T = tame_joint(model, spec, V)
    bound = model.convexity_mu * np.linalg.norm(V, axis=1) + model.d / math.sqrt(1e-3)
    assert np.all(np.linalg.norm(T, axis=1) <= bound * (1 + 1e-12))


def test_property_3_at_origin():
    model = build_model("toy", m=1, d_theta=2, d_x=2)
    spec = TamingSpec("uniform", 2.0, 1e-2, 1, 5.0)
    assert check_property_3(model, spec, np.zeros((1, 4))).passed


def test_uniform_taming_survives_huge_gradients():
    # |h - mu v| ~ 1e180 squares past the float range; the row norm must not overflow
    model = build_model("toy", m=15, d_theta=2, d_x=2)
    spec = TamingSpec("uniform", model.convexity_mu, 1e-4, 100,
                      p_from_growth_order(model.growth_order_ell))
    v = np.array([1000.0, -1000.0, 50.0, -50.0])
    out = tame_joint(model, spec, v[None, :])[0]
    assert np.all(np.isfinite(out))
    cap = spec.uniform_growth_cap
    assert np.linalg.norm(out) <= model.convexity_mu * np.linalg.norm(v) + cap * (1 + 1e-12)
