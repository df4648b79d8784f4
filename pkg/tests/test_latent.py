import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

import latentmos.latent as latent
from latentmos import (
    FitConfig,
    InputError,
    LatentParams,
    RatingSet,
    cdf_l1_distance,
    empirical_stats,
    fit,
    fit_histogram,
    loss,
    loss_gradient,
    quantized_pmf,
    rel_freq,
)
from latentmos.ratings import EmpiricalStats
from oracles import grid_loss_at, grid_loss_minimum, quantized_pmf_hp

mus = st.floats(-5, 10)
sigmas = st.floats(1e-5, 20, exclude_min=True)


@st.composite
def simplex(draw, k=5):
    w = draw(st.lists(st.floats(0, 1), min_size=k, max_size=k))
    assume(sum(w) > 1e-6)
    w = np.asarray(w)
    return w / w.sum()


# ------------------------------------------------------------ quantized_pmf


def test_center_bin_mass():
    # Phi(0.5) - Phi(-0.5) at 40 digits: 0.38292492254802620728
    assert quantized_pmf(LatentParams(3.0, 1.0))[2] == pytest.approx(0.3829249225480262, abs=1e-14)


@given(st.floats(1e-3, 20))
def test_symmetric_about_center(sigma):
    m = quantized_pmf(LatentParams(3.0, sigma))
    assert m[0] == pytest.approx(m[4], abs=1e-15)
    assert m[1] == pytest.approx(m[3], abs=1e-15)


def test_point_mass_limit():
    m = quantized_pmf(LatentParams(1.0, 2e-5))
    np.testing.assert_allclose(m, [1, 0, 0, 0, 0], atol=1e-15)


@given(mus, sigmas)
def test_matches_high_precision_oracle(mu, sigma):
    m = quantized_pmf(LatentParams(mu, sigma))
    np.testing.assert_allclose(m, quantized_pmf_hp(mu, sigma), rtol=0, atol=1e-12)


@given(mus, sigmas)
def test_normalized_and_nonnegative(mu, sigma):
    m = quantized_pmf(LatentParams(mu, sigma))
    assert np.all(m >= 0)
    assert abs(math.fsum(m) - 1.0) <= 1e-10


# far enough in that every tail stays above the double-precision underflow
@given(st.floats(1, 5), st.floats(0.3, 3))
def test_full_support_for_moderate_parameters(mu, sigma):
    assert np.all(quantized_pmf(LatentParams(mu, sigma)) > 0)


@given(mus, mus, sigmas)
def test_stochastic_dominance_in_mu(mu_a, mu_b, sigma):
    assume(mu_a < mu_b)
    h_a = np.cumsum(quantized_pmf(LatentParams(mu_a, sigma)))
    h_b = np.cumsum(quantized_pmf(LatentParams(mu_b, sigma)))
    assert np.all(h_a >= h_b - 1e-15)


@pytest.mark.parametrize("mu, sigma", [(math.nan, 1.0), (3.0, math.inf), (3.0, 0.0), (3.0, 1e-6)])
def test_invalid_params(mu, sigma):
    with pytest.raises(InputError):
        quantized_pmf(LatentParams(mu, sigma))


def test_other_scales():
    m = quantized_pmf(LatentParams(4.0, 1.0), scale_max=7)
    assert m.shape == (7,)
    np.testing.assert_allclose(m, quantized_pmf_hp(4.0, 1.0, 7), atol=1e-14)
    with pytest.raises(InputError):
        quantized_pmf(LatentParams(1.0, 1.0), scale_max=1)


# --------------------------------------------------------- cdf_l1_distance


@pytest.mark.parametrize(
    "a, b, expected",
    [
        ([1, 0, 0, 0, 0], [0, 0, 0, 0, 1], 4.0),
        ([0.5, 0.5, 0, 0, 0], [0, 0.5, 0.5, 0, 0], 1.0),
        ([0.2] * 5, [0.2] * 5, 0.0),
    ],
)
def test_cdf_l1_examples(a, b, expected):
    assert cdf_l1_distance(a, b) == pytest.approx(expected, abs=1e-15)


def test_cdf_l1_shape_mismatch():
    with pytest.raises(InputError):
        cdf_l1_distance([1, 0, 0], [1, 0, 0, 0, 0])


@given(simplex(), simplex(), simplex())
def test_cdf_l1_is_a_metric(a, b, c):
    ab = cdf_l1_distance(a, b)
    assert ab >= 0
    assert ab == pytest.approx(cdf_l1_distance(b, a), abs=1e-15)
    assert cdf_l1_distance(a, a) == 0
    assert ab <= cdf_l1_distance(a, c) + cdf_l1_distance(c, b) + 1e-12


@given(simplex(), simplex())
def test_cdf_l1_zero_only_for_equal(a, b):
    assume(np.max(np.abs(a - b)) > 1e-9)
    assert cdf_l1_distance(a, b) > 0


# -------------------------------------------------------------------- loss


def test_loss_vanishes_at_exact_model():
    p = LatentParams(2.7, 0.9)
    assert loss(p, quantized_pmf(p), EmpiricalStats(2.7, 0.9)) == pytest.approx(0.0, abs=1e-15)


@given(st.floats(0, 6), st.floats(0.05, 4), simplex())
def test_loss_without_regularizer_is_distance(mu, sigma, r):
    p = LatentParams(mu, sigma)
    got = loss(p, r, EmpiricalStats(3.0, 1.0), FitConfig(beta=0.0))
    assert got == cdf_l1_distance(quantized_pmf(p), r)


def test_loss_known_value():
    # 40-digit oracle: distance term 0.44931052001031007527,
    # regulariser 0.03 * (1 - sqrt 2)^2 = 0.0051471862576142968814
    got = loss(LatentParams(3.0, 1.0), [0.2] * 5, EmpiricalStats(3.0, math.sqrt(2.0)))
    assert got == pytest.approx(0.45445770626792437, abs=1e-13)


def _kink_free(p, r, margin=1e-4):
    h_model = np.cumsum(quantized_pmf(p))[:-1]
    h_obs = np.cumsum(r)[:-1]
    return np.all(np.abs(h_model - h_obs) > margin)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(20240607)
    checked = 0
    h = 1e-6
    while checked < 100:
        r = rng.dirichlet(np.ones(5))
        p = LatentParams(rng.uniform(0.5, 5.5), rng.uniform(0.2, 2.5))
        if not _kink_free(p, r):
            continue
        stats = EmpiricalStats(3.0, rng.uniform(0.1, 2.0))
        g = loss_gradient(p, r, stats)
        f = lambda mu, s: loss(LatentParams(mu, s), r, stats)
        fd_mu = (f(p.mu + h, p.sigma) - f(p.mu - h, p.sigma)) / (2 * h)
        fd_sigma = (f(p.mu, p.sigma + h) - f(p.mu, p.sigma - h)) / (2 * h)
        for analytic, numeric in ((g[0], fd_mu), (g[1], fd_sigma)):
            assert abs(analytic - numeric) <= 1e-5 * max(abs(analytic), 1e-3)
        checked += 1


# --------------------------------------------------------------------- fit


@pytest.mark.parametrize("value", [1, 2, 3, 4, 5])
def test_degenerate_ratings_fall_back_to_the_rating(value):
    res = fit(RatingSet("s", (value,) * 8))
    assert res.fell_back
    assert res.representative == value
    assert res.iterations_run == 0
    assert res.params is None


def test_recovers_generating_parameters():
    target = quantized_pmf(LatentParams(3.2, 0.8))
    res = fit_histogram(target, cfg=FitConfig(beta=0.0))
    assert not res.fell_back
    assert res.representative == pytest.approx(3.2, abs=1e-3)
    assert res.params.sigma == pytest.approx(0.8, abs=1e-3)
    assert res.loss < 1e-6


def test_improves_on_mixed_histogram():
    rs = RatingSet("s", (3, 3, 4, 4, 4, 4, 5, 5))
    r = rel_freq(rs)
    s0 = empirical_stats(rs).stddev
    grid_mu, grid_sigma, grid_min = grid_loss_minimum(r, s0, 0.03)
    initial = grid_loss_at(r, s0, 0.03, 4.0, s0)
    assert grid_min < initial  # the oracle sees room for improvement

    res = fit(rs)
    assert not res.fell_back
    assert res.loss < res.initial_loss
    assert res.initial_loss == pytest.approx(initial, abs=1e-12)
    assert res.loss <= grid_min + 1e-3


def test_trace_starts_at_initial_point():
    rs = RatingSet("s", (1, 2, 2, 3, 5))
    res = fit(rs)
    st0 = empirical_stats(rs)
    mu0, sigma0, l0 = res.trace[0]
    assert mu0 == st0.mean
    assert sigma0 == pytest.approx(st0.stddev, abs=1e-15)
    assert l0 == res.initial_loss
    assert res.loss == min(t[2] for t in res.trace)
    assert res.params.mu == res.representative


@pytest.mark.parametrize("max_iters", [1, 5, 100])
def test_iteration_cap(max_iters):
    res = fit(RatingSet("s", (1, 1, 2, 5, 5, 5)), FitConfig(max_iters=max_iters))
    assert 1 <= res.iterations_run <= max_iters


def test_sigma_respects_lower_bound():
    cfg = FitConfig(beta=0.0, sigma_min=0.2)
    res = fit(RatingSet("s", (4, 4, 4, 4, 4, 4, 4, 5)), cfg)
    assert all(s > 0.2 for _, s, _ in res.trace)


def test_non_finite_loss_aborts_with_fallback(monkeypatch):
    real = latent.loss
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        return math.nan if calls["n"] > 4 else real(*args, **kwargs)

    monkeypatch.setattr(latent, "loss", flaky)
    rs = RatingSet("s", (2, 3, 3, 4))
    res = fit(rs)
    assert res.fell_back
    assert res.representative == 3.0


def test_deterministic():
    rs = RatingSet("s", (1, 3, 3, 4, 5, 5, 2))
    a, b = fit(rs), fit(rs)
    assert a == b
    assert a.trace == b.trace


def test_scale_mismatch_rejected():
    with pytest.raises(InputError):
        fit(RatingSet("s", (1, 6), scale_max=7))


@pytest.mark.parametrize(
    "kwargs",
    [{"beta": -1}, {"beta": math.nan}, {"max_iters": 0}, {"sigma_min": 0}, {"scale_max": 1}],
)
def test_config_validation(kwargs):
    with pytest.raises(InputError):
        FitConfig(**kwargs)


def test_default_config_is_published_setting():
    cfg = FitConfig()
    assert (cfg.beta, cfg.max_iters, cfg.sigma_min, cfg.scale_max) == (0.03, 100, 1e-5, 5)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.integers(1, 5), min_size=2, max_size=16))
def test_fit_never_worsens(ratings):
    res = fit(RatingSet("s", ratings))
    if res.params is None:
        assert len(set(ratings)) == 1
        return
    assert res.loss <= res.initial_loss
    assert res.fell_back == (not res.loss < res.initial_loss)


@settings(max_examples=60, deadline=None)
@given(st.floats(1.5, 4.5), st.floats(0.3, 2.0))
def test_translation_consistency(mu_star, sigma_star):
    res = fit_histogram(quantized_pmf(LatentParams(mu_star, sigma_star)), cfg=FitConfig(beta=0.0))
    assert abs(res.representative - mu_star) < 1e-3
