"""Importance-sampling layer tests: weight identity, self-normalization,
block determinism across worker counts, and the marginal/variance
arithmetic."""

import math

import numpy as np
import pytest
import scipy.stats

from exactabc.debias import CAP_TRUNCATE, TruncationSchedule
from exactabc.errors import NonpositiveMarginalError
from exactabc.is2 import (
    NormalImportance,
    PriorImportance,
    WeightedSample,
    WeightedSamples,
    asymptotic_variance,
    marginal_likelihood,
    phi_theta,
    phi_theta_squared,
    run_is2,
)
from exactabc.models import ParamPoint, SimulatorModel, gaussian_model
from exactabc.streams import STREAM_TEST, derive

CHEAP = TruncationSchedule(rho=0.5, tau=0.5, dim=1, max_level=6, cap_action=CAP_TRUNCATE)


def phi_ones(thetas):
    return np.ones(thetas.shape[0])


class BadSupportImportance(NormalImportance):
    """Sampler wider than its stated density: log g is -inf everywhere."""

    def log_density(self, theta):
        return -math.inf

    def log_density_batch(self, thetas):
        return np.full(np.asarray(thetas).shape[0], -math.inf)


class FarModel(SimulatorModel):
    """All kernel values underflow: every weight is exactly zero."""

    summary_dim = 1

    def __init__(self):
        self.observed = np.zeros(1)

    def sample_prior(self, rng):
        return ParamPoint(theta=rng.random(1), log_prior=0.0)

    def log_prior(self, theta):
        return 0.0

    def simulate_summaries(self, theta, n, rng):
        return np.full((n, 1), 1e9)


class UnitUniformModel(FarModel):
    """Proper U(0,1) prior; used to exercise PriorImportance."""

    def log_prior(self, theta):
        t = np.atleast_1d(theta)[0]
        return 0.0 if 0.0 <= t <= 1.0 else -math.inf

    def log_prior_batch(self, thetas):
        t = np.asarray(thetas)[:, 0]
        return np.where((t >= 0.0) & (t <= 1.0), 0.0, -math.inf)


class ShiftedPriorModel(SimulatorModel):
    """Gaussian model with the (unnormalized) log prior shifted by c."""

    summary_dim = 1

    def __init__(self, c):
        self.inner = gaussian_model()
        self.observed = self.inner.observed
        self.c = c

    def sample_prior(self, rng):
        raise NotImplementedError

    def log_prior(self, theta):
        return self.c

    def log_prior_batch(self, thetas):
        return np.full(np.asarray(thetas).shape[0], self.c)

    def simulate_summaries(self, theta, n, rng):
        return self.inner.simulate_summaries(theta, n, rng)

    def simulate_summaries_into(self, theta, out, rng):
        return self.inner.simulate_summaries_into(theta, out, rng)


# ---------------------------------------------------------------------------
# importance densities


def test_normal_importance_log_density():
    g = NormalImportance(mean=0.5, variance=2.0)
    ref = scipy.stats.norm(loc=0.5, scale=math.sqrt(2.0))
    for t in (-2.0, 0.0, 0.5, 3.0):
        assert g.log_density(np.array([t])) == pytest.approx(ref.logpdf(t), rel=1e-12)
    ts = np.array([[-2.0], [0.0], [0.5], [3.0]])
    np.testing.assert_allclose(
        g.log_density_batch(ts), ref.logpdf(ts[:, 0]), rtol=1e-12
    )


def test_normal_importance_sampling_moments():
    g = NormalImportance(mean=-1.0, variance=4.0)
    draws = g.sample_batch(40000, derive(1, STREAM_TEST, 40))
    assert draws.shape == (40000, 1)
    assert abs(draws.mean() + 1.0) < 4 * 2.0 / math.sqrt(40000)
    assert abs(draws.std(ddof=1) - 2.0) < 0.05
    one = g.sample(derive(1, STREAM_TEST, 41))
    assert one.shape == (1,)


def test_normal_importance_validation():
    with pytest.raises(ValueError):
        NormalImportance(mean=0.0, variance=0.0)
    with pytest.raises(ValueError):
        NormalImportance(mean=0.0, variance=-1.0)


def test_prior_importance_delegates_to_model():
    m = UnitUniformModel()
    g = PriorImportance(m)
    draws = g.sample_batch(256, derive(2, STREAM_TEST, 42))
    assert draws.shape == (256, 1)
    assert ((draws >= 0.0) & (draws <= 1.0)).all()
    assert g.log_density(np.array([0.3])) == 0.0
    assert g.log_density(np.array([1.7])) == -math.inf
    np.testing.assert_array_equal(
        g.log_density_batch(np.array([[0.2], [2.0]])),
        np.array([0.0, -math.inf]),
    )


# ---------------------------------------------------------------------------
# run_is2 core behavior


def _small_run(phis=("theta", "theta2"), M=512, seed=90210, **kw):
    return run_is2(
        gaussian_model(),
        NormalImportance(mean=0.0, variance=2.0),
        phis,
        M,
        CHEAP,
        1,
        seed,
        **kw,
    )


def test_weight_identity():
    res = _small_run()
    s = res.samples
    np.testing.assert_array_equal(
        s.weights, s.likelihoods * np.exp(s.log_priors - s.log_g)
    )
    assert res.negative_weight_fraction == float((s.weights < 0).sum()) / res.M


def test_constant_phi_is_exact():
    res = run_is2(
        gaussian_model(),
        NormalImportance(mean=0.0, variance=2.0),
        {"one": phi_ones, "theta": phi_theta},
        512,
        CHEAP,
        1,
        90210,
    )
    # self-normalization makes E_hat(1) = 1 with zero variance, exactly
    assert res.estimate("one") == 1.0
    assert res.standard_error("one") == 0.0
    assert res.asymptotic_variances[res.phi_names.index("one")] == 0.0


def test_registry_names_match_callables():
    by_name = _small_run(phis=("theta", "theta2"))
    by_func = _small_run(phis={"theta": phi_theta, "theta2": phi_theta_squared})
    np.testing.assert_array_equal(by_name.estimates, by_func.estimates)
    np.testing.assert_array_equal(by_name.standard_errors, by_func.standard_errors)


def test_extra_phi_does_not_perturb_shared_weights():
    # all phis ride on one set of draws/weights, so adding a phi changes
    # nothing about the others
    both = _small_run(phis=("theta", "theta2"))
    only_t = _small_run(phis=("theta",))
    only_t2 = _small_run(phis=("theta2",))
    assert both.estimate("theta") == only_t.estimate("theta")
    assert both.standard_error("theta") == only_t.standard_error("theta")
    assert both.estimate("theta2") == only_t2.estimate("theta2")
    assert both.standard_error("theta2") == only_t2.standard_error("theta2")
    assert both.marginal == only_t.marginal == only_t2.marginal


def test_worker_count_does_not_change_results():
    a = _small_run(M=2100, workers=1)
    b = _small_run(M=2100, workers=2)
    c = _small_run(M=2100, workers=4)
    np.testing.assert_array_equal(a.estimates, b.estimates)
    np.testing.assert_array_equal(a.estimates, c.estimates)
    np.testing.assert_array_equal(a.standard_errors, c.standard_errors)
    assert a.marginal == b.marginal == c.marginal
    assert a.total_simulations == b.total_simulations == c.total_simulations


def test_seed_determinism_and_sensitivity():
    a = _small_run(seed=7)
    b = _small_run(seed=7)
    c = _small_run(seed=8)
    np.testing.assert_array_equal(a.estimates, b.estimates)
    assert not np.array_equal(a.estimates, c.estimates)
    d = _small_run(seed=7, stream_tag=1)
    assert not np.array_equal(a.estimates, d.estimates)


def test_progress_callback_fires_in_serial_mode():
    calls = []
    _small_run(M=4096, progress=lambda done, total: calls.append((done, total)))
    assert calls, "progress callback never fired"
    assert all(t == 4 for _, t in calls)
    assert calls[-1][0] == 4


def test_bad_importance_support_is_rejected():
    with pytest.raises(ValueError, match="support"):
        run_is2(
            gaussian_model(),
            BadSupportImportance(mean=0.0, variance=2.0),
            ("theta",),
            64,
            CHEAP,
            1,
            3,
        )


def test_argument_validation():
    g = NormalImportance(mean=0.0, variance=2.0)
    with pytest.raises(ValueError, match="M"):
        run_is2(gaussian_model(), g, ("theta",), 1, CHEAP, 1, 0)
    with pytest.raises(ValueError, match="n_rep"):
        run_is2(gaussian_model(), g, ("theta",), 64, CHEAP, 0, 0)
    with pytest.raises(ValueError, match="test function"):
        run_is2(gaussian_model(), g, (), 64, CHEAP, 1, 0)
    with pytest.raises(KeyError):
        run_is2(gaussian_model(), g, ("nope",), 64, CHEAP, 1, 0)


def test_all_zero_weights_raise_nonpositive_marginal():
    with pytest.raises(NonpositiveMarginalError) as exc:
        run_is2(
            FarModel(),
            NormalImportance(mean=0.5, variance=1.0),
            ("theta",),
            128,
            CHEAP,
            1,
            5,
        )
    err = exc.value
    assert err.weight_sum == 0.0
    assert err.n_negative == 0
    assert err.n_samples == 128


def test_prior_scale_cancels_in_estimates():
    # multiplying the unnormalized prior by e^c rescales the marginal and
    # leaves the self-normalized expectations untouched
    base = _small_run(M=1024)
    shifted = run_is2(
        ShiftedPriorModel(c=3.0),
        NormalImportance(mean=0.0, variance=2.0),
        ("theta", "theta2"),
        1024,
        CHEAP,
        1,
        90210,
    )
    np.testing.assert_allclose(shifted.estimates, base.estimates, rtol=1e-12)
    np.testing.assert_allclose(shifted.marginal, base.marginal * math.exp(3.0), rtol=1e-12)
    np.testing.assert_allclose(shifted.standard_errors, base.standard_errors, rtol=1e-12)


def test_nrep_averaging_runs_and_accounts_cost():
    one = _small_run(M=256, seed=11)
    two = run_is2(
        gaussian_model(),
        NormalImportance(mean=0.0, variance=2.0),
        ("theta", "theta2"),
        256,
        CHEAP,
        2,
        11,
    )
    assert two.n_rep == 2
    assert two.total_simulations > one.total_simulations


# ---------------------------------------------------------------------------
# reported uncertainty is calibrated


def test_standard_errors_match_run_to_run_spread():
    ests = []
    ses = []
    for i in range(40):
        r = _small_run(M=256, seed=1000 + i)
        ests.append(r.estimate("theta2"))
        ses.append(r.standard_error("theta2"))
    ratio = np.std(ests, ddof=1) / np.mean(ses)
    assert 0.6 < ratio < 1.6


# ---------------------------------------------------------------------------
# estimator arithmetic on hand-built samples


def _toy_samples():
    thetas = np.array([[0.0], [1.0], [2.0], [3.0]])
    weights = np.array([0.5, 1.5, -0.25, 0.25])
    phi_values = np.stack([thetas[:, 0]])
    return WeightedSamples(
        thetas, weights, phi_values, weights.copy(), np.zeros(4), np.zeros(4)
    )


def test_marginal_likelihood_arithmetic():
    s = _toy_samples()
    mean, se = marginal_likelihood(s)
    w = s.weights
    assert mean == pytest.approx(w.mean(), rel=1e-15)
    assert se == pytest.approx(w.std(ddof=1) / 2.0, rel=1e-12)
    with pytest.raises(ValueError, match="at least 2"):
        marginal_likelihood(
            WeightedSamples(
                np.zeros((1, 1)), np.ones(1), np.ones((1, 1)),
                np.ones(1), np.zeros(1), np.zeros(1),
            )
        )


def test_asymptotic_variance_arithmetic():
    s = _toy_samples()
    mean, _ = marginal_likelihood(s)
    est = float(np.sum(s.phi_values[0] * s.weights) / np.sum(s.weights))
    var = asymptotic_variance(s, 0, est, mean)
    manual = np.sum(((s.phi_values[0] - est) * s.weights) ** 2) / (4 * mean * mean)
    assert var == pytest.approx(manual, rel=1e-12)
    with pytest.raises(ValueError, match="nonpositive"):
        asymptotic_variance(s, 0, est, 0.0)
    with pytest.raises(ValueError, match="nonpositive"):
        asymptotic_variance(s, 0, est, -1.0)


def test_sample_iteration_views():
    s = _toy_samples()
    assert len(s) == 4
    items = list(s)
    assert all(isinstance(x, WeightedSample) for x in items)
    assert items[2].weight == -0.25
    np.testing.assert_array_equal(items[1].theta, np.array([1.0]))
    np.testing.assert_array_equal(items[3].phi_values, np.array([3.0]))
    # list-of-samples path through the reducers agrees with the array path
    mean_arr, se_arr = marginal_likelihood(s)
    mean_list, se_list = marginal_likelihood(items)
    assert mean_list == mean_arr
    assert se_list == se_arr
    est = 1.0
    assert asymptotic_variance(items, 0, est, mean_arr) == pytest.approx(
        asymptotic_variance(s, 0, est, mean_arr), rel=1e-15
    )
