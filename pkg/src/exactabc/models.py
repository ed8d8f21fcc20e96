"""Simulator-model abstraction and the built-in Gaussian example.

A model bundles a prior, a summary-statistic simulator, and the observed
summary.  The likelihood p(s|theta) never needs to be evaluated, only sampled
from; models exposing an exact log-likelihood do so purely as a test oracle.
"""

import abc
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ParamPoint:
    """A parameter value together with its (possibly unnormalized) log prior
    density."""

    theta: np.ndarray
    log_prior: float

    def __post_init__(self):
        object.__setattr__(self, "theta", np.atleast_1d(np.asarray(self.theta, dtype=float)))


class SimulatorModel(abc.ABC):
    """Capability bundle: prior, simulator, observed summary.

    ``simulate_summaries`` is the batch primitive every estimator path uses;
    subclasses should vectorize it.  ``exact_log_likelihood`` is an optional
    oracle hook for test models; production code never calls it.
    """

    summary_dim: int
    observed: np.ndarray  # shape (summary_dim,)

    exact_log_likelihood = None

    @abc.abstractmethod
    def sample_prior(self, rng) -> ParamPoint:
        """Draw theta from the prior."""

    @abc.abstractmethod
    def log_prior(self, theta) -> float:
        """Unnormalized log prior density at theta (-inf outside support)."""

    def log_prior_batch(self, thetas) -> np.ndarray:
        """Log prior per row of an (n, p) batch; default is a per-row loop."""
        return np.array([self.log_prior(t) for t in np.asarray(thetas)], dtype=float)

    @abc.abstractmethod
    def simulate_summaries(self, theta, n, rng) -> np.ndarray:
        """Draw n summary statistics s ~ p(.|theta), shape (n, summary_dim)."""

    # Optional fast path: fill a caller-owned (n, summary_dim) float array
    # instead of allocating.  Must consume the rng exactly like
    # simulate_summaries for the same n, so both paths yield the same draws.
    simulate_summaries_into = None

    def simulate_summary(self, theta, rng) -> np.ndarray:
        """Draw a single summary statistic, shape (summary_dim,)."""
        return self.simulate_summaries(theta, 1, rng)[0]


class GaussianMeanModel(SimulatorModel):
    """y ~ N(theta, 1) observed at y_obs = 0, flat improper prior.

    The summary is the datum itself (d = 1).  The flat prior is represented
    by log_prior = 0 everywhere; the importance-sampling estimator is
    self-normalized so the missing normalizing constant cancels, and the
    marginal likelihood is reported relative to this unnormalized prior
    (its exact value is int N(0; theta, 1) dtheta = 1).
    """

    summary_dim = 1

    def __init__(self):
        self.observed = np.zeros(1)

    def sample_prior(self, rng):
        raise NotImplementedError(
            "the flat prior is improper and cannot be sampled; "
            "supply an explicit importance density instead"
        )

    def log_prior(self, theta):
        return 0.0

    def log_prior_batch(self, thetas):
        return np.zeros(np.asarray(thetas).shape[0])

    def simulate_summaries(self, theta, n, rng):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        out = rng.standard_normal(n)
        out += theta[0]
        return out.reshape(n, 1)

    def simulate_summaries_into(self, theta, out, rng):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        flat = out[:, 0]
        rng.standard_normal(out=flat)
        flat += theta[0]

    def exact_log_likelihood(self, theta):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return -0.5 * theta[0] ** 2 - 0.5 * math.log(2.0 * math.pi)


def gaussian_model():
    """The univariate Gaussian test model of the worked example."""
    return GaussianMeanModel()


class CountingModel(SimulatorModel):
    """Delegating wrapper that counts simulator draws.

    Used to account for calibration cost and by tests that assert reuse
    behavior (level k to k+1 simulates exactly n_{k+1} - n_k new summaries).
    """

    def __init__(self, inner):
        self.inner = inner
        self.summary_dim = inner.summary_dim
        self.observed = inner.observed
        self.simulations = 0

    def sample_prior(self, rng):
        return self.inner.sample_prior(rng)

    def log_prior(self, theta):
        return self.inner.log_prior(theta)

    def simulate_summaries(self, theta, n, rng):
        self.simulations += n
        return self.inner.simulate_summaries(theta, n, rng)


def gaussian_abc_posterior_moment2(eps):
    """Second moment of the eps-tolerance ABC posterior for the Gaussian
    model: the smoothed posterior is N(0, 1 + eps^2), so E(theta^2) = 1 + eps^2.

    Exact-bias oracle used by tests; eps = 0 recovers the exact posterior
    moment 1.
    """
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    return 1.0 + eps * eps
