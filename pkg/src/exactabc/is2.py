"""Self-normalized importance sampling with estimated likelihoods.

Parameters are drawn from an importance density g, each likelihood is
replaced by a signed unbiased estimate p_hat, and the weight is

    w_i = p_hat(s_obs | theta_i) * p(theta_i) / g(theta_i).

Posterior expectations are the ratio estimates E_hat(phi) = I(phi)/I(1) with
I(phi) = (1/M) * sum phi(theta_i) * w_i; every registered phi shares one set
of weights.  The mean weight estimates the marginal likelihood, and the
reported standard error of each expectation is sqrt(sigma2_phi / M) with

    sigma2_phi = (1/(M * p_hat(s_obs)^2)) * sum (phi_i - E_hat)^2 * w_i^2.

Work is split into fixed-size blocks of draws, each on its own
counter-derived RNG stream, and reduced in block order, so results depend
only on (configuration, master seed), not on the worker count.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import streams
from .debias import _single_value, _Workspace
from .errors import NonpositiveMarginalError

BLOCK_SIZE = 1024


class ImportanceDensity:
    """Importance density over the parameter space.

    Subclasses supply ``sample_batch`` and ``log_density``; the support must
    contain the prior support (checked operationally draw by draw).
    """

    def sample_batch(self, n, rng):
        """Draw n parameter points, shape (n, p)."""
        raise NotImplementedError

    def sample(self, rng):
        """Draw a single ParamPoint-shaped theta array, shape (p,)."""
        return self.sample_batch(1, rng)[0]

    def log_density(self, theta):
        raise NotImplementedError

    def log_density_batch(self, thetas):
        """Log densities for an (n, p) batch; default is a per-row loop."""
        return np.array([self.log_density(t) for t in thetas], dtype=float)


class NormalImportance(ImportanceDensity):
    """Univariate normal importance density."""

    def __init__(self, mean, variance):
        if variance <= 0:
            raise ValueError(f"variance must be positive, got {variance}")
        self.mean = float(mean)
        self.variance = float(variance)
        self._log_norm = -0.5 * math.log(2.0 * math.pi * self.variance)

    def sample_batch(self, n, rng):
        return self.mean + math.sqrt(self.variance) * rng.standard_normal((n, 1))

    def log_density(self, theta):
        t = float(np.asarray(theta).reshape(-1)[0])
        return self._log_norm - 0.5 * (t - self.mean) ** 2 / self.variance

    def log_density_batch(self, thetas):
        t = np.asarray(thetas, dtype=float)[:, 0]
        return self._log_norm - 0.5 * (t - self.mean) ** 2 / self.variance


class PriorImportance(ImportanceDensity):
    """Use the model's own prior as importance density (containment is then
    immediate)."""

    def __init__(self, model):
        self.model = model

    def sample_batch(self, n, rng):
        return np.stack([self.model.sample_prior(rng).theta for _ in range(n)])

    def log_density(self, theta):
        return self.model.log_prior(theta)

    def log_density_batch(self, thetas):
        return self.model.log_prior_batch(thetas)


def phi_theta(thetas):
    """First parameter component."""
    return thetas[:, 0]


def phi_theta_squared(thetas):
    """Square of the first parameter component."""
    return thetas[:, 0] ** 2


PHI_REGISTRY = {
    "theta": phi_theta,
    "theta2": phi_theta_squared,
}


@dataclass(frozen=True)
class WeightedSample:
    """One importance draw: theta, its signed weight, per-phi values."""

    theta: np.ndarray
    weight: float
    phi_values: np.ndarray


class WeightedSamples:
    """Array-backed collection of weighted samples.

    Iterating yields WeightedSample views; the arrays themselves
    (``weights``, ``thetas``, ``phi_values``, ``likelihoods``,
    ``log_priors``, ``log_g``) stay available for vectorized diagnostics.
    """

    def __init__(self, thetas, weights, phi_values, likelihoods, log_priors, log_g):
        self.thetas = thetas
        self.weights = weights
        self.phi_values = phi_values
        self.likelihoods = likelihoods
        self.log_priors = log_priors
        self.log_g = log_g

    def __len__(self):
        return len(self.weights)

    def __iter__(self):
        for i in range(len(self)):
            yield WeightedSample(
                theta=self.thetas[i],
                weight=float(self.weights[i]),
                phi_values=self.phi_values[:, i],
            )


@dataclass(frozen=True)
class IS2Result:
    """Posterior expectations with CLT standard errors plus the marginal
    likelihood."""

    phi_names: tuple
    estimates: np.ndarray
    asymptotic_variances: np.ndarray
    standard_errors: np.ndarray
    marginal: float
    marginal_se: float
    M: int
    negative_weight_fraction: float
    n_rep: int
    total_simulations: int
    samples: Optional[WeightedSamples] = None

    def estimate(self, name):
        return float(self.estimates[self.phi_names.index(name)])

    def standard_error(self, name):
        return float(self.standard_errors[self.phi_names.index(name)])


def _weights_array(samples):
    if isinstance(samples, WeightedSamples):
        return samples.weights
    return np.array([s.weight for s in samples], dtype=float)


def marginal_likelihood(samples):
    """Mean weight and the standard error of that mean."""
    w = _weights_array(samples)
    m = len(w)
    if m < 2:
        raise ValueError(f"need at least 2 samples, got {m}")
    mean = math.fsum(w) / m
    var = math.fsum((w - mean) ** 2) / (m - 1)
    return mean, math.sqrt(var / m)


def asymptotic_variance(samples, phi_index, estimate, marginal):
    """CLT variance sigma2_phi of the self-normalized estimate.

    A known pathology is inherited from the estimator: if one weight
    dominates, the residual at that point is ~0 under self-normalization and
    sigma2 is reported near zero though the run carries no information.
    """
    if marginal <= 0:
        raise ValueError(
            f"asymptotic variance undefined for nonpositive marginal {marginal}"
        )
    if isinstance(samples, WeightedSamples):
        w = samples.weights
        phi = samples.phi_values[phi_index]
    else:
        w = _weights_array(samples)
        phi = np.array([s.phi_values[phi_index] for s in samples], dtype=float)
    m = len(w)
    resid = phi - estimate
    return math.fsum((resid * w) ** 2) / (m * marginal * marginal)


def _run_block(model, g, sched, n_rep, seed, stream_tag, block_index, lo, hi):
    """Compute one block of draws; returns plain arrays for ordered
    reduction."""
    rng = streams.derive(seed, streams.STREAM_IS, stream_tag, block_index)
    nb = hi - lo
    thetas = np.asarray(g.sample_batch(nb, rng), dtype=float)
    observed = np.asarray(model.observed, dtype=float)
    log_priors = np.asarray(model.log_prior_batch(thetas), dtype=float)
    log_g = np.asarray(g.log_density_batch(thetas), dtype=float)
    bad = (log_priors > -math.inf) & (log_g == -math.inf)
    if bad.any():
        raise ValueError(
            "importance density has zero density at a parameter point with "
            f"positive prior density (theta={thetas[int(np.argmax(bad))]}); "
            "its support must cover the prior support"
        )
    likelihoods = np.empty(nb)
    sims = 0
    work = _Workspace(sched.dim)
    for i in range(nb):
        theta = thetas[i]
        if n_rep == 1:
            value, _, n_top = _single_value(model, theta, sched, rng, observed, work)
        else:
            value = 0.0
            n_top = 0
            for _ in range(n_rep):
                v, _, n = _single_value(model, theta, sched, rng, observed, work)
                value += v
                n_top += n
            value /= n_rep
        likelihoods[i] = value
        sims += n_top
    weights = likelihoods * np.exp(log_priors - log_g)
    return block_index, thetas, weights, likelihoods, log_priors, log_g, sims


def run_is2(
    model,
    g,
    phis,
    M,
    sched,
    n_rep,
    seed,
    *,
    workers=1,
    stream_tag=0,
    block_size=BLOCK_SIZE,
    progress=None,
):
    """Full importance-sampling pass: M draws, shared weights, one estimate
    per phi.

    ``phis`` maps names to vectorized test functions ((n, p) thetas ->
    (n,) values) or is a sequence of names resolved via PHI_REGISTRY.
    ``workers`` > 1 distributes whole blocks over processes; results are
    identical for any worker count.
    """
    if M < 2:
        raise ValueError(f"M must be >= 2, got {M}")
    if n_rep < 1:
        raise ValueError(f"n_rep must be >= 1, got {n_rep}")
    if isinstance(phis, dict):
        phi_names = tuple(phis.keys())
        phi_funcs = tuple(phis.values())
    else:
        phi_names = tuple(phis)
        phi_funcs = tuple(PHI_REGISTRY[name] for name in phi_names)
    if not phi_funcs:
        raise ValueError("at least one test function is required")

    bounds = [(b, lo, min(lo + block_size, M)) for b, lo in enumerate(range(0, M, block_size))]
    tasks = [
        (model, g, sched, n_rep, seed, stream_tag, b, lo, hi) for b, lo, hi in bounds
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_block_star, tasks, chunksize=1))
    else:
        results = []
        for i, task in enumerate(tasks):
            results.append(_run_block(*task))
            if progress is not None and (i + 1) % max(1, len(tasks) // 10) == 0:
                progress(i + 1, len(tasks))
    results.sort(key=lambda r: r[0])

    thetas = np.concatenate([r[1] for r in results])
    weights = np.concatenate([r[2] for r in results])
    likelihoods = np.concatenate([r[3] for r in results])
    log_priors = np.concatenate([r[4] for r in results])
    log_g = np.concatenate([r[5] for r in results])
    total_sims = sum(r[6] for r in results)

    phi_values = np.stack([f(thetas) for f in phi_funcs])
    samples = WeightedSamples(thetas, weights, phi_values, likelihoods, log_priors, log_g)

    marginal, marginal_se = marginal_likelihood(samples)
    if marginal <= 0:
        raise NonpositiveMarginalError(
            f"marginal-likelihood estimate {marginal:.3g} is nonpositive "
            f"({int((weights < 0).sum())} of {M} weights negative); posterior "
            "expectations are undefined — increase M or n_rep",
            weight_sum=math.fsum(weights),
            n_negative=int((weights < 0).sum()),
            n_samples=M,
        )
    weight_sum = math.fsum(weights)
    estimates = np.array(
        [math.fsum(phi_values[j] * weights) / weight_sum for j in range(len(phi_funcs))]
    )
    asym = np.array(
        [
            asymptotic_variance(samples, j, estimates[j], marginal)
            for j in range(len(phi_funcs))
        ]
    )
    ses = np.sqrt(asym / M)
    return IS2Result(
        phi_names=phi_names,
        estimates=estimates,
        asymptotic_variances=asym,
        standard_errors=ses,
        marginal=marginal,
        marginal_se=marginal_se,
        M=M,
        negative_weight_fraction=float((weights < 0).sum()) / M,
        n_rep=n_rep,
        total_simulations=total_sims,
        samples=samples,
    )


def _run_block_star(task):
    return _run_block(*task)
