"""Ising example model: lattice, Gibbs simulator, enumeration oracles.

The model is the free-boundary rectangular Ising model
p(y|theta) = exp(theta * S(y)) / C(theta) on spins ±1, with the sufficient
statistic S(y) summing products of vertically and horizontally adjacent
spins, and a Uniform(0,1) prior on theta.  Pseudo-data are simulated by
systematic raster-scan single-site Gibbs sweeps (default 200 sweeps from a
uniformly random start; residual burn-in bias is gated by a chi-square test
against the enumeration pmf).  For lattices with at most 20 sites the
normalizing constant, the pmf of S, and posterior quantities are computed
exactly by brute-force enumeration, giving desk-scale ground truth.
"""

import functools
import math
from dataclasses import dataclass

import numpy as np

from . import backend, streams
from .errors import ResourceLimitError
from .models import ParamPoint, SimulatorModel

MAX_ENUM_SITES = 20
DEFAULT_SWEEPS = 200


@dataclass(frozen=True)
class Lattice:
    """An L x W array of ±1 spins."""

    spins: np.ndarray

    def __post_init__(self):
        spins = np.asarray(self.spins, dtype=np.int8)
        if spins.ndim != 2:
            raise ValueError(f"lattice must be 2-D, got shape {spins.shape}")
        if not np.all(np.abs(spins) == 1):
            raise ValueError("lattice entries must be ±1")
        spins = spins.copy()
        spins.flags.writeable = False
        object.__setattr__(self, "spins", spins)

    @property
    def rows(self):
        return self.spins.shape[0]

    @property
    def cols(self):
        return self.spins.shape[1]

    def render(self):
        """Text dump, one row per line, '+' for +1 and '-' for -1."""
        return "\n".join(
            "".join("+" if s > 0 else "-" for s in row) for row in self.spins
        )


@dataclass(frozen=True)
class IsingParams:
    """Interaction strength plus the Gibbs burn-in sweep count."""

    theta: float
    sweeps: int = DEFAULT_SWEEPS

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError(f"sweeps must be >= 1, got {self.sweeps}")


def suff_stat(lat):
    """Nearest-neighbor agreement statistic S(y) of a single lattice."""
    spins = lat.spins if isinstance(lat, Lattice) else np.asarray(lat)
    vertical = int(np.sum(spins[:-1, :].astype(np.int64) * spins[1:, :]))
    horizontal = int(np.sum(spins[:, :-1].astype(np.int64) * spins[:, 1:]))
    return vertical + horizontal


def suff_stat_batch(spins):
    """S(y) for a batch stored as (L, W, B); returns (B,) int64."""
    s = spins.astype(np.int64)
    vertical = (s[:-1, :, :] * s[1:, :, :]).sum(axis=(0, 1))
    horizontal = (s[:, :-1, :] * s[:, 1:, :]).sum(axis=(0, 1))
    return vertical + horizontal


def conditional_ptable(theta):
    """P(spin=+1 | neighbor sum m) for m = -4..4, as a 9-entry table.

    P(+1|m) = exp(theta*m) / (exp(theta*m) + exp(-theta*m)).
    """
    m = np.arange(-4, 5, dtype=float)
    return 1.0 / (1.0 + np.exp(-2.0 * theta * m))


def _gibbs_spins(theta, rows, cols, sweeps, n, rng, init=None, max_chunk=4_000_000):
    """Run n independent Gibbs chains; returns spins (rows, cols, n) int8.

    Uniform variates are generated in sweep-chunks by the caller's rng and
    consumed in raster order by the backend; the chunk size only bounds
    memory, so results depend on neither the backend nor the chunking.
    """
    if init is None:
        spins = np.where(rng.random(rows * cols * n).reshape(rows, cols, n) < 0.5, 1, -1).astype(np.int8)
    else:
        init = np.asarray(init, dtype=np.int8)
        spins = np.ascontiguousarray(np.repeat(init[:, :, None], n, axis=2))
    ptable = conditional_ptable(theta)
    per_sweep = rows * cols * n
    chunk = max(1, max_chunk // max(per_sweep, 1))
    done = 0
    while done < sweeps:
        c = min(chunk, sweeps - done)
        u = rng.random(c * per_sweep).reshape(c, rows, cols, n)
        backend.gibbs_sweeps(spins, ptable, u)
        done += c
    return spins


def gibbs_simulate(params, rows, cols, rng, init=None):
    """Approximate draw y ~ p(.|theta) after ``params.sweeps`` full sweeps
    from a uniformly random start (or a caller-supplied initial lattice)."""
    spins = _gibbs_spins(params.theta, rows, cols, params.sweeps, 1, rng, init=init)
    return Lattice(spins[:, :, 0])


def simulate_stats(theta, rows, cols, sweeps, n, rng, init=None):
    """Summary statistics of n independent Gibbs draws, shape (n,) int64."""
    if n == 0:
        return np.empty(0, dtype=np.int64)
    return suff_stat_batch(_gibbs_spins(theta, rows, cols, sweeps, n, rng, init=init))


@functools.lru_cache(maxsize=8)
def _stat_histogram(rows, cols):
    """Counts g(s) of the statistic over all 2^(rows*cols) configurations.

    Returns (values, counts) with counts[i] configurations attaining
    values[i].  The histogram is theta-independent, so one enumeration
    serves every theta.
    """
    n_sites = rows * cols
    if n_sites > MAX_ENUM_SITES:
        raise ResourceLimitError(
            f"enumeration of {rows}x{cols} needs 2^{n_sites} states; "
            f"limit is {MAX_ENUM_SITES} sites"
        )
    s_max = 2 * rows * cols - rows - cols
    counts = np.zeros(2 * s_max + 1, dtype=np.int64)
    total = 1 << n_sites
    chunk = 1 << min(n_sites, 16)
    site_bits = np.arange(n_sites, dtype=np.uint32)
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.uint32)
        bits = (codes[:, None] >> site_bits) & 1
        spins = (2 * bits.astype(np.int8) - 1).reshape(-1, rows, cols)
        stats = (spins[:, :-1, :].astype(np.int64) * spins[:, 1:, :]).sum(axis=(1, 2))
        stats += (spins[:, :, :-1].astype(np.int64) * spins[:, :, 1:]).sum(axis=(1, 2))
        counts += np.bincount(stats + s_max, minlength=2 * s_max + 1)
    values = np.nonzero(counts)[0] - s_max
    return values, counts[values + s_max]


def _log_norm(values, counts, theta):
    """log C(theta) = log sum_s g(s) exp(theta*s), stable for any theta."""
    a = theta * values + np.log(counts)
    amax = a.max()
    return amax + math.log(np.exp(a - amax).sum())


def exact_enumeration(rows, cols, theta):
    """Exact normalizing constant and pmf of S for small lattices.

    Returns (log C(theta), {s: P(S=s|theta)}).
    """
    values, counts = _stat_histogram(rows, cols)
    logc = _log_norm(values, counts, theta)
    pmf = {
        int(s): math.exp(theta * s + math.log(c) - logc)
        for s, c in zip(values, counts)
    }
    return logc, pmf


def posterior_oracle(rows, cols, s_obs, quad_points=512):
    """Exact posterior mean of theta and marginal P(S=s_obs) under the
    Uniform(0,1) prior, by composite Simpson quadrature over theta.

    The likelihood factorizes as P(S=s_obs|theta) = g(s_obs)
    * exp(theta*s_obs - log C(theta)); g(s_obs) cancels in the posterior-mean
    ratio but not in the marginal.
    """
    if quad_points < 64:
        raise ValueError(f"quad_points must be >= 64, got {quad_points}")
    values, counts = _stat_histogram(rows, cols)
    idx = np.nonzero(values == s_obs)[0]
    if len(idx) == 0:
        raise ValueError(f"s_obs={s_obs} is not attainable on a {rows}x{cols} lattice")
    g_obs = float(counts[idx[0]])
    n = quad_points + (quad_points % 2)  # Simpson needs an even interval count
    thetas = np.linspace(0.0, 1.0, n + 1)
    f = np.array([math.exp(t * s_obs - _log_norm(values, counts, t)) for t in thetas])
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    h = 1.0 / n
    integral_f = float(w @ f) * h / 3.0
    integral_tf = float(w @ (thetas * f)) * h / 3.0
    posterior_mean = integral_tf / integral_f
    marginal = g_obs * integral_f
    return posterior_mean, marginal


class IsingModel(SimulatorModel):
    """Ising simulator exposing S(y) as its d=1 summary statistic.

    ``simulate_summaries`` runs ``sweeps`` Gibbs sweeps per draw; the
    enumeration-based chi-square gate in the test suite bounds the residual
    burn-in bias of this choice.
    """

    summary_dim = 1

    def __init__(self, rows, cols, observed_stat, sweeps=DEFAULT_SWEEPS):
        if rows < 1 or cols < 1:
            raise ValueError(f"lattice dimensions must be positive, got {rows}x{cols}")
        if sweeps < 1:
            raise ValueError(f"sweeps must be >= 1, got {sweeps}")
        self.rows = rows
        self.cols = cols
        self.sweeps = sweeps
        self.observed = np.array([float(observed_stat)])

    def sample_prior(self, rng):
        theta = rng.random()
        return ParamPoint(theta=np.array([theta]), log_prior=0.0)

    def log_prior(self, theta):
        t = float(np.asarray(theta).reshape(-1)[0])
        return 0.0 if 0.0 <= t <= 1.0 else -math.inf

    def log_prior_batch(self, thetas):
        t = np.asarray(thetas, dtype=float)[:, 0]
        return np.where((t >= 0.0) & (t <= 1.0), 0.0, -math.inf)

    def simulate_summaries(self, theta, n, rng):
        t = float(np.asarray(theta).reshape(-1)[0])
        stats = simulate_stats(t, self.rows, self.cols, self.sweeps, n, rng)
        return stats.astype(float)[:, None]

    @property
    def prior_mean(self):
        return 0.5


def ising_model_from_seed(rows, cols, obs_seed, obs_theta=0.5, sweeps=DEFAULT_SWEEPS):
    """Build an IsingModel whose observed data are simulated at
    ``obs_theta`` from the dedicated observed-data stream of ``obs_seed``.

    Returns (model, observed_lattice).
    """
    rng = streams.derive(obs_seed, streams.STREAM_OBSERVED)
    lattice = gibbs_simulate(IsingParams(theta=obs_theta, sweeps=sweeps), rows, cols, rng)
    model = IsingModel(rows, cols, suff_stat(lattice), sweeps=sweeps)
    return model, lattice
