"""Randomized-truncation unbiased estimator of the smoothed ABC likelihood.

The smoothed likelihood at tolerance eps is approximated at level k by

    zeta_k = (1/n_k) * sum_i K_{eps_k}(s_i - s_obs),

with the bandwidth ladder eps_k = q**((k+1)/4) and simulation counts
n_k = ceil(q**(-(k+1)(1+d/4))), q = tau*(1-rho).  Drawing a geometric
truncation level T with P(T=k) = rho*(1-rho)**k and weighting the telescoped
differences by omega_k = (1-rho)**(-k) = 1/P(T >= k) gives the signed,
unbiased estimate

    p_hat = zeta_0 + sum_{k=1}^{T} omega_k * (zeta_k - zeta_{k-1}).

Simulated summaries are pooled: level k reuses the first n_{k-1} draws of
level k-1, so one replication costs n_T simulator calls in total.

Cost warning baked into the API: n_k grows by the factor q**-(1+d/4) per
level while P(T=k) shrinks only by (1-rho), and their product
tau**-(1+d/4) * (1-rho)**(-d/4) exceeds 1 for every admissible (rho, tau, d),
so the expected cost of the uncapped estimator is infinite.  The schedule
therefore carries a level cap.  With cap_action="raise" (the default)
exceeding the cap or the per-replication simulation budget raises
ResourceLimitError; with cap_action="truncate" the drawn level is clipped to
max_level, which leaves the estimator exactly unbiased for the smoothed
likelihood at tolerance eps_{max_level} (the telescoping simply stops there)
at the price of that level's smoothing bias, O(eps_{max_level}**2).
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import CalibrationError, ResourceLimitError
from .kernels import scaled_kernel_values

_SQRT2PI = math.sqrt(2.0 * math.pi)

CAP_RAISE = "raise"
CAP_TRUNCATE = "truncate"


@dataclass(frozen=True)
class TruncationSchedule:
    """Level schedule (rho, tau, summary dimension) plus operational caps."""

    rho: float
    tau: float
    dim: int
    max_level: int = 50
    cap_action: str = CAP_RAISE
    max_sims: int = 100_000_000

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0,1), got {self.rho}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0,1), got {self.tau}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.max_level < 0:
            raise ValueError(f"max_level must be >= 0, got {self.max_level}")
        if self.cap_action not in (CAP_RAISE, CAP_TRUNCATE):
            raise ValueError(
                f"cap_action must be '{CAP_RAISE}' or '{CAP_TRUNCATE}', got {self.cap_action!r}"
            )
        if self.max_sims < 1:
            raise ValueError(f"max_sims must be >= 1, got {self.max_sims}")

    @property
    def q(self):
        return self.tau * (1.0 - self.rho)

    def eps(self, k):
        """Bandwidth at level k."""
        return self.q ** ((k + 1) / 4.0)

    def n_sims(self, k):
        """Pool size at level k."""
        try:
            x = self.q ** (-(k + 1) * (1.0 + 0.25 * self.dim))
        except OverflowError:
            x = math.inf
        if not math.isfinite(x):
            raise ResourceLimitError(
                f"simulation count at level {k} overflows the floating-point range"
            )
        return int(math.ceil(x))

    def weight(self, k):
        """Inverse-survival weight omega_k = 1/P(T >= k)."""
        return (1.0 - self.rho) ** (-k)


def schedule_level(sched, k):
    """Return (eps_k, n_k, omega_k) for level k."""
    if k < 0:
        raise ValueError(f"level k must be >= 0, got {k}")
    return sched.eps(k), sched.n_sims(k), sched.weight(k)


def sample_truncation(rho, rng):
    """Draw the geometric truncation level T on {0, 1, ...},
    P(T=k) = rho*(1-rho)**k."""
    if not 0.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (0,1), got {rho}")
    return int(rng.geometric(rho)) - 1


def condition_bound(sched, k_terms):
    """Partial sum of omega_k * (eps_{k-1}**4 + 1/(n_{k-1}*eps_{k-1}**d))
    over k = 1..k_terms.

    Finiteness of the full series is what makes the estimator's variance and
    expected work finite per level; the partial sums stay below
    2*tau/(1-tau).  For levels whose exact integer n_{k-1} exceeds the
    floating-point range the continuum value q**((k)(1+d/4)) is used in place
    of 1/n_{k-1}; it upper-bounds the true term, so the bound check remains
    conservative.
    """
    if k_terms < 1:
        raise ValueError(f"k_terms must be >= 1, got {k_terms}")
    q = sched.q
    d = sched.dim
    total = 0.0
    for k in range(1, k_terms + 1):
        eps_prev = sched.eps(k - 1)
        try:
            inv_n = 1.0 / sched.n_sims(k - 1)
        except ResourceLimitError:
            inv_n = q ** (k * (1.0 + 0.25 * d))
        term = sched.weight(k) * (eps_prev**4 + inv_n / eps_prev**d)
        total += term
    return total


class SummaryPool:
    """Growable pool of simulated summaries for one (theta, replication).

    Levels share the pool: level k reads the first n_k rows, so growing from
    level k to k+1 simulates only the difference.  ``reset`` empties the pool
    while keeping its capacity, so a loop over many estimates can reuse one
    pool's memory; fresh draws always overwrite from row 0 upward.
    """

    def __init__(self, dim, capacity=0):
        self._buf = np.empty((capacity, dim))
        self._n = 0
        self.dim = dim

    def __len__(self):
        return self._n

    def reset(self):
        """Forget the contents but keep the allocated capacity."""
        self._n = 0

    def _reserve(self, n):
        if n > self._buf.shape[0]:
            buf = np.empty((n, self.dim))
            buf[: self._n] = self._buf[: self._n]
            self._buf = buf

    def ensure(self, model, theta, n, rng):
        """Extend the pool to at least n summaries."""
        have = self._n
        if n > have:
            self._reserve(n)
            out = self._buf[have:n]
            fill = getattr(model, "simulate_summaries_into", None)
            if fill is not None:
                fill(theta, out, rng)
            else:
                new = model.simulate_summaries(theta, n - have, rng)
                out[:] = np.asarray(new, dtype=float).reshape(n - have, self.dim)
            self._n = n

    def prefix(self, n):
        """View of the first n summaries, shape (n, dim)."""
        return self._buf[:n]


@dataclass(frozen=True)
class LevelEstimate:
    """zeta_k with its level bookkeeping."""

    level: int
    zeta: float
    n_used: int
    eps_used: float


@dataclass(frozen=True)
class DebiasedEstimate:
    """A signed likelihood estimate with provenance.

    ``truncation`` is the highest level actually used; ``sample_variance``
    is the across-replication variance, present when replications >= 2.
    """

    value: float
    truncation: int
    total_simulations: int
    replications: int = 1
    sample_variance: Optional[float] = None


class _Scratch:
    """Reusable work arrays for the d=1 kernel passes.

    Freshly mapped pages cost several ns per element on the first touch,
    which at pool sizes in the 10**5..10**6 range dominates the arithmetic;
    reusing one scratch across estimates keeps the buffers warm.
    """

    def __init__(self, capacity=0):
        self.buf = np.empty(capacity)
        self.sq = np.empty(capacity)
        self.diffs = np.empty(capacity)

    def reserve(self, n):
        if n > self.buf.shape[0]:
            self.buf = np.empty(n)
            self.sq = np.empty(n)
            self.diffs = np.empty(n)


def _zeta_from_sq(sq, n, eps, out=None):
    """Level mean for d=1 from squared differences: the first n entries of
    ``sq`` hold (s_i - s_obs)**2."""
    u = out[:n] if out is not None else np.empty(n)
    np.multiply(sq[:n], -0.5 / (eps * eps), out=u)
    np.exp(u, out=u)
    return float(u.sum()) / (n * eps * _SQRT2PI)


def _kernel_means(diffs_by_dim, sched, levels, scratch=None):
    """zeta_0..zeta_{levels} from a flat pool of summary differences.

    ``diffs_by_dim`` is (n_top,) for d=1 or (n_top, d) otherwise; the level-k
    mean uses the first n_k entries.  Each zeta depends only on its own
    prefix, so recomputation from the prefix and incremental pool growth
    give bitwise-identical values.
    """
    zetas = []
    if sched.dim == 1:
        n_top = diffs_by_dim.shape[0]
        if scratch is None:
            scratch = _Scratch(n_top)
        scratch.reserve(n_top)
        sq = scratch.sq[:n_top]
        np.multiply(diffs_by_dim, diffs_by_dim, out=sq)
        for k in range(levels + 1):
            zetas.append(
                _zeta_from_sq(sq, sched.n_sims(k), sched.eps(k), out=scratch.buf)
            )
    else:
        for k in range(levels + 1):
            eps = sched.eps(k)
            n = sched.n_sims(k)
            vals = scaled_kernel_values(diffs_by_dim[:n], eps, sched.dim)
            zetas.append(float(vals.sum()) / n)
    return zetas


def zeta_at_level(model, theta, sched, k, pool, rng):
    """Kernel average over the first n_k pool entries at bandwidth eps_k,
    extending the pool as needed."""
    eps, n, _ = schedule_level(sched, k)
    pool.ensure(model, theta, n, rng)
    diffs = pool.prefix(n) - model.observed
    if sched.dim == 1:
        d1 = diffs.ravel()
        zeta = _zeta_from_sq(d1 * d1, n, eps)
    else:
        zeta = float(scaled_kernel_values(diffs, eps, sched.dim).sum()) / n
    return LevelEstimate(level=k, zeta=zeta, n_used=n, eps_used=eps)


def _effective_level(sched, rng):
    """Draw T and apply the schedule's cap policy; returns the level to use."""
    t = sample_truncation(sched.rho, rng)
    if t > sched.max_level:
        if sched.cap_action == CAP_RAISE:
            raise ResourceLimitError(
                f"drawn truncation level T={t} exceeds max_level={sched.max_level}; "
                f"raise max_level, increase rho, or set cap_action='truncate'"
            )
        t = sched.max_level
    n_top = sched.n_sims(t)
    if n_top > sched.max_sims:
        raise ResourceLimitError(
            f"level {t} needs {n_top} simulations, exceeding max_sims={sched.max_sims}"
        )
    return t


class _Workspace:
    """Reusable per-loop memory: one summary pool plus kernel scratch.

    Reusing a workspace across estimates changes no values — generation
    order, arithmetic, and reduction order are identical — it only keeps the
    large buffers' pages warm.
    """

    def __init__(self, dim):
        self.pool = SummaryPool(dim)
        self.scratch = _Scratch() if dim == 1 else None


def _single_value(model, theta, sched, rng, observed_flat, work=None):
    """One replication; returns (value, level, n_top).  Hot path."""
    t = _effective_level(sched, rng)
    n_top = sched.n_sims(t)
    if work is None:
        work = _Workspace(sched.dim)
    pool = work.pool
    pool.reset()
    pool.ensure(model, theta, n_top, rng)
    if sched.dim == 1:
        sc = work.scratch
        sc.reserve(n_top)
        diffs = sc.diffs[:n_top]
        np.subtract(pool.prefix(n_top)[:, 0], observed_flat[0], out=diffs)
        zetas = _kernel_means(diffs, sched, t, scratch=sc)
    else:
        diffs = pool.prefix(n_top) - observed_flat
        zetas = _kernel_means(diffs, sched, t)
    value = zetas[0]
    for k in range(1, t + 1):
        value += sched.weight(k) * (zetas[k] - zetas[k - 1])
    return value, t, n_top


def debiased_likelihood(model, theta, sched, rng):
    """Single-replication debiased estimate of the likelihood at theta."""
    value, t, n_top = _single_value(
        model, theta, sched, rng, np.asarray(model.observed, dtype=float)
    )
    return DebiasedEstimate(
        value=value,
        truncation=t,
        total_simulations=n_top,
        replications=1,
        sample_variance=None,
    )


def averaged_likelihood(model, theta, sched, n_rep, rng, work=None):
    """Mean of n_rep independent replications, with their sample variance."""
    if n_rep < 1:
        raise ValueError(f"n_rep must be >= 1, got {n_rep}")
    observed = np.asarray(model.observed, dtype=float)
    if work is None:
        work = _Workspace(sched.dim)
    values = np.empty(n_rep)
    total = 0
    top = 0
    for i in range(n_rep):
        values[i], t, n_top = _single_value(model, theta, sched, rng, observed, work)
        total += n_top
        top = max(top, t)
    if n_rep == 1:
        return DebiasedEstimate(
            value=float(values[0]), truncation=top, total_simulations=total
        )
    return DebiasedEstimate(
        value=float(values.mean()),
        truncation=top,
        total_simulations=total,
        replications=n_rep,
        sample_variance=float(values.var(ddof=1)),
    )


def calibrate_nrep(
    model, theta_bar, sched, target_var=1.0, rng=None, *, pilot=200, max_nrep=4096
):
    """Smallest power-of-two n_rep whose pilot variance of log|p-hat| meets
    target_var.

    Runs ``pilot`` averaged estimates per candidate n_rep (doubling search).
    Replications that hit exactly zero are excluded from the pilot variance;
    if every pilot estimate is zero the simulator is degenerate and
    calibration fails.
    """
    if target_var <= 0:
        raise ValueError(f"target_var must be positive, got {target_var}")
    if rng is None:
        raise ValueError("calibrate_nrep requires an explicit rng")
    theta = theta_bar.theta if hasattr(theta_bar, "theta") else theta_bar
    work = _Workspace(sched.dim)
    n_rep = 1
    while True:
        vals = np.array(
            [
                averaged_likelihood(model, theta, sched, n_rep, rng, work).value
                for _ in range(pilot)
            ]
        )
        vals = np.abs(vals[vals != 0.0])
        if len(vals) < 2:
            raise CalibrationError(
                f"calibration pilot produced {len(vals)} nonzero estimates out of "
                f"{pilot}; the simulator looks degenerate at theta_bar"
            )
        pilot_var = float(np.var(np.log(vals), ddof=1))
        if pilot_var <= target_var:
            return n_rep
        n_rep *= 2
        if n_rep > max_nrep:
            raise CalibrationError(
                f"pilot variance {pilot_var:.3g} still above target {target_var} "
                f"at n_rep={max_nrep}"
            )
