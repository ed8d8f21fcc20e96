"""Smoothing kernels for ABC likelihoods.

The estimator smooths the summary-statistic distribution with a product
Gaussian kernel

    K(u) = (2*pi)**(-d/2) * exp(-u'u / 2),
    K_eps(u) = K(u / eps) / eps**d,

so ``K_eps`` integrates to one for every bandwidth ``eps > 0``.  The kernel
constants that drive the bias/variance trade-off are the covariance trace
``int u'u K(u) du = d`` and the roughness ``int K(u)^2 du = (4*pi)**(-d/2)``.
"""

import math
from dataclasses import dataclass

import numpy as np

_SQRT2PI = math.sqrt(2.0 * math.pi)

GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus summary dimension."""

    dim: int
    family: str = GAUSSIAN

    def __post_init__(self):
        if self.family != GAUSSIAN:
            raise ValueError(f"unknown kernel family: {self.family!r}")
        if self.dim < 1:
            raise ValueError(f"kernel dim must be >= 1, got {self.dim}")


def _as_point(spec, u):
    u = np.asarray(u, dtype=float)
    if u.ndim == 0:
        u = u.reshape(1)
    if u.shape != (spec.dim,):
        raise ValueError(
            f"summary dimension mismatch: kernel dim {spec.dim}, point shape {u.shape}"
        )
    return u


def kernel_density(spec, u):
    """Evaluate the unit-scale kernel K(u) at a single point."""
    u = _as_point(spec, u)
    return math.exp(log_kernel_density(spec, u))


def log_kernel_density(spec, u):
    """log K(u); exact for points far enough out that K underflows."""
    u = _as_point(spec, u)
    return -0.5 * float(u @ u) - 0.5 * spec.dim * math.log(2.0 * math.pi)


def scaled_kernel(spec, u, eps):
    """Evaluate K_eps(u) = K(u/eps) / eps**d at a single point."""
    return math.exp(log_scaled_kernel(spec, u, eps))


def log_scaled_kernel(spec, u, eps):
    """log K_eps(u), computed without intermediate underflow."""
    if eps <= 0.0:
        raise ValueError(f"bandwidth eps must be positive, got {eps}")
    u = _as_point(spec, u)
    return log_kernel_density(spec, u / eps) - spec.dim * math.log(eps)


def kernel_variance(spec):
    """Trace of the kernel covariance, int u'u K(u) du."""
    return float(spec.dim)


def kernel_roughness(spec):
    """Roughness int K(u)^2 du."""
    return (4.0 * math.pi) ** (-0.5 * spec.dim)


def scaled_kernel_values(diffs, eps, dim=1):
    """Vectorized K_eps over an (n, d) or (n,) array of summary differences.

    The d=1 estimator hot path computes the same quantity from reused
    squared-difference buffers; this is the general reference form.
    """
    if eps <= 0.0:
        raise ValueError(f"bandwidth eps must be positive, got {eps}")
    diffs = np.asarray(diffs, dtype=float)
    if diffs.ndim == 1:
        if dim != 1:
            raise ValueError("1-D diffs only valid for dim=1")
        sq = diffs * diffs
    else:
        if diffs.shape[1] != dim:
            raise ValueError(
                f"summary dimension mismatch: kernel dim {dim}, diffs shape {diffs.shape}"
            )
        sq = np.einsum("ij,ij->i", diffs, diffs)
    coef = (2.0 * math.pi) ** (-0.5 * dim) * eps ** (-dim)
    return coef * np.exp(-0.5 * sq / (eps * eps))
