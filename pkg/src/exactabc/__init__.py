"""Exact-ABC inference: debiased likelihood estimates inside
self-normalized importance sampling.

The package estimates posterior expectations under the kernel-smoothed ABC
posterior without the usual fixed-tolerance bias: a randomized-truncation
estimator makes the likelihood estimate unbiased across a bandwidth ladder,
and plugging it into self-normalized importance sampling yields consistent
posterior expectations, CLT standard errors, and a marginal-likelihood
estimate.
"""

from .backend import BACKEND
from .debias import (
    DebiasedEstimate,
    LevelEstimate,
    SummaryPool,
    TruncationSchedule,
    averaged_likelihood,
    calibrate_nrep,
    condition_bound,
    debiased_likelihood,
    sample_truncation,
    schedule_level,
    zeta_at_level,
)
from .errors import (
    CalibrationError,
    ConfigError,
    NonpositiveMarginalError,
    ResourceLimitError,
)
from .is2 import (
    IS2Result,
    ImportanceDensity,
    NormalImportance,
    PriorImportance,
    WeightedSample,
    WeightedSamples,
    asymptotic_variance,
    marginal_likelihood,
    run_is2,
)
from .ising import (
    IsingModel,
    IsingParams,
    Lattice,
    exact_enumeration,
    gibbs_simulate,
    ising_model_from_seed,
    posterior_oracle,
    suff_stat,
)
from .kernels import (
    KernelSpec,
    kernel_density,
    kernel_roughness,
    kernel_variance,
    scaled_kernel,
)
from .models import (
    CountingModel,
    GaussianMeanModel,
    ParamPoint,
    SimulatorModel,
    gaussian_abc_posterior_moment2,
    gaussian_model,
)

__version__ = "0.1.0"
