"""Universal hard-thresholding regression estimators and a Monte Carlo harness.

Two estimators share one thresholding rule ``T * sqrt(log n / n)``: a kernel
estimator on the span of kernel sections at anchor points, and a wavelet
estimator on the design warped by its empirical CDF.
"""

__version__ = "0.1.0"

from threshreg._core import BACKEND
from threshreg.errors import (
    AssumptionViolated,
    ConfigError,
    DataError,
    InvalidArgument,
    InvalidScenario,
    SingularSystem,
    ThreshRegError,
)
from threshreg.harness import (
    ACEstimate,
    EstimatorConfig,
    RateFit,
    StudyRefused,
    estimate_ac,
    moment_loss,
    population_loss,
    rate_study,
)
from threshreg.kernels import Kernel, gaussian, indicator_partition, kernel_from_config, laplacian
from threshreg.rkhs import (
    DeltaCertificate,
    RkhsFit,
    certify_delta,
    empirical_norm,
    fit_rkhs,
    select_anchor_count,
)
from threshreg.sample import Sample
from threshreg.synthetic import (
    DistributionWarp,
    Scenario,
    analytic_warp,
    draw_sample,
    make_holder_scenario,
    make_null_scenario,
    make_rkhs_sparse_scenario,
)
from threshreg.thresholding import ThresholdSchedule, critical_threshold, hard_threshold, soft_threshold
from threshreg.wavelet_estimator import WaveletFit, empirical_cdf, fit_wavelet, select_max_level
from threshreg.wavelets import (
    CoefficientGrid,
    WaveletBasis,
    besov_sup_norm,
    forward_pyramid,
    get_basis,
    inverse_pyramid,
)

__all__ = [name for name in dir() if not name.startswith("_")]
