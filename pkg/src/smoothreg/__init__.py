"""Regression inference under serial dependence via random smoothing of moments."""
from .bandwidth import (BandwidthDecision, CalibrationGrid, calibrate_grid, gph, h_opt,
                        select_bandwidth)
from .comparators import mac_cov, nw_hac_cov, ols_fit
from .errors import (DataError, DegenerateError, DomainError, EmbeddingError, InvalidInputError,
                     NumericalError, SingularCovarianceError, SmoothRegError)
from .inference import (CoefficientInference, EllipsoidRegion, infer, joint_region, marginal_ci,
                        wald_test)
from .kernels import BACKEND
from .moments import MomentVector, RegressionDataset, g_map, g_truncated, grad_g
from .simulators import ErrorProcessSpec, gen_dataset
from .smoothing import SmoothingConfig

__version__ = "0.1.0"
