"""Kernel two-sample distances, GAN evaluation scores and estimator-bias experiments."""

__version__ = "0.1.0"

from .errors import InputError, NumericalError
from .estimators import (
    Estimate,
    cramer_surrogate,
    energy_distance,
    energy_score,
    kid,
    mmd2_biased,
    mmd2_block_average,
    mmd2_unbiased,
    score_based_cramer_objective,
    witness_eval,
    witness_grad_penalty,
)
from .kernels import Distance, Dot, Poly, RbfMixture, RqDot, RqMixture, parse_kernel
from .numeric import RngState
from .relative import AdaptationState, ControllerConfig, lr_controller_step, relative_similarity_test
from .scores import (
    GaussianMoments,
    fid_estimate,
    fit_moments,
    frechet_distance,
    inception_score,
)
