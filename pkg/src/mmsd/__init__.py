"""Bayesian subspace estimation on the Grassmann manifold."""

__version__ = "0.1.0"

from .estimators import (
    EstimatorKind,
    map_estimate,
    mmse_from_chain,
    mmsd_closed_form,
    mmsd_from_chain,
    prior_only,
    svd_estimator,
)
from .grassmann import afe, principal_angles, squared_distance, top_p_eigvecs
from .models import CovModelSpec, LinearModelSpec, PriorKind, run_cov_chain, run_lm_chain

__all__ = [
    "CovModelSpec",
    "EstimatorKind",
    "LinearModelSpec",
    "PriorKind",
    "afe",
    "map_estimate",
    "mmse_from_chain",
    "mmsd_closed_form",
    "mmsd_from_chain",
    "principal_angles",
    "prior_only",
    "run_cov_chain",
    "run_lm_chain",
    "squared_distance",
    "svd_estimator",
    "top_p_eigvecs",
]
