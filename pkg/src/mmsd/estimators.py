"""Subspace estimators: MMSD (closed form and from a chain), MMSE, MAP, SVD, prior only."""

from __future__ import annotations

from enum import Enum

import numpy as np

from .grassmann import (
    RANK_TOL,
    RankError,
    complete_basis,
    fix_signs,
    orthonormalize,
    squared_distance,
    top_p_eigvecs,
)
from .models import LinearModelSpec, PriorKind, generate_linear_data, run_lm_chain
from .sampling import sample_prior


class EstimatorKind(str, Enum):
    MMSD_CLOSED = "mmsd_closed"
    MMSD_MCMC = "mmsd_mcmc"
    MMSE = "mmse"
    MAP = "map"
    SVD = "svd"
    PRIOR_ONLY = "prior_only"


class UnsupportedPriorError(ValueError):
    pass


class DegenerateMeanError(RankError):
    """The chain average of ``U`` has rank below ``p``.

    ``completed`` holds the achievable range padded by the deterministic
    complement, for callers that still want a number out of it.
    """

    def __init__(self, rank, completed):
        super().__init__(f"posterior mean of U has rank {rank}", rank=rank)
        self.completed = completed


def _require_chain(chain):
    if chain is None or len(chain) == 0:
        raise ValueError("estimator needs a non-empty chain")


def mmsd_closed_form(y, spec):
    """Principal ``p``-subspace of ``kappa Ubar Ubar' + Y Y' / (2 sigma^2)``.

    Only exists for the Bingham prior on the linear model.
    """
    if not isinstance(spec, LinearModelSpec) or spec.prior_kind is not PriorKind.BINGHAM:
        raise UnsupportedPriorError("closed-form MMSD requires the linear model with a Bingham prior")
    y = np.asarray(y, dtype=float)
    m = spec.kappa * spec.ubar @ spec.ubar.T + (y @ y.T) / (2.0 * spec.sigma2_n)
    return top_p_eigvecs(m, spec.p)


def mmsd_from_chain(chain):
    """Induced arithmetic mean: principal subspace of the average projector."""
    _require_chain(chain)
    return top_p_eigvecs(chain.projector_mean(), chain.bases[0].shape[1])


def posterior_projector_eigenvalues(chain):
    vals = np.linalg.eigvalsh(chain.projector_mean())
    return vals[::-1]


def mmse_from_chain(chain):
    """Range of the chain average of ``U``; raises when that average is rank deficient."""
    _require_chain(chain)
    mean = np.mean(chain.stack, axis=0)
    p = mean.shape[1]
    try:
        return orthonormalize(mean)
    except RankError as exc:
        u, s, _ = np.linalg.svd(mean, full_matrices=False)
        rank = int(np.sum(s > RANK_TOL * s[0])) if s.size and s[0] > 0 else 0
        raise DegenerateMeanError(rank, complete_basis(u[:, :rank], p)) from exc


def map_estimate(y, spec, chain=None):
    """MAP estimate of ``U``.

    Bingham prior on the linear model: identical to the closed-form MMSD.
    Otherwise: the retained chain sample with the largest log posterior.
    """
    if isinstance(spec, LinearModelSpec) and spec.prior_kind is PriorKind.BINGHAM:
        return mmsd_closed_form(y, spec)
    if chain is None:
        raise ValueError("MAP for this posterior is taken from a chain; pass one")
    _require_chain(chain)
    return chain.bases[int(np.argmax(chain.log_density))].copy()


def svd_estimator(y, p, return_padded=False):
    """The ``p`` principal left singular vectors of ``Y``.

    When ``Y`` has fewer than ``p`` significant singular values the basis is
    completed by Gram-Schmidt over the canonical vectors in index order; pass
    ``return_padded=True`` to learn whether that happened.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if not 1 <= p <= n:
        raise ValueError(f"p must lie in [1, {n}], got {p}")
    u, s, _ = np.linalg.svd(y, full_matrices=False)
    rank = int(np.sum(s > RANK_TOL * s[0])) if s.size and s[0] > 0 else 0
    keep = min(rank, p)
    basis = fix_signs(u[:, :keep])
    padded = keep < p
    if padded:
        basis = complete_basis(basis, p)
    return (basis, padded) if return_padded else basis


def prior_only(spec):
    return np.array(spec.ubar, copy=True)


def mixed_gamma_estimate(chain):
    """Chain mean of gamma, which is both its MMSE and MMSD estimate."""
    if chain.gammas is None:
        raise ValueError("chain carries no gamma samples")
    return np.mean(chain.gammas, axis=0)


# ---------------------------------------------------------------------------
# Hilbert-Schmidt bound
# ---------------------------------------------------------------------------


def linear_data_fn(sigma2_s, sigma2_n, k):
    return lambda u, rng: generate_linear_data(u, sigma2_s, sigma2_n, k, rng)


def hs_bound_trials(spec, data_fn, n_trials, n_r, rng, n_bi=10, prior_burnin=50):
    """Per-trial ingredients of the Hilbert-Schmidt bound on the linear model.

    Each trial draws ``U`` from the prior, data ``Y = data_fn(U, rng)``, and a
    posterior chain.  Returns ``(ell_sum, d2_mmsd)``: the sum of the ``p``
    largest eigenvalues of the chain's projector mean, and the squared
    distance of the chain's MMSD estimate to the true ``U``.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    p = spec.p
    ell, d2 = np.empty(n_trials), np.empty(n_trials)
    for t in range(n_trials):
        u = sample_prior(spec.ubar, spec.kappa, spec.prior_kind.value, rng, prior_burnin)
        y = data_fn(u, rng)
        chain = run_lm_chain(y, spec, n_bi, n_r, rng)
        ell[t] = float(np.sum(posterior_projector_eigenvalues(chain)[:p]))
        d2[t] = squared_distance(mmsd_from_chain(chain), u)
    return ell, d2


def hs_bound_estimate(spec, data_fn, n_trials, n_r, rng, n_bi=10, prior_burnin=50):
    """Monte-Carlo estimate of ``2p - 2 E_Y[sum_{k<=p} ell_k(Y)]``."""
    ell, _ = hs_bound_trials(spec, data_fn, n_trials, n_r, rng, n_bi, prior_burnin)
    bound = 2.0 * spec.p - 2.0 * float(np.mean(ell))
    return float(min(max(bound, 0.0), 2.0 * spec.p))
