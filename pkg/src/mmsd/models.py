"""Observation models, their posteriors, and the MCMC chains that sample them.

Two models are covered:

* linear Gaussian ``Y = U S + N`` with the improper flat prior on ``S``
  integrated out, so ``p(Y | U)`` only involves ``U U'``;
* zero-mean Gaussian snapshots with covariance ``U Lambda U' + sigma^2 I``,
  reparametrised through ``gamma_k = sigma^2 / (sigma^2 + lambda_k)``.

Either model is paired with a Bingham (``etr(k U'Ubar Ubar'U)``) or vMF
(``etr(k Ubar'U)``) prior centred on ``Ubar``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .grassmann import check_orthonormal, reorthonormalize
from .sampling import (
    REORTH_EVERY,
    BmfParams,
    QuadraticTerm,
    TruncatedGammaParams,
    sample_matrix_bmf_sweep,
    sample_truncated_gamma,
)


class PriorKind(str, Enum):
    BINGHAM = "bingham"
    VMF = "vmf"


def snr_to_variance(snr_db, sigma2_n=1.0):
    """Signal variance giving ``10 log10(sigma_s^2 / sigma_n^2) = snr_db``."""
    return sigma2_n * 10.0 ** (snr_db / 10.0)


def snr_to_gamma(snr_db):
    """``gamma = 1 / (1 + SNR)`` with the SNR given in dB."""
    return 1.0 / (1.0 + 10.0 ** (snr_db / 10.0))


@dataclass(frozen=True)
class LinearModelSpec:
    ubar: np.ndarray
    kappa: float
    sigma2_n: float
    prior_kind: PriorKind = PriorKind.BINGHAM

    def __post_init__(self):
        object.__setattr__(self, "ubar", check_orthonormal(self.ubar, name="ubar"))
        object.__setattr__(self, "prior_kind", PriorKind(self.prior_kind))
        if self.kappa < 0:
            raise ValueError(f"kappa must be nonnegative, got {self.kappa}")
        if not self.sigma2_n > 0:
            raise ValueError(f"sigma2_n must be positive, got {self.sigma2_n}")

    @property
    def p(self):
        return self.ubar.shape[1]


@dataclass(frozen=True)
class CovModelSpec:
    ubar: np.ndarray
    kappa: float
    nu: float
    gamma_lo: float
    gamma_hi: float
    prior_kind: PriorKind = PriorKind.BINGHAM

    def __post_init__(self):
        object.__setattr__(self, "ubar", check_orthonormal(self.ubar, name="ubar"))
        object.__setattr__(self, "prior_kind", PriorKind(self.prior_kind))
        if self.kappa < 0:
            raise ValueError(f"kappa must be nonnegative, got {self.kappa}")
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not 0 <= self.gamma_lo < self.gamma_hi <= 1:
            raise ValueError(
                f"need 0 <= gamma_lo < gamma_hi <= 1, got {self.gamma_lo}, {self.gamma_hi}"
            )

    @classmethod
    def from_snr_bounds(cls, ubar, kappa, snr_lo_db, snr_hi_db, sigma2_n=1.0, prior_kind="bingham"):
        # the lowest SNR sets the upper gamma bound
        return cls(ubar, kappa, 1.0 / sigma2_n, snr_to_gamma(snr_hi_db), snr_to_gamma(snr_lo_db),
                   prior_kind)

    @property
    def p(self):
        return self.ubar.shape[1]


@dataclass(frozen=True)
class ChainOutput:
    bases: tuple
    log_density: np.ndarray
    n_burnin: int
    gammas: np.ndarray | None = None

    def __post_init__(self):
        if not self.bases:
            raise ValueError("a chain needs at least one retained sample")
        object.__setattr__(self, "bases", tuple(self.bases))
        object.__setattr__(self, "log_density", np.asarray(self.log_density, dtype=float))

    def __len__(self):
        return len(self.bases)

    @property
    def stack(self):
        return np.stack(self.bases)

    def projector_mean(self):
        b = self.stack
        return np.einsum("tik,tjk->ij", b, b) / len(b)


# ---------------------------------------------------------------------------
# data generation
# ---------------------------------------------------------------------------


def generate_linear_data(u, sigma2_s, sigma2_n, k, rng):
    """``Y = U S + N`` with i.i.d. Gaussian ``S`` and white noise, ``N x K``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if sigma2_s < 0 or sigma2_n < 0:
        raise ValueError("variances must be nonnegative")
    u = np.asarray(u, dtype=float)
    n, p = u.shape
    s = math.sqrt(sigma2_s) * rng.standard_normal((p, k))
    noise = math.sqrt(sigma2_n) * rng.standard_normal((n, k))
    return u @ s + noise


def cov_model_covariance(u, gamma, nu):
    """``R = nu^{-1} (I - U U') + nu^{-1} U diag(1/gamma) U'``."""
    u = np.asarray(u, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    n = u.shape[0]
    return (np.eye(n) - u @ u.T + (u / gamma) @ u.T) / nu


def generate_cov_data(u, gamma, nu, k, rng):
    """K i.i.d. zero-mean snapshots with covariance :func:`cov_model_covariance`."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma <= 0) or np.any(gamma >= 1):
        raise ValueError("gamma entries must lie in (0, 1)")
    if k < 1:
        raise ValueError("k must be >= 1")
    u = np.asarray(u, dtype=float)
    n, p = u.shape
    w = rng.standard_normal((n, k))
    # R^{1/2} = nu^{-1/2} [ (I - UU') + U diag(gamma^{-1/2}) U' ]
    proj = u.T @ w
    y = w - u @ proj + (u / np.sqrt(gamma)) @ proj
    return y / math.sqrt(nu)


# ---------------------------------------------------------------------------
# posteriors
# ---------------------------------------------------------------------------


def lm_posterior_params(y, spec):
    """Posterior of ``U`` for the linear model as BMF parameters."""
    y = np.asarray(y, dtype=float)
    ubar, p = spec.ubar, spec.p
    yy = y @ y.T
    yy = 0.5 * (yy + yy.T)
    if spec.prior_kind is PriorKind.BINGHAM:
        a = spec.kappa * ubar @ ubar.T + yy / (2.0 * spec.sigma2_n)
        return BmfParams((QuadraticTerm(0.5 * (a + a.T), np.ones(p)),), np.zeros_like(ubar))
    term = QuadraticTerm(yy, np.full(p, 1.0 / (2.0 * spec.sigma2_n)))
    return BmfParams((term,), spec.kappa * ubar)


def cov_conditional_params(y, gamma, spec):
    """BMF parameters of ``U | Y, gamma`` for the covariance model."""
    y = np.asarray(y, dtype=float)
    ubar, p = spec.ubar, spec.p
    yy = y @ y.T
    yy = 0.5 * (yy + yy.T)
    data = QuadraticTerm(yy, 0.5 * spec.nu * (1.0 - np.asarray(gamma, dtype=float)))
    if spec.prior_kind is PriorKind.BINGHAM:
        prior = QuadraticTerm(spec.kappa * ubar @ ubar.T, np.ones(p))
        return BmfParams((prior, data), np.zeros_like(ubar))
    return BmfParams((data,), spec.kappa * ubar)


def log_posterior_density(u, gamma, y, spec):
    """Unnormalised log posterior of ``U`` (linear model) or ``(U, gamma)``."""
    u = np.asarray(u, dtype=float)
    if isinstance(spec, LinearModelSpec):
        return lm_posterior_params(y, spec).log_density(u)
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < spec.gamma_lo) or np.any(gamma > spec.gamma_hi) or np.any(gamma <= 0):
        return -math.inf
    k = np.asarray(y).shape[1]
    val = cov_conditional_params(y, gamma, spec).log_density(u)
    return val + 0.5 * k * float(np.sum(np.log(gamma)))


# ---------------------------------------------------------------------------
# chains
# ---------------------------------------------------------------------------


def run_lm_chain(y, spec, n_bi=10, n_r=1000, rng=None, x0=None):
    """Gibbs chain on the linear-model posterior, started at ``Ubar``."""
    if n_r < 1:
        raise ValueError("n_r must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    params = lm_posterior_params(y, spec)
    x = spec.ubar.copy() if x0 is None else check_orthonormal(x0, tol=1e-8)
    bases, logd = [], []
    for i in range(1, n_bi + n_r + 1):
        x = sample_matrix_bmf_sweep(params, x, rng)
        if i % REORTH_EVERY == 0:
            x = reorthonormalize(x)
        if i > n_bi:
            bases.append(x)
            logd.append(params.log_density(x))
    return ChainOutput(tuple(bases), np.array(logd), n_bi)


def run_cov_chain(y, spec, n_bi=10, n_r=1000, rng=None, x0=None, gamma0=None):
    """Two-block Gibbs sampler on ``(U, gamma)`` for the covariance model.

    Each iteration draws ``U | Y, gamma`` with one column sweep, then every
    ``gamma_k | Y, U`` from a gamma law with shape ``K/2 + 1`` and rate
    ``(nu/2) ||Y' u_k||^2`` truncated to ``[gamma_lo, gamma_hi]``.
    """
    if n_r < 1:
        raise ValueError("n_r must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    y = np.asarray(y, dtype=float)
    k = y.shape[1]
    p = spec.p
    x = spec.ubar.copy() if x0 is None else check_orthonormal(x0, tol=1e-8)
    if gamma0 is None:
        gamma = np.full(p, 0.5 * (spec.gamma_lo + spec.gamma_hi))
    else:
        gamma = np.array(gamma0, dtype=float)
    bases, gammas, logd = [], [], []
    for i in range(1, n_bi + n_r + 1):
        params = cov_conditional_params(y, gamma, spec)
        x = sample_matrix_bmf_sweep(params, x, rng)
        if i % REORTH_EVERY == 0:
            x = reorthonormalize(x)
        z2 = np.sum((y.T @ x) ** 2, axis=0)
        gamma = np.array([
            sample_truncated_gamma(
                TruncatedGammaParams(0.5 * k + 1.0, 0.5 * spec.nu * z2[j], spec.gamma_lo, spec.gamma_hi),
                rng,
            )
            for j in range(p)
        ])
        if i > n_bi:
            bases.append(x)
            gammas.append(gamma)
            logd.append(log_posterior_density(x, gamma, y, spec))
    return ChainOutput(tuple(bases), np.array(logd), n_bi, np.array(gammas))
