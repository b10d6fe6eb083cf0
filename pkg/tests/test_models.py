import math

import numpy as np
import pytest
from oracles import sphere_moments

from mmsd.grassmann import is_orthonormal, uniform_stiefel
from mmsd.models import (
    ChainOutput,
    CovModelSpec,
    LinearModelSpec,
    PriorKind,
    cov_model_covariance,
    generate_cov_data,
    generate_linear_data,
    log_posterior_density,
    lm_posterior_params,
    run_cov_chain,
    run_lm_chain,
    snr_to_gamma,
    snr_to_variance,
)

UBAR = np.eye(6)[:, :2]


def test_snr_conversions():
    assert snr_to_variance(10.0) == pytest.approx(10.0)
    assert snr_to_variance(0.0, 2.0) == pytest.approx(2.0)
    assert snr_to_gamma(5.0) == pytest.approx(0.24025307, rel=1e-7)
    assert snr_to_gamma(10.0) == pytest.approx(1 / 11)


def test_cov_spec_from_bounds():
    spec = CovModelSpec.from_snr_bounds(UBAR, 20.0, 5.0, 10.0)
    assert spec.gamma_lo == pytest.approx(1 / 11)
    assert spec.gamma_hi == pytest.approx(snr_to_gamma(5.0))
    assert spec.nu == 1.0


@pytest.mark.parametrize("kwargs", [
    dict(kappa=-1.0, sigma2_n=1.0),
    dict(kappa=1.0, sigma2_n=0.0),
])
def test_linear_spec_validation(kwargs):
    with pytest.raises(ValueError):
        LinearModelSpec(UBAR, **kwargs)


def test_cov_spec_validation():
    with pytest.raises(ValueError):
        CovModelSpec(UBAR, 1.0, 1.0, 0.3, 0.2)
    with pytest.raises(ValueError):
        LinearModelSpec(np.ones((6, 2)), 1.0, 1.0)


def test_cov_data_has_model_covariance():
    rng = np.random.default_rng(0)
    u = uniform_stiefel(5, 2, rng)
    gamma = np.array([0.1, 0.4])
    y = generate_cov_data(u, gamma, 2.0, 200000, rng)
    r = cov_model_covariance(u, gamma, 2.0)
    assert np.max(np.abs(y @ y.T / y.shape[1] - r)) < 0.03 * np.max(np.abs(r))
    # eigenvalues: noise 1/nu, signal (1/nu)/gamma
    assert np.allclose(np.sort(np.linalg.eigvalsh(r)), np.sort([0.5] * 3 + [5.0, 1.25]))


def test_cov_data_rejects_bad_gamma(rng):
    with pytest.raises(ValueError):
        generate_cov_data(UBAR, np.array([0.0, 0.5]), 1.0, 3, rng)


def test_linear_data_shape(rng):
    y = generate_linear_data(UBAR, 2.0, 1.0, 7, rng)
    assert y.shape == (6, 7)


def test_bingham_posterior_depends_on_projector_only(rng):
    spec = LinearModelSpec(UBAR, 5.0, 1.0, "bingham")
    y = rng.standard_normal((6, 3))
    u = uniform_stiefel(6, 2, rng)
    q = uniform_stiefel(2, 2, rng)
    assert log_posterior_density(u @ q, None, y, spec) == pytest.approx(log_posterior_density(u, None, y, spec))
    vspec = LinearModelSpec(UBAR, 5.0, 1.0, "vmf")
    assert log_posterior_density(-u, None, y, vspec) != pytest.approx(log_posterior_density(u, None, y, vspec))


def test_cov_log_density_outside_bounds():
    spec = CovModelSpec(UBAR, 1.0, 1.0, 0.1, 0.3)
    y = np.ones((6, 2))
    assert log_posterior_density(UBAR, np.array([0.2, 0.5]), y, spec) == -math.inf
    assert math.isfinite(log_posterior_density(UBAR, np.array([0.2, 0.25]), y, spec))


def test_lm_chain_reproducible_and_orthonormal():
    spec = LinearModelSpec(UBAR, 5.0, 1.0)
    y = generate_linear_data(UBAR, 3.0, 1.0, 4, np.random.default_rng(1))
    c1 = run_lm_chain(y, spec, 5, 30, np.random.default_rng(2))
    c2 = run_lm_chain(y, spec, 5, 30, np.random.default_rng(2))
    assert len(c1) == 30 and c1.n_burnin == 5
    assert all(np.array_equal(a, b) for a, b in zip(c1.bases, c2.bases))
    assert all(is_orthonormal(b, 1e-10) for b in c1.bases)
    assert np.all(np.isfinite(c1.log_density))


@pytest.mark.parametrize("kind", ["bingham", "vmf"])
def test_lm_posterior_matches_sphere_quadrature(kind):
    """p = 1 in R^3: the posterior is a vector BMF law we can integrate directly."""
    ubar = np.array([[1.0], [0.0], [0.0]])
    spec = LinearModelSpec(ubar, 2.0, 0.5, kind)
    y = np.array([[0.3, -0.2], [1.0, 0.8], [0.1, 0.4]])
    params = lm_posterior_params(y, spec)
    a = params.quadratic[0].a * params.quadratic[0].b[0]
    c = params.linear[:, 0]
    chain = run_lm_chain(y, spec, 50, 30000, np.random.default_rng(4))
    _, ref = sphere_moments(a, c)
    assert np.max(np.abs(chain.projector_mean() - ref)) < 0.02


def test_cov_chain_gamma_in_bounds():
    spec = CovModelSpec.from_snr_bounds(UBAR, 10.0, 5.0, 10.0, prior_kind="vmf")
    rng = np.random.default_rng(3)
    y = generate_cov_data(UBAR, np.array([0.15, 0.2]), spec.nu, 6, rng)
    chain = run_cov_chain(y, spec, 5, 40, rng)
    assert chain.gammas.shape == (40, 2)
    assert np.all(chain.gammas >= spec.gamma_lo) and np.all(chain.gammas <= spec.gamma_hi)
    assert np.all(np.isfinite(chain.log_density))


def test_chain_output_requires_samples():
    with pytest.raises(ValueError):
        ChainOutput((), np.zeros(0), 0)


def test_prior_kind_enum():
    assert PriorKind("vmf") is PriorKind.VMF
