import numpy as np
import pytest
from oracles import afe_p1_quadrature

from mmsd.experiments import (
    ResultTable,
    SweepConfig,
    chain_diagnostics,
    prior_characterization,
    prior_draws,
    run_afe_sweep,
)
from mmsd.grassmann import afe
from mmsd.models import ChainOutput, LinearModelSpec, run_lm_chain
from mmsd.sampling import bmf_chain, prior_params

SMALL = dict(n=8, p=2, kappa=10.0, n_trials=2, n_r=20, n_bi=2, prior_burnin=10, grid=(2, 4))


@pytest.mark.parametrize("kwargs", [
    dict(grid=()),
    dict(n_trials=0),
    dict(model="covariance", sweep="SNR"),
    dict(model="other"),
    dict(sweep="K", grid=(2.5,)),
    dict(estimators=("nope",)),
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SweepConfig(**kwargs)


def test_sweep_deterministic_and_thread_independent():
    cfg = SweepConfig(**SMALL)
    a = run_afe_sweep(cfg)
    b = run_afe_sweep(cfg)
    c = run_afe_sweep(cfg, threads=2)
    assert a.to_csv_string() == b.to_csv_string() == c.to_csv_string()


def test_sweep_seed_changes_result():
    a = run_afe_sweep(SweepConfig(**SMALL))
    b = run_afe_sweep(SweepConfig(**{**SMALL, "master_seed": 1}))
    assert a.to_csv_string() != b.to_csv_string()


@pytest.mark.parametrize("model,prior", [("linear", "bingham"), ("linear", "vmf"), ("covariance", "bingham")])
def test_sweep_table_contents(model, prior):
    cfg = SweepConfig(model=model, prior_kind=prior, **SMALL)
    t = run_afe_sweep(cfg)
    names = [e.value for e in cfg.estimator_list]
    assert t.estimators() == names
    assert ("mmsd_closed" in names) == (model == "linear" and prior == "bingham")
    for r in t.rows:
        assert 0.0 <= r.mean_afe <= 1.0 and r.stderr >= 0 and r.n_fail >= 0
    # the prior-only estimate never looks at the data
    assert t.mean_afe("prior_only", 2) == t.mean_afe("prior_only", 4)
    lines = t.to_csv_string().splitlines()
    assert lines[0] == "estimator,sweep_var,sweep_value,mean_afe,stderr,n_fail"
    assert len(lines) == 1 + len(names) * 2
    assert t.metadata["config"]["n"] == 8 and "versions" in t.metadata


def test_snr_sweep_and_filter():
    cfg = SweepConfig(sweep="SNR", grid=(-5.0, 5.0), k=3, estimators=("svd", "prior_only"),
                      **{k: v for k, v in SMALL.items() if k != "grid"})
    t = run_afe_sweep(cfg)
    assert t.estimators() == ["svd", "prior_only"]
    assert t.rows[0].sweep_var == "SNR"
    with pytest.raises(KeyError):
        t.get("mmse", 5.0)


def test_result_table_write(tmp_path):
    t = run_afe_sweep(SweepConfig(**SMALL))
    p = tmp_path / "x.csv"
    t.write_csv(p)
    assert p.read_text() == t.to_csv_string()
    assert isinstance(t, ResultTable)


def test_prior_characterization_uniform_and_monotone():
    res = prior_characterization(10, 2, [0.0, 10.0, 40.0], 150, np.random.default_rng(0), hist_kappa=10.0)
    for kind in ("bingham", "vmf"):
        assert abs(res.mean_afe(kind, 0.0) - 0.2) < 0.04
        a = [res.mean_afe(kind, k) for k in (0.0, 10.0, 40.0)]
        assert a[0] < a[1] < a[2]
        dens = res.angle_density[kind]
        assert dens.shape == (60,)
        assert np.sum(dens) * (res.angle_edges[1] - res.angle_edges[0]) == pytest.approx(1.0)
    assert "bingham,0," in res.afe_csv_string()


def test_prior_characterization_needs_grid():
    with pytest.raises(ValueError):
        prior_characterization(5, 1, [], 10, np.random.default_rng(0))


@pytest.mark.parametrize("kind", ["bingham", "vmf"])
@pytest.mark.parametrize("kappa", [5.0, 20.0, 50.0])
def test_prior_afe_matches_quadrature(kind, kappa):
    """p = 1: the mean AFE is a one-dimensional integral."""
    draws = prior_draws(20, 1, kappa, kind, 1500, seed=3, burnin=50, thin=2)
    ubar = np.eye(20)[:, :1]
    vals = np.array([afe(u, ubar) for u in draws])
    ref = afe_p1_quadrature(20, kappa, kind)
    assert abs(vals.mean() - ref) < 4 * vals.std() / np.sqrt(vals.size) + 0.01


def test_bingham_concentrates_faster_at_large_kappa():
    # quadrature-verified; the opposite ordering holds only for small kappa
    assert afe_p1_quadrature(20, 50.0, "bingham") > afe_p1_quadrature(20, 50.0, "vmf")
    assert afe_p1_quadrature(20, 5.0, "vmf") > afe_p1_quadrature(20, 5.0, "bingham")
    res = prior_characterization(20, 5, [50.0], 150, np.random.default_rng(1), hist_kappa=50.0)
    assert res.mean_afe("bingham", 50.0) > res.mean_afe("vmf", 50.0)


def test_diagnostics_constant_chain():
    u = np.eye(5)[:, :2]
    chain = ChainOutput((u,) * 6, np.full(6, 2.5), 0)
    d = chain_diagnostics(chain, truth=u)
    assert np.all(d.d2_to_iam == 0) and np.all(d.d2_to_truth == 0)
    assert d.stationarity == 0 and d.stationarity_stderr == 0
    assert np.var(d.log_density) == 0


def test_diagnostics_pure(rng):
    spec = LinearModelSpec(np.eye(5)[:, :2], 3.0, 1.0)
    chain = run_lm_chain(rng.standard_normal((5, 3)), spec, 2, 40, rng)
    a = chain_diagnostics(chain)
    b = chain_diagnostics(chain)
    assert a.csv_string() == b.csv_string() and a.d2_to_truth is None


def test_stationarity_on_long_prior_chains():
    """|stat| < 2 stderr should hold for ~95% of stationary chains.

    Ten independent chains; more than two misses would have probability ~1%.
    """
    ubar = np.eye(8)[:, :2]
    params = prior_params(ubar, 10.0, "bingham")
    seeds = np.random.SeedSequence(6).spawn(10)
    z = []
    for ss in seeds:
        rng = np.random.default_rng(ss)
        # started at the mode, so drop a burn-in first
        xs = bmf_chain(params, ubar, 1100, rng)[100:]
        chain = ChainOutput(tuple(xs), np.array([params.log_density(x) for x in xs]), 0)
        d = chain_diagnostics(chain)
        z.append(d.stationarity / d.stationarity_stderr)
    z = np.abs(z)
    assert np.sum(z < 2) >= 8
    assert np.mean(z ** 2) < 2.5
