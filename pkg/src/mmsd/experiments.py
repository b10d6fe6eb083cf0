"""Monte-Carlo harness: estimator AFE sweeps, prior characterisation, chain diagnostics.

Seeding: trial ``t`` of a sweep draws everything from
``SeedSequence(master_seed, spawn_key=(t,))`` and its children, so results do
not depend on how trials are scheduled across worker processes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import platform
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .estimators import (
    DegenerateMeanError,
    EstimatorKind,
    map_estimate,
    mmse_from_chain,
    mmsd_closed_form,
    mmsd_from_chain,
    prior_only,
    svd_estimator,
)
from .grassmann import afe, principal_angles, squared_distance, uniform_stiefel
from .models import (
    CovModelSpec,
    LinearModelSpec,
    PriorKind,
    generate_cov_data,
    generate_linear_data,
    run_cov_chain,
    run_lm_chain,
    snr_to_gamma,
    snr_to_variance,
)
from .sampling import bmf_chain, prior_params, sample_prior

HIST_BINS = 60
CHAIN_ESTIMATORS = {EstimatorKind.MMSD_MCMC, EstimatorKind.MMSE, EstimatorKind.MAP}


def canonical_ubar(n, p):
    """``[I_p 0]'``."""
    return np.eye(n)[:, :p].copy()


def estimators_for(model, prior_kind):
    names = [EstimatorKind.MMSD_MCMC, EstimatorKind.MMSE, EstimatorKind.MAP,
             EstimatorKind.SVD, EstimatorKind.PRIOR_ONLY]
    if model == "linear" and PriorKind(prior_kind) is PriorKind.BINGHAM:
        names.insert(0, EstimatorKind.MMSD_CLOSED)
    return names


@dataclass(frozen=True)
class SweepConfig:
    model: str = "linear"
    prior_kind: str = "bingham"
    n: int = 20
    p: int = 5
    kappa: float = 20.0
    sweep: str = "K"
    grid: tuple = (2, 5, 10)
    k: int = 5
    snr_db: float = 5.0
    sigma2_n: float = 1.0
    snr_lo_db: float = 5.0
    snr_hi_db: float = 10.0
    n_trials: int = 50
    n_bi: int = 10
    n_r: int = 200
    prior_burnin: int = 50
    master_seed: int = 0
    estimators: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(self.grid))
        if self.estimators is not None:
            object.__setattr__(self, "estimators", tuple(EstimatorKind(e).value for e in self.estimators))
        if self.model not in ("linear", "covariance"):
            raise ValueError(f"model must be 'linear' or 'covariance', got {self.model!r}")
        PriorKind(self.prior_kind)
        if self.sweep not in ("K", "SNR"):
            raise ValueError(f"sweep must be 'K' or 'SNR', got {self.sweep!r}")
        if self.model == "covariance" and self.sweep != "K":
            raise ValueError("the covariance model sweeps K only (its SNR is set by bounds)")
        if not self.grid:
            raise ValueError("sweep grid is empty")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if not 1 <= self.p <= self.n:
            raise ValueError("need 1 <= p <= n")
        if self.sweep == "K" and any(int(v) != v or v < 1 for v in self.grid):
            raise ValueError("K grid values must be positive integers")

    @property
    def estimator_list(self):
        names = estimators_for(self.model, self.prior_kind)
        if self.estimators is not None:
            names = [e for e in names if e.value in self.estimators]
        return names

    def to_dict(self):
        d = asdict(self)
        d["grid"] = list(self.grid)
        if self.estimators is not None:
            d["estimators"] = list(self.estimators)
        return d

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class ResultRow:
    estimator: str
    sweep_var: str
    sweep_value: float
    mean_afe: float
    stderr: float
    n_fail: int
    n: int


CSV_COLUMNS = ("estimator", "sweep_var", "sweep_value", "mean_afe", "stderr", "n_fail")


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(round(x, 12))


@dataclass
class ResultTable:
    rows: list
    metadata: dict = field(default_factory=dict)

    def get(self, estimator, sweep_value):
        estimator = EstimatorKind(estimator).value
        for r in self.rows:
            if r.estimator == estimator and r.sweep_value == sweep_value:
                return r
        raise KeyError((estimator, sweep_value))

    def mean_afe(self, estimator, sweep_value):
        return self.get(estimator, sweep_value).mean_afe

    def estimators(self):
        return list(dict.fromkeys(r.estimator for r in self.rows))

    def to_csv_string(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r.estimator, r.sweep_var, _fmt(r.sweep_value), _fmt(r.mean_afe),
                        _fmt(r.stderr), r.n_fail])
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(self.to_csv_string())


# ---------------------------------------------------------------------------
# AFE sweep
# ---------------------------------------------------------------------------


def _trial_seed(master_seed, *key):
    return np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))


def _run_trial(config, t):
    """AFE of every estimator for trial ``t`` at every grid value.

    Returns ``{(estimator, j): (afe, failed)}``.
    """
    ubar = canonical_ubar(config.n, config.p)
    rng = np.random.default_rng(_trial_seed(config.master_seed, t))
    u = sample_prior(ubar, config.kappa, config.prior_kind, rng, config.prior_burnin)
    if config.model == "covariance":
        spec = CovModelSpec.from_snr_bounds(ubar, config.kappa, config.snr_lo_db, config.snr_hi_db,
                                            config.sigma2_n, config.prior_kind)
        gamma = rng.uniform(spec.gamma_lo, spec.gamma_hi, config.p)
    names = config.estimator_list
    need_chain = bool(CHAIN_ESTIMATORS.intersection(names))
    out = {}
    for j, value in enumerate(config.grid):
        drng = np.random.default_rng(_trial_seed(config.master_seed, t, j))
        if config.sweep == "K":
            k, snr = int(value), config.snr_db
        else:
            k, snr = config.k, float(value)
        if config.model == "linear":
            spec = LinearModelSpec(ubar, config.kappa, config.sigma2_n, config.prior_kind)
            y = generate_linear_data(u, snr_to_variance(snr, config.sigma2_n), config.sigma2_n, k, drng)
            chain = run_lm_chain(y, spec, config.n_bi, config.n_r, drng) if need_chain else None
        else:
            y = generate_cov_data(u, gamma, spec.nu, k, drng)
            chain = run_cov_chain(y, spec, config.n_bi, config.n_r, drng) if need_chain else None
        for name in names:
            failed = False
            try:
                if name is EstimatorKind.MMSD_CLOSED:
                    est = mmsd_closed_form(y, spec)
                elif name is EstimatorKind.MMSD_MCMC:
                    est = mmsd_from_chain(chain)
                elif name is EstimatorKind.MMSE:
                    est = mmse_from_chain(chain)
                elif name is EstimatorKind.MAP:
                    est = map_estimate(y, spec, chain)
                elif name is EstimatorKind.SVD:
                    est = svd_estimator(y, config.p)
                else:
                    est = prior_only(spec)
                value_afe = afe(est, u)
            except DegenerateMeanError as exc:
                failed, value_afe = True, afe(exc.completed, u)
            except (np.linalg.LinAlgError, ValueError, RuntimeError):
                failed, value_afe = True, math.nan
            out[(name.value, j)] = (value_afe, failed)
    return out


def _map_trials(fn, args, threads):
    if threads is None or threads <= 1 or len(args) <= 1:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=threads) as ex:
        futs = [ex.submit(fn, *a) for a in args]
        return [f.result() for f in futs]


def run_afe_sweep(config, threads=1):
    """Run every estimator over ``config.n_trials`` trials at each grid value."""
    start = time.perf_counter()
    records = _map_trials(_run_trial, [(config, t) for t in range(config.n_trials)], threads)
    rows = []
    for name in config.estimator_list:
        for j, value in enumerate(config.grid):
            vals = np.array([rec[(name.value, j)][0] for rec in records])
            n_fail = sum(rec[(name.value, j)][1] for rec in records)
            ok = vals[np.isfinite(vals)]
            mean = float(np.mean(ok)) if ok.size else math.nan
            se = float(np.std(ok, ddof=1) / math.sqrt(ok.size)) if ok.size > 1 else 0.0
            rows.append(ResultRow(name.value, config.sweep, value, mean, se, int(n_fail), int(ok.size)))
    meta = {
        "config": config.to_dict(),
        "config_hash": config.digest(),
        "master_seed": config.master_seed,
        "versions": {"numpy": np.__version__, "python": platform.python_version()},
        "wall_time_s": time.perf_counter() - start,
    }
    return ResultTable(rows, meta)


# ---------------------------------------------------------------------------
# prior characterisation
# ---------------------------------------------------------------------------


@dataclass
class PriorCharacterization:
    afe_rows: list  # (prior, kappa, mean_afe, stderr)
    angle_edges: np.ndarray
    angle_density: dict  # prior -> density over the edges
    hist_kappa: float

    def afe_csv_string(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("prior", "kappa", "mean_afe", "stderr"))
        for prior, kappa, m, se in self.afe_rows:
            w.writerow([prior, _fmt(kappa), _fmt(m), _fmt(se)])
        return buf.getvalue()

    def hist_csv_string(self, prior):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("bin_lo", "bin_hi", "density"))
        dens = self.angle_density[prior]
        for lo, hi, v in zip(self.angle_edges[:-1], self.angle_edges[1:], dens):
            w.writerow([_fmt(lo), _fmt(hi), _fmt(v)])
        return buf.getvalue()

    def mean_afe(self, prior, kappa):
        for pr, k, m, _ in self.afe_rows:
            if pr == prior and k == kappa:
                return m
        raise KeyError((prior, kappa))


def prior_draws(n, p, kappa, kind, n_draws, seed, burnin=50, thin=2):
    """``n_draws`` prior samples from one thinned chain started uniformly."""
    rng = np.random.default_rng(seed)
    ubar = canonical_ubar(n, p)
    x0 = uniform_stiefel(n, p, rng)
    if kappa == 0:
        return [uniform_stiefel(n, p, rng) for _ in range(n_draws)]
    params = prior_params(ubar, kappa, kind)
    chain = bmf_chain(params, x0, burnin + thin * n_draws, rng, keep=thin * n_draws)
    return chain[thin - 1::thin]


def _characterize_one(n, p, kappa, kind, n_draws, seed, burnin, thin):
    ubar = canonical_ubar(n, p)
    draws = prior_draws(n, p, kappa, kind, n_draws, seed, burnin, thin)
    vals = np.array([afe(u, ubar) for u in draws])
    angles = np.concatenate([principal_angles(u, ubar) for u in draws])
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(vals.size)), angles


def prior_characterization(n, p, kappa_grid, n_draws, rng, hist_kappa=20.0, bins=HIST_BINS,
                           burnin=50, thin=2, threads=1):
    """Mean AFE of prior draws versus kappa, and angle histograms at ``hist_kappa``."""
    kappa_grid = [float(k) for k in kappa_grid]
    if not kappa_grid:
        raise ValueError("kappa grid is empty")
    kappas = list(kappa_grid)
    if hist_kappa not in kappas:
        kappas.append(float(hist_kappa))
    kinds = [PriorKind.BINGHAM.value, PriorKind.VMF.value]
    seeds = rng.integers(0, 2**63, size=(len(kinds), len(kappas)))
    tasks = [(n, p, kappa, kind, n_draws, int(seeds[i, j]), burnin, thin)
             for i, kind in enumerate(kinds) for j, kappa in enumerate(kappas)]
    results = _map_trials(_characterize_one, tasks, threads)
    rows, density = [], {}
    edges = np.linspace(0.0, 0.5 * math.pi, bins + 1)
    for (_, _, kappa, kind, *_), (m, se, angles) in zip(tasks, results):
        if kappa in kappa_grid:
            rows.append((kind, kappa, m, se))
        if kappa == hist_kappa:
            density[kind], _ = np.histogram(angles, bins=edges, density=True)
    return PriorCharacterization(rows, edges, density, float(hist_kappa))


# ---------------------------------------------------------------------------
# chain diagnostics
# ---------------------------------------------------------------------------


@dataclass
class ChainDiagnostics:
    d2_to_iam: np.ndarray
    log_density: np.ndarray
    stationarity: float
    stationarity_stderr: float
    d2_to_truth: np.ndarray | None = None

    def csv_string(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("sample", "log_density", "d2_to_iam", "d2_to_truth"))
        for i in range(self.log_density.size):
            truth = "" if self.d2_to_truth is None else _fmt(self.d2_to_truth[i])
            w.writerow([i, _fmt(self.log_density[i]), _fmt(self.d2_to_iam[i]), truth])
        return buf.getvalue()


def _batch_se(x, n_batches=10):
    if x.size < 2:
        return 0.0
    nb = min(n_batches, x.size)
    means = np.array([b.mean() for b in np.array_split(x, nb)])
    return float(np.std(means, ddof=1) / math.sqrt(nb)) if nb > 1 else 0.0


def chain_diagnostics(chain, truth=None):
    """Traces and a first-half/second-half stationarity check on the log density.

    The standard error uses batch means within each half, so it accounts for
    autocorrelation to first order.
    """
    if len(chain) == 0:
        raise ValueError("empty chain")
    iam = mmsd_from_chain(chain)
    d2_iam = np.array([squared_distance(b, iam) for b in chain.bases])
    d2_truth = None if truth is None else np.array([squared_distance(b, truth) for b in chain.bases])
    ld = np.asarray(chain.log_density, dtype=float)
    half = ld.size // 2
    if half == 0:
        stat, se = 0.0, 0.0
    else:
        first, second = ld[:half], ld[half:2 * half]
        stat = float(first.mean() - second.mean())
        se = math.hypot(_batch_se(first), _batch_se(second))
    return ChainDiagnostics(d2_iam, ld.copy(), stat, se, d2_truth)
