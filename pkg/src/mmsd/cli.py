"""Command-line entry point: ``mmsd {priors,sweep,hyper-synth,hyper-analyze,diagnostics}``.

Parameters resolve as built-in defaults, then ``--config`` (a JSON object, or
a sidecar written by an earlier run), then explicit flags.  Every CSV gets a
``<file>.json`` sidecar holding the resolved config, so passing a sidecar back
through ``--config`` repeats the run.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys

import numpy as np

from . import __version__
from .estimators import EstimatorKind
from .experiments import SweepConfig, chain_diagnostics, canonical_ubar, prior_characterization, run_afe_sweep
from .hyperspectral import (
    DEFAULT_BANDS,
    DEFAULT_NOISE_SIGMA2,
    global_pca_basis,
    local_mmsd_map,
    synthetic_scene,
)
from .io import FormatError, grid_csv_string, read_cube, read_json, sidecar_path, write_cube, write_json, write_map
from .models import (
    CovModelSpec,
    LinearModelSpec,
    generate_cov_data,
    generate_linear_data,
    run_cov_chain,
    run_lm_chain,
    snr_to_variance,
)
from .sampling import sample_prior

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 2, 3, 4
SEED_MAX = 2**64 - 1


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text):
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    return [int(v) for v in vals]


def _names(text):
    return [t.strip() for t in text.split(",") if t.strip()]


# name -> (default, flag type, help)
PRIORS_PARAMS = {
    "n": (20, int, "ambient dimension N"),
    "p": (5, int, "subspace dimension"),
    "kappa_grid": ([float(k) for k in range(0, 105, 5)], _floats, "comma-separated kappa values"),
    "n_draws": (200, int, "prior draws per kappa"),
    "burnin": (50, int, "prior chain burn-in sweeps"),
    "thin": (2, int, "prior chain thinning"),
    "hist_kappa": (20.0, float, "kappa for the angle histograms"),
}

SWEEP_PARAMS = {
    "model": ("linear", str, "linear | covariance"),
    "prior_kind": ("bingham", str, "bingham | vmf"),
    "n": (20, int, "ambient dimension N"),
    "p": (5, int, "subspace dimension"),
    "kappa": (20.0, float, "prior concentration"),
    "sweep": ("K", str, "sweep variable: K | SNR"),
    "grid": ([2, 5, 10], _floats, "comma-separated sweep values"),
    "k": (5, int, "snapshots when sweeping SNR"),
    "snr_db": (5.0, float, "SNR in dB when sweeping K (linear model)"),
    "sigma2_n": (1.0, float, "noise variance"),
    "snr_lo_db": (5.0, float, "covariance model lower SNR bound, dB"),
    "snr_hi_db": (10.0, float, "covariance model upper SNR bound, dB"),
    "n_trials": (50, int, "Monte-Carlo trials"),
    "n_bi": (10, int, "burn-in sweeps"),
    "n_r": (200, int, "retained sweeps"),
    "prior_burnin": (50, int, "burn-in for drawing the true U"),
    "estimators": (None, _names, "comma-separated estimator filter"),
}

SYNTH_PARAMS = {
    "width": (50, int, "image width"),
    "height": (50, int, "image height"),
    "bands": (DEFAULT_BANDS, int, "spectral bands"),
    "noise_sigma2": (DEFAULT_NOISE_SIGMA2, float, "additive noise variance"),
}

ANALYZE_PARAMS = {
    "cube": (None, str, "input cube file (sidecar at <cube>.json)"),
    "p": (2, int, "subspace dimension (R - 1)"),
    "eta": ([0.0, 0.5, 50.0], _floats, "comma-separated eta values"),
    "k": (4, int, "patch size: pixel plus k-1 neighbours"),
    "sigma2_n": (None, float, "noise variance; default is a plug-in estimate"),
}

DIAG_PARAMS = {
    "model": ("linear", str, "linear | covariance"),
    "prior_kind": ("bingham", str, "bingham | vmf"),
    "n": (20, int, "ambient dimension N"),
    "p": (5, int, "subspace dimension"),
    "kappa": (20.0, float, "prior concentration"),
    "k": (5, int, "snapshots"),
    "snr_db": (5.0, float, "linear model SNR, dB"),
    "sigma2_n": (1.0, float, "noise variance"),
    "snr_lo_db": (5.0, float, "covariance model lower SNR bound, dB"),
    "snr_hi_db": (10.0, float, "covariance model upper SNR bound, dB"),
    "n_bi": (10, int, "burn-in sweeps"),
    "n_r": (1000, int, "retained sweeps"),
}

COMMAND_PARAMS = {
    "priors": PRIORS_PARAMS,
    "sweep": SWEEP_PARAMS,
    "hyper-synth": SYNTH_PARAMS,
    "hyper-analyze": ANALYZE_PARAMS,
    "diagnostics": DIAG_PARAMS,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    common.add_argument("--out-dir", default=".", help="output directory")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker processes (default: all cores)")
    common.add_argument("--config", default=None, help="JSON config or an earlier sidecar")
    parser = argparse.ArgumentParser(prog="mmsd", description="Bayesian subspace estimation experiments")
    parser.add_argument("--version", action="version", version=f"mmsd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "priors": "AFE of prior draws versus kappa, and angle histograms",
        "sweep": "estimator AFE sweep over K or SNR",
        "hyper-synth": "write a synthetic GBM cube and its gamma map",
        "hyper-analyze": "local-MMSD nonlinearity maps of a cube",
        "diagnostics": "trace diagnostics of one posterior chain",
    }
    for name, params in COMMAND_PARAMS.items():
        sp = sub.add_parser(name, parents=[common], help=helps[name])
        for key, (_, typ, hlp) in params.items():
            sp.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None, help=hlp)
    return parser


def load_config_file(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"config file not found: {path}")
    obj = read_json(path)
    if isinstance(obj, dict) and isinstance(obj.get("config"), dict):
        obj = obj["config"]
    if not isinstance(obj, dict):
        raise FormatError("config", "must be a JSON object")
    return obj


def resolve_config(args):
    params = COMMAND_PARAMS[args.command]
    cfg = {k: v[0] for k, v in params.items()}
    cfg["seed"] = 0
    if args.config:
        file_cfg = load_config_file(args.config)
        unknown = sorted(set(file_cfg) - set(cfg))
        if unknown:
            raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
        cfg.update(file_cfg)
    for k in params:
        v = getattr(args, k)
        if v is not None:
            cfg[k] = v
    if args.seed is not None:
        cfg["seed"] = args.seed
    seed = cfg["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= SEED_MAX:
        raise UsageError(f"seed must be an integer in [0, 2^64 - 1], got {seed!r}")
    return cfg


def _sidecar(command, cfg, extra=None):
    meta = {
        "command": command,
        "config": cfg,
        "versions": {"mmsd": __version__, "numpy": np.__version__, "python": platform.python_version()},
    }
    if extra:
        meta.update(extra)
    return meta


def _write_csv(path, text, meta):
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    write_json(sidecar_path(path), meta)
    return path


def _require_nonempty(cfg, key):
    if not cfg[key]:
        raise UsageError(f"--{key.replace('_', '-')} is empty")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_priors(cfg, out_dir, threads):
    _require_nonempty(cfg, "kappa_grid")
    if any(k < 0 for k in cfg["kappa_grid"]):
        raise UsageError("kappa values must be nonnegative")
    rng = np.random.default_rng(cfg["seed"])
    res = prior_characterization(cfg["n"], cfg["p"], cfg["kappa_grid"], cfg["n_draws"], rng,
                                 hist_kappa=cfg["hist_kappa"], burnin=cfg["burnin"], thin=cfg["thin"],
                                 threads=threads)
    meta = _sidecar("priors", cfg)
    out = [_write_csv(os.path.join(out_dir, "priors_afe.csv"), res.afe_csv_string(), meta)]
    for kind in ("bingham", "vmf"):
        path = os.path.join(out_dir, f"priors_angles_{kind}.csv")
        out.append(_write_csv(path, res.hist_csv_string(kind), meta))
    return out


def sweep_config_from(cfg):
    if cfg["estimators"] is not None:
        valid = [e.value for e in EstimatorKind]
        bad = [e for e in cfg["estimators"] if e not in valid]
        if bad:
            raise UsageError(f"unknown estimator(s) {', '.join(bad)}; valid names: {', '.join(valid)}")
    _require_nonempty(cfg, "grid")
    grid = [int(v) if cfg["sweep"] == "K" and float(v).is_integer() else float(v) for v in cfg["grid"]]
    try:
        return SweepConfig(
            model=cfg["model"], prior_kind=cfg["prior_kind"], n=cfg["n"], p=cfg["p"], kappa=cfg["kappa"],
            sweep=cfg["sweep"], grid=tuple(grid), k=cfg["k"], snr_db=cfg["snr_db"], sigma2_n=cfg["sigma2_n"],
            snr_lo_db=cfg["snr_lo_db"], snr_hi_db=cfg["snr_hi_db"], n_trials=cfg["n_trials"],
            n_bi=cfg["n_bi"], n_r=cfg["n_r"], prior_burnin=cfg["prior_burnin"], master_seed=cfg["seed"],
            estimators=None if cfg["estimators"] is None else tuple(cfg["estimators"]),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_sweep(cfg, out_dir, threads):
    sc = sweep_config_from(cfg)
    table = run_afe_sweep(sc, threads=threads)
    meta = _sidecar("sweep", cfg, {"sweep_config": sc.to_dict(), "config_hash": sc.digest(),
                                   "wall_time_s": table.metadata["wall_time_s"]})
    return [_write_csv(os.path.join(out_dir, "sweep.csv"), table.to_csv_string(), meta)]


def cmd_hyper_synth(cfg, out_dir, threads):
    if cfg["noise_sigma2"] < 0:
        raise UsageError("noise-sigma2 must be nonnegative")
    try:
        scene = synthetic_scene(cfg["width"], cfg["height"], cfg["bands"], cfg["noise_sigma2"],
                                np.random.default_rng(cfg["seed"]))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    meta = _sidecar("hyper-synth", cfg)
    cube_path = os.path.join(out_dir, "cube.f64")
    write_cube(cube_path, scene.cube, {"command": "hyper-synth", "config": cfg})
    gpath = _write_csv(os.path.join(out_dir, "gamma_true.csv"), grid_csv_string(scene.gamma12), meta)
    return [cube_path, gpath]


def _eta_tag(eta):
    return f"{eta:g}".replace("+", "")


def cmd_hyper_analyze(cfg, out_dir, threads):
    if not cfg["cube"]:
        raise UsageError("--cube is required")
    _require_nonempty(cfg, "eta")
    if any(e < 0 for e in cfg["eta"]):
        raise UsageError("eta values must be nonnegative")
    if not os.path.exists(cfg["cube"]):
        raise FileNotFoundError(f"cube file not found: {cfg['cube']}")
    cube, _ = read_cube(cfg["cube"])
    if not 1 <= cfg["p"] <= min(cube.n_pixels, cube.bands):
        raise UsageError(f"p must lie in [1, {min(cube.n_pixels, cube.bands)}]")
    if cfg["k"] < 2 or cfg["k"] > cube.n_pixels:
        raise UsageError(f"k must lie in [2, {cube.n_pixels}]")
    ubar = global_pca_basis(cube, cfg["p"])
    out = []
    for eta in cfg["eta"]:
        nmap = local_mmsd_map(cube, ubar, eta, cfg["k"], cfg["sigma2_n"], threads=threads)
        path = os.path.join(out_dir, f"map_eta_{_eta_tag(eta)}.csv")
        write_map(path, nmap, _sidecar("hyper-analyze", cfg))
        out.append(path)
    return out


def cmd_diagnostics(cfg, out_dir, threads):
    if cfg["model"] not in ("linear", "covariance"):
        raise UsageError(f"model must be 'linear' or 'covariance', got {cfg['model']!r}")
    if cfg["prior_kind"] not in ("bingham", "vmf"):
        raise UsageError(f"prior-kind must be 'bingham' or 'vmf', got {cfg['prior_kind']!r}")
    rng = np.random.default_rng(cfg["seed"])
    ubar = canonical_ubar(cfg["n"], cfg["p"])
    truth = sample_prior(ubar, cfg["kappa"], cfg["prior_kind"], rng)
    if cfg["model"] == "linear":
        spec = LinearModelSpec(ubar, cfg["kappa"], cfg["sigma2_n"], cfg["prior_kind"])
        y = generate_linear_data(truth, snr_to_variance(cfg["snr_db"], cfg["sigma2_n"]), cfg["sigma2_n"],
                                 cfg["k"], rng)
        chain = run_lm_chain(y, spec, cfg["n_bi"], cfg["n_r"], rng)
    else:
        spec = CovModelSpec.from_snr_bounds(ubar, cfg["kappa"], cfg["snr_lo_db"], cfg["snr_hi_db"],
                                            cfg["sigma2_n"], cfg["prior_kind"])
        gamma = rng.uniform(spec.gamma_lo, spec.gamma_hi, cfg["p"])
        y = generate_cov_data(truth, gamma, spec.nu, cfg["k"], rng)
        chain = run_cov_chain(y, spec, cfg["n_bi"], cfg["n_r"], rng)
    diag = chain_diagnostics(chain, truth)
    meta = _sidecar("diagnostics", cfg)
    trace = _write_csv(os.path.join(out_dir, "diagnostics_trace.csv"), diag.csv_string(), meta)
    summary = ("statistic,value\n"
               f"stationarity,{repr(round(diag.stationarity, 12))}\n"
               f"stationarity_stderr,{repr(round(diag.stationarity_stderr, 12))}\n"
               f"mean_d2_to_iam,{repr(round(float(diag.d2_to_iam.mean()), 12))}\n"
               f"mean_d2_to_truth,{repr(round(float(diag.d2_to_truth.mean()), 12))}\n")
    return [trace, _write_csv(os.path.join(out_dir, "diagnostics_summary.csv"), summary, meta)]


COMMANDS = {
    "priors": cmd_priors,
    "sweep": cmd_sweep,
    "hyper-synth": cmd_hyper_synth,
    "hyper-analyze": cmd_hyper_analyze,
    "diagnostics": cmd_diagnostics,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.threads is not None and args.threads < 1:
            raise UsageError("--threads must be >= 1")
        os.makedirs(args.out_dir, exist_ok=True)
        paths = COMMANDS[args.command](cfg, args.out_dir, args.threads)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mmsd {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, FormatError, json.JSONDecodeError) as exc:
        print(f"mmsd {args.command}: io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"mmsd {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, TypeError, KeyError) as exc:
        # bad parameter combinations surfacing from the library
        print(f"mmsd {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
