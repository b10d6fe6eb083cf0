"""AFE of every estimator against K (and SNR) for both models and priors.

Writes one CSV per panel. The default trial count is small enough for a
laptop; raise --n-trials for smoother curves.

Usage: python scripts/afe_sweeps.py [--out-dir results/sweeps] [--n-trials 50]
"""

import argparse
import time
from pathlib import Path

from mmsd.experiments import SweepConfig, run_afe_sweep

PANELS = {
    "linear_K": dict(model="linear", sweep="K", grid=(1, 2, 3, 5, 7, 10, 15, 20), snr_db=5.0),
    "linear_SNR": dict(model="linear", sweep="SNR", grid=(-10.0, -5.0, 0.0, 5.0, 10.0, 15.0), k=5),
    "cov_K": dict(model="covariance", sweep="K", grid=(3, 5, 10, 20), snr_lo_db=5.0, snr_hi_db=10.0),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="results/sweeps")
    ap.add_argument("--n-trials", type=int, default=50)
    ap.add_argument("--n-r", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--panels", default=",".join(PANELS), help="comma-separated subset of " + ",".join(PANELS))
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.panels.split(","):
        for prior in ("bingham", "vmf"):
            cfg = SweepConfig(prior_kind=prior, n_trials=args.n_trials, n_r=args.n_r, master_seed=args.seed,
                              **PANELS[name])
            t0 = time.perf_counter()
            table = run_afe_sweep(cfg, threads=args.threads)
            path = out / f"{name}_{prior}.csv"
            table.write_csv(path)
            print(f"{path} ({time.perf_counter() - t0:.0f} s)")


if __name__ == "__main__":
    main()
