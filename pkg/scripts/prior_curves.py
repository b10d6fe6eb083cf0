"""Mean AFE of prior draws against kappa, plus principal-angle histograms.

Usage: python scripts/prior_curves.py [--out-dir results/priors] [--n-draws 200]
"""

import argparse
from pathlib import Path

import numpy as np

from mmsd.experiments import prior_characterization


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out-dir", default="results/priors")
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--p", type=int, default=5)
    ap.add_argument("--n-draws", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = np.arange(0.0, 105.0, 5.0)
    res = prior_characterization(args.n, args.p, grid, args.n_draws, np.random.default_rng(args.seed),
                                 hist_kappa=20.0, threads=args.threads)
    (out / "priors_afe.csv").write_text(res.afe_csv_string())
    for kind in ("bingham", "vmf"):
        (out / f"priors_angles_{kind}.csv").write_text(res.hist_csv_string(kind))
    print(f"{'kappa':>6} {'bingham':>8} {'vmf':>8}")
    for k in grid:
        print(f"{k:6.0f} {res.mean_afe('bingham', k):8.3f} {res.mean_afe('vmf', k):8.3f}")


if __name__ == "__main__":
    main()
