"""Desk-scale experiment: density estimation on 2-d toy distributions.

Trains the neural estimator on the isotropic Gaussian and the 9-component
mixture, fits the cross-validated KDE baseline on the same data, reports
test NLL for both, and exports log-density grid CSVs for contour plotting.

    python scripts/run_toy_experiments.py --outdir results [--quick] [--plot]
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

import ddde
from ddde._util import STREAM_FOLDS, STREAM_GENERATOR, consumer_rng
from ddde.evaluation import grid_eval, nll, normalization_integral, save_grid_csv
from ddde.kde import (
    KDE_BANDWIDTH_GRID,
    KdeModel,
    kde_log_density,
    kde_nll,
    select_bandwidth_cv,
)


def make_data(name, n, seed):
    rng = consumer_rng(seed, STREAM_GENERATOR)
    if name == "gaussian":
        return ddde.gen_gaussian(n, (0.5, 0.5), 0.1, rng)
    return ddde.gen_gaussian_mixture(n, rng)


def run_one(name, seed, outdir, config, n_test):
    domain = ddde.Domain.unit(2)
    train_data = make_data(name, 2048, seed)
    test_data = make_data(name, n_test, seed + 1000)

    t0 = time.time()
    model, history = ddde.train(train_data, domain, config)
    ddde_nll = nll(model.log_density, test_data, domain=domain)

    bandwidth = select_bandwidth_cv(train_data, KDE_BANDWIDTH_GRID, k=5,
                                    rng=consumer_rng(seed, STREAM_FOLDS))
    kde_model = KdeModel(train_data, bandwidth)
    baseline_nll = kde_nll(kde_model, test_data)

    grid = grid_eval(model.log_density, domain, 200)
    save_grid_csv(grid, outdir / f"{name}_ddde_grid.csv")
    kde_grid = grid_eval(lambda pts: kde_log_density(kde_model, pts), domain, 200)
    save_grid_csv(kde_grid, outdir / f"{name}_kde_grid.csv")
    ddde.save_csv(train_data, outdir / f"{name}_train.csv")

    print(f"[{name}] seed={seed}  ({time.time() - t0:.0f}s)")
    print(f"  final objective       = {history.objective[-1]:.6g}")
    print(f"  normalization integral= {normalization_integral(grid):.6g}")
    print(f"  test NLL  ddde        = {ddde_nll:.6g}")
    print(f"  test NLL  kde (b={bandwidth:g}) = {baseline_nll:.6g}")
    return ddde_nll, baseline_nll


def maybe_plot(outdir, names):
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not installed; skipping contour plots")
        return
    for name in names:
        fig, axes = plt.subplots(1, 2, figsize=(11, 5))
        train = np.loadtxt(outdir / f"{name}_train.csv", delimiter=",")
        for ax, kind in zip(axes, ("ddde", "kde")):
            rows = np.loadtxt(outdir / f"{name}_{kind}_grid.csv",
                              delimiter=",", skiprows=1)
            res = int(np.sqrt(rows.shape[0]))
            ax.contourf(rows[:, 0].reshape(res, res), rows[:, 1].reshape(res, res),
                        rows[:, 2].reshape(res, res), levels=30)
            ax.scatter(train[:, 0], train[:, 1], s=2, c="white", alpha=0.4)
            ax.set_title(f"{name} / {kind}")
        fig.savefig(outdir / f"{name}_contours.png", dpi=120)
        plt.close(fig)
        print(f"wrote {outdir / f'{name}_contours.png'}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", default="results")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--quick", action="store_true",
                        help="small network and few epochs, for a fast look")
    parser.add_argument("--plot", action="store_true")
    args = parser.parse_args()

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.quick:
        config = ddde.TrainConfig(epochs=30, hidden=(64, 64), seed=args.seed)
        n_test = 2000
    else:
        config = ddde.TrainConfig(seed=args.seed)
        n_test = 10000

    names = ("gaussian", "mixture")
    for name in names:
        run_one(name, args.seed, outdir, config, n_test)
    if args.plot:
        maybe_plot(outdir, names)


if __name__ == "__main__":
    main()
