"""Score a predictions file and draw predicted-versus-true diagnostics.

Builds a synthetic predictor with realistic per-parameter residuals, writes
the exchange CSV, and runs the same metrics the CLI `eval` subcommand uses:
MAE in percent of the normalized range, per-parameter R^2, residual sigma,
and the binned trend behind the shaded-band plots.
"""

from pathlib import Path

import numpy as np

from satkerr import (ParameterRanges, binned_trend, enumerate_grid, metrics,
                     normalize_labels, read_predictions_csv,
                     write_predictions_csv)
from satkerr.cli import _plot_parameter
from satkerr.regression import PARAM_NAMES

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

ranges = ParameterRanges(n2_count=20, isat_count=20, alpha_count=20)
truths = normalize_labels(enumerate_grid(ranges), ranges)

rng = np.random.default_rng(11)
sigmas = (0.049, 0.028, 0.033)
preds = truths + rng.normal(0.0, sigmas, size=truths.shape)

csv_path = OUT / "synthetic_predictions.csv"
write_predictions_csv(csv_path, np.arange(len(truths)), preds, truths)
indices, preds, truths = read_predictions_csv(csv_path)
print(f"{len(indices)} prediction rows in {csv_path}")

report = metrics(preds, truths)
for i, name in enumerate(PARAM_NAMES):
    print(f"{name:>5s}: MAE {report.mae_percent[i]:5.2f}%  "
          f"R^2 {report.r2[i]:.4f}  sigma {report.sigma[i]:.4f}")
print(f"aggregate MAE: {report.aggregate_mae_percent:.2f}%")

trend = binned_trend(preds[:, 0], truths[:, 0], n_bins=10)
print("\nn2 binned trend (center -> mean prediction, residual sigma):")
for c, m, s, n in zip(trend.centers, trend.mean_pred, trend.sigma, trend.count):
    print(f"  {c:.2f} -> {m:.3f} +- {s:.3f}  ({n} samples)")

for i, name in enumerate(PARAM_NAMES):
    _plot_parameter(preds[:, i], truths[:, i], name,
                    float(report.sigma[i]), OUT / f"pred_vs_true_{name}.svg")
print(f"\nwrote pred_vs_true_*.svg under {OUT}")
