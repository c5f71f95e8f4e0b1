"""Correlated-regression loss and evaluation metrics.

The loss is the negative log-likelihood of the true triplet under a predicted
3-variate Gaussian:

    0.5 * (x - mu)^T Sigma^-1 (x - mu) + 0.5 * log|Sigma| + (3/2) log(2 pi)

Sigma is parameterized by its lower Cholesky factor L (Sigma = L L^T): the
three diagonal entries are stored pre-activation and mapped through
softplus + EPS, the three strict-lower entries are unconstrained.  Raw vector
order is [d0, d1, d2, l10, l20, l21].  Any trainer must use the same
parameterization so its loss values are comparable with this reference.

All mean/label vectors here live in normalized [0,1] space, order
(n2, I_sat, alpha).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

EPS = 1e-6            # floor added to softplus'd Cholesky diagonals
DIM = 3
LOG_2PI = math.log(2.0 * math.pi)

PARAM_NAMES = ("n2", "isat", "alpha")

CSV_HEADER = ("index", "n2_pred", "isat_pred", "alpha_pred",
              "n2_true", "isat_true", "alpha_true")


def softplus(x):
    return np.logaddexp(0.0, x)


def softplus_inv(y):
    """Inverse of softplus for y > 0: log(exp(y) - 1), computed stably."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(y <= 0):
        raise ValueError("softplus_inv needs positive input")
    return y + np.log1p(-np.exp(-y))


@dataclass
class GaussianPrediction:
    """Predicted mean triplet plus raw Cholesky parameters of the covariance."""

    mean: np.ndarray       # (3,)
    chol_raw: np.ndarray   # (6,) = [d0, d1, d2, l10, l20, l21]

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).reshape(DIM)
        self.chol_raw = np.asarray(self.chol_raw, dtype=np.float64).reshape(6)
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.chol_raw))):
            raise ValueError("prediction parameters must be finite")

    def cholesky(self) -> np.ndarray:
        """Lower-triangular L with softplus(raw)+EPS on the diagonal."""
        d = softplus(self.chol_raw[:3]) + EPS
        l10, l20, l21 = self.chol_raw[3:]
        return np.array([[d[0], 0.0, 0.0],
                         [l10, d[1], 0.0],
                         [l20, l21, d[2]]])

    def covariance(self) -> np.ndarray:
        L = self.cholesky()
        return L @ L.T

    @classmethod
    def from_cholesky(cls, mean, L) -> "GaussianPrediction":
        """Build from an explicit factor; diagonal must exceed EPS."""
        L = np.asarray(L, dtype=np.float64)
        diag = np.diag(L)
        if np.any(diag <= EPS):
            raise ValueError(f"Cholesky diagonal must exceed {EPS}")
        raw = np.concatenate([softplus_inv(diag - EPS),
                              [L[1, 0], L[2, 0], L[2, 1]]])
        return cls(np.asarray(mean, dtype=np.float64), raw)


def _forward_substitution(L: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Solve L u = r for 3x3 lower-triangular L; vectorizes over stacks.

    L has shape (..., 3, 3), r shape (..., 3).  Written out explicitly: at
    d = 3 this beats generic triangular solves and never forms Sigma^-1.
    """
    u0 = r[..., 0] / L[..., 0, 0]
    u1 = (r[..., 1] - L[..., 1, 0] * u0) / L[..., 1, 1]
    u2 = (r[..., 2] - L[..., 2, 0] * u0 - L[..., 2, 1] * u1) / L[..., 2, 2]
    return np.stack([u0, u1, u2], axis=-1)


def _back_substitution(L: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Solve L^T v = u, the transpose counterpart of _forward_substitution."""
    v2 = u[..., 2] / L[..., 2, 2]
    v1 = (u[..., 1] - L[..., 2, 1] * v2) / L[..., 1, 1]
    v0 = (u[..., 0] - L[..., 1, 0] * v1 - L[..., 2, 0] * v2) / L[..., 0, 0]
    return np.stack([v0, v1, v2], axis=-1)


def _chol_from_raw(chol_raw: np.ndarray) -> np.ndarray:
    """Raw (..., 6) parameters to stacked (..., 3, 3) lower factors."""
    chol_raw = np.asarray(chol_raw, dtype=np.float64)
    d = softplus(chol_raw[..., :3]) + EPS
    L = np.zeros(chol_raw.shape[:-1] + (DIM, DIM))
    L[..., 0, 0] = d[..., 0]
    L[..., 1, 1] = d[..., 1]
    L[..., 2, 2] = d[..., 2]
    L[..., 1, 0] = chol_raw[..., 3]
    L[..., 2, 0] = chol_raw[..., 4]
    L[..., 2, 1] = chol_raw[..., 5]
    return L


def nll(x, pred: GaussianPrediction) -> float:
    """Negative log-likelihood of truth x under one prediction."""
    x = np.asarray(x, dtype=np.float64).reshape(DIM)
    if not np.all(np.isfinite(x)):
        raise ValueError("truth vector must be finite")
    L = pred.cholesky()
    assert np.all(np.diag(L) >= EPS)
    u = _forward_substitution(L, x - pred.mean)
    log_det = 2.0 * np.sum(np.log(np.diag(L)))
    return float(0.5 * np.dot(u, u) + 0.5 * log_det + 0.5 * DIM * LOG_2PI)


def nll_batch(x: np.ndarray, means: np.ndarray, chol_raws: np.ndarray) -> float:
    """Mean NLL over a batch of (truth, mean, raw-Cholesky) rows."""
    x = np.asarray(x, dtype=np.float64)
    means = np.asarray(means, dtype=np.float64)
    L = _chol_from_raw(chol_raws)
    u = _forward_substitution(L, x - means)
    log_det = 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)
    per_sample = 0.5 * np.sum(u * u, axis=-1) + 0.5 * log_det + 0.5 * DIM * LOG_2PI
    return float(per_sample.mean())


def nll_gradient(pred: GaussianPrediction, x) -> np.ndarray:
    """Analytic gradient of nll w.r.t. the 9 raw parameters.

    Order: [mean (3), chol_raw (6)].  Derivation: with r = x - mu,
    u = L^-1 r and v = L^-T u = Sigma^-1 r,

        d nll / d mu   = -v
        d nll / d L_ij = -v_i u_j + delta_ij / L_ii   (lower triangle)

    and the diagonal entries chain through d L_ii / d raw = sigmoid(raw).
    """
    x = np.asarray(x, dtype=np.float64).reshape(DIM)
    L = pred.cholesky()
    u = _forward_substitution(L, x - pred.mean)
    v = _back_substitution(L, u)
    sig = 1.0 / (1.0 + np.exp(-pred.chol_raw[:3]))
    g_diag = (-v * u + 1.0 / np.diag(L)) * sig
    g_lower = np.array([-v[1] * u[0], -v[2] * u[0], -v[2] * u[1]])
    return np.concatenate([-v, g_diag, g_lower])


def nll_gradient_check(pred: GaussianPrediction, x, grad: np.ndarray,
                       h: float = 1e-5) -> float:
    """Worst relative deviation between grad and central finite differences.

    The caller supplies the gradient (analytic or autodiff) in the same
    9-parameter order as nll_gradient.  Deviations are scaled by the largest
    gradient magnitude so near-zero components do not blow up the ratio.
    """
    if not 1e-7 <= h <= 1e-3:
        raise ValueError("finite-difference step h must lie in [1e-7, 1e-3]")
    grad = np.asarray(grad, dtype=np.float64).reshape(9)
    x = np.asarray(x, dtype=np.float64).reshape(DIM)
    fd = np.empty(9)
    for i in range(9):
        mean_p, raw_p = pred.mean.copy(), pred.chol_raw.copy()
        mean_m, raw_m = pred.mean.copy(), pred.chol_raw.copy()
        if i < DIM:
            mean_p[i] += h
            mean_m[i] -= h
        else:
            raw_p[i - DIM] += h
            raw_m[i - DIM] -= h
        fd[i] = (nll(x, GaussianPrediction(mean_p, raw_p)) -
                 nll(x, GaussianPrediction(mean_m, raw_m))) / (2.0 * h)
    scale = max(np.max(np.abs(fd)), np.max(np.abs(grad)), 1e-12)
    return float(np.max(np.abs(fd - grad)) / scale)


@dataclass
class MetricsReport:
    """Per-parameter and aggregate regression metrics on normalized labels."""

    mae_percent: np.ndarray        # (3,) 100 * mean |pred - true|
    r2: np.ndarray                 # (3,) NaN where undefined
    r2_defined: np.ndarray         # (3,) bool, False for zero-variance truths
    sigma: np.ndarray              # (3,) residual standard deviation
    aggregate_mae_percent: float
    sample_count: int

    def to_dict(self) -> dict:
        per_param = {}
        for i, name in enumerate(PARAM_NAMES):
            per_param[name] = {
                "mae_percent": float(self.mae_percent[i]),
                "r2": float(self.r2[i]) if self.r2_defined[i] else None,
                "r2_defined": bool(self.r2_defined[i]),
                "sigma": float(self.sigma[i]),
            }
        return {
            "per_parameter": per_param,
            "aggregate_mae_percent": float(self.aggregate_mae_percent),
            "sample_count": int(self.sample_count),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def metrics(pred_means: np.ndarray, truths: np.ndarray) -> MetricsReport:
    """MAE (percent of the normalized range), R^2, and residual sigma per axis."""
    preds = np.asarray(pred_means, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    if preds.shape != truths.shape or preds.ndim != 2 or preds.shape[1] != DIM:
        raise ValueError(f"expected matching (N, 3) arrays, got "
                         f"{preds.shape} and {truths.shape}")
    if len(preds) < 2:
        raise ValueError("need at least 2 samples")

    residuals = preds - truths
    mae = 100.0 * np.mean(np.abs(residuals), axis=0)
    sigma = np.std(residuals, axis=0)
    ss_res = np.sum(residuals ** 2, axis=0)
    ss_tot = np.sum((truths - truths.mean(axis=0)) ** 2, axis=0)
    defined = ss_tot > 0
    r2 = np.where(defined, 1.0 - ss_res / np.where(defined, ss_tot, 1.0), np.nan)
    return MetricsReport(
        mae_percent=mae,
        r2=r2,
        r2_defined=defined,
        sigma=sigma,
        aggregate_mae_percent=float(mae.mean()),
        sample_count=len(preds),
    )


@dataclass
class BinnedTrend:
    """Equal-width-bin summary of predictions against truths on [0, 1]."""

    edges: np.ndarray        # (n_bins + 1,)
    centers: np.ndarray      # (n_bins,)
    mean_pred: np.ndarray    # (n_bins,) NaN for empty bins
    sigma: np.ndarray        # (n_bins,) residual std, NaN for empty bins
    count: np.ndarray        # (n_bins,) samples per bin


def binned_trend(preds: np.ndarray, truths: np.ndarray, n_bins: int) -> BinnedTrend:
    """Per-bin mean prediction and residual spread along the truth axis."""
    if n_bins < 2:
        raise ValueError("need at least 2 bins")
    preds = np.asarray(preds, dtype=np.float64).ravel()
    truths = np.asarray(truths, dtype=np.float64).ravel()
    if preds.shape != truths.shape:
        raise ValueError("preds and truths must have the same length")
    edges = np.linspace(0.0, 1.0, n_bins + 1)
    which = np.clip(np.floor(truths * n_bins).astype(int), 0, n_bins - 1)
    mean_pred = np.full(n_bins, np.nan)
    sigma = np.full(n_bins, np.nan)
    count = np.zeros(n_bins, dtype=int)
    for b in range(n_bins):
        mask = which == b
        count[b] = int(mask.sum())
        if count[b]:
            mean_pred[b] = preds[mask].mean()
            sigma[b] = np.std(preds[mask] - truths[mask])
    return BinnedTrend(edges=edges, centers=0.5 * (edges[:-1] + edges[1:]),
                       mean_pred=mean_pred, sigma=sigma, count=count)


def write_predictions_csv(path: str | Path, indices, preds: np.ndarray,
                          truths: np.ndarray):
    """Write the prediction exchange file (normalized values, 12 sig. digits)."""
    preds = np.asarray(preds, dtype=np.float64)
    truths = np.asarray(truths, dtype=np.float64)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_HEADER)
        for idx, p, t in zip(indices, preds, truths):
            writer.writerow([int(idx)] + [f"{v:.12g}" for v in (*p, *t)])


def read_predictions_csv(path: str | Path):
    """Read an exchange file; returns (indices, preds (N,3), truths (N,3))."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError("empty predictions file") from None
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise ValueError(
                f"bad header {header!r}, expected {','.join(CSV_HEADER)}")
        indices, preds, truths = [], [], []
        for row_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 7:
                raise ValueError(f"line {row_number}: expected 7 fields, got {len(row)}")
            try:
                indices.append(int(row[0]))
                values = [float(v) for v in row[1:]]
            except ValueError as exc:
                raise ValueError(f"line {row_number}: {exc}") from None
            preds.append(values[:3])
            truths.append(values[3:])
    if not indices:
        raise ValueError("predictions file has no data rows")
    return (np.array(indices), np.array(preds), np.array(truths))
