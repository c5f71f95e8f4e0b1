"""Multivariate Gaussian negative log-likelihood, torch edition.

Must stay numerically interchangeable with the reference evaluator: the
covariance is Sigma = L L^T with softplus(raw) + 1e-6 on the diagonal of L,
raw parameter order [d0, d1, d2, l10, l20, l21], and the loss is

    0.5 (x - mu)^T Sigma^-1 (x - mu) + 0.5 log|Sigma| + (3/2) log(2 pi)

solved through the factor, never through an explicit inverse.
"""

from __future__ import annotations

import math

import torch

EPS = 1e-6
LOG_2PI = math.log(2.0 * math.pi)


def cholesky_from_raw(chol_raw: torch.Tensor) -> torch.Tensor:
    """(B, 6) raw parameters -> (B, 3, 3) lower-triangular factors."""
    d = torch.nn.functional.softplus(chol_raw[:, :3]) + EPS
    L = chol_raw.new_zeros(chol_raw.shape[0], 3, 3)
    L[:, 0, 0] = d[:, 0]
    L[:, 1, 1] = d[:, 1]
    L[:, 2, 2] = d[:, 2]
    L[:, 1, 0] = chol_raw[:, 3]
    L[:, 2, 0] = chol_raw[:, 4]
    L[:, 2, 1] = chol_raw[:, 5]
    return L


def nll_per_sample(x: torch.Tensor, means: torch.Tensor,
                   chol_raw: torch.Tensor) -> torch.Tensor:
    """Per-sample losses, shape (B,)."""
    L = cholesky_from_raw(chol_raw)
    r = (x - means).unsqueeze(-1)
    u = torch.linalg.solve_triangular(L, r, upper=False).squeeze(-1)
    mahalanobis = (u * u).sum(dim=-1)
    log_det = 2.0 * torch.log(torch.diagonal(L, dim1=-2, dim2=-1)).sum(dim=-1)
    return 0.5 * mahalanobis + 0.5 * log_det + 1.5 * LOG_2PI


def nll(x: torch.Tensor, means: torch.Tensor, chol_raw: torch.Tensor) -> torch.Tensor:
    """Batch-mean loss used for training."""
    return nll_per_sample(x, means, chol_raw).mean()


def export_parity_tuples(path, n: int = 100, seed: int = 0):
    """Write (x, mu, chol_raw, loss) tuples for cross-checking the evaluator.

    The reference implementation must reproduce each loss to 1e-6 relative;
    double precision keeps the comparison about formulas, not dtypes.
    """
    import json

    generator = torch.Generator().manual_seed(seed)
    x = torch.rand(n, 3, generator=generator, dtype=torch.float64)
    means = torch.rand(n, 3, generator=generator, dtype=torch.float64)
    chol_raw = torch.randn(n, 6, generator=generator, dtype=torch.float64)
    losses = nll_per_sample(x, means, chol_raw)
    payload = [{"x": xi.tolist(), "mean": mi.tolist(), "chol_raw": ci.tolist(),
                "loss": float(li)}
               for xi, mi, ci, li in zip(x, means, chol_raw, losses)]
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=1)
    return payload
