"""Two-stage convolutional regression model for (n2, I_sat, alpha).

A ConvNeXt-style backbone embeds the two-channel beam image into a feature
vector.  Stage one runs the features through a fully-connected stack
(768 -> 2048 -> 1024 -> 512 by default, batch-normalized ReLU layers with
30% dropout) and splits the result into pre-predictions for (I_sat, alpha)
plus six raw covariance parameters.  Stage two expands the two
pre-predictions back to width 512, concatenates them with the backbone
features, and runs an analogous stack down to the single n2 output,
shrinking the remaining search to one dimension.  A sigmoid maps the three
assembled means into [0,1]; the covariance parameters follow the shared
Cholesky-softplus scheme of the evaluation loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn


@dataclass(frozen=True)
class ModelConfig:
    depths: tuple = (3, 3, 9, 3)          # ConvNeXt smallest (tiny) variant
    dims: tuple = (96, 192, 384, 768)
    in_channels: int = 2
    head_widths: tuple = (2048, 1024, 512)
    dropout: float = 0.3
    cov_params: int = 6
    cond_expand: int = 512
    stochastic_depth: float = 0.0

    def __post_init__(self):
        if len(self.depths) != len(self.dims):
            raise ValueError("depths and dims must pair up")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if min(self.head_widths) <= 0 or self.cond_expand <= 0:
            raise ValueError("head widths must be positive")

    @classmethod
    def micro(cls) -> "ModelConfig":
        """Tiny stand-in for tests and smoke runs on CPU."""
        return cls(depths=(1, 1, 1, 1), dims=(8, 16, 24, 32),
                   head_widths=(32, 16), cond_expand=16)


class ChannelsFirstLayerNorm(nn.Module):
    """LayerNorm over the channel axis of (B, C, H, W) tensors."""

    def __init__(self, dim: int, eps: float = 1e-6):
        super().__init__()
        self.weight = nn.Parameter(torch.ones(dim))
        self.bias = nn.Parameter(torch.zeros(dim))
        self.eps = eps

    def forward(self, x):
        mean = x.mean(1, keepdim=True)
        var = (x - mean).pow(2).mean(1, keepdim=True)
        x = (x - mean) / torch.sqrt(var + self.eps)
        return x * self.weight[:, None, None] + self.bias[:, None, None]


class Block(nn.Module):
    """Depthwise 7x7 -> LayerNorm -> pointwise MLP (4x) -> layer scale."""

    def __init__(self, dim: int, stochastic_depth: float = 0.0):
        super().__init__()
        self.dwconv = nn.Conv2d(dim, dim, kernel_size=7, padding=3, groups=dim)
        self.norm = nn.LayerNorm(dim, eps=1e-6)
        self.pwconv1 = nn.Linear(dim, 4 * dim)
        self.act = nn.GELU()
        self.pwconv2 = nn.Linear(4 * dim, dim)
        self.gamma = nn.Parameter(1e-6 * torch.ones(dim))
        self.drop_prob = stochastic_depth

    def forward(self, x):
        residual = x
        x = self.dwconv(x)
        x = x.permute(0, 2, 3, 1)
        x = self.pwconv2(self.act(self.pwconv1(self.norm(x))))
        x = (self.gamma * x).permute(0, 3, 1, 2)
        if self.training and self.drop_prob > 0:
            keep = 1.0 - self.drop_prob
            mask = torch.rand(x.shape[0], 1, 1, 1, device=x.device) < keep
            x = x * mask / keep
        return residual + x


class Backbone(nn.Module):
    """ConvNeXt-style feature extractor; output width is dims[-1]."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        stages = [nn.Sequential(
            nn.Conv2d(cfg.in_channels, cfg.dims[0], kernel_size=4, stride=4),
            ChannelsFirstLayerNorm(cfg.dims[0]),
        )]
        for i, (depth, dim) in enumerate(zip(cfg.depths, cfg.dims)):
            if i > 0:
                stages.append(nn.Sequential(
                    ChannelsFirstLayerNorm(cfg.dims[i - 1]),
                    nn.Conv2d(cfg.dims[i - 1], dim, kernel_size=2, stride=2),
                ))
            stages.append(nn.Sequential(
                *[Block(dim, cfg.stochastic_depth) for _ in range(depth)]))
        self.stages = nn.Sequential(*stages)
        self.norm = nn.LayerNorm(cfg.dims[-1], eps=1e-6)

    def forward(self, x):
        x = self.stages(x)
        return self.norm(x.mean(dim=(-2, -1)))


def _fc_stack(in_dim: int, widths: tuple, dropout: float) -> nn.Sequential:
    layers = []
    for width in widths:
        layers += [nn.Linear(in_dim, width), nn.BatchNorm1d(width),
                   nn.ReLU(), nn.Dropout(dropout)]
        in_dim = width
    return nn.Sequential(*layers)


class TwoStageRegressor(nn.Module):
    """Backbone + covariance head for (I_sat, alpha) + conditional n2 head."""

    def __init__(self, cfg: ModelConfig | None = None):
        super().__init__()
        self.cfg = cfg or ModelConfig()
        feat_dim = self.cfg.dims[-1]
        self.backbone = Backbone(self.cfg)
        self.stage1 = _fc_stack(feat_dim, self.cfg.head_widths, self.cfg.dropout)
        self.stage1_out = nn.Linear(self.cfg.head_widths[-1],
                                    2 + self.cfg.cov_params)
        self.expand = nn.Linear(2, self.cfg.cond_expand)
        self.stage2 = _fc_stack(self.cfg.cond_expand + feat_dim,
                                self.cfg.head_widths, self.cfg.dropout)
        self.stage2_out = nn.Linear(self.cfg.head_widths[-1], 1)

    def forward(self, images: torch.Tensor):
        """Returns (means in (0,1), raw Cholesky parameters).

        means columns are ordered (n2, I_sat, alpha) to match the dataset
        label order; chol_raw follows [d0, d1, d2, l10, l20, l21].
        """
        if images.ndim != 4 or images.shape[1] != self.cfg.in_channels:
            raise ValueError(f"expected (B, {self.cfg.in_channels}, H, W) input, "
                             f"got {tuple(images.shape)}")
        features = self.backbone(images)
        head1 = self.stage1_out(self.stage1(features))
        pre_isat_alpha = head1[:, :2]
        chol_raw = head1[:, 2:]
        conditioned = torch.cat([self.expand(pre_isat_alpha), features], dim=1)
        pre_n2 = self.stage2_out(self.stage2(conditioned))
        means = torch.sigmoid(torch.cat([pre_n2, pre_isat_alpha], dim=1))
        if not torch.isfinite(means).all() or not torch.isfinite(chol_raw).all():
            raise FloatingPointError("non-finite activations in forward pass")
        return means, chol_raw
