"""Convolutional regression trainer for satkerr beam-image datasets.

Consumes dataset directories in the "nlse-ds/1" layout, trains the two-stage
ConvNeXt-style regressor with the shared Gaussian negative log-likelihood,
and emits predictions in the exchange CSV format scored by the evaluator.
"""

from .data import BeamImageDataset
from .loss import cholesky_from_raw, export_parity_tuples, nll, nll_per_sample
from .model import ModelConfig, TwoStageRegressor
from .predict import predict
from .train import TrainConfig, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"
