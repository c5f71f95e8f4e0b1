import numpy as np
import pytest
import torch

from satkerr_trainer.loss import cholesky_from_raw
from satkerr_trainer.model import Backbone, ModelConfig, TwoStageRegressor


@pytest.fixture(scope="module")
def micro_model():
    torch.manual_seed(0)
    return TwoStageRegressor(ModelConfig.micro())


def test_default_config_matches_published_architecture():
    cfg = ModelConfig()
    assert cfg.dims[-1] == 768          # backbone feature width
    assert cfg.head_widths == (2048, 1024, 512)
    assert cfg.dropout == 0.3
    assert cfg.in_channels == 2
    assert cfg.cov_params == 6
    assert cfg.cond_expand == 512
    assert cfg.depths == (3, 3, 9, 3)   # smallest ConvNeXt variant


def test_forward_shapes_and_ranges(micro_model):
    torch.manual_seed(1)
    x = torch.randn(6, 2, 224, 224)
    means, chol_raw = micro_model(x)
    assert means.shape == (6, 3)
    assert chol_raw.shape == (6, 6)
    assert torch.all(means > 0) and torch.all(means < 1)
    L = cholesky_from_raw(chol_raw)
    # positive-definite by construction: positive Cholesky diagonal
    assert torch.all(torch.diagonal(L, dim1=-2, dim2=-1) > 0)


def test_rejects_wrong_input_shape(micro_model):
    with pytest.raises(ValueError):
        micro_model(torch.randn(2, 3, 224, 224))
    with pytest.raises(ValueError):
        micro_model(torch.randn(2, 224, 224))


def test_inference_is_batch_size_invariant(micro_model):
    torch.manual_seed(2)
    x = torch.randn(32, 2, 224, 224)
    micro_model.eval()
    with torch.no_grad():
        batched_means, batched_chol = micro_model(x)
        single_means, single_chol = micro_model(x[:1])
    assert torch.allclose(single_means[0], batched_means[0], atol=1e-5)
    assert torch.allclose(single_chol[0], batched_chol[0], atol=1e-5)


def test_dropout_active_only_in_training(micro_model):
    torch.manual_seed(3)
    x = torch.randn(4, 2, 224, 224)
    micro_model.eval()
    with torch.no_grad():
        a, _ = micro_model(x)
        b, _ = micro_model(x)
    assert torch.equal(a, b)
    micro_model.train()
    with torch.no_grad():
        c, _ = micro_model(x)
        d, _ = micro_model(x)
    assert not torch.equal(c, d)


def test_backbone_feature_width_follows_config():
    cfg = ModelConfig.micro()
    backbone = Backbone(cfg)
    features = backbone(torch.randn(2, 2, 224, 224))
    assert features.shape == (2, cfg.dims[-1])


def test_conditional_head_sees_pre_predictions(micro_model):
    # zeroing the expansion weights must change n2 but not (I_sat, alpha)
    torch.manual_seed(4)
    x = torch.randn(3, 2, 224, 224)
    micro_model.eval()
    with torch.no_grad():
        before, _ = micro_model(x)
        saved = micro_model.expand.weight.clone()
        micro_model.expand.weight.zero_()
        after, _ = micro_model(x)
        micro_model.expand.weight.copy_(saved)
    assert torch.allclose(before[:, 1:], after[:, 1:])
    assert not torch.allclose(before[:, 0], after[:, 0])


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(depths=(1, 1), dims=(8, 16, 24))
    with pytest.raises(ValueError):
        ModelConfig(dropout=1.0)
