import json

import numpy as np
import pytest
import torch

from satkerr_trainer.data import BeamImageDataset
from satkerr_trainer.model import ModelConfig, TwoStageRegressor
from satkerr_trainer.train import (TrainConfig, _epoch_mean_loss,
                                   load_checkpoint, save_checkpoint, train)


def toy_train_config(**overrides) -> TrainConfig:
    base = dict(max_epochs=10, patience=20, lr=3e-4, effective_batch=32,
                device_batch=16, plateau_patience=5, batch_floor=16, seed=0)
    base.update(overrides)
    return TrainConfig(**base)


@pytest.fixture(scope="module")
def trained(toy_dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    summary = train(toy_dataset, ModelConfig.micro(), toy_train_config(),
                    out_dir=out, log=lambda *_: None)
    return toy_dataset, out, summary


def read_log(out_dir):
    with open(out_dir / "training_log.jsonl", encoding="utf-8") as f:
        return [json.loads(line) for line in f]


def test_descent_smoke(trained):
    # acceptance: smoothed training loss decreases over the first 10 epochs
    _, out, _ = trained
    log = read_log(out)
    assert len(log) == 10
    losses = [row["train_loss"] for row in log]
    smooth = np.convolve(losses, np.ones(3) / 3, mode="valid")
    assert smooth[-1] < smooth[0], f"no descent: {losses}"
    assert losses[4] < losses[0]
    print(f"[ACCEPT] trainer/descent_smoke: PASS — smoothed "
          f"{smooth[0]:+.3f} -> {smooth[-1]:+.3f} over 10 epochs")


def test_log_schema(trained):
    _, out, _ = trained
    for row in read_log(out):
        assert set(row) == {"epoch", "train_loss", "val_loss", "lr", "batch_size"}


def test_best_checkpoint_tracks_validation(trained):
    dataset_dir, out, summary = trained
    log = read_log(out)
    best_logged = min(row["val_loss"] for row in log)
    assert summary["best_val_loss"] == pytest.approx(best_logged, rel=1e-12)

    # resume: stored model reproduces the stored validation loss
    model, payload = load_checkpoint(summary["checkpoint"])
    data = BeamImageDataset(dataset_dir)
    recomputed = _epoch_mean_loss(model, data, data.split_indices("validation"),
                                  batch_size=16, device=torch.device("cpu"))
    assert abs(recomputed - payload["val_loss"]) < 1e-6


def test_zero_learning_rate_is_null_update(toy_dataset, tmp_path):
    # learnable parameters must not move; BatchNorm running stats are
    # forward-pass buffers and are exempt from the null-update contract
    torch.manual_seed(0)
    reference = TwoStageRegressor(ModelConfig.micro())
    before = {k: v.clone() for k, v in reference.named_parameters()}

    out = tmp_path / "run0"
    train(toy_dataset, ModelConfig.micro(),
          toy_train_config(lr=0.0, max_epochs=2), out_dir=out,
          log=lambda *_: None)
    model, _ = load_checkpoint(out / "best.pt")
    after = dict(model.named_parameters())
    for key, tensor in before.items():
        assert torch.equal(tensor, after[key]), f"{key} changed under lr=0"


def test_checkpoint_roundtrip_is_exact(tmp_path):
    torch.manual_seed(1)
    model = TwoStageRegressor(ModelConfig.micro())
    save_checkpoint(tmp_path / "m.pt", model, None, epoch=3, val_loss=1.25,
                    train_cfg=toy_train_config())
    clone, payload = load_checkpoint(tmp_path / "m.pt")
    assert payload["epoch"] == 3 and payload["val_loss"] == 1.25
    for key, tensor in model.state_dict().items():
        assert torch.equal(tensor, clone.state_dict()[key])


def test_effective_batch_validated(toy_dataset):
    with pytest.raises(ValueError, match="effective batch"):
        train(toy_dataset, ModelConfig.micro(),
              toy_train_config(effective_batch=512, device_batch=16))
    with pytest.raises(ValueError):
        TrainConfig(effective_batch=16, device_batch=64)
