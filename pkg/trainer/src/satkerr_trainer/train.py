"""Training loop: AdamW, plateau-driven LR and batch-size schedules, early stop.

The effective batch size is reached by gradient accumulation over device-
sized minibatches.  Each time the validation plateau triggers a learning-
rate cut, the effective batch is halved as well (finer gradient updates late
in training), down to a floor.  The best-validation checkpoint is kept with
an atomic write-then-rename.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path

import torch

from .data import BeamImageDataset
from .loss import nll
from .model import ModelConfig, TwoStageRegressor


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 200
    patience: int = 20                # early-stopping epochs without improvement
    lr: float = 1e-4
    weight_decay: float = 1e-2
    effective_batch: int = 4096
    device_batch: int = 64
    plateau_factor: float = 0.5
    plateau_patience: int = 10
    batch_floor: int = 256
    seed: int = 0
    device: str = "cpu"

    def __post_init__(self):
        if self.effective_batch < self.device_batch:
            raise ValueError("effective batch must be >= device batch")
        if self.lr < 0:  # zero is allowed: null update, useful as a probe
            raise ValueError("lr must be non-negative")
        for name in ("max_epochs", "patience", "effective_batch",
                     "device_batch", "plateau_patience", "batch_floor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


def save_checkpoint(path: str | Path, model: TwoStageRegressor,
                    optimizer, epoch: int, val_loss: float,
                    train_cfg: TrainConfig):
    payload = {
        "model_state": model.state_dict(),
        "optimizer_state": optimizer.state_dict() if optimizer else None,
        "model_config": asdict(model.cfg),
        "train_config": asdict(train_cfg),
        "epoch": epoch,
        "val_loss": val_loss,
    }
    path = Path(path)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            torch.save(payload, f)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def load_checkpoint(path: str | Path):
    payload = torch.load(path, map_location="cpu", weights_only=False)
    cfg = ModelConfig(**{k: tuple(v) if isinstance(v, list) else v
                         for k, v in payload["model_config"].items()})
    model = TwoStageRegressor(cfg)
    model.load_state_dict(payload["model_state"])
    return model, payload


def _epoch_mean_loss(model, dataset, indices, batch_size, device) -> float:
    model.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for xs, ys in dataset.batches(indices, batch_size):
            xs, ys = xs.to(device), ys.to(device)
            means, chol = model(xs)
            total += float(nll(ys, means, chol)) * len(xs)
            count += len(xs)
    return total / count


def train(dataset_dir: str | Path, model_cfg: ModelConfig | None = None,
          train_cfg: TrainConfig | None = None,
          out_dir: str | Path = "runs/latest", log=print) -> dict:
    """Fit the model on the dataset's train split; early-stop on validation.

    Returns a summary dict with the best epoch/loss and artifact paths.
    Raises FloatingPointError if the loss diverges (epoch and step recorded
    in the message).
    """
    cfg = train_cfg or TrainConfig()
    dataset = BeamImageDataset(dataset_dir)
    train_idx = dataset.split_indices("train")
    val_idx = dataset.split_indices("validation")
    if cfg.effective_batch > len(train_idx):
        raise ValueError(f"effective batch {cfg.effective_batch} exceeds the "
                         f"train split ({len(train_idx)} samples)")

    torch.manual_seed(cfg.seed)
    device = torch.device(cfg.device)
    model = TwoStageRegressor(model_cfg).to(device)
    optimizer = torch.optim.AdamW(model.parameters(), lr=cfg.lr,
                                  weight_decay=cfg.weight_decay)
    scheduler = torch.optim.lr_scheduler.ReduceLROnPlateau(
        optimizer, factor=cfg.plateau_factor, patience=cfg.plateau_patience)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    checkpoint_path = out / "best.pt"
    log_path = out / "training_log.jsonl"
    shuffler = torch.Generator().manual_seed(cfg.seed)

    effective_batch = cfg.effective_batch
    best_val = math.inf
    best_epoch = -1
    epochs_since_best = 0

    with open(log_path, "w", encoding="utf-8") as log_file:
        for epoch in range(cfg.max_epochs):
            model.train()
            accumulation = max(1, math.ceil(effective_batch / cfg.device_batch))
            running, seen, since_step = 0.0, 0, 0
            optimizer.zero_grad()
            for step, (xs, ys) in enumerate(dataset.batches(
                    train_idx, cfg.device_batch, generator=shuffler,
                    shuffle=True)):
                xs, ys = xs.to(device), ys.to(device)
                means, chol = model(xs)
                loss = nll(ys, means, chol)
                if not torch.isfinite(loss):
                    raise FloatingPointError(
                        f"loss diverged at epoch {epoch}, step {step}")
                (loss / accumulation).backward()
                running += float(loss.detach()) * len(xs)
                seen += len(xs)
                since_step += 1
                if since_step == accumulation:
                    optimizer.step()
                    optimizer.zero_grad()
                    since_step = 0
            if since_step:
                optimizer.step()
                optimizer.zero_grad()

            train_loss = running / seen
            val_loss = _epoch_mean_loss(model, dataset, val_idx,
                                        cfg.device_batch, device)
            lr_before = optimizer.param_groups[0]["lr"]
            scheduler.step(val_loss)
            lr_after = optimizer.param_groups[0]["lr"]
            if lr_after < lr_before:
                # plateau event: also decay the effective batch size
                effective_batch = max(cfg.batch_floor, effective_batch // 2)

            record = {"epoch": epoch, "train_loss": train_loss,
                      "val_loss": val_loss, "lr": lr_after,
                      "batch_size": effective_batch}
            log_file.write(json.dumps(record) + "\n")
            log_file.flush()
            log(f"epoch {epoch:3d}  train {train_loss:+.4f}  "
                f"val {val_loss:+.4f}  lr {lr_after:.2e}  "
                f"batch {effective_batch}")

            if val_loss < best_val:
                best_val = val_loss
                best_epoch = epoch
                epochs_since_best = 0
                save_checkpoint(checkpoint_path, model, optimizer, epoch,
                                val_loss, cfg)
            else:
                epochs_since_best += 1
                if epochs_since_best >= cfg.patience:
                    log(f"early stop at epoch {epoch} "
                        f"(best {best_val:+.4f} at {best_epoch})")
                    break

    return {"best_epoch": best_epoch, "best_val_loss": best_val,
            "checkpoint": str(checkpoint_path), "log": str(log_path)}
