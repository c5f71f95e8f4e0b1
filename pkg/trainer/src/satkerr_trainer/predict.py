"""Inference over a dataset split, written as the prediction exchange CSV.

Rows follow the split's index order; values are normalized means from the
model plus the dataset's own normalized truths, 12 significant digits.
"""

from __future__ import annotations

import csv
from pathlib import Path

import torch

from .data import BeamImageDataset
from .train import load_checkpoint

CSV_HEADER = ("index", "n2_pred", "isat_pred", "alpha_pred",
              "n2_true", "isat_true", "alpha_true")


def predict(dataset_dir: str | Path, split: str, checkpoint: str | Path,
            out_csv: str | Path, batch_size: int = 64,
            device: str = "cpu") -> int:
    """Run the checkpointed model over one split; returns the row count."""
    dataset = BeamImageDataset(dataset_dir)
    indices = dataset.split_indices(split)
    model, _ = load_checkpoint(checkpoint)
    model.to(device).eval()

    rows = []
    with torch.no_grad():
        position = 0
        for xs, _ in dataset.batches(indices, batch_size):
            means, _ = model(xs.to(device))
            for mean in means.cpu().numpy():
                index = indices[position]
                truth = dataset.labels[index]
                rows.append([int(index)]
                            + [f"{v:.12g}" for v in (*mean, *truth)])
                position += 1

    with open(out_csv, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(CSV_HEADER)
        writer.writerows(rows)
    return len(rows)
