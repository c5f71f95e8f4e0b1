"""Reader for satkerr dataset directories (format "nlse-ds/1").

Consumes the documented on-disk layout directly: manifest.json for
provenance and splits, observations.f32 as a memory-mapped record array,
labels.f64 for the physical triplets.  Network inputs are standardized
dataset-wide: density divided by the manifest's recorded density_max, phase
divided by pi; labels are min-max normalized per axis into [0,1].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

IMAGE_SIZE = 224
PIXELS = IMAGE_SIZE * IMAGE_SIZE
SPLITS = ("train", "validation", "test")


@dataclass(frozen=True)
class LabelRanges:
    mins: np.ndarray   # (3,) n2, I_sat, alpha
    maxs: np.ndarray

    def normalize(self, physical: np.ndarray) -> np.ndarray:
        return (physical - self.mins) / (self.maxs - self.mins)


class BeamImageDataset:
    """Lazy view of one dataset directory; indexable by sample number."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        manifest = json.loads((self.root / "manifest.json").read_text())
        if manifest.get("format_version") != "nlse-ds/1":
            raise ValueError(f"unsupported format {manifest.get('format_version')!r}")
        self.manifest = manifest
        self.n = int(manifest["sample_count"])
        r = manifest["ranges"]
        self.ranges = LabelRanges(
            mins=np.array([r["n2"][0], r["isat"][0], r["alpha"][0]]),
            maxs=np.array([r["n2"][1], r["isat"][1], r["alpha"][1]]))
        self.density_max = manifest.get("density_max")
        if not self.density_max or self.density_max <= 0:
            raise ValueError("manifest lacks a positive density_max; "
                             "was the dataset generated completely?")
        self._observations = np.memmap(
            self.root / "observations.f32", dtype="<f4", mode="r",
            shape=(self.n, 2, IMAGE_SIZE, IMAGE_SIZE))
        labels = np.fromfile(self.root / "labels.f64", dtype="<f8")
        if labels.size != 3 * self.n:
            raise ValueError("labels.f64 does not match the manifest sample count")
        self.labels_physical = labels.reshape(self.n, 3)
        self.labels = self.ranges.normalize(self.labels_physical)

    def __len__(self) -> int:
        return self.n

    def split_indices(self, name: str) -> list[int]:
        splits = self.manifest.get("splits")
        if not splits:
            raise ValueError("dataset manifest has no split assignment")
        if name not in SPLITS:
            raise KeyError(f"unknown split {name!r}")
        return list(splits[name])

    def input_tensor(self, index: int) -> torch.Tensor:
        """Standardized (2, 224, 224) float32 input for one sample."""
        record = np.array(self._observations[index], dtype=np.float32)
        record[0] /= np.float32(self.density_max)
        record[1] /= np.float32(math.pi)
        return torch.from_numpy(record)

    def label_tensor(self, index: int) -> torch.Tensor:
        return torch.from_numpy(self.labels[index].astype(np.float32))

    def batches(self, indices: list[int], batch_size: int, *,
                generator: torch.Generator | None = None, shuffle: bool = False):
        """Yield (inputs, labels) minibatches over the given sample indices."""
        order = np.asarray(indices)
        if shuffle:
            perm = torch.randperm(len(order), generator=generator).numpy()
            order = order[perm]
        for start in range(0, len(order), batch_size):
            chunk = order[start:start + batch_size]
            xs = torch.stack([self.input_tensor(int(i)) for i in chunk])
            ys = torch.stack([self.label_tensor(int(i)) for i in chunk])
            yield xs, ys
