"""Generate a small labeled dataset, split it, and read records back.

The manifest is both the generation config and the provenance record: the
same JSON drives `satkerr generate` and documents what a directory contains.
This demo uses a cheap 224^2 scenario; swap in DatasetManifest() defaults
(896^2, 200 steps) for production-scale data.
"""

import json
from pathlib import Path

import numpy as np

from satkerr import (Dataset, DatasetManifest, NoiseConfig, ParameterRanges,
                     PropagationConfig, TransverseGrid, generate, split)

OUT = Path(__file__).parent / "output" / "demo_dataset"

manifest = DatasetManifest(
    ranges=ParameterRanges(n2_count=3, isat_count=3, alpha_count=3),
    grid=TransverseGrid(224, 224, 12 * 1.7e-3, 12 * 1.7e-3),
    downsample=1,
    propagation=PropagationConfig(0.20, 40),
    noise=NoiseConfig(),
    master_seed=7,
)
print(f"generating {manifest.sample_count} samples ...")
generate(manifest, OUT, progress=lambda i, n: print(f"  {i}/{n}", end="\r"))
split(manifest, (0.8, 0.1, 0.1), seed=1)
manifest.save(OUT / "manifest.json")
print(f"\nwrote {OUT}")

data = Dataset(OUT)
print(f"samples          : {len(data)}")
print(f"density max      : {data.manifest.density_max:.4e} W/m^2")
print(f"split sizes      : " + ", ".join(
    f"{k}={len(v)}" for k, v in data.manifest.splits.items()
    if k in ("train", "validation", "test")))

obs = data.observation(13)
labels = data.labels()[13]
print(f"sample 13 labels : n2={labels[0]:.3e}, I_sat={labels[1]:.3e}, "
      f"alpha={labels[2]:.2f}")
print(f"sample 13 density in [{obs.density.min():.3e}, {obs.density.max():.3e}]")
print(f"normalized labels: {np.round(data.labels_normalized()[13], 4)}")

print("\nmanifest head:")
print(json.dumps({k: v for k, v in json.loads(manifest.to_json()).items()
                  if k not in ("splits",)}, indent=2)[:600], "...")
