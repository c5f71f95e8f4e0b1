"""Labeled dataset generation over the (n2, I_sat, alpha) parameter grid.

A dataset is a directory with three files:

  manifest.json     full provenance: grids, beam, noise, solver and seed
                    configuration, split assignment (format "nlse-ds/1")
  observations.f32  little-endian float32, per record 224*224 density values
                    followed by 224*224 phase values
  labels.f64        little-endian float64, per record (n2, I_sat, alpha) in
                    physical units

Records appear in grid-enumeration order (n2 outermost, alpha innermost).
Each sample owns an RNG stream seeded by splitmix64(master_seed XOR index),
so generation order and worker count never change the output bytes.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .imaging import IMAGE_SIZE, NoiseConfig, Observation
from .pipeline import Scenario, simulate_observation
from .solver import (BeamParams, MediumParams, PropagationConfig, SolverError,
                     TransverseGrid)

FORMAT_VERSION = "nlse-ds/1"
PIXELS_PER_CHANNEL = IMAGE_SIZE * IMAGE_SIZE
OBSERVATION_BYTES = 2 * PIXELS_PER_CHANNEL * 4   # density + phase, float32
LABEL_BYTES = 3 * 8                              # triplet, float64

SPLIT_NAMES = ("train", "validation", "test")

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One splitmix64 step; mixes a 64-bit value into a stream seed."""
    x = (x + 0x9E3779B97F4B7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (x ^ (x >> 31)) & _MASK64


def sample_rng(master_seed: int, index: int) -> np.random.Generator:
    """Per-sample stream: order-independent, safe to draw from in parallel."""
    return np.random.default_rng(splitmix64((master_seed ^ index) & _MASK64))


class GenerationError(Exception):
    """Solver failure while generating a specific sample."""

    def __init__(self, sample_index: int, cause: Exception):
        self.sample_index = sample_index
        super().__init__(f"sample {sample_index} failed: {cause}")


@dataclass
class Sample:
    """One dataset record: observation plus physical and normalized labels."""

    index: int
    observation: Observation
    labels_physical: np.ndarray
    labels_normalized: np.ndarray


@dataclass(frozen=True)
class ParameterRanges:
    """Per-axis linear ranges and sample counts for the label grid."""

    n2_min: float = -1e-9
    n2_max: float = -1e-10
    isat_min: float = 5e4
    isat_max: float = 1e6
    alpha_min: float = 13.0
    alpha_max: float = 30.0
    n2_count: int = 50
    isat_count: int = 50
    alpha_count: int = 50

    def __post_init__(self):
        for lo, hi, n, name in self._axes():
            if not lo < hi:
                raise ValueError(f"{name} range must have min < max")
            if n < 2:
                raise ValueError(f"{name} count must be at least 2")

    def _axes(self):
        return (
            (self.n2_min, self.n2_max, self.n2_count, "n2"),
            (self.isat_min, self.isat_max, self.isat_count, "isat"),
            (self.alpha_min, self.alpha_max, self.alpha_count, "alpha"),
        )

    @property
    def sample_count(self) -> int:
        return self.n2_count * self.isat_count * self.alpha_count

    @property
    def mins(self) -> np.ndarray:
        return np.array([self.n2_min, self.isat_min, self.alpha_min])

    @property
    def maxs(self) -> np.ndarray:
        return np.array([self.n2_max, self.isat_max, self.alpha_max])

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.mins + self.maxs)


def enumerate_grid(ranges: ParameterRanges) -> np.ndarray:
    """All (n2, I_sat, alpha) triplets, lexicographic with n2 outermost.

    Axis values are linspace endpoints-inclusive, so the extreme triplets
    equal the configured bounds exactly.
    """
    n2 = np.linspace(ranges.n2_min, ranges.n2_max, ranges.n2_count)
    isat = np.linspace(ranges.isat_min, ranges.isat_max, ranges.isat_count)
    alpha = np.linspace(ranges.alpha_min, ranges.alpha_max, ranges.alpha_count)
    mesh = np.meshgrid(n2, isat, alpha, indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, 3)


_RANGE_TOL = 1e-9  # allowed overshoot beyond the endpoints, normalized units


def normalize_labels(physical: np.ndarray, ranges: ParameterRanges) -> np.ndarray:
    """Map physical triplets to [0,1]^3 by per-axis min-max scaling."""
    physical = np.asarray(physical, dtype=np.float64)
    span = ranges.maxs - ranges.mins
    normalized = (physical - ranges.mins) / span
    if np.any(normalized < -_RANGE_TOL) or np.any(normalized > 1.0 + _RANGE_TOL):
        raise ValueError(f"labels out of range: {physical}")
    return np.clip(normalized, 0.0, 1.0)


def denormalize_labels(normalized: np.ndarray, ranges: ParameterRanges) -> np.ndarray:
    """Exact inverse of normalize_labels on [0,1]^3."""
    normalized = np.asarray(normalized, dtype=np.float64)
    if np.any(normalized < -_RANGE_TOL) or np.any(normalized > 1.0 + _RANGE_TOL):
        raise ValueError(f"normalized labels out of [0,1]: {normalized}")
    return ranges.mins + normalized * (ranges.maxs - ranges.mins)


@dataclass
class DatasetManifest:
    """Everything needed to reproduce a dataset byte for byte."""

    ranges: ParameterRanges = field(default_factory=ParameterRanges)
    beam: BeamParams = field(default_factory=lambda: BeamParams(2.1, 1.7e-3, 780e-9))
    medium_n0: float = 1.0
    propagation: PropagationConfig = field(
        default_factory=lambda: PropagationConfig(0.20, 200))
    grid: TransverseGrid = field(
        default_factory=lambda: TransverseGrid(896, 896, 0.0255, 0.0255))
    downsample: int = 4
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    master_seed: int = 0
    sampling: str = "linear"
    splits: dict | None = None      # {"seed", "fractions", "train", "validation", "test"}
    density_max: float | None = None  # peak stored density, filled by generate()

    def __post_init__(self):
        if self.sampling != "linear":
            raise ValueError(f"unsupported sampling distribution {self.sampling!r}")
        self.scenario()  # validates grid/downsample consistency
        if self.splits is not None:
            _check_splits(self.splits, self.sample_count)

    @property
    def sample_count(self) -> int:
        return self.ranges.sample_count

    def scenario(self) -> Scenario:
        return Scenario(self.beam, self.grid, self.propagation, self.downsample)

    def to_dict(self) -> dict:
        r = self.ranges
        return {
            "format_version": FORMAT_VERSION,
            "ranges": {
                "n2": [r.n2_min, r.n2_max, r.n2_count],
                "isat": [r.isat_min, r.isat_max, r.isat_count],
                "alpha": [r.alpha_min, r.alpha_max, r.alpha_count],
            },
            "beam": {"power_w": self.beam.power, "waist_m": self.beam.waist,
                     "wavelength_m": self.beam.wavelength},
            "medium_n0": self.medium_n0,
            "propagation": {"length_m": self.propagation.length,
                            "n_steps": self.propagation.n_steps},
            "grid": {"nx": self.grid.nx, "ny": self.grid.ny,
                     "window_x_m": self.grid.window_x,
                     "window_y_m": self.grid.window_y,
                     "downsample": self.downsample},
            "noise": {"photon_budget": self.noise.photon_budget,
                      "gaussian_sigma_rel": self.noise.gaussian_sigma_rel,
                      "phase_sigma_rad": self.noise.phase_sigma,
                      "shot_enabled": self.noise.shot_enabled,
                      "gaussian_enabled": self.noise.gaussian_enabled,
                      "phase_enabled": self.noise.phase_enabled},
            "sampling": self.sampling,
            "master_seed": self.master_seed,
            "sample_count": self.sample_count,
            "splits": self.splits,
            "density_max": self.density_max,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetManifest":
        version = data.get("format_version", FORMAT_VERSION)
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported dataset format {version!r}")
        r = data["ranges"]
        ranges = ParameterRanges(
            n2_min=r["n2"][0], n2_max=r["n2"][1], n2_count=int(r["n2"][2]),
            isat_min=r["isat"][0], isat_max=r["isat"][1], isat_count=int(r["isat"][2]),
            alpha_min=r["alpha"][0], alpha_max=r["alpha"][1], alpha_count=int(r["alpha"][2]),
        )
        b = data["beam"]
        g = data["grid"]
        n = data["noise"]
        manifest = cls(
            ranges=ranges,
            beam=BeamParams(b["power_w"], b["waist_m"], b["wavelength_m"]),
            medium_n0=data.get("medium_n0", 1.0),
            propagation=PropagationConfig(data["propagation"]["length_m"],
                                          int(data["propagation"]["n_steps"])),
            grid=TransverseGrid(int(g["nx"]), int(g["ny"]),
                                g["window_x_m"], g["window_y_m"]),
            downsample=int(g["downsample"]),
            noise=NoiseConfig(photon_budget=n["photon_budget"],
                              gaussian_sigma_rel=n["gaussian_sigma_rel"],
                              phase_sigma=n["phase_sigma_rad"],
                              shot_enabled=n["shot_enabled"],
                              gaussian_enabled=n["gaussian_enabled"],
                              phase_enabled=n["phase_enabled"]),
            master_seed=int(data["master_seed"]),
            sampling=data.get("sampling", "linear"),
            splits=data.get("splits"),
            density_max=data.get("density_max"),
        )
        declared = data.get("sample_count")
        if declared is not None and int(declared) != manifest.sample_count:
            raise ValueError(
                f"declared sample_count {declared} != grid product "
                f"{manifest.sample_count}")
        return manifest

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        return cls.from_dict(json.loads(text))

    def save(self, path: str | Path):
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))

    def medium_for(self, triplet: np.ndarray) -> MediumParams:
        return MediumParams(n2=float(triplet[0]), i_sat=float(triplet[1]),
                            alpha=float(triplet[2]), n0=self.medium_n0)


def _check_splits(splits: dict, n: int):
    fractions = splits["fractions"]
    if len(fractions) != len(SPLIT_NAMES):
        raise ValueError("expected one fraction per split")
    if abs(sum(fractions) - 1.0) > 1e-9 or any(f <= 0 for f in fractions):
        raise ValueError("split fractions must be positive and sum to 1")
    seen = []
    for name in SPLIT_NAMES:
        seen.extend(splits[name])
    if sorted(seen) != list(range(n)):
        raise ValueError("split index lists must partition the sample range")


def split_indices(n: int, fractions=(0.8, 0.1, 0.1), seed: int = 0) -> dict:
    """Seeded shuffle of range(n) sliced into train/validation/test lists.

    Sizes are floor(fraction * N) with the remainder going to training; the
    shuffled order is sliced contiguously so splits are disjoint and
    exhaustive by construction.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ValueError("need three positive fractions")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")
    perm = np.random.default_rng(seed).permutation(n)
    n_val = math.floor(fractions[1] * n)
    n_test = math.floor(fractions[2] * n)
    n_train = n - n_val - n_test
    return {
        "seed": int(seed),
        "fractions": list(fractions),
        "train": perm[:n_train].tolist(),
        "validation": perm[n_train:n_train + n_val].tolist(),
        "test": perm[n_train + n_val:].tolist(),
    }


def split(manifest: DatasetManifest, fractions=(0.8, 0.1, 0.1),
          seed: int = 0) -> DatasetManifest:
    """Write the split assignment for every sample into the manifest."""
    manifest.splits = split_indices(manifest.sample_count, fractions, seed)
    return manifest


def _observation_record(obs: Observation) -> bytes:
    density = obs.density.astype("<f4").tobytes()
    phase = obs.phase.astype("<f4").tobytes()
    return density + phase


def _simulate_sample(manifest: DatasetManifest, index: int,
                     triplet: np.ndarray) -> Observation:
    noise = manifest.noise if (manifest.noise.shot_enabled or
                               manifest.noise.gaussian_enabled or
                               manifest.noise.phase_enabled) else None
    rng = sample_rng(manifest.master_seed, index) if noise else None
    try:
        return simulate_observation(manifest.scenario(),
                                    manifest.medium_for(triplet),
                                    noise=noise, rng=rng)
    except (SolverError, ValueError) as exc:
        raise GenerationError(index, exc) from exc


def generate(manifest: DatasetManifest, out_dir: str | Path,
             threads: int = 1, progress=None) -> DatasetManifest:
    """Simulate every grid triplet and persist the dataset under out_dir.

    The manifest is written last, only after both data files are complete, so
    a directory containing manifest.json is always a whole dataset.  Workers
    only simulate; the main thread writes records in index order.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    triplets = enumerate_grid(manifest.ranges)
    n = len(triplets)

    obs_path = out / "observations.f32"
    labels_path = out / "labels.f64"
    manifest_path = out / "manifest.json"
    density_max = 0.0

    def simulate(i: int) -> Observation:
        return _simulate_sample(manifest, i, triplets[i])

    try:
        with open(obs_path, "wb") as obs_file, open(labels_path, "wb") as label_file:
            def write(i: int, obs: Observation):
                nonlocal density_max
                obs_file.write(_observation_record(obs))
                label_file.write(triplets[i].astype("<f8").tobytes())
                density_max = max(density_max, float(obs.density.max()))
                if progress is not None:
                    progress(i + 1, n)

            if threads > 1:
                # chunked so finished-but-unwritten observations stay bounded
                chunk = 4 * threads
                with ThreadPoolExecutor(max_workers=threads) as pool:
                    for start in range(0, n, chunk):
                        indices = range(start, min(start + chunk, n))
                        for i, obs in zip(indices, pool.map(simulate, indices)):
                            write(i, obs)
            else:
                for i in range(n):
                    write(i, simulate(i))
    except BaseException:
        for p in (obs_path, labels_path, manifest_path):
            try:
                p.unlink(missing_ok=True)
            except OSError:
                pass
        raise

    manifest.density_max = density_max
    manifest.save(manifest_path)
    return manifest


class Dataset:
    """Reader for a dataset directory; observations are memory-mapped lazily."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.manifest = DatasetManifest.load(self.root / "manifest.json")
        self._labels: np.ndarray | None = None
        self._observations: np.ndarray | None = None

    def __len__(self) -> int:
        return self.manifest.sample_count

    def labels(self) -> np.ndarray:
        """Physical (n2, I_sat, alpha) triplets, shape (N, 3)."""
        if self._labels is None:
            path = self.root / "labels.f64"
            expected = len(self) * LABEL_BYTES
            actual = path.stat().st_size
            if actual != expected:
                raise ValueError(
                    f"labels.f64 is {actual} bytes, expected {expected}")
            raw = np.fromfile(path, dtype="<f8")
            self._labels = raw.reshape(len(self), 3)
        return self._labels

    def labels_normalized(self) -> np.ndarray:
        return normalize_labels(self.labels(), self.manifest.ranges)

    def _mapped(self) -> np.ndarray:
        if self._observations is None:
            path = self.root / "observations.f32"
            expected = len(self) * OBSERVATION_BYTES
            actual = path.stat().st_size
            if actual != expected:
                raise ValueError(
                    f"observations.f32 is {actual} bytes, expected {expected}")
            self._observations = np.memmap(path, dtype="<f4", mode="r",
                                           shape=(len(self), 2, IMAGE_SIZE, IMAGE_SIZE))
        return self._observations

    def observation(self, index: int) -> Observation:
        if not 0 <= index < len(self):
            raise IndexError(f"sample index {index} out of range [0, {len(self)})")
        record = self._mapped()[index]
        return Observation(np.array(record[0], dtype=np.float64),
                           np.array(record[1], dtype=np.float64))

    def sample(self, index: int) -> Sample:
        return Sample(index=index,
                      observation=self.observation(index),
                      labels_physical=self.labels()[index],
                      labels_normalized=self.labels_normalized()[index])

    def split_indices(self, name: str) -> list[int]:
        if self.manifest.splits is None:
            raise ValueError("dataset has no split assignment; run split first")
        if name not in SPLIT_NAMES:
            raise KeyError(f"unknown split {name!r}, expected one of {SPLIT_NAMES}")
        return list(self.manifest.splits[name])
