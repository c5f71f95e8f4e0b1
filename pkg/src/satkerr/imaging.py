"""Turn a propagated field into the two-channel (density, phase) observation.

The camera model is deliberately simple: block-average the computational grid
down to 224 x 224, take |psi|^2 and arg(psi) with the global phase removed,
then add shot noise (Poisson, scaled by a photon budget at the peak pixel),
additive Gaussian density noise, and Gaussian phase noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .solver import ComplexField

IMAGE_SIZE = 224

TWO_PI = 2.0 * np.pi


def wrap_phase(phi: np.ndarray | float):
    """Wrap angles to the principal interval [-pi, pi)."""
    return (phi + np.pi) % TWO_PI - np.pi


@dataclass
class Observation:
    """Density (W/m^2, >= 0) and wrapped phase (rad) images, 224 x 224."""

    density: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        self.density = np.asarray(self.density, dtype=np.float64)
        self.phase = np.asarray(self.phase, dtype=np.float64)
        expected = (IMAGE_SIZE, IMAGE_SIZE)
        if self.density.shape != expected or self.phase.shape != expected:
            raise ValueError(
                f"observation channels must be {expected}, got "
                f"{self.density.shape} and {self.phase.shape}")

    def validate(self):
        if not (np.all(np.isfinite(self.density)) and np.all(np.isfinite(self.phase))):
            raise ValueError("observation contains non-finite values")
        if np.any(self.density < 0):
            raise ValueError("density must be non-negative")
        if np.any(self.phase < -np.pi) or np.any(self.phase >= np.pi):
            raise ValueError("phase must lie in [-pi, pi)")


@dataclass(frozen=True)
class NoiseConfig:
    """Noise magnitudes; disabled components leave the observation unchanged."""

    photon_budget: float = 1000.0     # expected photons at the noiseless peak pixel
    gaussian_sigma_rel: float = 0.01  # additive density noise, fraction of peak
    phase_sigma: float = 0.01         # additive phase noise, rad
    shot_enabled: bool = True
    gaussian_enabled: bool = True
    phase_enabled: bool = True

    def __post_init__(self):
        if self.photon_budget < 0 or self.gaussian_sigma_rel < 0 or self.phase_sigma < 0:
            raise ValueError("noise magnitudes must be non-negative")
        if self.shot_enabled and self.photon_budget <= 0:
            raise ValueError("photon_budget must be positive when shot noise is on")

    @classmethod
    def disabled(cls) -> "NoiseConfig":
        return cls(shot_enabled=False, gaussian_enabled=False, phase_enabled=False)


def downsample_field(field: ComplexField, factor: int) -> ComplexField:
    """Block-average the complex field by an integer factor per axis.

    Averaging the complex amplitude (not density and phase separately) keeps
    the two channels consistent and avoids phase-wrap artifacts in the means.
    """
    if factor < 1:
        raise ValueError("factor must be a positive integer")
    if factor == 1:
        return ComplexField(field.grid, field.values.copy())
    grid = field.grid.downsampled(factor)
    blocks = field.values.reshape(grid.nx, factor, grid.ny, factor)
    return ComplexField(grid, blocks.mean(axis=(1, 3)))


def measure(field: ComplexField) -> Observation:
    """Density and phase images with the center pixel's phase rebased to 0."""
    if field.values.shape != (IMAGE_SIZE, IMAGE_SIZE):
        raise ValueError(
            f"measure expects a {IMAGE_SIZE}x{IMAGE_SIZE} field, got "
            f"{field.values.shape}; downsample first")
    field.require_finite()
    density = field.intensity()
    center = field.values[IMAGE_SIZE // 2, IMAGE_SIZE // 2]
    # multiplying by the conjugate unit phasor cancels any global phase
    if center != 0:
        referenced = field.values * (center.conjugate() / abs(center))
    else:
        referenced = field.values
    phase = wrap_phase(np.angle(referenced))
    return Observation(density, phase)


def add_noise(obs: Observation, cfg: NoiseConfig,
              rng: np.random.Generator) -> Observation:
    """Shot + thermal density noise and Gaussian phase noise, stream-driven.

    Draw order is fixed (shot, Gaussian density, phase) so a given generator
    state always yields the same observation.
    """
    density = obs.density
    phase = obs.phase
    peak = float(density.max())

    if cfg.shot_enabled and peak > 0:
        scale = peak / cfg.photon_budget
        density = rng.poisson(density / scale) * scale
    if cfg.gaussian_enabled and cfg.gaussian_sigma_rel > 0 and peak > 0:
        density = density + rng.normal(0.0, cfg.gaussian_sigma_rel * peak,
                                       size=density.shape)
    if cfg.shot_enabled or cfg.gaussian_enabled:
        density = np.clip(density, 0.0, None)
    else:
        density = density.copy()

    if cfg.phase_enabled and cfg.phase_sigma > 0:
        phase = wrap_phase(phase + rng.normal(0.0, cfg.phase_sigma,
                                              size=phase.shape))
    else:
        phase = phase.copy()
    return Observation(density, phase)
