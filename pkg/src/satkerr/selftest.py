"""Built-in verification suite: analytic solver checks, loss values, file format.

Each check returns a CheckResult and is callable on its own so tests can run
(or sabotage) them individually.  The full suite backs the `selftest` CLI
subcommand and mirrors the analytic acceptance gates:

  conservation   power drift < 1e-8 over 200 lossless Strang steps at 896^2
  beer_lambert   power ratio within 1e-9 of exp(-alpha L) for three alphas
  diffraction    Gaussian 1/e^2 radius sqrt(2) * w0 at one Rayleigh length
                 (pure linear steps), within 0.5%
  strang_order   self-convergence error ratio in [3.5, 4.5] when halving dz
  nll_values     two closed-form loss values to 1e-9
  format_roundtrip   generate -> read back bit-exact, regenerate byte-equal
"""

from __future__ import annotations

import math
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dataset as ds
from . import solver
from .dataset import DatasetManifest, Dataset, ParameterRanges, generate
from .imaging import NoiseConfig
from .pipeline import default_scenario
from .regression import GaussianPrediction, nll
from .solver import (BeamParams, MediumParams, PropagationConfig,
                     TransverseGrid, gaussian_input, propagate)

MID_TRIPLET = MediumParams(n2=-5.5e-10, i_sat=5.25e5, alpha=21.5)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.detail}"


def _small_scenario(nx: int = 256, n_steps: int = 200):
    """Full-power beam on a reduced grid: 12 waists window, 21 samples per waist."""
    beam = BeamParams(power=2.1, waist=1.7e-3, wavelength=780e-9)
    grid = TransverseGrid(nx, nx, 12 * beam.waist, 12 * beam.waist)
    return beam, grid, PropagationConfig(0.20, n_steps)


def check_conservation(nx: int = 896) -> CheckResult:
    """Lossless propagation at the full dataset resolution conserves power."""
    scenario = default_scenario(nx=nx)
    medium = MediumParams(n2=MID_TRIPLET.n2, i_sat=MID_TRIPLET.i_sat, alpha=0.0)
    field = gaussian_input(scenario.beam, scenario.grid)
    p_in = field.power()
    p_out = propagate(field, scenario.beam, medium, scenario.propagation).power()
    drift = abs(p_out / p_in - 1.0)
    return CheckResult("conservation", drift < 1e-8,
                       f"relative power drift {drift:.3e} (limit 1e-8)")


def check_beer_lambert(alphas=(13.0, 20.0, 30.0)) -> CheckResult:
    """Output power follows exp(-alpha L) exactly, any Kerr strength."""
    beam, grid, cfg = _small_scenario()
    field = gaussian_input(beam, grid)
    p_in = field.power()
    worst = 0.0
    for alpha in alphas:
        medium = MediumParams(n2=MID_TRIPLET.n2, i_sat=MID_TRIPLET.i_sat, alpha=alpha)
        ratio = propagate(field, beam, medium, cfg).power() / p_in
        worst = max(worst, abs(ratio / math.exp(-alpha * cfg.length) - 1.0))
    return CheckResult("beer_lambert", worst < 1e-9,
                       f"worst deviation from exp(-alpha L): {worst:.3e} (limit 1e-9)")


def second_moment_radius(field: solver.ComplexField) -> float:
    """1/e^2 intensity radius from the second moment: w = sqrt(2 <r^2>)."""
    intensity = field.intensity()
    total = intensity.sum()
    r2 = float((intensity * field.grid.r_squared).sum() / total)
    return math.sqrt(2.0 * r2)


def check_diffraction(n_steps: int = 64) -> CheckResult:
    """Free-space Gaussian spreads to sqrt(2) w0 after one Rayleigh length.

    Also matches the full complex profile against the closed-form beam
    1/(1+iz/z_R) exp(-r^2/(w0^2 (1+iz/z_R))), which pins the sign of the
    kinetic phase (the radius alone is symmetric under time reversal).
    """
    beam = BeamParams(power=1.0, waist=50e-6, wavelength=780e-9)
    grid = TransverseGrid(256, 256, 16 * beam.waist, 16 * beam.waist)
    z_r = math.pi * beam.waist ** 2 / beam.wavelength
    field = gaussian_input(beam, grid)
    peak_amplitude = field.values[grid.nx // 2, grid.ny // 2]
    dz = z_r / n_steps
    for _ in range(n_steps):
        field = solver.step_linear(field, beam, dz)
    measured = second_moment_radius(field)
    expected = math.sqrt(2.0) * beam.waist
    radius_error = abs(measured / expected - 1.0)

    zeta = 1.0  # z = z_R
    analytic = (peak_amplitude / (1 + 1j * zeta)
                * np.exp(-grid.r_squared / (beam.waist ** 2 * (1 + 1j * zeta))))
    profile_error = (np.linalg.norm(field.values - analytic)
                     / np.linalg.norm(analytic))
    passed = radius_error < 0.005 and profile_error < 1e-8
    return CheckResult(
        "diffraction", passed,
        f"radius off analytic by {100 * radius_error:.4f}% (limit 0.5%); "
        f"complex profile L2 error {profile_error:.2e} (limit 1e-8)")


def check_strang_order(n_steps_list=(200, 400, 800)) -> CheckResult:
    """Halving dz shrinks the self-convergence error 4x (second order)."""
    if len(n_steps_list) < 3:
        return CheckResult("strang_order", False,
                           f"need 3 step counts, got {n_steps_list}")
    beam, grid, _ = _small_scenario()
    field = gaussian_input(beam, grid)
    outputs = [propagate(field, beam, MID_TRIPLET,
                         PropagationConfig(0.20, n)).values
               for n in n_steps_list]
    e_coarse = np.linalg.norm(outputs[0] - outputs[1])
    e_fine = np.linalg.norm(outputs[1] - outputs[2])
    if e_fine == 0:
        return CheckResult("strang_order", False, "degenerate zero error")
    ratio = float(e_coarse / e_fine)
    return CheckResult("strang_order", 3.5 <= ratio <= 4.5,
                       f"error ratio {ratio:.3f} (expected within [3.5, 4.5])")


def check_nll_values() -> CheckResult:
    """Identity-covariance loss values against their closed forms."""
    identity = GaussianPrediction.from_cholesky(np.zeros(3), np.eye(3))
    base = 1.5 * math.log(2.0 * math.pi)
    err_center = abs(nll(np.zeros(3), identity) - base)
    err_step = abs(nll(np.array([1.0, 0.0, 0.0]), identity) - (base + 0.5))
    worst = max(err_center, err_step)
    return CheckResult("nll_values", worst < 1e-9,
                       f"worst closed-form deviation {worst:.3e} (limit 1e-9)")


def _tiny_manifest(seed: int = 99) -> DatasetManifest:
    """2x2x2 dataset on a cheap 224^2 / 8-step scenario; format checks only."""
    return DatasetManifest(
        ranges=ParameterRanges(n2_count=2, isat_count=2, alpha_count=2),
        grid=TransverseGrid(224, 224, 12 * 1.7e-3, 12 * 1.7e-3),
        downsample=1,
        propagation=PropagationConfig(0.20, 8),
        noise=NoiseConfig(),
        master_seed=seed,
    )


def check_format_roundtrip() -> CheckResult:
    """Write, read back bit-exact, and regenerate byte-identical files."""
    with tempfile.TemporaryDirectory() as tmp:
        first = Path(tmp) / "a"
        second = Path(tmp) / "b"
        manifest = generate(_tiny_manifest(), first)
        generate(_tiny_manifest(), second)
        raw_a = (first / "observations.f32").read_bytes()
        raw_b = (second / "observations.f32").read_bytes()
        if raw_a != raw_b:
            return CheckResult("format_roundtrip", False,
                               "regeneration is not byte-identical")
        data = Dataset(first)
        expected_labels = ds.enumerate_grid(manifest.ranges)
        if not np.array_equal(data.labels(), expected_labels):
            return CheckResult("format_roundtrip", False,
                               "labels do not round-trip exactly")
        obs = data.observation(0)
        rec = np.frombuffer(raw_a[:ds.OBSERVATION_BYTES], dtype="<f4")
        stored_density = rec[:ds.PIXELS_PER_CHANNEL].reshape(224, 224)
        if not np.array_equal(obs.density.astype("<f4"), stored_density):
            return CheckResult("format_roundtrip", False,
                               "observation bytes do not round-trip")
    return CheckResult("format_roundtrip", True,
                       "write -> read bit-exact; regeneration byte-identical")


ALL_CHECKS = (
    check_conservation,
    check_beer_lambert,
    check_diffraction,
    check_strang_order,
    check_nll_values,
    check_format_roundtrip,
)


def run_selftest(checks=None, report=print) -> list[CheckResult]:
    results = []
    for check in (ALL_CHECKS if checks is None else checks):
        try:
            result = check()
        except Exception as exc:  # a crashed check is a failed check
            result = CheckResult(check.__name__, False, f"raised {exc!r}")
        results.append(result)
        report(result.line())
    return results
