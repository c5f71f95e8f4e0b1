"""Saturable-Kerr beam propagation, labeled image datasets, and recovery tooling.

Submodules:

  solver      split-step Fourier propagation through a saturable Kerr medium
  imaging     (density, phase) observations with shot/thermal/phase noise
  pipeline    scenario config and one-call simulation of an observation
  dataset     parameter-grid enumeration, binary dataset format, splits
  regression  Gaussian negative log-likelihood loss and evaluation metrics
  oracle      simulation-in-the-loop fits of single observations
  selftest    built-in analytic verification suite
  cli         command-line interface over all of the above
"""

from .imaging import IMAGE_SIZE, NoiseConfig, Observation, add_noise, downsample_field, measure, wrap_phase
from .pipeline import (Scenario, fitting_scenario, default_scenario,
                       simulate_field, simulate_observation)
from .solver import (BeamParams, BlowUpError, ComplexField, MediumParams,
                     PropagationConfig, SolverError, TransverseGrid,
                     WindowTooSmallError, gaussian_input, propagate,
                     step_linear, step_nonlinear)
from .dataset import (Dataset, DatasetManifest, GenerationError,
                      ParameterRanges, Sample, denormalize_labels,
                      enumerate_grid, generate, normalize_labels, sample_rng,
                      split, split_indices, splitmix64)
from .regression import (EPS, BinnedTrend, GaussianPrediction, MetricsReport,
                         binned_trend, metrics, nll, nll_batch, nll_gradient,
                         nll_gradient_check, read_predictions_csv,
                         write_predictions_csv)
from .oracle import FitResult, FitScenario, fit, objective

__version__ = "0.1.0"
