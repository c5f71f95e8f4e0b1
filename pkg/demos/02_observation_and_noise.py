"""From a propagated field to the two-channel observation a camera would see.

Shows the downsample -> measure -> add_noise chain and how the shot-noise
photon budget shapes the density channel.
"""

from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from satkerr import (MediumParams, NoiseConfig, add_noise, downsample_field,
                     fitting_scenario, measure, simulate_field)

OUT = Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

scenario = fitting_scenario(n_steps=80)
medium = MediumParams(n2=-4e-10, i_sat=3e5, alpha=17.0)

field = simulate_field(scenario, medium)
clean = measure(downsample_field(field, scenario.downsample))
print(f"density peak  : {clean.density.max():.4e} W/m^2")
print(f"phase range   : [{clean.phase.min():.3f}, {clean.phase.max():.3f}] rad")

rng = np.random.default_rng(42)
budgets = (100.0, 1000.0, 100000.0)
noisy = [add_noise(clean, NoiseConfig(photon_budget=b), rng) for b in budgets]

fig, axes = plt.subplots(2, 4, figsize=(14, 7))
axes[0, 0].imshow(clean.density.T, origin="lower", cmap="inferno")
axes[0, 0].set_title("density, noiseless")
axes[1, 0].imshow(clean.phase.T, origin="lower", cmap="twilight",
                  vmin=-np.pi, vmax=np.pi)
axes[1, 0].set_title("phase, noiseless")
for col, (budget, obs) in enumerate(zip(budgets, noisy), start=1):
    axes[0, col].imshow(obs.density.T, origin="lower", cmap="inferno")
    axes[0, col].set_title(f"density, {budget:g} photons at peak")
    axes[1, col].imshow(obs.phase.T, origin="lower", cmap="twilight",
                        vmin=-np.pi, vmax=np.pi)
    axes[1, col].set_title("phase + 0.01 rad noise")
for ax in axes.flat:
    ax.set_xticks([])
    ax.set_yticks([])
fig.tight_layout()
fig.savefig(OUT / "observation_noise.png", dpi=120)
print(f"wrote {OUT / 'observation_noise.png'}")

# the shot-noise variance follows the Poisson identity var = mean * peak/budget
for budget in budgets:
    shot_only = add_noise(clean, NoiseConfig(photon_budget=budget,
                                             gaussian_enabled=False,
                                             phase_enabled=False), rng)
    center = clean.density > 0.5 * clean.density.max()
    residual = shot_only.density[center] - clean.density[center]
    predicted = clean.density[center].mean() * clean.density.max() / budget
    print(f"budget {budget:>8g}: residual var {residual.var():.4e} "
          f"~ predicted {predicted:.4e}")
