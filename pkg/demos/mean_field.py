"""Sample agents from a grid density and evolve both descriptions side by side.
The smoothed particle moments approach the grid moments as N grows.

    python demos/mean_field.py
"""

from kinflock import compare as cp
from kinflock import kinetic as kn
from kinflock.kernels import ConfinementPotential, InteractionKernel
from kinflock.model import ModelConfig

grid0 = kn.maxwellian_bump(kn.PhaseGrid(-6.0, 6.0, -4.0, 4.0, 64, 64))
cfg = ModelConfig(model="local-alignment", beta=1.0, sigma=0.1, method="mesh")
kern = InteractionKernel("algebraic", k0=1.0, gamma=1.0)
pot = ConfinementPotential("quadratic", 1.0)

for N in (1_000, 10_000, 50_000):
    rep = cp.compare_runs(grid0, cfg, kern, pot, kn.RegularizationParams(), N, t_end=0.2)
    print(f"N = {N:6d}: relative L1 distance at t = 0.2  rho {rep.rho_l1[-1]:.4f}  j {rep.j_l1[-1]:.4f}")
