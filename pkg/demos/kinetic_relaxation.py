"""Phase-space run from an off-centre bump in a harmonic trap with local
alignment and noise.  Prints the energy and entropy budgets as the state
relaxes, then the outcome of the built-in checks.

    python demos/kinetic_relaxation.py [N]
"""

import sys

from kinflock import diagnostics as dg
from kinflock import kinetic as kn
from kinflock.kernels import ConfinementPotential, InteractionKernel
from kinflock.model import ModelConfig

n = int(sys.argv[1]) if len(sys.argv) > 1 else 64
grid = kn.PhaseGrid(-6.0, 6.0, -4.0, 4.0, n, n)
pot = ConfinementPotential("quadratic", 1.0)
kern = InteractionKernel("algebraic", k0=1.0, gamma=1.0)
cfg = ModelConfig(model="local-alignment", beta=1.0, sigma=0.1)

out = kn.run(kn.maxwellian_bump(grid), cfg, kern, pot, t_end=2.0, output_every=20)
print(f"grid {n}x{n}, dt = {out.dt:.4g}, {len(out.records)} records")
print("    t        E          F        D1        D2     energy residual")
for r in out.records[::2]:
    print(f"{r.t:5.2f}  {r.E:9.5f}  {r.F:9.5f}  {r.D1:8.5f}  {r.D2:8.5f}  {r.residual_energy:.2e}")

for name, res in dg.evaluate_run(out.records, cfg, kern, grid, out.dt).items():
    print(f"{name:20s} {'n/a' if res.passed is None else ('pass' if res.passed else 'FAIL')}")
