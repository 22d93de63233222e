"""Cucker-Smale agents with an algebraic kernel: watch the velocity spread shrink.

    python demos/particle_flocking.py
"""

import numpy as np

from kinflock import InteractionKernel, ModelConfig, ParticleEnsemble
from kinflock import particles as pt
from kinflock.kernels import ConfinementPotential

rng = np.random.default_rng(1)
ens = ParticleEnsemble(rng.normal(0.0, 1.0, (400, 2)), rng.normal(0.0, 1.0, (400, 2)))
cfg = ModelConfig(model="cucker-smale", sigma=0.0)
kern = InteractionKernel("algebraic", k0=1.0, gamma=0.5)

spread = []


def watch(t, e):
    spread.append((t, float(np.sqrt(np.mean(np.sum((e.v - e.v.mean(axis=0)) ** 2, axis=1))))))


recs, final = pt.run(ens, cfg, kern, ConfinementPotential("none"), 0.01, 8.0, output_every=100, observers=[watch])
print(" t      velocity spread   momentum")
for (t, s), r in zip(spread, recs):
    print(f"{t:5.2f}   {s:.6f}          {r['P']:+.3e}")
