"""Mean-field consistency between the particle system and the grid solver (d = 1)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kinetic as kn
from . import particles as pt


def sample_from_grid(grid: kn.PhaseGrid, N: int, rng: np.random.Generator) -> pt.ParticleEnsemble:
    """Draw ``N`` agents with density proportional to ``f``: a cell is chosen by
    inverse CDF of the cell masses, the position inside it uniformly."""
    w = np.clip(grid.f, 0.0, None).ravel()
    cdf = np.cumsum(w)
    if not cdf[-1] > 0:
        raise ValueError("cannot sample from an empty grid")
    cells = np.searchsorted(cdf, rng.random(N) * cdf[-1], side="right")
    cells = np.minimum(cells, w.size - 1)
    i, k = np.divmod(cells, grid.Nv)
    x = grid.x_min + (i + rng.random(N)) * grid.dx
    v = grid.v_min + (k + rng.random(N)) * grid.dv
    return pt.ParticleEnsemble(x, v)


def smoothed_moments(ens: pt.ParticleEnsemble, xs, h: float, mass: float = 1.0):
    """Gaussian-kernel estimates of ``rho`` and ``j`` at the points ``xs``."""
    if ens.dim != 1:
        raise ValueError("smoothed moments need a 1-D ensemble")
    x, v = ens.x[:, 0], ens.v[:, 0]
    order = np.argsort(x)
    x, v = x[order], v[order]
    rho = np.zeros(len(xs))
    j = np.zeros(len(xs))
    c = mass / (ens.N * h * math.sqrt(2.0 * math.pi))
    lo = np.searchsorted(x, xs - 8 * h)
    hi = np.searchsorted(x, xs + 8 * h)
    for n, (a, b) in enumerate(zip(lo, hi)):
        w = np.exp(-0.5 * ((xs[n] - x[a:b]) / h) ** 2)
        rho[n] = w.sum()
        j[n] = w @ v[a:b]
    return c * rho, c * j


@dataclass
class CompareReport:
    N: int
    times: list = field(default_factory=list)
    rho_l1: list = field(default_factory=list)  # relative to ||rho||_1
    j_l1: list = field(default_factory=list)

    def worst(self) -> float:
        return max(self.rho_l1 + self.j_l1) if self.times else math.nan

    def lines(self):
        yield f"N = {self.N}"
        yield "t, rho_L1_rel, j_L1_rel"
        for t, a, b in zip(self.times, self.rho_l1, self.j_l1):
            yield f"{t!r}, {a!r}, {b!r}"


def smooth_grid_field(g, xs, dx: float, h: float):
    """Convolve a cell field with the Gaussian used for the particle estimates."""
    d = (xs[:, None] - xs[None, :]) / h
    return (np.exp(-0.5 * d * d) @ g) * dx / (h * math.sqrt(2.0 * math.pi))


def distances(grid: kn.PhaseGrid, ens: pt.ParticleEnsemble, h: float, smooth_grid: bool = True):
    """Relative L1 distances of ``rho`` and ``j`` (both divided by ``||rho||_1``).
    With ``smooth_grid`` the grid moments get the same smoothing as the particles,
    so the bandwidth bias cancels and only sampling and dynamics error remain."""
    m = kn.compute_moments(grid)
    M = float(m.rho.sum() * grid.dx)
    rho_p, j_p = smoothed_moments(ens, grid.x, h, M)
    rho_g, j_g = m.rho, m.j
    if smooth_grid:
        rho_g = smooth_grid_field(rho_g, grid.x, grid.dx, h)
        j_g = smooth_grid_field(j_g, grid.x, grid.dx, h)
    dr = float(np.abs(rho_p - rho_g).sum() * grid.dx) / M
    dj = float(np.abs(j_p - j_g).sum() * grid.dx) / M
    return dr, dj


def compare_runs(grid0, cfg, kern, pot, reg, N, t_end, bandwidth=0.1, seed=0, dt_particles=1e-3,
                 output_every=None, phi=None, v_flux="muscl", smooth_grid=True) -> CompareReport:
    """Run both representations from the same ``f0`` and record moment distances
    at common output times (t = 0, every ``output_every`` particle steps, t_end)."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 0xC0])))
    ens0 = sample_from_grid(grid0, N, rng)
    n_part = int(round(t_end / dt_particles)) if t_end > 0 else 0
    every = max(n_part, 1) if output_every is None else output_every
    snaps = {}
    pt.run(ens0, cfg, kern, pot, dt_particles, t_end, seed=seed, output_every=every, phi=phi,
           with_D2=False, observers=[lambda t, e: snaps.__setitem__(round(t, 12), e)])
    report = CompareReport(N)
    targets = sorted(snaps)
    grid = grid0
    t_now = 0.0
    for t in targets:
        if t > t_now:
            grid = kn.run(grid, cfg, kern, pot, reg, t_end=t - t_now, output_every=10**9, phi=phi,
                          v_flux=v_flux).grid
            t_now = t
        dr, dj = distances(grid, snaps[t], bandwidth, smooth_grid)
        report.times.append(t)
        report.rho_l1.append(dr)
        report.j_l1.append(dj)
    return report


def run_compare(cfg) -> CompareReport:
    """Compare mode driven by a :class:`~kinflock.config.RunConfig`."""
    if cfg["particles.dim"] != 1:
        raise ValueError("compare mode needs particles.dim = 1")
    dt = cfg["run.dt"] or pt_default_dt()
    return compare_runs(cfg.initial_grid(), cfg.model(), cfg.kernel(), cfg.potential(), cfg.reg(),
                        cfg["compare.N"], cfg["run.t_end"], cfg["compare.bandwidth"], cfg.seed, dt,
                        phi=cfg.phi() if cfg.model().uses_mt else None, v_flux=cfg["kinetic.v_flux"])


def pt_default_dt() -> float:
    from .config import PARTICLE_DT_DEFAULT

    return PARTICLE_DT_DEFAULT
