"""Bundled property suite behind ``kinflock check``.

Each entry is one invariant of one module, evaluated on small deterministic
cases; ``run_suite`` returns ``{name: (passed, info)}``.
"""

from __future__ import annotations

import math

import numpy as np

from . import diagnostics as dg
from . import kinetic as kn
from . import particles as pt
from .kernels import ConfinementPotential, InteractionKernel, eval_kernel, mt_normalization_bound
from .model import ModelConfig
from .neighbors import brute_force_pairs, neighbor_bins

ALG = InteractionKernel("algebraic", k0=1.0, gamma=1.0)
CMP = InteractionKernel("compact", k0=1.0, r=0.5, R=1.0)
QUAD = ConfinementPotential("quadratic", 1.0)
FREE = ConfinementPotential("none")


def _rng(seed, tag):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, tag])))


# ------------------------------------------------------------------ kernels
def kernel_symmetry(seed=0, n=10_000):
    rng = _rng(seed, 1)
    x, y = rng.uniform(-3, 3, (2, n))
    worst = 0
    for k in (InteractionKernel("constant", k0=2.0), ALG, CMP):
        worst = max(worst, int(np.count_nonzero(eval_kernel(k, x, y) != eval_kernel(k, y, x))))
    return worst == 0, f"asymmetric pairs: {worst}"


def mt_ratio_samples(kern, rng, trials=50, n=400, L=4.0):
    """Largest value of ``int phi(x - y) rho(x) / rho_tilde(x) dx`` over random
    piecewise-constant ``rho`` and sample points ``y``."""
    x = np.linspace(-L, L, n, endpoint=False) + L / n
    dx = 2 * L / n
    K = kern.matrix(x) * dx
    worst = 0.0
    for _ in range(trials):
        pieces = rng.integers(2, 12)
        edges = np.sort(rng.uniform(-L, L, pieces))
        levels = rng.exponential(1.0, pieces + 1) * (rng.random(pieces + 1) < 0.7)
        rho = levels[np.searchsorted(edges, x)]
        if not rho.any():
            rho[rng.integers(n)] = 1.0
        rt = K @ rho
        y = rng.uniform(-L, L)
        w = np.where(rho > 0, kern.radial(np.abs(x - y)) * rho / np.where(rt > 0, rt, 1.0), 0.0)
        worst = max(worst, float(w.sum() * dx))
    return worst


def mt_ratio_bound(seed=0):
    bound = mt_normalization_bound(CMP, 1)
    worst = mt_ratio_samples(CMP, _rng(seed, 2))
    return worst <= bound, f"max integral {worst:.4f} <= bound {bound:.4f}"


def gaussian_integrals(seed=0):
    x = np.linspace(-40, 40, 200_001)
    errs = []
    for scale in (1.0, 2.0):
        q = np.trapezoid(np.exp(-QUAD(x) / scale), x)
        errs.append(abs(q / QUAD.integral_exp(scale) - 1))
    return max(errs) <= 1e-8, f"relative error {max(errs):.2e}"


# ---------------------------------------------------------------- particles
def _cloud(seed, N=200, dim=1):
    rng = _rng(seed, 3)
    return pt.ParticleEnsemble(rng.normal(0, 1, (N, dim)), rng.normal(0.3, 1, (N, dim)))


def particle_momentum(seed=0):
    worst = 0.0
    for model in ("cucker-smale", "local-alignment"):
        cfg = ModelConfig(model=model, beta=1.0, sigma=0.0, eps=0.5)
        ens = _cloud(seed)
        recs, _ = pt.run(ens, cfg, ALG, FREE, 0.01, 1.0, with_D2=False)
        worst = max(worst, max(abs(r["P"] - recs[0]["P"]) for r in recs))
    return worst <= 1e-12, f"max momentum drift {worst:.2e}"


def flocked_equilibrium(seed=0):
    rng = _rng(seed, 4)
    ens = pt.ParticleEnsemble(rng.normal(0, 1, (100, 2)), np.tile([0.7, -0.2], (100, 1)))
    cfg = ModelConfig(model="local-alignment", beta=1.0, eps=0.5)
    _, out = pt.run(ens, cfg, ALG, FREE, 0.01, 0.5)
    return bool(np.all(out.v == ens.v)), "velocities unchanged" if np.all(out.v == ens.v) else "velocities moved"


def particle_energy_dissipation(seed=0):
    cfg = ModelConfig(model="local-alignment", beta=1.0, sigma=0.0, eps=0.5)
    dt = 0.01
    recs, _ = pt.run(_cloud(seed), cfg, ALG, QUAD, dt, 1.0, with_D2=False)
    E = np.array([r["E"] for r in recs])
    rise = float(np.max(np.diff(E)))
    return rise <= 10 * dt**3, f"largest per-step increase {rise:.2e}"


def two_group_ensemble():
    """A dense group of eight at rest next to a sparse pair moving at speed 1;
    the groups overlap within the kernel range, so normalizations differ."""
    x = np.r_[np.linspace(-0.2, 0.2, 8), [0.7, 0.9]]
    v = np.r_[np.zeros(8), [1.0, 1.0]]
    return pt.ParticleEnsemble(x, v)


def mt_two_groups(seed=0):
    ens = two_group_ensemble()
    cfg = ModelConfig(model="motsch-tadmor", sigma=0.0)
    recs, _ = pt.run(ens, cfg, CMP, FREE, 0.001, 1.0, with_D2=False)
    change = abs(recs[-1]["P"] - recs[0]["P"])
    return change > 1e-3, f"momentum change {change:.3e}"


def determinism(seed=0):
    cfg = ModelConfig(model="local-alignment", beta=1.0, sigma=0.2, eps=0.5)
    a = pt.run(_cloud(seed, 100, 2), cfg, ALG, QUAD, 0.01, 0.2, seed=7)[1]
    b = pt.run(_cloud(seed, 100, 2), cfg, ALG, QUAD, 0.01, 0.2, seed=7)[1]
    same = np.array_equal(a.x, b.x) and np.array_equal(a.v, b.v)
    return same, "bit-identical" if same else "trajectories differ"


def neighbor_pairs(seed=0):
    rng = _rng(seed, 5)
    ok = True
    for d in (1, 2, 3):
        pos = rng.uniform(0, 3, (500, d))
        i, j, _ = neighbor_bins(pos, 0.4).pairs()
        got = set(zip(i.tolist(), j.tolist()))
        bi, bj = brute_force_pairs(pos, 0.4)
        want = set(zip(bi.tolist(), bj.tolist()))
        ok &= got == want
    return ok, "bin pairs equal brute force" if ok else "pair sets differ"


# ------------------------------------------------------------------ kinetic
def _small_run(n=32, model="local-alignment", pot=QUAD, sigma=0.1, t_end=0.3, init="bump", **kw):
    g = kn.PhaseGrid(-6, 6, -4, 4, n, n)
    g0 = kn.maxwellian_bump(g) if init == "bump" else kn.two_groups(g)
    cfg = ModelConfig(model=model, beta=1.0, sigma=sigma, **kw)
    kern = CMP if model == "motsch-tadmor" else ALG
    return g, cfg, kern, kn.run(g0, cfg, kern, pot, t_end=t_end, output_every=5, keep_snapshots=True)


def kinetic_positivity_and_mass(seed=0):
    g, cfg, kern, out = _small_run()
    fmin = min(float(f.min()) for _, f in out.snapshots)
    drift = max(abs(r.M - out.records[0].M) for r in out.records) / out.records[0].M
    ok = fmin >= 0 and drift <= 1e-13
    return ok, f"min f {fmin:.2e}, relative mass change {drift:.2e}"


def u_delta_bound(seed=0):
    rng = _rng(seed, 6)
    g = kn.PhaseGrid(-1, 1, -2, 2, 16, 16, rng.random((16, 16)))
    m = kn.compute_moments(g)
    u = kn.compute_u(m)
    ok = all(np.all(np.abs(kn.compute_u_delta(m, d)) <= np.abs(u) + 1e-15) for d in (1e-3, 0.1, 1.0))
    return ok, "|u_delta| <= |u| everywhere" if ok else "bound violated"


def linf_bound(seed=0):
    g, cfg, kern, out = _small_run()
    res = dg.check_linf(out.records, dg.linf_rate(cfg, kern, out.records[0].M, 4.0))
    return bool(res.passed), f"margin {res.margin:.3e}"


def factorization(seed=0):
    rng = _rng(seed, 7)
    g = kn.PhaseGrid(-2, 2, -1, 1, 12, 10, rng.random((12, 10)))
    m = kn.compute_moments(g)
    A, B = kn.nonlocal_field(m, ALG)
    V = g.v
    K = ALG.matrix(g.x)
    f = g.f
    vol = g.cell_volume
    direct = np.einsum("iy,yw,w,->i", K, f, V, vol)[:, None] - np.einsum("iy,yw,->i", K, f, vol)[:, None] * V[None, :]
    err_L = float(np.max(np.abs((A[:, None] - B[:, None] * V[None, :]) - direct)))
    D2 = dg.dissipation_D2(m, ALG)
    dv2 = (V[:, None] - V[None, :]) ** 2
    D2_direct = 0.5 * np.einsum("xy,xv,yw,vw->", K, f, f, dv2) * vol * vol
    err = max(err_L, abs(D2 - D2_direct))
    return err <= 1e-12, f"max deviation {err:.2e}"


def refinement_energy_residual(seed=0):
    vals = []
    for n in (32, 64):
        g, cfg, kern, out = _small_run(n=n)
        vals.append(max(r.residual_energy for r in out.records))
    ratio = vals[0] / vals[1]
    return ratio >= 1.8, f"residual ratio {ratio:.2f}"


# -------------------------------------------------------------- diagnostics
def dissipations_nonnegative(seed=0):
    g, cfg, kern, out = _small_run()
    lo = min(min(r.D1, r.D2, r.D_u) for r in out.records)
    return lo >= 0, f"smallest dissipation {lo:.2e}"


def energy_inequality(seed=0):
    g, cfg, kern, out = _small_run()
    res = dg.check_energy_inequality(out.records, cfg.sigma)
    return bool(res.passed), f"margin {res.margin:.3e}"


def self_propulsion(seed=0):
    g, cfg, kern, out = _small_run(a=0.5, b=0.2)
    res = dg.check_self_propulsion_energy(out.records, cfg.sigma, cfg.a)
    return bool(res.passed), f"margin {res.margin:.3e}"


def kinetic_momentum(seed=0):
    g, cfg, kern, out = _small_run(pot=FREE, sigma=0.0, init="two")
    drift = max(abs(r.P - out.records[0].P) for r in out.records)
    g2, cfg2, kern2, out2 = _small_run(model="motsch-tadmor", pot=FREE, sigma=0.0, init="two", t_end=1.0)
    change = abs(out2.records[-1].P - out2.records[0].P)
    ok = drift <= 1e-8 and change > 1e-3
    return ok, f"symmetric drift {drift:.2e}, Motsch-Tadmor change {change:.2e}"


# ---------------------------------------------------------------------- cli
def cli_determinism(seed=0):
    import contextlib
    import io
    import os
    import tempfile

    from .cli import main

    outs = []
    for _ in range(2):
        d = tempfile.mkdtemp(prefix="kinflock-")
        with contextlib.redirect_stdout(io.StringIO()):
            rc = main(["run-kinetic", "--out", d, "--set", "grid.Nx=16", "--set", "grid.Nv=16",
                       "--set", "run.t_end=0.05"])
        with open(os.path.join(d, "diagnostics.csv")) as fh:
            outs.append((rc, fh.read()))
    same = outs[0] == outs[1]
    return same, "identical CSV output" if same else "outputs differ"


SUITE = {
    "kernels.symmetry": kernel_symmetry,
    "kernels.mt_ratio_quadrature": mt_ratio_bound,
    "kernels.gaussian_integrals": gaussian_integrals,
    "particles.momentum_conservation": particle_momentum,
    "particles.flocked_equilibrium": flocked_equilibrium,
    "particles.energy_dissipation": particle_energy_dissipation,
    "particles.mt_momentum_change": mt_two_groups,
    "particles.determinism": determinism,
    "particles.neighbor_bins": neighbor_pairs,
    "kinetic.positivity_and_conservation": kinetic_positivity_and_mass,
    "kinetic.u_delta_bound": u_delta_bound,
    "kinetic.linf_bound": linf_bound,
    "kinetic.factorization": factorization,
    "kinetic.refinement": refinement_energy_residual,
    "diagnostics.nonnegative_dissipation": dissipations_nonnegative,
    "diagnostics.energy_inequality": energy_inequality,
    "diagnostics.self_propulsion_energy": self_propulsion,
    "diagnostics.momentum": kinetic_momentum,
    "cli.determinism": cli_determinism,
}


def run_suite(quick: bool = True, seed: int = 0, names=None) -> dict:
    out = {}
    for name, fn in SUITE.items():
        if names is not None and name not in names:
            continue
        try:
            ok, info = fn(seed)
        except Exception as exc:  # a crash counts as a failure
            ok, info = False, f"error: {exc!r}"
        out[name] = (bool(ok), info)
    return out
