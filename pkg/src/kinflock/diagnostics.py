"""Functionals, dissipation rates and the identity/inequality checks built on them.

Conventions shared by every function here:

* grid integrals are midpoint sums over cells;
* vacuum cells (``f <= eps_vac``) are dropped from ``log f`` and ``1/f``
  integrands, so ``0 log 0 = 0``;
* ``d`` is the velocity dimension of the state (1 on the grid).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import particles as _pt
from .kernels import ConfinementPotential, InteractionKernel, kernel_bound
from .kinetic import (
    MomentFields, PhaseGrid, RegularizationParams, boundary_outflow, compute_moments, compute_u,
    mt_field, nonlocal_field, quadrature_matrix, relaxation_velocity, _mt_phi,
)
from .model import ModelConfig

CSV_COLUMNS = (
    "t", "M", "P", "E", "F", "D1", "D2", "D_u", "residual_energy", "rhs_entropy",
    "flux_boundary", "sup_f", "lp_rho_2", "lp_j_1_4", "flags",
)


@dataclass
class DiagnosticsRecord:
    t: float
    M: float
    P: float
    E: float
    F: float = math.nan
    D1: float = math.nan
    D2: float = 0.0
    D_u: float = 0.0
    D_loc: float = 0.0  # rate * int f (v - U) v, the relaxation work
    W_sp: float = 0.0  # int (a - b v^2) v^2 f, self-propulsion work
    rhs_entropy: float = 0.0
    flux_boundary: float = 0.0
    sup_f: float = math.nan
    lp_rho: dict = field(default_factory=dict)
    lp_j: dict = field(default_factory=dict)
    dE_dt: float = math.nan
    dF_dt: float = math.nan
    residual_energy: float = math.nan
    residual_entropy: float = math.nan
    flags: dict = field(default_factory=dict)

    def row(self) -> dict:
        flags = ";".join(f"{k}={'pass' if v else 'fail'}" for k, v in sorted(self.flags.items()) if v is not None)
        return {
            "t": self.t, "M": self.M, "P": self.P, "E": self.E, "F": self.F, "D1": self.D1, "D2": self.D2,
            "D_u": self.D_u, "residual_energy": self.residual_energy, "rhs_entropy": self.rhs_entropy,
            "flux_boundary": self.flux_boundary, "sup_f": self.sup_f,
            "lp_rho_2": self.lp_rho.get(2.0, math.nan), "lp_j_1_4": self.lp_j.get(1.4, math.nan),
            "flags": flags,
        }


def write_csv(path, records) -> None:
    """CSV with the fixed column order; floats via ``repr`` so they round-trip."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            row = r.row()
            w.writerow([row[c] if c == "flags" else repr(float(row[c])) for c in CSV_COLUMNS])


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        for k in CSV_COLUMNS[:-1]:
            r[k] = float(r[k])
    return rows


# ----------------------------------------------------------------- functionals


def energy(state, pot: ConfinementPotential) -> float:
    """``E = int (|v|^2/2 + Phi) f`` for a grid or a particle ensemble."""
    if isinstance(state, _pt.ParticleEnsemble):
        return _pt.energy(state, pot)
    v = state.v[None, :]
    return float(np.sum((0.5 * v * v + pot(state.x)[:, None]) * state.f) * state.cell_volume)


def kinetic_energy(grid: PhaseGrid) -> float:
    return float(np.sum(0.5 * grid.v**2 * grid.f) * grid.cell_volume)


def _xlogx(f, eps=0.0):
    return np.where(f > eps, f * np.log(np.where(f > eps, f, 1.0)), 0.0)


def entropy_F(grid: PhaseGrid, sigma: float, beta: float, pot: ConfinementPotential, eps_vac=0.0) -> float:
    """``F = int (sigma/beta) f log f + f v^2/2 + f Phi``."""
    if not beta > 0:
        raise ValueError("entropy F needs beta > 0")
    return float((sigma / beta) * _xlogx(grid.f, eps_vac).sum() * grid.cell_volume + energy(grid, pot))


def dissipation_D1(grid: PhaseGrid, u, sigma: float, beta: float, eps_vac: float = 0.0) -> float:
    """``D1 = 1/2 int (beta/f) |(sigma/beta) f_v - f (u - v)|^2`` over cells with ``f > eps_vac``."""
    if not beta > 0:
        raise ValueError("D1 needs beta > 0")
    f = grid.f
    fv = np.gradient(f, grid.dv, axis=1, edge_order=2) if sigma else 0.0
    flux = (sigma / beta) * fv - f * (np.asarray(u)[:, None] - grid.v[None, :])
    mask = f > max(eps_vac, np.finfo(float).tiny)
    val = np.where(mask, flux * flux / np.where(mask, f, 1.0), 0.0)
    return float(0.5 * beta * val.sum() * grid.cell_volume)


def dissipation_D2(m: MomentFields | _pt.ParticleEnsemble, kern: InteractionKernel) -> float:
    """``D2 = int int K(x,y) [rho(x) e2(y) - j(x) j(y)]``, the factorized form of
    ``1/2 int K f f |v - w|^2``."""
    if isinstance(m, _pt.ParticleEnsemble):
        return _pt.dissipation_D2(m, kern)
    K = quadrature_matrix(kern, m.x, m.dx) * m.dx
    return float(m.rho @ K @ m.e2 - m.j @ K @ m.j)


def dissipation_Du(m: MomentFields, kern: InteractionKernel, u=None) -> float:
    """``1/2 int int K rho(x) rho(y) |u(x) - u(y)|^2``."""
    u = compute_u(m) if u is None else np.asarray(u)
    K = quadrature_matrix(kern, m.x, m.dx) * m.dx
    r = m.rho
    du2 = (u[:, None] - u[None, :]) ** 2
    return float(0.5 * np.sum(K * r[:, None] * r[None, :] * du2))


def entropy_rhs(m: MomentFields, kern: InteractionKernel, sigma: float, beta: float, dim: int = 1) -> float:
    """``(sigma d / beta) int int K rho rho``."""
    K = quadrature_matrix(kern, m.x, m.dx) * m.dx
    return float(sigma * dim / beta * (m.rho @ K @ m.rho))


def lp_norm(g, dx: float, p: float) -> float:
    g = np.abs(np.asarray(g, dtype=float))
    if math.isinf(p):
        return float(g.max())
    return float((np.sum(g**p) * dx) ** (1.0 / p))


def relaxation_target(m, cfg: ModelConfig, kern, reg, phi=None):
    if cfg.uses_mt:
        return mt_field(m, _mt_phi(kern, phi), reg.threshold(m.rho))
    return relaxation_velocity(m, reg)


def state_record(grid: PhaseGrid, t: float, cfg: ModelConfig, kern: InteractionKernel, pot: ConfinementPotential,
                 reg: RegularizationParams, phi=None, lp=(2.0,), lp_j=(1.4,), dim: int = 1) -> DiagnosticsRecord:
    """All single-state quantities of a grid; time-derivative terms are filled
    in later by :func:`attach_balance_terms`."""
    m = compute_moments(grid)
    vol = grid.cell_volume
    rec = DiagnosticsRecord(t=t, M=grid.mass(), P=float(m.j.sum() * grid.dx), E=energy(grid, pot))
    rec.sup_f = float(grid.f.max())
    rec.flux_boundary = boundary_outflow(grid, cfg, kern, pot, reg, phi)
    if cfg.uses_cs:
        rec.D2 = dissipation_D2(m, kern)
        rec.D_u = dissipation_Du(m, kern, compute_u(m, reg.threshold(m.rho)))
    rate = cfg.relaxation_rate
    U = relaxation_target(m, cfg, kern, reg, phi) if rate > 0 else np.zeros(grid.Nx)
    if rate > 0:
        rec.D_loc = float(rate * np.sum(grid.f * (grid.v[None, :] - U[:, None]) * grid.v[None, :]) * vol)
    if cfg.a or cfg.b:
        v = grid.v
        rec.W_sp = float(np.sum((cfg.a - cfg.b * v * v) * v * v * grid.f) * vol)
    if cfg.beta > 0:
        eps = reg.eps_vac * rec.sup_f
        rec.F = entropy_F(grid, cfg.sigma, cfg.beta, pot, eps)
        # the local-alignment flux uses its own target; other models have none
        u_loc = U if cfg.uses_local else np.zeros(grid.Nx)
        rec.D1 = dissipation_D1(grid, u_loc, cfg.sigma, cfg.beta, eps) if cfg.uses_local else 0.0
        if cfg.uses_cs and cfg.sigma:
            rec.rhs_entropy = entropy_rhs(m, kern, cfg.sigma, cfg.beta, dim)
    for p in lp:
        rec.lp_rho[float(p)] = lp_norm(m.rho, grid.dx, p)
    for p in lp_j:
        rec.lp_j[float(p)] = lp_norm(m.j, grid.dx, p)
    return rec


def _rate(t, y):
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.size < 2:
        return np.full(t.size, math.nan)
    return np.gradient(y, t, edge_order=2 if t.size > 2 else 1)


def attach_balance_terms(records, cfg: ModelConfig, dim: int = 1) -> None:
    """Fill ``dE_dt``, ``dF_dt`` (centred differences) and the energy/entropy residuals.

    energy:   |dE/dt + D2 + D_loc - sigma d M - W_sp|
    entropy:  |dF/dt + 2 D1 + D2 - rhs|   (the exact-solution equality)
    """
    t = [r.t for r in records]
    dE = _rate(t, [r.E for r in records])
    dF = _rate(t, [r.F for r in records])
    for r, e, f in zip(records, dE, dF):
        r.dE_dt = float(e)
        r.residual_energy = energy_balance_residual(r, cfg.sigma, dim)
        if cfg.beta > 0:
            r.dF_dt = float(f)
            r.residual_entropy = abs(f + 2.0 * r.D1 + r.D2 - r.rhs_entropy)


def energy_balance_residual(rec: DiagnosticsRecord, sigma: float, dim: int = 1, dE_dt=None) -> float:
    rate = rec.dE_dt if dE_dt is None else dE_dt
    return float(abs(rate + rec.D2 + rec.D_loc - sigma * dim * rec.M - rec.W_sp))


def energy_residual_between(r0: DiagnosticsRecord, r1: DiagnosticsRecord, sigma: float, dim: int = 1) -> float:
    """Two-record form: forward difference of E against trapezoid-averaged rates."""
    h = r1.t - r0.t
    if not h > 0:
        raise ValueError("records must be in increasing time")
    avg = lambda a, b: 0.5 * (a + b)
    return float(abs((r1.E - r0.E) / h + avg(r0.D2, r1.D2) + avg(r0.D_loc, r1.D_loc)
                     - sigma * dim * avg(r0.M, r1.M) - avg(r0.W_sp, r1.W_sp)))


# ------------------------------------------------------------------- checks
@dataclass
class CheckResult:
    name: str
    passed: bool | None  # None means not applicable
    margin: float = math.nan
    detail: dict = field(default_factory=dict)

    def __bool__(self):
        return bool(self.passed)


def check_energy_inequality(records, sigma: float, dim: int = 1, rtol: float = 1e-6) -> CheckResult:
    """``E(t) <= sigma d M t + E(0)`` with tolerance ``rtol * E(0)``."""
    E0, M0 = records[0].E, records[0].M
    m = min(sigma * dim * M0 * r.t + E0 + rtol * E0 - r.E for r in records)
    return CheckResult("energy_inequality", m >= 0, m)


def check_self_propulsion_energy(records, sigma: float, a: float, dim: int = 1, rtol: float = 1e-6) -> CheckResult:
    """``E(t) <= [E(0) + sigma d M / (2a)] e^{2at}`` for ``a > 0``."""
    if not a > 0:
        return CheckResult("self_propulsion_energy", None)
    E0, M0 = records[0].E, records[0].M
    m = min((E0 + sigma * dim * M0 / (2 * a)) * math.exp(2 * a * r.t) + rtol * E0 - r.E for r in records)
    return CheckResult("self_propulsion_energy", m >= 0, m)


def check_mass(records, rtol: float = 1e-10) -> CheckResult:
    M0 = records[0].M
    drift = max(abs(r.M - M0) for r in records) / M0
    return CheckResult("mass", drift <= rtol, rtol - drift, {"drift": drift})


def linf_rate(cfg: ModelConfig, kern: InteractionKernel, M: float, vmax: float, dim: int = 1) -> float:
    """Growth rate ``C`` of ``||f||_inf <= e^{Ct} ||f0||_inf``: the largest
    compression rate of the velocity drift, ``d (rate + ||K|| M + 3 b vmax^2)``."""
    cs = kernel_bound(kern) * M if cfg.uses_cs else 0.0
    return dim * (cfg.relaxation_rate + cs + 3.0 * cfg.b * vmax * vmax)


def check_linf(records, C: float, rtol: float = 1e-12) -> CheckResult:
    s0 = records[0].sup_f
    m = min(s0 * math.exp(C * r.t) * (1 + rtol) - r.sup_f for r in records)
    return CheckResult("linf_bound", m >= 0, m)


def check_entropy_inequality(records, scale_h: float, C: float = 1.0) -> CheckResult:
    """``dF/dt + D1 + D2 <= rhs`` at every record, tolerance ``C * scale_h * scale``
    with ``scale_h = dt + dx + dv`` and ``scale`` the largest term magnitude.
    The detail carries the equality defect ``|dF/dt + 2 D1 + D2 - rhs|``."""
    rs = [r for r in records if not math.isnan(r.dF_dt)]
    if not rs:
        return CheckResult("entropy_inequality", None)
    scale = max(max(abs(r.dF_dt), r.D1, r.D2, r.rhs_entropy) for r in rs) or 1.0
    tol = C * scale_h * scale
    margins = [r.rhs_entropy - (r.dF_dt + r.D1 + r.D2) + tol for r in rs]
    defect = max(r.residual_entropy for r in rs)
    return CheckResult("entropy_inequality", min(margins) >= 0, min(margins),
                       {"tol": tol, "equality_defect": defect,
                        "equality_defect_mean": float(np.mean([r.residual_entropy for r in rs]))})


def cumulative_trapezoid(t, y) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(t)
    if t.size > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def check_gronwall_entropy(records, kern: InteractionKernel, sigma: float, beta: float, M: float,
                           dim: int = 1, rtol: float = 1e-9) -> CheckResult:
    """``F(t) + int_0^t (D1 + D2) <= exp((sigma d / beta) ||K|| M^2 t) F(f0)``.

    Not applicable when ``F(f0) <= 0``.  The detail also holds the margin of
    the integrated form ``F(0) + int_0^t rhs``."""
    F0 = records[0].F
    if not F0 > 0:
        return CheckResult("gronwall_entropy", None, detail={"F0": F0})
    t = np.array([r.t for r in records])
    lhs = np.array([r.F for r in records]) + cumulative_trapezoid(t, [r.D1 + r.D2 for r in records])
    rate = sigma * dim / beta * kernel_bound(kern) * M * M
    bound = np.exp(rate * t) * F0
    m = float(np.min(bound * (1 + rtol) - lhs))
    integrated = F0 + cumulative_trapezoid(t, [r.rhs_entropy for r in records])
    return CheckResult("gronwall_entropy", m >= 0, m,
                       {"F0": F0, "rate": rate, "integrated_margin": float(np.min(integrated - lhs))})


def check_mt_energy(records, C: float, rtol: float = 1e-12) -> CheckResult:
    """``E(t) <= E(0) e^{Ct}``."""
    E0 = records[0].E
    m = min(E0 * math.exp(C * r.t) * (1 + rtol) - r.E for r in records)
    return CheckResult("mt_energy", m >= 0, m)


def moment_norm_checks(m: MomentFields, p_rho=(1.0, 2.0, 2.9), p_j=(1.0, 1.4), M=None, bound=None) -> dict:
    """L^p norms of ``rho`` and ``j``; with ``bound`` each is flagged ``<= bound``.
    Exponents outside the admissible ranges ``p < 3`` (rho) and ``p < 1.5`` (j) in
    d = 1 are rejected."""
    out = {}
    for name, g, ps, pmax in (("rho", m.rho, p_rho, 3.0), ("j", m.j, p_j, 1.5)):
        for p in ps:
            if not 1 <= p < pmax:
                raise ValueError(f"p={p} outside the admissible range for {name}")
            val = lp_norm(g, m.dx, p)
            out[(name, float(p))] = {"norm": val, "ok": None if bound is None else val <= bound}
    if M is not None:
        out[("rho", 1.0)] = out.get(("rho", 1.0), {"norm": lp_norm(m.rho, m.dx, 1.0), "ok": None})
    return out


def uniform_boundedness(sup_norms, factor: float = 2.0) -> bool:
    """Whether a family of sup-in-time norms lies within ``factor`` of each other."""
    s = np.asarray(sup_norms, dtype=float)
    return bool(s.min() > 0 and s.max() <= factor * s.min())


def negative_entropy_bound(m: MomentFields, pot: ConfinementPotential) -> CheckResult:
    """``int rho log_- rho <= 1/2 int rho Phi + (1/e) int e^{-Phi/2}``; the last
    integral is taken in closed form over the whole line."""
    r = np.asarray(m.rho)
    pos = r > 0
    lneg = np.where(pos & (r < 1), -r * np.log(np.where(pos, r, 1.0)), 0.0)
    lhs = float(lneg.sum() * m.dx)
    rhs = float(0.5 * np.sum(r * pot(m.x)) * m.dx + pot.integral_exp(scale=2.0, dim=1) / math.e)
    return CheckResult("negative_entropy", lhs <= rhs, rhs - lhs, {"lhs": lhs, "rhs": rhs})


# ------------------------------------------------------------ weak residual
def smooth_bump(s):
    """``exp(1 - 1/(1 - s^2))`` on ``|s| < 1``, zero outside; with its first two derivatives."""
    s = np.asarray(s, dtype=float)
    inside = np.abs(s) < 1
    q = np.where(inside, 1.0 - s * s, 1.0)
    g = np.where(inside, np.exp(1.0 - 1.0 / q), 0.0)
    d1 = np.where(inside, g * (-2.0 * s / q**2), 0.0)
    d2 = np.where(inside, g * ((2.0 * s / q**2) ** 2 - 2.0 / q**2 - 8.0 * s * s / q**3), 0.0)
    return g, d1, d2


@dataclass(frozen=True)
class TestFunction:
    """``psi = b((t - t0)/wt) b((x - x0)/wx) b((v - v0)/wv)`` with ``b`` a smooth bump."""
    t0: float
    wt: float
    x0: float
    wx: float
    v0: float
    wv: float

    def factors(self, t, x, v):
        bt = smooth_bump((t - self.t0) / self.wt)
        bx = smooth_bump((x - self.x0) / self.wx)
        bv = smooth_bump((v - self.v0) / self.wv)
        return (bt[0], bt[1] / self.wt), (bx[0], bx[1] / self.wx), (bv[0], bv[1] / self.wv, bv[2] / self.wv**2)


def default_test_family(grid: PhaseGrid, t_end: float) -> list[TestFunction]:
    """Five test functions: the time factor is centred at 0 (so ``psi(0) != 0``)
    and vanishes before ``t_end``; space/velocity factors sit inside the grid."""
    Lx = grid.x_max - grid.x_min
    Lv = grid.v_max - grid.v_min
    cx = 0.5 * (grid.x_min + grid.x_max)
    cv = 0.5 * (grid.v_min + grid.v_max)
    wt = 0.9 * t_end
    layout = [(0.0, 0.0, 0.25, 0.25), (0.1, 0.05, 0.15, 0.2), (-0.1, -0.05, 0.15, 0.2),
              (0.05, 0.1, 0.1, 0.15), (0.15, -0.1, 0.2, 0.15)]
    return [TestFunction(0.0, wt, cx + a * Lx, b * Lx, cv + c * Lv, e * Lv) for a, c, b, e in layout]


class WeakResidual:
    """Accumulates the weak-form residual of a run, one state at a time.

    For each test function ``psi`` it forms

        int_0^T int [f psi_t + v f psi_x + G f psi_v + sigma f psi_vv] + int f0 psi(0),

    ``G = -Phi' + A - B v + rate (U - v) + (a - b v^2) v``, which vanishes for a
    weak solution.  The diffusion term is integrated by parts twice so no
    derivative of ``f`` is needed.  Time integrals are trapezoidal, so states
    must be fed in increasing time starting at ``t = 0``.  Usable directly as a
    run observer.
    """

    def __init__(self, tests, cfg: ModelConfig, kern: InteractionKernel, pot: ConfinementPotential,
                 reg: RegularizationParams, phi=None):
        self.tests = list(tests)
        self.cfg, self.kern, self.pot, self.reg, self.phi = cfg, kern, pot, reg, phi
        n = len(self.tests)
        self._sum = np.zeros(n)
        self._abs = np.zeros(n)
        self._init = np.zeros(n)
        self._prev = None  # (t, integrand, abs integrand)

    def _drift(self, grid, m):
        cfg, v = self.cfg, grid.v
        c0 = np.zeros(grid.Nx)
        c1 = np.zeros(grid.Nx)
        if cfg.uses_cs:
            A, B = nonlocal_field(m, self.kern)
            c0 += A
            c1 += B
        if cfg.relaxation_rate > 0:
            c0 += cfg.relaxation_rate * relaxation_target(m, cfg, self.kern, self.reg, self.phi)
            c1 += cfg.relaxation_rate
        return ((-self.pot.grad(grid.x) + c0)[:, None] - c1[:, None] * v[None, :]
                + ((cfg.a - cfg.b * v * v) * v)[None, :])

    def __call__(self, t: float, grid: PhaseGrid) -> None:
        m = compute_moments(grid)
        G = self._drift(grid, m)
        x, v, vol, f = grid.x, grid.v, grid.cell_volume, grid.f
        vals = np.empty(len(self.tests))
        absv = np.empty(len(self.tests))
        for n, tf in enumerate(self.tests):
            (bt, bt1), (bx, bx1), (bv, bv1, bv2) = tf.factors(np.array([t]), x, v)
            psi_xv = np.outer(bx, bv)
            space = v[None, :] * np.outer(bx1, bv) + G * np.outer(bx, bv1) + self.cfg.sigma * np.outer(bx, bv2)
            vals[n] = np.sum((bt1[0] * psi_xv + bt[0] * space) * f) * vol
            absv[n] = abs(bt1[0]) * np.sum(np.abs(psi_xv * f)) * vol
            if self._prev is None:
                self._init[n] = bt[0] * np.sum(psi_xv * f) * vol
        if self._prev is not None:
            t0, v0, a0 = self._prev
            if not t > t0:
                raise ValueError("states must be fed in increasing time")
            self._sum += 0.5 * (t - t0) * (vals + v0)
            self._abs += 0.5 * (t - t0) * (absv + a0)
        elif t != 0.0:
            raise ValueError("the first state must be at t = 0")
        self._prev = (t, vals, absv)

    def result(self):
        """``(abs_residuals, scales)``; a scale is ``|int f0 psi(0)| + int int |f psi_t|``."""
        return np.abs(self._sum + self._init), np.abs(self._init) + self._abs


def weak_residual(times, fs, grid: PhaseGrid, cfg: ModelConfig, kern: InteractionKernel,
                  pot: ConfinementPotential, reg: RegularizationParams, tests, phi=None):
    """Weak-form residual per test function from stored snapshots (see :class:`WeakResidual`)."""
    acc = WeakResidual(tests, cfg, kern, pot, reg, phi)
    for t, f in zip(times, fs):
        acc(float(t), grid.with_f(f))
    return acc.result()


# ------------------------------------------------------------- run checks
def evaluate_run(records, cfg: ModelConfig, kern: InteractionKernel, grid: PhaseGrid, dt: float,
                 dim: int = 1) -> dict:
    """Run-level checks applicable to ``cfg``; sets per-record flags as well."""
    out = {"mass": check_mass(records)}
    symmetric = not cfg.uses_mt and cfg.a == 0 and cfg.b == 0
    if symmetric:
        out["energy_inequality"] = check_energy_inequality(records, cfg.sigma, dim)
    if cfg.a > 0:
        out["self_propulsion_energy"] = check_self_propulsion_energy(records, cfg.sigma, cfg.a, dim)
    vmax = max(abs(grid.v_min), abs(grid.v_max))
    out["linf_bound"] = check_linf(records, linf_rate(cfg, kern, records[0].M, vmax, dim))
    if cfg.beta > 0 and cfg.sigma > 0 and symmetric:
        out["entropy_inequality"] = check_entropy_inequality(records, dt + grid.dx + grid.dv)
        out["gronwall_entropy"] = check_gronwall_entropy(records, kern, cfg.sigma, cfg.beta, records[0].M, dim)
    _set_flags(records, cfg, kern, grid, dim, symmetric)
    return out


def _set_flags(records, cfg, kern, grid, dim, symmetric):
    E0, M0, s0 = records[0].E, records[0].M, records[0].sup_f
    vmax = max(abs(grid.v_min), abs(grid.v_max))
    C = linf_rate(cfg, kern, M0, vmax, dim)
    for r in records:
        r.flags["mass"] = abs(r.M - M0) <= 1e-10 * M0
        r.flags["linf"] = r.sup_f <= s0 * math.exp(C * r.t) * (1 + 1e-12)
        if symmetric:
            r.flags["energy_ineq"] = r.E <= cfg.sigma * dim * M0 * r.t + E0 + 1e-6 * E0
        if r.F == r.F and cfg.sigma > 0 and symmetric and r.dF_dt == r.dF_dt:
            tol = (grid.dx + grid.dv) * max(abs(r.dF_dt), r.D1, r.D2, r.rhs_entropy, 1e-300)
            r.flags["entropy_ineq"] = r.dF_dt + r.D1 + r.D2 <= r.rhs_entropy + tol
