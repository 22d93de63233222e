"""Finite-volume solver for the 1-D kinetic flocking equation on a phase grid.

The equation, in flux form along v, reads

    f_t + v f_x + d/dv [ (-Phi'(x) + A - B v + R(x, v) + (a - b v^2) v) f - sigma f_v ] = 0

with ``A - B v`` the Cucker-Smale field, ``R`` the relaxation term
(``beta (chi_lambda(u_delta) - v)`` for local alignment, ``u_tilde - v`` for
Motsch-Tadmor) and zero-flux walls on all four sides.

One step is a Strang splitting  X(dt/2) V(dt) X(dt/2).  Each sub-step is a
two-stage SSP Runge-Kutta update of conservative face fluxes.  Drift terms use
MUSCL reconstruction (monotonized-central limiter) with upwinding; diffusion
uses the centred two-point flux.  With ``v_flux="sg"`` the relaxation drift and
the diffusion are instead combined into one Scharfetter-Gummel (exponentially
fitted) flux which keeps the discrete velocity Maxwellian exactly steady.

Every forward-Euler stage is positivity preserving under :func:`stable_dt`.
After each velocity stage a uniform upwind drift correction per x-row matches
the discrete momentum change to the cell-centre moment balance, so symmetric
models conserve momentum to round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .kernels import ConfinementPotential, InteractionKernel, kernel_bound
from .model import ModelConfig


V_FLUXES = ("muscl", "sg")


class CFLError(ValueError):
    """Raised when a step is requested with ``dt`` above the stable bound."""

    def __init__(self, dt, stable):
        super().__init__(f"dt={dt:.6g} exceeds the stable step {stable:.6g}")
        self.dt = dt
        self.stable_dt = stable


class SimulationError(RuntimeError):
    """A run produced a non-finite state; carries the last good grid."""

    def __init__(self, msg, last_good, records):
        super().__init__(msg)
        self.last_good = last_good
        self.records = records


@dataclass
class PhaseGrid:
    x_min: float
    x_max: float
    v_min: float
    v_max: float
    Nx: int
    Nv: int
    f: np.ndarray = None

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.v_max > self.v_min):
            raise ValueError("empty phase-space box")
        if self.Nx < 2 or self.Nv < 2:
            raise ValueError("need at least two cells per direction")
        if self.f is None:
            self.f = np.zeros((self.Nx, self.Nv))
        self.f = np.asarray(self.f, dtype=float)
        if self.f.shape != (self.Nx, self.Nv):
            raise ValueError(f"f has shape {self.f.shape}, expected {(self.Nx, self.Nv)}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.Nx

    @property
    def dv(self) -> float:
        return (self.v_max - self.v_min) / self.Nv

    @property
    def x(self) -> np.ndarray:
        return self.x_min + (np.arange(self.Nx) + 0.5) * self.dx

    @property
    def v(self) -> np.ndarray:
        return self.v_min + (np.arange(self.Nv) + 0.5) * self.dv

    @property
    def v_faces(self) -> np.ndarray:
        """Interior velocity faces, length ``Nv - 1``."""
        return self.v_min + np.arange(1, self.Nv) * self.dv

    @property
    def cell_volume(self) -> float:
        return self.dx * self.dv

    def mass(self) -> float:
        return float(self.f.sum() * self.cell_volume)

    def with_f(self, f) -> "PhaseGrid":
        return replace(self, f=np.array(f, dtype=float))

    def copy(self) -> "PhaseGrid":
        return self.with_f(self.f)

    def refined(self, factor: int = 2) -> "PhaseGrid":
        return PhaseGrid(self.x_min, self.x_max, self.v_min, self.v_max, self.Nx * factor, self.Nv * factor)


@dataclass(frozen=True)
class RegularizationParams:
    delta: float = 0.0
    lam: float = math.inf
    eps_vac: float = 1e-12  # vacuum threshold, relative to max rho

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.eps_vac < 0:
            raise ValueError("eps_vac must be nonnegative")

    def threshold(self, rho) -> float:
        return self.eps_vac * float(np.max(rho)) if np.size(rho) else 0.0


@dataclass
class MomentFields:
    x: np.ndarray
    dx: float
    rho: np.ndarray
    j: np.ndarray
    e2: np.ndarray
    u: np.ndarray | None = None
    rho_tilde: np.ndarray | None = None
    u_tilde: np.ndarray | None = None


# ----------------------------------------------------------------- moments
def compute_moments(grid: PhaseGrid) -> MomentFields:
    """Midpoint-rule velocity moments ``rho, j, e2`` per x-cell."""
    v = grid.v
    f = grid.f
    return MomentFields(grid.x, grid.dx, f.sum(axis=1) * grid.dv, f @ v * grid.dv, f @ (v * v) * grid.dv)


def _safe_div(num, den, mask):
    with np.errstate(over="ignore"):
        return np.where(mask, num / np.where(mask, den, 1.0), 0.0)


def compute_u(m: MomentFields, eps_vac: float = 0.0) -> np.ndarray:
    """``u = j / rho`` where ``rho > eps_vac``, zero elsewhere (vacuum rule)."""
    if eps_vac < 0:
        raise ValueError("eps_vac must be nonnegative")
    mask = m.rho > eps_vac
    return _safe_div(m.j, m.rho, mask)


def compute_u_delta(m: MomentFields, delta: float, eps_vac: float = 0.0) -> np.ndarray:
    """``u_delta = j / (delta + rho)``; for ``delta = 0`` the vacuum rule applies."""
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if delta == 0:
        return compute_u(m, eps_vac)
    return m.j / (delta + m.rho)


def truncate(u, lam: float) -> np.ndarray:
    """``chi_lambda(u) = u 1_{|u| <= lambda}`` (hard cutoff, not a clamp)."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    u = np.asarray(u, dtype=float)
    if math.isinf(lam):
        return u.copy()
    return np.where(np.abs(u) <= lam, u, 0.0)


def relaxation_velocity(m: MomentFields, reg: RegularizationParams) -> np.ndarray:
    return truncate(compute_u_delta(m, reg.delta, reg.threshold(m.rho)), reg.lam)


_MATRIX_CACHE: dict = {}


def quadrature_matrix(kern: InteractionKernel, x, dx: float) -> np.ndarray:
    """``K(x_i, x_j) dx`` on a uniform set of cell centres (cached, read-only)."""
    key = (kern, x.size, float(x[0]), float(dx))
    K = _MATRIX_CACHE.get(key)
    if K is None:
        if len(_MATRIX_CACHE) > 32:
            _MATRIX_CACHE.clear()
        K = kern.matrix(x) * dx
        K.setflags(write=False)
        _MATRIX_CACHE[key] = K
    return K


def nonlocal_field(m: MomentFields, kern: InteractionKernel):
    """``A(x) = int K(x,y) j(y) dy`` and ``B(x) = int K(x,y) rho(y) dy``, so that
    the alignment drift is ``A - B v``."""
    K = quadrature_matrix(kern, m.x, m.dx)
    return K @ m.j, K @ m.rho


def mt_field(m: MomentFields, phi: InteractionKernel, eps_vac: float = 0.0) -> np.ndarray:
    """``u_tilde = (phi * j) / (phi * rho)``; zero where ``phi * rho <= eps_vac``.
    Also stores ``rho_tilde`` and ``u_tilde`` on ``m``."""
    if not phi.is_compact:
        raise ValueError("Motsch-Tadmor field requires a compact kernel")
    P = quadrature_matrix(phi, m.x, m.dx)
    rt = P @ m.rho
    ut = _safe_div(P @ m.j, rt, rt > eps_vac)
    m.rho_tilde, m.u_tilde = rt, ut
    return ut


# ------------------------------------------------------------------ fluxes
def _limited_slopes(f, axis):
    """Monotonized-central slopes; zero at extrema and at the two end cells."""
    f = np.moveaxis(f, axis, 0)
    dl = f[1:-1] - f[:-2]
    dr = f[2:] - f[1:-1]
    mag = np.minimum(np.minimum(2.0 * np.abs(dl), 2.0 * np.abs(dr)), 0.5 * np.abs(dl + dr))
    s = np.zeros_like(f)
    s[1:-1] = np.where(dl * dr > 0, np.copysign(mag, dl), 0.0)
    return np.moveaxis(s, 0, axis)


def _muscl_flux(f, a, axis):
    """Upwind flux through interior faces along ``axis`` with limited linear
    reconstruction; ``a`` holds face velocities (broadcastable)."""
    s = _limited_slopes(f, axis)
    n = f.shape[axis]
    lo = [slice(None)] * f.ndim
    hi = [slice(None)] * f.ndim
    lo[axis] = slice(0, n - 1)
    hi[axis] = slice(1, n)
    fl = f[tuple(lo)] + 0.5 * s[tuple(lo)]
    fr = f[tuple(hi)] - 0.5 * s[tuple(hi)]
    return np.where(a > 0, a * fl, a * fr)


def bernoulli(z):
    """``B(z) = z / (exp(z) - 1)`` with ``B(0) = 1``."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-6
    zz = np.where(small, 1.0, z)
    return np.where(small, 1.0 - 0.5 * z, zz / np.expm1(zz))


def _sg_flux(f, a, sigma, dv):
    """Scharfetter-Gummel flux of ``a f - sigma f_v`` at interior v-faces."""
    P = a * dv / sigma
    return sigma / dv * (bernoulli(-P) * f[:, :-1] - bernoulli(P) * f[:, 1:])


def _close(F, axis):
    pad = [(0, 0)] * F.ndim
    pad[axis] = (1, 1)
    return np.pad(F, pad)


# --------------------------------------------------------------- operators
@dataclass
class _Drift:
    transport: np.ndarray  # (Nx, Nv-1) face velocities for MUSCL part
    relax: np.ndarray | None  # (Nx, Nv-1) face velocities for SG part
    centre: np.ndarray  # (Nx, Nv) total drift at cell centres


def _drift(f, grid, cfg, kern, pot, reg, phi, v_flux="muscl"):
    g = grid.with_f(f) if f is not grid.f else grid
    m = compute_moments(g)
    x, v, vf = grid.x, grid.v, grid.v_faces
    base_f = np.broadcast_to(-pot.grad(x)[:, None], (grid.Nx, grid.Nv - 1)).copy()
    base_c = np.broadcast_to(-pot.grad(x)[:, None], (grid.Nx, grid.Nv)).copy()
    if cfg.a or cfg.b:
        base_f += (cfg.a - cfg.b * vf * vf) * vf
        base_c += (cfg.a - cfg.b * v * v) * v
    c0 = np.zeros(grid.Nx)
    c1 = np.zeros(grid.Nx)
    if cfg.uses_cs:
        A, B = nonlocal_field(m, kern)
        c0 += A
        c1 += B
    rate = cfg.relaxation_rate
    if rate > 0:
        if cfg.uses_mt:
            target = mt_field(m, _mt_phi(kern, phi), reg.threshold(m.rho))
        else:
            target = relaxation_velocity(m, reg)
        c0 += rate * target
        c1 += rate
    relax_f = c0[:, None] - c1[:, None] * vf[None, :]
    centre = base_c + c0[:, None] - c1[:, None] * v[None, :]
    if cfg.sigma > 0 and v_flux == "sg":
        return _Drift(base_f, relax_f, centre)
    return _Drift(base_f + relax_f, None, centre)


def _mt_phi(kern, phi):
    phi = kern if phi is None else phi
    if not phi.is_compact:
        raise ValueError("Motsch-Tadmor model needs a compact kernel phi")
    return phi


def v_operator(f, grid, cfg, kern, pot, reg, phi=None, momentum_fix=True, v_flux="muscl"):
    """Right-hand side ``-dF/dv`` of the velocity sub-problem."""
    dr = _drift(f, grid, cfg, kern, pot, reg, phi, v_flux)
    dv = grid.dv
    F = _muscl_flux(f, dr.transport, axis=1)
    if dr.relax is not None:
        F = F + _sg_flux(f, dr.relax, cfg.sigma, dv)
    elif cfg.sigma > 0:
        F = F - cfg.sigma * np.diff(f, axis=1) / dv
    if momentum_fix:
        target = np.sum(dr.centre * f, axis=1) * dv
        actual = F.sum(axis=1) * dv
        gap = target - actual
        up = np.where(gap > 0, f[:, :-1].sum(axis=1), f[:, 1:].sum(axis=1)) * dv
        c = _safe_div(gap, up, up > 1e-300)
        F = F + np.where(c[:, None] > 0, c[:, None] * f[:, :-1], c[:, None] * f[:, 1:])
    F = _close(F, 1)
    return -(F[:, 1:] - F[:, :-1]) / dv


def x_operator(f, grid):
    """Right-hand side ``-d(v f)/dx`` of the free-transport sub-problem."""
    F = _muscl_flux(f, grid.v[None, :], axis=0)
    F = _close(F, 0)
    return -(F[1:] - F[:-1]) / grid.dx


def _ssp2(f, rhs, h):
    f1 = f + h * rhs(f)
    return 0.5 * (f + f1 + h * rhs(f1))


def drift_bound(grid, cfg, kern, pot, mass=None):
    """A-priori bound on the transport and relaxation drift magnitudes."""
    M = grid.mass() if mass is None else mass
    vmax = max(abs(grid.v_min), abs(grid.v_max))
    xmax = max(abs(grid.x_min), abs(grid.x_max))
    transport = pot.stiffness * xmax + (cfg.a + cfg.b * vmax * vmax) * vmax
    relax = 0.0
    if cfg.uses_cs:
        relax += 2.0 * kernel_bound(kern) * M * vmax
    relax += 2.0 * cfg.relaxation_rate * vmax
    return transport, relax


def stable_dt(grid, cfg, kern, pot, mass=None, v_flux="muscl") -> float:
    """Largest ``dt`` for which every forward-Euler stage is positivity preserving."""
    vmax = max(abs(grid.v_min), abs(grid.v_max))
    tr, rl = drift_bound(grid, cfg, kern, pot, mass)
    dx, dv = grid.dx, grid.dv
    lim_x = dx / vmax  # half steps with CFL 1/2
    if cfg.sigma > 0 and v_flux == "muscl":
        rate = 2.0 * (tr + rl) / dv + 2.0 * cfg.sigma / dv**2
    elif cfg.sigma > 0:
        peclet = rl * dv / cfg.sigma
        rate = 2.0 * tr / dv + 2.0 * cfg.sigma * (1.0 + peclet) / dv**2
    else:
        rate = 2.0 * (tr + rl) / dv
    lim_v = 1.0 / rate if rate > 0 else math.inf
    return min(lim_x, lim_v)


def step(grid: PhaseGrid, cfg: ModelConfig, kern: InteractionKernel, pot: ConfinementPotential,
         reg: RegularizationParams, dt: float, phi=None, momentum_fix=True, stable=None, v_flux="muscl") -> PhaseGrid:
    """One Strang step ``X(dt/2) V(dt) X(dt/2)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if v_flux not in V_FLUXES:
        raise ValueError(f"v_flux must be one of {V_FLUXES}")
    limit = stable_dt(grid, cfg, kern, pot, v_flux=v_flux) if stable is None else stable
    if dt > limit * (1 + 1e-12):
        raise CFLError(dt, limit)
    f = grid.f
    xop = lambda g: x_operator(g, grid)
    vop = lambda g: v_operator(g, grid, cfg, kern, pot, reg, phi, momentum_fix, v_flux)
    f = _ssp2(f, xop, 0.5 * dt)
    f = _ssp2(f, vop, dt)
    f = _ssp2(f, xop, 0.5 * dt)
    return grid.with_f(f)


def boundary_outflow(grid: PhaseGrid, cfg, kern, pot, reg, phi=None) -> float:
    """Mass flux the zero-flux walls are holding back (upwind outward flux)."""
    f, v = grid.f, grid.v
    fx = np.sum(np.clip(v, 0, None) * f[-1]) + np.sum(np.clip(-v, 0, None) * f[0])
    dr = _drift(grid.f, grid, cfg, kern, pot, reg, phi)
    a_lo, a_hi = dr.centre[:, 0], dr.centre[:, -1]
    fv = np.sum(np.clip(-a_lo, 0, None) * f[:, 0]) + np.sum(np.clip(a_hi, 0, None) * f[:, -1])
    return float(fx * grid.dv + fv * grid.dx)


# -------------------------------------------------------------------- run
@dataclass
class KineticRun:
    records: list
    grid: PhaseGrid
    dt: float
    snapshots: list = field(default_factory=list)  # (t, f) pairs


def n_steps_for(t_end, dt_max):
    return int(math.ceil(t_end / dt_max - 1e-12)) if t_end > 0 else 0


def run(grid0: PhaseGrid, cfg: ModelConfig, kern: InteractionKernel, pot: ConfinementPotential,
        reg: RegularizationParams | None = None, t_end: float = 1.0, output_every: int = 1,
        dt: float | None = None, cfl: float = 0.5, phi=None, keep_snapshots=False,
        momentum_fix=True, lp=(2.0,), lp_j=(1.4,), v_flux="muscl", observers=()) -> KineticRun:
    """Step from ``grid0`` to ``t_end`` recording diagnostics every
    ``output_every`` steps (and at ``t_end``).  ``dt`` defaults to
    ``cfl * stable_dt``, shortened so that ``t_end`` is hit exactly.
    Each observer is called as ``obs(t, grid)`` at t = 0 and after every step."""
    from . import diagnostics

    reg = RegularizationParams() if reg is None else reg
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    if not 0 < cfl <= 0.9:
        raise ValueError("cfl must lie in (0, 0.9]")
    limit = stable_dt(grid0, cfg, kern, pot, v_flux=v_flux)
    dt_max = cfl * limit if dt is None else dt
    if dt_max > limit * (1 + 1e-12):
        raise CFLError(dt_max, limit)
    n = n_steps_for(t_end, dt_max)
    h = t_end / n if n else dt_max

    def rec(g, t):
        return diagnostics.state_record(g, t, cfg, kern, pot, reg, phi=phi, lp=lp, lp_j=lp_j)

    grid = grid0.copy()
    records = [rec(grid, 0.0)]
    snaps = [(0.0, grid.f.copy())] if keep_snapshots else []
    for obs in observers:
        obs(0.0, grid)
    for k in range(n):
        new = step(grid, cfg, kern, pot, reg, h, phi=phi, momentum_fix=momentum_fix, stable=limit, v_flux=v_flux)
        if not np.isfinite(new.f).all():
            raise SimulationError(f"non-finite state at step {k + 1}", grid, records)
        grid = new
        t = (k + 1) * h
        for obs in observers:
            obs(t, grid)
        if (k + 1) % output_every == 0 or k + 1 == n:
            records.append(rec(grid, t))
            if keep_snapshots:
                snaps.append((t, grid.f.copy()))
    diagnostics.attach_balance_terms(records, cfg, dim=1)
    return KineticRun(records, grid, h, snaps)


# -------------------------------------------------------------- initial data
def _normalize(grid, f, mass):
    tot = f.sum() * grid.cell_volume
    return grid.with_f(f * (mass / tot))


def maxwellian_bump(grid: PhaseGrid, x0=1.0, v0=0.5, sx=0.6, sv=0.6, mass=1.0) -> PhaseGrid:
    """Gaussian bump in phase space, point values at cell centres, scaled to ``mass``."""
    X, V = np.meshgrid(grid.x, grid.v, indexing="ij")
    f = np.exp(-0.5 * ((X - x0) / sx) ** 2 - 0.5 * ((V - v0) / sv) ** 2)
    return _normalize(grid, f, mass)


def equilibrium(grid: PhaseGrid, sigma: float, beta: float, pot: ConfinementPotential, mass=1.0) -> PhaseGrid:
    """``c exp(-beta (v^2/2 + Phi(x)) / sigma)``, the stationary state without
    nonlocal alignment."""
    phi = pot(grid.x)[:, None]
    v = grid.v[None, :]
    f = np.exp(-beta * (0.5 * v * v + phi) / sigma)
    return _normalize(grid, f, mass)


def monokinetic(grid: PhaseGrid, v0=0.0, x0=0.0, sx=0.6, mass=1.0) -> PhaseGrid:
    """All mass in the velocity cell containing ``v0``, Gaussian in x."""
    k = int(np.clip(np.floor((v0 - grid.v_min) / grid.dv), 0, grid.Nv - 1))
    f = np.zeros((grid.Nx, grid.Nv))
    f[:, k] = np.exp(-0.5 * ((grid.x - x0) / sx) ** 2)
    return _normalize(grid, f, mass)


def two_groups(grid: PhaseGrid, x1=-1.0, v1=0.5, m1=0.8, x2=1.0, v2=-0.5, m2=0.2, sx=0.3, sv=0.3) -> PhaseGrid:
    a = maxwellian_bump(grid, x1, v1, sx, sv, m1).f
    b = maxwellian_bump(grid, x2, v2, sx, sv, m2).f
    return grid.with_f(a + b)


# -------------------------------------------------------------- snapshots
def write_snapshot(path, grid: PhaseGrid, t: float) -> None:
    """Text snapshot: one header line, then row-major cell averages one per line."""
    with open(path, "w") as fh:
        fh.write(f"# t={t!r} Nx={grid.Nx} Nv={grid.Nv} x_min={grid.x_min!r} x_max={grid.x_max!r} "
                 f"v_min={grid.v_min!r} v_max={grid.v_max!r}\n")
        for val in grid.f.ravel():
            fh.write(f"{float(val)!r}\n")


def read_snapshot(path):
    """Inverse of :func:`write_snapshot`; returns ``(grid, t)``."""
    with open(path) as fh:
        header = fh.readline()
        if not header.startswith("#"):
            raise ValueError("snapshot header missing")
        meta = dict(tok.split("=", 1) for tok in header[1:].split())
        vals = np.array([float(line) for line in fh if line.strip()])
    Nx, Nv = int(meta["Nx"]), int(meta["Nv"])
    if vals.size != Nx * Nv:
        raise ValueError(f"snapshot holds {vals.size} values, expected {Nx * Nv}")
    grid = PhaseGrid(float(meta["x_min"]), float(meta["x_max"]), float(meta["v_min"]), float(meta["v_max"]),
                     Nx, Nv, vals.reshape(Nx, Nv))
    return grid, float(meta["t"])
