"""N-agent flocking dynamics.

The velocity drift of agent ``i`` is

    alignment_i - grad Phi(x_i) + (a - b |v_i|^2) v_i

plus Brownian forcing ``sqrt(2 sigma) dW``.  The alignment part depends on
``ModelConfig.model``:

``cucker-smale``      (1/N) sum_j K(x_i, x_j) (v_j - v_i)
``motsch-tadmor``     sum_j phi_ij (v_j - v_i) / sum_j phi_ij
``local-alignment``   Cucker-Smale plus beta times the mollified local term
``combined``          Cucker-Smale plus beta times the Motsch-Tadmor term

The mollified local term is written in the symmetric quadrature form

    beta * sum_j psi_eps(x_i - x_j) / (N (delta + rho_j)) * (chi(u_j) - v_i)

with ``rho_j`` and ``u_j`` the mollified density and local mean velocity at
agent ``j``.  It approximates ``beta (u(x_i) - v_i)`` and, for ``delta = 0``
and no truncation, conserves total momentum exactly.

``method="mesh"`` (1-D only) evaluates every field on an auxiliary node mesh
by deposit/interpolate with matching weights, which keeps the momentum
identities of the direct sums and makes N = 1e5 runs cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import ConfinementPotential, InteractionKernel, kernel_bound
from .model import ModelConfig
from .neighbors import neighbor_bins

_CHUNK = 2048


@dataclass
class ParticleEnsemble:
    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.x = np.array(self.x, dtype=float)
        self.v = np.array(self.v, dtype=float)
        if self.x.ndim == 1:
            self.x = self.x[:, None]
        if self.v.ndim == 1:
            self.v = self.v[:, None]
        if self.x.shape != self.v.shape:
            raise ValueError("positions and velocities must have the same shape")
        if self.dim not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")

    @property
    def N(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def weight(self) -> float:
        return 1.0 / self.N

    def momentum(self) -> np.ndarray:
        return self.v.mean(axis=0)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.x).all() and np.isfinite(self.v).all())

    def copy(self) -> "ParticleEnsemble":
        return ParticleEnsemble(self.x.copy(), self.v.copy())


# ---------------------------------------------------------------- mollifier
_BUMP_NORM = {1: 15.0 / 16.0, 2: 3.0 / math.pi, 3: 105.0 / (32.0 * math.pi)}


def mollifier(s, eps: float, dim: int = 1):
    """Normalized bump ``c_d eps^-d (1 - (s/eps)^2)_+^2`` of the distance ``s``."""
    q = np.clip(1.0 - (np.asarray(s, dtype=float) / eps) ** 2, 0.0, None)
    return _BUMP_NORM[dim] / eps**dim * q * q


def truncate_vectors(u, lam: float):
    """Hard cutoff: keep ``u`` where ``|u| <= lam``, zero elsewhere."""
    u = np.asarray(u, dtype=float)
    if math.isinf(lam):
        return u
    mag = np.sqrt(np.sum(u * u, axis=-1, keepdims=True))
    return np.where(mag <= lam, u, 0.0)


# ------------------------------------------------------------- direct sums
def _pairwise_apply(x, y, weight_fn, values_list):
    """Return ``sum_k W(x_i, y_k) * values[k]`` for each array in
    ``values_list``, chunked over ``i``."""
    out = [np.zeros((len(x),) + val.shape[1:]) for val in values_list]
    for s in range(0, len(x), _CHUNK):
        d = x[s:s + _CHUNK, None, :] - y[None, :, :]
        w = weight_fn(np.sqrt(np.sum(d * d, axis=-1)))
        for o, val in zip(out, values_list):
            o[s:s + _CHUNK] = w @ val
    return out


def _sparse_apply(ens, radius, weight_fn, values_list):
    """Same as ``_pairwise_apply`` for kernels vanishing beyond ``radius``
    (self-pairs included)."""
    i, j, dist = neighbor_bins(ens.x, radius).pairs()
    w = weight_fn(dist)
    w0 = float(weight_fn(np.zeros(1))[0])
    n = ens.N
    out = []
    for val in values_list:
        o = w0 * val.astype(float)
        cols = o.reshape(n, -1)
        flat = val.reshape(n, -1)
        for c in range(cols.shape[1]):
            cols[:, c] += np.bincount(i, w * flat[j, c], minlength=n)
            cols[:, c] += np.bincount(j, w * flat[i, c], minlength=n)
        out.append(o)
    return out


def _kernel_sums(ens, kern, values_list):
    if kern.is_compact:
        return _sparse_apply(ens, kern.R, kern.radial, values_list)
    return _pairwise_apply(ens.x, ens.x, kern.radial, values_list)


def _select(acc, i):
    return acc if i is None else acc[i]


def cs_alignment_accel(ens: ParticleEnsemble, kern: InteractionKernel, i=None, method="direct", mesh_h=0.02):
    """``(1/N) sum_{j != i} K(x_i, x_j) (v_j - v_i)`` for agent ``i`` (all agents
    if ``i`` is None)."""
    if ens.N < 2:
        raise ValueError("alignment needs at least two agents")
    if method == "mesh":
        return _select(_mesh_cs(ens, kern, mesh_h), i)
    if kern.kind == "constant":
        acc = kern.k0 * (ens.v.mean(axis=0) - ens.v)
        return _select(acc, i)
    ones = np.ones((ens.N, 1))
    Kv, K1 = _kernel_sums(ens, kern, [ens.v, ones])
    acc = (Kv - K1 * ens.v) / ens.N
    return _select(acc, i)


def mt_alignment_accel(ens: ParticleEnsemble, phi: InteractionKernel, i=None, method="direct", mesh_h=0.02):
    """``sum_j phi_ij (v_j - v_i) / sum_j phi_ij`` including the self term."""
    if method == "mesh":
        return _select(_mesh_mt(ens, phi, mesh_h), i)
    ones = np.ones((ens.N, 1))
    Pv, P1 = _kernel_sums(ens, phi, [ens.v, ones])
    acc = Pv / P1 - ens.v
    return _select(acc, i)


def local_mean_velocity(ens: ParticleEnsemble, eps: float, delta: float, x):
    """``sum_j psi_eps(x - x_j) v_j / (delta N + sum_j psi_eps(x - x_j))`` at the
    query point(s) ``x``."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 0 or (x.ndim == 1 and ens.dim > 1 and x.shape[0] == ens.dim)
    q = np.atleast_1d(x).reshape(-1, ens.dim)
    psi = lambda s: mollifier(s, eps, ens.dim)
    jv, rho = _pairwise_apply(q, ens.x, psi, [ens.v, np.ones((ens.N, 1))])
    denom = delta * ens.N + rho
    with np.errstate(invalid="ignore", divide="ignore"):
        u = np.where(denom > 0, jv / np.where(denom > 0, denom, 1.0), 0.0)
    return u[0] if single else u


def local_fields_at_agents(ens: ParticleEnsemble, eps: float, delta: float, lam: float = math.inf):
    """Mollified density ``rho_j`` and truncated local velocity ``chi(u_j)`` at
    every agent."""
    psi = lambda s: mollifier(s, eps, ens.dim)
    jv, rho = _sparse_apply(ens, eps, psi, [ens.v, np.ones((ens.N, 1))])
    jv /= ens.N
    rho /= ens.N
    u = jv / (delta + rho)
    return rho, truncate_vectors(u, lam)


def local_alignment_accel(ens: ParticleEnsemble, cfg: ModelConfig, i=None):
    """Mollified local alignment ``beta (u - v)`` in symmetric quadrature form."""
    if cfg.method == "mesh":
        return _select(_mesh_local(ens, cfg), i)
    rho, u = local_fields_at_agents(ens, cfg.eps, cfg.delta, cfg.lam)
    w = 1.0 / (ens.N * (cfg.delta + rho))
    psi = lambda s: mollifier(s, cfg.eps, ens.dim)
    Wu, W1 = _sparse_apply(ens, cfg.eps, psi, [w * u, w])
    acc = cfg.beta * (Wu - W1 * ens.v)
    return _select(acc, i)


# ------------------------------------------------------------ mesh variants
def _mesh_nodes(x, pad, h):
    lo = x.min() - pad - h
    n = int(math.ceil((x.max() + pad + h - lo) / h)) + 1
    return lo, n


def _cic(x, lo, h, n):
    """Linear-hat weights: node indices (N, 2) and weights (N, 2)."""
    s = (x - lo) / h
    m = np.floor(s).astype(np.int64)
    fr = s - m
    idx = np.stack([m, m + 1], axis=1)
    w = np.stack([1.0 - fr, fr], axis=1)
    return np.clip(idx, 0, n - 1), w


def _deposit(idx, w, vals, n):
    flat = vals.reshape(len(vals), -1)
    out = np.zeros((n, flat.shape[1]))
    ii = idx.ravel()
    for c in range(flat.shape[1]):
        out[:, c] = np.bincount(ii, (w * flat[:, c][:, None]).ravel(), minlength=n)
    return out.reshape((n,) + vals.shape[1:])


def _gather(idx, w, field):
    return sum(w[:, c].reshape((-1,) + (1,) * (field.ndim - 1)) * field[idx[:, c]] for c in range(idx.shape[1]))


def _need_1d(ens):
    if ens.dim != 1:
        raise ValueError("mesh evaluation is implemented for d = 1 only")


def _mesh_cs(ens, kern, h):
    _need_1d(ens)
    x = ens.x[:, 0]
    lo, n = _mesh_nodes(x, 0.0, h)
    idx, w = _cic(x, lo, h, n)
    rho = _deposit(idx, w, np.ones(ens.N), n) / (ens.N * h)
    j = _deposit(idx, w, ens.v, n) / (ens.N * h)
    y = lo + h * np.arange(n)
    K = kern.matrix(y) * h
    A = K @ j
    B = K @ rho
    return _gather(idx, w, A) - _gather(idx, w, B)[:, None] * ens.v


def _mesh_mt(ens, phi, h):
    _need_1d(ens)
    x = ens.x[:, 0]
    lo, n = _mesh_nodes(x, 0.0, h)
    idx, w = _cic(x, lo, h, n)
    rho = _deposit(idx, w, np.ones(ens.N), n)
    j = _deposit(idx, w, ens.v, n)
    P = phi.matrix(lo + h * np.arange(n))
    prho = P @ rho
    pj = P @ j
    ut = np.where(prho[:, None] > 0, pj / np.where(prho > 0, prho, 1.0)[:, None], 0.0)
    return _gather(idx, w, ut) - ens.v


def _mesh_local(ens, cfg):
    _need_1d(ens)
    x = ens.x[:, 0]
    h = min(cfg.mesh_h, cfg.eps / 4)
    lo, n = _mesh_nodes(x, cfg.eps, h)
    s = int(math.ceil(2 * cfg.eps / h)) + 2
    m0 = np.floor((x - cfg.eps - lo) / h).astype(np.int64)
    idx = m0[:, None] + np.arange(s)[None, :]
    y = lo + h * idx
    w = mollifier(np.abs(x[:, None] - y), cfg.eps, 1)
    rho = _deposit(idx, w, np.ones(ens.N), n) / ens.N
    j = _deposit(idx, w, ens.v, n) / ens.N
    denom = cfg.delta + rho
    u = np.where(denom[:, None] > 0, j / np.where(denom > 0, denom, 1.0)[:, None], 0.0)
    u = truncate_vectors(u, cfg.lam)
    wq = w * h
    return cfg.beta * (_gather(idx, wq, u) - wq.sum(axis=1)[:, None] * ens.v)


# ---------------------------------------------------------------- dynamics
def alignment_accel(ens, cfg: ModelConfig, kern: InteractionKernel, phi: InteractionKernel | None = None):
    acc = np.zeros_like(ens.v)
    if ens.N < 2:  # every alignment sum over j != i is empty
        return acc
    if cfg.uses_cs:
        acc += cs_alignment_accel(ens, kern, method=cfg.method, mesh_h=cfg.mesh_h)
    if cfg.uses_mt:
        phi = _mt_kernel(kern, phi)
        scale = 1.0 if cfg.model == "motsch-tadmor" else cfg.beta
        acc += scale * mt_alignment_accel(ens, phi, method=cfg.method, mesh_h=cfg.mesh_h)
    if cfg.model == "local-alignment" and cfg.beta > 0:
        acc += local_alignment_accel(ens, cfg)
    return acc


def _mt_kernel(kern, phi):
    phi = kern if phi is None else phi
    if not phi.is_compact:
        raise ValueError("Motsch-Tadmor alignment needs a compact kernel phi")
    return phi


def drift(ens, cfg, kern, pot, phi=None):
    """Deterministic velocity drift for every agent."""
    acc = alignment_accel(ens, cfg, kern, phi)
    acc -= pot.grad(ens.x)
    if cfg.a or cfg.b:
        speed2 = np.sum(ens.v * ens.v, axis=1, keepdims=True)
        acc += (cfg.a - cfg.b * speed2) * ens.v
    return acc


def stiffness_rate(ens, cfg, kern, pot, phi=None) -> float:
    """Crude bound on the fastest relaxation rate of the drift."""
    rate = 0.0
    if cfg.uses_cs:
        rate += kernel_bound(kern)
    if cfg.uses_mt:
        rate += 1.0 if cfg.model == "motsch-tadmor" else cfg.beta
    if cfg.model == "local-alignment":
        rate += cfg.beta
    rate += math.sqrt(pot.stiffness)
    vmax2 = float(np.max(np.sum(ens.v * ens.v, axis=1))) if ens.N else 0.0
    rate += cfg.a + 3.0 * cfg.b * vmax2
    return rate


def noise_stream(seed: int, step_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(step_index)])))


def step(ens: ParticleEnsemble, cfg: ModelConfig, kern: InteractionKernel, pot: ConfinementPotential,
         dt: float, seed: int = 0, step_index: int = 0, phi=None) -> ParticleEnsemble:
    """Advance the ensemble by ``dt``: Heun when ``sigma = 0``, Euler-Maruyama
    otherwise.  Noise for step ``k`` comes from the stream ``(seed, k)``,
    drawn in agent order, so results do not depend on evaluation order."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not ens.is_finite():
        raise ValueError("non-finite particle state")
    if dt * stiffness_rate(ens, cfg, kern, pot, phi) > 1.0:
        raise ValueError(f"dt={dt} too large for drift stiffness; need dt*rate <= 1")
    if cfg.sigma == 0:
        a1 = drift(ens, cfg, kern, pot, phi)
        pred = ParticleEnsemble(ens.x + dt * ens.v, ens.v + dt * a1)
        a2 = drift(pred, cfg, kern, pot, phi)
        new = ParticleEnsemble(ens.x + 0.5 * dt * (ens.v + pred.v), ens.v + 0.5 * dt * (a1 + a2))
    else:
        a1 = drift(ens, cfg, kern, pot, phi)
        dw = noise_stream(seed, step_index).standard_normal(ens.v.shape)
        new = ParticleEnsemble(ens.x + dt * ens.v, ens.v + dt * a1 + math.sqrt(2.0 * cfg.sigma * dt) * dw)
    if not new.is_finite():
        raise FloatingPointError("particle state became non-finite")
    return new


# ------------------------------------------------------------- diagnostics
def energy(ens: ParticleEnsemble, pot: ConfinementPotential) -> float:
    return float(np.mean(0.5 * np.sum(ens.v * ens.v, axis=1) + pot(ens.x if ens.dim > 1 else ens.x[:, 0])))


def dissipation_D2(ens: ParticleEnsemble, kern: InteractionKernel) -> float:
    """``(1/2N^2) sum_ij K_ij |v_i - v_j|^2`` via moment factorization."""
    v2 = np.sum(ens.v * ens.v, axis=1, keepdims=True)
    ones = np.ones((ens.N, 1))
    K1, Kv, Kv2 = _kernel_sums(ens, kern, [ones, ens.v, v2])
    tot = np.sum(K1 * v2) - np.sum(Kv * ens.v)
    return float(tot / ens.N**2)


def run(ens, cfg, kern, pot, dt, t_end, seed=0, output_every=1, phi=None, with_D2=None, observers=()):
    """Integrate to ``t_end`` and return (records, final ensemble).

    Each record is a dict with ``t, M, P, E`` and, if requested or cheap,
    ``D2``.  Observers are called as ``obs(t, ensemble)`` at every record."""
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    nsteps = int(round(t_end / dt)) if t_end > 0 else 0
    if nsteps and abs(nsteps * dt - t_end) > 1e-9 * max(1.0, t_end):
        nsteps = int(math.ceil(t_end / dt))
    h = t_end / nsteps if nsteps else dt
    with_D2 = ens.N <= 4000 if with_D2 is None else with_D2

    def record(e, t):
        p = e.momentum()
        rec = {"t": t, "M": 1.0, "P": float(p[0]) if e.dim == 1 else float(np.linalg.norm(p)),
               "P_vec": p.copy(), "E": energy(e, pot)}
        rec["D2"] = dissipation_D2(e, kern) if with_D2 and cfg.uses_cs else float("nan")
        return rec

    records = [record(ens, 0.0)]
    for obs in observers:
        obs(0.0, ens)
    cur = ens
    for k in range(nsteps):
        cur = step(cur, cfg, kern, pot, h, seed=seed, step_index=k, phi=phi)
        if (k + 1) % output_every == 0 or k + 1 == nsteps:
            records.append(record(cur, (k + 1) * h))
            for obs in observers:
                obs((k + 1) * h, cur)
    return records, cur
