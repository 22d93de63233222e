"""Interaction kernels and confinement potentials.

Kernels are radial functions of the separation ``|x - y|`` and therefore
symmetric by construction.  Three kinds are provided:

* ``constant``:  ``k0``
* ``algebraic``: ``k0 / (1 + |x - y|^2)^gamma``
* ``compact``:   ``k0 * (1 - (|x - y| / R)^2)_+^2``, positive on ``|x - y| < R``

For the compact bump, ``r`` is the radius on which the kernel is bounded
away from zero (``r < R``); it enters the Motsch-Tadmor normalization bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

KERNEL_KINDS = ("constant", "algebraic", "compact")
POTENTIAL_KINDS = ("quadratic", "none")


@dataclass(frozen=True)
class InteractionKernel:
    kind: str = "algebraic"
    k0: float = 1.0
    gamma: float = 1.0
    r: float = 0.5
    R: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.k0 < 0:
            raise ValueError("kernel amplitude k0 must be nonnegative")
        if self.kind == "algebraic" and self.gamma < 0:
            raise ValueError("algebraic kernel needs gamma >= 0")
        if self.kind == "compact" and not (0 < self.r < self.R):
            raise ValueError("compact kernel needs 0 < r < R")

    @property
    def is_compact(self) -> bool:
        return self.kind == "compact"

    @property
    def support_radius(self) -> float:
        """Radius beyond which the kernel vanishes (``inf`` if never)."""
        return self.R if self.is_compact else math.inf

    def radial(self, s):
        """Kernel value as a function of the distance ``s >= 0``."""
        s = np.asarray(s, dtype=float)
        if self.kind == "constant":
            return np.full_like(s, self.k0)
        if self.kind == "algebraic":
            return self.k0 / (1.0 + s * s) ** self.gamma
        q = np.clip(1.0 - (s / self.R) ** 2, 0.0, None)
        return self.k0 * q * q

    def __call__(self, x, y):
        return eval_kernel(self, x, y)

    def matrix(self, xs, ys=None):
        """Kernel matrix ``K[i, k] = K(xs[i], ys[k])`` for 1-D point sets."""
        xs = np.asarray(xs, dtype=float)
        ys = xs if ys is None else np.asarray(ys, dtype=float)
        return self.radial(np.abs(xs[:, None] - ys[None, :]))


def _distance(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    if d.ndim == 0:
        return np.abs(d)
    # trailing axis holds vector components
    return np.sqrt(np.sum(d * d, axis=-1))


def eval_kernel(kern: InteractionKernel, x, y):
    """Evaluate ``K(x, y)``.  Scalars are 1-D positions; otherwise the last
    axis is the spatial dimension."""
    return kern.radial(_distance(x, y))


def kernel_bound(kern: InteractionKernel) -> float:
    """``sup_{x,y} K(x, y)``; every kind attains it at ``x = y``."""
    return float(kern.k0)


def inf_on_inner_ball(kern: InteractionKernel) -> float:
    """``inf`` of the compact bump over ``|x - y| <= r``."""
    if not kern.is_compact:
        raise ValueError("inner-ball infimum is only defined for compact kernels")
    return float(kern.radial(kern.r))


def covering_constant(dim: int) -> float:
    """Constant ``C_ball(d)`` with  #{balls of radius r/2 covering B_R} <= C_ball(d) (R/r)^d.

    Cover the cube ``[-R, R]^d`` by cubes of side ``r/sqrt(d)`` (each sits in a
    ball of radius ``r/2``).  That takes ``ceil(2 R sqrt(d) / r)^d`` cubes,
    which for ``R >= r`` is at most ``(4 sqrt(d))^d (R/r)^d``.  In 1-D this is
    the count ``ceil(4R/r)`` for integer ``4R/r``.
    """
    if dim < 1:
        raise ValueError("dimension must be >= 1")
    return (4.0 * math.sqrt(dim)) ** dim


def mt_constant(sup_inf_ratio: float, radius_ratio: float, dim: int) -> float:
    """``C_ball(d) * (sup phi / inf_{B_r} phi) * (R/r)^d``."""
    if sup_inf_ratio < 1 or radius_ratio < 1:
        raise ValueError("need sup/inf >= 1 and R/r >= 1")
    return covering_constant(dim) * sup_inf_ratio * radius_ratio**dim


def mt_normalization_bound(kern: InteractionKernel, dim: int = 1) -> float:
    """Uniform bound on ``int phi(x - y) rho(x) / (phi * rho)(x) dx`` over all
    ``y`` and all nonnegative ``rho``; also the growth rate of the kinetic
    energy under Motsch-Tadmor alignment."""
    if not kern.is_compact:
        raise ValueError("Motsch-Tadmor bound requires a compactly supported kernel")
    ratio = kernel_bound(kern) / inf_on_inner_ball(kern)
    return mt_constant(ratio, kern.R / kern.r, dim)


@dataclass(frozen=True)
class ConfinementPotential:
    kind: str = "quadratic"
    omega2: float = 1.0

    def __post_init__(self):
        if self.kind not in POTENTIAL_KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.omega2 < 0:
            raise ValueError("omega2 must be nonnegative")

    @property
    def stiffness(self) -> float:
        return self.omega2 if self.kind == "quadratic" else 0.0

    def __call__(self, x):
        """``Phi(x)``; for array input the last axis is the spatial dimension
        unless ``x`` is one-dimensional (then each entry is a 1-D position)."""
        x = np.asarray(x, dtype=float)
        sq = x * x if x.ndim <= 1 else np.sum(x * x, axis=-1)
        return 0.5 * self.stiffness * sq

    def grad(self, x):
        return self.stiffness * np.asarray(x, dtype=float)

    def confines(self) -> bool:
        """True when ``Phi -> inf`` and ``int exp(-Phi) < inf``."""
        return self.stiffness > 0

    def integral_exp(self, scale: float = 1.0, dim: int = 1) -> float:
        """Closed form of ``int_{R^d} exp(-Phi(x) / scale) dx``."""
        if not self.confines():
            return math.inf
        return (2.0 * math.pi * scale / self.stiffness) ** (dim / 2)
