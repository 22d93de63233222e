"""Model parameters shared by the particle and kinetic solvers."""

from __future__ import annotations

import math
from dataclasses import dataclass

MODELS = ("cucker-smale", "motsch-tadmor", "local-alignment", "combined")


@dataclass(frozen=True)
class ModelConfig:
    model: str = "local-alignment"
    beta: float = 1.0
    sigma: float = 0.0
    a: float = 0.0
    b: float = 0.0
    eps: float = 0.1
    delta: float = 0.0
    lam: float = math.inf
    method: str = "direct"
    mesh_h: float = 0.02

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        for name in ("beta", "sigma", "a", "b", "delta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not self.eps > 0:
            raise ValueError("mollifier width eps must be positive")
        if not self.lam > 0:
            raise ValueError("truncation level lam must be positive")
        if self.method not in ("direct", "mesh"):
            raise ValueError("method must be 'direct' or 'mesh'")
        if not self.mesh_h > 0:
            raise ValueError("mesh_h must be positive")

    @property
    def uses_cs(self) -> bool:
        return self.model in ("cucker-smale", "local-alignment", "combined")

    @property
    def uses_mt(self) -> bool:
        return self.model in ("motsch-tadmor", "combined")

    @property
    def uses_local(self) -> bool:
        return self.model == "local-alignment" and self.beta > 0

    @property
    def relaxation_rate(self) -> float:
        """Coefficient of the local or Motsch-Tadmor relaxation term."""
        if self.model == "motsch-tadmor":
            return 1.0
        if self.model in ("local-alignment", "combined"):
            return self.beta
        return 0.0
