"""Flat dotted-key run configuration.

File format, one assignment per line::

    # comment
    grid.Nx = 128
    reg.lambda = inf

Precedence (lowest first): built-in defaults, the config file, the
``KINFLOCK_SET`` environment variable (``key=value`` pairs separated by ``;``),
then command-line ``--set key=value`` and ``--seed``.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Any, Callable

from .kernels import ConfinementPotential, InteractionKernel
from .kinetic import PhaseGrid, RegularizationParams, V_FLUXES
from .model import MODELS, ModelConfig

ENV_VAR = "KINFLOCK_SET"
MODES = ("particles", "kinetic", "check", "compare")
INIT_KINDS = ("bump", "equilibrium", "monokinetic", "two-groups")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


def _float(s):
    return float(s)


def _int(s):
    if isinstance(s, str):
        s = s.strip()
        v = float(s)
        if not v.is_integer():
            raise ValueError(s)
        return int(v)
    if isinstance(s, float) and not s.is_integer():
        raise ValueError(s)
    return int(s)


def _str(s):
    return str(s).strip()


def _bool(s):
    if isinstance(s, bool):
        return s
    t = str(s).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(s)


def _ge(lo):
    return lambda v: v >= lo, f">= {lo}"


def _gt(lo):
    return lambda v: v > lo, f"> {lo}"


def _one_of(options):
    return lambda v: v in options, f"one of {', '.join(map(str, options))}"


_ANY = (lambda v: True, "")


@dataclass(frozen=True)
class _Key:
    parse: Callable
    default: Any
    check: tuple = _ANY


SCHEMA: dict[str, _Key] = {
    "kernel.kind": _Key(_str, "algebraic", _one_of(("constant", "algebraic", "compact"))),
    "kernel.k0": _Key(_float, 1.0, _ge(0.0)),
    "kernel.gamma": _Key(_float, 1.0, _ge(0.0)),
    "kernel.r": _Key(_float, 0.5, _gt(0.0)),
    "kernel.R": _Key(_float, 1.0, _gt(0.0)),
    "phi.k0": _Key(_float, 1.0, _gt(0.0)),
    "phi.r": _Key(_float, 0.5, _gt(0.0)),
    "phi.R": _Key(_float, 1.0, _gt(0.0)),
    "potential.kind": _Key(_str, "quadratic", _one_of(("quadratic", "none"))),
    "potential.omega2": _Key(_float, 1.0, _ge(0.0)),
    "model.kind": _Key(_str, "local-alignment", _one_of(MODELS)),
    "model.beta": _Key(_float, 1.0, _ge(0.0)),
    "model.sigma": _Key(_float, 0.1, _ge(0.0)),
    "model.a": _Key(_float, 0.0, _ge(0.0)),
    "model.b": _Key(_float, 0.0, _ge(0.0)),
    "model.eps": _Key(_float, 0.1, _gt(0.0)),
    "reg.delta": _Key(_float, 0.0, _ge(0.0)),
    "reg.lambda": _Key(_float, math.inf, _gt(0.0)),
    "reg.eps_vac": _Key(_float, 1e-12, _ge(0.0)),
    "grid.x_min": _Key(_float, -6.0),
    "grid.x_max": _Key(_float, 6.0),
    "grid.v_min": _Key(_float, -4.0),
    "grid.v_max": _Key(_float, 4.0),
    "grid.Nx": _Key(_int, 128, _ge(8)),
    "grid.Nv": _Key(_int, 128, _ge(8)),
    "kinetic.v_flux": _Key(_str, "muscl", _one_of(V_FLUXES)),
    "init.kind": _Key(_str, "bump", _one_of(INIT_KINDS)),
    "init.x0": _Key(_float, 1.0),
    "init.v0": _Key(_float, 0.5),
    "init.sx": _Key(_float, 0.6, _gt(0.0)),
    "init.sv": _Key(_float, 0.6, _gt(0.0)),
    "init.mass": _Key(_float, 1.0, _gt(0.0)),
    "particles.N": _Key(_int, 1000, _ge(2)),
    "particles.dim": _Key(_int, 1, _one_of((1, 2, 3))),
    "particles.method": _Key(_str, "direct", _one_of(("direct", "mesh"))),
    "particles.mesh_h": _Key(_float, 0.02, _gt(0.0)),
    "run.dt": _Key(_float, 0.0, _ge(0.0)),  # 0 means: particles 1e-3, kinetic cfl * stable dt
    "run.cfl": _Key(_float, 0.5, (lambda v: 0 < v <= 0.9, "in (0, 0.9]")),
    "run.t_end": _Key(_float, 1.0, _ge(0.0)),
    "run.output_every": _Key(_int, 10, _ge(1)),
    "run.snapshot_every": _Key(_int, 0, _ge(0)),  # 0: only the final snapshot
    "run.seed": _Key(_int, 0, _ge(0)),
    "compare.N": _Key(_int, 100000, _ge(2)),
    "compare.bandwidth": _Key(_float, 0.1, _gt(0.0)),
    "check.quick": _Key(_bool, True),
}

PARTICLE_DT_DEFAULT = 1e-3


def parse_assignments(lines, origin: str) -> dict[str, str]:
    out = {}
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{n}: expected 'key = value', got {raw.strip()!r}")
        k, v = (p.strip() for p in line.split("=", 1))
        if not k:
            raise ConfigError(f"{origin}:{n}: empty key")
        out[k] = v
    return out


def _env_pairs(env) -> dict[str, str]:
    text = env.get(ENV_VAR, "")
    return parse_assignments(text.split(";"), ENV_VAR) if text.strip() else {}


@dataclass
class RunConfig:
    mode: str
    values: dict = field(default_factory=dict)
    out_dir: str = "out"

    def __getitem__(self, key):
        return self.values[key]

    @property
    def seed(self) -> int:
        return self.values["run.seed"]

    # builders -------------------------------------------------------------
    def kernel(self) -> InteractionKernel:
        v = self.values
        return InteractionKernel(v["kernel.kind"], k0=v["kernel.k0"], gamma=v["kernel.gamma"],
                                 r=v["kernel.r"], R=v["kernel.R"])

    def phi(self) -> InteractionKernel:
        v = self.values
        return InteractionKernel("compact", k0=v["phi.k0"], r=v["phi.r"], R=v["phi.R"])

    def potential(self) -> ConfinementPotential:
        return ConfinementPotential(self.values["potential.kind"], self.values["potential.omega2"])

    def model(self) -> ModelConfig:
        v = self.values
        return ModelConfig(model=v["model.kind"], beta=v["model.beta"], sigma=v["model.sigma"], a=v["model.a"],
                           b=v["model.b"], eps=v["model.eps"], delta=v["reg.delta"], lam=v["reg.lambda"],
                           method=v["particles.method"], mesh_h=v["particles.mesh_h"])

    def reg(self) -> RegularizationParams:
        v = self.values
        return RegularizationParams(v["reg.delta"], v["reg.lambda"], v["reg.eps_vac"])

    def grid(self) -> PhaseGrid:
        v = self.values
        return PhaseGrid(v["grid.x_min"], v["grid.x_max"], v["grid.v_min"], v["grid.v_max"], v["grid.Nx"], v["grid.Nv"])

    def initial_grid(self) -> PhaseGrid:
        from . import kinetic as kn

        v, g = self.values, self.grid()
        kind = v["init.kind"]
        if kind == "bump":
            return kn.maxwellian_bump(g, v["init.x0"], v["init.v0"], v["init.sx"], v["init.sv"], v["init.mass"])
        if kind == "equilibrium":
            return kn.equilibrium(g, v["model.sigma"], v["model.beta"], self.potential(), v["init.mass"])
        if kind == "monokinetic":
            return kn.monokinetic(g, v["init.v0"], v["init.x0"], v["init.sx"], v["init.mass"])
        return kn.two_groups(g)

    def dump(self) -> str:
        lines = [f"# effective configuration, mode = {self.mode}"]
        for k in sorted(self.values):
            val = self.values[k]
            lines.append(f"{k} = {val!r}" if isinstance(val, float) else f"{k} = {val}")
        return "\n".join(lines) + "\n"


def _coerce(key: str, raw) -> Any:
    if key not in SCHEMA:
        raise ConfigError(f"unknown key {key!r}")
    entry = SCHEMA[key]
    try:
        val = entry.parse(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot parse {raw!r} as {entry.parse.__name__.lstrip('_')}") from None
    if isinstance(val, float) and math.isnan(val):
        raise ConfigError(f"{key}: NaN is not allowed")
    ok, desc = entry.check
    if not ok(val):
        raise ConfigError(f"{key}: value {val!r} out of range (must be {desc})")
    return val


def _validate(cfg: RunConfig) -> None:
    v = cfg.values
    if not v["grid.x_max"] > v["grid.x_min"]:
        raise ConfigError("grid.x_max: must exceed grid.x_min")
    if not v["grid.v_max"] > v["grid.v_min"]:
        raise ConfigError("grid.v_max: must exceed grid.v_min")
    if v["kernel.kind"] == "compact" and not v["kernel.R"] > v["kernel.r"]:
        raise ConfigError("kernel.R: must exceed kernel.r for the compact kernel")
    if not v["phi.R"] > v["phi.r"]:
        raise ConfigError("phi.R: must exceed phi.r")
    if v["particles.method"] == "mesh" and v["particles.dim"] != 1:
        raise ConfigError("particles.method: mesh evaluation needs particles.dim = 1")
    if cfg.mode == "compare" and v["particles.dim"] != 1:
        raise ConfigError("particles.dim: compare mode needs dim = 1 to match the grid")


def parse_config(path=None, overrides=(), mode: str = "kinetic", out_dir: str = "out", seed=None,
                 env=None) -> RunConfig:
    """Build a validated :class:`RunConfig`.  ``overrides`` are ``key=value`` strings."""
    if mode not in MODES:
        raise ConfigError(f"mode: unknown mode {mode!r}")
    raw: dict[str, Any] = {}
    if path is not None:
        try:
            with open(path) as fh:
                raw.update(parse_assignments(fh, str(path)))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    raw.update(_env_pairs(os.environ if env is None else env))
    raw.update(parse_assignments(overrides, "--set"))
    if seed is not None:
        raw["run.seed"] = seed
    values = {k: s.default for k, s in SCHEMA.items()}
    for k, r in raw.items():
        values[k] = _coerce(k, r)
    cfg = RunConfig(mode, values, out_dir)
    _validate(cfg)
    return cfg
