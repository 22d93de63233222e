"""Command-line entry point: ``kinflock {run-particles,run-kinetic,check,compare}``."""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from . import diagnostics as dg
from . import kinetic as kn
from . import particles as pt
from .config import PARTICLE_DT_DEFAULT, ConfigError, parse_config
from .kernels import mt_normalization_bound

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

_MODE = {"run-particles": "particles", "run-kinetic": "kinetic", "check": "check", "compare": "compare"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kinflock", description="Kinetic flocking simulations and property checks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in (("run-particles", "integrate the N-agent system"),
                        ("run-kinetic", "run the phase-space solver"),
                        ("check", "run the bundled property suite"),
                        ("compare", "particle vs grid moment consistency")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", metavar="PATH", help="dotted-key config file")
        s.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], dest="overrides",
                       help="override one key (repeatable)")
        s.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
        s.add_argument("--seed", type=int, help="random seed (overrides run.seed)")
    return p


def _prepare(args):
    cfg = parse_config(args.config, args.overrides, mode=_MODE[args.command], out_dir=args.out, seed=args.seed)
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, "config.txt"), "w") as fh:
        fh.write(cfg.dump())
    return cfg


def _report(results) -> bool:
    ok = True
    for name, res in results.items():
        status = "n/a" if res.passed is None else ("pass" if res.passed else "FAIL")
        print(f"{name}: {status} (margin {res.margin:.3e})")
        ok &= res.passed is not False
    return ok


def _initial_ensemble(cfg) -> pt.ParticleEnsemble:
    v = cfg.values
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, 0xA5])))
    N, d = v["particles.N"], v["particles.dim"]
    if v["init.kind"] == "bump" and d > 1:
        x = rng.standard_normal((N, d)) * v["init.sx"]
        x[:, 0] += v["init.x0"]
        vel = rng.standard_normal((N, d)) * v["init.sv"]
        vel[:, 0] += v["init.v0"]
        return pt.ParticleEnsemble(x, vel)
    if d > 1:
        raise ConfigError(f"init.kind: {v['init.kind']!r} particle initial data is only defined for dim = 1")
    from .compare import sample_from_grid

    return sample_from_grid(cfg.initial_grid(), N, rng)


def cmd_particles(cfg) -> int:
    model, kern, pot = cfg.model(), cfg.kernel(), cfg.potential()
    ens = _initial_ensemble(cfg)
    dt = cfg["run.dt"] or PARTICLE_DT_DEFAULT
    phi = cfg.phi() if model.uses_mt else None
    recs, final = pt.run(ens, model, kern, pot, dt, cfg["run.t_end"], seed=cfg.seed,
                         output_every=cfg["run.output_every"], phi=phi)
    rows = [dg.DiagnosticsRecord(t=r["t"], M=r["M"], P=r["P"], E=r["E"], D2=r["D2"]) for r in recs]
    results = {}
    if not model.uses_mt and model.a == 0 and model.b == 0:
        results["energy_inequality"] = dg.check_energy_inequality(rows, model.sigma, final.dim)
        for r in rows:
            r.flags["energy_ineq"] = r.E <= model.sigma * final.dim * r.t + rows[0].E * (1 + 1e-6)
    dg.write_csv(os.path.join(cfg.out_dir, "diagnostics.csv"), rows)
    with open(os.path.join(cfg.out_dir, "particles_final.txt"), "w") as fh:
        fh.write(f"# t={cfg['run.t_end']!r} N={final.N} dim={final.dim} columns=x...,v...\n")
        for xi, vi in zip(final.x, final.v):
            fh.write(" ".join(repr(float(c)) for c in (*xi, *vi)) + "\n")
    return EXIT_OK if _report(results) else EXIT_FAIL


def cmd_kinetic(cfg) -> int:
    model, kern, pot, reg = cfg.model(), cfg.kernel(), cfg.potential(), cfg.reg()
    grid0 = cfg.initial_grid()
    phi = cfg.phi() if model.uses_mt else None
    every = cfg["run.snapshot_every"]
    snaps = []

    def snap(t, g, _count=[0]):
        if every and _count[0] % every == 0:
            snaps.append(t)
            kn.write_snapshot(os.path.join(cfg.out_dir, f"snapshot_{len(snaps) - 1:05d}.txt"), g, t)
        _count[0] += 1

    try:
        out = kn.run(grid0, model, kern, pot, reg, t_end=cfg["run.t_end"], output_every=cfg["run.output_every"],
                     dt=cfg["run.dt"] or None, cfl=cfg["run.cfl"], phi=phi, v_flux=cfg["kinetic.v_flux"],
                     observers=[snap])
    except kn.SimulationError as exc:
        kn.write_snapshot(os.path.join(cfg.out_dir, "last_good.txt"), exc.last_good, exc.records[-1].t)
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_FAIL
    results = dg.evaluate_run(out.records, model, kern, grid0, out.dt)
    if model.uses_mt and model.sigma == 0:
        results["mt_energy"] = dg.check_mt_energy(out.records, mt_normalization_bound(phi))
    dg.write_csv(os.path.join(cfg.out_dir, "diagnostics.csv"), out.records)
    kn.write_snapshot(os.path.join(cfg.out_dir, "final.txt"), out.grid, out.records[-1].t)
    return EXIT_OK if _report(results) else EXIT_FAIL


def cmd_compare(cfg) -> int:
    from .compare import run_compare

    rep = run_compare(cfg)
    with open(os.path.join(cfg.out_dir, "compare.txt"), "w") as fh:
        fh.write("\n".join(rep.lines()) + "\n")
    for line in rep.lines():
        print(line)
    ok = math.isfinite(rep.worst()) and rep.worst() <= 0.05
    print(f"max relative L1 distance: {rep.worst():.4f} ({'pass' if ok else 'FAIL'} at 5%)")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_check(cfg) -> int:
    from .checks import run_suite

    results = run_suite(quick=cfg["check.quick"], seed=cfg.seed)
    with open(os.path.join(cfg.out_dir, "check.txt"), "w") as fh:
        for name, (ok, info) in results.items():
            fh.write(f"{name}: {'pass' if ok else 'FAIL'} {info}\n")
    for name, (ok, info) in results.items():
        print(f"{'pass' if ok else 'FAIL'}  {name}  {info}")
    failed = [n for n, (ok, _) in results.items() if not ok]
    print(f"{len(results) - len(failed)}/{len(results)} properties passed")
    return EXIT_FAIL if failed else EXIT_OK


COMMANDS = {"run-particles": cmd_particles, "run-kinetic": cmd_kinetic, "check": cmd_check, "compare": cmd_compare}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _prepare(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"kinflock: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except kn.CFLError as exc:
        print(f"kinflock: {exc}; use run.dt <= {exc.stable_dt!r}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
