"""Command line entry point.

Exit codes: 0 success, 2 configuration error, 3 numeric-guard abort,
4 oracle-check failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import runner
from .core import ConfigError, NumericGuardError
from .noise import generate_path

log = logging.getLogger("squeezefilter")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ORACLE = 0, 2, 3, 4


def _bool(s: str) -> bool:
    if s.lower() in ("1", "true", "yes", "on"):
        return True
    if s.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"not a boolean: {s}")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="YAML file of configuration keys")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    g = p.add_argument_group("configuration overrides")
    for f in dataclasses.fields(runner.RunConfig):
        flag = "--" + f.name.replace("_", "-")
        if f.name in ("outputs", "density_times"):
            g.add_argument(flag, dest=f.name, nargs="+", default=None)
        elif f.type in ("bool", bool):
            g.add_argument(flag, dest=f.name, type=_bool, default=None)
        elif f.type in ("int", int):
            g.add_argument(flag, dest=f.name, type=int, default=None)
        elif f.type in ("float", float):
            g.add_argument(flag, dest=f.name, type=float, default=None)
        else:
            g.add_argument(flag, dest=f.name, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="squeezefilter",
        description="Posterior squeezed-coherent evolution under heterodyne observation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="one trajectory")
    _add_config_flags(p)
    p.add_argument("--index", type=int, default=0, help="trajectory index")

    p = sub.add_parser("ensemble", help="Monte Carlo statistics over many trajectories")
    _add_config_flags(p)

    p = sub.add_parser("figure", help="uncertainty curves for the figure presets")
    _add_config_flags(p)
    p.add_argument("--which", type=int, choices=(1, 2), required=True)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--tau-max", type=float, default=100.0)

    p = sub.add_parser("oracle-check", help="closed form versus Fock-space integration")
    _add_config_flags(p)
    p.add_argument("--no-convergence", action="store_true", help="skip the dt-halving study")

    p = sub.add_parser("noise-dump", help="write one noise record as CSV")
    _add_config_flags(p)
    p.add_argument("--index", type=int, default=0)
    return parser


def _config(args) -> runner.RunConfig:
    overrides = {f.name: getattr(args, f.name) for f in dataclasses.fields(runner.RunConfig)}
    if args.config is not None:
        return runner.load_config(args.config, **overrides)
    return runner.RunConfig.from_mapping({}, **overrides)


def _run(args) -> int:
    cfg = _config(args)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    if args.command == "simulate":
        traj = runner.run_trajectory(cfg, args.index)
        if not cfg.full_resolution:
            traj = traj.decimated(cfg.decimate)
        name = f"trajectory_{cfg.scheme}_{args.index}"
        runner.write_trajectory(traj, out / f"{name}.csv")
        runner.write_manifest(out / f"{name}.json", "simulate", cfg, trajectory_index=args.index,
                              frames=len(traj))
        log.info("wrote %s.csv (%d frames)", name, len(traj))
    elif args.command == "ensemble":
        stats = runner.run_ensemble(cfg)
        name = f"ensemble_{cfg.scheme}"
        runner.write_ensemble(stats, out / f"{name}.csv")
        runner.write_manifest(out / f"{name}.json", "ensemble", cfg, n_ok=stats.n_ok,
                              n_failed=stats.n_failed, failed=list(stats.failed),
                              density_times=list(stats.density_times),
                              trace_distance=list(stats.trace_distance))
        log.info("mean |l(T)|^2 = %.6f +- %.6f", stats.mean_norm2[-1], stats.stderr_norm2[-1])
    elif args.command == "figure":
        fig = runner.figure_data(args.which, cfg.rho0, args.samples, args.tau_max)
        name = f"figure{args.which}_rho0_{cfg.rho0:g}"
        runner.write_figure(fig, out / f"{name}.csv")
        runner.write_manifest(out / f"{name}.json", "figure", None, which=args.which, rho0=cfg.rho0,
                              samples=args.samples, tau_max=args.tau_max,
                              preset={"mu_over_omega": runner.FIG_MU, "theta0": runner.FIG_THETA0,
                                      "vartheta": runner.FIG_VARTHETA})
    elif args.command == "oracle-check":
        report = runner.oracle_check(cfg, convergence=not args.no_convergence)
        doc = report.to_dict()
        (out / f"oracle_{cfg.scheme}.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
        runner.write_manifest(out / f"oracle_{cfg.scheme}_manifest.json", "oracle-check", cfg)
        for c in report.checks:
            print(f"{c.status.upper():12s} {c.name:24s} {c.value:.3e} (threshold {c.threshold:.3e}) {c.detail}")
        if report.failed:
            return EXIT_ORACLE
    elif args.command == "noise-dump":
        path = generate_path(cfg.grid(), cfg.noise_kind, cfg.seed, args.index)
        name = f"noise_{cfg.noise_kind.value}_{cfg.seed}_{args.index}"
        path.to_csv(out / f"{name}.csv")
        runner.write_manifest(out / f"{name}.json", "noise-dump", cfg, trajectory_index=args.index)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericGuardError as exc:
        print(f"numeric guard: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
