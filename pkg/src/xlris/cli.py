"""Command-line entry point: ``xlris <command> [options]``.

Commands
--------
sweep-t         NMSE versus pilot length at a fixed SNR
sweep-snr       NMSE versus SNR at a fixed pilot length
energy-profile  block energy of the sparse coefficients of sampled channels
observe         dump one trial's observations for later replay
replay          run solvers on a dumped observation set
validate        run the algebraic identity suite
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path


from .bench import (
    BASELINES,
    SNR_AXIS,
    T_AXIS,
    ExperimentPlan,
    emit,
    emit_energy_profile,
    energy_profile,
    run_sweep,
)
from .channel import generate_channel
from .config import PROFILES, SystemConfig, child_rng
from .dictionary import unified_dictionary
from .io import dump_observations, load_observations
from .measurement import gen_pilots, synthesize_observations
from .solvers import METHODS, Problem, SolverConfig, run_method
from .validation import identity_suite

T_FRACTIONS = (0.25, 0.375, 0.5, 0.75, 1.0)
SNR_GRID = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)

# flag -> SystemConfig field
CONFIG_FLAGS = {
    "n_t": "n_t",
    "n_y": "n_y",
    "n_z": "n_z",
    "f_c": "f_c",
    "bandwidth": "bandwidth",
    "subcarriers": "n_subcarriers",
    "paths_bs_ris": "n_paths_bs_ris",
    "paths_ris_ue": "n_paths_ris_ue",
    "rician_db": "rician_factor_db",
    "bs_ris_distance": "bs_ris_distance_m",
}
SOLVER_FLAGS = ("k_max", "block_size", "coupling", "a", "b", "max_iter", "tol", "noise_mode", "residual_threshold")


def _add_config_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("system")
    g.add_argument("--profile", choices=sorted(PROFILES), default="desk")
    g.add_argument("--config", type=Path, help="JSON file with SystemConfig fields (applied after --profile)")
    g.add_argument("--seed", type=int, default=None, help="root seed (default: the config's seed)")
    g.add_argument("--n-t", type=int)
    g.add_argument("--n-y", type=int)
    g.add_argument("--n-z", type=int)
    g.add_argument("--f-c", type=float, help="carrier frequency [Hz]")
    g.add_argument("--bandwidth", type=float, help="[Hz]")
    g.add_argument("--subcarriers", type=int)
    g.add_argument("--paths-bs-ris", type=int)
    g.add_argument("--paths-ris-ue", type=int)
    g.add_argument("--rician-db", type=float)
    g.add_argument("--bs-ris-distance", type=float, help="[m]")


def _add_solver_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solvers")
    g.add_argument("--methods", nargs="+", default=list(BASELINES), help=f"any of {sorted(METHODS)}")
    g.add_argument("--k-max", type=int)
    g.add_argument("--block-size", type=int)
    g.add_argument("--coupling", type=float)
    g.add_argument("--a", type=float, help="Gamma hyperprior shape")
    g.add_argument("--b", type=float, help="Gamma hyperprior rate")
    g.add_argument("--max-iter", type=int)
    g.add_argument("--tol", type=float)
    g.add_argument("--noise-mode", choices=("known", "em"))
    g.add_argument("--residual-threshold", type=float)
    g.add_argument("--rings", type=int, default=4, help="polar dictionary distance rings")
    g.add_argument("--gamma", type=float, default=1.0, help="polar ring spacing factor")


def build_config(args) -> SystemConfig:
    cfg = PROFILES[args.profile]()
    if args.config is not None:
        data = cfg.to_dict()
        data.update(json.loads(args.config.read_text()))
        cfg = SystemConfig.from_dict(data)
    changes = {field: getattr(args, flag) for flag, field in CONFIG_FLAGS.items() if getattr(args, flag) is not None}
    if args.seed is not None:
        changes["seed"] = args.seed
    return cfg.replace(**changes) if changes else cfg


def build_solver(args) -> SolverConfig:
    knobs = {k: getattr(args, k) for k in SOLVER_FLAGS if getattr(args, k) is not None}
    return SolverConfig(**knobs)


def _progress(done: int, total: int) -> None:
    print(f"\rtrial {done}/{total}", end="" if done < total else "\n", file=sys.stderr, flush=True)


def _print_table(table) -> None:
    print(f"{'method':10s} {table.plan.axis:>8s} {'NMSE [dB]':>10s} {'failures':>8s}")
    for r in table.rows:
        print(f"{r.method:10s} {r.value:8g} {r.nmse_db:10.2f} {r.failures:8d}")


def _sweep(args, axis: str) -> int:
    cfg = build_config(args)
    if axis == T_AXIS:
        values = args.T or [max(1, round(f * cfg.dim)) for f in T_FRACTIONS]
        fixed = args.snr
    else:
        values = args.snr or list(SNR_GRID)
        fixed = args.T if args.T is not None else cfg.dim // 2
    plan = ExperimentPlan(
        cfg=cfg,
        axis=axis,
        values=tuple(float(v) for v in values),
        fixed=float(fixed),
        methods=tuple(args.methods),
        trials=args.trials,
        seed=cfg.seed,
        out_dir=str(args.out),
        solver=build_solver(args),
        n_rings=args.rings,
        gamma=args.gamma,
    )
    table = run_sweep(plan, jobs=args.jobs, progress=None if args.quiet else _progress)
    paths = emit(table, args.out)
    if not args.quiet:
        _print_table(table)
        print(f"wrote {paths['csv']}")
    for err in table.errors:
        print(f"solver failure: {err}", file=sys.stderr)
    return 0


def cmd_energy(args) -> int:
    cfg = build_config(args)
    profile = energy_profile(cfg, args.trials, cfg.seed, args.block_size, args.fraction)
    paths = emit_energy_profile(profile, cfg, cfg.seed, args.out)
    if not args.quiet:
        counts = profile.counts
        print(f"blocks of {profile.block_size}: {args.fraction:.0%} energy needs mean {counts.mean():.2f}, max {counts.max()} blocks")
        print(f"wrote {paths['csv']}")
    return 0


def cmd_observe(args) -> int:
    cfg = build_config(args)
    T = args.T if args.T is not None else cfg.dim // 2
    H = generate_channel(cfg, child_rng(cfg.seed, "channel", args.trial)).H
    C = gen_pilots(cfg, T, child_rng(cfg.seed, f"pilots-T{T}", args.trial)).c_matrix()
    obs = synthesize_observations(H, C, args.snr, child_rng(cfg.seed, f"noise-T{T}-snr{float(args.snr)!r}", args.trial))
    path = dump_observations(args.out, obs, cfg, H, {"trial": args.trial})
    if not args.quiet:
        print(f"wrote {path}")
    return 0


def cmd_replay(args) -> int:
    obs, cfg, H, _ = load_observations(args.dump)
    solver = build_solver(args)
    problem = Problem(cfg, unified_dictionary(cfg), obs.c_matrix, obs.y, obs.noise_var, H, n_rings=args.rings, gamma=args.gamma)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    diagnostics = {}
    with (out / "replay.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "nmse_db", "iterations", "residual", "converged"])
        for method in args.methods:
            data = solver.to_dict()
            data["method"] = method
            res = run_method(method, problem, SolverConfig(**data))
            nmse = "" if res.nmse_db is None else repr(float(res.nmse_db))
            w.writerow([method, nmse, res.iterations, repr(float(res.residual)), res.converged])
            diagnostics[method] = res.summary()
            if not args.quiet:
                print(f"{method:10s} NMSE {nmse or 'n/a'} dB, {res.iterations} iterations")
    (out / "replay.json").write_text(json.dumps(diagnostics, indent=2, sort_keys=True))
    return 0


def cmd_validate(args) -> int:
    cfg = build_config(args)
    checks = identity_suite(cfg, cfg.seed)
    for c in checks:
        print(c.line())
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "validate.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["check", "value", "tolerance", "passed"])
            for c in checks:
                w.writerow([c.name, repr(c.value), "" if c.tol is None else repr(c.tol), c.passed])
    return 0 if all(c.passed for c in checks) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xlris", description="Wideband near-field XL-RIS channel estimation benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        _add_config_args(p)
        p.add_argument("--out", type=Path, required=out_required, help="output directory")
        p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("sweep-t", help="NMSE versus pilot length")
    common(p)
    _add_solver_args(p)
    p.add_argument("--T", type=int, nargs="+", help="pilot lengths (default: fractions of N*N_t)")
    p.add_argument("--snr", type=float, default=10.0, help="fixed SNR [dB]")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=lambda a: _sweep(a, T_AXIS))

    p = sub.add_parser("sweep-snr", help="NMSE versus SNR")
    common(p)
    _add_solver_args(p)
    p.add_argument("--snr", type=float, nargs="+", help="SNR points [dB]")
    p.add_argument("--T", type=int, help="fixed pilot length (default N*N_t/2)")
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=lambda a: _sweep(a, SNR_AXIS))

    p = sub.add_parser("energy-profile", help="block energy of sparse coefficients")
    common(p)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--block-size", type=int)
    p.add_argument("--fraction", type=float, default=0.95)
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("observe", help="dump one trial's observations")
    _add_config_args(p)
    p.add_argument("--out", type=Path, required=True, help="container file to write")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--T", type=int)
    p.add_argument("--snr", type=float, default=10.0)
    p.add_argument("--trial", type=int, default=0)
    p.set_defaults(func=cmd_observe)

    p = sub.add_parser("replay", help="run solvers on a dumped observation set")
    p.add_argument("dump", type=Path)
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--quiet", action="store_true")
    _add_solver_args(p)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("validate", help="run the algebraic identity suite")
    common(p, out_required=False)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"xlris: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
