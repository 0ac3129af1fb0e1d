"""Command-line front end.

    chevron simulate  --config run.ini --out runs/free
    chevron stabilize --set initial.seed=3 --out runs/stab
    chevron track     --reference ref.ini --out runs/track
    chevron modes     [--2d]
    chevron eigen     --count 10

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 invariant breach.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import config as cfgmod
from .control import (
    continuum_eigenvalue,
    discrete_eigenvalues,
    mode_count_2d,
    plan_zero_stabilization,
    sine_modes,
)
from .discretization import laplacian
from .errors import ChevronError, ConfigError
from .model import Grid1D, initial_condition
from .runs import run_simulate, run_stabilize, run_track

log = logging.getLogger("chevron")

RUN_COMMANDS = {"simulate": "none", "stabilize": "zero_stabilization", "track": "tracking"}


def _resolve(args) -> dict:
    settings = cfgmod.load_settings(args.config)
    overrides = list(args.set or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"initial.seed={args.seed}")
    if getattr(args, "steps", None) is not None:
        overrides.append(f"run.steps={args.steps}")
    if getattr(args, "solver", None) is not None:
        overrides.append(f"solver.kind={args.solver}")
    if getattr(args, "out", None) is not None:
        overrides.append(f"output.directory={args.out}")
    return cfgmod.apply_overrides(settings, overrides)


def _echo(settings) -> dict:
    # the output directory is left out so reruns elsewhere give equal manifests
    echo = {sec: dict(keys) for sec, keys in settings.items()}
    echo["output"] = {k: v for k, v in echo["output"].items() if k != "directory"}
    return echo


def _reference(settings, path: Optional[Path]):
    """Reference initial condition, spin-up steps and M0 window."""
    ref = settings["reference"]
    if path is None:
        return cfgmod.reference_initial(settings), ref["spinup"], ref["m0_steps"]
    other = cfgmod.load_settings(path)
    for section in ("params", "grid"):
        if other[section] != settings[section]:
            raise ConfigError(f"reference config {path} differs in [{section}]: {other[section]} vs {settings[section]}")
    return cfgmod.initial_spec(other["initial"]), other["run"]["steps"], ref["m0_steps"]


def _run_one(command, settings, reference_path=None):
    if settings["control"]["kind"] == "none":
        settings = cfgmod.apply_overrides(settings, [f"control.kind={RUN_COMMANDS[command]}"])
    cfg = cfgmod.build_run_config(settings)
    if cfg.control.name != RUN_COMMANDS[command]:
        raise ConfigError(f"{command} cannot run control kind {cfg.control.name!r}")
    out_dir = Path(cfg.output.directory) if cfg.output.directory else None
    manifest = {"command": command, "config": _echo(settings)}
    if command == "simulate":
        return run_simulate(cfg, out_dir, manifest)
    if command == "stabilize":
        return run_stabilize(cfg, out_dir, manifest)
    ref_init, spinup, m0_steps = _reference(settings, reference_path)
    manifest["reference"] = {"initial": vars(ref_init), "spinup": spinup, "m0_steps": m0_steps}
    return run_track(cfg, ref_init, spinup, m0_steps, out_dir, manifest)


def _print_summary(summary, as_json, stream=None):
    stream = stream or sys.stdout
    if as_json:
        json.dump(summary, stream, indent=2, sort_keys=True, default=str)
        stream.write("\n")
        return
    for key in sorted(summary):
        value = summary[key]
        if isinstance(value, dict):
            inner = ", ".join(f"{k}={_short(v)}" for k, v in value.items())
            stream.write(f"{key}: {inner}\n")
        elif isinstance(value, list):
            stream.write(f"{key}:\n")
            for item in value:
                stream.write(f"  {item}\n")
        else:
            stream.write(f"{key}: {_short(value)}\n")


def _short(value):
    if isinstance(value, float):
        return f"{value:.6g}"
    return value


def _parse_sweep(text):
    if "=" not in text:
        raise ConfigError(f"--sweep must look like section.key=v1,v2,..., got {text!r}")
    key, values = text.split("=", 1)
    values = [v.strip() for v in values.split(",") if v.strip()]
    if not values:
        raise ConfigError(f"--sweep {key} has no values")
    return key.strip(), values


def cmd_run(args) -> int:
    settings = _resolve(args)
    if not args.sweep:
        result = _run_one(args.command, settings, args.reference)
        _print_summary(result.summary, args.json)
        return 0
    key, values = _parse_sweep(args.sweep)
    base_out = settings["output"]["directory"]
    jobs = []
    for value in values:
        extra = [f"{key}={value}"]
        if base_out:
            extra.append(f"output.directory={Path(base_out) / f'{key}={value}'}")
        jobs.append((value, cfgmod.apply_overrides(settings, extra)))
    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        futures = [(v, pool.submit(_run_one, args.command, s, args.reference)) for v, s in jobs]
        results = {v: f.result().summary for v, f in futures}
    if not args.json:
        results = {v: {"status": s["status"], "steps_run": s["steps_run"]} for v, s in results.items()}
    _print_summary({f"{key}={v}": s for v, s in results.items()}, args.json)
    return 0


def cmd_modes(args) -> int:
    settings = _resolve(args)
    if args.two_d:
        params = cfgmod.build_params2d(settings)
        n_required, delta0, lam = mode_count_2d(params, settings["params2d"]["max_index"])
        report = {
            "delta0": delta0,
            "threshold": 1.0 / delta0,
            "n_required": n_required,
            "eigenvalues": [float(v) for v in lam[: max(args.count, n_required + 1)]],
        }
        if args.json:
            _print_summary(report, True)
            return 0
        print(f"delta0 = {delta0:.17g}    1/delta0 = {1 / delta0:.17g}")
        print(f"modes required N = {n_required}")
        print(f"{'k':>5} {'lambda_k':>22}  {'<= 1/delta0':>11}")
        for k, v in enumerate(report["eigenvalues"], start=1):
            print(f"{k:>5} {v:>22.17g}  {'yes' if v <= 1 / delta0 else 'no':>11}")
        return 0
    cfg = cfgmod.build_run_config(cfgmod.apply_overrides(settings, ["control.kind=none"]))
    state = initial_condition(cfg.initial, cfg.grid)
    plan = plan_zero_stabilization(state, cfg.grid, settings["control"]["epsilon"])
    eig = discrete_eigenvalues(cfg.grid)
    report = {
        "initial_norm2": plan.initial_norm2,
        "mu": plan.mu,
        "threshold": plan.threshold,
        "k_modes": plan.k_modes,
        "formula_k_modes": plan.formula_k_modes,
        "coverage_k_modes": plan.coverage_k_modes,
        "clamped": plan.clamped,
        "satisfied": plan.satisfied,
        "violations": [list(v) for v in plan.violations],
    }
    if args.json:
        _print_summary(report, True)
        return 0
    _print_summary(report, False)
    lo = max(0, plan.k_modes - args.count)
    print(f"{'j':>5} {'lambda_j':>22} {'included':>9}")
    for j in range(lo + 1, min(plan.k_modes + args.count, eig.shape[0]) + 1):
        print(f"{j:>5} {eig[j - 1]:>22.17g} {'yes' if j <= plan.k_modes else 'no':>9}")
    return 0


def cmd_eigen(args) -> int:
    settings = _resolve(args)
    p = settings["params"]
    grid = Grid1D.from_length(p["length"], settings["grid"]["n"], settings["grid"]["dt"])
    count = min(args.count, grid.n - 1)
    j = np.arange(1, count + 1)
    lam = discrete_eigenvalues(grid, count)
    w = sine_modes(grid, j)
    lap = laplacian(grid)
    resid = np.linalg.norm(np.column_stack([lap.matvec(w[:, c]) for c in range(count)]) - w * lam, axis=0)
    cont = continuum_eigenvalue(j, grid.length)
    rows = [
        {"j": int(a), "lambda": float(b), "continuum": float(c), "rel_diff": float((c - b) / c), "residual": float(d)}
        for a, b, c, d in zip(j, lam, cont, resid)
    ]
    if args.json:
        _print_summary({"n": grid.n, "dx": grid.dx, "modes": rows}, True)
        return 0
    print(f"n = {grid.n}, dx = {grid.dx:.17g}")
    print(f"{'j':>5} {'lambda_j':>22} {'(j pi/L)^2':>22} {'rel diff':>10} {'residual':>10}")
    for r in rows:
        print(f"{r['j']:>5} {r['lambda']:>22.17g} {r['continuum']:>22.17g} {r['rel_diff']:>10.3e} {r['residual']:>10.3e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chevron",
        description=__doc__.split("\n\n")[0],
        epilog="configuration keys (set in a file or with --set section.key=value):\n" + cfgmod.describe_keys(),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--log-level", default="WARNING", help="logging level (default WARNING)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="configuration file")
        p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a key (repeatable)")
        p.add_argument("--json", action="store_true", help="print machine-readable JSON")

    for name, text in (
        ("simulate", "free evolution"),
        ("stabilize", "drive the amplitude to zero with mode feedback"),
        ("track", "pull a run onto a free reference run"),
    ):
        p = sub.add_parser(name, help=text, epilog="keys:\n" + cfgmod.describe_keys(),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        common(p)
        p.add_argument("--out", help="output directory (no files written if omitted)")
        p.add_argument("--seed", type=int, help="seed of the oscillatory initial condition")
        p.add_argument("--solver", choices=["direct", "cg"])
        p.add_argument("--steps", type=int)
        p.add_argument("--sweep", metavar="SECTION.KEY=V1,V2,...", help="run once per value on worker threads")
        p.add_argument("--workers", type=int, default=None, help="threads for --sweep")
        if name == "track":
            p.add_argument("--reference", type=Path, help="config of the reference run; its final state is tracked")
        else:
            p.set_defaults(reference=None)
        p.set_defaults(func=cmd_run)

    p = sub.add_parser("modes", help="stabilization plan or 2D mode count")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--2d", dest="two_d", action="store_true", help="count modes for the planar system ([params2d])")
    p.add_argument("--count", type=int, default=5, help="table rows around the cutoff")
    p.set_defaults(func=cmd_modes)

    p = sub.add_parser("eigen", help="discrete Laplacian eigenpairs")
    common(p)
    p.add_argument("--count", type=int, default=10)
    p.set_defaults(func=cmd_eigen)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ChevronError as exc:
        print(f"chevron: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
