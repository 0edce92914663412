"""Command line entry point: ``tricontact <command>``."""
from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from . import backend, experiments, fa1f, report, verify, ychain
from .config import ConfigError, format_config, load_config, sweep_spec
from .lattice import DomainError, DynamicsParams, simulate as run_simulation
from .schedule import derive_seed, rng_from_seed


def _common(p: argparse.ArgumentParser, out: Optional[str] = "out") -> None:
    p.add_argument("--config", type=Path, help="flat key = value settings file")
    p.add_argument("--seed", type=int, help="master seed (overrides master_seed)")
    p.add_argument("--out", type=Path, default=None if out is None else Path(out),
                   help=f"output directory (default: {out or 'none'})")
    p.add_argument("--threads", type=int, default=1, help="worker processes (default: 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tricontact",
                                     description="Three-state non-attractive contact process laboratory.")
    parser.add_argument("--version", action="version", version=f"%(prog)s (kernel: {backend.NAME})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="one trajectory: event log and final snapshot")
    _common(p)
    p.add_argument("--q", type=float, help="overrides the first q of q_grid")
    p.add_argument("--horizon", type=float)
    p.add_argument("--radius", type=int)

    p = sub.add_parser("sweep", help="replica sweep over q; one CSV per observable plus summary")
    _common(p)
    p.add_argument("--from-cache", type=Path, help="re-emit the report of a cached sweep")

    p = sub.add_parser("ychain", help="exact auxiliary-chain table over a q grid")
    _common(p)
    p.add_argument("--grid", help="comma-separated q values (default: the reference grid)")

    p = sub.add_parser("verify", help="run a check suite; exit code 0 iff every check passes")
    _common(p, out=None)
    p.add_argument("suite", choices=sorted(verify.SUITES))
    p.add_argument("--scale", type=float, default=1.0, help="Monte Carlo size multiplier")

    p = sub.add_parser("fa1f", help="FA1f coupling and healthy-site distance experiments")
    _common(p)
    p.add_argument("--q", type=float, default=0.75)
    p.add_argument("--replicas", type=int, default=500)
    p.add_argument("--kappa", type=int, default=10)
    p.add_argument("--times", default="2,4,8,16")
    return parser


def _spec(args) -> experiments.SweepSpec:
    values = load_config(args.config) if args.config else {}
    spec = sweep_spec(values)
    if args.seed is not None:
        spec = replace(spec, master_seed=args.seed)
    return spec


def _slug(name: str) -> str:
    return re.sub(r"[^0-9a-z]+", "_", name.lower()).strip("_")


def cmd_simulate(args) -> int:
    spec = _spec(args)
    out = report.ensure_writable(args.out)
    q = args.q if args.q is not None else spec.q_grid[0]
    radius = args.radius or spec.window_radius
    horizon = args.horizon or spec.horizon
    seed = derive_seed(spec.master_seed, 0, 0)
    cfg = experiments.build_initial(radius, spec.initial, experiments.resolve_boundary(spec.boundary, q),
                                    rng_from_seed(derive_seed(seed, "initial")))
    traj = run_simulation(cfg, DynamicsParams(q, spec.variant), horizon, derive_seed(seed, "lattice"))
    traj.write_events(out / "events.csv")
    traj.write_snapshot(out / "snapshot.csv")
    ext = traj.extinction_time()
    print(traj.header())
    print(f"events={len(traj)} extinct={'no' if ext is None else f'yes t={ext:.12g}'}")
    return 0


def cmd_sweep(args) -> int:
    out = report.ensure_writable(args.out)
    if args.from_cache:
        res = report.load_cache(args.from_cache)
    else:
        spec = _spec(args)
        res = experiments.run_sweep(spec, threads=args.threads)
        report.save_cache(res, out / "sweep.json")
    with open(out / "config.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_config(res.spec))
    for p in report.emit_report(res, out):
        print(p)
    return 0


YCHAIN_COLUMNS = ("q", "a", "b", "theta1", "theta2", "theta3", "kappa", "drift")


def cmd_ychain(args) -> int:
    out = report.ensure_writable(args.out)
    grid = [float(v) for v in args.grid.split(",")] if args.grid else list(ychain.DEFAULT_GRID)
    rows = ychain.ychain_report_rows(grid)
    checks = [k for k in rows[0] if k not in YCHAIN_COLUMNS]
    header = list(YCHAIN_COLUMNS) + [_slug(c) for c in checks]
    body = [[r[c] for c in YCHAIN_COLUMNS] + ["pass" if r[c] else "fail" for c in checks] for r in rows]
    report.write_csv(out / "ychain.csv", header, body)
    failed = sum(1 for r in rows for c in checks if not r[c])
    print(out / "ychain.csv")
    print(f"{len(rows)} rows, {failed} failed checks")
    return 0 if failed == 0 else 1


def cmd_verify(args) -> int:
    out = report.ensure_writable(args.out) if args.out is not None else None
    seed = args.seed if args.seed is not None else 0
    checks = verify.run_suite(args.suite, args.scale, seed, args.threads)
    for c in checks:
        print(c.line())
    failed = [c.name for c in checks if not c.ok]
    print(f"suite {args.suite}: {'PASS' if not failed else 'FAIL'} "
          f"({len(checks) - len(failed)}/{len(checks)} checks)")
    print("failures: " + json.dumps(failed))
    if out is not None:
        with open(out / f"verify_{args.suite}.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump({"suite": args.suite, "checks": [c.__dict__ for c in checks], "failures": failed},
                      fh, indent=1)
            fh.write("\n")
    return 0 if not failed else 1


def cmd_fa1f(args) -> int:
    out = report.ensure_writable(args.out)
    seed = args.seed if args.seed is not None else 0
    q = args.q
    times = [float(t) for t in args.times.split(",")]
    curve = fa1f.xi_drift_experiment(fa1f.single_zero_config(args.kappa, max(40, 4 * args.kappa)), 0, q,
                                     times, args.replicas, derive_seed(seed, "xi"))
    report.write_csv(out / "xi_drift.csv", ["q", "t", "mean_xi", "se", "bound", "replicas"],
                     [[q, t, m, s, b, curve.replicas] for t, m, s, b in
                      zip(curve.times.tolist(), curve.mean.tolist(), curve.se.tolist(), curve.bound.tolist())])
    dens = fa1f.discrepancy_density(q, 500, max(times), max(10, args.replicas // 5),
                                    derive_seed(seed, "density"), times)
    report.write_csv(out / "discrepancy_density.csv", ["q", "t", "density", "se", "replicas"],
                     [[q, t, m, s, dens.replicas] for t, m, s in
                      zip(dens.times.tolist(), dens.mean.tolist(), dens.se.tolist())])
    t = max(times)
    w = fa1f.wald_check(q, t, max(1000, 10 * args.replicas), derive_seed(seed, "wald"))
    report.write_csv(out / "wald.csv", ["q", "t", "mean_displacement", "se", "expected", "position_changes",
                                        "up_moves", "count_mean", "count_var", "step_law_pvalue"],
                     [[q, t, w.mean_displacement, w.se, w.expected, w.n_changes, w.n_up,
                       w.count_mean, w.count_var, w.binom_pvalue]])
    for c in verify.xi_checks(curve) if curve.comparable else []:
        print(c.line())
    if not curve.comparable:
        print(f"q={q} <= 1/2: distance bound not applicable, comparison skipped")
    for c in verify.wald_checks(w):
        print(c.line())
    return 0


COMMANDS = {"simulate": cmd_simulate, "sweep": cmd_sweep, "ychain": cmd_ychain,
            "verify": cmd_verify, "fa1f": cmd_fa1f}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
