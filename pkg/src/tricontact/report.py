"""CSV and summary emission for sweeps.

CSV files are comma-separated with a header row, 12 significant digits and
LF line endings; column order is fixed per observable.  A sweep can be
cached as JSON and re-emitted byte for byte.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import asdict
from pathlib import Path
from typing import Iterable, Sequence, Union

from .config import format_config, parse_config, sweep_spec
from .experiments import Estimate, QResult, SweepResult, resolve_boundary
from .fa1f import xi_bound
from .tracker import alpha_formula

PathLike = Union[str, os.PathLike]

SURVIVAL_NOTE = ("survival means: infected set nonempty at the horizon on the finite window "
                 "(the infinite-time event on Z is not observable)")


def fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return "%.12g" % v
    return str(v)


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def ensure_writable(out: PathLike) -> Path:
    """Create ``out`` and prove it accepts files, before any computation."""
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    fd, probe = tempfile.mkstemp(dir=path, prefix=".probe-")
    os.close(fd)
    os.unlink(probe)
    return path


# --- per-observable tables --------------------------------------------------

def _est(e: Estimate) -> list:
    return [e.value, e.se, e.n]


def survival_rows(res: SweepResult):
    s = res.spec
    for r in res.rows:
        b = resolve_boundary(s.boundary, r.q).name
        yield [r.q, r.survival.value, r.survival.se, r.replicas, r.failed, r.edge_reached,
               s.window_radius, s.horizon, b]


def drift_rows(res: SweepResult):
    for r in res.rows:
        yield [r.q, r.slope.value, r.slope.se, r.replicas, r.edge_reached]


INTERVAL_KEYS = ("prog|G", "prog|B", "regr|G", "regr|B")


def interval_rows(res: SweepResult):
    for r in res.rows:
        row = [r.q]
        for k in INTERVAL_KEYS:
            row += _est(r.intervals[k])
        alpha = alpha_formula(r.q) if 0 < r.q < 1 else math.nan
        yield row + _est(r.repeat_regress) + [alpha, r.interval_censored]


def xi_rows(res: SweepResult):
    t = res.spec.xi_times()
    for r in res.rows:
        for j, e in enumerate(r.xi):
            yield [r.q, float(t[j]), e.value, e.se, float(xi_bound(res.spec.xi_kappa, t[j], r.q)), e.n]


def density_rows(res: SweepResult):
    t = res.spec.xi_times()
    for r in res.rows:
        for j, e in enumerate(r.density):
            yield [r.q, float(t[j]), e.value, e.se, e.n]


_interval_header = ["q"] + [f"{k.replace('|', '_')}_{c}" for k in INTERVAL_KEYS for c in ("mean", "se", "n")]

TABLES = {
    "survival": (["q", "survival", "se", "replicas", "failed", "edge_reached", "window_radius",
                  "horizon", "boundary"], survival_rows),
    "rightmostDrift": (["q", "slope", "se", "replicas", "edge_reached"], drift_rows),
    "intervalStats": (_interval_header + ["repeat_regress", "repeat_regress_se", "repeat_regress_n",
                                          "alpha", "censored"], interval_rows),
    "xiDrift": (["q", "t", "mean_xi", "se", "bound", "replicas"], xi_rows),
    "discrepancyDensity": (["q", "t", "density", "se", "replicas"], density_rows),
}


# --- checks listed in the summary -------------------------------------------

def sweep_checks(res: SweepResult) -> list[tuple[str, bool, str]]:
    """Large-q and healthy-site checks that apply to the swept values."""
    out = []
    obs = res.spec.observables
    t = res.spec.xi_times()
    for r in res.rows:
        if "intervalStats" in obs and 0.5 < r.q < 1:
            p, g = r.intervals["regr|B"], r.intervals["prog|G"]
            sep = math.hypot(p.se, g.se)
            ok = p.n > 1 and g.n > 1 and p.value - g.value > 3 * sep
            out.append((f"regressive run after progress outlasts progressive run after regress q={fmt(r.q)}",
                        bool(ok), f"{fmt(p.value)} vs {fmt(g.value)} (3 sigma = {fmt(3 * sep)})"))
            a = alpha_formula(r.q)
            rr = r.repeat_regress
            ok = rr.n > 0 and rr.value >= a - 3 * rr.se
            out.append((f"repeat regress at least alpha q={fmt(r.q)}", bool(ok),
                        f"{fmt(rr.value)} vs alpha {fmt(a)} (n={rr.n})"))
        if "xiDrift" in obs and r.q > 0.5:
            for j, e in enumerate(r.xi):
                b = float(xi_bound(res.spec.xi_kappa, t[j], r.q))
                ok = e.value <= b + 3 * (0.0 if math.isnan(e.se) else e.se)
                out.append((f"healthy-site distance bound q={fmt(r.q)} t={fmt(float(t[j]))}", bool(ok),
                            f"{fmt(e.value)} vs {fmt(b)}"))
    return out


def summary_text(res: SweepResult) -> str:
    s = res.spec
    lines = ["# sweep summary", f"window=[{-s.window_radius},{s.window_radius}] horizon={fmt(s.horizon)} "
             f"replicas={s.replicas} master_seed={s.master_seed} boundary={s.boundary} "
             f"variant={s.variant.value}", f"initial={s.initial.kind} environment={s.initial.environment} "
             f"spacing={s.initial.spacing} block_radius={s.initial.block_radius}",
             f"observables={','.join(s.observables) or '(none)'}"]
    if "survival" in s.observables:
        lines.append(SURVIVAL_NOTE)
    for r in res.rows:
        parts = [f"q={fmt(r.q)}", f"replicas={r.replicas}", f"failed={r.failed}"]
        if r.survival is not None:
            parts.append(f"survival={fmt(r.survival.value)}+-{fmt(r.survival.se)}")
        if r.slope is not None:
            parts.append(f"slope={fmt(r.slope.value)}+-{fmt(r.slope.se)}")
        lines.append(" ".join(parts))
    checks = sweep_checks(res)
    lines.append(f"checks: {len(checks)}")
    for name, ok, detail in checks:
        lines.append(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    for qi, rep, msg in res.failures:
        lines.append(f"replica failed q_index={qi} replica={rep}: {msg}")
    return "\n".join(lines) + "\n"


def emit_report(res: SweepResult, out: PathLike) -> list[Path]:
    """Write one CSV per observable plus ``summary.txt``; returns the paths."""
    path = ensure_writable(out)
    written = []
    for name in res.spec.observables:
        header, rows = TABLES[name]
        p = path / f"{name}.csv"
        write_csv(p, header, rows(res))
        written.append(p)
    p = path / "summary.txt"
    with open(p, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(summary_text(res))
    written.append(p)
    return written


# --- cache ------------------------------------------------------------------

def save_cache(res: SweepResult, path: PathLike) -> None:
    data = {"config": format_config(res.spec), "rows": [asdict(r) for r in res.rows],
            "failures": [list(f) for f in res.failures]}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(data, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _estimate(d):
    return None if d is None else Estimate(**d)


def load_cache(path: PathLike) -> SweepResult:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    spec = sweep_spec(parse_config(data["config"]))
    rows = []
    for d in data["rows"]:
        rows.append(QResult(
            d["q"], d["replicas"], d["failed"], _estimate(d["survival"]), _estimate(d["slope"]),
            d["edge_reached"], {k: Estimate(**v) for k, v in d["intervals"].items()},
            d["interval_censored"], _estimate(d["repeat_regress"]),
            None if d["xi"] is None else [Estimate(**e) for e in d["xi"]],
            None if d["density"] is None else [Estimate(**e) for e in d["density"]]))
    return SweepResult(spec, rows, [tuple(f) for f in data["failures"]])
