"""Seeded replica sweeps over q and the estimators they feed.

Every replica owns the stream ``derive_seed(master, q_index, replica)`` and
returns plain sufficient statistics; aggregation always walks replicas in
index order, so results do not depend on scheduling or worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import fa1f, tracker
from .lattice import (HEALTHY, INFECTED, PASSIVE, Boundary, Configuration, DomainError,
                      DynamicsParams, Variant, simulate)
from .schedule import derive_seed, rng_from_seed

OBSERVABLES = ("survival", "rightmostDrift", "intervalStats", "xiDrift", "discrepancyDensity")
INITIAL_KINDS = ("single", "block")
ENVIRONMENTS = ("periodic", "product", "passive")


# --- initial conditions -----------------------------------------------------

@dataclass(frozen=True)
class InitialSpec:
    """Infected seed at the origin inside a healthy/passive environment.

    ``periodic`` puts healthy sites at ``x = spacing // 2 (mod spacing)``, so
    every site is within ``spacing`` of a healthy one; ``product`` draws each
    site healthy with ``healthy_density``; ``passive`` has no healthy site.
    """

    kind: str = "single"
    block_radius: int = 0
    environment: str = "periodic"
    spacing: int = 8
    healthy_density: float = 0.5

    def __post_init__(self):
        if self.kind not in INITIAL_KINDS:
            raise DomainError(f"unknown initial kind {self.kind!r}")
        if self.environment not in ENVIRONMENTS:
            raise DomainError(f"unknown environment {self.environment!r}")
        if self.spacing < 1:
            raise DomainError("spacing must be positive")
        if not 0 <= self.healthy_density <= 1:
            raise DomainError("healthy_density must lie in [0, 1]")
        if self.block_radius < 0:
            raise DomainError("block_radius must be nonnegative")


def environment(radius: int, spec: InitialSpec, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    x = np.arange(-radius, radius + 1)
    states = np.full(len(x), PASSIVE, dtype=np.int8)
    if spec.environment == "periodic":
        states[(x % spec.spacing) == spec.spacing // 2] = HEALTHY
    elif spec.environment == "product":
        if rng is None:
            raise DomainError("a product environment needs a generator")
        states[rng.random(len(x)) < spec.healthy_density] = HEALTHY
    return states


def build_initial(radius: int, spec: InitialSpec, boundary: Boundary,
                  rng: Optional[np.random.Generator] = None) -> Configuration:
    states = environment(radius, spec, rng)
    half = 0 if spec.kind == "single" else spec.block_radius
    if half > radius:
        raise DomainError("infected block larger than the window")
    states[radius - half: radius + half + 1] = INFECTED
    return Configuration(-radius, states, boundary)


def resolve_boundary(policy: str, q: float) -> Boundary:
    """``auto``: frozen passive for ``q < 1/2`` (survival runs), frozen
    healthy otherwise (extinction runs), so the edge works against the
    expected outcome."""
    if policy == "auto":
        return Boundary.passive() if q < 0.5 else Boundary.healthy()
    return Boundary.parse(policy)


# --- sweep specification ----------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    q_grid: tuple[float, ...]
    window_radius: int = 200
    horizon: float = 100.0
    replicas: int = 200
    master_seed: int = 0
    boundary: str = "auto"
    variant: Variant = Variant.STANDARD
    observables: tuple[str, ...] = ("survival", "rightmostDrift")
    initial: InitialSpec = field(default_factory=InitialSpec)
    xi_kappa: int = 10
    xi_radius: int = 40
    fa1f_sites: int = 500

    def __post_init__(self):
        if not self.q_grid:
            raise DomainError("q grid is empty")
        for q in self.q_grid:
            if not 0 <= q <= 1:
                raise DomainError(f"q={q} outside [0, 1]")
        if self.replicas < 1:
            raise DomainError("replicas must be at least 1")
        if not self.horizon > 0:
            raise DomainError("horizon must be positive")
        if self.window_radius < 1:
            raise DomainError("window radius must be positive")
        bad = [o for o in self.observables if o not in OBSERVABLES]
        if bad:
            raise DomainError(f"unknown observables {bad}")
        if self.boundary != "auto":
            Boundary.parse(self.boundary)

    def xi_times(self) -> np.ndarray:
        return self.horizon * np.array([0.25, 0.5, 1.0])


# --- per-replica statistics -------------------------------------------------

@dataclass
class ReplicaStats:
    q_index: int
    replica: int
    failed: str = ""
    survived: bool = False
    displacement: int = 0
    alive_time: float = 0.0
    edge_reached: bool = False
    # interval lengths keyed by "prog|G" etc.; start-class membership is not exclusive
    intervals: dict = field(default_factory=dict)
    interval_censored: int = 0
    repeat_regress: tuple[int, int] = (0, 0)
    xi: Optional[np.ndarray] = None
    density: Optional[np.ndarray] = None


def _interval_lengths(stats: tracker.IntervalStats) -> dict:
    out = {}
    for kind, name in ((+1, "prog"), (-1, "regr")):
        for cls in ("G", "B"):
            out[f"{name}|{cls}"] = stats.lengths(kind, cls).astype(np.int64).tolist()
    return out


def run_replica(spec: SweepSpec, q_index: int, replica: int) -> ReplicaStats:
    q = spec.q_grid[q_index]
    seed = derive_seed(spec.master_seed, q_index, replica)
    out = ReplicaStats(q_index, replica)
    try:
        need_lattice = any(o in spec.observables for o in ("survival", "rightmostDrift", "intervalStats"))
        if need_lattice:
            rng = rng_from_seed(derive_seed(seed, "initial"))
            cfg = build_initial(spec.window_radius, spec.initial, resolve_boundary(spec.boundary, q), rng)
            traj = simulate(cfg, DynamicsParams(q, spec.variant), spec.horizon, derive_seed(seed, "lattice"))
            lc = tracker.level_changes(traj)
            out.survived = traj.extinction_time() is None
            out.displacement, out.alive_time = tracker.displacement(traj)
            out.edge_reached = bool(lc.initial_truncated or np.any(lc.truncated))
            if "intervalStats" in spec.observables:
                st = tracker.interval_decomposition(lc)
                out.intervals = _interval_lengths(st)
                out.interval_censored = sum(1 for iv in st.intervals if iv.censored)
                out.repeat_regress = tracker.repeat_regress_counts(lc)
        if "xiDrift" in spec.observables:
            cfg = fa1f.single_zero_config(spec.xi_kappa, spec.xi_radius).to_lattice()
            t = spec.xi_times()
            traj = simulate(cfg, DynamicsParams(q), float(t.max()), derive_seed(seed, "xi"))
            out.xi = np.array([fa1f.dist_to_healthy(traj.snapshot(s), 0) for s in t])
        if "discrepancyDensity" in spec.observables:
            rng = rng_from_seed(derive_seed(seed, "fa1f-initial"))
            a = fa1f.sample_product_measure(0, spec.fa1f_sites, q, rng)
            b = fa1f.sample_product_measure(0, spec.fa1f_sites, q, rng)
            run = fa1f.couple_two_copies(a, b, q, spec.horizon, derive_seed(seed, "fa1f"))
            counts = run.discrepancy_counts()
            k = np.searchsorted(run.eta.times, spec.xi_times(), side="right")
            out.density = counts[k] / spec.fa1f_sites
    except MemoryError as exc:  # reported per replica, the sweep goes on
        out = ReplicaStats(q_index, replica, failed=f"MemoryError: {exc}")
    return out


def _run_chunk(args) -> list[ReplicaStats]:
    spec, tasks = args
    return [run_replica(spec, qi, r) for qi, r in tasks]


# --- aggregation ------------------------------------------------------------

@dataclass
class Estimate:
    value: float
    se: float
    n: int


def _mean(values: Sequence[float]) -> Estimate:
    m, s, n = tracker.mean_se(np.asarray(values, dtype=float))
    return Estimate(m, s, n)


def _proportion(k: int, n: int) -> Estimate:
    if n == 0:
        return Estimate(math.nan, math.nan, 0)
    p = k / n
    return Estimate(p, math.sqrt(p * (1 - p) / n), n)


@dataclass
class QResult:
    q: float
    replicas: int
    failed: int
    survival: Optional[Estimate] = None
    slope: Optional[Estimate] = None
    edge_reached: int = 0
    intervals: dict = field(default_factory=dict)
    interval_censored: int = 0
    repeat_regress: Optional[Estimate] = None
    xi: Optional[list[Estimate]] = None
    density: Optional[list[Estimate]] = None


@dataclass
class SweepResult:
    spec: SweepSpec
    rows: list[QResult]
    failures: list[tuple[int, int, str]]


def aggregate(spec: SweepSpec, reps: list[ReplicaStats]) -> SweepResult:
    reps = sorted(reps, key=lambda r: (r.q_index, r.replica))
    rows, failures = [], []
    for qi, q in enumerate(spec.q_grid):
        mine = [r for r in reps if r.q_index == qi]
        for r in mine:
            if r.failed:
                failures.append((qi, r.replica, r.failed))
        ok = [r for r in mine if not r.failed]
        row = QResult(q, len(ok), len(mine) - len(ok))
        obs = spec.observables
        if "survival" in obs:
            row.survival = _proportion(sum(r.survived for r in ok), len(ok))
        if "rightmostDrift" in obs:
            s, se = tracker.ratio_slope([r.displacement for r in ok], [r.alive_time for r in ok])
            row.slope = Estimate(s, se, len(ok))
        if any(o in obs for o in ("survival", "rightmostDrift", "intervalStats")):
            row.edge_reached = sum(r.edge_reached for r in ok)
        if "intervalStats" in obs:
            for key in ("prog|G", "prog|B", "regr|G", "regr|B"):
                row.intervals[key] = _mean([v for r in ok for v in r.intervals.get(key, [])])
            row.interval_censored = sum(r.interval_censored for r in ok)
            num = sum(r.repeat_regress[0] for r in ok)
            den = sum(r.repeat_regress[1] for r in ok)
            row.repeat_regress = _proportion(num, den)
        if "xiDrift" in obs:
            vals = np.array([r.xi for r in ok])
            row.xi = [_mean(vals[:, j]) for j in range(vals.shape[1])] if len(ok) else []
        if "discrepancyDensity" in obs:
            vals = np.array([r.density for r in ok])
            row.density = [_mean(vals[:, j]) for j in range(vals.shape[1])] if len(ok) else []
        rows.append(row)
    return SweepResult(spec, rows, failures)


def run_sweep(spec: SweepSpec, threads: int = 1, chunk: int = 16) -> SweepResult:
    """Run every (q, replica) task; ``threads > 1`` uses a process pool."""
    tasks = [(qi, r) for qi in range(len(spec.q_grid)) for r in range(spec.replicas)]
    if threads <= 1:
        reps = [run_replica(spec, qi, r) for qi, r in tasks]
    else:
        chunks = [tasks[i:i + chunk] for i in range(0, len(tasks), chunk)]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            reps = [r for part in pool.map(_run_chunk, [(spec, c) for c in chunks]) for r in part]
    return aggregate(spec, reps)


# --- dedicated experiments --------------------------------------------------

@dataclass
class ProgressComparison:
    q: float
    estimates: dict  # boundary bit -> tracker.ProgressEstimate
    replicas: int
    censored: int


def progress_comparison(q: float, master_seed: int, min_windows: int = 10_000,
                        radius: int = 60, horizon: float = 300.0, cutoff: float = 100.0,
                        healthy_density: float = 0.6, batch: int = 500,
                        max_replicas: int = 200_000) -> ProgressComparison:
    """Empirical X progress against the exact Y prediction, per boundary bit.

    Replicas start from three infected sites in an i.i.d. healthy/passive
    environment and are added in batches until both boundary bits have
    ``min_windows`` qualifying stretches (or ``max_replicas`` is hit).
    """
    theta = tracker.y_progress_table(q)
    init = InitialSpec("block", 1, "product", healthy_density=healthy_density)
    parts = []
    done = 0
    while True:
        for r in range(done, done + batch):
            rng = rng_from_seed(derive_seed(master_seed, "progress-initial", r))
            cfg = build_initial(radius, init, Boundary.passive(), rng)
            traj = simulate(cfg, DynamicsParams(q), horizon, derive_seed(master_seed, "progress", r))
            parts.append(tracker.episodes(traj, start_before=cutoff))
        done += batch
        eps = _concat(parts)
        counts = [int(np.sum(eps.valid & ((eps.start_code & 1) == b))) for b in (0, 1)]
        if min(counts) >= min_windows or done >= max_replicas:
            break
    est = {b: tracker.progress_probability(eps, q, b, min_samples=min_windows, theta=theta) for b in (0, 1)}
    return ProgressComparison(q, est, done, eps.censored)


def _concat(parts: list) -> tracker.Episodes:
    out = tracker.Episodes.empty()
    if not parts:
        return out
    return tracker.Episodes(np.concatenate([p.start_code for p in parts]),
                            np.concatenate([p.start_time for p in parts]),
                            np.concatenate([p.outcome for p in parts]),
                            np.concatenate([p.valid for p in parts]),
                            sum(p.censored for p in parts))
