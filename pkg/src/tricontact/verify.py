"""Check suites behind ``tricontact verify``.

Each suite returns a list of :class:`Check`; a suite passes iff every check
does.  ``scale`` multiplies Monte Carlo sample sizes (1.0 is the default
verification size; the acceptance tests call the underlying functions with
their own sizes).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from . import experiments, fa1f, tracker, ychain
from .lattice import (INFECTED, NO_SITE, Boundary, Configuration, DynamicsParams, Trajectory, Variant,
                      pairwise_relation_holds, run_coupled_pair, run_shared, set_site, simulate,
                      state_matrix)
from .schedule import derive_seed, rng_from_seed


@dataclass
class Check:
    name: str
    ok: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.ok else 'FAIL'} {self.name}" + (f": {self.detail}" if self.detail else "")


def _f(x) -> str:
    return "%.6g" % float(x)


# --- random configurations for fuzzing --------------------------------------

def random_omega_star(rng: np.random.Generator, max_radius: int = 30) -> Configuration:
    """Random window with a nonempty infected interval and a random boundary."""
    radius = int(rng.integers(3, max_radius + 1))
    n = 2 * radius + 1
    states = rng.integers(0, 2, n).astype(np.int8)
    a = int(rng.integers(0, n))
    b = int(min(n - 1, a + rng.integers(0, 6)))
    states[a:b + 1] = INFECTED
    boundary = [Boundary.healthy(), Boundary.passive(), Boundary(0, 1), Boundary(1, 0)][int(rng.integers(4))]
    return Configuration(-radius, states, boundary)


def _random_case(master: int, i: int, q_range=(0.0, 1.0)):
    rng = rng_from_seed(derive_seed(master, "fuzz", i))
    cfg = random_omega_star(rng)
    q = float(rng.uniform(*q_range))
    horizon = float(rng.uniform(2.0, 20.0))
    return rng, cfg, q, horizon, derive_seed(master, "fuzz-run", i)


# --- lattice invariants -----------------------------------------------------

@dataclass
class FuzzOutcome:
    trials: int
    violations: int
    first: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.violations == 0


def _fuzz(trials: int, master: int, one: Callable[[int], Optional[str]]) -> FuzzOutcome:
    bad, first = 0, None
    for i in range(trials):
        msg = one(i)
        if msg is not None:
            bad += 1
            first = first or msg
    return FuzzOutcome(trials, bad, first)


def connectivity_fuzz(trials: int = 1000, master: int = 1) -> FuzzOutcome:
    """Infected hull fully infected at every event time (Standard rules)."""
    def one(i):
        _, cfg, q, h, seed = _random_case(master, i)
        tr = simulate(cfg, DynamicsParams(q), h, seed)
        alive = tr.right_idx != NO_SITE
        hull = tr.right_idx - tr.left_idx + 1
        bad = np.flatnonzero(alive & (hull != tr.n_infected))
        if bad.size:
            return f"case {i}: disconnected at t={tr.times[bad[0]]:.6g}"
        return None
    return _fuzz(trials, master, one)


def trap_fuzz(trials: int = 200, master: int = 2) -> FuzzOutcome:
    """At q = 0 every (passive, healthy, passive) triple present at time 0 persists."""
    def one(i):
        _, cfg, _, h, seed = _random_case(master, i)
        tr = simulate(cfg, DynamicsParams(0.0), h, seed)
        m = state_matrix(tr)
        s = m[0]
        triples = np.flatnonzero((s[:-2] == 1) & (s[1:-1] == 0) & (s[2:] == 1))
        for j in triples:
            if not np.all((m[:, j] == 1) & (m[:, j + 1] == 0) & (m[:, j + 2] == 1)):
                return f"case {i}: triple at {cfg.left + j + 1} broke"
        return None
    return _fuzz(trials, master, one)


def monotone_coupling_fuzz(trials: int = 1000, master: int = 3) -> FuzzOutcome:
    """``eta^{x,2}`` against ``eta^{x,1}`` under shared clocks and draws."""
    def one(i):
        rng, cfg, q, h, seed = _random_case(master, i)
        x = cfg.left + int(rng.integers(len(cfg)))
        t1, t2 = run_coupled_pair(set_site(cfg, x, INFECTED), set_site(cfg, x, 1), DynamicsParams(q), h, seed)
        ok, where = pairwise_relation_holds(t1, t2)
        return None if ok else f"case {i}: x={x} q={q:.6g} violated at {where}"
    return _fuzz(trials, master, one)


def variant_domination_fuzz(trials: int = 1000, master: int = 4) -> FuzzOutcome:
    """Greedy infected set contains the Standard one at every event time."""
    def one(i):
        _, cfg, q, h, seed = _random_case(master, i)
        std = simulate(cfg, DynamicsParams(q), h, seed)
        gr = run_shared(cfg, DynamicsParams(q, Variant.GREEDY), std)
        bad = np.flatnonzero((std.new_states == INFECTED) & (gr.new_states != INFECTED))
        if bad.size:
            k = int(bad[0])
            return f"case {i}: site {cfg.left + int(std.sites[k])} at t={std.times[k]:.6g}"
        return None
    return _fuzz(trials, master, one)


def fa1f_domination_fuzz(trials: int = 500, qs=(0.7, 0.9), master: int = 5,
                         n_sites: int = 60, horizon: float = 30.0) -> FuzzOutcome:
    """4-state discrepancies inside the 3-state infection, product-measure copies."""
    def one(i):
        q = qs[i % len(qs)]
        rng = rng_from_seed(derive_seed(master, "fa1f-fuzz", i))
        a = fa1f.sample_product_measure(0, n_sites, q, rng)
        b = fa1f.sample_product_measure(0, n_sites, q, rng)
        res = fa1f.domination_check(a, b, q, horizon, derive_seed(master, "fa1f-fuzz-run", i))
        return None if res.ok else f"case {i}: q={q} at {res.violation}"
    return _fuzz(trials * len(qs), master, one)


def infection_contained(t1: Trajectory, t2: Trajectory) -> tuple[bool, Optional[tuple[float, int]]]:
    """Infected set of ``t2`` inside that of ``t1`` at every event time."""
    bad0 = np.flatnonzero((t2.initial.states == INFECTED) & (t1.initial.states != INFECTED))
    if bad0.size:
        return False, (0.0, int(bad0[0]) + t1.initial.left)
    bad = np.flatnonzero((t2.new_states == INFECTED) & (t1.new_states != INFECTED))
    if bad.size:
        k = int(bad[0])
        return False, (float(t1.times[k]), int(t1.sites[k]) + t1.initial.left)
    return True, None


def monotone_counterexample(master: int = 6, limit: int = 5000, q: float = 0.5) -> Optional[str]:
    """Search for a run where ``eta^{x,1}`` ends up with less infection than
    ``eta^{x,0}`` somewhere (passive in place of healthy is not monotone)."""
    for i in range(limit):
        rng, cfg, _, h, seed = _random_case(master, i)
        x = cfg.left + int(rng.integers(len(cfg)))
        if cfg[x] == INFECTED:
            continue
        t1, t2 = run_coupled_pair(set_site(cfg, x, 1), set_site(cfg, x, 0), DynamicsParams(q), h, seed)
        ok, where = infection_contained(t1, t2)
        if not ok:
            return f"case {i}: x={x} at {where}"
    return None


def _fuzz_check(name: str, out: FuzzOutcome) -> Check:
    detail = f"{out.violations} violations in {out.trials}"
    if out.first:
        detail += f" (first: {out.first})"
    return Check(name, out.ok, detail)


# --- suites -----------------------------------------------------------------

def suite_ychain(grid=ychain.DEFAULT_GRID, drift_mc: int = 0, seed: int = 0) -> list[Check]:
    """Exact identities of the auxiliary chain on ``grid``."""
    checks = []
    for q in grid:
        kernel = ychain.build_y_kernel(q, validate=False)
        for name, ok in ychain._check_identities(kernel).items():
            checks.append(Check(f"{name} q={q}", bool(ok)))
        if q <= 0.05:
            d = ychain.two_level_drift(kernel)
            for start, res in d.items():
                checks.append(Check(f"two-level drift positive from {start} q={q}",
                                    res.drift > 0, _f(res.drift)))
                if drift_mc:
                    mc = ychain.two_level_drift(kernel, "montecarlo", drift_mc,
                                                rng_from_seed(derive_seed(seed, "drift", str(q), *start)),
                                                starts=[start])[start]
                    z = (mc.drift - res.drift) / mc.se
                    checks.append(Check(f"two-level drift Monte Carlo agrees from {start} q={q}",
                                        abs(z) <= 3, f"{_f(mc.drift)} vs {_f(res.drift)} (z={_f(z)})"))
    t3 = ychain.first_passage_exact(ychain.build_y_kernel(0.001)).thetas[2]
    checks.append(Check("theta3 q=0.001 in (0.499, 0.5)", Fraction(499, 1000) < t3 < Fraction(1, 2), _f(t3)))
    checks.append(Check("theta3 q=0.001 below 4/7", t3 < Fraction(4, 7), _f(t3)))
    checks.append(healthy_identity_check())
    return checks


def healthy_identity_check(points: int = 100) -> Check:
    worst = 0.0
    for q in np.linspace(0.0, 1.0, points + 2)[1:-1]:
        lhs, rhs = ychain.healthy_boundary_identity(float(q))
        worst = max(worst, abs(lhs - rhs))
    return Check(f"healthy-boundary extra-path identity on {points} points", worst <= 1e-12,
                 f"max error {worst:.3g}")


def progress_checks(comp: experiments.ProgressComparison, min_windows: int) -> list[Check]:
    out = []
    for bit, est in comp.estimates.items():
        label = "passive" if bit else "healthy"
        enough = est.n >= min_windows
        out.append(Check(f"X progress at least Y progress, {label} boundary q={comp.q}",
                         enough and est.progress >= est.reference - 3 * est.se,
                         f"{_f(est.progress)} vs {_f(est.reference)} -3se={_f(est.reference - 3 * est.se)} "
                         f"n={est.n} censored={comp.censored}"))
    return out


def structural_checks(q: float, replicas: int, seed: int, horizon: float = 200.0) -> list[Check]:
    """Post-step classes, z5 constancy in stable windows and window tiling."""
    g_bad = b_bad = z5_bad = tile_bad = 0
    steps = 0
    init = experiments.InitialSpec("block", 2, "product", healthy_density=0.5)
    for r in range(replicas):
        rng = rng_from_seed(derive_seed(seed, "structure-initial", r))
        cfg = experiments.build_initial(40, init, Boundary.passive(), rng)
        tr = simulate(cfg, DynamicsParams(q), horizon, derive_seed(seed, "structure", r))
        lc = tracker.level_changes(tr)
        ok = (lc.code >= 0) & ~lc.truncated
        steps += int(ok.sum())
        g_bad += int(np.sum(ok & (lc.sign == -1) & ~tracker.in_good(lc.code)))
        b_bad += int(np.sum(ok & (lc.sign == 1) & ~tracker.in_progressed(lc.code)))
        wins = tracker.stable_windows(tr)
        end = tr.extinction_time() or tr.horizon
        if wins and (wins[0].start != 0.0 or wins[-1].end != end
                     or any(w1.end != w2.start for w1, w2 in zip(wins, wins[1:]))):
            tile_bad += 1
        for w in wins:
            lo = tr.n_events_until(w.start)
            hi = tr.n_events_until(w.end, after=False)
            codes = tr.phi_code[lo:hi]
            codes = codes[codes >= 0]
            if codes.size and np.any((codes & 1) != (w.initial_state.code & 1)):
                z5_bad += 1
    return [
        Check(f"regress lands in G q={q}", g_bad == 0, f"{g_bad} of {steps} steps"),
        Check(f"progress lands in B q={q}", b_bad == 0, f"{b_bad} of {steps} steps"),
        Check(f"boundary bit constant inside stable windows q={q}", z5_bad == 0, f"{z5_bad} windows"),
        Check(f"stable windows tile the run q={q}", tile_bad == 0, f"{tile_bad} runs"),
    ]


def suite_coupling(scale: float = 1.0, seed: int = 0) -> list[Check]:
    n = max(200, int(2000 * scale))
    comp = experiments.progress_comparison(0.02, derive_seed(seed, "coupling"), min_windows=n)
    out = progress_checks(comp, n)
    for q in (0.02, 0.2, 0.6):
        out += structural_checks(q, max(10, int(50 * scale)), derive_seed(seed, "structure", str(q)))
    return out


@dataclass
class LargeQ:
    q: float
    prog_g: experiments.Estimate
    regr_b: experiments.Estimate
    prog_b: experiments.Estimate
    regr_g: experiments.Estimate
    repeat: experiments.Estimate
    alpha: float


def large_q_statistics(q: float = 0.9, replicas: int = 200, radius: int = 200, horizon: float = 300.0,
                       block_radius: int = 50, seed: int = 0, threads: int = 1) -> LargeQ:
    """Interval statistics from a melting infected block in a periodic environment."""
    spec = experiments.SweepSpec(
        (q,), window_radius=radius, horizon=horizon, replicas=replicas, master_seed=seed,
        boundary="FrozenHealthy", observables=("intervalStats",),
        initial=experiments.InitialSpec("block", block_radius, "periodic", spacing=8))
    row = experiments.run_sweep(spec, threads=threads).rows[0]
    iv = row.intervals
    return LargeQ(q, iv["prog|G"], iv["regr|B"], iv["prog|B"], iv["regr|G"], row.repeat_regress,
                  tracker.alpha_formula(q))


def large_q_checks(s: LargeQ) -> list[Check]:
    sep = math.hypot(s.regr_b.se, s.prog_g.se)
    return [
        Check(f"regressive run after progress outlasts progressive run after regress q={s.q}",
              s.regr_b.n > 1 and s.prog_g.n > 1 and s.regr_b.value - s.prog_g.value > 3 * sep,
              f"regr|B {_f(s.regr_b.value)}+-{_f(s.regr_b.se)} (n={s.regr_b.n}) vs prog|G "
              f"{_f(s.prog_g.value)}+-{_f(s.prog_g.se)} (n={s.prog_g.n}); other conditioning: regr|G "
              f"{_f(s.regr_g.value)}, prog|B {_f(s.prog_b.value)}"),
        Check(f"repeat regress at least alpha q={s.q}", s.repeat.n > 0 and s.repeat.value >= s.alpha - 3 * s.repeat.se,
              f"{_f(s.repeat.value)}+-{_f(s.repeat.se)} vs alpha {_f(s.alpha)} (n={s.repeat.n})"),
    ]


def suite_largeq(scale: float = 1.0, seed: int = 0, threads: int = 1) -> list[Check]:
    s = large_q_statistics(replicas=max(20, int(200 * scale)), seed=seed, threads=threads)
    return large_q_checks(s)


def xi_checks(curve: fa1f.XiCurve) -> list[Check]:
    out = []
    passes = curve.passes()
    for j, t in enumerate(curve.times):
        b = float(curve.bound[j])
        out.append(Check(f"healthy-site distance bound q={curve.q} t={_f(t)}", bool(passes[j]),
                         f"mean {_f(curve.mean[j])}+-{_f(curve.se[j])} vs {_f(b)} (n={curve.replicas})"))
    return out


def wald_checks(w: fa1f.WaldCheck) -> list[Check]:
    return [
        Check(f"simplified walk mean displacement q={w.q} t={_f(w.t)}", w.wald_ok,
              f"{_f(w.mean_displacement)}+-{_f(w.se)} vs {_f(w.expected)}"),
        Check(f"simplified walk step law q={w.q}", w.step_law_ok,
              f"{w.n_up}/{w.n_changes} up, p={_f(w.binom_pvalue)}"),
        Check(f"simplified walk change count Poisson mean q={w.q}",
              w.count_ok,
              f"mean {_f(w.count_mean)} var {_f(w.count_var)} vs {_f(w.t)}"),
    ]


def suite_fa1f(scale: float = 1.0, seed: int = 0) -> list[Check]:
    out = []
    curve = fa1f.xi_drift_experiment(fa1f.single_zero_config(10, 40), 0, 0.75, [2, 4, 8, 16],
                                     max(100, int(2000 * scale)), derive_seed(seed, "xi"))
    out += xi_checks(curve)
    out += wald_checks(fa1f.wald_check(0.75, 20.0, max(1000, int(10_000 * scale)), derive_seed(seed, "wald")))
    bad = 0
    n = max(50, int(300 * scale))
    for r in range(n):
        bad += not fa1f.walk_domination(10, 0.75, 16.0, derive_seed(seed, "walk", r), 40).ok
    out.append(Check("simplified walk dominates the distance until it reaches x q=0.75", bad == 0,
                     f"{bad} violations in {n}"))
    out.append(_fuzz_check("discrepancies inside the three-state infection",
                           fa1f_domination_fuzz(max(20, int(100 * scale)), master=derive_seed(seed, "dom"))))
    dens = fa1f.discrepancy_density(0.9, 500, 200.0, max(10, int(100 * scale)), derive_seed(seed, "density"))
    out.append(Check("discrepancy density at horizon below 0.01 q=0.9", float(dens.mean[-1]) < 0.01,
                     f"{_f(dens.mean[-1])} over {dens.replicas} pairs"))
    for q in (0.3, 0.7):
        occ = fa1f.occupation_check(q, 100_000.0 * max(scale, 0.1), derive_seed(seed, "occupation", str(q)))
        out.append(Check(f"3-site occupation matches product measure q={q}", occ.ok,
                         f"max |z| {_f(np.max(np.abs(occ.z)))}"))
    return out


def suite_invariants(scale: float = 1.0, seed: int = 0) -> list[Check]:
    n = max(50, int(1000 * scale))
    out = [
        _fuzz_check("infected cluster stays connected", connectivity_fuzz(n, derive_seed(seed, "conn"))),
        _fuzz_check("q=0 trap persists", trap_fuzz(max(20, n // 5), derive_seed(seed, "trap"))),
        _fuzz_check("extra infection keeps the pair ordered", monotone_coupling_fuzz(n, derive_seed(seed, "mono"))),
        _fuzz_check("greedy infection contains standard infection",
                    variant_domination_fuzz(n, derive_seed(seed, "greedy"))),
    ]
    cx = monotone_counterexample(derive_seed(seed, "counter"))
    out.append(Check("passive in place of healthy can lose infection", cx is not None, cx or "none found"))
    return out


SUITES = {
    "ychain": lambda scale, seed, threads: suite_ychain(),
    "coupling": lambda scale, seed, threads: suite_coupling(scale, seed),
    "largeq": lambda scale, seed, threads: suite_largeq(scale, seed, threads),
    "fa1f": lambda scale, seed, threads: suite_fa1f(scale, seed),
    "invariants": lambda scale, seed, threads: suite_invariants(scale, seed),
}


def run_suite(name: str, scale: float = 1.0, seed: int = 0, threads: int = 1) -> list[Check]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name](scale, seed, threads)
