"""FA1f dynamics, the two-copy coupling and the healthy-site attraction walk.

On configurations without infected sites the three-state rules reduce to
the one-spin-facilitated Fredrickson-Andersen model: a site with a healthy
neighbour resamples to healthy with probability ``q`` and to passive
otherwise.  Everything here therefore runs on the lattice event kernel, and
coupled copies share its ring schedule.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .lattice import (HEALTHY, INFECTED, PASSIVE, Boundary, Configuration, DomainError,
                      DynamicsParams, Trajectory, dist_to_healthy, run_shared, simulate)
from .schedule import derive_seed, rng_from_seed


# --- configurations ---------------------------------------------------------

@dataclass(eq=False)
class FA1fConfig:
    """Binary configuration on ``[left, left + n)`` with frozen boundary bits."""

    left: int
    bits: np.ndarray
    boundary: Boundary = field(default_factory=Boundary.healthy)

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.int8)
        if self.bits.ndim != 1:
            raise DomainError("bits must be one-dimensional")
        if np.any((self.bits != 0) & (self.bits != 1)):
            raise DomainError("FA1f configurations are binary")
        if self.boundary.left == INFECTED or self.boundary.right == INFECTED:
            raise DomainError("FA1f boundary must be healthy or passive")

    @classmethod
    def from_lattice(cls, config: Configuration) -> "FA1fConfig":
        return cls(config.left, config.states.copy(), config.boundary)

    def to_lattice(self) -> Configuration:
        return Configuration(self.left, self.bits.copy(), self.boundary)

    def __len__(self) -> int:
        return len(self.bits)

    def __getitem__(self, x: int) -> int:
        i = x - self.left
        if i < 0:
            return self.boundary.left
        if i >= len(self.bits):
            return self.boundary.right
        return int(self.bits[i])

    def __eq__(self, other):
        if not isinstance(other, FA1fConfig):
            return NotImplemented
        return (self.left == other.left and self.boundary == other.boundary
                and np.array_equal(self.bits, other.bits))


def fa1f_step(config: FA1fConfig, x: int, u: float, q: float) -> FA1fConfig:
    """Constrained Glauber update of site ``x`` with uniform draw ``u``."""
    i = x - config.left
    if not 0 <= i < len(config):
        raise DomainError(f"site {x} outside the window")
    out = FA1fConfig(config.left, config.bits.copy(), config.boundary)
    if config[x - 1] == 0 or config[x + 1] == 0:
        out.bits[i] = HEALTHY if u < q else PASSIVE
    return out


def sample_product_measure(left: int, n: int, q: float, rng: np.random.Generator,
                           boundary: Optional[Boundary] = None) -> FA1fConfig:
    """I.i.d. bits with ``P(0) = q``."""
    if not 0.0 <= q <= 1.0:
        raise DomainError("q must lie in [0, 1]")
    bits = np.where(rng.random(n) < q, 0, 1).astype(np.int8)
    return FA1fConfig(left, bits, boundary or Boundary.healthy())


# --- four-state encoding ----------------------------------------------------

class FourState(enum.IntEnum):
    ZERO = 0
    ONE = 1
    DOWN = 2
    UP = 3

    @property
    def label(self) -> str:
        return {0: "0", 1: "1", 2: "2↓", 3: "2↑"}[int(self)]


# indexed by 2 * eta + tilde
_ENCODE = np.array([FourState.ZERO, FourState.DOWN, FourState.UP, FourState.ONE], dtype=np.int8)
_DECODE_ETA = np.array([0, 1, 0, 1], dtype=np.int8)
_DECODE_TILDE = np.array([0, 1, 1, 0], dtype=np.int8)


def encode_pair(eta: np.ndarray, tilde: np.ndarray) -> np.ndarray:
    eta = np.asarray(eta, dtype=np.int8)
    tilde = np.asarray(tilde, dtype=np.int8)
    return _ENCODE[2 * eta + tilde]


def decode_codes(codes: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    codes = np.asarray(codes, dtype=np.int8)
    return _DECODE_ETA[codes], _DECODE_TILDE[codes]


@dataclass(eq=False)
class FourStateConfig:
    left: int
    codes: np.ndarray

    @classmethod
    def from_pair(cls, eta: FA1fConfig, tilde: FA1fConfig) -> "FourStateConfig":
        if eta.left != tilde.left or len(eta) != len(tilde):
            raise DomainError("coupled copies need the same window")
        return cls(eta.left, encode_pair(eta.bits, tilde.bits))

    def pair(self, boundary: Optional[Boundary] = None) -> tuple[FA1fConfig, FA1fConfig]:
        b = boundary or Boundary.healthy()
        e, t = decode_codes(self.codes)
        return FA1fConfig(self.left, e, b), FA1fConfig(self.left, t, b)

    def discrepancies(self) -> np.ndarray:
        """Absolute sites in state 2↓ or 2↑."""
        return np.flatnonzero(self.codes >= FourState.DOWN) + self.left

    def labels(self) -> list[str]:
        return [FourState(int(c)).label for c in self.codes]


# --- two-copy coupling ------------------------------------------------------

@dataclass
class CoupledRun:
    """Two FA1f copies driven by one ring schedule."""

    eta: Trajectory
    tilde: Trajectory

    @property
    def horizon(self) -> float:
        return self.eta.horizon

    def discrepancy_counts(self) -> np.ndarray:
        """Number of discrepancies after each event (length ``n_events + 1``)."""
        e0, t0 = self.eta.initial.states, self.tilde.initial.states
        n = len(self.eta)
        if n == 0:
            return np.array([int(np.sum(e0 != t0))])
        diff = e0 != t0
        sites = self.eta.sites
        after = self.eta.new_states != self.tilde.new_states
        # flag of the same site just before each event: previous event at
        # that site, or the initial flag for its first ring
        order = np.argsort(sites, kind="stable")
        sorted_sites = sites[order]
        first = np.ones(n, dtype=bool)
        first[1:] = sorted_sites[1:] != sorted_sites[:-1]
        prev_sorted = np.where(first, diff[sorted_sites], np.roll(after[order], 1))
        before = np.empty(n, dtype=bool)
        before[order] = prev_sorted
        step = after.astype(np.int64) - before.astype(np.int64)
        return np.concatenate(([int(diff.sum())], int(diff.sum()) + np.cumsum(step)))

    def density_at(self, t: float) -> float:
        counts = self.discrepancy_counts()
        k = int(np.searchsorted(self.eta.times, t, side="right"))
        return counts[k] / len(self.eta.initial)

    def four_state(self, t: float) -> FourStateConfig:
        e, d = self.eta.snapshot(t), self.tilde.snapshot(t)
        return FourStateConfig(e.left, encode_pair(e.states, d.states))

    def absorbed(self) -> bool:
        """True when the discrepancy set never grows back after emptying."""
        c = self.discrepancy_counts()
        zero = np.flatnonzero(c == 0)
        return zero.size == 0 or bool(np.all(c[zero[0]:] == 0))


def couple_two_copies(eta0: FA1fConfig, tilde0: FA1fConfig, q: float, horizon: float,
                      seed: int) -> CoupledRun:
    """Run both copies off shared clocks and draws."""
    a, b = eta0.to_lattice(), tilde0.to_lattice()
    if not a.same_geometry(b):
        raise DomainError("coupled copies need the same window and boundary")
    params = DynamicsParams(q)
    first = simulate(a, params, horizon, seed)
    return CoupledRun(first, run_shared(b, params, first))


@dataclass
class DensityCurve:
    times: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    replicas: int


def discrepancy_density(q: float, n_sites: int, horizon: float, replicas: int, master_seed: int,
                        times: Optional[Sequence[float]] = None) -> DensityCurve:
    """Mean discrepancy density of two independent product-measure copies."""
    times = np.asarray(times if times is not None else [horizon], dtype=float)
    rows = np.empty((replicas, len(times)))
    for r in range(replicas):
        rng = rng_from_seed(derive_seed(master_seed, "fa1f-init", r))
        eta0 = sample_product_measure(0, n_sites, q, rng)
        tilde0 = sample_product_measure(0, n_sites, q, rng)
        run = couple_two_copies(eta0, tilde0, q, horizon, derive_seed(master_seed, "fa1f-run", r))
        counts = run.discrepancy_counts()
        k = np.searchsorted(run.eta.times, times, side="right")
        rows[r] = counts[k] / n_sites
    se = rows.std(axis=0, ddof=1) / math.sqrt(replicas) if replicas > 1 else np.full(len(times), math.nan)
    return DensityCurve(times, rows.mean(axis=0), se, replicas)


# --- domination by the three-state infection ---------------------------------

@dataclass
class DominationResult:
    ok: bool
    n_events: int
    violation: Optional[tuple[float, int]] = None


def infection_from_discrepancies(eta0: FA1fConfig, tilde0: FA1fConfig) -> Configuration:
    """Three-state start: discrepancies infected, other sites copied from ``eta0``."""
    states = eta0.bits.copy()
    states[eta0.bits != tilde0.bits] = INFECTED
    return Configuration(eta0.left, states, eta0.boundary)


def domination_check(eta0: FA1fConfig, tilde0: FA1fConfig, q: float, horizon: float,
                     seed: int) -> DominationResult:
    """Discrepancy set inside the three-state infected set at every event."""
    run = couple_two_copies(eta0, tilde0, q, horizon, seed)
    zeta = run_shared(infection_from_discrepancies(eta0, tilde0), DynamicsParams(q), run.eta)
    disc = run.eta.new_states != run.tilde.new_states
    bad = np.flatnonzero(disc & (zeta.new_states != INFECTED))
    if bad.size:
        k = int(bad[0])
        return DominationResult(False, len(zeta), (float(zeta.times[k]), int(zeta.sites[k]) + eta0.left))
    return DominationResult(True, len(zeta))


# --- reversibility sanity check ---------------------------------------------

@dataclass
class OccupationCheck:
    patterns: list[tuple[int, ...]]
    empirical: np.ndarray
    expected: np.ndarray
    se: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return (self.empirical - self.expected) / self.se

    @property
    def ok(self) -> bool:
        return bool(np.all(np.abs(self.z) <= 3.0))


def occupation_check(q: float, horizon: float, seed: int, n_sites: int = 3,
                     batches: int = 100) -> OccupationCheck:
    """Time-averaged occupation of every configuration on a small window with
    frozen healthy boundary, against the product measure; batch-means errors."""
    n_conf = 2 ** n_sites
    rng = rng_from_seed(seed)
    start = sample_product_measure(0, n_sites, q, rng)
    traj = simulate(start.to_lattice(), DynamicsParams(q), horizon, derive_seed(seed, "occupation"))
    n = len(traj)
    # state of every site after each event: forward-fill its last write
    idx = np.arange(n)
    codes = np.zeros(n + 1, dtype=np.int64)
    for j in range(n_sites):
        hit = np.where(traj.sites == j, idx, -1)
        last = np.maximum.accumulate(hit)
        val = np.where(last >= 0, traj.new_states[np.maximum(last, 0)], start.bits[j]).astype(np.int64)
        codes += np.concatenate(([start.bits[j]], val)) << (n_sites - 1 - j)
    edges = np.concatenate(([0.0], traj.times, [horizon]))
    cuts = np.linspace(0.0, horizon, batches + 1)
    occ = np.zeros((batches, n_conf))
    for b in range(batches):
        lo = np.clip(edges[:-1], cuts[b], cuts[b + 1])
        hi = np.clip(edges[1:], cuts[b], cuts[b + 1])
        np.add.at(occ[b], codes, hi - lo)
    occ /= (horizon / batches)
    patterns = [tuple((c >> (n_sites - 1 - j)) & 1 for j in range(n_sites)) for c in range(n_conf)]
    expected = np.array([math.prod(q if s == 0 else 1 - q for s in p) for p in patterns])
    se = occ.std(axis=0, ddof=1) / math.sqrt(batches)
    return OccupationCheck(patterns, occ.mean(axis=0), expected, np.maximum(se, 1e-12))


# --- distance to the nearest healthy site -----------------------------------

def xi_bound(kappa: float, t: Union[float, np.ndarray], q: float):
    """``max{1, kappa + t (1 - 2q)}``."""
    return np.maximum(1.0, kappa + np.asarray(t, dtype=float) * (1.0 - 2.0 * q))


def xi(config: Union[FA1fConfig, Configuration], x: int = 0) -> float:
    c = config.to_lattice() if isinstance(config, FA1fConfig) else config
    return dist_to_healthy(c, x)


def single_zero_config(kappa: int, radius: int) -> FA1fConfig:
    """All passive except one healthy site at ``kappa``; passive boundary."""
    if not 0 <= kappa <= radius:
        raise DomainError("the healthy site must lie inside the window")
    bits = np.ones(2 * radius + 1, dtype=np.int8)
    bits[radius + kappa] = 0
    return FA1fConfig(-radius, bits, Boundary.passive())


@dataclass
class XiCurve:
    q: float
    times: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    kappa: float
    replicas: int

    @property
    def bound(self) -> np.ndarray:
        return xi_bound(self.kappa, self.times, self.q)

    @property
    def comparable(self) -> bool:
        return self.q > 0.5

    def passes(self) -> Optional[np.ndarray]:
        """Per-time ``mean <= bound + 3 se``; ``None`` when ``q <= 1/2``."""
        if not self.comparable:
            return None
        return self.mean <= self.bound + 3.0 * np.nan_to_num(self.se)


Initial = Union[FA1fConfig, Callable[[np.random.Generator], FA1fConfig]]


def xi_drift_experiment(initial: Initial, x: int, q: float, times: Sequence[float],
                        replicas: int, master_seed: int) -> XiCurve:
    """Empirical mean of ``xi^x(eta_t)``; ``initial`` is a configuration or a sampler.

    ``kappa`` is the empirical mean at time 0 (exact for a fixed start).
    """
    times = np.asarray(times, dtype=float)
    horizon = float(times.max()) if times.size and times.max() > 0 else 1.0
    vals = np.empty((replicas, len(times)))
    start_vals = np.empty(replicas)
    params = DynamicsParams(q)
    for r in range(replicas):
        if callable(initial):
            cfg = initial(rng_from_seed(derive_seed(master_seed, "xi-init", r)))
        else:
            cfg = initial
        traj = simulate(cfg.to_lattice(), params, horizon, derive_seed(master_seed, "xi-run", r))
        start_vals[r] = dist_to_healthy(traj.initial, x)
        for j, t in enumerate(times):
            vals[r, j] = dist_to_healthy(traj.snapshot(t), x)
    if not np.all(np.isfinite(vals)):
        raise DomainError("no healthy site left in the window; enlarge it")
    se = vals.std(axis=0, ddof=1) / math.sqrt(replicas) if replicas > 1 else np.full(len(times), math.nan)
    return XiCurve(q, times, vals.mean(axis=0), se, float(start_vals.mean()), replicas)


# --- simplified boundary walk -----------------------------------------------

ADVANCE = 1   # the nearest healthy site turned passive
RETREAT = -1  # its left neighbour turned healthy


@dataclass
class XiProcess:
    """Walk of the nearest healthy site when site ``xi + 1`` is assumed healthy.

    ``xi`` moves +1 when site ``xi`` rings and resamples passive, and -1 when
    site ``xi - 1`` rings and resamples healthy.  At ``xi = 0`` only the +1
    move exists.  ``times``/``steps`` log the position changes, ``n_rings``
    counts rings of the two relevant sites.
    """

    xi0: int
    q: float
    horizon: float
    times: np.ndarray
    steps: np.ndarray
    n_rings: int

    def n_changes(self, t: Optional[float] = None) -> int:
        t = self.horizon if t is None else t
        return int(np.searchsorted(self.times, t, side="right"))

    def position(self, t: Optional[float] = None) -> int:
        return self.xi0 + int(self.steps[: self.n_changes(t)].sum())

    def displacement(self, t: Optional[float] = None) -> int:
        return self.position(t) - self.xi0

    def path(self) -> np.ndarray:
        return self.xi0 + np.concatenate(([0], np.cumsum(self.steps)))


def simplified_boundary_process(xi0: int, q: float, horizon: float, seed: int) -> XiProcess:
    if xi0 < 0:
        raise DomainError("xi0 must be nonnegative")
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    rng = rng_from_seed(seed)
    n = int(rng.poisson(2.0 * horizon))
    t = np.sort(rng.uniform(0.0, horizon, n))
    own = rng.random(n) < 0.5  # ring of site xi (else of site xi - 1)
    u = rng.random(n)
    times, steps = [], []
    pos = xi0
    for k in range(n):
        if own[k]:
            if u[k] >= q:
                pos += 1
                times.append(t[k])
                steps.append(ADVANCE)
        elif pos > 0 and u[k] < q:
            pos -= 1
            times.append(t[k])
            steps.append(RETREAT)
    return XiProcess(xi0, q, horizon, np.asarray(times), np.asarray(steps, dtype=np.int64), n)


@dataclass
class WaldCheck:
    q: float
    t: float
    mean_displacement: float
    se: float
    expected: float
    n_changes: int
    n_up: int
    replicas: int
    count_mean: float
    count_var: float
    binom_pvalue: float

    @property
    def wald_ok(self) -> bool:
        return abs(self.mean_displacement - self.expected) <= 3.0 * self.se

    @property
    def count_ok(self) -> bool:
        """Mean number of position changes within 3 se of ``t``."""
        return abs(self.count_mean - self.t) <= 3.0 * math.sqrt(self.count_var / self.replicas)

    @property
    def step_law_ok(self) -> bool:
        return self.binom_pvalue >= 0.01


def binomial_two_sided_pvalue(k: int, n: int, p: float) -> float:
    """Normal approximation with continuity correction (n is large here)."""
    mu, sd = n * p, math.sqrt(n * p * (1 - p))
    if sd == 0:
        return 1.0 if k == mu else 0.0
    z = max(abs(k - mu) - 0.5, 0.0) / sd
    return math.erfc(z / math.sqrt(2.0))


def wald_check(q: float, t: float, replicas: int, master_seed: int,
               xi0: Optional[int] = None) -> WaldCheck:
    """Mean displacement at ``t`` against ``t (1 - 2q)`` and the step law.

    ``xi0`` defaults to a start far enough out that the walk cannot reach 0.
    """
    xi0 = int(xi0 if xi0 is not None else 10 * t + 100)
    disp = np.empty(replicas)
    counts = np.empty(replicas)
    n_up = n_all = 0
    for r in range(replicas):
        p = simplified_boundary_process(xi0, q, t, derive_seed(master_seed, "xi-walk", r))
        disp[r] = p.displacement()
        counts[r] = len(p.steps)
        n_up += int(np.sum(p.steps == ADVANCE))
        n_all += len(p.steps)
    se = disp.std(ddof=1) / math.sqrt(replicas)
    return WaldCheck(q, t, float(disp.mean()), float(se), t * (1 - 2 * q), n_all, n_up, replicas,
                     float(counts.mean()), float(counts.var(ddof=1)),
                     binomial_two_sided_pvalue(n_up, n_all, 1 - q))


@dataclass
class WalkDomination:
    ok: bool
    n_events: int
    violation: Optional[tuple[float, int, int]] = None  # time, simplified xi, true xi
    stop: str = "horizon"  # or "left-window", "reached-x"


def walk_domination(kappa: int, q: float, horizon: float, seed: int, radius: int,
                    stop_at_x: bool = True) -> WalkDomination:
    """Drive the simplified walk with the rings and draws of a full FA1f run
    from :func:`single_zero_config` and check it stays above the true ``xi^0``.

    The walk only sees the right of ``x = 0``.  Once a healthy site reaches
    ``x`` the healthy region can spread to the left and shrink back from the
    other side unseen, so with ``stop_at_x`` the comparison ends there.
    """
    cfg = single_zero_config(kappa, radius).to_lattice()
    traj = simulate(cfg, DynamicsParams(q), horizon, seed)
    zeros = set((np.flatnonzero(cfg.states == HEALTHY) - radius).tolist())
    pos = kappa
    for k in range(len(traj)):
        s = int(traj.sites[k]) - radius
        u = float(traj.draws[k])
        if s == pos and u >= q:
            pos += 1
        elif s == pos - 1 and pos > 0 and u < q:
            pos -= 1
        if pos >= radius:
            return WalkDomination(True, k, None, "left-window")
        if traj.new_states[k] == HEALTHY:
            zeros.add(s)
        else:
            zeros.discard(s)
        true_xi = min(abs(z) for z in zeros)
        if true_xi > pos:
            return WalkDomination(False, k + 1, (float(traj.times[k]), pos, true_xi))
        if stop_at_x and true_xi == 0:
            return WalkDomination(True, k + 1, None, "reached-x")
    return WalkDomination(True, len(traj))
