"""Three-state contact process on a finite window of Z.

Sites are healthy (0), passive (1) or infected (2).  Every site carries a
rate-1 Poisson clock; at a ring the site reads its two neighbours and one
uniform draw ``u``:

* at least one healthy neighbour: the site resamples to healthy when
  ``u < q`` and to passive otherwise;
* no healthy and at least one infected neighbour: an infected site stays
  infected, and a healthy or passive site becomes infected exactly when the
  resample above would have flipped it (healthy with ``u >= q``, passive with
  ``u < q``).  The greedy variant infects unconditionally;
* otherwise nothing happens.

The window ``[left, left + n - 1]`` is closed off by two frozen virtual sites
whose states are given by a :class:`Boundary`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from . import backend
from .schedule import ring_schedule, rng_from_seed

HEALTHY, PASSIVE, INFECTED = 0, 1, 2
UNBOUNDED = float("inf")


class DomainError(ValueError):
    """Raised when a site or configuration lies outside an operation's domain."""


class SiteState(enum.IntEnum):
    HEALTHY = 0
    PASSIVE = 1
    INFECTED = 2


class Variant(str, enum.Enum):
    STANDARD = "Standard"
    GREEDY = "GreedyInfection"


@dataclass(frozen=True)
class Boundary:
    """States of the virtual sites at ``left - 1`` and ``right + 1``."""

    left: int = PASSIVE
    right: int = PASSIVE

    def __post_init__(self):
        for s in (self.left, self.right):
            if s not in (HEALTHY, PASSIVE, INFECTED):
                raise DomainError(f"invalid boundary state {s!r}")

    @classmethod
    def healthy(cls) -> "Boundary":
        return cls(HEALTHY, HEALTHY)

    @classmethod
    def passive(cls) -> "Boundary":
        return cls(PASSIVE, PASSIVE)

    @property
    def name(self) -> str:
        if self.left == self.right == HEALTHY:
            return "FrozenHealthy"
        if self.left == self.right == PASSIVE:
            return "FrozenPassive"
        return f"Frozen({self.left};{self.right})"

    @classmethod
    def parse(cls, text: str) -> "Boundary":
        text = text.strip()
        if text == "FrozenHealthy":
            return cls.healthy()
        if text == "FrozenPassive":
            return cls.passive()
        if text.startswith("Frozen(") and text.endswith(")"):
            parts = text[len("Frozen("):-1].replace(",", ";").split(";")
            if len(parts) == 2:
                return cls(int(parts[0]), int(parts[1]))
        raise DomainError(f"unknown boundary policy {text!r}")


@dataclass(frozen=True)
class DynamicsParams:
    q: float
    variant: Variant = Variant.STANDARD

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise DomainError(f"q must lie in [0, 1], got {self.q}")
        object.__setattr__(self, "variant", Variant(self.variant))

    @property
    def greedy(self) -> bool:
        return self.variant is Variant.GREEDY


@dataclass
class Configuration:
    """Site states on the window ``[left, left + len(states) - 1]``."""

    left: int
    states: np.ndarray
    boundary: Boundary = field(default_factory=Boundary.passive)

    def __post_init__(self):
        self.states = np.array(self.states, dtype=np.int8)
        if self.states.ndim != 1:
            raise DomainError("states must be one-dimensional")
        if self.states.size and (self.states.min() < 0 or self.states.max() > 2):
            raise DomainError("site states must be 0, 1 or 2")

    @classmethod
    def from_states(cls, states: Sequence[int], left: int = 0,
                    boundary: Optional[Boundary] = None) -> "Configuration":
        return cls(left, np.asarray(states), boundary or Boundary.passive())

    @property
    def right(self) -> int:
        return self.left + len(self.states) - 1

    def __len__(self) -> int:
        return len(self.states)

    def __contains__(self, x: int) -> bool:
        return self.left <= x <= self.right

    def __getitem__(self, x: int) -> int:
        """State at ``x``, reading the virtual boundary sites just outside."""
        if x in self:
            return int(self.states[x - self.left])
        if x == self.left - 1:
            return self.boundary.left
        if x == self.right + 1:
            return self.boundary.right
        raise DomainError(f"site {x} outside window [{self.left}, {self.right}] and its boundary")

    def index(self, x: int) -> int:
        if x not in self:
            raise DomainError(f"site {x} outside window [{self.left}, {self.right}]")
        return x - self.left

    def copy(self) -> "Configuration":
        return Configuration(self.left, self.states.copy(), self.boundary)

    def same_geometry(self, other: "Configuration") -> bool:
        return (self.left == other.left and len(self) == len(other)
                and self.boundary == other.boundary)

    def __eq__(self, other):
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.same_geometry(other) and np.array_equal(self.states, other.states)

    def describe(self) -> str:
        return f"[{self.left},{self.right}]"


def neighbor_flags(config: Configuration, x: int) -> tuple[int, int]:
    """Return ``(c_x, cbar_x)``.

    ``c_x`` is 1 when the neighbour product is 0 (some neighbour healthy),
    ``cbar_x`` is 1 when it is at least 2 (no healthy, one infected).
    """
    config.index(x)
    prod = config[x - 1] * config[x + 1]
    return int(prod == 0), int(prod >= 2)


def apply_rule(state: int, cx: int, cbarx: int, u: float, q: float, greedy: bool = False) -> int:
    """New state of a ringing site given its flags and draw ``u``."""
    if cx:
        return HEALTHY if u < q else PASSIVE
    if cbarx:
        if greedy or state == INFECTED:
            return INFECTED
        resampled = HEALTHY if u < q else PASSIVE
        return INFECTED if resampled != state else state
    return state


def update_law(state: int, cx: int, cbarx: int, greedy: bool = False) -> list[tuple[int, int, int]]:
    """Distribution of :func:`apply_rule` over ``u``.

    Each entry is ``(new_state, c0, c1)`` with probability ``c0 + c1 * q``.
    """
    if cx:
        return [(HEALTHY, 0, 1), (PASSIVE, 1, -1)]
    if cbarx:
        if greedy or state == INFECTED:
            return [(INFECTED, 1, 0)]
        if state == HEALTHY:
            return [(INFECTED, 1, -1), (HEALTHY, 0, 1)]
        return [(INFECTED, 0, 1), (PASSIVE, 1, -1)]
    return [(state, 1, 0)]


def apply_update(config: Configuration, x: int, u: float, params: DynamicsParams) -> Configuration:
    if not 0.0 <= u < 1.0:
        raise DomainError(f"draw must lie in [0, 1), got {u}")
    cx, cbarx = neighbor_flags(config, x)
    out = config.copy()
    out.states[x - config.left] = apply_rule(config[x], cx, cbarx, u, params.q, params.greedy)
    return out


def rightmost_infected(config: Configuration) -> Optional[int]:
    idx = np.flatnonzero(config.states == INFECTED)
    return int(idx[-1]) + config.left if idx.size else None


def infected_interval(config: Configuration) -> tuple[Optional[tuple[int, int]], bool]:
    """Hull ``(a, b)`` of the infected sites (None if there are none) and
    whether every site of the hull is infected."""
    idx = np.flatnonzero(config.states == INFECTED)
    if not idx.size:
        return None, True
    a, b = int(idx[0]), int(idx[-1])
    return (a + config.left, b + config.left), bool(idx.size == b - a + 1)


def dist_to_healthy(config: Configuration, x: int) -> float:
    """Distance from ``x`` to the nearest healthy site, virtual sites included.

    Returns :data:`UNBOUNDED` when neither the window nor its boundary holds a
    healthy site.
    """
    i = config.index(x)
    dists = []
    idx = np.flatnonzero(config.states == HEALTHY)
    if idx.size:
        dists.append(int(np.min(np.abs(idx - i))))
    if config.boundary.left == HEALTHY:
        dists.append(i + 1)
    if config.boundary.right == HEALTHY:
        dists.append(len(config) - i)
    return min(dists) if dists else UNBOUNDED


NO_SITE = -1  # index-coordinate sentinel used by the event kernels


@dataclass
class Trajectory:
    """Seeded event log of one run.

    Every clock ring in ``[0, horizon]`` is an event, including rings that
    leave the site unchanged.  The per-event observables are recorded in
    window-index coordinates (``NO_SITE`` when there is no infected site):
    ``right_idx``/``left_idx`` locate the infected hull after the event,
    ``n_infected`` counts infections and ``phi_code`` packs the states of the
    four sites right of the rightmost infection (bit 3 is the nearest site,
    healthy = 0, -1 when no infection remains).
    """

    seed: int
    params: DynamicsParams
    initial: Configuration
    horizon: float
    times: np.ndarray
    sites: np.ndarray
    draws: np.ndarray
    new_states: np.ndarray
    right_idx: np.ndarray
    left_idx: np.ndarray
    n_infected: np.ndarray
    phi_code: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    @property
    def sites_abs(self) -> np.ndarray:
        return self.sites + self.initial.left

    def events(self) -> Iterator[tuple[float, int, float, int]]:
        left = self.initial.left
        for t, s, u, v in zip(self.times, self.sites, self.draws, self.new_states):
            yield float(t), int(s) + left, float(u), int(v)

    def n_events_until(self, t: float, after: bool = True) -> int:
        return int(np.searchsorted(self.times, t, side="right" if after else "left"))

    def snapshot(self, t: float, after: bool = True) -> Configuration:
        """Configuration just after (or just before) time ``t``."""
        if t < 0 or t > self.horizon:
            raise DomainError(f"time {t} outside [0, {self.horizon}]")
        k = self.n_events_until(t, after)
        states = self.initial.states.copy()
        if k:
            # the last write to each site wins
            sites = self.sites[:k]
            rev = sites[::-1]
            uniq, first = np.unique(rev, return_index=True)
            states[uniq] = self.new_states[:k][::-1][first]
        return Configuration(self.initial.left, states, self.initial.boundary)

    @property
    def final(self) -> Configuration:
        return self.snapshot(self.horizon)

    def initial_observables(self) -> tuple[int, int, int, int]:
        """``(right_idx, left_idx, n_infected, phi_code)`` at time 0."""
        return initial_observables(self.initial)

    def right_before(self) -> np.ndarray:
        """Rightmost infected index just before each event."""
        r0 = self.initial_observables()[0]
        return np.concatenate(([r0], self.right_idx[:-1])).astype(np.int64)

    def extinction_time(self) -> Optional[float]:
        if self.initial_observables()[2] == 0:
            return 0.0
        dead = np.flatnonzero(self.n_infected == 0)
        return float(self.times[dead[0]]) if dead.size else None

    def header(self) -> str:
        return (f"# q={self.params.q!r} seed={self.seed} window={self.initial.describe()} "
                f"boundary={self.initial.boundary.name} variant={self.params.variant.value}")

    def write_events(self, path) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.header() + "\n")
            fh.write("time,site,draw,new_state\n")
            for t, s, u, v in self.events():
                fh.write(f"{t:.12g},{s},{u:.12g},{v}\n")

    def write_snapshot(self, path, t: Optional[float] = None) -> None:
        config = self.final if t is None else self.snapshot(t)
        with open(path, "w", newline="\n") as fh:
            fh.write(self.header() + f" t={self.horizon if t is None else t!r}\n")
            fh.write("site,state\n")
            for i, s in enumerate(config.states):
                fh.write(f"{i + config.left},{int(s)}\n")


def initial_observables(config: Configuration) -> tuple[int, int, int, int]:
    inf = np.flatnonzero(config.states == INFECTED)
    if not inf.size:
        return NO_SITE, NO_SITE, 0, -1
    r = int(inf[-1])
    code = 0
    for k in range(1, 5):
        j = r + k
        s = config.states[j] if j < len(config) else config.boundary.right
        code = (code << 1) | int(s != HEALTHY)
    return r, int(inf[0]), int(inf.size), code


def read_events(path) -> tuple[str, np.ndarray]:
    """Parse an event log written by :meth:`Trajectory.write_events`."""
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        cols = fh.readline().rstrip("\n")
        if cols != "time,site,draw,new_state":
            raise ValueError(f"unexpected columns {cols!r}")
        rows = np.loadtxt(fh, delimiter=",", ndmin=2)
    return header, rows


def _run(initial: Configuration, params: DynamicsParams, horizon: float, seed: int,
         times: np.ndarray, sites: np.ndarray, draws: np.ndarray) -> Trajectory:
    states = initial.states.copy()
    n = len(times)
    new_states = np.empty(n, dtype=np.int8)
    right = np.empty(n, dtype=np.int64)
    left = np.empty(n, dtype=np.int64)
    count = np.empty(n, dtype=np.int64)
    phi = np.empty(n, dtype=np.int8)
    backend.run_events(states, sites, draws, float(params.q), int(params.greedy),
                       initial.boundary.left, initial.boundary.right,
                       new_states, right, left, count, phi)
    return Trajectory(seed, params, initial.copy(), float(horizon), times, sites, draws,
                      new_states, right, left, count, phi)


def simulate(initial: Configuration, params: DynamicsParams, horizon: float, seed: int) -> Trajectory:
    """Exact event-driven simulation on ``[0, horizon]``."""
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    if len(initial) == 0:
        raise DomainError("empty window")
    times, sites, draws = ring_schedule(len(initial), horizon, rng_from_seed(seed))
    return _run(initial, params, horizon, seed, times, sites, draws)


def run_coupled_pair(eta1: Configuration, eta2: Configuration, params: DynamicsParams,
                     horizon: float, seed: int) -> tuple[Trajectory, Trajectory]:
    """Run two configurations off the same clocks and the same draws."""
    if not eta1.same_geometry(eta2):
        raise DomainError("coupled configurations need the same window and boundary")
    if not horizon > 0:
        raise DomainError("horizon must be positive")
    if len(eta1) == 0:
        raise DomainError("empty window")
    times, sites, draws = ring_schedule(len(eta1), horizon, rng_from_seed(seed))
    return (_run(eta1, params, horizon, seed, times, sites, draws),
            _run(eta2, params, horizon, seed, times, sites, draws))


def run_shared(initial: Configuration, params: DynamicsParams, like: Trajectory) -> Trajectory:
    """Drive ``initial`` with the clocks and draws of an existing trajectory."""
    if not initial.same_geometry(like.initial):
        raise DomainError("shared-clock run needs the same window and boundary")
    return _run(initial, params, like.horizon, like.seed, like.times, like.sites, like.draws)


def state_matrix(traj: Trajectory) -> np.ndarray:
    """Full ``(n_events + 1, n_sites)`` state history; row 0 is the initial state.

    Meant for small windows (tests, fuzzing).
    """
    n = len(traj)
    out = np.empty((n + 1, len(traj.initial)), dtype=np.int8)
    out[0] = traj.initial.states
    cur = traj.initial.states.copy()
    for k in range(n):
        cur[traj.sites[k]] = traj.new_states[k]
        out[k + 1] = cur
    return out


def pairwise_relation_holds(t1: Trajectory, t2: Trajectory) -> tuple[bool, Optional[tuple[float, int]]]:
    """Check ``state1(y) in {state2(y), INFECTED}`` at every event time.

    Only the ringing site changes at an event, so the relation is checked on
    the initial states and then at the event site after each event.  Returns
    the first violation as ``(time, site)``.
    """
    a, b = t1.initial.states, t2.initial.states
    bad0 = np.flatnonzero((a != b) & (a != INFECTED))
    if bad0.size:
        return False, (0.0, int(bad0[0]) + t1.initial.left)
    bad = np.flatnonzero((t1.new_states != t2.new_states) & (t1.new_states != INFECTED))
    if bad.size:
        k = int(bad[0])
        return False, (float(t1.times[k]), int(t1.sites[k]) + t1.initial.left)
    return True, None


def set_site(config: Configuration, x: int, state: int) -> Configuration:
    """``eta^{x,i}``: copy of ``config`` with site ``x`` set to ``state``."""
    out = config.copy()
    out.states[out.index(x)] = state
    return out


__all__ = [
    "HEALTHY", "PASSIVE", "INFECTED", "UNBOUNDED", "NO_SITE", "DomainError", "SiteState", "Variant",
    "Boundary", "DynamicsParams", "Configuration", "Trajectory", "neighbor_flags", "apply_rule",
    "update_law", "apply_update", "rightmost_infected", "infected_interval", "dist_to_healthy",
    "simulate", "run_coupled_pair", "run_shared", "state_matrix", "pairwise_relation_holds",
    "set_site", "initial_observables", "read_events",
]
