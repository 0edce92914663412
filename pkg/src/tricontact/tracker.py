"""Post-processing of trajectories around the rightmost infected site.

Everything here works on the per-event observables recorded by the event
kernel (rightmost infected index and packed states of the four sites to its
right), so no configuration is ever rebuilt.  The rightmost infected site can
only move when the site itself or its right neighbour rings, which is why
every change of ``I(t)`` is a level change of the embedded chain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .lattice import HEALTHY, NO_SITE, Configuration, Trajectory, rightmost_infected
from . import ychain


@dataclass(frozen=True)
class XState:
    """Level ``I`` and the states of ``I+1..I+4`` (healthy 0, passive 1)."""

    level: int
    bits: tuple[int, int, int, int]
    truncated: bool = False

    @classmethod
    def from_code(cls, level: int, code: int, truncated: bool = False) -> "XState":
        return cls(level, decode_bits(code), truncated)

    @property
    def code(self) -> int:
        return encode_bits(self.bits)

    @property
    def boundary_bit(self) -> int:
        return self.bits[3]

    @property
    def good(self) -> bool:
        return in_good(self.code)

    @property
    def progressed(self) -> bool:
        return in_progressed(self.code)


def decode_bits(code: int) -> tuple[int, int, int, int]:
    return tuple((int(code) >> s) & 1 for s in (3, 2, 1, 0))


def encode_bits(bits: Sequence[int]) -> int:
    code = 0
    for b in bits:
        code = (code << 1) | int(b)
    return code


def in_good(code):
    """Membership in the post-regress class: site ``I+2`` healthy."""
    return ((np.asarray(code) >> 2) & 1) == 0


def in_progressed(code):
    """Membership in the post-progress class: site ``I+1`` passive."""
    return ((np.asarray(code) >> 3) & 1) == 1


def phi(config: Configuration) -> Optional[XState]:
    """``(I, states of I+1..I+4)``; virtual boundary states are read past the
    window edge and flagged as truncation."""
    r = rightmost_infected(config)
    if r is None:
        return None
    bits = tuple(int(config[x] != HEALTHY) if x <= config.right + 1 else int(config.boundary.right != HEALTHY)
                 for x in range(r + 1, r + 5))
    return XState(r, bits, r + 4 > config.right)


def truncated(traj: Trajectory, right_idx: np.ndarray) -> np.ndarray:
    return right_idx > len(traj.initial) - 5


# --- embedded chain ---------------------------------------------------------

@dataclass
class EmbeddedChain:
    """``X`` (self-loops removed) with the event index that produced each state.

    ``event`` is -1 for the initial state.  ``xbar_events`` lists every ring of
    the moving segment ``[I, I+4]``.
    """

    event: np.ndarray
    time: np.ndarray
    level: np.ndarray
    code: np.ndarray
    truncated: np.ndarray
    xbar_events: np.ndarray
    extinct: bool

    def __len__(self) -> int:
        return len(self.level)

    def states(self) -> list[XState]:
        return [XState.from_code(int(l), int(c), bool(t))
                for l, c, t in zip(self.level, self.code, self.truncated)]


def segment_rings(traj: Trajectory) -> np.ndarray:
    """Indices of events ringing inside ``[I, I+4]`` (``I`` read just before)."""
    rb = traj.right_before()
    d = traj.sites - rb
    return np.flatnonzero((rb != NO_SITE) & (d >= 0) & (d <= 4))


def embedded_chain(traj: Trajectory) -> EmbeddedChain:
    r0, _, n0, c0 = traj.initial_observables()
    left = traj.initial.left
    if n0 == 0:
        empty = np.empty(0, dtype=np.int64)
        return EmbeddedChain(empty, np.empty(0), empty, empty, np.empty(0, bool), empty, True)
    ring = segment_rings(traj)
    lev = traj.right_idx[ring]
    code = traj.phi_code[ring].astype(np.int64)
    alive = lev != NO_SITE
    extinct = not alive.all()
    if extinct:
        first_dead = int(np.argmin(alive))
        ring, lev, code = ring[:first_dead], lev[:first_dead], code[:first_dead]
    lev_all = np.concatenate(([r0], lev))
    code_all = np.concatenate(([c0], code))
    ev_all = np.concatenate(([-1], ring))
    keep = np.ones(len(lev_all), dtype=bool)
    keep[1:] = (lev_all[1:] != lev_all[:-1]) | (code_all[1:] != code_all[:-1])
    ev = ev_all[keep]
    lv = lev_all[keep]
    times = np.where(ev < 0, 0.0, traj.times[np.maximum(ev, 0)])
    return EmbeddedChain(ev, times, lv + left, code_all[keep],
                         truncated(traj, lv), ring, extinct)


# --- stable windows ---------------------------------------------------------

BOUNDARY_RING = "BoundaryRing"
RIGHTMOST_MOVED = "RightmostMoved"
HORIZON = "Horizon"


@dataclass(frozen=True)
class StableWindow:
    start: float
    end: float
    initial_state: XState
    close_reason: str
    close_event: int = -1
    extinct: bool = False


def window_close_events(traj: Trajectory) -> np.ndarray:
    rb = traj.right_before()
    alive = rb != NO_SITE
    return np.flatnonzero(alive & ((traj.right_idx != rb) | (traj.sites == rb + 4)))


def stable_windows(traj: Trajectory) -> list[StableWindow]:
    """Windows tiling ``[0, extinction ^ horizon)``; the last one is closed by
    the horizon unless the infection died."""
    r0, _, n0, c0 = traj.initial_observables()
    if n0 == 0:
        return []
    left = traj.initial.left
    n = len(traj.initial)
    close = window_close_events(traj)
    rb = traj.right_before()
    out = []
    start, lev, code = 0.0, r0, c0
    for k in close:
        k = int(k)
        reason = RIGHTMOST_MOVED if traj.right_idx[k] != rb[k] else BOUNDARY_RING
        dead = traj.right_idx[k] == NO_SITE
        out.append(StableWindow(start, float(traj.times[k]),
                                XState.from_code(lev + left, code, lev > n - 5), reason, k, bool(dead)))
        if dead:
            return out
        start, lev, code = float(traj.times[k]), int(traj.right_idx[k]), int(traj.phi_code[k])
    out.append(StableWindow(start, traj.horizon, XState.from_code(lev + left, code, lev > n - 5), HORIZON))
    return out


# --- level changes and intervals --------------------------------------------

@dataclass
class LevelChanges:
    """Every change of ``I(t)``: event index, sign, the X code right after it.

    A change into extinction has sign -1 and code -1.
    """

    event: np.ndarray
    time: np.ndarray
    sign: np.ndarray
    code: np.ndarray
    n_infected: np.ndarray
    truncated: np.ndarray
    initial_code: int
    initial_truncated: bool
    extinct: bool
    horizon: float

    def __len__(self) -> int:
        return len(self.sign)


def level_changes(traj: Trajectory) -> LevelChanges:
    rb = traj.right_before()
    r0, _, n0, c0 = traj.initial_observables()
    ev = np.flatnonzero((rb != NO_SITE) & (traj.right_idx != rb))
    after = traj.right_idx[ev]
    sign = np.where(after == NO_SITE, -1, np.sign(after - rb[ev])).astype(np.int64)
    extinct = bool(len(ev) and after[-1] == NO_SITE) or n0 == 0
    n = len(traj.initial)
    return LevelChanges(ev, traj.times[ev], sign, traj.phi_code[ev].astype(np.int64),
                        traj.n_infected[ev], after > n - 5, c0, r0 > n - 5, extinct, traj.horizon)


def level_changes_from_chain(xseq: EmbeddedChain) -> tuple[np.ndarray, np.ndarray]:
    """Level-change positions in ``X`` and their signs (no extinction step)."""
    d = np.diff(xseq.level)
    pos = np.flatnonzero(d) + 1
    return pos, np.sign(d[pos - 1]).astype(np.int64)


@dataclass
class Interval:
    kind: int  # +1 progressive, -1 regressive
    length: int
    start_code: int
    first: bool
    censored: bool
    truncated: bool


@dataclass
class IntervalStats:
    """Run lengths of progressive and regressive level-change runs.

    Intervals starting at time 0 (``first``), still running at the horizon
    (``censored``) or touching the window edge (``truncated``) are kept but
    excluded from :meth:`usable`.
    """

    intervals: list[Interval] = field(default_factory=list)

    def extend(self, other: "IntervalStats") -> None:
        self.intervals.extend(other.intervals)

    def usable(self) -> list[Interval]:
        return [iv for iv in self.intervals if not (iv.first or iv.censored or iv.truncated)]

    def lengths(self, kind: int, start_class: Optional[str] = None) -> np.ndarray:
        out = []
        for iv in self.usable():
            if iv.kind != kind:
                continue
            if start_class == "G" and not in_good(iv.start_code):
                continue
            if start_class == "B" and not in_progressed(iv.start_code):
                continue
            out.append(iv.length)
        return np.array(out, dtype=float)

    @property
    def progressive_lengths(self) -> np.ndarray:
        return self.lengths(+1)

    @property
    def regressive_lengths(self) -> np.ndarray:
        return self.lengths(-1)

    def summary(self) -> dict[str, tuple[float, float, int]]:
        """``(mean, standard error, count)`` per kind and start class."""
        out = {}
        for kind, name in ((+1, "prog"), (-1, "regr")):
            for cls in ("G", "B"):
                out[f"{name}|{cls}"] = mean_se(self.lengths(kind, cls))
        return out


def mean_se(x: np.ndarray) -> tuple[float, float, int]:
    n = len(x)
    if n == 0:
        return math.nan, math.nan, 0
    if n == 1:
        return float(x[0]), math.nan, 1
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(n)), n


def interval_decomposition(lc: LevelChanges) -> IntervalStats:
    """Run-length encode the sign sequence.

    An interval's start code is the X state just before its first step.  The
    final interval is censored unless the infection died out.
    """
    stats = IntervalStats()
    m = len(lc.sign)
    if m == 0:
        return stats
    trunc_cum = np.concatenate(([0], np.cumsum(lc.truncated)))
    i = 0
    while i < m:
        j = i
        while j + 1 < m and lc.sign[j + 1] == lc.sign[i]:
            j += 1
        start_code = lc.initial_code if i == 0 else int(lc.code[i - 1])
        start_trunc = lc.initial_truncated if i == 0 else bool(lc.truncated[i - 1])
        last = j == m - 1
        stats.intervals.append(Interval(
            int(lc.sign[i]), j - i + 1, start_code, i == 0,
            censored=last and not lc.extinct,
            truncated=start_trunc or bool(trunc_cum[j + 1] - trunc_cum[i]),
        ))
        i = j + 1
    return stats


def runs_from_signs(signs: Sequence[int]) -> tuple[list[int], list[int]]:
    """Progressive and regressive run lengths of a bare sign sequence."""
    prog, regr = [], []
    i = 0
    signs = list(signs)
    while i < len(signs):
        j = i
        while j + 1 < len(signs) and signs[j + 1] == signs[i]:
            j += 1
        (prog if signs[i] > 0 else regr).append(j - i + 1)
        i = j + 1
    return prog, regr


def repeat_regress_counts(lc: LevelChanges) -> tuple[int, int]:
    """``(regress after regress, level changes after regress)``."""
    s = lc.sign
    if len(s) < 2:
        return 0, 0
    prev, nxt = s[:-1], s[1:]
    ok = ~(lc.truncated[:-1])
    mask = (prev == -1) & ok
    return int(np.sum(nxt[mask] == -1)), int(np.sum(mask))


def alpha_formula(q: float) -> float:
    """Lower bound on the probability of another regress right after a regress."""
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    return min(q / ((2 - q) * (4 - 3 * q)), (1 + q / (4 - 3 * q)) / (3 - q))


# --- progress probability under the window coupling -------------------------

@dataclass
class Episodes:
    """Stretches between consecutive level changes (stable windows glued
    until one closes with a level change).

    ``start_code`` is the X state at the start, ``outcome`` the sign of the
    closing level change. ``valid`` keeps stretches that start before the
    cutoff, from a cluster of at least two infected sites, away from the
    window edge. Selecting on start time rather than completion avoids
    dropping the slow stretches; ``censored`` counts the ones that started
    before the cutoff but were still open at the horizon.
    """

    start_code: np.ndarray
    start_time: np.ndarray
    outcome: np.ndarray
    valid: np.ndarray
    censored: int = 0

    @classmethod
    def empty(cls) -> "Episodes":
        z = np.empty(0, dtype=np.int64)
        return cls(z, np.empty(0), z, np.empty(0, dtype=bool), 0)

    def concat(self, other: "Episodes") -> "Episodes":
        return Episodes(np.concatenate((self.start_code, other.start_code)),
                        np.concatenate((self.start_time, other.start_time)),
                        np.concatenate((self.outcome, other.outcome)),
                        np.concatenate((self.valid, other.valid)),
                        self.censored + other.censored)


def episodes(traj: Trajectory, start_before: Optional[float] = None) -> Episodes:
    """Completed stretches of ``traj``; ``start_before`` defaults to the horizon."""
    cutoff = traj.horizon if start_before is None else start_before
    lc = level_changes(traj)
    r0, _, n0, c0 = traj.initial_observables()
    if n0 == 0:
        return Episodes.empty()
    open_start = lc.time[-1] if len(lc) else 0.0
    censored = int(not lc.extinct and open_start < cutoff)
    if len(lc) == 0:
        return replace(Episodes.empty(), censored=censored)
    starts = np.concatenate(([c0], lc.code[:-1]))
    t_start = np.concatenate(([0.0], lc.time[:-1]))
    sizes = np.concatenate(([n0], lc.n_infected[:-1]))
    trunc_start = np.concatenate(([r0 > len(traj.initial) - 5], lc.truncated[:-1]))
    valid = (sizes >= 2) & ~trunc_start & (starts >= 0) & (t_start < cutoff)
    return Episodes(starts.astype(np.int64), t_start, lc.sign.copy(), valid, censored)


@dataclass
class ProgressEstimate:
    boundary_bit: int
    n: int
    progress: float
    se: float
    reference: float
    insufficient: bool

    @property
    def lower_ok(self) -> bool:
        return (not self.insufficient) and self.progress >= self.reference - 3 * self.se


def y_progress_table(q: float) -> np.ndarray:
    """Exact Y progress probability for each 3-bit pattern index."""
    fp = ychain.first_passage_exact(ychain.build_y_kernel(q))
    return np.array([float(fp.theta[p]) for p in ychain.PATTERNS])


def progress_probability(eps: Episodes, q: float, boundary_bit: int, min_samples: int = 100,
                         theta: Optional[np.ndarray] = None) -> ProgressEstimate:
    """Empirical P[progress | level change] against the Y prediction.

    The reference averages the exact Y progress probability over the same
    start patterns (first three bits), so both sides see the same mix.
    """
    theta = y_progress_table(q) if theta is None else theta
    sel = eps.valid & ((eps.start_code & 1) == boundary_bit)
    n = int(sel.sum())
    if n == 0:
        return ProgressEstimate(boundary_bit, 0, math.nan, math.nan, math.nan, True)
    up = (eps.outcome[sel] == 1).astype(float)
    p = float(up.mean())
    se = math.sqrt(max(p * (1 - p), 1.0 / n) / n)
    ref = float(np.mean(theta[eps.start_code[sel] >> 1]))
    return ProgressEstimate(boundary_bit, n, p, se, ref, n < min_samples)


# --- displacement slope -----------------------------------------------------

def displacement(traj: Trajectory) -> tuple[int, float]:
    """Net number of right-edge steps (progress +1, regress -1, extinction -1)
    and the time the infection was alive."""
    lc = level_changes(traj)
    ext = traj.extinction_time()
    return int(lc.sign.sum()), traj.horizon if ext is None else ext


def ratio_slope(d: Iterable[float], t: Iterable[float]) -> tuple[float, float]:
    """``sum d / sum t`` with its delta-method standard error."""
    d = np.asarray(list(d), dtype=float)
    t = np.asarray(list(t), dtype=float)
    n = len(d)
    if n < 2 or t.sum() <= 0:
        return math.nan, math.nan
    slope = d.sum() / t.sum()
    resid = d - slope * t
    se = math.sqrt(n / (n - 1) * np.sum(resid**2)) / t.sum()
    return float(slope), float(se)
