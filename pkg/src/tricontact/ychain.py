"""Auxiliary level-plus-three-bits chain for the right edge of the infection.

A state ``(n, w2, w3, w4)`` stands for a rightmost infected site at level
``n`` whose three right neighbours are healthy (0) or passive (1); the site
left of it is taken to be infected and the site at distance 4 is a frozen
virtual site.  The transition table is not written down by hand: it is read
off the lattice rules (:func:`tricontact.lattice.update_law`) as the jump
chain of the four ringing sites with self-loops removed.  Which virtual
boundary state and which landing rule after a level increase give the right
chain is decided by checking every candidate against the closed forms the
chain must satisfy (:func:`reconstruct`).

All kernel entries are exact :class:`fractions.Fraction` values for rational
``q``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Union

import numpy as np

from .lattice import HEALTHY, INFECTED, PASSIVE, update_law

Number = Union[int, float, Fraction]
Pattern = tuple[int, int, int]

PATTERNS: tuple[Pattern, ...] = tuple((a, b, c) for a in (0, 1) for b in (0, 1) for c in (0, 1))
INDEX = {p: i for i, p in enumerate(PATTERNS)}
GOOD: tuple[Pattern, ...] = ((1, 0, 1), (1, 0, 0))
THETA_STARTS: tuple[Pattern, ...] = ((1, 1, 0), (1, 0, 0), (1, 0, 1))
RESET_PATTERN: Pattern = (1, 0, 1)
LANDINGS = ("reset", "shift")
DEFAULT_GRID = (0.001, 0.005, 0.01, 0.02, 0.05, 0.1, 0.15, 0.2)


class KernelConstructionError(ValueError):
    """A reconstructed kernel violates one of the identities it must satisfy."""

    def __init__(self, failed: list[str], q):
        self.failed = failed
        super().__init__(f"kernel at q={q} fails: {', '.join(failed)}")


def as_fraction(q: Number) -> Fraction:
    if isinstance(q, Fraction):
        return q
    if isinstance(q, float):
        return Fraction(repr(q))
    return Fraction(q)


@dataclass(frozen=True)
class YState:
    level: int
    bits: Pattern

    def __post_init__(self):
        if len(self.bits) != 3 or any(b not in (0, 1) for b in self.bits):
            raise ValueError(f"bits must be three binary values, got {self.bits}")


@dataclass(frozen=True)
class Transition:
    target: Pattern
    shift: int
    prob: Fraction


# --- reading the chain off the lattice rules --------------------------------

def _segment_rates(pattern: Pattern, boundary: int, landing: str) -> dict[tuple[int, Pattern], tuple[int, int]]:
    """Rates of every state-changing ring, as linear polynomials ``c0 + c1 q``.

    The segment is ``[I-1, I, I+1, I+2, I+3]`` with ``I-1`` infected and the
    virtual site ``I+4`` frozen at ``boundary``; only ``I..I+3`` ring.
    """
    seg = [INFECTED, INFECTED, *pattern]
    rates: dict[tuple[int, Pattern], list[int]] = {}
    for j in range(1, 5):
        left = seg[j - 1]
        right = seg[j + 1] if j + 1 < len(seg) else boundary
        prod = left * right
        for new, c0, c1 in update_law(seg[j], int(prod == 0), int(prod >= 2)):
            if new == seg[j]:
                continue
            after = list(seg)
            after[j] = new
            if after[2] == INFECTED:
                if landing == "reset":
                    key = (1, RESET_PATTERN)
                else:
                    key = (1, (after[3], after[4], int(boundary != HEALTHY)))
            elif after[1] != INFECTED:
                key = (-1, (after[1], after[2], after[3]))
            else:
                key = (0, (after[2], after[3], after[4]))
            acc = rates.setdefault(key, [0, 0])
            acc[0] += c0
            acc[1] += c1
    return {k: (v[0], v[1]) for k, v in rates.items()}


def _ratio(num: tuple[int, int], den: tuple[int, int], q: Fraction) -> Fraction:
    d = den[0] + den[1] * q
    if d != 0:
        return (num[0] + num[1] * q) / d
    # only reachable at q = 0 for rows whose total rate is proportional to q
    if den[1] == 0:
        raise ZeroDivisionError("row without transitions")
    return Fraction(num[1], den[1])


@dataclass
class YKernel:
    """Transition table of the auxiliary chain at one value of ``q``.

    ``table[p]`` lists the transitions out of pattern ``p``; ``shift`` is the
    level change.  The table does not depend on the level.
    """

    q: Fraction
    table: dict[Pattern, list[Transition]]
    boundary: int = PASSIVE
    landing: str = "reset"
    checks: dict[str, bool] = field(default_factory=dict)

    def prob(self, src: Pattern, target: Pattern, shift: int = 0) -> Fraction:
        for tr in self.table[src]:
            if tr.target == target and tr.shift == shift:
                return tr.prob
        return Fraction(0)

    def cycle_weight(self, p1: Pattern, p2: Pattern) -> Fraction:
        """Probability of the same-level excursion ``p1 -> p2 -> p1``."""
        return self.prob(p1, p2) * self.prob(p2, p1)

    def shifts(self) -> set[int]:
        return {tr.shift for row in self.table.values() for tr in row}

    def matrices(self, exact: bool = True):
        """``(Q, up, down)``: same-level moves and landing patterns of level changes."""
        zero = Fraction(0) if exact else 0.0
        Q = [[zero] * 8 for _ in range(8)]
        up = [[zero] * 8 for _ in range(8)]
        down = [[zero] * 8 for _ in range(8)]
        for p, row in self.table.items():
            i = INDEX[p]
            for tr in row:
                m = {0: Q, 1: up, -1: down}[tr.shift]
                m[i][INDEX[tr.target]] += tr.prob if exact else float(tr.prob)
        if exact:
            return Q, up, down
        return np.array(Q), np.array(up), np.array(down)

    def cumulative(self):
        """Per-pattern sampling tables for :func:`y_step` and Monte Carlo."""
        return _cumulative(self)


def segment_kernel(q: Number, boundary: int = PASSIVE, landing: str = "reset") -> YKernel:
    """Kernel read off the lattice rules for a given virtual boundary and landing rule."""
    q = as_fraction(q)
    if not 0 <= q <= 1:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    if landing not in LANDINGS:
        raise ValueError(f"unknown landing rule {landing!r}")
    table = {}
    for p in PATTERNS:
        rates = _segment_rates(p, boundary, landing)
        total = (sum(r[0] for r in rates.values()), sum(r[1] for r in rates.values()))
        row = []
        for (shift, target), rate in sorted(rates.items()):
            pr = _ratio(rate, total, q)
            if pr:
                row.append(Transition(target, shift, pr))
        table[p] = row
    return YKernel(q, table, boundary, landing)


# --- closed forms the chain must reproduce ----------------------------------

def weight_a(q: Number) -> Fraction:
    q = as_fraction(q)
    return (1 - q) / (2 * (3 - q))


def weight_b(q: Number) -> Fraction:
    q = as_fraction(q)
    return (1 - q) / (2 * (2 - q))


def theta1_lower(q: Number) -> Fraction:
    q = as_fraction(q)
    return (15 - 9 * q + 3 * q**2 - q**3) / (18 - 2 * q**2)


def theta2_lower(q: Number) -> Fraction:
    q = as_fraction(q)
    return (6 - 9 * q + 4 * q**2 - q**3) / (9 - q**2)


def theta3_lower(q: Number) -> Fraction:
    q = as_fraction(q)
    return (3 - 4 * q + q**2) / (6 + 2 * q)


def regress3_lower(q: Number) -> Fraction:
    """Lower bound on ``1 - theta3``."""
    q = as_fraction(q)
    return (6 - 5 * q + q**2) / (14 - 6 * q)


def regress3_paths(q: Number) -> Fraction:
    """Path-sum form of :func:`regress3_lower` before simplification."""
    q = as_fraction(q)
    return (1 / (2 * (3 - q)) + (1 - q) / (4 * (3 - q))) / (1 - weight_a(q) - weight_b(q))


def kappa_lower(q: Number) -> Fraction:
    q = as_fraction(q)
    return (2 - 3 * q + q**2) / (7 - 3 * q)


def kappa_paths(q: Number) -> Fraction:
    q = as_fraction(q)
    return (1 - q) / (2 * (3 - q)) / (1 - weight_a(q) - weight_b(q))


def healthy_cycle_weight(q: Number) -> Fraction:
    """Weight of the extra 2-cycle present under a healthy boundary."""
    q = as_fraction(q)
    return q * (1 - q) / ((2 + q) * (3 - q))


def healthy_boundary_identity(q: float) -> tuple[float, float]:
    """Both sides of ``((1-q)/(2+q) + c) / (1-c) = (1-q)/2`` in floating point."""
    c = q * (1 - q) / ((2 + q) * (3 - q))
    return ((1 - q) / (2 + q) + c) / (1 - c), (1 - q) / 2


def geometric_sum(a: float, terms: int) -> float:
    return sum(a**k for k in range(terms))


def binomial_double_sum(a: float, b: float, terms: int) -> float:
    """``sum_m sum_k C(m, k) a^k b^(m-k)`` truncated at ``m < terms``."""
    return sum(math.comb(m, k) * a**k * b ** (m - k) for m in range(terms) for k in range(m + 1))


# --- exact first-passage analysis -------------------------------------------

def _solve(A: list[list[Fraction]], B: list[list[Fraction]]) -> list[list[Fraction]]:
    """Gauss-Jordan solve of ``A X = B`` over the rationals."""
    n = len(A)
    M = [list(A[i]) + list(B[i]) for i in range(n)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular first-passage system")
        M[col], M[piv] = M[piv], M[col]
        inv = 1 / M[col][col]
        M[col] = [v * inv for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [a - f * b for a, b in zip(M[r], M[col])]
    return [row[n:] for row in M]


@dataclass
class FirstPassageResult:
    """Exit law of one level, started from each of the eight patterns.

    ``thetas`` are the progress probabilities from ``(1,1,0)``, ``(1,0,0)``
    and ``(1,0,1)`` in that order; ``theta`` holds all eight.
    ``fundamental[i][j]`` is the expected number of visits to ``j`` from ``i``
    before the level changes, ``up``/``down`` the joint law of exit direction
    and landing pattern.
    """

    q: Fraction
    theta: dict[Pattern, Fraction]
    mean_steps: dict[Pattern, Fraction]
    up: dict[Pattern, dict[Pattern, Fraction]]
    down: dict[Pattern, dict[Pattern, Fraction]]
    fundamental: list[list[Fraction]]
    start_patterns: tuple[Pattern, ...] = THETA_STARTS

    @property
    def thetas(self) -> tuple[Fraction, Fraction, Fraction]:
        return tuple(self.theta[p] for p in self.start_patterns)


def first_passage_exact(kernel: YKernel) -> FirstPassageResult:
    Q, up, down = kernel.matrices(exact=True)
    A = [[(Fraction(1) if i == j else Fraction(0)) - Q[i][j] for j in range(8)] for i in range(8)]
    ident = [[Fraction(int(i == j)) for j in range(8)] for i in range(8)]
    N = _solve(A, ident)
    up_exit = [[sum(N[i][k] * up[k][j] for k in range(8)) for j in range(8)] for i in range(8)]
    down_exit = [[sum(N[i][k] * down[k][j] for k in range(8)) for j in range(8)] for i in range(8)]
    theta = {p: sum(up_exit[INDEX[p]]) for p in PATTERNS}
    steps = {p: sum(N[INDEX[p]]) for p in PATTERNS}
    upd = {p: {t: up_exit[INDEX[p]][INDEX[t]] for t in PATTERNS if up_exit[INDEX[p]][INDEX[t]]} for p in PATTERNS}
    dnd = {p: {t: down_exit[INDEX[p]][INDEX[t]] for t in PATTERNS if down_exit[INDEX[p]][INDEX[t]]} for p in PATTERNS}
    return FirstPassageResult(kernel.q, theta, steps, upd, dnd, N)


def kappa_exact(kernel: YKernel, fp: Optional[FirstPassageResult] = None) -> Fraction:
    """P[level drops into a good pattern, last pre-exit pattern (0,0,1) | start (1,0,1)]."""
    fp = fp or first_passage_exact(kernel)
    _, _, down = kernel.matrices(exact=True)
    via = INDEX[(0, 0, 1)]
    visits = fp.fundamental[INDEX[(1, 0, 1)]][via]
    return visits * sum(down[via][INDEX[g]] for g in GOOD)


@dataclass
class TwoLevelDrift:
    start: Pattern
    p_up2: float
    p_zero: float
    p_down2: float
    se: Optional[float] = None  # Monte Carlo standard error of the drift
    n: Optional[int] = None
    censored: int = 0

    @property
    def drift(self) -> float:
        return 2.0 * (self.p_up2 - self.p_down2)


def _two_level_exact(kernel: YKernel, start: Pattern, fp: FirstPassageResult) -> tuple[Fraction, Fraction, Fraction]:
    up2 = sum(pr * fp.theta[land] for land, pr in fp.up[start].items())
    down2 = sum(pr * (1 - fp.theta[land]) for land, pr in fp.down[start].items())
    return up2, 1 - up2 - down2, down2


def two_level_drift(kernel: YKernel, method: str = "exact", n: int = 100_000,
                    rng: Optional[np.random.Generator] = None,
                    starts: Iterable[Pattern] = GOOD, max_steps: int = 1_000_000) -> dict[Pattern, TwoLevelDrift]:
    """Law of the level change after two level changes, per good start pattern."""
    out = {}
    if method == "exact":
        fp = first_passage_exact(kernel)
        for s in starts:
            u2, z, d2 = _two_level_exact(kernel, s, fp)
            out[s] = TwoLevelDrift(s, float(u2), float(z), float(d2))
        return out
    if method != "montecarlo":
        raise ValueError(f"unknown method {method!r}")
    rng = rng if rng is not None else np.random.default_rng()
    for s in starts:
        net, censored = sample_level_changes(kernel, s, n, 2, rng, max_steps)
        ok = ~censored
        m = int(ok.sum())
        vals = net[ok]
        p2, p0, pm2 = (float(np.mean(vals == v)) for v in (2, 0, -2))
        se = float(np.std(vals, ddof=1) / math.sqrt(m)) if m > 1 else float("nan")
        out[s] = TwoLevelDrift(s, p2, p0, pm2, se, m, int(censored.sum()))
    return out


# --- sampling ---------------------------------------------------------------

def _cumulative(kernel: YKernel):
    """``(cum, targets, shifts)`` arrays, padded to the longest row."""
    width = max(len(r) for r in kernel.table.values())
    cum = np.ones((8, width))
    targets = np.zeros((8, width), dtype=np.int64)
    shifts = np.zeros((8, width), dtype=np.int64)
    for p, row in kernel.table.items():
        i = INDEX[p]
        acc = 0.0
        for j, tr in enumerate(row):
            acc += float(tr.prob)
            cum[i, j] = acc
            targets[i, j] = INDEX[tr.target]
            shifts[i, j] = tr.shift
        cum[i, len(row) - 1:] = 1.0
        targets[i, len(row):] = targets[i, len(row) - 1]
        shifts[i, len(row):] = shifts[i, len(row) - 1]
    return cum, targets, shifts


def y_step(state: YState, kernel: YKernel, rng: np.random.Generator) -> YState:
    row = kernel.table[state.bits]
    u = rng.random()
    acc = Fraction(0)
    for tr in row:
        acc += tr.prob
        if u < acc:
            return YState(state.level + tr.shift, tr.target)
    tr = row[-1]
    return YState(state.level + tr.shift, tr.target)


def sample_transitions(kernel: YKernel, pattern: Pattern, n: int, rng: np.random.Generator):
    """``n`` independent one-step moves out of ``pattern`` as ``(target_index, shift)`` arrays."""
    cum, targets, shifts = _cumulative(kernel)
    i = INDEX[pattern]
    j = np.searchsorted(cum[i], rng.random(n), side="right")
    j = np.minimum(j, cum.shape[1] - 1)
    return targets[i, j], shifts[i, j]


def sample_level_changes(kernel: YKernel, start: Pattern, n: int, changes: int,
                         rng: np.random.Generator, max_steps: int = 1_000_000):
    """Run ``n`` chains from ``start`` until ``changes`` level changes.

    Returns the net level change and a censoring mask for chains still
    running after ``max_steps`` steps.
    """
    cum, targets, shifts = _cumulative(kernel)
    width = cum.shape[1]
    pat = np.full(n, INDEX[start], dtype=np.int64)
    net = np.zeros(n, dtype=np.int64)
    seen = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    steps = 0
    while active.size and steps < max_steps:
        p = pat[active]
        j = np.minimum(np.sum(rng.random(active.size)[:, None] >= cum[p], axis=1), width - 1)
        sh = shifts[p, j]
        pat[active] = targets[p, j]
        net[active] += sh
        seen[active] += sh != 0
        active = active[seen[active] < changes]
        steps += 1
    censored = np.zeros(n, dtype=bool)
    censored[active] = True
    return net, censored


# --- reconstruction and validation ------------------------------------------

def _check_identities(kernel: YKernel) -> dict[str, bool]:
    q = kernel.q
    fp = first_passage_exact(kernel)
    t1, t2, t3 = fp.thetas
    a = kernel.cycle_weight((1, 0, 1), (0, 0, 1))
    b = kernel.cycle_weight((1, 0, 1), (1, 0, 0))
    kap = kappa_exact(kernel, fp)
    checks = {
        "cycle weight a": a == weight_a(q),
        "cycle weight b": b == weight_b(q),
        "theta1 = (1 + theta2)/2": t1 == (1 + t2) / 2,
        "theta2 recursion bound": t2 >= (1 - q) / (2 - q) * (t1 + t3),
        "theta3 recursion bound": t3 >= (t2 / 2 + (1 - q) * a / 2) / (1 - a),
        "theta1 closed-form lower bound": t1 >= theta1_lower(q),
        "theta2 closed-form lower bound": t2 >= theta2_lower(q),
        "theta3 closed-form lower bound": t3 >= theta3_lower(q),
        "1 - theta3 closed-form lower bound": 1 - t3 >= regress3_lower(q),
        "kappa closed-form lower bound": kap >= kappa_lower(q),
        "kappa <= 1 - theta3": kap <= 1 - t3,
        "level shifts within one level": kernel.shifts() <= {-1, 0, 1},
        "rows sum to one": all(sum(tr.prob for tr in row) == 1 for row in kernel.table.values()),
        "progress lands in (1,0,1)": all(tr.target == RESET_PATTERN for row in kernel.table.values()
                                         for tr in row if tr.shift == 1),
        "regress lands in (s,0,*) with P[s=0] = q": _regress_landing_ok(kernel),
    }
    return checks


def _regress_landing_ok(kernel: YKernel) -> bool:
    q = kernel.q
    for row in kernel.table.values():
        down = [tr for tr in row if tr.shift == -1]
        if not down:
            continue
        total = sum(tr.prob for tr in down)
        if any(tr.target[1] != 0 for tr in down):
            return False
        if sum(tr.prob for tr in down if tr.target[0] == 0) != q * total:
            return False
    return True


@dataclass
class Reconstruction:
    q: Fraction
    results: dict[tuple[int, str], dict[str, bool]]

    @property
    def passing(self) -> list[tuple[int, str]]:
        return [k for k, checks in self.results.items() if all(checks.values())]


def reconstruct(q: Number) -> Reconstruction:
    """Check every (virtual boundary, landing rule) candidate against all identities."""
    q = as_fraction(q)
    results = {}
    for boundary in (HEALTHY, PASSIVE):
        for landing in LANDINGS:
            results[(boundary, landing)] = _check_identities(segment_kernel(q, boundary, landing))
    return Reconstruction(q, results)


def build_y_kernel(q: Number, validate: bool = True) -> YKernel:
    """Canonical kernel: passive virtual boundary, progress lands in ``(1,0,1)``.

    This is the only candidate of :func:`reconstruct` that satisfies every
    identity on the reference grid.  With ``validate`` the identities are
    re-checked at ``q`` and a :class:`KernelConstructionError` names any
    failure.  At ``q = 0`` rows whose total rate vanishes take their ``q -> 0``
    limit.
    """
    kernel = segment_kernel(q, PASSIVE, "reset")
    if validate and 0 < kernel.q < 1:
        kernel.checks = _check_identities(kernel)
        failed = [name for name, ok in kernel.checks.items() if not ok]
        if failed:
            raise KernelConstructionError(failed, kernel.q)
    return kernel


def ychain_report_rows(grid: Iterable[Number] = DEFAULT_GRID) -> list[dict]:
    """One row per ``q``: cycle weights, thetas, kappa, drift and check outcomes."""
    rows = []
    for q in grid:
        kernel = build_y_kernel(q, validate=False)
        checks = _check_identities(kernel)
        fp = first_passage_exact(kernel)
        t1, t2, t3 = fp.thetas
        drift = two_level_drift(kernel)
        row = {
            "q": float(kernel.q),
            "a": float(kernel.cycle_weight((1, 0, 1), (0, 0, 1))),
            "b": float(kernel.cycle_weight((1, 0, 1), (1, 0, 0))),
            "theta1": float(t1), "theta2": float(t2), "theta3": float(t3),
            "kappa": float(kappa_exact(kernel, fp)),
            "drift": min(d.drift for d in drift.values()),
        }
        row.update({name: ok for name, ok in checks.items()})
        rows.append(row)
    return rows
