"""Clock rings shared by every copy of a run.

Ring times are independent of the configuration, so a run is split into two
stages: draw the complete ring schedule (per-site Exp(1) inter-arrival times
merged into one global time order, one uniform per ring), then push any
number of configurations through it.  Coupled runs are just two
configurations fed the same schedule.
"""
from __future__ import annotations

import math
import zlib

import numpy as np


def rng_from_seed(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def _key_word(k) -> int:
    if isinstance(k, str):
        return zlib.crc32(k.encode("utf-8"))
    return int(k)


def derive_seed(master: int, *key) -> int:
    """Independent 64-bit seed for ``key`` (e.g. ``(q_index, replica)``).

    String parts tag separate streams and are mapped through CRC-32.
    """
    ss = np.random.SeedSequence(int(master) & 0xFFFFFFFFFFFFFFFF,
                                spawn_key=tuple(_key_word(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0])


def ring_times(n_sites: int, horizon: float, rng: np.random.Generator) -> list[np.ndarray]:
    """Per-site ring times in ``(0, horizon]``."""
    k = int(math.ceil(horizon + 6.0 * math.sqrt(horizon) + 10))
    t = np.cumsum(rng.standard_exponential((n_sites, k)), axis=1)
    last = t[:, -1]
    out = [None] * n_sites
    short = np.flatnonzero(last <= horizon)
    for i in np.flatnonzero(last > horizon):
        row = t[i]
        out[i] = row[: np.searchsorted(row, horizon, side="right")]
    # rare: extend sites whose block ran out before the horizon
    for i in short:
        row = t[i]
        while row[-1] <= horizon:
            row = np.concatenate((row, row[-1] + np.cumsum(rng.standard_exponential(k))))
        out[i] = row[: np.searchsorted(row, horizon, side="right")]
    return out


def ring_schedule(n_sites: int, horizon: float, rng: np.random.Generator):
    """All rings in ``(0, horizon]`` as ``(times, site_index, draws)``.

    Rings are ordered by time; exact ties are broken by site index.
    """
    per_site = ring_times(n_sites, horizon, rng)
    counts = np.fromiter((len(r) for r in per_site), dtype=np.int64, count=n_sites)
    times = np.concatenate(per_site) if n_sites else np.empty(0)
    sites = np.repeat(np.arange(n_sites, dtype=np.int64), counts)
    order = np.lexsort((sites, times))
    times, sites = times[order], sites[order]
    draws = rng.random(len(times))
    return times, sites, draws
