import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tricontact import tracker as T
from tricontact.experiments import InitialSpec, build_initial
from tricontact.lattice import Boundary, Configuration, DynamicsParams, simulate


def cfg(states, left=0, boundary=None):
    return Configuration.from_states(states, left, boundary)


def block_run(q, seed, horizon=60.0, radius=40):
    c = build_initial(radius, InitialSpec("block", 5, "periodic", spacing=4), Boundary.passive())
    return simulate(c, DynamicsParams(q), horizon, seed)


# --- phi ----------------------------------------------------------------------

def test_phi_example():
    x = T.phi(cfg([2, 2, 0, 1, 1, 0, 1], left=10))
    assert x.level == 11
    assert x.bits == (0, 1, 1, 0)
    assert not x.truncated
    assert not x.good and not x.progressed
    assert T.XState(0, (1, 0, 0, 1)).good and T.XState(0, (1, 0, 0, 1)).progressed


def test_phi_reads_boundary_and_flags_truncation():
    x = T.phi(cfg([1, 2, 1], boundary=Boundary.healthy()))
    assert x.bits == (1, 0, 0, 0)
    assert x.truncated


def test_phi_none_without_infection():
    assert T.phi(cfg([0, 1, 1])) is None


@given(st.integers(0, 15))
def test_code_roundtrip(code):
    assert T.encode_bits(T.decode_bits(code)) == code
    assert T.XState.from_code(0, code).boundary_bit == code & 1


@pytest.mark.parametrize("q,seed", [(0.05, 1), (0.5, 2), (0.9, 3)])
def test_recorded_code_matches_snapshot(q, seed):
    traj = block_run(q, seed, horizon=10.0)
    idx = np.linspace(0, len(traj) - 1, 40).astype(int)
    for k in idx:
        snap = traj.snapshot(float(traj.times[k]))
        x = T.phi(snap)
        if x is None:
            assert traj.phi_code[k] == -1
            continue
        assert x.level == traj.right_idx[k] + traj.initial.left
        if not x.truncated:
            assert x.code == traj.phi_code[k]


# --- embedded chain -----------------------------------------------------------

@pytest.mark.parametrize("q", [0.02, 0.3, 0.8])
def test_embedded_chain_has_no_self_loops(q):
    for seed in range(5):
        ch = T.embedded_chain(block_run(q, seed))
        assert len(ch) >= 1
        same = (np.diff(ch.level) == 0) & (np.diff(ch.code) == 0)
        assert not same.any()
        assert np.all(np.abs(np.diff(ch.level)) <= 1) or ch.extinct


def test_embedded_chain_empty_for_no_infection():
    traj = simulate(cfg([0, 1, 1, 0]), DynamicsParams(0.3), 5.0, 1)
    ch = T.embedded_chain(traj)
    assert len(ch) == 0 and ch.extinct


# --- stable windows -----------------------------------------------------------

@pytest.mark.parametrize("q", [0.05, 0.6])
def test_stable_windows_tile_and_keep_boundary_bit(q):
    for seed in range(4):
        traj = block_run(q, seed)
        ws = T.stable_windows(traj)
        assert ws[0].start == 0.0
        for a, b in zip(ws, ws[1:]):
            assert a.end == b.start
        if ws[-1].extinct:
            assert ws[-1].end == traj.extinction_time()
        else:
            assert ws[-1].end == traj.horizon and ws[-1].close_reason == T.HORIZON
        last = ws[-1].close_event if ws[-1].extinct else len(traj)
        ends = np.array([w.close_event for w in ws[:-1]] + [last])
        starts = np.concatenate(([0], ends[:-1] + 1))
        for w, s, e in zip(ws, starts, ends):
            inside = traj.phi_code[s:e]
            assert np.all((inside & 1) == w.initial_state.boundary_bit)
            if w.close_reason == T.RIGHTMOST_MOVED:
                assert traj.right_idx[w.close_event] != traj.right_before()[w.close_event]


# --- level changes and intervals ---------------------------------------------

def test_level_changes_match_rightmost_moves():
    traj = block_run(0.1, 7)
    lc = T.level_changes(traj)
    rb = traj.right_before()
    moved = np.flatnonzero(traj.right_idx != rb)
    assert np.array_equal(lc.event, moved)
    alive = traj.right_idx[lc.event] >= 0
    assert np.array_equal(lc.sign[alive], np.sign(traj.right_idx[lc.event] - rb[lc.event])[alive])


def test_runs_from_signs_example():
    assert T.runs_from_signs([1, 1, -1, 1]) == ([2, 1], [1])


@given(st.lists(st.sampled_from([-1, 1]), max_size=60))
def test_runs_partition_signs(signs):
    prog, regr = T.runs_from_signs(signs)
    assert sum(prog) + sum(regr) == len(signs)
    assert sum(prog) == signs.count(1)
    assert abs(len(prog) - len(regr)) <= 1


def make_lc(signs, extinct=False):
    m = len(signs)
    return T.LevelChanges(np.arange(m), np.arange(1.0, m + 1), np.array(signs), np.full(m, 9),
                          np.full(m, 3), np.zeros(m, bool), 9, False, extinct, m + 1.0)


def test_interval_decomposition_flags():
    st_ = T.interval_decomposition(make_lc([1, 1, -1, 1]))
    assert [(iv.kind, iv.length) for iv in st_.intervals] == [(1, 2), (-1, 1), (1, 1)]
    assert st_.intervals[0].first and st_.intervals[-1].censored
    assert [iv.length for iv in st_.usable()] == [1]
    done = T.interval_decomposition(make_lc([1, -1, -1], extinct=True))
    assert not done.intervals[-1].censored


def test_alpha_values():
    assert T.alpha_formula(0.99) == pytest.approx(0.99 / (1.01 * 1.03), rel=1e-12)
    assert T.alpha_formula(0.99) == pytest.approx(0.9517, abs=1e-4)
    qs = np.linspace(0.5, 0.999, 200)
    vals = [T.alpha_formula(float(q)) for q in qs]
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(ValueError):
        T.alpha_formula(1.0)


def test_q_one_never_progresses():
    traj = block_run(1.0, 4, horizon=30.0)
    lc = T.level_changes(traj)
    assert len(lc) > 0 and np.all(lc.sign == -1)


def test_extinction_is_absorbing():
    for seed in range(10):
        traj = block_run(0.9, seed, horizon=40.0)
        ext = traj.extinction_time()
        if ext is not None:
            k = traj.n_events_until(ext)
            assert np.all(traj.n_infected[k - 1:] == 0)
            assert np.all(traj.right_idx[k - 1:] == -1)


# --- episodes -----------------------------------------------------------------

def test_episodes_align_with_level_changes():
    traj = block_run(0.05, 11, horizon=40.0)
    lc = T.level_changes(traj)
    eps = T.episodes(traj, start_before=20.0)
    assert len(eps.outcome) == len(lc)
    assert np.all(eps.start_time[eps.valid] < 20.0)
    assert eps.censored == int(not lc.extinct and (lc.time[-1] if len(lc) else 0.0) < 20.0)


def test_episodes_without_moves_are_censored():
    traj = simulate(cfg([1, 1, 2, 2, 1, 1, 1, 1]), DynamicsParams(0.0), 1e-9, 0)
    eps = T.episodes(traj)
    assert len(eps.outcome) == 0 and eps.censored == 1


def test_progress_probability_reference():
    eps = T.Episodes(np.array([0b1010, 0b0010, 0b1011]), np.zeros(3), np.array([1, -1, 1]),
                     np.array([True, True, True]))
    theta = np.arange(8) / 10
    est = T.progress_probability(eps, 0.1, 0, min_samples=1, theta=theta)
    assert est.n == 2 and est.progress == 0.5
    assert est.reference == pytest.approx((theta[0b101] + theta[0b001]) / 2)
    assert not est.insufficient
    empty = T.progress_probability(eps, 0.1, 1, min_samples=5, theta=theta)
    assert empty.n == 1 and empty.insufficient


def test_ratio_slope():
    s, se = T.ratio_slope([1, 2, 3], [1, 2, 3])
    assert s == 1.0 and se == pytest.approx(0.0, abs=1e-12)
    assert math.isnan(T.ratio_slope([1], [1])[0])
