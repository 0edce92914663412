import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tricontact import fa1f as F
from tricontact.lattice import Boundary, DomainError, DynamicsParams, simulate
from tricontact.schedule import rng_from_seed


def conf(bits, left=0, boundary=None):
    return F.FA1fConfig(left, np.array(bits), boundary or Boundary.healthy())


# --- single-site rule ---------------------------------------------------------

def test_step_constrained_site_is_frozen():
    c = conf([1, 1, 1], boundary=Boundary.passive())
    assert F.fa1f_step(c, 1, 0.0, 0.5) == c


def test_step_facilitated_site_resamples():
    c = conf([0, 1, 1], boundary=Boundary.passive())
    assert F.fa1f_step(c, 1, 0.2, 0.5).bits.tolist() == [0, 0, 1]
    assert F.fa1f_step(c, 1, 0.7, 0.5).bits.tolist() == [0, 1, 1]


def test_step_uses_healthy_boundary():
    c = conf([1, 1])
    assert F.fa1f_step(c, 0, 0.1, 0.5).bits.tolist() == [0, 1]


def test_binary_only():
    with pytest.raises(DomainError):
        conf([0, 2, 1])
    with pytest.raises(DomainError):
        conf([0, 1], boundary=Boundary(2, 1))


@pytest.mark.parametrize("q", [0.3, 0.8])
def test_lattice_run_is_fa1f_on_binary_states(q):
    c = F.sample_product_measure(0, 25, q, rng_from_seed(5))
    traj = simulate(c.to_lattice(), DynamicsParams(q), 15.0, 9)
    cur = c
    for t, x, u, new in traj.events():
        cur = F.fa1f_step(cur, x, u, q)
        assert cur[x] == new
    assert np.array_equal(cur.bits, traj.final.states)


# --- four-state encoding ------------------------------------------------------

@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=40))
def test_four_state_roundtrip(pairs):
    eta = np.array([p[0] for p in pairs], dtype=np.int8)
    tilde = np.array([p[1] for p in pairs], dtype=np.int8)
    codes = F.encode_pair(eta, tilde)
    e2, t2 = F.decode_codes(codes)
    assert np.array_equal(e2, eta) and np.array_equal(t2, tilde)
    fs = F.FourStateConfig.from_pair(conf(eta), conf(tilde))
    assert np.array_equal(fs.discrepancies(), np.flatnonzero(eta != tilde))


def test_four_state_labels():
    fs = F.FourStateConfig.from_pair(conf([0, 1, 0, 1]), conf([0, 1, 1, 0]))
    assert fs.labels() == ["0", "1", "2↓", "2↑"]


# --- coupling -----------------------------------------------------------------

def test_identical_copies_stay_identical():
    c = F.sample_product_measure(0, 80, 0.7, rng_from_seed(1))
    run = F.couple_two_copies(c, c, 0.7, 20.0, 3)
    assert np.all(run.discrepancy_counts() == 0)
    assert run.absorbed()


def test_discrepancy_counts_match_snapshots():
    rng = rng_from_seed(4)
    a = F.sample_product_measure(0, 40, 0.6, rng)
    b = F.sample_product_measure(0, 40, 0.6, rng)
    run = F.couple_two_copies(a, b, 0.6, 10.0, 8)
    counts = run.discrepancy_counts()
    for k in np.linspace(0, len(run.eta) - 1, 25).astype(int):
        t = float(run.eta.times[k])
        fs = run.four_state(t)
        assert counts[k + 1] == len(fs.discrepancies())
    assert run.absorbed() or counts[-1] > 0


@pytest.mark.parametrize("q", [0.7, 0.9])
def test_discrepancies_inside_three_state_infection(q):
    for seed in range(30):
        rng = rng_from_seed(100 + seed)
        a = F.sample_product_measure(0, 40, q, rng)
        b = F.sample_product_measure(0, 40, q, rng)
        assert F.domination_check(a, b, q, 15.0, seed).ok


def test_coupling_needs_same_geometry():
    with pytest.raises(DomainError):
        F.couple_two_copies(conf([0, 1]), conf([0, 1, 1]), 0.5, 1.0, 0)


def test_discrepancy_density_small_at_large_q():
    d = F.discrepancy_density(0.9, 300, 30.0, 10, 2)
    assert d.mean[-1] < 0.01


# --- product measure ----------------------------------------------------------

def test_product_measure_extremes():
    rng = rng_from_seed(0)
    assert np.all(F.sample_product_measure(0, 100, 0.0, rng).bits == 1)
    assert np.all(F.sample_product_measure(0, 100, 1.0, rng).bits == 0)
    with pytest.raises(DomainError):
        F.sample_product_measure(0, 10, 1.5, rng)


def test_product_measure_density():
    n, q = 10**6, 0.3
    c = F.sample_product_measure(0, n, q, rng_from_seed(7))
    p0 = np.mean(c.bits == 0)
    assert abs(p0 - q) <= 3 * math.sqrt(q * (1 - q) / n)


def test_occupation_matches_product_measure():
    assert F.occupation_check(0.6, 3e4, 11, batches=50).ok


# --- distance to the nearest healthy site ------------------------------------

def test_xi_at_time_zero():
    c = F.single_zero_config(10, 40)
    assert F.xi(c) == 10
    curve = F.xi_drift_experiment(c, 0, 0.75, [0.0], 3, 1)
    assert curve.mean[0] == 10 and curve.kappa == 10


def test_xi_bound_shape():
    assert F.xi_bound(10, 16, 0.75) == 2
    assert F.xi_bound(10, 100, 0.75) == 1
    assert np.all(F.xi_bound(7, np.array([0, 5, 50]), 0.5) == 7)


def test_xi_comparison_suppressed_at_or_below_half():
    curve = F.xi_drift_experiment(F.single_zero_config(5, 30), 0, 0.5, [1.0, 2.0], 5, 0)
    assert not curve.comparable and curve.passes() is None


def test_single_zero_config_validation():
    with pytest.raises(DomainError):
        F.single_zero_config(50, 10)


# --- simplified walk ----------------------------------------------------------

def test_walk_floor_at_zero():
    p = F.simplified_boundary_process(0, 1.0, 50.0, 3)
    assert np.all(p.path() >= 0)
    assert p.position() == 0 and len(p.steps) == 0


def test_walk_steps_are_unit():
    p = F.simplified_boundary_process(20, 0.6, 30.0, 4)
    assert set(np.unique(p.steps).tolist()) <= {F.ADVANCE, F.RETREAT}
    assert np.all(np.diff(p.times) >= 0)
    assert p.position() == p.path()[-1]


def test_wald_zero_drift_at_half():
    w = F.wald_check(0.5, 20.0, 4000, 1)
    assert w.expected == 0.0 and w.wald_ok


def test_wald_identity_and_counts():
    w = F.wald_check(0.75, 20.0, 4000, 2)
    assert w.expected == -10.0
    assert w.wald_ok and w.count_ok
    assert w.count_var == pytest.approx(20.0, rel=0.1)


def test_step_law_binomial():
    w = F.wald_check(0.75, 30.0, 4000, 3)
    assert w.n_changes >= 10**5
    assert w.step_law_ok


def test_binomial_pvalue_sanity():
    assert F.binomial_two_sided_pvalue(50, 100, 0.5) == 1.0
    assert F.binomial_two_sided_pvalue(80, 100, 0.5) < 1e-6


def test_walk_dominates_true_distance():
    for seed in range(40):
        assert F.walk_domination(10, 0.75, 16.0, seed, 40).ok
