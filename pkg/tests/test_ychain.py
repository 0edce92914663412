from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tricontact import ychain as Y
from tricontact.schedule import rng_from_seed

GRID = Y.DEFAULT_GRID


@pytest.fixture(scope="module")
def kernels():
    return {q: Y.build_y_kernel(q) for q in GRID}


def test_cycle_weight_a_at_zero():
    k = Y.build_y_kernel(0)
    assert k.cycle_weight((1, 0, 1), (0, 0, 1)) == Fraction(1, 6)
    assert k.cycle_weight((1, 0, 1), (1, 0, 0)) == Fraction(1, 4)


def test_cycle_weight_b_at_tenth():
    k = Y.build_y_kernel(0.1)
    assert float(k.cycle_weight((1, 0, 1), (1, 0, 0))) == pytest.approx(0.9 / 3.8, abs=1e-15)
    assert k.cycle_weight((1, 0, 1), (1, 0, 0)) == Fraction(9, 38)


def test_cycle_weights_vanish_at_one():
    assert Y.weight_a(1) == 0 and Y.weight_b(1) == 0
    k = Y.build_y_kernel(Fraction(999, 1000))
    assert k.cycle_weight((1, 0, 1), (0, 0, 1)) < Fraction(1, 1000)


def test_exact_fraction_parsing():
    assert Y.as_fraction(0.1) == Fraction(1, 10)
    assert Y.as_fraction(Fraction(1, 3)) == Fraction(1, 3)


def test_kernel_invariants(kernels):
    for q, k in kernels.items():
        for row in k.table.values():
            assert sum(tr.prob for tr in row) == 1
            assert all(tr.prob > 0 for tr in row)
        assert k.shifts() <= {-1, 0, 1}
        assert all(k.checks.values()), (q, k.checks)


def test_identities_on_grid(kernels):
    for q, k in kernels.items():
        fp = Y.first_passage_exact(k)
        t1, t2, t3 = fp.thetas
        assert t1 == (1 + t2) / 2
        a = Y.weight_a(q)
        assert t2 >= (1 - Y.as_fraction(q)) / (2 - Y.as_fraction(q)) * (t1 + t3)
        assert t3 >= (t2 / 2 + a * (1 - Y.as_fraction(q)) / 2) / (1 - a)
        assert t1 >= Y.theta1_lower(q) and t2 >= Y.theta2_lower(q) and t3 >= Y.theta3_lower(q)
        assert 1 - t3 >= Y.regress3_lower(q)
        kap = Y.kappa_exact(k, fp)
        assert kap >= Y.kappa_lower(q)
        assert kap <= 1 - t3
        assert all(0 <= v <= 1 for v in fp.theta.values())


def test_printed_bounds_at_zero():
    assert Y.theta2_lower(0) == Fraction(2, 3)
    assert 1 - Y.regress3_lower(0) == Fraction(4, 7)
    assert Y.kappa_lower(0) == Fraction(2, 7)
    assert float(Y.kappa_lower(0.1)) == pytest.approx(1.71 / 6.7, abs=1e-12)
    assert float(Y.kappa_lower(0.1)) == pytest.approx(0.25522, abs=1e-5)


def test_path_sums_simplify_to_closed_forms():
    for q in (Fraction(1, 100), Fraction(1, 7), Fraction(1, 2)):
        assert Y.regress3_paths(q) == Y.regress3_lower(q)
        assert Y.kappa_paths(q) == Y.kappa_lower(q)


def test_theta3_approaches_half_from_below():
    vals = [Y.first_passage_exact(Y.build_y_kernel(q)).thetas[2] for q in (0.05, 0.01, 0.001)]
    assert all(v < Fraction(1, 2) for v in vals)
    assert vals[0] < vals[1] < vals[2]
    assert Fraction(499, 1000) < vals[2] < Fraction(4, 7)


def test_reconstruction_is_unique():
    for q in (0.001, 0.05, 0.2, 0.9):
        rec = Y.reconstruct(q)
        assert rec.passing == [(Y.PASSIVE, "reset")]


def test_construction_error_names_identity(monkeypatch):
    real = Y.segment_kernel
    monkeypatch.setattr(Y, "segment_kernel", lambda q, boundary=Y.PASSIVE, landing="reset":
                        real(q, Y.HEALTHY, landing))
    with pytest.raises(Y.KernelConstructionError) as err:
        Y.build_y_kernel(0.1)
    assert "theta1 = (1 + theta2)/2" in err.value.failed


def test_drift_positive_small_q():
    for q in (0.001, 0.005, 0.01, 0.02, 0.05):
        for start, d in Y.two_level_drift(Y.build_y_kernel(q)).items():
            assert d.drift > 0, (q, start)
            assert d.p_up2 + d.p_zero + d.p_down2 == pytest.approx(1)


def test_double_progress_near_zero():
    d = Y.two_level_drift(Y.build_y_kernel(0.001))
    assert d[(1, 0, 1)].p_up2 >= 0.2401


def test_drift_montecarlo_matches_exact():
    k = Y.build_y_kernel(0.01)
    exact = Y.two_level_drift(k)
    mc = Y.two_level_drift(k, "montecarlo", 20_000, rng_from_seed(3))
    for s in Y.GOOD:
        assert abs(mc[s].drift - exact[s].drift) <= 3 * mc[s].se
        assert mc[s].censored == 0


def test_drift_unknown_method():
    with pytest.raises(ValueError):
        Y.two_level_drift(Y.build_y_kernel(0.1), method="bogus")


def test_y_step_frequency():
    k = Y.build_y_kernel(0.1)
    n = 10**6
    tgt, sh = Y.sample_transitions(k, (1, 0, 1), n, rng_from_seed(1))
    p = float(k.prob((1, 0, 1), (0, 0, 1)))
    f = np.mean(tgt == Y.INDEX[(0, 0, 1)])
    assert abs(f - p) <= 3 * np.sqrt(p * (1 - p) / n)
    assert np.all(np.abs(sh) <= 1)


def test_y_step_single_edge_row():
    k = Y.build_y_kernel(0.1)
    rng = rng_from_seed(2)
    for _ in range(50):
        s = Y.y_step(Y.YState(5, (1, 1, 1)), k, rng)
        assert s == Y.YState(6, (1, 0, 1))


@given(st.integers(-50, 50), st.sampled_from(Y.PATTERNS), st.integers(0, 2**32))
@settings(max_examples=100, deadline=None)
def test_y_step_level_moves_at_most_one(level, bits, seed):
    k = Y.build_y_kernel(0.2)
    s = Y.y_step(Y.YState(level, bits), k, rng_from_seed(seed))
    assert abs(s.level - level) <= 1


def test_ystate_validates_bits():
    with pytest.raises(ValueError):
        Y.YState(0, (1, 2, 0))


def test_geometric_identities():
    for a in (0.1, 1 / 6, 0.4):
        assert Y.geometric_sum(a, 200) == pytest.approx(1 / (1 - a), rel=1e-12)
    a, b = 1 / 6, 1 / 4
    assert Y.binomial_double_sum(a, b, 120) == pytest.approx(1 / (1 - a - b), rel=1e-12)


def test_healthy_boundary_identity_grid():
    for q in np.linspace(0.005, 0.995, 100):
        lhs, rhs = Y.healthy_boundary_identity(float(q))
        assert abs(lhs - rhs) <= 1e-12
    k = Y.segment_kernel(0.1, Y.HEALTHY)
    assert k.cycle_weight((0, 1, 1), (0, 1, 0)) == Y.healthy_cycle_weight(0.1)


def test_report_rows_columns():
    rows = Y.ychain_report_rows([0.01, 0.1])
    for c in ("q", "a", "b", "theta1", "theta2", "theta3", "kappa", "drift"):
        assert c in rows[0]
    assert rows[0]["drift"] > 0
