import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdprm.statistics import (
    ConfidenceParams,
    CountTables,
    bernstein_gap,
    bernstein_half_width,
    bernstein_root,
    beta_l1,
    effective,
    ell_peeling,
    empirical_p,
    empirical_tau,
    flat_bernstein_box,
    flat_l1,
    product_bernstein_box,
    product_center,
    product_l1_radius,
    reward_bonus,
    surrogate_interval_bernstein,
    surrogate_radius_l1,
)

# High-precision reference values (mpmath, 40 digits), frozen.
BETA_1_005_2 = 4.017687416608668403917689176368656960054
ELL_100_005_112 = 11.68326532167566081052738332118065839075
BONUS_1_01 = 1.627623630718729255058196646277782966996
ROOT_UP = 0.6658310289751735682074962389864024408711
ROOT_LO = 0.3341689710248264317925037610135975591289


def mp_beta(n, delta, m):
    n, delta = mp.mpf(n), mp.mpf(delta)
    return mp.sqrt(2 / n * (1 + 1 / n) * mp.log(mp.sqrt(n + 1) * (mp.mpf(2) ** m - 2) / delta))


def mp_ell(n, delta, eta):
    n, delta, eta = mp.mpf(n), mp.mpf(delta), mp.mpf(eta)
    return eta * mp.log(mp.log(n + 1) * mp.log(n * eta) / (delta * mp.log(eta) ** 2))


# ---------------------------------------------------------------- counts


def test_single_record():
    c = CountTables(3, 2, 2, 3)
    c.record(q=1, o=2, a=1, sigma=2, r=0.5, o_next=0, q_next=0)
    assert c.N_oa.sum() == 1 and c.N_oa[2, 1] == 1
    assert c.N_oao.sum() == 1 and c.N_oao[2, 1, 0] == 1
    assert c.N_qsq[1, 2, 0] == 1 and c.reward_sum[1, 2] == 0.5
    assert c.N_sa[1 * 3 + 2, 1] == 1 and c.N_sas[5, 1, 0] == 1


def test_repeated_record_empirical():
    c = CountTables(2, 1, 1, 2)
    for _ in range(7):
        c.record(0, 0, 0, 1, 0.0, 1, 0)
    np.testing.assert_array_equal(empirical_p(c, 0, 0), [0.0, 1.0])


def test_unvisited_is_zero():
    c = CountTables(3, 2, 2, 2)
    np.testing.assert_array_equal(empirical_p(c, 1, 1), np.zeros(3))
    np.testing.assert_array_equal(empirical_tau(c, 0, 1), np.zeros(2))
    assert effective(0) == 1


def test_three_one_split():
    c = CountTables(2, 1, 1, 1)
    for o2 in (0, 0, 0, 1):
        c.record(0, 0, 0, 0, 0.0, o2, 0)
    np.testing.assert_allclose(empirical_p(c, 0, 0), [0.75, 0.25])
    np.testing.assert_allclose(empirical_p(c)[0, 0], [0.75, 0.25])


def test_replay_consistency(laundry):
    import random

    from mdprm.labeled_mdp import JointState, step_env

    rng = random.Random(5)
    c = CountTables(laundry.O, laundry.A, laundry.Q, laundry.rm.alphabet_size)
    s = JointState(*laundry.init)
    seen = {}
    for _ in range(1000):
        a = rng.randrange(laundry.A)
        tr = step_env(laundry, s, a, rng)
        c.record(s.q, s.o, a, tr.label, tr.reward, tr.o_next, tr.q_next)
        seen[(s.o, a, tr.o_next)] = seen.get((s.o, a, tr.o_next), 0) + 1
        assert c.rows_consistent()
        s = JointState(tr.q_next, tr.o_next)
    for (o, a, o2), k in seen.items():
        assert empirical_p(c, o, a)[o2] == pytest.approx(k / c.N_oa[o, a])


def test_copy_is_independent():
    c = CountTables(2, 1, 1, 1)
    d = c.copy()
    c.record(0, 0, 0, 0, 1.0, 1, 0)
    assert d.t == 0 and d.N_oa.sum() == 0


# ---------------------------------------------------------------- radii


def test_beta_reference_value():
    assert beta_l1(1, 0.05, 2) == pytest.approx(BETA_1_005_2, rel=1e-14)


@pytest.mark.parametrize("n,delta,m", [(1, 0.1, 3), (17, 0.01, 5), (1000, 1e-4, 9), (10**6, 0.05, 40)])
def test_beta_matches_mpmath(n, delta, m):
    mp.mp.dps = 40
    assert beta_l1(n, delta, m) == pytest.approx(float(mp_beta(n, delta, m)), rel=1e-12)


def test_beta_large_support_no_overflow():
    mp.mp.dps = 60
    assert beta_l1(50, 0.05, 2000) == pytest.approx(float(mp_beta(50, 0.05, 2000)), rel=1e-12)


def test_beta_monotone():
    n = np.arange(1, 10**6 + 1)
    assert np.all(np.diff(beta_l1(n, 0.05, 4)) < 0)


def test_beta_scaling():
    n = 10**6
    assert beta_l1(4 * n, 0.05, 3) / beta_l1(n, 0.05, 3) == pytest.approx(0.5, rel=0.05)


def test_beta_rejects_bad_args():
    with pytest.raises(ValueError):
        beta_l1(0, 0.05, 2)
    with pytest.raises(ValueError):
        beta_l1(1, 0.05, 1)


def test_ell_reference_value():
    assert ell_peeling(100, 0.05, 1.12) == pytest.approx(ELL_100_005_112, rel=1e-14)


@pytest.mark.parametrize("n,delta,eta", [(2, 0.1, 1.12), (100, 1e-3, 1.5), (10**5, 0.05, 2.0)])
def test_ell_matches_mpmath(n, delta, eta):
    mp.mp.dps = 40
    assert ell_peeling(n, delta, eta) == pytest.approx(float(mp_ell(n, delta, eta)), rel=1e-12)


def test_ell_monotone_in_inverse_delta():
    deltas = np.geomspace(0.5, 1e-8, 50)
    vals = ell_peeling(100, deltas)
    assert np.all(np.diff(vals) > 0)


def test_ell_eta_sensitivity():
    assert ell_peeling(10**4, 0.05, 2.0) != pytest.approx(ell_peeling(10**4, 0.05, 1.12), rel=1e-3)


def test_ell_clamped_at_small_n():
    # log(2) log(1.12) / (delta log^2 1.12) < e only for large delta; the clamp keeps the value >= eta
    assert ell_peeling(1, 0.99, 1.12) >= 1.12


def test_bonus_reference_value():
    assert reward_bonus(1, 0.1) == pytest.approx(BONUS_1_01, rel=1e-14)


def test_bonus_halves():
    n = 10**7
    assert reward_bonus(4 * n, 0.1) / reward_bonus(n, 0.1) == pytest.approx(0.5, rel=0.05)


def test_bonus_time_uniform_coverage():
    rng = np.random.default_rng(2)
    runs, n_max, delta = 500, 10**4, 0.1
    x = rng.random((runs, n_max)) < 0.3
    n = np.arange(1, n_max + 1)
    means = np.cumsum(x, 1) / n
    ever_below = (means + reward_bonus(n, delta) < 0.3).any(1)
    assert ever_below.mean() <= delta


# ---------------------------------------------------------------- bernstein roots


def test_root_at_zero_lower():
    assert bernstein_root(0.0, 10, 3.0, "lower") == 0.0


def test_roots_shrink():
    for side in ("upper", "lower"):
        assert abs(bernstein_root(0.3, 1e8, 5.0, side) - 0.3) < 1e-3


def test_roots_reference():
    assert bernstein_root(0.5, 100, 5, "upper") == pytest.approx(ROOT_UP, abs=1e-15)
    assert bernstein_root(0.5, 100, 5, "lower") == pytest.approx(ROOT_LO, abs=1e-15)


def test_roots_grid_search():
    u = np.linspace(0.0, 1.0, 10**7 + 1)
    g = bernstein_gap(u, 0.5, 100, 5)
    sign_change = np.flatnonzero(np.diff(np.sign(g)) != 0)
    lo_grid, up_grid = u[sign_change[0]], u[sign_change[-1]]
    assert bernstein_root(0.5, 100, 5, "lower") == pytest.approx(lo_grid, abs=1e-6)
    assert bernstein_root(0.5, 100, 5, "upper") == pytest.approx(up_grid, abs=1e-6)


def quadratic_roots(p, n, ell):
    """Closed form: squaring |p - u| - c = sqrt(k u (1 - u) / 2) with c = ell/3n, k = 2 ell/n."""
    c, k = ell / (3 * n), 2 * ell / n

    def root(e, sign):
        # (1 + k) u^2 - (2e + k) u + e^2 = 0; discriminant k (k + 4 e (1 - e))
        return ((2 * e + k) + sign * math.sqrt(k * (k + 4 * e * (1 - e)))) / (2 * (1 + k))

    e_up, e_lo = p + c, p - c
    return root(e_lo, -1) if e_lo > 0 else 0.0, root(e_up, 1) if e_up < 1 else 1.0


@settings(max_examples=300)
@given(st.floats(0, 1), st.integers(1, 10**7), st.floats(0.1, 50))
def test_roots_match_quadratic(p, n, ell):
    lo, up = quadratic_roots(p, n, ell)
    assert bernstein_root(p, n, ell, "lower") == pytest.approx(lo, abs=1e-9)
    assert bernstein_root(p, n, ell, "upper") == pytest.approx(up, abs=1e-9)


@settings(max_examples=200)
@given(st.floats(0, 1), st.integers(1, 10**6), st.floats(0.1, 50))
def test_roots_bracket_estimate(p, n, ell):
    lo = bernstein_root(p, n, ell, "lower")
    up = bernstein_root(p, n, ell, "upper")
    assert 0.0 <= lo <= p <= up <= 1.0


def test_root_vectorized_matches_scalar():
    rng = np.random.default_rng(0)
    p, n, ell = rng.random(50), rng.integers(1, 1000, 50), rng.uniform(1, 10, 50)
    vec = bernstein_root(p, n, ell, "upper")
    assert all(vec[i] == bernstein_root(p[i], n[i], ell[i], "upper") for i in range(50))


# ---------------------------------------------------------------- surrogate sets


def test_l1_radius_unvisited():
    c = CountTables(3, 2, 4, 3)
    prm = ConfidenceParams(delta=0.05)
    r = surrogate_radius_l1(c, prm, 0, 0, 0, 1, E=2)
    assert r == pytest.approx(beta_l1(1, 0.05 / 12, 3) + beta_l1(1, 0.05 / 16, 4))


def test_l1_radius_additive_and_shrinks():
    c = CountTables(3, 2, 4, 3)
    prm = ConfidenceParams(delta=0.05)
    c.N_oa[0, 0], c.N_qs[1, 2] = 10**6, 10**6
    r1 = surrogate_radius_l1(c, prm, 0, 0, 1, 2, E=2)
    assert r1 == pytest.approx(beta_l1(10**6, 0.05 / 12, 3) + beta_l1(10**6, 0.05 / 16, 4))
    c.N_oa[0, 0], c.N_qs[1, 2] = 4 * 10**6, 4 * 10**6
    assert surrogate_radius_l1(c, prm, 0, 0, 1, 2, E=2) / r1 == pytest.approx(0.5, rel=0.05)


def test_bernstein_interval_unvisited():
    c = CountTables(2, 1, 2, 2)
    prm = ConfidenceParams(delta=0.05, mode="bernstein")
    labels = np.array([[1], [1]])
    lo, hi = surrogate_interval_bernstein(c, prm, 0, 0, 1, labels, E=1)
    f = bernstein_half_width(0.0, 1, 0.0, 1, prm, 2, 1, 2, 1)
    assert (lo, hi) == (0.0, min(1.0, f))


def test_bernstein_width_monotone_in_counts():
    prm = ConfidenceParams()
    widths = [bernstein_half_width(0.4, n, 0.7, m, prm, 3, 2, 3, 2) for n, m in [(5, 5), (10, 5), (10, 10), (100, 10), (100, 200)]]
    assert all(b <= a for a, b in zip(widths, widths[1:]))


def random_counts(rng, O, A, Q, L, n):
    c = CountTables(O, A, Q, L)
    for _ in range(n):
        o, a, q, s = rng.integers(O), rng.integers(A), rng.integers(Q), rng.integers(1, L)
        c.record(q, o, a, s, 0.0, rng.integers(O), rng.integers(Q))
    return c


def test_product_center_entries():
    rng = np.random.default_rng(3)
    c = random_counts(rng, 3, 2, 2, 3, 200)
    labels = np.array([[1, 0], [2, 1], [0, 2]])
    ctr = product_center(c.N_oa, c.N_oao, c.N_qs, c.N_qsq, labels)
    ph, th = empirical_p(c), empirical_tau(c)
    for q in range(2):
        for o in range(3):
            for a in range(2):
                sig = labels[o, a]
                t_row = np.eye(2)[q] if sig == 0 else th[q, sig]
                for q2 in range(2):
                    for o2 in range(3):
                        assert ctr[q * 3 + o, a, q2 * 3 + o2] == pytest.approx(ph[o, a, o2] * t_row[q2])


def test_product_radius_entries():
    rng = np.random.default_rng(4)
    c = random_counts(rng, 3, 2, 4, 3, 300)
    labels = np.array([[1, 0], [2, 1], [0, 2]])
    rad = product_l1_radius(c.N_oa, c.N_qs, labels, 0.05, E=2)
    prm = ConfidenceParams(0.05)
    for q in range(4):
        for o in range(3):
            for a in range(2):
                sig = labels[o, a]
                want = beta_l1(max(1, c.N_oa[o, a]), 0.05 / 12, 3)
                if sig:
                    want = surrogate_radius_l1(c, prm, o, a, q, sig, E=2)
                assert rad[q * 3 + o, a] == pytest.approx(want)


def test_product_box_matches_scalar_builder():
    rng = np.random.default_rng(5)
    c = random_counts(rng, 3, 2, 2, 3, 150)
    labels = np.array([[1, 0], [2, 1], [0, 2]])
    lo, hi = product_bernstein_box(c.N_oa, c.N_oao, c.N_qs, c.N_qsq, labels, 0.05, 1.12, E=2)
    prm = ConfidenceParams(0.05, mode="bernstein")
    for s in range(6):
        for a in range(2):
            if labels[s % 3, a] == 0:
                continue
            for s2 in range(6):
                want = surrogate_interval_bernstein(c, prm, s, a, s2, labels, E=2)
                assert (lo[s, a, s2], hi[s, a, s2]) == pytest.approx(want)


def test_builders_batch_equals_loop():
    rng = np.random.default_rng(6)
    labels = np.array([[1, 0], [2, 1], [0, 2]])
    snaps = [random_counts(rng, 3, 2, 2, 3, n) for n in (0, 5, 80)]
    stack = [np.stack([getattr(c, k) for c in snaps]) for k in ("N_oa", "N_oao", "N_qs", "N_qsq")]
    bc = product_center(*stack, labels)
    br = product_l1_radius(stack[0], stack[2], labels, 0.1, 2)
    blo, bhi = product_bernstein_box(*stack, labels, 0.1, 1.12, 2)
    for i, c in enumerate(snaps):
        np.testing.assert_array_equal(bc[i], product_center(c.N_oa, c.N_oao, c.N_qs, c.N_qsq, labels))
        np.testing.assert_array_equal(br[i], product_l1_radius(c.N_oa, c.N_qs, labels, 0.1, 2))
        lo, hi = product_bernstein_box(c.N_oa, c.N_oao, c.N_qs, c.N_qsq, labels, 0.1, 1.12, 2)
        np.testing.assert_array_equal(blo[i], lo)
        np.testing.assert_array_equal(bhi[i], hi)


def test_flat_sets():
    rng = np.random.default_rng(7)
    c = random_counts(rng, 3, 2, 3, 3, 200)
    ctr, rad = flat_l1(c.N_sa, c.N_sas, 0.05)
    assert rad.shape == (9, 2)
    assert rad[0, 0] == pytest.approx(beta_l1(max(1, c.N_sa[0, 0]), 0.05 / 18, 9))
    lo, hi = flat_bernstein_box(c.N_sa, c.N_sas, 0.05, 1.12)
    assert np.all(lo <= ctr + 1e-15) and np.all(ctr <= hi + 1e-15)


def _radii(k, n, A=2, E=2, delta=0.05):
    fac = beta_l1(n, delta / (2 * k * A), k) + beta_l1(n, delta / (2 * k * E), k)
    flat = beta_l1(n, delta / (k * k * A), k * k)
    return flat, fac


def test_oblivious_radius_exceeds_factored_for_large_models():
    n = np.unique(np.geomspace(1, 1e6, 200).astype(int))
    for k in (10, 16, 25):
        flat, fac = _radii(k, n)
        assert np.all(flat > fac)


def test_factored_radius_larger_at_small_equal_counts():
    # At O = Q = 3 and equal counts the sum of two radii beats the single flat one;
    # the structural gain in small models comes from pooled counts instead.
    flat, fac = _radii(3, np.array([10, 1000, 10**5]))
    assert np.all(flat < fac)
    mp.mp.dps = 30
    want = [float(mp_beta(n, 0.05 / 18, 9)) for n in (10, 1000, 10**5)]
    np.testing.assert_allclose(flat, want, rtol=1e-12)
