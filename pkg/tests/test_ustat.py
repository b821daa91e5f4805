import math

import numpy as np
import pytest

import oracles
from hdtest import ustat
from hdtest.errors import (
    DegenerateVariableError,
    DimensionMismatchError,
    InsufficientDataError,
    OracleCapError,
)


def rel_close(a, b, rtol=1e-9, floor=1e-6):
    return abs(a - b) <= rtol * max(abs(a), abs(b), floor)


class TestPowerSums:
    def test_constant_rows(self):
        x = np.tile([1.0, 2.0], (5, 1))
        ps = ustat.power_sums(x)
        assert np.allclose(ps.xsum, [5.0, 10.0])
        assert ps.a == pytest.approx(25.0)
        assert np.allclose(ps.x3, 5.0 * 5.0 * np.array([1.0, 2.0]))
        assert ps.b == pytest.approx(125.0)

    def test_single_row_helper(self):
        ps = ustat.power_sums(np.array([[2.0]]))
        assert ps.a == pytest.approx(4.0)
        assert ps.b == pytest.approx(16.0)

    def test_trace_identity(self, rng):
        x = rng.normal(size=(12, 5))
        ps = ustat.power_sums(x)
        assert np.trace(ps.x2) == pytest.approx(ps.a, rel=1e-12)


class TestQuarticSums:
    def test_fast_and_enum_match_iteration(self, rng):
        for _ in range(6):
            n = int(rng.integers(4, 9))
            p = int(rng.integers(1, 4))
            x = rng.normal(size=(n, p))
            expected = oracles.quartic_sums_iter(x)
            fast = ustat.quartic_sums_fast(x).as_tuple()
            enum = ustat.quartic_sums_enum(x).as_tuple()
            for f, e, it in zip(fast, enum, expected):
                assert rel_close(f, it, rtol=1e-10)
                assert rel_close(e, it, rtol=1e-12)

    def test_enum_cap(self, rng):
        with pytest.raises(OracleCapError):
            ustat.quartic_sums_enum(rng.normal(size=(13, 2)))


class TestSigmaHat:
    def test_constant_rows_give_zero(self):
        x = np.tile([0.5, -1.0, 2.0], (8, 1))
        assert ustat.sigma2_hat_fast(x) == pytest.approx(0.0, abs=1e-9)
        assert ustat.sigma2_hat_oracle(x) == pytest.approx(0.0, abs=1e-9)

    def test_fast_equals_oracle_and_iteration(self, rng):
        for _ in range(8):
            n = int(rng.integers(6, 11))
            p = int(rng.integers(1, 6))
            x = rng.normal(size=(n, p))
            fast = ustat.sigma2_hat_fast(x)
            oracle = ustat.sigma2_hat_oracle(x)
            assert rel_close(fast, oracle)
            assert rel_close(fast, oracles.sigma2_hat_iter(x))

    def test_row_permutation_invariance(self, rng):
        x = rng.normal(size=(8, 3))
        perm = rng.permutation(8)
        assert ustat.sigma2_hat_oracle(x[perm]) == pytest.approx(
            ustat.sigma2_hat_oracle(x), rel=1e-10)

    def test_preconditions(self, rng):
        with pytest.raises(InsufficientDataError):
            ustat.sigma2_hat_fast(rng.normal(size=(5, 2)))
        with pytest.raises(OracleCapError):
            ustat.sigma2_hat_oracle(rng.normal(size=(11, 2)))

    def test_normal_mean_matches_trace_target(self, rng):
        # MC mean close to 2 tr(Sigma^2) = 2p for standard normal data
        n, p, reps = 150, 30, 300
        vals = [ustat.sigma2_hat_fast(rng.standard_normal((n, p)))
                for _ in range(reps)]
        se = np.std(vals, ddof=1) / math.sqrt(reps)
        assert abs(np.mean(vals) - 2 * p) <= 3 * se

    def test_tuple56_variants_differ_by_pinned_patterns(self, rng):
        # the 5/6-tuple constructions are NOT the four-index form: the
        # single-trace reading differs by (I3 - sum_{j!=k} g_jk^2)/(n)_2 and
        # the self-paired reading by 2 (I5 - I4)/(n)_3; both patterns have
        # zero mean, so all three agree in expectation but not pathwise
        n, p = 7, 3
        x = rng.normal(size=(n, p))
        base = ustat.sigma2_hat_oracle(x)
        i1, i2, i3, i4, i5, i6 = oracles.quartic_sums_iter(x)
        j2 = oracles.offdiag_sq_iter(x)
        trace_form = oracles.sigma2_hat_tuple56(x, "trace")
        split_form = oracles.sigma2_hat_tuple56(x, "split")
        assert trace_form - base == pytest.approx(
            (i3 - j2) / math.perm(n, 2), rel=1e-8)
        assert split_form - base == pytest.approx(
            2.0 * (i5 - i4) / math.perm(n, 3), rel=1e-8)


class TestLeaveOutTraces:
    def test_constant_rows_zero(self):
        x = np.tile([1.0, -2.0], (6, 1))
        assert ustat.tr_sigma2_hat_cq(x) == pytest.approx(0.0, abs=1e-12)
        assert ustat.tr_cross_hat_cq(x, np.tile([3.0, 1.0], (5, 1))) == \
            pytest.approx(0.0, abs=1e-12)

    def test_matches_iteration(self, rng):
        x = rng.normal(size=(9, 4))
        assert ustat.tr_sigma2_hat_cq(x) == pytest.approx(
            oracles.cq_trace_iter(x), rel=1e-11)
        y = rng.normal(size=(7, 4))
        assert ustat.tr_cross_hat_cq(x, y) == pytest.approx(
            oracles.cq_cross_iter(x, y), rel=1e-11)

    def test_cross_swap_symmetry(self, rng):
        x = rng.normal(size=(6, 3))
        y = rng.normal(size=(8, 3))
        assert ustat.tr_cross_hat_cq(x, y) == pytest.approx(
            ustat.tr_cross_hat_cq(y, x), rel=1e-12)

    def test_permutation_invariance(self, rng):
        x = rng.normal(size=(8, 3))
        perm = rng.permutation(8)
        assert ustat.tr_sigma2_hat_cq(x[perm]) == pytest.approx(
            ustat.tr_sigma2_hat_cq(x), rel=1e-11)

    def test_preconditions(self, rng):
        with pytest.raises(InsufficientDataError):
            ustat.tr_sigma2_hat_cq(rng.normal(size=(3, 2)))
        with pytest.raises(DimensionMismatchError):
            ustat.tr_cross_hat_cq(rng.normal(size=(5, 2)),
                                  rng.normal(size=(5, 3)))
        with pytest.raises(InsufficientDataError):
            ustat.tr_cross_hat_cq(rng.normal(size=(2, 2)),
                                  rng.normal(size=(5, 2)))

    def test_unbiasedness_quick(self, rng):
        n, p, reps = 80, 15, 250
        vals = [ustat.tr_sigma2_hat_cq(rng.standard_normal((n, p)))
                for _ in range(reps)]
        se = np.std(vals, ddof=1) / math.sqrt(reps)
        assert abs(np.mean(vals) - p) <= 3 * se
        vals = [ustat.tr_cross_hat_cq(rng.standard_normal((40, 10)),
                                      rng.standard_normal((40, 10)))
                for _ in range(reps)]
        se = np.std(vals, ddof=1) / math.sqrt(reps)
        assert abs(np.mean(vals) - 10.0) <= 3 * se


class TestQuarticTraceEstimators:
    def test_constant_rows_zero_by_enumeration(self):
        x = np.tile([1.0, 2.0], (5, 1))
        assert ustat.lc_a_enum(x) == pytest.approx(0.0, abs=1e-9)
        y = np.tile([4.0, 1.0], (4, 1))
        assert ustat.lc_c_enum(x, y) == pytest.approx(0.0, abs=1e-9)

    def test_fast_equals_enumeration(self, rng):
        for _ in range(5):
            n = int(rng.integers(4, 8))
            x = rng.normal(size=(n, 3))
            assert rel_close(ustat.lc_a(x), ustat.lc_a_enum(x))
            assert rel_close(ustat.lc_a(x), oracles.lc_a_iter(x))
        for _ in range(5):
            n1 = int(rng.integers(2, 7))
            n2 = int(rng.integers(2, 7))
            x, y = rng.normal(size=(n1, 2)), rng.normal(size=(n2, 2))
            assert rel_close(ustat.lc_c(x, y), ustat.lc_c_enum(x, y))
            assert rel_close(ustat.lc_c(x, y), oracles.lc_c_iter(x, y))

    def test_lc_c_swap_symmetry(self, rng):
        x, y = rng.normal(size=(5, 2)), rng.normal(size=(6, 2))
        assert ustat.lc_c(x, y) == pytest.approx(ustat.lc_c(y, x), rel=1e-12)

    def test_lc_a_unbiased_quick(self, rng):
        root = np.diag([math.sqrt(2.0), 1.0])
        reps = 300
        vals = [ustat.lc_a(rng.standard_normal((60, 2)) @ root)
                for _ in range(reps)]
        se = np.std(vals, ddof=1) / math.sqrt(reps)
        assert abs(np.mean(vals) - 5.0) <= 3 * se


class TestQcSigma:
    def test_zero_column(self, rng):
        x = rng.normal(size=(7, 3))
        x[:, 0] = 0.0
        assert ustat.qc_sigma_sq_hat(x, 0, 1) == pytest.approx(0.0, abs=1e-12)

    def test_fast_equals_iteration(self, rng):
        for _ in range(5):
            n = int(rng.integers(4, 8))
            x = rng.normal(size=(n, 3))
            for col, lag in [(0, 1), (1, 1), (0, 2), (2, 0)]:
                assert rel_close(ustat.qc_sigma_sq_hat(x, col, lag),
                                 oracles.qc_sigma_sq_iter(x, col, lag),
                                 rtol=1e-9)
                assert rel_close(ustat.qc_sigma_sq_hat(x, col, lag),
                                 ustat.qc_sigma_sq_hat_enum(x, col, lag),
                                 rtol=1e-9)

    def test_lag_values_match_single_pairs(self, rng):
        x = rng.normal(size=(9, 5))
        for lag in range(0, 4):
            vec = ustat.qc_lag_values(x, lag)
            assert np.allclose(
                vec, [ustat.qc_sigma_sq_hat(x, l, lag) for l in range(5 - lag)],
                rtol=1e-12)

    def test_independent_columns_mean_zero_quick(self, rng):
        reps = 250
        vals = [ustat.qc_sigma_sq_hat(rng.standard_normal((50, 3)), 0, 1)
                for _ in range(reps)]
        se = np.std(vals, ddof=1) / math.sqrt(reps)
        assert abs(np.mean(vals)) <= 3 * se

    def test_index_errors(self, rng):
        x = rng.normal(size=(6, 3))
        with pytest.raises(IndexError):
            ustat.qc_sigma_sq_hat(x, 2, 1)
        with pytest.raises(InsufficientDataError):
            ustat.qc_sigma_sq_hat(rng.normal(size=(3, 3)), 0, 1)


class TestParkAyyalaKernels:
    def test_matches_iteration(self, rng):
        x = rng.normal(size=(8, 3))
        num, trr2 = ustat.pa_kernels(x)
        num_it, trr2_it = oracles.pa_kernels_iter(x)
        assert num == pytest.approx(num_it, rel=1e-10)
        assert trr2 == pytest.approx(trr2_it, rel=1e-10)

    def test_scale_and_permutation_invariance(self, rng):
        x = rng.normal(size=(9, 4))
        base = ustat.tr_r2_hat_pa(x)
        scaled = x * np.array([2.0, 0.5, 7.0, 1.0])
        assert ustat.tr_r2_hat_pa(scaled) == pytest.approx(base, rel=1e-10)
        perm = rng.permutation(9)
        assert ustat.tr_r2_hat_pa(x[perm]) == pytest.approx(base, rel=1e-10)

    def test_degenerate_column_raises(self, rng):
        x = rng.normal(size=(8, 3))
        x[:, 1] = 5.0
        with pytest.raises(DegenerateVariableError):
            ustat.tr_r2_hat_pa(x)

    def test_finite_sample_mean_at_identity(self, rng):
        # ratio-consistent, not unbiased: under normality with R = I the
        # exact mean is p (n-3)^2 / ((n-5)(n-7)) (inverse-chi-square moments
        # of the leave-two-out variances), about 6.5% above p at n = 100
        n, p, reps = 100, 10, 400
        expected = p * (n - 3) ** 2 / ((n - 5) * (n - 7))
        vals = [ustat.tr_r2_hat_pa(rng.standard_normal((n, p)))
                for _ in range(reps)]
        se = np.std(vals, ddof=1) / math.sqrt(reps)
        assert abs(np.mean(vals) - expected) <= 3 * se
        # and the bias vanishes with n
        assert abs(expected / p - 1.0) < 0.07
        big_n = 1000
        assert big_n ** 0 * p * (big_n - 3) ** 2 / ((big_n - 5) * (big_n - 7)) \
            == pytest.approx(p, rel=0.01)


class TestFalling:
    def test_values(self):
        assert ustat.falling(6, 4) == 6 * 5 * 4 * 3
        assert ustat.falling(5, 0) == 1
        with pytest.raises(ValueError):
            ustat.falling(3, 4)
