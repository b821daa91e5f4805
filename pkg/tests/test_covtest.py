import math

import numpy as np
import pytest

from hdtest import covtest, ustat
from hdtest.core import ExtremeValueB, GroupedData, quantile, sample_covariance
from hdtest.errors import (
    CalibrationError,
    DegenerateVariableError,
    InsufficientDataError,
)


def whiten(x):
    """Rescale a sample so its covariance is exactly the identity."""
    s = sample_covariance(x)
    root = np.linalg.cholesky(s)
    return (x - 0 * x.mean(0)) @ np.linalg.inv(root.T)


def groups(*arrays):
    return GroupedData(tuple(arrays))


class TestLedoitWolf:
    def test_v_at_identity_and_scaled(self, rng):
        x = whiten(rng.normal(size=(30, 4)))
        assert covtest.lw_v(x).statistic == pytest.approx(0.0, abs=1e-12)
        assert covtest.lw_v(x * math.sqrt(2.0)).statistic == pytest.approx(
            1.0, abs=1e-10)

    def test_v_reports_no_law(self, rng):
        res = covtest.lw_v(rng.normal(size=(10, 3)))
        assert res.null_law is None and res.p_value is None
        assert "limit_formula" in res.metadata

    def test_v_concentrates_at_one(self, rng):
        # identity population with n = p: the limit is c a^2 + (a-1)^2 +
        # delta^2 = 1
        vals = [covtest.lw_v(rng.standard_normal((200, 200))).statistic
                for _ in range(40)]
        assert abs(np.mean(vals) - 1.0) < 0.1

    def test_u_zero_at_spherical_sample(self, rng):
        x = whiten(rng.normal(size=(25, 3)))
        for c in (1.0, 7.5):
            assert covtest.lw_u(x * c).statistic == pytest.approx(0.0, abs=1e-12)

    def test_u_scale_invariance(self, rng):
        x = rng.normal(size=(15, 6))
        a = covtest.lw_u(x)
        b = covtest.lw_u(x * 3.7)
        assert b.statistic == pytest.approx(a.statistic, rel=1e-10)
        assert b.standardized == pytest.approx(a.standardized, rel=1e-10)

    def test_w_zero_at_identity_sample(self, rng):
        x = whiten(rng.normal(size=(30, 4)))
        assert covtest.lw_w(x).statistic == pytest.approx(0.0, abs=1e-12)

    def test_w_regimes(self, rng):
        small = rng.normal(size=(40, 5))
        res = covtest.lw_w(small)
        assert res.metadata["regime"] == "chisq"
        assert res.null_law.df == pytest.approx(15.0)
        res = covtest.lw_w(small, regime="normal")
        assert res.metadata["regime"] == "normal"
        big = rng.normal(size=(40, 25))
        assert covtest.lw_w(big).metadata["regime"] == "normal"
        with pytest.raises(ValueError):
            covtest.lw_w(small, regime="bogus")

    def test_w_concentrates_at_limit(self, rng):
        # identity population, n = p = 100: limit c + (a-1)^2 + delta^2 = 1
        vals = [covtest.lw_w(rng.standard_normal((100, 100))).statistic
                for _ in range(60)]
        assert abs(np.mean(vals) - 1.0) < 0.1


class TestSrivastava:
    def test_trace_square_estimator_unbiased(self, rng):
        reps, n, p = 300, 50, 20
        vals = [covtest.srivastava_s1(rng.standard_normal((n, p)))
                .metadata["a2_hat"] for _ in range(reps)]
        se = np.std(vals, ddof=1) / math.sqrt(reps)
        assert abs(np.mean(vals) - 1.0) <= 3 * se

    def test_s1_mean_near_zero_at_identity(self, rng):
        reps = 300
        vals = [covtest.srivastava_s1(rng.standard_normal((40, 15))).statistic
                for _ in range(reps)]
        se = np.std(vals, ddof=1) / math.sqrt(reps)
        assert abs(np.mean(vals)) <= 3 * se

    def test_s2_scale_invariance(self, rng):
        x = rng.normal(size=(20, 8))
        a = covtest.srivastava_s2(x)
        b = covtest.srivastava_s2(x * 5.0)
        assert b.statistic == pytest.approx(a.statistic, rel=1e-10)
        assert b.standardized == pytest.approx(a.standardized, rel=1e-10)

    def test_preconditions(self, rng):
        with pytest.raises(InsufficientDataError):
            covtest.srivastava_s1(rng.normal(size=(2, 4)))


class TestLiChen:
    def test_swap_symmetry_exact(self, rng):
        x1, x2 = rng.normal(size=(6, 5)), rng.normal(size=(7, 5))
        a = covtest.lc_two(groups(x1, x2))
        b = covtest.lc_two(groups(x2, x1))
        assert a.statistic == pytest.approx(b.statistic, rel=1e-12)

    def test_degenerate_raises(self):
        with pytest.raises(CalibrationError):
            covtest.lc_two(groups(np.ones((5, 3)), np.ones((5, 3))))

    def test_mean_zero_under_equality(self, rng):
        reps = 200
        vals = [covtest.lc_two(groups(rng.standard_normal((25, 10)),
                                      rng.standard_normal((25, 10)))).statistic
                for _ in range(reps)]
        se = np.std(vals, ddof=1) / math.sqrt(reps)
        assert abs(np.mean(vals)) <= 3 * se


class TestClxCov:
    def test_identical_samples_zero(self, rng):
        x = rng.normal(size=(10, 4))
        res = covtest.clx_cov(groups(x, x.copy()))
        assert res.statistic == pytest.approx(0.0, abs=1e-12)

    def test_nonnegative_and_positive_when_different(self, rng):
        g = groups(rng.normal(size=(10, 4)), rng.normal(size=(12, 4)))
        res = covtest.clx_cov(g)
        assert res.statistic > 0.0

    def test_threshold_constants(self):
        # upper 5% point of the extreme-value law and the p = 100 threshold
        q = quantile(ExtremeValueB(), 0.05)
        assert q == pytest.approx(-math.log(8 * math.pi)
                                  - 2 * math.log(math.log(1 / 0.95)), abs=1e-7)
        threshold = q + 4 * math.log(100) - math.log(math.log(100))
        assert threshold == pytest.approx(19.6097, abs=1e-3)

    def test_theta_hat_formula(self, rng):
        x = rng.normal(size=(9, 3))
        s, theta = covtest.theta_hat(x)
        n = 9
        c = x - x.mean(0)
        s_loop = c.T @ c / n
        assert np.allclose(s, s_loop)
        i, j = 0, 2
        kernel = (c[:, i] * c[:, j] - s_loop[i, j]) ** 2
        assert theta[i, j] == pytest.approx(kernel.mean(), rel=1e-12)
        assert np.all(theta >= -1e-12)
        assert np.allclose(theta, theta.T)


class TestQcBanded:
    def test_p3_tau2_single_term(self, rng):
        x = rng.normal(size=(12, 3))
        x = x - x.mean(axis=0)
        res = covtest.qc_banded(x, covtest.BandSpec(tau=2))
        assert res.statistic == pytest.approx(
            2.0 * ustat.qc_sigma_sq_hat(x, 0, 2), rel=1e-12)

    def test_lag_terms_do_not_depend_on_tau(self, rng):
        # the tested lag set shrinks as tau grows; each per-lag term is the
        # same quantity whatever tau is
        x = rng.normal(size=(15, 6))
        x = x - x.mean(axis=0)
        terms = covtest.qc_lag_terms(x, range(0, 6))
        for tau in (1, 2, 3):
            res = covtest.qc_banded(x, covtest.BandSpec(tau=tau))
            expect = 2.0 * sum(terms[q] for q in range(tau, 6))
            assert res.statistic == pytest.approx(expect, rel=1e-10)
        assert covtest.qc_banded(x, covtest.BandSpec(2)).statistic <= \
            covtest.qc_banded(x, covtest.BandSpec(1)).statistic \
            + 2.0 * max(0.0, terms[1]) + 1e-12

    def test_tau_bounds(self, rng):
        x = rng.normal(size=(10, 4))
        with pytest.raises(ValueError):
            covtest.qc_banded(x, covtest.BandSpec(tau=3))
        with pytest.raises(ValueError):
            covtest.BandSpec(tau=0)

    def test_mean_zero_at_identity_quick(self, rng):
        reps = 200
        vals = []
        for _ in range(reps):
            x = rng.standard_normal((40, 10))
            x = x - x.mean(axis=0)
            vals.append(covtest.qc_banded(x, covtest.BandSpec(1)).statistic)
        se = np.std(vals, ddof=1) / math.sqrt(reps)
        assert abs(np.mean(vals)) <= 3 * se


class TestCjBanded:
    def test_duplicated_column_rejects(self, rng):
        x = rng.normal(size=(40, 6))
        x[:, 5] = x[:, 0]              # perfect correlation at lag 5
        res = covtest.cj_banded(x, covtest.BandSpec(tau=2))
        assert res.statistic == pytest.approx(1.0, abs=1e-12)
        assert res.p_value < 1e-8
        assert res.metadata["argmax"] == (0, 5)

    def test_rejection_threshold_consistency(self, rng):
        # rejecting at level alpha is the same as the squared maximum
        # exceeding [q_alpha + 4 log p - log log p]/n
        x = rng.normal(size=(30, 8))
        res = covtest.cj_banded(x, covtest.BandSpec(tau=1))
        n, p, alpha = 30, 8, 0.05
        threshold = (quantile(ExtremeValueB(), alpha) + 4 * math.log(p)
                     - math.log(math.log(p))) / n
        assert (res.p_value <= alpha) == (res.statistic ** 2 >= threshold - 1e-12)

    def test_scale_invariances(self, rng):
        x = rng.normal(size=(25, 5))
        base = covtest.cj_banded(x, covtest.BandSpec(tau=1))
        glob = covtest.cj_banded(x * 4.2, covtest.BandSpec(tau=1))
        assert glob.statistic == pytest.approx(base.statistic, rel=1e-10)
        cols = covtest.cj_banded(x * np.array([1.0, 9.0, 0.2, 3.0, 1.5]),
                                 covtest.BandSpec(tau=1))
        assert cols.statistic == pytest.approx(base.statistic, abs=1e-8)

    def test_degenerate_column(self, rng):
        x = rng.normal(size=(10, 3))
        x[:, 0] = 2.0
        with pytest.raises(DegenerateVariableError):
            covtest.cj_banded(x, covtest.BandSpec(tau=1))
