import math

import numpy as np
import pytest

from hdtest import manova, meantest, precision
from hdtest.core import GroupedData
from hdtest.errors import CalibrationError, InsufficientDataError


def groups(*arrays):
    return GroupedData(tuple(arrays))


class TestDesign:
    def test_design_matrices(self):
        dm = manova.design_matrices((2, 3, 2))
        assert dm.e.shape == (7, 3)
        assert np.allclose(dm.e.T @ dm.e, np.diag([2.0, 3.0, 2.0]))
        assert np.all(dm.e.sum(axis=1) == 1.0)
        assert np.allclose(dm.l @ np.ones(3), 0.0)


class TestSkTest:
    def test_identical_groups_strongly_negative(self, rng):
        x = rng.normal(size=(20, 8))
        res = manova.sk_test(groups(x, x.copy()))
        # zero between-group contrast leaves minus the centering constant
        assert res.standardized < -3.0

    def test_column_scale_invariance(self, rng):
        gs = [rng.normal(size=(15, 6)) for _ in range(3)]
        scale = np.array([3.0, 0.2, 1.0, 5.0, 0.7, 2.0])
        base = manova.sk_test(groups(*gs))
        scaled = manova.sk_test(groups(*(g * scale for g in gs)))
        assert scaled.standardized == pytest.approx(base.standardized, abs=1e-8)

    def test_insufficient_data(self, rng):
        with pytest.raises(InsufficientDataError):
            manova.sk_test(groups(rng.normal(size=(2, 3)),
                                  rng.normal(size=(2, 3))))


class TestHbTest:
    def test_equals_cq_two_at_k2(self, rng):
        for _ in range(8):
            g = groups(rng.normal(size=(int(rng.integers(4, 10)), 5)),
                       rng.normal(size=(int(rng.integers(4, 10)), 5)))
            hb = manova.hb_test(g)
            cq = meantest.cq_two(g)
            assert hb.statistic == pytest.approx(cq.statistic, abs=1e-10)
            assert hb.standardized == pytest.approx(cq.standardized, rel=1e-10)

    def test_constant_groups(self):
        # the statistic formula vanishes on identical constant groups; the
        # zero variance estimate then surfaces as a calibration error
        row = np.array([1.0, 2.0, 3.0])
        means = [row, row, row]
        stat = sum(float((a - b) @ (a - b)) for i, a in enumerate(means)
                   for b in means[i + 1:])
        assert stat == 0.0
        with pytest.raises(CalibrationError):
            manova.hb_test(groups(*[np.tile(row, (5, 1))] * 3))

    def test_rotation_invariance(self, rng):
        gs = [rng.normal(size=(8, 5)) for _ in range(3)]
        q, _ = np.linalg.qr(rng.normal(size=(5, 5)))
        base = manova.hb_test(groups(*gs))
        rot = manova.hb_test(groups(*(g @ q.T for g in gs)))
        assert rot.statistic == pytest.approx(base.statistic, abs=1e-8)
        assert rot.standardized == pytest.approx(base.standardized, abs=1e-8)

    def test_relabel_invariance(self, rng):
        gs = [rng.normal(size=(7, 4)) for _ in range(3)]
        base = manova.hb_test(groups(*gs))
        perm = manova.hb_test(groups(gs[2], gs[0], gs[1]))
        assert perm.statistic == pytest.approx(base.statistic, rel=1e-12)
        assert perm.standardized == pytest.approx(base.standardized, rel=1e-12)


class TestContrastStructure:
    def test_balanced_three_groups(self):
        sigma_y = manova.contrast_correlation((50, 50, 50))
        expected = np.array([[1.0, 0.5, -0.5],
                             [0.5, 1.0, 0.5],
                             [-0.5, 0.5, 1.0]])
        assert np.allclose(sigma_y, expected)
        params = manova.cx_null_params((50, 50, 50))
        assert params.lambda_sq == pytest.approx(1.5, abs=1e-12)
        assert params.d == 2
        assert params.H == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(sorted(params.eigenvalues), [0.0, 1.5, 1.5],
                           atol=1e-12)

    def test_two_groups(self):
        params = manova.cx_null_params((30, 20))
        assert params.lambda_sq == pytest.approx(1.0)
        assert params.d == 1
        assert params.H == pytest.approx(1.0)

    def test_unit_diagonal_any_sizes(self):
        sigma_y = manova.contrast_correlation((10, 25, 40, 15))
        assert np.allclose(np.diag(sigma_y), 1.0)
        assert np.allclose(sigma_y, sigma_y.T)


class TestCxTest:
    def test_identity_omega_identical_groups(self, rng):
        x = rng.normal(size=(6, 4))
        omega = precision.known_precision(np.eye(4))
        res = manova.cx_test(groups(x, x.copy()), omega)
        assert res.statistic == pytest.approx(0.0, abs=1e-12)

    def test_variable_permutation_consistency(self, rng):
        gs = [rng.normal(size=(8, 5)) for _ in range(3)]
        omega = precision.known_precision(np.eye(5))
        base = manova.cx_test(groups(*gs), omega)
        perm = rng.permutation(5)
        permuted = manova.cx_test(groups(*(g[:, perm] for g in gs)), omega)
        assert permuted.statistic == pytest.approx(base.statistic, abs=1e-8)
        assert perm[permuted.metadata["argmax"]] == base.metadata["argmax"]

    def test_null_law_parameters_attached(self, rng):
        gs = [rng.normal(size=(10, 6)) for _ in range(3)]
        res = manova.cx_test(groups(*gs), precision.known_precision(np.eye(6)))
        assert res.null_law.lambda_sq == pytest.approx(1.5)
        assert res.null_law.d == 2
        # with d = 2 the log log p term drops out of the standardization
        assert res.standardized == pytest.approx(
            res.statistic - 2 * 1.5 * math.log(6), abs=1e-10)
