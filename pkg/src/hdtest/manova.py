"""k-sample mean-vector tests (MANOVA-style)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ustat
from .core import (
    ExtremeValueCX,
    GroupedData,
    StandardNormal,
    make_result,
    sample_correlation,
    TestResult,
)
from .errors import (
    CalibrationError,
    DegenerateVariableError,
    InsufficientDataError,
    UnsupportedDimensionError,
)
from .meantest import cq_statistic_two
from .precision import PrecisionEstimate

__all__ = [
    "DesignMatrices",
    "CxNullParams",
    "design_matrices",
    "sk_test",
    "hb_test",
    "contrast_correlation",
    "cx_null_params",
    "cx_test",
]


@dataclass(frozen=True)
class DesignMatrices:
    """Group-indicator matrix E (n x k) and contrast matrix L ((k-1) x k)."""

    e: np.ndarray
    l: np.ndarray


def design_matrices(sizes) -> DesignMatrices:
    sizes = tuple(int(s) for s in sizes)
    k = len(sizes)
    n = sum(sizes)
    e = np.zeros((n, k))
    row = 0
    for i, ni in enumerate(sizes):
        e[row:row + ni, i] = 1.0
        row += ni
    l = np.concatenate([np.eye(k - 1), -np.ones((k - 1, 1))], axis=1)
    return DesignMatrices(e=e, l=l)


def sk_test(g: GroupedData) -> TestResult:
    """Diagonally studentized between-contrast trace test.

    T = [tr(B D_S^{-1}) - (n-k) p (k-1) / (n-k-2)]
        / sqrt(2 c_{p,n} (k-1) (tr R^2 - p^2/(n-k)))

    where B is the between-group contrast quadratic form, D_S the diagonal of
    the within-group covariance (divisor n-k), and R the within-group
    correlation matrix.  Null: standard normal.
    """
    sizes = g.sizes
    k, p = g.k, g.p
    n = g.total_n
    if n - k - 2 <= 0:
        raise InsufficientDataError(
            f"sk_test needs n - k > 2, got n = {n}, k = {k}"
        )
    dm = design_matrices(sizes)
    y = np.vstack([grp.values for grp in g.groups])        # n x p
    ete_inv = np.diag(1.0 / np.asarray(sizes, dtype=float))
    f = dm.e @ ete_inv @ dm.l.T                            # n x (k-1)
    mid = np.linalg.inv(dm.l @ ete_inv @ dm.l.T)
    ye = y.T @ f                                           # p x (k-1)
    b = ye @ mid @ ye.T
    # within-group covariance, divisor n - k
    within = np.zeros((p, p))
    for grp in g.groups:
        c = grp.values - grp.values.mean(axis=0)
        within += c.T @ c
    s_w = within / (n - k)
    d = np.diag(s_w)
    if np.any(d <= 0):
        bad = int(np.flatnonzero(d <= 0)[0])
        raise DegenerateVariableError(
            f"variable {bad} has zero within-group variance", index=bad
        )
    r = sample_correlation(s_w)
    tr_r2 = float(np.einsum("ij,ij->", r, r))
    cpn = 1.0 + tr_r2 / p ** 1.5
    stat_raw = float(np.trace(b @ np.diag(1.0 / d)))
    num = stat_raw - (n - k) * p * (k - 1) / (n - k - 2)
    scale_sq = 2.0 * cpn * (k - 1) * (tr_r2 - p * p / (n - k))
    if scale_sq <= 0:
        raise CalibrationError(
            f"scale estimate is nonpositive: {scale_sq!r}", value=scale_sq
        )
    z = num / math.sqrt(scale_sq)
    return make_result("sk_test", z, z, StandardNormal(), n=sizes, p=p, k=k,
                       trace_form=stat_raw, cpn=cpn)


def hb_test(g: GroupedData) -> TestResult:
    """Sum-of-pairwise-squared-distances MANOVA test.

    T = sum_{i<j} ||xbar_i - xbar_j||^2 - (k-1) sum_i tr(S_i)/n_i.  At k = 2
    this equals the two-sample cross-product statistic exactly.  The variance
    is composed from the leave-out trace estimators:
    sum_i 2(k-1)^2 tr_hat(S_i^2)/(n_i(n_i-1)) + sum_{i<j} 4 tr_hat(S_i S_j)/(n_i n_j).
    """
    k, p = g.k, g.p
    sizes = g.sizes
    if any(ni < 4 for ni in sizes):
        raise InsufficientDataError("hb_test needs every n_i >= 4")
    if k == 2:
        stat = cq_statistic_two(g.groups[0].values, g.groups[1].values)
    else:
        means = [grp.values.mean(axis=0) for grp in g.groups]
        stat = 0.0
        for i in range(k):
            for j in range(i + 1, k):
                d = means[i] - means[j]
                stat += float(d @ d)
        for i, grp in enumerate(g.groups):
            c = grp.values - grp.values.mean(axis=0)
            tr_s = float(np.einsum("ij,ij->", c, c)) / (grp.n - 1)
            stat -= (k - 1) * tr_s / grp.n
    own = [ustat.tr_sigma2_hat_cq(grp.values) for grp in g.groups]
    var_hat = sum(
        2.0 * (k - 1) ** 2 * own[i] / (sizes[i] * (sizes[i] - 1)) for i in range(k)
    )
    for i in range(k):
        for j in range(i + 1, k):
            var_hat += 4.0 * ustat.tr_cross_hat_cq(
                g.groups[i].values, g.groups[j].values
            ) / (sizes[i] * sizes[j])
    if var_hat <= 0:
        raise CalibrationError(
            f"variance estimate is nonpositive: {var_hat!r}", value=var_hat
        )
    z = stat / math.sqrt(var_hat)
    return make_result("hb_test", stat, z, StandardNormal(), n=sizes, p=p, k=k,
                       var_hat=var_hat)


# ---------------------------------------------------------------------------
# max-type MANOVA test
# ---------------------------------------------------------------------------


def contrast_correlation(sizes) -> np.ndarray:
    """Correlation matrix of the scaled pairwise mean differences.

    Under a common covariance, the correlation between the standardized
    coordinates of sqrt(n_a n_b/(n_a+n_b)) (xbar_a - xbar_b) across pairs
    (a,b) depends on the sample sizes only.  Rows/columns are ordered as the
    pairs (0,1), (0,2), ..., (k-2,k-1).
    """
    sizes = tuple(float(s) for s in sizes)
    k = len(sizes)
    pairs = [(a, b) for a in range(k) for b in range(a + 1, k)]
    q = len(pairs)
    out = np.empty((q, q))
    for u, (a, b) in enumerate(pairs):
        wu = math.sqrt(sizes[a] * sizes[b] / (sizes[a] + sizes[b]))
        for v, (c, d) in enumerate(pairs):
            wv = math.sqrt(sizes[c] * sizes[d] / (sizes[c] + sizes[d]))
            cov = ((a == c) / sizes[a] + (b == d) / sizes[b]
                   - (a == d) / sizes[a] - (b == c) / sizes[b])
            out[u, v] = wu * wv * cov
    return out


@dataclass(frozen=True)
class CxNullParams:
    """Spectral parameters of the contrast correlation matrix."""

    lambda_sq: float
    d: int
    H: float
    eigenvalues: tuple

    def law(self) -> ExtremeValueCX:
        return ExtremeValueCX(lambda_sq=self.lambda_sq, d=self.d, H=self.H)


def cx_null_params(sizes, rel_tol: float = 1e-8) -> CxNullParams:
    """Eigen-structure of the contrast correlation matrix.

    The top-eigenvalue multiplicity d is decided at relative tolerance
    ``rel_tol``; H is the product over the remaining eigenvalues of
    (1 - lam_i/lam_max)^{-1/2}.
    """
    sigma_y = contrast_correlation(sizes)
    eigs = np.linalg.eigvalsh(sigma_y)[::-1]
    lam = float(eigs[0])
    if lam <= 0:
        raise CalibrationError("contrast correlation has no positive eigenvalue",
                               value=lam)
    d = int(np.sum(eigs >= lam * (1.0 - rel_tol)))
    rest = eigs[d:]
    h = float(np.prod((1.0 - rest / lam) ** -0.5)) if rest.size else 1.0
    return CxNullParams(lambda_sq=lam, d=d, H=h,
                        eigenvalues=tuple(float(e) for e in eigs))


def cx_test(g: GroupedData, omega: PrecisionEstimate) -> TestResult:
    """Max-type MANOVA test under a common covariance.

    T = max_i sum_{a<b} (n_a n_b/(n_a+n_b)) X_{ab,i}^2 / b_ii with
    X_{ab} = Omega (xbar_a - xbar_b) and b_ii the diagonal of
    Omega S_w Omega (within covariance, divisor n-k).
    standardized = T - 2 lam^2 log p - (d-2) lam^2 log log p.
    """
    k, p = g.k, g.p
    sizes = g.sizes
    n = g.total_n
    if p <= 2:
        raise UnsupportedDimensionError(
            f"the extreme-value null needs p >= 3, got p = {p}"
        )
    if omega.p != p:
        raise ValueError(f"omega has p = {omega.p}, data has p = {p}")
    within = np.zeros((p, p))
    for grp in g.groups:
        c = grp.values - grp.values.mean(axis=0)
        within += c.T @ c
    s_w = within / (n - k)
    b_hat = omega.omega @ s_w @ omega.omega
    b_diag = np.diag(b_hat)
    if np.any(b_diag <= 0):
        bad = int(np.flatnonzero(b_diag <= 0)[0])
        raise DegenerateVariableError(
            f"studentizer diagonal is nonpositive at {bad}", index=bad
        )
    means = [grp.values.mean(axis=0) for grp in g.groups]
    scores = np.zeros(p)
    for a in range(k):
        for b in range(a + 1, k):
            w = sizes[a] * sizes[b] / (sizes[a] + sizes[b])
            rot = omega.omega @ (means[a] - means[b])
            scores += w * rot * rot / b_diag
    idx = int(np.argmax(scores))
    stat = float(scores[idx])
    params = cx_null_params(sizes)
    z = (stat - 2.0 * params.lambda_sq * math.log(p)
         - (params.d - 2) * params.lambda_sq * math.log(math.log(p)))
    return make_result("cx_test", stat, z, params.law(), n=sizes, p=p, k=k,
                       argmax=idx, lambda_sq=params.lambda_sq, d=params.d,
                       H=params.H, omega_method=omega.method)
