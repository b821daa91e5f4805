"""One- and two-sample location tests and their asymptotic power curves.

All tests report upper-tail p-values against the null law stated in their
docstring.  Tests that assume a zero hypothesized mean (pa_one, rht_one) expect
the caller to pre-center the data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import ustat
from .core import (
    DataMatrix,
    ExtremeValueA,
    FisherF,
    GroupedData,
    StandardNormal,
    as_data_matrix,
    make_result,
    pooled_covariance,
    sample_correlation,
    sample_covariance,
    TestResult,
)
from .errors import (
    CalibrationError,
    DegenerateVariableError,
    InsufficientDataError,
    NotDefinedError,
    UnsupportedDimensionError,
)
from .precision import PrecisionEstimate

__all__ = [
    "MeanTestConfig",
    "PowerInputs",
    "hotelling_one",
    "hotelling_two",
    "dempster_net",
    "bs_ant_one",
    "bs_ant_two",
    "cq_statistic_one",
    "cq_statistic_two",
    "cq_one",
    "cq_two",
    "sd_one",
    "sd_two",
    "pa_one",
    "clx_two",
    "rht_one",
    "asymptotic_power",
]


@dataclass(frozen=True)
class MeanTestConfig:
    """Tuning knobs shared by the location tests.

    sd_use_cpn     : include the c_{p,n} = 1 + tr(R^2)/p^(3/2) adjustment in
                     the scale-invariant tests (both conventions exist in the
                     literature; default on).
    sd_unequal_cov : use per-group diagonal scaling D_{S1}/n1 + D_{S2}/n2 in
                     the two-sample scale-invariant test instead of the pooled
                     diagonal.  No covariance-equality pretest is performed.
    rht_lambda     : ridge value for the regularized test (required there).
    clx_gamma      : tuning for the constrained-l1 precision estimate; None
                     selects the precision module's default.
    """

    alpha: float = 0.05
    sd_use_cpn: bool = True
    sd_unequal_cov: bool = False
    rht_lambda: float | None = None
    clx_gamma: float | None = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.rht_lambda is not None and not self.rht_lambda > 0:
            raise ValueError(f"rht_lambda must be positive, got {self.rht_lambda}")


def _mu0_vector(mu0, p: int) -> np.ndarray:
    if mu0 is None:
        return np.zeros(p)
    mu0 = np.asarray(mu0, dtype=float).reshape(-1)
    if mu0.shape != (p,):
        raise ValueError(f"mu0 must have length p = {p}, got {mu0.shape}")
    return mu0


def _two_groups(g: GroupedData):
    if g.k != 2:
        raise ValueError(f"this test needs exactly 2 groups, got k = {g.k}")
    return g.groups[0], g.groups[1]


# ---------------------------------------------------------------------------
# Hotelling's T^2
# ---------------------------------------------------------------------------

_NAIVE_HINT = ("the classical statistic needs more degrees of freedom than "
               "variables; use a naive alternative such as bs/cq/sd instead")


def hotelling_one(x, mu0=None) -> TestResult:
    """One-sample T^2 = n (xbar - mu0)' S^{-1} (xbar - mu0).

    Null: ((n-p)/(p(n-1))) T^2 follows F(p, n-p) exactly for normal data.
    Not defined when p >= n.
    """
    dm = as_data_matrix(x)
    n, p = dm.n, dm.p
    if p >= n:
        raise NotDefinedError(
            f"one-sample T^2 is not defined for p = {p} >= n = {n}; " + _NAIVE_HINT
        )
    mu0 = _mu0_vector(mu0, p)
    diff = dm.values.mean(axis=0) - mu0
    s = sample_covariance(dm)
    try:
        sol = np.linalg.solve(s, diff)
    except np.linalg.LinAlgError as exc:
        raise NotDefinedError(f"sample covariance is singular: {exc}") from exc
    t2 = float(n * diff @ sol)
    scaled = (n - p) / (p * (n - 1)) * t2
    return make_result("hotelling_one", t2, scaled, FisherF(p, n - p), n=n, p=p)


def hotelling_two(g: GroupedData) -> TestResult:
    """Two-sample T^2 with pooled covariance.

    Null: ((N-p+1)/(pN)) T^2 follows F(p, N-p+1), N = n1 + n2 - 2.
    Not defined when p >= N.
    """
    x1, x2 = _two_groups(g)
    n1, n2, p = x1.n, x2.n, g.p
    big_n = n1 + n2 - 2
    if p >= big_n:
        raise NotDefinedError(
            f"two-sample T^2 is not defined for p = {p} >= n1+n2-2 = {big_n}; "
            + _NAIVE_HINT
        )
    diff = x1.values.mean(axis=0) - x2.values.mean(axis=0)
    s = pooled_covariance(g)
    try:
        sol = np.linalg.solve(s, diff)
    except np.linalg.LinAlgError as exc:
        raise NotDefinedError(f"pooled covariance is singular: {exc}") from exc
    t2 = float(n1 * n2 / (n1 + n2) * diff @ sol)
    scaled = (big_n - p + 1) / (p * big_n) * t2
    return make_result("hotelling_two", t2, scaled, FisherF(p, big_n - p + 1),
                       n=(n1, n2), p=p)


# ---------------------------------------------------------------------------
# Dempster's non-exact test
# ---------------------------------------------------------------------------


def _dempster_directions(n1: int, n2: int) -> np.ndarray:
    """First two rows of the orthogonal transform: grand-sum and contrast."""
    n = n1 + n2
    h1 = np.full(n, 1.0 / math.sqrt(n))
    h2 = np.concatenate([
        np.full(n1, math.sqrt(n2 / (n * n1))),
        np.full(n2, -math.sqrt(n1 / (n * n2))),
    ])
    return np.vstack([h1, h2])


def dempster_orthogonal_completion(n1: int, n2: int, rng=None) -> np.ndarray:
    """An n x n orthogonal matrix whose first two columns are the grand-sum
    and contrast directions.  The completion of the remaining columns is an
    arbitrary orthonormal basis of the complement; the statistic does not
    depend on the choice."""
    n = n1 + n2
    h = _dempster_directions(n1, n2).T
    if rng is None:
        rng = np.random.default_rng(0)
    m = np.concatenate([h, rng.normal(size=(n, n - 2))], axis=1)
    q, r = np.linalg.qr(m)
    q *= np.sign(np.diag(r))[None, :]
    return q


def dempster_net(g: GroupedData) -> TestResult:
    """Dempster's trace-ratio location test.

    T_D = ||y2||^2 / sum_{j>=3} ||y_j||^2 where y2 is the scaled mean
    contrast; the denominator equals the total energy minus the first two
    components, independent of the basis completion.  Null: n T_D referred to
    F(r_hat, N r_hat) with r_hat = (tr S)^2 / tr(S^2) from the pooled S.
    """
    x1, x2 = _two_groups(g)
    n1, n2 = x1.n, x2.n
    n = n1 + n2
    if n < 3:
        raise InsufficientDataError("dempster_net needs n1 + n2 >= 3")
    stacked = np.vstack([x1.values, x2.values])    # n x p
    h = _dempster_directions(n1, n2)
    y1 = h[0] @ stacked
    y2 = h[1] @ stacked
    total = float(np.einsum("ij,ij->", stacked, stacked))
    denom = total - float(y1 @ y1) - float(y2 @ y2)
    if denom <= 0:
        raise CalibrationError(
            "residual energy is zero; data carry no within-group variation",
            value=denom,
        )
    td = float(y2 @ y2) / denom
    s = pooled_covariance(g)
    tr_s = float(np.trace(s))
    tr_s2 = float(np.einsum("ij,ij->", s, s))
    if tr_s2 <= 0:
        raise CalibrationError("pooled covariance is zero", value=tr_s2)
    r_hat = tr_s * tr_s / tr_s2
    big_n = n - 2
    return make_result("dempster_net", n * td, n * td,
                       FisherF(r_hat, big_n * r_hat),
                       n=(n1, n2), p=g.p, r_hat=r_hat)


# ---------------------------------------------------------------------------
# centered squared-norm tests
# ---------------------------------------------------------------------------


def bs_ant_one(x, mu0=None) -> TestResult:
    """One-sample squared-Euclidean-norm test with normal null.

    statistic = ||xbar - mu0||^2 - tr(S)/n.  The scale estimate targets the
    variance of one squared norm, Var(||X_1 - mu0||^2); the statistic's exact
    null variance is that divided by n(n-1), which fixes the standardization.
    """
    dm = as_data_matrix(x)
    n, p = dm.n, dm.p
    if n < 6:
        raise InsufficientDataError(f"bs_ant_one needs n >= 6, got n = {n}")
    mu0 = _mu0_vector(mu0, p)
    centered = dm.values - mu0
    xbar = centered.mean(axis=0)
    s = sample_covariance(dm)
    stat = float(xbar @ xbar) - float(np.trace(s)) / n
    sigma2 = ustat.sigma2_hat_fast(centered)
    if sigma2 <= 0:
        raise CalibrationError(
            f"squared-norm variance estimate is nonpositive: {sigma2!r}",
            value=sigma2,
        )
    z = stat * math.sqrt(n * (n - 1)) / math.sqrt(sigma2)
    return make_result("bs_ant_one", stat, z, StandardNormal(), n=n, p=p,
                       sigma2_hat=sigma2)


def bs_ant_two(g: GroupedData) -> TestResult:
    """Two-sample squared-Euclidean-norm test under a common covariance.

    statistic = ||xbar1 - xbar2||^2 - (n/(n1 n2)) tr(S) with pooled S; the
    scale is the ratio-consistent plug-in
    2 (N+2)(N+1) N / (n1^2 n2^2 (N-1)) (tr S^2 - tr^2 S / N), N = n1+n2-2.
    """
    x1, x2 = _two_groups(g)
    n1, n2 = x1.n, x2.n
    n = n1 + n2
    big_n = n - 2
    if big_n < 2:
        raise InsufficientDataError("bs_ant_two needs n1 + n2 >= 4")
    s = pooled_covariance(g)
    diff = x1.values.mean(axis=0) - x2.values.mean(axis=0)
    stat = float(diff @ diff) - n / (n1 * n2) * float(np.trace(s))
    tr_s = float(np.trace(s))
    tr_s2 = float(np.einsum("ij,ij->", s, s))
    var_hat = (2.0 * (big_n + 2) * (big_n + 1) * big_n
               / (n1 ** 2 * n2 ** 2 * (big_n - 1))
               * (tr_s2 - tr_s * tr_s / big_n))
    if var_hat <= 0:
        raise CalibrationError(
            f"variance estimate is nonpositive: {var_hat!r}", value=var_hat
        )
    z = stat / math.sqrt(var_hat)
    return make_result("bs_ant_two", stat, z, StandardNormal(),
                       n=(n1, n2), p=g.p, var_hat=var_hat)


def cq_statistic_one(x, mu0=None) -> float:
    """Raw one-sample cross-product statistic (1/(n(n-1))) sum_{i != j} X_i'X_j
    on data centered at mu0.  Equals ||xbar - mu0||^2 - tr(S)/n exactly."""
    v = ustat._values(x)
    n, p = v.shape
    if n < 2:
        raise InsufficientDataError("cq statistic needs n >= 2")
    c = v - _mu0_vector(mu0, p)
    tot = c.sum(axis=0)
    sq = float(np.einsum("ij,ij->", c, c))
    return (float(tot @ tot) - sq) / (n * (n - 1))


def cq_statistic_two(x1, x2) -> float:
    """Raw two-sample cross-product statistic; equals
    ||xbar1 - xbar2||^2 - tr(S1)/n1 - tr(S2)/n2 exactly."""
    v1, v2 = ustat._values(x1), ustat._values(x2)
    n1, n2 = v1.shape[0], v2.shape[0]
    t1, t2 = v1.sum(axis=0), v2.sum(axis=0)
    own1 = (float(t1 @ t1) - float(np.einsum("ij,ij->", v1, v1))) / (n1 * (n1 - 1))
    own2 = (float(t2 @ t2) - float(np.einsum("ij,ij->", v2, v2))) / (n2 * (n2 - 1))
    cross = 2.0 * float(t1 @ t2) / (n1 * n2)
    return own1 + own2 - cross


def cq_one(x, mu0=None) -> TestResult:
    """One-sample cross-product test with the leave-two-out studentizer.

    standardized = T / sqrt((2/(n(n-1))) tr_sigma2_hat), matching the exact
    null variance Var(T) = (2/(n(n-1))) tr(Sigma^2).
    """
    dm = as_data_matrix(x)
    n, p = dm.n, dm.p
    if n < 4:
        raise InsufficientDataError(f"cq_one needs n >= 4, got n = {n}")
    mu0 = _mu0_vector(mu0, p)
    centered = dm.values - mu0
    stat = cq_statistic_one(centered)
    tr2 = ustat.tr_sigma2_hat_cq(centered)
    var_hat = 2.0 * tr2 / (n * (n - 1))
    if var_hat <= 0:
        raise CalibrationError(
            f"variance estimate is nonpositive: {var_hat!r}", value=var_hat
        )
    z = stat / math.sqrt(var_hat)
    return make_result("cq_one", stat, z, StandardNormal(), n=n, p=p,
                       tr_sigma2_hat=tr2)


def cq_two(g: GroupedData) -> TestResult:
    """Two-sample cross-product test; does not assume equal covariances.

    Variance plug-in: 2 tr_hat(S1^2)/(n1(n1-1)) + 2 tr_hat(S2^2)/(n2(n2-1))
    + 4 tr_hat(S1 S2)/(n1 n2), all leave-out estimators.
    """
    x1, x2 = _two_groups(g)
    n1, n2 = x1.n, x2.n
    if n1 < 4 or n2 < 4:
        raise InsufficientDataError("cq_two needs n1, n2 >= 4")
    stat = cq_statistic_two(x1.values, x2.values)
    t11 = ustat.tr_sigma2_hat_cq(x1.values)
    t22 = ustat.tr_sigma2_hat_cq(x2.values)
    t12 = ustat.tr_cross_hat_cq(x1.values, x2.values)
    var_hat = (2.0 * t11 / (n1 * (n1 - 1)) + 2.0 * t22 / (n2 * (n2 - 1))
               + 4.0 * t12 / (n1 * n2))
    if var_hat <= 0:
        raise CalibrationError(
            f"variance estimate is nonpositive: {var_hat!r}", value=var_hat
        )
    z = stat / math.sqrt(var_hat)
    return make_result("cq_two", stat, z, StandardNormal(), n=(n1, n2), p=g.p,
                       var_hat=var_hat)


# ---------------------------------------------------------------------------
# scale-invariant (diagonally studentized) tests
# ---------------------------------------------------------------------------


def _cpn(tr_r2: float, p: int, enabled: bool) -> float:
    return 1.0 + tr_r2 / p ** 1.5 if enabled else 1.0


def sd_one(x, mu0=None, cfg: MeanTestConfig | None = None) -> TestResult:
    """One-sample diagonally studentized test.

    T = (xbar - mu0)' D_S^{-1} (xbar - mu0);
    standardized = (n T - (n-1)p/(n-3)) / sqrt(2 (tr R^2 - p^2/(n-1)) c_{p,n}).
    """
    cfg = cfg or MeanTestConfig()
    dm = as_data_matrix(x)
    n, p = dm.n, dm.p
    if n < 4:
        raise InsufficientDataError(f"sd_one needs n >= 4, got n = {n}")
    mu0 = _mu0_vector(mu0, p)
    diff = dm.values.mean(axis=0) - mu0
    s = sample_covariance(dm)
    r = sample_correlation(s)                      # raises on zero variance
    stat = float(diff @ (diff / np.diag(s)))
    tr_r2 = float(np.einsum("ij,ij->", r, r))
    scale_sq = 2.0 * (tr_r2 - p * p / (n - 1)) * _cpn(tr_r2, p, cfg.sd_use_cpn)
    if scale_sq <= 0:
        raise CalibrationError(
            f"scale estimate is nonpositive: {scale_sq!r}", value=scale_sq
        )
    z = (n * stat - (n - 1) * p / (n - 3)) / math.sqrt(scale_sq)
    return make_result("sd_one", stat, z, StandardNormal(), n=n, p=p,
                       cpn=_cpn(tr_r2, p, cfg.sd_use_cpn))


def sd_two(g: GroupedData, cfg: MeanTestConfig | None = None) -> TestResult:
    """Two-sample diagonally studentized test.

    Pooled variant (default):
        T = (n1 n2 / n) d' D_S^{-1} d with pooled S,
        standardized = (T - Np/(N-2)) / sqrt(2 (tr R^2 - p^2/n) c_{p,n}).
    Unequal-covariance variant (cfg.sd_unequal_cov): D = D_{S1}/n1 + D_{S2}/n2,
        T = d' D^{-1} d, with R built from (S1/n1 + S2/n2) scaled by D; the
        same centering constant is used as an approximation.
    """
    cfg = cfg or MeanTestConfig()
    x1, x2 = _two_groups(g)
    n1, n2 = x1.n, x2.n
    n = n1 + n2
    big_n = n - 2
    if n1 < 4 or n2 < 4:
        raise InsufficientDataError("sd_two needs n1, n2 >= 4")
    diff = x1.values.mean(axis=0) - x2.values.mean(axis=0)
    p = g.p
    if cfg.sd_unequal_cov:
        s1 = sample_covariance(x1)
        s2 = sample_covariance(x2)
        comb = s1 / n1 + s2 / n2
        d = np.diag(comb)
        if np.any(d <= 0):
            bad = int(np.flatnonzero(d <= 0)[0])
            raise DegenerateVariableError(
                f"variable {bad} has nonpositive variance", index=bad
            )
        r = sample_correlation(comb)
        stat = float(diff @ (diff / d))
        variant = "unequal"
    else:
        s = pooled_covariance(g)
        r = sample_correlation(s)
        stat = n1 * n2 / n * float(diff @ (diff / np.diag(s)))
        variant = "pooled"
    tr_r2 = float(np.einsum("ij,ij->", r, r))
    scale_sq = 2.0 * (tr_r2 - p * p / n) * _cpn(tr_r2, p, cfg.sd_use_cpn)
    if scale_sq <= 0:
        raise CalibrationError(
            f"scale estimate is nonpositive: {scale_sq!r}", value=scale_sq
        )
    z = (stat - big_n * p / (big_n - 2)) / math.sqrt(scale_sq)
    return make_result("sd_two", stat, z, StandardNormal(), n=(n1, n2), p=p,
                       variant=variant)


def pa_one(x) -> TestResult:
    """Leave-two-out diagonally studentized test of a zero mean.

    T = ((n-5)/(n(n-1)(n-3))) sum_{i != j} X_i' D_(i,j)^{-1} X_j;
    standardized = sqrt(n(n-1)) T / sqrt(2 tr_r2_hat).  Pre-center the data to
    test a nonzero hypothesized mean.
    """
    dm = as_data_matrix(x)
    n, p = dm.n, dm.p
    if n < 6:
        raise InsufficientDataError(f"pa_one needs n >= 6, got n = {n}")
    num, tr_r2 = ustat.pa_kernels(dm.values)
    stat = (n - 5) / (n * (n - 1) * (n - 3)) * num
    if tr_r2 <= 0:
        raise CalibrationError(
            f"tr(R^2) estimate is nonpositive: {tr_r2!r}", value=tr_r2
        )
    z = math.sqrt(n * (n - 1)) * stat / math.sqrt(2.0 * tr_r2)
    return make_result("pa_one", stat, z, StandardNormal(), n=n, p=p,
                       tr_r2_hat=tr_r2)


# ---------------------------------------------------------------------------
# max-type two-sample test
# ---------------------------------------------------------------------------


def clx_two(g: GroupedData, omega: PrecisionEstimate) -> TestResult:
    """Max-type two-sample test on the precision-rotated mean difference.

    T = (n1 n2 / (n1+n2)) max_i (Omega d)_i^2 / omega_ii;
    standardized = T - 2 log p - log log p, extreme-value null with CDF
    exp(-(1/pi) exp(-x/2)).  Needs p >= 3 so that log log p > 0.
    """
    x1, x2 = _two_groups(g)
    p = g.p
    if p <= 2:
        raise UnsupportedDimensionError(
            f"the extreme-value null needs p >= 3, got p = {p}"
        )
    if omega.p != p:
        raise ValueError(f"omega has p = {omega.p}, data has p = {p}")
    d = np.diag(omega.omega)
    if np.any(d <= 0):
        bad = int(np.flatnonzero(d <= 0)[0])
        raise DegenerateVariableError(
            f"precision diagonal is nonpositive at {bad}", index=bad
        )
    n1, n2 = x1.n, x2.n
    diff = x1.values.mean(axis=0) - x2.values.mean(axis=0)
    rotated = omega.omega @ diff
    scores = rotated * rotated / d
    idx = int(np.argmax(scores))
    stat = n1 * n2 / (n1 + n2) * float(scores[idx])
    z = stat - 2.0 * math.log(p) - math.log(math.log(p))
    return make_result("clx_two", stat, z, ExtremeValueA(), n=(n1, n2), p=p,
                       argmax=idx, omega_method=omega.method,
                       omega_gamma=omega.gamma)


# ---------------------------------------------------------------------------
# regularized quadratic-form test
# ---------------------------------------------------------------------------


def rht_one(x, cfg: MeanTestConfig) -> TestResult:
    """Ridge-regularized quadratic-form test of a zero mean.

    T = xbar' (S + lambda I)^{-1} xbar, with the spectral centering and scale
    built from m(lambda) = tr(S+lambda I)^{-1}/p and its derivative analogue.
    Pre-center the data to test a nonzero hypothesized mean.
    """
    if cfg is None or cfg.rht_lambda is None:
        raise ValueError("rht_one requires cfg.rht_lambda > 0")
    lam = cfg.rht_lambda
    dm = as_data_matrix(x)
    n, p = dm.n, dm.p
    xbar = dm.values.mean(axis=0)
    s = sample_covariance(dm)
    eigvals = np.linalg.eigvalsh(s)
    m = float(np.mean(1.0 / (eigvals + lam)))
    m_prime = float(np.mean(1.0 / (eigvals + lam) ** 2))
    reg = s + lam * np.eye(p)
    stat = float(xbar @ np.linalg.solve(reg, xbar))
    one_minus = 1.0 - lam * m
    center = one_minus / (1.0 - p * one_minus / n)
    base = 1.0 - p / n + p * lam * m / n
    theta2 = one_minus / base ** 3 - lam * (m - lam * m_prime) / base ** 4
    if theta2 <= 0:
        raise CalibrationError(
            f"scale estimate is nonpositive: {theta2!r}", value=theta2
        )
    # asymptotic variance of sqrt(p)(n T / p - center) is twice theta2
    z = math.sqrt(p) * (n * stat / p - center) / math.sqrt(2.0 * theta2)
    return make_result("rht_one", stat, z, StandardNormal(), n=n, p=p,
                       rht_lambda=lam, m=m, m_prime=m_prime)


# ---------------------------------------------------------------------------
# asymptotic power curves
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerInputs:
    """Population-level inputs for the closed-form power curves.

    delta_sq is the squared shift in the scale native to each test family:
    Mahalanobis for 'hotelling', Euclidean for 'dempster'/'bs'/'cq_case1',
    componentwise (D_Sigma^{-1}) for 'sd'.  kappa = lim n1/n selects the
    two-sample form; leave it None for the one-sample form.
    """

    n: int
    delta_sq: float
    alpha: float = 0.05
    kappa: float | None = None
    y: float | None = None
    tr_sigma2: float | None = None
    tr_r2: float | None = None


_POWER_KINDS = ("hotelling", "dempster", "bs", "cq_case1", "cq_case2", "sd")


def asymptotic_power(kind: str, inp: PowerInputs) -> float:
    """Evaluate a closed-form asymptotic power curve at the given inputs."""
    if kind not in _POWER_KINDS:
        raise ValueError(f"unknown power kind {kind!r}; expected one of {_POWER_KINDS}")
    if not 0 < inp.alpha < 1:
        raise ValueError(f"alpha must be in (0, 1), got {inp.alpha}")
    if inp.delta_sq < 0:
        raise ValueError(f"delta_sq must be nonnegative, got {inp.delta_sq}")
    if kind == "cq_case2":
        # the strong-signal regime drives the power to one
        return 1.0
    xi = -special.ndtri(inp.alpha)          # upper alpha normal quantile
    group_factor = 1.0 if inp.kappa is None else inp.kappa * (1.0 - inp.kappa)
    if inp.kappa is not None and not 0 < inp.kappa < 1:
        raise ValueError(f"kappa must be in (0, 1), got {inp.kappa}")
    if kind == "hotelling":
        if inp.y is None or not 0 < inp.y < 1:
            raise ValueError("the Mahalanobis-scale curve needs y in (0, 1)")
        arg = math.sqrt(inp.n * (1.0 - inp.y) / (2.0 * inp.y)) \
            * group_factor * inp.delta_sq
    elif kind in ("dempster", "bs", "cq_case1"):
        if inp.tr_sigma2 is None or inp.tr_sigma2 <= 0:
            raise ValueError("the Euclidean-scale curves need tr_sigma2 > 0")
        arg = inp.n * group_factor * inp.delta_sq / math.sqrt(2.0 * inp.tr_sigma2)
    else:  # sd
        if inp.tr_r2 is None or inp.tr_r2 <= 0:
            raise ValueError("the componentwise curve needs tr_r2 > 0")
        arg = inp.n * group_factor * inp.delta_sq / math.sqrt(2.0 * inp.tr_r2)
    return float(special.ndtr(-xi + arg))
