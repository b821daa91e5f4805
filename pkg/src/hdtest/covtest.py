"""Covariance-matrix tests: identity/sphericity, two-sample equality,
max-difference, and banded-structure tests."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import ustat
from .core import (
    ChiSquared,
    ExtremeValueB,
    GroupedData,
    StandardNormal,
    as_data_matrix,
    make_result,
    sample_correlation,
    sample_covariance,
    TestResult,
)
from .errors import (
    CalibrationError,
    DegenerateVariableError,
    InsufficientDataError,
)

__all__ = [
    "BandSpec",
    "lw_v",
    "lw_u",
    "lw_w",
    "srivastava_s1",
    "srivastava_s2",
    "lc_two",
    "clx_cov",
    "theta_hat",
    "qc_banded",
    "cj_banded",
]

W_REGIME_SWITCH_P = 20


@dataclass(frozen=True)
class BandSpec:
    """Bandwidth tau >= 1: the hypothesis kills sigma_ij for |i-j| >= tau."""

    tau: int

    def __post_init__(self):
        if not (isinstance(self.tau, (int, np.integer)) and self.tau >= 1):
            raise ValueError(f"tau must be an integer >= 1, got {self.tau!r}")


# ---------------------------------------------------------------------------
# one-sample scatter tests
# ---------------------------------------------------------------------------


def lw_v(x) -> TestResult:
    """Identity-distance diagnostic V = tr(S - I)^2 / p.

    No null law is attached: in the proportional-dimension regime V converges
    to c a^2 + (a-1)^2 + delta^2 (c = p/n, a = tr(Sigma)/p), which is positive
    even under the null, so V cannot separate the hypotheses.  Reported as a
    diagnostic only.
    """
    dm = as_data_matrix(x)
    n, p = dm.n, dm.p
    s = sample_covariance(dm)
    v = float(np.einsum("ij,ij->", s - np.eye(p), s - np.eye(p))) / p
    return make_result("lw_v", v, None, None, n=n, p=p,
                       limit_formula="c*a^2 + (a-1)^2 + delta^2 with c=p/n",
                       c_hat=p / n, a_hat=float(np.trace(s)) / p)


def lw_u(x) -> TestResult:
    """Sphericity test U = tr(S/(tr S / p) - I)^2 / p.

    Null: (m U - p - 1)/2 -> N(0, 1) with m = n - 1.  U is scale invariant,
    so only the multiplier distinguishes the covariance-divisor conventions;
    matching it to the degrees of freedom of the demeaned covariance is what
    centers m U - p at one.
    """
    dm = as_data_matrix(x)
    n, p = dm.n, dm.p
    s = sample_covariance(dm)
    tr_s = float(np.trace(s))
    if tr_s <= 0:
        raise CalibrationError(f"tr(S) must be positive, got {tr_s!r}", value=tr_s)
    scaled = s / (tr_s / p) - np.eye(p)
    u = float(np.einsum("ij,ij->", scaled, scaled)) / p
    m = n - 1
    z = (m * u - p - 1.0) / 2.0
    return make_result("lw_u", u, z, StandardNormal(), n=n, p=p)


def lw_w(x, regime: str = "auto") -> TestResult:
    """Identity test W = tr(S-I)^2/p - (p/m)(tr S / p)^2 + p/m, m = n - 1.

    Two null laws are available: m p W / 2 ~ chi-squared(p(p+1)/2) for small
    fixed p, and (m W - p - 1)/2 -> N(0,1) for growing p.  ``regime`` picks
    "chisq", "normal", or "auto" (normal once p >= 20).  As in lw_u the
    sample count enters as the covariance degrees of freedom.
    """
    if regime not in ("auto", "normal", "chisq"):
        raise ValueError(f"unknown regime {regime!r}")
    dm = as_data_matrix(x)
    n, p = dm.n, dm.p
    m = n - 1
    s = sample_covariance(dm)
    tr_s = float(np.trace(s))
    dev = s - np.eye(p)
    w = (float(np.einsum("ij,ij->", dev, dev)) / p
         - p / m * (tr_s / p) ** 2 + p / m)
    use_normal = regime == "normal" or (regime == "auto" and p >= W_REGIME_SWITCH_P)
    if use_normal:
        z = (m * w - p - 1.0) / 2.0
        law = StandardNormal()
    else:
        z = m * p * w / 2.0
        law = ChiSquared(p * (p + 1) / 2.0)
    return make_result("lw_w", w, z, law, n=n, p=p,
                       regime="normal" if use_normal else "chisq")


def _srivastava_a2_hat(s: np.ndarray, n: int, p: int) -> float:
    tr_s = float(np.trace(s))
    tr_s2 = float(np.einsum("ij,ij->", s, s))
    return ((n - 1) ** 2 / (p * (n - 2) * (n + 1))
            * (tr_s2 - tr_s * tr_s / (n - 1)))


def srivastava_s1(x) -> TestResult:
    """Identity test from unbiased trace estimators.

    T = a2_hat - 2 a1_hat + 1 with a1_hat = tr(S)/p and
    a2_hat = (n-1)^2/(p(n-2)(n+1)) (tr S^2 - (tr S)^2/(n-1)).
    Null: (n/2) T -> N(0, 1).
    """
    dm = as_data_matrix(x)
    n, p = dm.n, dm.p
    if n < 3:
        raise InsufficientDataError(f"srivastava_s1 needs n >= 3, got n = {n}")
    s = sample_covariance(dm)
    a1 = float(np.trace(s)) / p
    a2 = _srivastava_a2_hat(s, n, p)
    stat = a2 - 2.0 * a1 + 1.0
    z = n / 2.0 * stat
    return make_result("srivastava_s1", stat, z, StandardNormal(), n=n, p=p,
                       a1_hat=a1, a2_hat=a2)


def srivastava_s2(x) -> TestResult:
    """Sphericity test T = (a2_hat - a1_hat^2) / a1_hat^2; (n/2) T -> N(0,1)."""
    dm = as_data_matrix(x)
    n, p = dm.n, dm.p
    if n < 3:
        raise InsufficientDataError(f"srivastava_s2 needs n >= 3, got n = {n}")
    s = sample_covariance(dm)
    a1 = float(np.trace(s)) / p
    if a1 == 0:
        raise CalibrationError("tr(S)/p estimate vanishes", value=a1)
    a2 = _srivastava_a2_hat(s, n, p)
    stat = (a2 - a1 * a1) / (a1 * a1)
    z = n / 2.0 * stat
    return make_result("srivastava_s2", stat, z, StandardNormal(), n=n, p=p,
                       a1_hat=a1, a2_hat=a2)


# ---------------------------------------------------------------------------
# two-sample equality tests
# ---------------------------------------------------------------------------


def lc_two(g: GroupedData) -> TestResult:
    """Two-sample covariance equality test on tr(Sigma_1 - Sigma_2)^2.

    T = A_1 + A_2 - 2 C, all quartic U-statistics; the scale plug-in is
    2 A_1/n_1 + 2 A_2/n_2, ratio-consistent for sqrt(Var T) under the null.
    """
    if g.k != 2:
        raise ValueError(f"lc_two needs exactly 2 groups, got k = {g.k}")
    x1, x2 = g.groups
    n1, n2 = x1.n, x2.n
    if n1 < 4 or n2 < 4:
        raise InsufficientDataError("lc_two needs n1, n2 >= 4")
    a1 = ustat.lc_a(x1.values)
    a2 = ustat.lc_a(x2.values)
    c = ustat.lc_c(x1.values, x2.values)
    stat = a1 + a2 - 2.0 * c
    scale = 2.0 * a1 / n1 + 2.0 * a2 / n2
    if scale <= 0:
        raise CalibrationError(
            f"variance plug-in is nonpositive: {scale!r}", value=scale
        )
    z = stat / scale
    return make_result("lc_two", stat, z, StandardNormal(), n=(n1, n2), p=g.p,
                       a1=a1, a2=a2, c=c)


def theta_hat(x) -> tuple:
    """Per-entry variance estimates of the sample covariances s_ij.

    Returns (s, theta) where s uses divisor n (matching the theta formula)
    and theta_ij = (1/n) sum_k [(X_ki - m_i)(X_kj - m_j) - s_ij]^2.
    """
    v = ustat._values(x)
    n = v.shape[0]
    c = v - v.mean(axis=0)
    s = c.T @ c / n
    sq = c * c
    e2 = sq.T @ sq / n          # (1/n) sum_k (c_ki c_kj)^2
    theta = e2 - s * s
    return s, theta


def clx_cov(g: GroupedData) -> TestResult:
    """Max studentized difference of the two sample covariances.

    M = max_{i<=j} (s_ij1 - s_ij2)^2 / (theta_ij1/n1 + theta_ij2/n2);
    standardized = M - 4 log p + log log p, extreme-value null with CDF
    exp(-(1/sqrt(8 pi)) exp(-x/2)).  Sample covariances and their variance
    estimates both use divisor n_l.
    """
    if g.k != 2:
        raise ValueError(f"clx_cov needs exactly 2 groups, got k = {g.k}")
    x1, x2 = g.groups
    p = g.p
    if p < 3:
        raise ValueError(f"the extreme-value null needs p >= 3, got p = {p}")
    s1, th1 = theta_hat(x1.values)
    s2, th2 = theta_hat(x2.values)
    denom = th1 / x1.n + th2 / x2.n
    iu = np.triu_indices(p)
    bad = denom[iu] <= 0
    if bad.any():
        which = int(np.flatnonzero(bad)[0])
        i, j = int(iu[0][which]), int(iu[1][which])
        raise DegenerateVariableError(
            f"variance estimate for covariance entry ({i}, {j}) is nonpositive",
            index=i,
        )
    ratios = (s1 - s2)[iu] ** 2 / denom[iu]
    which = int(np.argmax(ratios))
    stat = float(ratios[which])
    z = stat - 4.0 * math.log(p) + math.log(math.log(p))
    return make_result("clx_cov", stat, z, ExtremeValueB(),
                       n=(x1.n, x2.n), p=p,
                       argmax=(int(iu[0][which]), int(iu[1][which])))


# ---------------------------------------------------------------------------
# banded-structure tests
# ---------------------------------------------------------------------------


def qc_lag_terms(x, lags) -> dict:
    """sum_l sigma2_hat_{l,l+q} for each requested lag q, on zero-mean data."""
    v = ustat._values(x)
    out = {}
    for q in lags:
        out[int(q)] = float(ustat.qc_lag_values(v, q).sum())
    return out


def qc_banded(x, band: BandSpec) -> TestResult:
    """Euclidean-type test that the covariance is banded at bandwidth tau.

    T = 2 sum_{q=tau}^{p-1} sum_l sigma2_hat_{l,l+q}, targeting the sum of
    squared out-of-band covariances; the scale is
    V = sum_l sigma2_hat_{ll} + 2 sum_{q=1}^{tau} sum_l sigma2_hat_{l,l+q}
    and standardized = (n T / V) / 2 -> N(0, 1).

    The estimators assume a zero mean: center the data first (the simulation
    harness and the CLI subtract the column means before calling, accepting
    the O(1/n) bias this introduces).
    """
    v = ustat._values(x)
    n, p = v.shape
    tau = band.tau
    if n < 4:
        raise InsufficientDataError(f"qc_banded needs n >= 4, got n = {n}")
    if not 1 <= tau <= p - 2:
        raise ValueError(f"need 1 <= tau <= p - 2, got tau = {tau}, p = {p}")
    out_lags = qc_lag_terms(v, range(tau, p))
    stat = 2.0 * sum(out_lags.values())
    in_lags = qc_lag_terms(v, range(0, tau + 1))
    v_scale = in_lags[0] + 2.0 * sum(in_lags[q] for q in range(1, tau + 1))
    if v_scale <= 0:
        raise CalibrationError(
            f"scale estimate is nonpositive: {v_scale!r}", value=v_scale
        )
    z = (n * stat / v_scale) / 2.0
    return make_result("qc_banded", stat, z, StandardNormal(), n=n, p=p,
                       tau=tau, v_scale=v_scale)


def cj_banded(x, band: BandSpec) -> TestResult:
    """Max-correlation test that the covariance is banded at bandwidth tau.

    T = max_{|i-j| >= tau} |r_ij| over the sample correlations;
    standardized = n T^2 - 4 log p + log log p, extreme-value null with CDF
    exp(-(1/sqrt(8 pi)) exp(-x/2)).  tau = 1 tests complete independence.
    """
    dm = as_data_matrix(x)
    n, p = dm.n, dm.p
    tau = band.tau
    if n < 3:
        raise InsufficientDataError(f"cj_banded needs n >= 3, got n = {n}")
    if not 1 <= tau <= p - 1:
        raise ValueError(f"need 1 <= tau <= p - 1, got tau = {tau}, p = {p}")
    r = sample_correlation(sample_covariance(dm))
    i, j = np.triu_indices(p, k=tau)
    vals = np.abs(r[i, j])
    which = int(np.argmax(vals))
    stat = float(vals[which])
    z = n * stat * stat - 4.0 * math.log(p) + math.log(math.log(p))
    return make_result("cj_banded", stat, z, ExtremeValueB(), n=n, p=p, tau=tau,
                       argmax=(int(i[which]), int(j[which])))
