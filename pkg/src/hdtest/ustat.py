"""U-statistic estimators of trace functionals and quadratic-form variances.

Every estimator here exists in two routes: a fast power-sum form obtained by
inclusion-exclusion over distinct index tuples, and a literal enumeration
(``*_enum``) kept as the brute-force oracle.  Correctness of the fast forms is
established solely by oracle equality on small samples, never by trusting the
derivation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import as_data_matrix
from .errors import (
    DegenerateVariableError,
    DimensionMismatchError,
    InsufficientDataError,
    OracleCapError,
)

__all__ = [
    "PowerSums",
    "QuarticSums",
    "power_sums",
    "quartic_sums_fast",
    "quartic_sums_enum",
    "falling",
    "sigma2_hat_fast",
    "sigma2_hat_oracle",
    "tr_sigma2_hat_cq",
    "tr_cross_hat_cq",
    "lc_a",
    "lc_a_enum",
    "lc_c",
    "lc_c_enum",
    "qc_sigma_sq_hat",
    "qc_lag_values",
    "qc_sigma_sq_hat_enum",
    "tr_r2_hat_pa",
    "pa_kernels",
]

DEFAULT_ORACLE_CAP = 10
DEFAULT_PAIRWISE_CAP = 12


def falling(n: int, l: int) -> int:
    """Falling factorial n (n-1) ... (n-l+1), exact integer arithmetic."""
    if l < 0 or n < l:
        raise ValueError(f"falling factorial needs 0 <= l <= n, got n={n}, l={l}")
    return math.perm(n, l)


def _values(x) -> np.ndarray:
    """Accept a DataMatrix or any 2-d array-like (helpers tolerate n = 1)."""
    from .core import DataMatrix

    if isinstance(x, DataMatrix):
        return x.values
    a = np.asarray(x, dtype=float)
    if a.ndim != 2:
        raise ValueError(f"expected 2-d data, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("data contains non-finite entries")
    return a


# ---------------------------------------------------------------------------
# power sums
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PowerSums:
    """Single-pass accumulations over the rows X_j of a sample.

    xsum  : sum_j X_j                       (p-vector)
    a     : sum_j X_j'X_j                   (= trace(x2))
    x2    : sum_j X_j X_j'                  (p x p)
    x3    : sum_j (X_j'X_j) X_j             (p-vector)
    b     : sum_j (X_j'X_j)^2
    """

    xsum: np.ndarray
    a: float
    x2: np.ndarray
    x3: np.ndarray
    b: float


def power_sums(x) -> PowerSums:
    """Compute the five power sums in one pass over the rows.

    Scalar accumulations use compensated summation (math.fsum); the b and a^2
    terms meet with large cancellations downstream.
    """
    v = _values(x)
    w = np.einsum("ij,ij->i", v, v)
    a = math.fsum(w.tolist())
    b = math.fsum((w * w).tolist())
    x3 = w @ v
    x2 = v.T @ v
    xsum = v.sum(axis=0)
    return PowerSums(xsum=xsum, a=float(a), x2=(x2 + x2.T) / 2.0, x3=x3, b=float(b))


# ---------------------------------------------------------------------------
# quartic index sums (distinct-index sums of products of two Gram entries)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuarticSums:
    """The six distinct-index sums of g_.. g_.. with g_jk = X_j'X_k.

    diag_sq      : sum_j g_jj^2
    diag_offdiag : sum_{j != k} g_jj g_jk
    diag_diag    : sum_{j != k} g_jj g_kk
    row_pair     : sum_{j,k,l distinct} g_jk g_jl
    diag_cross   : sum_{j,k,l distinct} g_jj g_kl
    full_cross   : sum_{j,k,l,m distinct} g_jk g_lm
    """

    diag_sq: float
    diag_offdiag: float
    diag_diag: float
    row_pair: float
    diag_cross: float
    full_cross: float

    def as_tuple(self):
        return (self.diag_sq, self.diag_offdiag, self.diag_diag,
                self.row_pair, self.diag_cross, self.full_cross)


def quartic_sums_fast(x) -> QuarticSums:
    """Closed power-sum forms of the six quartic index sums."""
    ps = x if isinstance(x, PowerSums) else power_sums(x)
    sq = float(ps.xsum @ ps.xsum)              # (sum X_j)'(sum X_j)
    t2 = float(np.einsum("ij,ij->", ps.x2, ps.x2))   # tr(x2^2)
    xx2x = float(ps.xsum @ ps.x2 @ ps.xsum)
    xx3 = float(ps.xsum @ ps.x3)
    a, b = ps.a, ps.b
    return QuarticSums(
        diag_sq=b,
        diag_offdiag=xx3 - b,
        diag_diag=a * a - b,
        row_pair=xx2x - 2.0 * xx3 - t2 + 2.0 * b,
        diag_cross=sq * a - a * a - 2.0 * xx3 + 2.0 * b,
        full_cross=sq * sq - 2.0 * sq * a - 4.0 * xx2x + a * a + 2.0 * t2
        + 8.0 * xx3 - 6.0 * b,
    )


def _distinct3_mask(n: int) -> np.ndarray:
    j, k, l = np.ogrid[:n, :n, :n]
    return (j != k) & (j != l) & (k != l)


def quartic_sums_enum(x, cap: int = DEFAULT_PAIRWISE_CAP) -> QuarticSums:
    """Literal enumeration of the six quartic index sums.

    Every distinct tuple contributes its own product; cost is O(n^4) and the
    call refuses n above ``cap`` unless a larger cap is passed explicitly.
    """
    v = _values(x)
    n = v.shape[0]
    if n > cap:
        raise OracleCapError(f"enumeration capped at n <= {cap}, got n = {n}")
    g = v @ v.T
    d = np.diag(g).copy()

    off = ~np.eye(n, dtype=bool)
    diag_sq = float((d * d).sum())
    diag_offdiag = float((d[:, None] * g)[off].sum())
    diag_diag = float((d[:, None] * d[None, :])[off].sum())

    m3 = _distinct3_mask(n)
    row_pair = float((g[:, :, None] * g[:, None, :])[m3].sum())
    diag_cross = float((d[:, None, None] * g[None, :, :])[m3].sum())

    # sum over distinct (j,k,l,m) of g_jk g_lm, chunked over j
    full_cross = 0.0
    m3_klm = m3  # same mask shape for the trailing three indices
    for j in range(n):
        grid = g[j][:, None, None] * g[None, :, :]
        grid = np.where(m3_klm, grid, 0.0)
        grid[j, :, :] = 0.0
        grid[:, j, :] = 0.0
        grid[:, :, j] = 0.0
        full_cross += float(grid.sum())
    return QuarticSums(diag_sq, diag_offdiag, diag_diag, row_pair,
                       diag_cross, float(full_cross))


# ---------------------------------------------------------------------------
# variance of a squared norm (the ANT studentizer)
# ---------------------------------------------------------------------------


def _sigma2_from_quartic(qs: QuarticSums, n: int) -> float:
    f2, f3, f4 = falling(n, 2), falling(n, 3), falling(n, 4)
    return (
        qs.diag_sq / n
        - 4.0 * qs.diag_offdiag / f2
        - qs.diag_diag / f2
        + 6.0 * qs.row_pair / f3
        + 2.0 * qs.diag_cross / f3
        - 4.0 * qs.full_cross / f4
    )


def sigma2_hat_fast(x) -> float:
    """Fast power-sum form of the squared-norm variance estimator.

    Ratio-consistent for Var(||X_1||^2) = 2 tr(Sigma^2) + (EZ^4 - 3) sum_i
    (gamma_i'gamma_i)^2, for data centered at the hypothesized mean.  Cost is
    one pass over the rows plus one p x p (or n x n) product.
    """
    v = _values(x)
    n = v.shape[0]
    if n < 6:
        raise InsufficientDataError(f"sigma2_hat needs n >= 6, got n = {n}")
    return _sigma2_from_quartic(quartic_sums_fast(v), n)


def sigma2_hat_oracle(x, cap: int = DEFAULT_ORACLE_CAP) -> float:
    """Brute-force enumeration form of sigma2_hat_fast; O(n^4)."""
    v = _values(x)
    n = v.shape[0]
    if n < 6:
        raise InsufficientDataError(f"sigma2_hat needs n >= 6, got n = {n}")
    if n > cap:
        raise OracleCapError(f"oracle capped at n <= {cap}, got n = {n}")
    return _sigma2_from_quartic(quartic_sums_enum(v, cap=cap), n)


# ---------------------------------------------------------------------------
# leave-out trace estimators
# ---------------------------------------------------------------------------


def tr_sigma2_hat_cq(x) -> float:
    """Leave-two-out estimator of tr(Sigma^2) from one sample.

    Unbiased when the sample mean is zero; under a nonzero mean the bias is
    mu'Sigma mu/(n-2).
    """
    v = _values(x)
    n = v.shape[0]
    if n < 4:
        raise InsufficientDataError(f"tr_sigma2_hat_cq needs n >= 4, got n = {n}")
    g = v @ v.T
    r = g.sum(axis=1)
    dg = np.diag(g)
    # X_k'(X_j - mean excluding j,k), arranged as matrices over (j, k)
    left = g - (r[None, :] - g - dg[None, :]) / (n - 2)
    right = g - (r[:, None] - g - dg[:, None]) / (n - 2)
    prod = left * right
    np.fill_diagonal(prod, 0.0)
    return float(prod.sum() / (n * (n - 1)))


def tr_cross_hat_cq(x1, x2) -> float:
    """Leave-one-out estimator of tr(Sigma_1 Sigma_2); unbiased for any means."""
    v1, v2 = _values(x1), _values(x2)
    if v1.shape[1] != v2.shape[1]:
        raise DimensionMismatchError(
            f"samples have p = {v1.shape[1]} and p = {v2.shape[1]}"
        )
    n1, n2 = v1.shape[0], v2.shape[0]
    if n1 < 3 or n2 < 3:
        raise InsufficientDataError(
            f"tr_cross_hat_cq needs n1, n2 >= 3, got {n1}, {n2}"
        )
    h = v1 @ v2.T
    rs = h.sum(axis=1)   # X_1j' sum(X_2)
    cs = h.sum(axis=0)   # X_2k' sum(X_1)
    left = h - (cs[None, :] - h) / (n1 - 1)   # X_2k'(X_1j - mean_1 excl j)
    right = h - (rs[:, None] - h) / (n2 - 1)  # X_1j'(X_2k - mean_2 excl k)
    return float((left * right).sum() / (n1 * n2))


# ---------------------------------------------------------------------------
# two-sample scatter kernels (tr Sigma^2 and tr Sigma_1 Sigma_2, quartic form)
# ---------------------------------------------------------------------------


def lc_a(x) -> float:
    """Unbiased quartic estimator of tr(Sigma^2), fast power-sum form."""
    v = _values(x)
    n = v.shape[0]
    if n < 4:
        raise InsufficientDataError(f"lc_a needs n >= 4, got n = {n}")
    ps = power_sums(v)
    qs = quartic_sums_fast(ps)
    t2 = float(np.einsum("ij,ij->", ps.x2, ps.x2))
    s1 = t2 - ps.b                       # sum_{i != j} g_ij^2
    return s1 / falling(n, 2) - 2.0 * qs.row_pair / falling(n, 3) \
        + qs.full_cross / falling(n, 4)


def lc_a_enum(x, cap: int = DEFAULT_PAIRWISE_CAP) -> float:
    """Literal enumeration form of lc_a; O(n^4), capped."""
    v = _values(x)
    n = v.shape[0]
    if n < 4:
        raise InsufficientDataError(f"lc_a needs n >= 4, got n = {n}")
    qs = quartic_sums_enum(v, cap=cap)
    g = v @ v.T
    off = ~np.eye(n, dtype=bool)
    s1 = float((g * g)[off].sum())
    return s1 / falling(n, 2) - 2.0 * qs.row_pair / falling(n, 3) \
        + qs.full_cross / falling(n, 4)


def lc_c(x1, x2) -> float:
    """Unbiased quartic estimator of tr(Sigma_1 Sigma_2), fast form."""
    v1, v2 = _values(x1), _values(x2)
    if v1.shape[1] != v2.shape[1]:
        raise DimensionMismatchError(
            f"samples have p = {v1.shape[1]} and p = {v2.shape[1]}"
        )
    n1, n2 = v1.shape[0], v2.shape[0]
    if n1 < 2 or n2 < 2:
        raise InsufficientDataError(f"lc_c needs n1, n2 >= 2, got {n1}, {n2}")
    h = v1 @ v2.T
    frob = float(np.einsum("ij,ij->", h, h))
    rs = h.sum(axis=1)
    cs = h.sum(axis=0)
    tot = float(h.sum())
    ssr = float(rs @ rs)
    ssc = float(cs @ cs)
    t1 = frob / (n1 * n2)
    t2 = (ssc - frob) / (n2 * falling(n1, 2))
    t3 = (ssr - frob) / (n1 * falling(n2, 2))
    t4 = (tot * tot - ssr - ssc + frob) / (falling(n1, 2) * falling(n2, 2))
    return t1 - t2 - t3 + t4


def lc_c_enum(x1, x2, cap: int = DEFAULT_PAIRWISE_CAP) -> float:
    """Literal enumeration form of lc_c; capped."""
    v1, v2 = _values(x1), _values(x2)
    if v1.shape[1] != v2.shape[1]:
        raise DimensionMismatchError("dimension mismatch")
    n1, n2 = v1.shape[0], v2.shape[0]
    if n1 < 2 or n2 < 2:
        raise InsufficientDataError(f"lc_c needs n1, n2 >= 2, got {n1}, {n2}")
    if max(n1, n2) > cap:
        raise OracleCapError(f"enumeration capped at n <= {cap}")
    h = v1 @ v2.T
    t1 = sum(h[i, j] ** 2 for i in range(n1) for j in range(n2)) / (n1 * n2)
    t2 = sum(
        h[i, j] * h[k, j]
        for i in range(n1) for k in range(n1) if i != k
        for j in range(n2)
    ) / (n2 * falling(n1, 2))
    t3 = sum(
        h[j, i] * h[j, k]
        for i in range(n2) for k in range(n2) if i != k
        for j in range(n1)
    ) / (n1 * falling(n2, 2))
    t4 = sum(
        h[i, j] * h[k, l]
        for i in range(n1) for k in range(n1) if i != k
        for j in range(n2) for l in range(n2) if j != l
    ) / (falling(n1, 2) * falling(n2, 2))
    return float(t1 - t2 - t3 + t4)


# ---------------------------------------------------------------------------
# single-entry squared-covariance estimator (banded tests)
# ---------------------------------------------------------------------------


def _qc_column_values(u: np.ndarray, v: np.ndarray, n: int) -> np.ndarray:
    """Vector of sigma_{uv}^2 estimates for paired column blocks.

    ``u`` and ``v`` are (n, q) blocks of columns; assumes zero-mean columns
    (callers subtract the sample mean first and accept the O(1/n) bias this
    introduces).  Returns the q per-pair estimates.
    """
    w = u * v
    U, V, W = u.sum(axis=0), v.sum(axis=0), w.sum(axis=0)
    su2 = (u * u).sum(axis=0)
    sv2 = (v * v).sum(axis=0)
    su2v = (u * w).sum(axis=0)       # sum u^2 v
    suv2 = (v * w).sum(axis=0)       # sum u v^2
    sw2 = (w * w).sum(axis=0)        # sum u^2 v^2
    t1 = W * W - sw2
    t2 = U * V * W - W * W - V * su2v - U * suv2 + 2.0 * sw2
    t3 = (U * U * V * V - 4.0 * U * V * W - V * V * su2 - U * U * sv2
          + 2.0 * W * W + su2 * sv2 + 4.0 * V * su2v + 4.0 * U * suv2
          - 6.0 * sw2)
    return (t1 / falling(n, 2) - 2.0 * t2 / falling(n, 3)
            + t3 / falling(n, 4))


def qc_lag_values(x, lag: int) -> np.ndarray:
    """sigma_{l,l+lag}^2 estimates for every column pair at one lag."""
    v = _values(x)
    n, p = v.shape
    if n < 4:
        raise InsufficientDataError(f"qc_sigma_sq_hat needs n >= 4, got n = {n}")
    if not 0 <= lag <= p - 1:
        raise IndexError(f"lag {lag} out of range for p = {p}")
    stop = p - lag
    return _qc_column_values(v[:, :stop], v[:, lag:], n)


def qc_sigma_sq_hat(x, col: int, lag: int) -> float:
    """Unbiased estimator of sigma_{l,l+q}^2 for zero-mean data.

    ``col`` is a 0-based variable index and ``lag`` >= 0; the pair of columns
    (col, col+lag) must exist.
    """
    v = _values(x)
    n, p = v.shape
    if not (0 <= col and col + lag < p and lag >= 0):
        raise IndexError(f"column pair ({col}, {col + lag}) out of range for p = {p}")
    if n < 4:
        raise InsufficientDataError(f"qc_sigma_sq_hat needs n >= 4, got n = {n}")
    vals = _qc_column_values(v[:, col:col + 1], v[:, col + lag:col + lag + 1], n)
    return float(vals[0])


def qc_sigma_sq_hat_enum(x, col: int, lag: int, cap: int = DEFAULT_PAIRWISE_CAP) -> float:
    """Literal enumeration form of qc_sigma_sq_hat; capped."""
    v = _values(x)
    n, p = v.shape
    if not (0 <= col and col + lag < p and lag >= 0):
        raise IndexError(f"column pair ({col}, {col + lag}) out of range for p = {p}")
    if n < 4:
        raise InsufficientDataError(f"qc_sigma_sq_hat needs n >= 4, got n = {n}")
    if n > cap:
        raise OracleCapError(f"enumeration capped at n <= {cap}")
    u = v[:, col]
    w = v[:, col + lag]
    t1 = sum(u[i] * w[i] * u[j] * w[j] for i in range(n) for j in range(n) if i != j)
    t2 = sum(
        u[i] * w[j] * u[k] * w[k]
        for i in range(n) for j in range(n) for k in range(n)
        if i != j and i != k and j != k
    )
    t3 = sum(
        u[i] * w[j] * u[k] * w[m]
        for i in range(n) for j in range(n) for k in range(n) for m in range(n)
        if len({i, j, k, m}) == 4
    )
    return float(t1 / falling(n, 2) - 2.0 * t2 / falling(n, 3) + t3 / falling(n, 4))


# ---------------------------------------------------------------------------
# leave-two-out correlation-scale estimators (Park-Ayyala machinery)
# ---------------------------------------------------------------------------


def pa_kernels(x):
    """Leave-two-out diagonally studentized kernels.

    Returns (num, trr2) where

    num   = sum_{i != j} X_i' D_(i,j)^{-1} X_j
    trr2  = (1/(n(n-1))) sum_{i != j} X_i'D^{-1}(X_j - m_ij) X_j'D^{-1}(X_i - m_ij)

    with m_ij the mean and D_(i,j) the diagonal variance matrix of the sample
    excluding rows i and j (divisors n-2 and n-3).
    """
    v = _values(x)
    n, p = v.shape
    if n < 6:
        raise InsufficientDataError(f"leave-two-out kernels need n >= 6, got n = {n}")
    tot = v.sum(axis=0)
    sq = (v * v).sum(axis=0)
    num = 0.0
    trr2 = 0.0
    for i in range(n):
        xi = v[i]
        t = tot - xi - v          # (n, p): column sums excluding i and each j
        q = sq - xi * xi - v * v
        m = t / (n - 2)
        d = (q - (n - 2) * m * m) / (n - 3)
        bad = d <= 0
        bad[i] = False
        if bad.any():
            j, l = map(int, np.argwhere(bad)[0])
            raise DegenerateVariableError(
                f"leave-two-out variance of variable {l} is nonpositive "
                f"(excluding rows {i} and {j})",
                index=l,
            )
        d[i] = 1.0                # the i == j row is excluded below
        xi_d = xi / d             # (n, p)
        num_row = (xi_d * v).sum(axis=1)
        a_row = (xi_d * (v - m)).sum(axis=1)     # X_i'D^{-1}(X_j - m_ij)
        b_row = ((v / d) * (xi - m)).sum(axis=1)  # X_j'D^{-1}(X_i - m_ij)
        num_row[i] = 0.0
        prod = a_row * b_row
        prod[i] = 0.0
        num += float(num_row.sum())
        trr2 += float(prod.sum())
    return num, trr2 / (n * (n - 1))


def tr_r2_hat_pa(x) -> float:
    """Ratio-consistent leave-two-out estimator of tr(R^2)."""
    return pa_kernels(x)[1]
