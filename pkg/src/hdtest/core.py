"""Data model, elementary moments, null laws, and p-value machinery.

Conventions used throughout the package:

* observations are rows, variables are columns;
* every p-value is upper-tail: ``p = 1 - CDF_null(standardized)``;
* quantiles are upper quantiles, so ``p_value(law, quantile(law, a)) == a``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import (
    DegenerateVariableError,
    DimensionMismatchError,
    InsufficientDataError,
)

__all__ = [
    "DataMatrix",
    "GroupedData",
    "as_data_matrix",
    "sample_mean",
    "sample_covariance",
    "pooled_covariance",
    "sample_correlation",
    "NullLaw",
    "StandardNormal",
    "NormalLaw",
    "FisherF",
    "ChiSquared",
    "ExtremeValueA",
    "ExtremeValueB",
    "ExtremeValueCX",
    "p_value",
    "quantile",
    "TestResult",
]


# ---------------------------------------------------------------------------
# data model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DataMatrix:
    """An n x p sample: rows are observations, columns are variables.

    Requires n >= 2, p >= 1 and all entries finite.
    """

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError(f"expected a 2-d array, got shape {values.shape}")
        n, p = values.shape
        if n < 2:
            raise InsufficientDataError(f"need at least 2 observations, got {n}")
        if p < 1:
            raise ValueError("need at least one variable")
        if not np.all(np.isfinite(values)):
            raise ValueError("data contains non-finite entries")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]


def as_data_matrix(x) -> DataMatrix:
    """Coerce an array-like (or pass through a DataMatrix)."""
    if isinstance(x, DataMatrix):
        return x
    return DataMatrix(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class GroupedData:
    """An ordered collection of k >= 2 samples sharing the same variables."""

    groups: tuple

    def __post_init__(self):
        groups = tuple(as_data_matrix(g) for g in self.groups)
        if len(groups) < 2:
            raise ValueError(f"need at least 2 groups, got {len(groups)}")
        p = groups[0].p
        for i, g in enumerate(groups):
            if g.p != p:
                raise DimensionMismatchError(
                    f"group {i} has p={g.p}, expected p={p}"
                )
        object.__setattr__(self, "groups", groups)

    @property
    def k(self) -> int:
        return len(self.groups)

    @property
    def p(self) -> int:
        return self.groups[0].p

    @property
    def sizes(self) -> tuple:
        return tuple(g.n for g in self.groups)

    @property
    def total_n(self) -> int:
        return sum(self.sizes)


def grouped(*arrays) -> GroupedData:
    """Build a GroupedData from raw arrays."""
    return GroupedData(tuple(as_data_matrix(a) for a in arrays))


# ---------------------------------------------------------------------------
# elementary moments
# ---------------------------------------------------------------------------


def sample_mean(x) -> np.ndarray:
    """Componentwise average of the rows."""
    return as_data_matrix(x).values.mean(axis=0)


def sample_covariance(x) -> np.ndarray:
    """Centered second-moment matrix with divisor n - 1."""
    dm = as_data_matrix(x)
    if dm.n < 2:
        raise InsufficientDataError("sample covariance needs n >= 2")
    c = dm.values - dm.values.mean(axis=0)
    s = c.T @ c / (dm.n - 1)
    return (s + s.T) / 2.0


def pooled_covariance(g: GroupedData) -> np.ndarray:
    """Within-group centered scatter divided by n - k."""
    g = g if isinstance(g, GroupedData) else GroupedData(tuple(g))
    dof = g.total_n - g.k
    if dof < 1:
        raise InsufficientDataError(
            f"pooled covariance needs sum(n_i) - k >= 1, got {dof}"
        )
    p = g.p
    scatter = np.zeros((p, p))
    for grp in g.groups:
        c = grp.values - grp.values.mean(axis=0)
        scatter += c.T @ c
    s = scatter / dof
    return (s + s.T) / 2.0


def sample_correlation(s: np.ndarray) -> np.ndarray:
    """Rescale a covariance matrix to unit diagonal."""
    s = np.asarray(s, dtype=float)
    d = np.diag(s)
    bad = np.flatnonzero(d <= 0)
    if bad.size:
        raise DegenerateVariableError(
            f"variable {bad[0]} has nonpositive variance {d[bad[0]]!r}",
            index=int(bad[0]),
        )
    inv = 1.0 / np.sqrt(d)
    r = s * inv[:, None] * inv[None, :]
    r = (r + r.T) / 2.0
    np.fill_diagonal(r, 1.0)
    return r


# ---------------------------------------------------------------------------
# null laws
# ---------------------------------------------------------------------------


class NullLaw:
    """A closed-form limiting distribution with a cheap CDF."""

    name = "null-law"

    def cdf(self, x: float) -> float:  # pragma: no cover - abstract
        raise NotImplementedError

    def describe(self) -> str:
        return self.name


@dataclass(frozen=True)
class StandardNormal(NullLaw):
    name = "standard-normal"

    def cdf(self, x):
        return float(special.ndtr(x))


@dataclass(frozen=True)
class NormalLaw(NullLaw):
    mean: float
    variance: float
    name = "normal"

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError(f"variance must be positive, got {self.variance}")

    def cdf(self, x):
        return float(special.ndtr((x - self.mean) / math.sqrt(self.variance)))

    def describe(self):
        return f"normal(mean={self.mean:g}, variance={self.variance:g})"


@dataclass(frozen=True)
class FisherF(NullLaw):
    """F law; degrees of freedom may be non-integer (estimated)."""

    d1: float
    d2: float
    name = "fisher-f"

    def __post_init__(self):
        if not (self.d1 > 0 and self.d2 > 0):
            raise ValueError(f"degrees of freedom must be positive, got {self.d1}, {self.d2}")

    def cdf(self, x):
        if x <= 0:
            return 0.0
        # regularized incomplete beta, abs accuracy well below 1e-10
        return float(special.fdtr(self.d1, self.d2, x))

    def describe(self):
        return f"F({self.d1:g}, {self.d2:g})"


@dataclass(frozen=True)
class ChiSquared(NullLaw):
    df: float
    name = "chi-squared"

    def __post_init__(self):
        if not self.df > 0:
            raise ValueError(f"df must be positive, got {self.df}")

    def cdf(self, x):
        if x <= 0:
            return 0.0
        return float(special.chdtr(self.df, x))

    def describe(self):
        return f"chi-squared({self.df:g})"


class _GumbelHalfScale(NullLaw):
    """CDF exp(-c * exp(-x / s)); the max-statistic limit family."""

    _c = 1.0
    _s = 2.0

    def cdf(self, x):
        inner = -x / self._s
        if inner > 690.0:          # exp would overflow; the CDF is 0 there
            return 0.0
        return float(math.exp(-self._c * math.exp(inner)))


@dataclass(frozen=True)
class ExtremeValueA(_GumbelHalfScale):
    """CDF exp(-(1/pi) exp(-x/2))."""

    name = "extreme-value-a"
    _c = 1.0 / math.pi


@dataclass(frozen=True)
class ExtremeValueB(_GumbelHalfScale):
    """CDF exp(-(1/sqrt(8 pi)) exp(-x/2))."""

    name = "extreme-value-b"
    _c = 1.0 / math.sqrt(8.0 * math.pi)


@dataclass(frozen=True)
class ExtremeValueCX(NullLaw):
    """CDF exp(-H/Gamma(d/2) * exp(-x/(2 lambda_sq))).

    ``lambda_sq`` is the top eigenvalue of the contrast correlation matrix,
    ``d`` its multiplicity and ``H`` the spectral product attached to the
    remaining eigenvalues.
    """

    lambda_sq: float
    d: int
    H: float
    name = "extreme-value-cx"

    def __post_init__(self):
        if not self.lambda_sq > 0:
            raise ValueError(f"lambda_sq must be positive, got {self.lambda_sq}")
        if not (isinstance(self.d, (int, np.integer)) and self.d >= 1):
            raise ValueError(f"d must be an integer >= 1, got {self.d!r}")
        if not self.H > 0:
            raise ValueError(f"H must be positive, got {self.H}")

    def cdf(self, x):
        c = self.H / special.gamma(self.d / 2.0)
        inner = -x / (2.0 * self.lambda_sq)
        if inner > 690.0:
            return 0.0
        return float(math.exp(-c * math.exp(inner)))

    def describe(self):
        return f"extreme-value-cx(lambda_sq={self.lambda_sq:g}, d={self.d}, H={self.H:g})"


def p_value(law: NullLaw, z: float) -> float:
    """Upper-tail probability 1 - CDF(z)."""
    if not isinstance(law, NullLaw):
        raise TypeError(f"expected a NullLaw, got {type(law)!r}")
    p = 1.0 - law.cdf(float(z))
    return min(1.0, max(0.0, p))


def quantile(law: NullLaw, alpha: float, tol: float = 1e-8) -> float:
    """Upper alpha quantile: the t with p_value(law, t) == alpha.

    Solved by bracketing and bisection; every CDF here is monotone and cheap.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be in (0, 1), got {alpha}")
    target = 1.0 - alpha
    lo, hi = -1.0, 1.0
    while law.cdf(lo) > target:
        lo *= 2.0
        if lo < -1e300:
            raise RuntimeError("failed to bracket quantile from below")
    while law.cdf(hi) < target:
        hi *= 2.0
        if hi > 1e300:
            raise RuntimeError("failed to bracket quantile from above")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if law.cdf(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# test result container
# ---------------------------------------------------------------------------


@dataclass
class TestResult:
    """Outcome of a single significance test.

    ``standardized`` is the statistic referred to ``null_law``; diagnostics
    without a null law (e.g. the inconsistent one-sample scatter statistic V)
    carry ``None`` for the law, the standardized value and the p-value.
    """

    statistic: float
    standardized: float | None
    null_law: NullLaw | None
    p_value: float | None
    metadata: dict = field(default_factory=dict)

    def reject(self, alpha: float) -> bool:
        if self.p_value is None:
            raise ValueError(f"{self.metadata.get('test', 'this statistic')} carries no p-value")
        return self.p_value <= alpha


def make_result(test: str, statistic, standardized, law, **metadata) -> TestResult:
    """Assemble a TestResult with the standard upper-tail p-value."""
    meta = {"test": test}
    meta.update(metadata)
    if law is None:
        return TestResult(float(statistic), None if standardized is None else float(standardized),
                          None, None, meta)
    z = float(standardized)
    return TestResult(float(statistic), z, law, p_value(law, z), meta)
