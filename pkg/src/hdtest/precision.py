"""Inverse-covariance estimation for the max-type tests.

The main route is columnwise constrained l1-minimization:

    minimize ||beta||_1  subject to  ||S beta - e_j||_inf <= gamma

solved as a linear program.  A diagonal plug-in route is provided for
harnesses; it changes the statistic's meaning (componentwise studentization)
and is labeled as such in the returned estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import DegenerateVariableError, InfeasibleProblemError

__all__ = [
    "PrecisionEstimate",
    "default_gamma",
    "clime_column",
    "clime",
    "diagonal_inverse",
    "known_precision",
]


@dataclass(frozen=True)
class PrecisionEstimate:
    """An estimated inverse covariance with the tuning value used."""

    omega: np.ndarray
    gamma: float | None
    method: str

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        if omega.ndim != 2 or omega.shape[0] != omega.shape[1]:
            raise ValueError(f"omega must be square, got shape {omega.shape}")
        object.__setattr__(self, "omega", omega)
        if self.method != "known":
            d = np.diag(omega)
            if np.any(d <= 0):
                bad = int(np.flatnonzero(d <= 0)[0])
                raise DegenerateVariableError(
                    f"estimated precision has nonpositive diagonal at {bad}",
                    index=bad,
                )

    @property
    def p(self) -> int:
        return self.omega.shape[0]


def default_gamma(n: int, p: int, c: float = 2.0) -> float:
    """Default tuning value C * sqrt(log(p) / n)."""
    if n < 2 or p < 2:
        raise ValueError(f"need n >= 2 and p >= 2, got n={n}, p={p}")
    if not c > 0:
        raise ValueError(f"C must be positive, got {c}")
    return c * math.sqrt(math.log(p) / n)


def clime_column(s: np.ndarray, j: int, gamma: float) -> np.ndarray:
    """Solve the column linear program for column j.

    Split-variable formulation beta = u - v with u, v >= 0; the solver must
    deliver primal feasibility within 1e-10 and an objective within 1e-8 of
    optimal, which the HiGHS simplex certifies.
    """
    s = np.asarray(s, dtype=float)
    p = s.shape[0]
    if not 0 <= j < p:
        raise IndexError(f"column {j} out of range for p = {p}")
    if gamma < 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    e = np.zeros(p)
    e[j] = 1.0
    # |S beta - e|_inf <= gamma  as  [S, -S; -S, S][u; v] <= [gamma+e; gamma-e]
    a_ub = np.block([[s, -s], [-s, s]])
    b_ub = np.concatenate([gamma + e, gamma - e])
    res = linprog(c=np.ones(2 * p), A_ub=a_ub, b_ub=b_ub,
                  bounds=(0, None), method="highs")
    if res.status == 2:
        raise InfeasibleProblemError(
            f"column {j}: no beta satisfies |S beta - e_j|_inf <= {gamma}"
        )
    if not res.success:
        raise RuntimeError(f"column {j}: LP solver failed: {res.message}")
    beta = res.x[:p] - res.x[p:]
    return beta


def clime(s: np.ndarray, gamma: float) -> PrecisionEstimate:
    """Columnwise constrained l1-minimization estimate, symmetrized.

    For each (i, j) the entry of smaller magnitude among the two column
    solutions is kept; exact ties are averaged.
    """
    s = np.asarray(s, dtype=float)
    p = s.shape[0]
    raw = np.column_stack([clime_column(s, j, gamma) for j in range(p)])
    rt = raw.T
    take_raw = np.abs(raw) < np.abs(rt)
    take_rt = np.abs(rt) < np.abs(raw)
    omega = np.where(take_raw, raw, np.where(take_rt, rt, (raw + rt) / 2.0))
    return PrecisionEstimate(omega=omega, gamma=float(gamma), method="constrained_l1")


def diagonal_inverse(s: np.ndarray) -> PrecisionEstimate:
    """Plug-in inverse of the diagonal of S."""
    s = np.asarray(s, dtype=float)
    d = np.diag(s)
    if np.any(d <= 0):
        bad = int(np.flatnonzero(d <= 0)[0])
        raise DegenerateVariableError(
            f"variable {bad} has nonpositive variance {d[bad]!r}", index=bad
        )
    return PrecisionEstimate(omega=np.diag(1.0 / d), gamma=None,
                             method="diagonal_inverse")


def known_precision(omega: np.ndarray) -> PrecisionEstimate:
    """Wrap a known inverse covariance (used verbatim)."""
    return PrecisionEstimate(omega=np.asarray(omega, dtype=float),
                             gamma=None, method="known")
