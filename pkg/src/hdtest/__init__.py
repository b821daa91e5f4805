"""Naive significance tests for high-dimensional means and covariances.

A library of location and scatter tests built on simple target functions
(squared Euclidean distance, componentwise distance, maximum studentized
entry) with plug-in or unbiased estimators, their closed-form asymptotic
power curves, and a Monte Carlo harness that validates every implemented
null law.
"""

from . import core, covtest, errors, manova, meantest, precision, simharness, ustat
from .core import (
    ChiSquared,
    DataMatrix,
    ExtremeValueA,
    ExtremeValueB,
    ExtremeValueCX,
    FisherF,
    GroupedData,
    NormalLaw,
    NullLaw,
    StandardNormal,
    TestResult,
    p_value,
    pooled_covariance,
    quantile,
    sample_correlation,
    sample_covariance,
    sample_mean,
)
from .covtest import (
    BandSpec,
    cj_banded,
    clx_cov,
    lc_two,
    lw_u,
    lw_v,
    lw_w,
    qc_banded,
    srivastava_s1,
    srivastava_s2,
)
from .manova import cx_test, hb_test, sk_test
from .meantest import (
    MeanTestConfig,
    PowerInputs,
    asymptotic_power,
    bs_ant_one,
    bs_ant_two,
    clx_two,
    cq_one,
    cq_two,
    dempster_net,
    hotelling_one,
    hotelling_two,
    pa_one,
    rht_one,
    sd_one,
    sd_two,
)
from .precision import (
    PrecisionEstimate,
    clime,
    clime_column,
    default_gamma,
    diagonal_inverse,
    known_precision,
)

__version__ = "0.1.0"
