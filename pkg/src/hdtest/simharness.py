"""Data generation and Monte Carlo size/power/calibration experiments.

Replications use counter-based substreams keyed by (seed, rep index), so a
report never depends on how the reps were chunked across workers.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from importlib import resources

import numpy as np

from . import covtest, manova, meantest, precision
from .core import DataMatrix, GroupedData
from .errors import (
    CalibrationError,
    DegenerateVariableError,
    HarnessError,
    InfeasibleProblemError,
)

__all__ = [
    "SCHEMA_VERSION",
    "make_sigma",
    "make_mean",
    "sample_innovations",
    "generate",
    "Scenario",
    "CalibrationReport",
    "run_scenario",
    "empirical_size",
    "empirical_power",
    "null_shape",
    "REGISTRY",
    "bundled_scenarios",
    "load_scenario",
]

SCHEMA_VERSION = 1

# scenarios violating lambda_max(Sigma) = o(sqrt(tr Sigma^2)) get a warning tag
OUTSIDE_THEORY_RATIO = 0.5


# ---------------------------------------------------------------------------
# population builders
# ---------------------------------------------------------------------------


def make_sigma(spec: dict, p: int):
    """Build (Sigma, Gamma) from a population spec; Gamma is the symmetric
    square root, so Gamma Gamma' = Sigma to 1e-10."""
    kind = spec.get("kind", "identity")
    if kind == "identity":
        sigma = np.eye(p)
    elif kind == "scaled":
        a = float(spec["a"])
        if a <= 0:
            raise ValueError(f"scaled covariance needs a > 0, got {a}")
        sigma = a * np.eye(p)
    elif kind == "ar1":
        rho = float(spec["rho"])
        if not abs(rho) < 1:
            raise ValueError(f"ar1 needs |rho| < 1, got {rho}")
        idx = np.arange(p)
        sigma = rho ** np.abs(idx[:, None] - idx[None, :])
    elif kind == "banded":
        tau = int(spec["tau"])
        coef = float(spec["coef"])
        idx = np.arange(p)
        lag = np.abs(idx[:, None] - idx[None, :])
        sigma = np.where(lag <= tau - 1, coef ** lag.astype(float), 0.0)
    elif kind == "spiked":
        base = float(spec.get("base", 1.0))
        value = float(spec["spike_value"])
        count = int(spec.get("spike_count", 1))
        d = np.full(p, base)
        d[:count] = value
        sigma = np.diag(d)
    elif kind == "diagonal":
        values = np.asarray(spec["values"], dtype=float)
        if values.shape != (p,):
            raise ValueError(f"diagonal values must have length p = {p}")
        sigma = np.diag(values)
    else:
        raise ValueError(f"unknown covariance kind {kind!r}")

    eigvals, eigvecs = np.linalg.eigh(sigma)
    if eigvals.min() < -1e-10 * max(1.0, eigvals.max()):
        raise ValueError(
            f"requested covariance is not positive semidefinite "
            f"(min eigenvalue {eigvals.min():.3e})"
        )
    root = eigvecs @ np.diag(np.sqrt(np.clip(eigvals, 0.0, None))) @ eigvecs.T
    return sigma, (root + root.T) / 2.0


def make_mean(spec: dict, p: int) -> np.ndarray:
    kind = spec.get("kind", "zero")
    if kind == "zero":
        return np.zeros(p)
    if kind == "constant":
        return np.full(p, float(spec["value"]))
    if kind == "dense":
        # all coordinates equal, with the requested squared Euclidean norm
        norm_sq = float(spec["norm_sq"])
        return np.full(p, math.sqrt(norm_sq / p))
    if kind == "spike":
        count = int(spec.get("count", 1))
        mu = np.zeros(p)
        mu[:count] = float(spec["value"])
        return mu
    if kind == "explicit":
        mu = np.asarray(spec["values"], dtype=float)
        if mu.shape != (p,):
            raise ValueError(f"explicit mean must have length p = {p}")
        return mu
    raise ValueError(f"unknown mean kind {kind!r}")


def sample_innovations(spec: dict, rng, size) -> np.ndarray:
    """Mean-zero unit-variance innovations of the requested shape."""
    dist = spec.get("dist", "standard_normal")
    if dist == "standard_normal":
        return rng.standard_normal(size)
    if dist == "standardized_gamma":
        shape = float(spec["shape"])
        if shape <= 0:
            raise ValueError(f"gamma shape must be positive, got {shape}")
        return (rng.gamma(shape, 1.0, size) - shape) / math.sqrt(shape)
    if dist == "rademacher":
        return rng.integers(0, 2, size).astype(float) * 2.0 - 1.0
    raise ValueError(f"unknown innovation dist {dist!r}")


def generate(n: int, gamma: np.ndarray, mu: np.ndarray, innovation: dict,
             rng) -> DataMatrix:
    """Draw n rows of Gamma Z + mu with the given innovation law."""
    m = gamma.shape[1]
    z = sample_innovations(innovation, rng, (n, m))
    return DataMatrix(z @ gamma.T + mu)


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    """A fully specified Monte Carlo experiment."""

    name: str
    test: str
    mode: str                  # size | power | shape | limit
    sizes: tuple
    p: int
    sigma: tuple               # one population spec per group
    innovation: tuple
    means: tuple
    alpha: float = 0.05
    reps: int = 1000
    seed: int = 0
    config: dict = field(default_factory=dict)
    asserts: tuple = ()
    notes: str = ""

    def __post_init__(self):
        if self.mode not in ("size", "power", "shape", "limit"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.reps < 1:
            raise ValueError(f"reps must be >= 1, got {self.reps}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        k = len(self.sizes)
        for name in ("sigma", "innovation", "means"):
            specs = getattr(self, name)
            if len(specs) == 1:
                object.__setattr__(self, name, tuple(specs) * k)
            elif len(specs) != k:
                raise ValueError(
                    f"{name} needs 1 or {k} entries, got {len(specs)}"
                )
        if self.test not in REGISTRY:
            raise ValueError(f"unknown test id {self.test!r}; "
                             f"known: {sorted(REGISTRY)}")

    @property
    def k(self) -> int:
        return len(self.sizes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sizes"] = list(self.sizes)
        d["sigma"] = [dict(s) for s in self.sigma]
        d["innovation"] = [dict(s) for s in self.innovation]
        d["means"] = [dict(s) for s in self.means]
        d["asserts"] = [dict(a) for a in self.asserts]
        return d

    @staticmethod
    def from_dict(d: dict) -> "Scenario":
        known = {"name", "test", "mode", "sizes", "p", "sigma", "innovation",
                 "means", "alpha", "reps", "seed", "config", "asserts", "notes"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown scenario fields: {sorted(extra)}")
        missing = {"name", "test", "mode", "sizes", "p"} - set(d)
        if missing:
            raise ValueError(f"scenario is missing fields: {sorted(missing)}")
        return Scenario(
            name=d["name"], test=d["test"], mode=d["mode"],
            sizes=tuple(int(x) for x in d["sizes"]), p=int(d["p"]),
            sigma=tuple(d.get("sigma", [{"kind": "identity"}])),
            innovation=tuple(d.get("innovation", [{"dist": "standard_normal"}])),
            means=tuple(d.get("means", [{"kind": "zero"}])),
            alpha=float(d.get("alpha", 0.05)), reps=int(d.get("reps", 1000)),
            seed=int(d.get("seed", 0)), config=dict(d.get("config", {})),
            asserts=tuple(d.get("asserts", ())), notes=d.get("notes", ""),
        )


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return Scenario.from_dict(json.load(fh))


def bundled_scenarios() -> dict:
    """name -> Scenario for every scenario file shipped with the package."""
    out = {}
    root = resources.files("hdtest").joinpath("scenarios")
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".json"):
            s = Scenario.from_dict(json.loads(entry.read_text(encoding="utf-8")))
            out[s.name] = s
    return out


# ---------------------------------------------------------------------------
# test registry
# ---------------------------------------------------------------------------


def _grouped(groups) -> GroupedData:
    return GroupedData(tuple(groups))


def _mean_cfg(config: dict) -> meantest.MeanTestConfig:
    return meantest.MeanTestConfig(
        alpha=config.get("alpha", 0.05),
        sd_use_cpn=config.get("sd_use_cpn", True),
        sd_unequal_cov=config.get("sd_unequal_cov", False),
        rht_lambda=config.get("rht_lambda"),
        clx_gamma=config.get("clx_gamma"),
    )


def _omega_for(groups, config: dict) -> precision.PrecisionEstimate:
    method = config.get("omega", "clime")
    if len(groups) == 1:
        from .core import sample_covariance

        s = sample_covariance(groups[0])
        n = groups[0].n
    else:
        from .core import pooled_covariance

        g = _grouped(groups)
        s = pooled_covariance(g)
        n = g.total_n
    if method == "identity":
        return precision.known_precision(np.eye(s.shape[0]))
    if method == "diagonal":
        return precision.diagonal_inverse(s)
    if method == "clime":
        gamma = config.get("clx_gamma")
        if gamma is None:
            gamma = precision.default_gamma(n, s.shape[0],
                                            c=config.get("gamma_c", 2.0))
        return precision.clime(s, gamma)
    raise ValueError(f"unknown omega method {method!r}")


def _centered(x: DataMatrix) -> DataMatrix:
    return DataMatrix(x.values - x.values.mean(axis=0))


REGISTRY = {
    "hotelling1": lambda gs, c: meantest.hotelling_one(gs[0], c.get("mu0")),
    "hotelling2": lambda gs, c: meantest.hotelling_two(_grouped(gs)),
    "dempster": lambda gs, c: meantest.dempster_net(_grouped(gs)),
    "bs1": lambda gs, c: meantest.bs_ant_one(gs[0], c.get("mu0")),
    "bs2": lambda gs, c: meantest.bs_ant_two(_grouped(gs)),
    "cq1": lambda gs, c: meantest.cq_one(gs[0], c.get("mu0")),
    "cq2": lambda gs, c: meantest.cq_two(_grouped(gs)),
    "sd1": lambda gs, c: meantest.sd_one(gs[0], c.get("mu0"), _mean_cfg(c)),
    "sd2": lambda gs, c: meantest.sd_two(_grouped(gs), _mean_cfg(c)),
    "pa1": lambda gs, c: meantest.pa_one(gs[0]),
    "clx2": lambda gs, c: meantest.clx_two(_grouped(gs), _omega_for(gs, c)),
    "rht1": lambda gs, c: meantest.rht_one(gs[0], _mean_cfg(c)),
    "sk": lambda gs, c: manova.sk_test(_grouped(gs)),
    "hb": lambda gs, c: manova.hb_test(_grouped(gs)),
    "cx": lambda gs, c: manova.cx_test(_grouped(gs), _omega_for(gs, c)),
    "lwv": lambda gs, c: covtest.lw_v(gs[0]),
    "lwu": lambda gs, c: covtest.lw_u(gs[0]),
    "lww": lambda gs, c: covtest.lw_w(gs[0], c.get("regime", "auto")),
    "s1": lambda gs, c: covtest.srivastava_s1(gs[0]),
    "s2": lambda gs, c: covtest.srivastava_s2(gs[0]),
    "lc2": lambda gs, c: covtest.lc_two(_grouped(gs)),
    "clxcov": lambda gs, c: covtest.clx_cov(_grouped(gs)),
    "qc": lambda gs, c: covtest.qc_banded(
        _centered(gs[0]), covtest.BandSpec(int(c["tau"]))
    ),
    "cj": lambda gs, c: covtest.cj_banded(
        gs[0], covtest.BandSpec(int(c["tau"]))
    ),
}

ONE_SAMPLE_TESTS = {"hotelling1", "bs1", "cq1", "sd1", "pa1", "rht1",
                    "lwv", "lwu", "lww", "s1", "s2", "qc", "cj"}
COVARIANCE_TWO_SAMPLE = {"lc2", "clxcov"}

# errors that count as a calibration failure of the replication, not a bug
_FAILURE_ERRORS = (CalibrationError, DegenerateVariableError,
                   InfeasibleProblemError)


# ---------------------------------------------------------------------------
# execution
# ---------------------------------------------------------------------------


@dataclass
class CalibrationReport:
    """Summary of one Monte Carlo scenario (JSON schema version 1)."""

    schema_version: int
    name: str
    test: str
    mode: str
    sizes: list
    p: int
    alpha: float
    seed: int
    reps: int
    failures: int
    empirical_size: float
    mc_standard_error: float
    ks_distance: float | None
    mean_statistic: float | None
    warnings: list
    asserts: list

    def to_dict(self) -> dict:
        return asdict(self)

    def passed(self) -> bool:
        return all(a["passed"] for a in self.asserts)


def _rep_rng(seed: int, rep: int):
    return np.random.default_rng(
        np.random.SeedSequence(entropy=seed, spawn_key=(rep,))
    )


def _scenario_populations(s: Scenario):
    pops = []
    for i in range(s.k):
        sigma, gamma = make_sigma(s.sigma[i], s.p)
        mu = make_mean(s.means[i], s.p)
        pops.append((sigma, gamma, mu, s.innovation[i]))
    return pops


def run_chunk(scenario_dict: dict, lo: int, hi: int):
    """Run reps lo..hi-1; module-level so process pools can pickle it."""
    s = Scenario.from_dict(scenario_dict)
    pops = _scenario_populations(s)
    runner = REGISTRY[s.test]
    rejections = 0
    failures = 0
    stats = []
    pvals = []
    for rep in range(lo, hi):
        rng = _rep_rng(s.seed, rep)
        groups = [
            generate(n, gamma, mu, innovation, rng)
            for n, (sigma, gamma, mu, innovation) in zip(s.sizes, pops)
        ]
        try:
            result = runner(groups, s.config)
        except _FAILURE_ERRORS:
            failures += 1
            continue
        stats.append(result.statistic)
        if result.p_value is not None:
            pvals.append(result.p_value)
            if result.p_value <= s.alpha:
                rejections += 1
    return rejections, failures, stats, pvals


def _ks_uniform(pvals) -> float:
    """KS distance of the probability-transformed statistics from uniform.

    Equals the KS distance between the standardized statistics and the
    claimed null CDF (the transform is monotone), and stays meaningful when
    the null law carries replication-dependent estimated parameters.
    """
    u = np.sort(1.0 - np.asarray(pvals))
    n = u.size
    grid_hi = np.arange(1, n + 1) / n
    grid_lo = np.arange(0, n) / n
    return float(np.max(np.maximum(np.abs(u - grid_hi), np.abs(u - grid_lo))))


def _evaluate_asserts(s: Scenario, size, ks, mean_stat):
    out = []
    for a in s.asserts:
        kind = a["kind"]
        if kind == "size_band":
            passed = size is not None and a["lo"] <= size <= a["hi"]
            out.append({"kind": kind, "lo": a["lo"], "hi": a["hi"],
                        "observed": size, "passed": bool(passed)})
        elif kind == "ks_max":
            passed = ks is not None and ks <= a["value"]
            out.append({"kind": kind, "value": a["value"],
                        "observed": ks, "passed": bool(passed)})
        elif kind == "mean_band":
            passed = (mean_stat is not None
                      and abs(mean_stat - a["target"]) <= a["tol"])
            out.append({"kind": kind, "target": a["target"], "tol": a["tol"],
                        "observed": mean_stat, "passed": bool(passed)})
        elif kind == "power_min":
            passed = size is not None and size >= a["value"]
            out.append({"kind": kind, "value": a["value"],
                        "observed": size, "passed": bool(passed)})
        else:
            raise ValueError(f"unknown assert kind {kind!r}")
    return out


def _theory_warnings(s: Scenario) -> list:
    warnings = []
    for i in range(s.k):
        sigma, _ = make_sigma(s.sigma[i], s.p)
        lam = float(np.linalg.eigvalsh(sigma)[-1])
        ratio = lam / math.sqrt(float(np.einsum("ij,ij->", sigma, sigma)))
        if ratio > OUTSIDE_THEORY_RATIO:
            warnings.append(
                f"outside theory: group {i} has lambda_max/sqrt(tr Sigma^2) "
                f"= {ratio:.3f} > {OUTSIDE_THEORY_RATIO}; asymptotic size "
                f"bands are not guaranteed here"
            )
    return warnings


def run_scenario(s: Scenario, threads: int = 1,
                 reps: int | None = None) -> CalibrationReport:
    """Execute a scenario and assemble its report.

    ``threads`` > 1 splits the reps across worker processes; per-rep
    substreams make the report identical for any chunking.
    """
    if reps is not None:
        s = Scenario.from_dict({**s.to_dict(), "reps": int(reps)})
    n_reps = s.reps
    threads = max(1, int(threads))
    if threads == 1 or n_reps < 4 * threads:
        parts = [run_chunk(s.to_dict(), 0, n_reps)]
    else:
        bounds = np.linspace(0, n_reps, 2 * threads + 1).astype(int)
        spans = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if a < b]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(run_chunk, s.to_dict(), a, b) for a, b in spans]
            parts = [f.result() for f in futures]
    rejections = sum(p[0] for p in parts)
    failures = sum(p[1] for p in parts)
    stats = [v for p in parts for v in p[2]]
    pvals = [v for p in parts for v in p[3]]

    valid = n_reps - failures
    if valid == 0:
        raise HarnessError(
            f"scenario {s.name!r}: every replication failed calibration"
        )
    warnings = _theory_warnings(s)
    if failures:
        warnings.append(f"{failures} of {n_reps} replications raised "
                        f"calibration errors and were excluded")

    mean_stat = float(np.mean(stats)) if stats else None
    if s.mode == "limit":
        target = float(s.config["limit_target"])
        tol = float(s.config["limit_tol"])
        deviant = sum(1 for v in stats if abs(v - target) > tol)
        size = deviant / len(stats)
        se = math.sqrt(max(size * (1 - size), 1e-12) / len(stats))
        ks = None
    else:
        size = rejections / len(pvals) if pvals else None
        if s.mode == "size":
            se = math.sqrt(s.alpha * (1 - s.alpha) / max(1, valid))
        else:
            phat = size if size is not None else 0.0
            se = math.sqrt(max(phat * (1 - phat), 1e-12) / max(1, valid))
        ks = _ks_uniform(pvals) if pvals else None
    report = CalibrationReport(
        schema_version=SCHEMA_VERSION, name=s.name, test=s.test, mode=s.mode,
        sizes=list(s.sizes), p=s.p, alpha=s.alpha, seed=s.seed, reps=n_reps,
        failures=failures,
        empirical_size=size if size is not None else float("nan"),
        mc_standard_error=se,
        ks_distance=ks, mean_statistic=mean_stat, warnings=warnings,
        asserts=_evaluate_asserts(s, size, ks, mean_stat),
    )
    return report


def _is_null_config(s: Scenario) -> bool:
    means_equal = all(m == s.means[0] for m in s.means)
    if s.test in COVARIANCE_TWO_SAMPLE:
        return means_equal and all(sp == s.sigma[0] for sp in s.sigma)
    return means_equal


def empirical_size(s: Scenario, threads: int = 1) -> CalibrationReport:
    """Rejection rate under a null-configured scenario."""
    if not _is_null_config(s):
        raise ValueError(f"scenario {s.name!r} is not null-configured")
    return run_scenario(s, threads=threads)


def empirical_power(s: Scenario, threads: int = 1) -> CalibrationReport:
    """Rejection rate under an alternative-configured scenario."""
    if _is_null_config(s):
        raise ValueError(f"scenario {s.name!r} is null-configured; "
                         "power needs unequal means or covariances")
    return run_scenario(s, threads=threads)


def null_shape(s: Scenario, threads: int = 1) -> CalibrationReport:
    """KS distance between standardized statistics and the claimed null law."""
    if not _is_null_config(s):
        raise ValueError(f"scenario {s.name!r} is not null-configured")
    return run_scenario(s, threads=threads)


def default_threads() -> int:
    return max(1, os.cpu_count() or 1)
