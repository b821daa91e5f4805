"""Command-line front end: dataset ingestion, test execution, simulations.

Exit codes: 0 on success, 1 on any error (usage, parsing, preconditions),
2 when --exit-on-reject is set and the test rejects at the requested level.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .core import DataMatrix
from .errors import HdtestError
from .simharness import (
    REGISTRY,
    SCHEMA_VERSION,
    Scenario,
    load_scenario,
    run_scenario,
)

ONE_SAMPLE = {"hotelling1", "bs1", "cq1", "sd1", "pa1", "rht1",
              "lwv", "lwu", "lww", "s1", "s2", "qc", "cj"}


class UsageError(HdtestError, ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse normally exits 2 on usage problems; route them through the
    # documented error path (exit 1) instead
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


def read_csv_matrix(path: str, group_column: str | None = None):
    """Parse a headered CSV into (groups, labels).

    Every non-group cell must parse as a finite float; parse errors name the
    offending line.  Returns a list of value matrices (one per group, in
    order of first appearance) and the group labels.
    """
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise UsageError(f"{path}: empty file (header row required)")
        group_idx = None
        if group_column is not None:
            if group_column not in header:
                raise UsageError(
                    f"{path}: group column {group_column!r} not in header {header}"
                )
            group_idx = header.index(group_column)
        width = len(header)
        by_group: dict = {}
        order = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != width:
                raise UsageError(
                    f"{path}: line {line_no}: expected {width} cells, got {len(row)}"
                )
            label = row[group_idx] if group_idx is not None else ""
            cells = [c for i, c in enumerate(row) if i != group_idx]
            try:
                values = [float(c) for c in cells]
            except ValueError as exc:
                raise UsageError(f"{path}: line {line_no}: non-numeric cell ({exc})")
            if not all(np.isfinite(values)):
                raise UsageError(f"{path}: line {line_no}: non-finite value")
            if label not in by_group:
                by_group[label] = []
                order.append(label)
            by_group[label].append(values)
    groups = [np.asarray(by_group[label], dtype=float) for label in order]
    return groups, order


def format_float(x: float) -> str:
    """Shortest representation that round-trips (17 significant digits max)."""
    return repr(float(x))


def write_csv_matrix(path: str, values: np.ndarray, header=None):
    values = np.asarray(values, dtype=float)
    if header is None:
        header = [f"v{i}" for i in range(values.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in values:
            writer.writerow([format_float(v) for v in row])


def _read_mu0(spec: str, p: int) -> np.ndarray:
    if spec == "zeros":
        return np.zeros(p)
    values = []
    with open(spec, "r", newline="", encoding="utf-8") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            for cell in row:
                if cell.strip() == "":
                    continue
                try:
                    values.append(float(cell))
                except ValueError as exc:
                    raise UsageError(f"{spec}: line {line_no}: non-numeric cell ({exc})")
    if len(values) != p:
        raise UsageError(f"{spec}: expected {p} values for mu0, got {len(values)}")
    return np.asarray(values)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def _dump_json(obj: dict, out_path: str | None) -> str:
    text = json.dumps(obj, sort_keys=True, indent=2)
    if out_path:
        Path(out_path).write_text(text + "\n", encoding="utf-8")
    return text


def run_report(result, alpha: float) -> dict:
    """The stable RunReport JSON document (schema version 1)."""
    meta = dict(result.metadata)
    name = meta.pop("test")
    n = meta.pop("n")
    p = meta.pop("p")
    sizes = list(n) if isinstance(n, (tuple, list)) else [n]
    return {
        "schema_version": SCHEMA_VERSION,
        "test": name,
        "n": sum(sizes),
        "sizes": sizes,
        "p": p,
        "statistic": result.statistic,
        "standardized": result.standardized,
        "null_law": result.null_law.describe() if result.null_law else None,
        "p_value": result.p_value,
        "alpha": alpha,
        "decision": (None if result.p_value is None
                     else ("reject" if result.p_value <= alpha else "retain")),
        "tuning": {k: _jsonable(v) for k, v in meta.items()},
        "warnings": [],
    }


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, tuple):
        return list(v)
    return v


def _human_report(report: dict) -> str:
    rows = [
        ("test", report["test"]),
        ("n / p", f"{report['sizes']} / {report['p']}"),
        ("statistic", report["statistic"]),
        ("standardized", report["standardized"]),
        ("null law", report["null_law"]),
        ("p-value", report["p_value"]),
        ("decision", f"{report['decision']} at alpha={report['alpha']}"),
    ]
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:>{width}}  {v}" for k, v in rows)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_test(args) -> int:
    method = args.method
    if method not in REGISTRY:
        raise UsageError(f"unknown test id {method!r}; known: {sorted(REGISTRY)}")
    groups = []
    for path in args.data:
        gs, _ = read_csv_matrix(path, args.group if len(args.data) == 1 else None)
        groups.extend(gs)
    if not groups:
        raise UsageError("no data rows found")
    p = groups[0].shape[1]
    config: dict = {}
    if args.tau is not None:
        config["tau"] = args.tau
    if args.rht_lambda is not None:
        config["rht_lambda"] = args.rht_lambda
    if args.gamma is not None:
        config["clx_gamma"] = args.gamma
    if args.omega is not None:
        config["omega"] = args.omega
    if args.unequal_cov:
        config["sd_unequal_cov"] = True
    if method in ONE_SAMPLE:
        if len(groups) != 1:
            raise UsageError(
                f"{method} is a one-sample test but the input has "
                f"{len(groups)} groups"
            )
        config["mu0"] = _read_mu0(args.mu0, p)
    elif args.mu0 != "zeros":
        raise UsageError(f"--mu0 applies only to one-sample tests, not {method}")
    if method in ("qc", "cj") and args.tau is None:
        raise UsageError(f"{method} requires --tau")
    if method == "rht1" and args.rht_lambda is None:
        raise UsageError("rht1 requires --lambda")
    data = [DataMatrix(g) for g in groups]
    result = REGISTRY[method](data, config)
    report = run_report(result, args.alpha)
    text = _dump_json(report, args.out)
    print(text if not args.human else _human_report(report))
    if args.exit_on_reject and report["decision"] == "reject":
        return 2
    return 0


def _scenario_from_args(args) -> Scenario:
    if args.scenario:
        return load_scenario(args.scenario)
    required = {"test": args.test, "n": args.n, "p": args.p, "reps": args.reps}
    missing = [f"--{k}" for k, v in required.items() if v is None]
    if missing:
        raise UsageError(f"missing required options: {', '.join(missing)}")
    sizes = [args.n] + ([args.n2] if args.n2 else [])
    k = len(sizes)
    config: dict = {}
    if args.tau is not None:
        config["tau"] = args.tau
    if args.rht_lambda is not None:
        config["rht_lambda"] = args.rht_lambda
    if args.omega is not None:
        config["omega"] = args.omega
    means = [_parse_mean(args.mu_alt)] if args.mu_alt else [{"kind": "zero"}]
    if k == 2 and args.mu_alt:
        means = [{"kind": "zero"}, _parse_mean(args.mu_alt)]
    mode = args.mode or ("power" if args.mu_alt else "size")
    return Scenario(
        name=f"cli-{args.test}", test=args.test, mode=mode,
        sizes=tuple(sizes), p=args.p,
        sigma=(_parse_sigma(args.sigma),),
        innovation=(_parse_innovation(args.innovation),),
        means=tuple(means) if len(means) > 1 else (means[0],),
        alpha=args.alpha, reps=args.reps, seed=args.seed, config=config,
    )


def _parse_sigma(text: str) -> dict:
    parts = text.split(":")
    kind = parts[0]
    try:
        if kind == "identity":
            return {"kind": "identity"}
        if kind == "scaled":
            return {"kind": "scaled", "a": float(parts[1])}
        if kind == "ar1":
            return {"kind": "ar1", "rho": float(parts[1])}
        if kind == "banded":
            return {"kind": "banded", "tau": int(parts[1]), "coef": float(parts[2])}
        if kind == "spiked":
            return {"kind": "spiked", "base": float(parts[1]),
                    "spike_value": float(parts[2]), "spike_count": int(parts[3])}
    except (IndexError, ValueError) as exc:
        raise UsageError(f"bad --sigma spec {text!r}: {exc}")
    raise UsageError(f"unknown covariance kind {kind!r}")


def _parse_innovation(text: str) -> dict:
    parts = text.split(":")
    kind = parts[0]
    try:
        if kind == "normal":
            return {"dist": "standard_normal"}
        if kind == "gamma":
            return {"dist": "standardized_gamma", "shape": float(parts[1])}
        if kind == "rademacher":
            return {"dist": "rademacher"}
    except (IndexError, ValueError) as exc:
        raise UsageError(f"bad --innovation spec {text!r}: {exc}")
    raise UsageError(f"unknown innovation {kind!r}")


def _parse_mean(text: str) -> dict:
    parts = text.split(":")
    kind = parts[0]
    try:
        if kind == "zero":
            return {"kind": "zero"}
        if kind == "dense":
            return {"kind": "dense", "norm_sq": float(parts[1])}
        if kind == "spike":
            spec = {"kind": "spike", "value": float(parts[1])}
            if len(parts) > 2:
                spec["count"] = int(parts[2])
            return spec
        if kind == "constant":
            return {"kind": "constant", "value": float(parts[1])}
    except (IndexError, ValueError) as exc:
        raise UsageError(f"bad --mu-alt spec {text!r}: {exc}")
    raise UsageError(f"unknown mean kind {kind!r}")


def cmd_simulate(args) -> int:
    scenario = _scenario_from_args(args)
    report = run_scenario(scenario, threads=args.threads)
    text = _dump_json(report.to_dict(), args.out)
    print(text)
    return 0


def cmd_calibrate(args) -> int:
    directory = Path(args.directory)
    if not directory.is_dir():
        raise UsageError(f"{directory} is not a directory")
    paths = sorted(directory.glob("*.json"))
    if args.filter:
        paths = [p for p in paths if args.filter in p.name]
    if not paths:
        raise UsageError(f"no scenario files selected in {directory}")
    reports = []
    all_passed = True
    for path in paths:
        scenario = load_scenario(path)
        report = run_scenario(scenario, threads=args.threads)
        reports.append(report.to_dict())
        for check in report.asserts:
            all_passed &= check["passed"]
        status = "pass" if report.passed() else "FAIL"
        size = report.empirical_size
        bands = ", ".join(
            _describe_assert(a) for a in report.asserts) or "report-only"
        print(f"{status:4s}  {report.test:10s} {report.name:28s} "
              f"observed={size:.4f}  {bands}", file=sys.stderr)
    text = _dump_json({"schema_version": SCHEMA_VERSION, "reports": reports},
                      args.out)
    if args.out is None:
        print(text)
    return 0 if all_passed else 1


def _describe_assert(a: dict) -> str:
    kind = a["kind"]
    if kind == "size_band":
        return f"band=[{a['lo']}, {a['hi']}] ({'ok' if a['passed'] else 'out'})"
    if kind == "ks_max":
        return f"ks<={a['value']} ({'ok' if a['passed'] else 'out'})"
    if kind == "mean_band":
        return f"mean~{a['target']}+-{a['tol']} ({'ok' if a['passed'] else 'out'})"
    if kind == "power_min":
        return f"power>={a['value']} ({'ok' if a['passed'] else 'out'})"
    return kind


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="hdtest",
                     description="high-dimensional mean/covariance tests")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="run one test on a CSV dataset")
    t.add_argument("--method", required=True, help="test id, e.g. cq2, hotelling1, cj")
    t.add_argument("--data", action="append", required=True,
                   help="CSV file (repeat for one file per group)")
    t.add_argument("--group", default=None,
                   help="name of the group-label column (single-file input)")
    t.add_argument("--mu0", default="zeros",
                   help="'zeros' or a CSV file with p hypothesized means")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--tau", type=int, default=None, help="bandwidth for qc/cj")
    t.add_argument("--lambda", dest="rht_lambda", type=float, default=None,
                   help="ridge value for rht1")
    t.add_argument("--gamma", type=float, default=None,
                   help="constrained-l1 tuning for clx2/cx")
    t.add_argument("--omega", default=None, choices=["clime", "diagonal", "identity"],
                   help="precision estimate for clx2/cx (default clime)")
    t.add_argument("--unequal-cov", action="store_true",
                   help="use the unequal-covariance variant of sd2")
    t.add_argument("--human", action="store_true", help="print a table, not JSON")
    t.add_argument("--out", default=None, help="also write the JSON report here")
    t.add_argument("--exit-on-reject", action="store_true")
    t.set_defaults(func=cmd_test)

    s = sub.add_parser("simulate", help="run one Monte Carlo scenario")
    s.add_argument("--scenario", default=None, help="scenario JSON file")
    s.add_argument("--test", default=None, help="test id for inline scenarios")
    s.add_argument("--n", type=int, default=None)
    s.add_argument("--n2", type=int, default=None,
                   help="second group size (defaults to one group)")
    s.add_argument("--p", type=int, default=None)
    s.add_argument("--reps", type=int, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--sigma", default="identity", help="e.g. ar1:0.5, banded:2:0.4")
    s.add_argument("--innovation", default="normal", help="normal | gamma:SHAPE | rademacher")
    s.add_argument("--mu-alt", default=None,
                   help="alternative mean: dense:NORMSQ | spike:VALUE[:COUNT] | constant:C")
    s.add_argument("--mode", default=None, choices=["size", "power", "shape", "limit"])
    s.add_argument("--tau", type=int, default=None)
    s.add_argument("--lambda", dest="rht_lambda", type=float, default=None)
    s.add_argument("--omega", default=None, choices=["clime", "diagonal", "identity"])
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("calibrate", help="run a directory of scenario files")
    c.add_argument("directory")
    c.add_argument("--filter", default=None, help="substring filter on file names")
    c.add_argument("--threads", type=int, default=1)
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except HdtestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry():  # console-script hook
    sys.exit(main())


if __name__ == "__main__":
    entry()
