"""File formats: dataset CSV, run configuration, and report serialization.

Dataset CSV schema (header required): columns ``id`` (string) and ``x``
(real), plus an optional ``sigma`` column that must be constant across rows
(equal-variance model) and, when present, overrides the configured noise
scale.

All floating-point output is printed with 17 significant digits so that
serialized results are bitwise reproducible and parse back exactly.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataFormatError
from .mc import EB_MODES, EvalReport, ReplicateTable
from .model import MixturePrior
from .procedures import PROCEDURES, IntervalReport
from .selection import BHLevel, SelectionRule, Threshold, TopK

__all__ = [
    "format_float",
    "dump_json",
    "read_dataset",
    "write_dataset",
    "write_truth",
    "RunConfig",
    "load_config",
    "rule_from_config",
    "write_interval_report",
    "write_eval_long_csv",
    "write_replicate_table",
    "write_compare_table",
]

INTERVAL_CSV_COLUMNS = ("procedure", "id", "x", "lower", "upper", "includes_zero", "length")
REPLICATE_CSV_COLUMNS = ("replicate", "R", "V", "sum_length")
EVAL_LONG_CSV_COLUMNS = ("scenario", "procedure", "metric", "value")
COMPARE_CSV_COLUMNS = (
    "procedure", "eb_mode", "fcr_hat", "fcr_se", "avg_length", "avg_R",
    "length_ratio_vs_by",
)


def format_float(value: float) -> str:
    """17-significant-digit decimal form; round-trips any double exactly."""
    return format(float(value), ".17g")


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def _json_fragment(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "null"
        return format_float(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        items = ", ".join(f"{json.dumps(str(k))}: {_json_fragment(v)}" for k, v in value.items())
        return "{" + items + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_json_fragment(v) for v in value) + "]"
    raise TypeError(f"cannot serialize {type(value).__name__} to JSON")


def dump_json(obj, path: str | os.PathLike) -> None:
    """Deterministic JSON writer: insertion-ordered keys, 17-digit floats."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_json_fragment(obj))
        fh.write("\n")


# ---------------------------------------------------------------------------
# Dataset files


def read_dataset(
    path: str | os.PathLike,
) -> tuple[list[str], np.ndarray, float | None]:
    """Load a dataset CSV.

    Returns (ids, x, sigma2_from_file); sigma2_from_file is None unless the
    file carries a sigma column.  Malformed input raises
    :class:`DataFormatError` with the offending line number.
    """
    ids: list[str] = []
    xs: list[float] = []
    sigmas: list[float] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError("empty file", line=1) from None
        cols = [c.strip() for c in header]
        if "id" not in cols or "x" not in cols:
            raise DataFormatError("header must contain 'id' and 'x' columns", line=1)
        idx_id = cols.index("id")
        idx_x = cols.index("x")
        idx_sigma = cols.index("sigma") if "sigma" in cols else None
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(cols):
                raise DataFormatError(
                    f"expected {len(cols)} fields, got {len(row)}", line=lineno
                )
            ids.append(row[idx_id].strip())
            try:
                x = float(row[idx_x])
            except ValueError:
                raise DataFormatError(f"bad x value {row[idx_x]!r}", line=lineno) from None
            if not math.isfinite(x):
                raise DataFormatError(f"non-finite x value {x!r}", line=lineno)
            xs.append(x)
            if idx_sigma is not None:
                try:
                    sigmas.append(float(row[idx_sigma]))
                except ValueError:
                    raise DataFormatError(
                        f"bad sigma value {row[idx_sigma]!r}", line=lineno
                    ) from None
    if not ids:
        raise DataFormatError("no data rows", line=2)
    if len(set(ids)) != len(ids):
        raise DataFormatError("duplicate ids")
    sigma2_file: float | None = None
    if sigmas:
        first = sigmas[0]
        if first <= 0.0:
            raise DataFormatError("sigma must be > 0", line=2)
        for k, s in enumerate(sigmas):
            if abs(s - first) > 1e-12:
                raise DataFormatError(
                    "sigma column must be constant (equal-variance model)",
                    line=2 + k,
                )
        sigma2_file = first * first
    return ids, np.asarray(xs, dtype=np.float64), sigma2_file


def write_dataset(
    path: str | os.PathLike,
    ids: list[str],
    x: np.ndarray,
    sigma: float | None = None,
) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if sigma is None:
            fh.write("id,x\n")
            for i, xi in zip(ids, x):
                fh.write(f"{i},{format_float(xi)}\n")
        else:
            fh.write("id,x,sigma\n")
            s = format_float(sigma)
            for i, xi in zip(ids, x):
                fh.write(f"{i},{format_float(xi)},{s}\n")


def write_truth(path: str | os.PathLike, ids: list[str], theta: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("id,theta\n")
        for i, t in zip(ids, theta):
            fh.write(f"{i},{format_float(t)}\n")


# ---------------------------------------------------------------------------
# Run configuration


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration (see README for the JSON schema)."""

    sigma2: float | None = None
    prior: MixturePrior | None = None
    m: int | None = None
    rule: SelectionRule | None = None
    q: float = 0.05
    procedures: tuple[str, ...] = ("BY", "QH", "EBFCR")
    eb_mode: str = "OraclePrior"
    estimation_method: str = "MarginalMLE"
    estimation_tol: float = 1e-8
    estimation_max_iter: int = 10_000
    replicates: int = 10_000
    seed: int = 0
    qh_denominator: str = "selected"
    threads: int = 1
    out_dir: str | None = None


def rule_from_config(node, errors: list[str]) -> SelectionRule | None:
    if not isinstance(node, dict) or "kind" not in node:
        errors.append("rule: must be an object with a 'kind' field")
        return None
    kind = node.get("kind")
    try:
        if kind == "threshold":
            return Threshold(c=float(node["c"]))
        if kind == "topk":
            return TopK(k=int(node["k"]))
        if kind == "bh":
            return BHLevel(alpha=float(node["alpha"]))
    except (KeyError, TypeError, ValueError) as exc:
        errors.append(f"rule: bad parameters for kind {kind!r} ({exc})")
        return None
    errors.append(f"rule.kind: unknown kind {kind!r} (expected threshold|topk|bh)")
    return None


def load_config(path: str | os.PathLike) -> RunConfig:
    """Parse and validate a JSON config, reporting every invalid field."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")

    errors: list[str] = []

    def grab(name, caster, default=None, required=False, check=None, why=""):
        if name not in raw or raw[name] is None:
            if required:
                errors.append(f"{name}: required")
            return default
        try:
            value = caster(raw[name])
        except (TypeError, ValueError):
            errors.append(f"{name}: cannot parse {raw[name]!r}")
            return default
        if check is not None and not check(value):
            errors.append(f"{name}: {why}, got {value!r}")
            return default
        return value

    sigma2 = grab("sigma2", float, check=lambda v: v > 0 and math.isfinite(v),
                  why="must be finite and > 0")
    q = grab("q", float, default=0.05, check=lambda v: 0 < v < 1, why="must lie in (0, 1)")
    m = grab("m", int, check=lambda v: v >= 1, why="must be >= 1")
    replicates = grab("replicates", int, default=10_000, check=lambda v: v >= 1,
                      why="must be >= 1")
    seed = grab("seed", int, default=0, check=lambda v: 0 <= v < 2**64,
                why="must fit in unsigned 64 bits")
    threads = grab("threads", int, default=1, check=lambda v: v >= 1, why="must be >= 1")
    eb_mode = grab("eb_mode", str, default="OraclePrior",
                   check=lambda v: v in EB_MODES, why=f"must be one of {EB_MODES}")
    qh_denominator = grab("qh_denominator", str, default="selected",
                          check=lambda v: v in ("selected", "all"),
                          why="must be 'selected' or 'all'")
    out_dir = grab("out_dir", str)

    procedures = raw.get("procedures", ["BY", "QH", "EBFCR"])
    if not isinstance(procedures, list) or not procedures or any(
        p not in PROCEDURES for p in procedures
    ):
        errors.append(f"procedures: must be a non-empty subset of {PROCEDURES}")
        procedures = []

    prior = None
    if "prior" in raw and raw["prior"] is not None:
        node = raw["prior"]
        if not isinstance(node, dict):
            errors.append("prior: must be an object with p and tau2")
        else:
            try:
                prior = MixturePrior(
                    p=float(node["p"]),
                    tau2=float(node["tau2"]),
                    sigma2=float(node.get("sigma2", sigma2 if sigma2 else 1.0)),
                )
            except (KeyError, TypeError, ValueError) as exc:
                errors.append(f"prior: {exc}")

    rule = None
    if "rule" in raw and raw["rule"] is not None:
        rule = rule_from_config(raw["rule"], errors)

    est = raw.get("estimation", {})
    if not isinstance(est, dict):
        errors.append("estimation: must be an object")
        est = {}
    method = est.get("method", "MarginalMLE")
    if method not in ("MarginalMLE", "Moments"):
        errors.append(
            f"estimation.method: must be MarginalMLE or Moments, got {method!r}"
        )
    est_tol = est.get("tol", 1e-8)
    est_max_iter = est.get("max_iter", 10_000)
    if not (isinstance(est_tol, (int, float)) and est_tol > 0):
        errors.append(f"estimation.tol: must be > 0, got {est_tol!r}")
    if not (isinstance(est_max_iter, int) and est_max_iter >= 1):
        errors.append(f"estimation.max_iter: must be an integer >= 1, got {est_max_iter!r}")

    known = {
        "sigma2", "q", "m", "replicates", "seed", "threads", "eb_mode",
        "qh_denominator", "out_dir", "procedures", "prior", "rule", "estimation",
    }
    for key in sorted(set(raw) - known):
        errors.append(f"{key}: unknown field")

    if errors:
        raise ConfigError("invalid config:\n  " + "\n  ".join(errors))
    return RunConfig(
        sigma2=sigma2,
        prior=prior,
        m=m,
        rule=rule,
        q=q,
        procedures=tuple(procedures),
        eb_mode=eb_mode,
        estimation_method=method,
        estimation_tol=float(est_tol),
        estimation_max_iter=int(est_max_iter),
        replicates=replicates,
        seed=seed,
        qh_denominator=qh_denominator,
        threads=threads,
        out_dir=out_dir,
    )


# ---------------------------------------------------------------------------
# Report serialization


def write_interval_report(path: str | os.PathLike, report: IntervalReport) -> None:
    """CSV with fixed columns procedure,id,x,lower,upper,includes_zero,length.

    Regions without a continuous part leave lower/upper empty.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(INTERVAL_CSV_COLUMNS) + "\n")
        for row in report.rows:
            if row.region.intervals:
                lower, upper = row.region.intervals[0]
            else:
                lower = upper = None
            cells = (
                report.procedure,
                row.id,
                row.x,
                lower,
                upper,
                row.region.includes_zero,
                row.length,
            )
            fh.write(",".join(_format_cell(c) for c in cells) + "\n")


def interval_report_json_dict(report: IntervalReport) -> dict:
    rows = []
    for row in report.rows:
        if row.region.intervals:
            lower, upper = row.region.intervals[0]
        else:
            lower = upper = None
        rows.append(
            {
                "id": row.id,
                "x": row.x,
                "lower": lower,
                "upper": upper,
                "includes_zero": row.region.includes_zero,
                "length": row.length,
            }
        )
    return {
        "procedure": report.procedure,
        "q": report.q,
        "m": report.m,
        "R": report.R,
        "average_length": report.average_length,
        "empty_selection": report.empty_selection,
        "rows": rows,
    }


def write_replicate_table(path: str | os.PathLike, table: ReplicateTable) -> None:
    """Per-replicate dump (replicate, R, V, sum_length) for offline auditing."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(REPLICATE_CSV_COLUMNS) + "\n")
        for rep in range(table.R.size):
            fh.write(
                f"{rep},{int(table.R[rep])},{int(table.V[rep])},"
                f"{format_float(table.sum_length[rep])}\n"
            )


def write_eval_long_csv(
    path: str | os.PathLike, rows: list[tuple[str, str, str, float | None]]
) -> None:
    """Plot-ready long format: scenario, procedure, metric, value."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(EVAL_LONG_CSV_COLUMNS) + "\n")
        for scenario, procedure, metric, value in rows:
            fh.write(f"{scenario},{procedure},{metric},{_format_cell(value)}\n")


def eval_long_rows(label: str, report: EvalReport) -> list[tuple[str, str, str, float | None]]:
    d = report.to_json_dict()
    metrics = (
        "fcr_hat", "fcr_se", "fcr_conditional", "coverage_given_selected",
        "avg_length", "avg_R", "empty_selection_rate",
    )
    return [(label, report.procedure, k, d[k]) for k in metrics]


def write_compare_table(path: str | os.PathLike, table: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(COMPARE_CSV_COLUMNS) + "\n")
        for row in table:
            fh.write(",".join(_format_cell(row[c]) for c in COMPARE_CSV_COLUMNS) + "\n")
