"""The three interval procedures compared by the evaluation harness.

* ``BY`` -- Benjamini & Yekutieli's (2005) frequentist FCR intervals: centered
  at X_i, half-width sigma * z_{1 - R*q/(2m)}.  Multiplicity is paid for by
  lengthening the intervals.
* ``QH`` -- Bonferroni-Bayes simultaneous regions in the style of Qiu & Hwang
  (2007): each selected region is a posterior credible region at level
  1 - q/R, so simultaneous Bayes non-coverage over the selected set is <= q
  by the union bound.
* ``EBFCR`` -- Bayes-FCR-controlling regions: each selected region is a
  posterior credible region at level 1 - q.  Per-region posterior
  non-coverage <= q makes the expected fraction of selected regions missing
  their mean <= q under the model; the Monte Carlo harness certifies this
  empirically.  Multiplicity is paid for by shrinking the centers, not by
  lengthening.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError
from .model import MixturePrior, normal_quantile, posterior_at
from .regions import CredibleRegion, credible_region_at_level
from .selection import Batch, SelectionResult

__all__ = [
    "PROCEDURES",
    "ReportRow",
    "IntervalReport",
    "by_intervals",
    "qh_intervals",
    "eb_fcr_intervals",
    "run_procedure",
]

PROCEDURES = ("BY", "QH", "EBFCR")


@dataclass(frozen=True)
class ReportRow:
    """One selected population's interval."""

    index: int
    id: str
    x: float
    region: CredibleRegion

    @property
    def length(self) -> float:
        return self.region.length


@dataclass(frozen=True)
class IntervalReport:
    """Regions for every selected population, in batch (id) order."""

    procedure: str
    q: float
    m: int
    R: int
    rows: tuple[ReportRow, ...]
    empty_selection: bool = False

    @property
    def average_length(self) -> float:
        """Mean region length over the selected set; 0 for an empty report."""
        if not self.rows:
            return 0.0
        return math.fsum(row.length for row in self.rows) / len(self.rows)


def _check_inputs(batch: Batch, sel: SelectionResult, q: float,
                  prior: MixturePrior | None = None) -> None:
    if not 0.0 < q < 1.0:
        raise ConfigError(f"q must lie in (0, 1), got {q}")
    if sel.m != batch.m:
        raise ConfigError(f"selection is for m={sel.m} but batch has m={batch.m}")
    if prior is not None and prior.sigma2 != batch.sigma2:
        raise ConfigError(
            f"prior carries sigma2={prior.sigma2} but batch has sigma2={batch.sigma2}"
        )


def by_intervals(batch: Batch, sel: SelectionResult, q: float) -> IntervalReport:
    """Benjamini-Yekutieli FCR intervals x_i +/- sigma * z_{1 - R*q/(2m)}.

    The half-width is shared by all selected populations.  An empty selection
    yields an empty, flagged report rather than an error.
    """
    _check_inputs(batch, sel, q)
    if sel.R == 0:
        return IntervalReport("BY", q, batch.m, 0, (), empty_selection=True)
    half = batch.sigma * normal_quantile(1.0 - sel.R * q / (2.0 * batch.m))
    rows = []
    for i in sel.selected:
        x = float(batch.x[i])
        region = CredibleRegion(
            includes_zero=(x - half <= 0.0 <= x + half),
            intervals=((x - half, x + half),),
        )
        rows.append(ReportRow(index=i, id=batch.ids[i], x=x, region=region))
    return IntervalReport("BY", q, batch.m, sel.R, tuple(rows))


def _posterior_level_report(
    name: str,
    batch: Batch,
    sel: SelectionResult,
    prior: MixturePrior,
    q: float,
    level: float,
) -> IntervalReport:
    rows = []
    for i in sel.selected:
        x = float(batch.x[i])
        region = credible_region_at_level(posterior_at(x, prior), level)
        rows.append(ReportRow(index=i, id=batch.ids[i], x=x, region=region))
    return IntervalReport(name, q, batch.m, sel.R, tuple(rows))


def qh_intervals(
    batch: Batch,
    sel: SelectionResult,
    prior: MixturePrior,
    q: float,
    bonferroni_denominator: str = "selected",
) -> IntervalReport:
    """Simultaneous Bonferroni-Bayes regions at posterior level 1 - q/R.

    ``bonferroni_denominator`` may be "selected" (divide q by R, the default)
    or "all" (divide by m); both bound the simultaneous Bayes non-coverage of
    the selected set by q, the latter more conservatively.
    """
    _check_inputs(batch, sel, q, prior)
    if sel.R == 0:
        return IntervalReport("QH", q, batch.m, 0, (), empty_selection=True)
    if bonferroni_denominator == "selected":
        denom = sel.R
    elif bonferroni_denominator == "all":
        denom = batch.m
    else:
        raise ConfigError(
            f"bonferroni_denominator must be 'selected' or 'all',"
            f" got {bonferroni_denominator!r}"
        )
    return _posterior_level_report("QH", batch, sel, prior, q, 1.0 - q / denom)


def eb_fcr_intervals(
    batch: Batch, sel: SelectionResult, prior: MixturePrior, q: float
) -> IntervalReport:
    """Bayes-FCR-controlling regions at posterior level 1 - q per selection.

    Each region has posterior non-coverage <= q, which bounds the expected
    fraction of selected regions missing their true mean by q under the
    model, whatever the selection rule.
    """
    _check_inputs(batch, sel, q, prior)
    if sel.R == 0:
        return IntervalReport("EBFCR", q, batch.m, 0, (), empty_selection=True)
    return _posterior_level_report("EBFCR", batch, sel, prior, q, 1.0 - q)


def run_procedure(
    name: str,
    batch: Batch,
    sel: SelectionResult,
    prior: MixturePrior | None,
    q: float,
    bonferroni_denominator: str = "selected",
) -> IntervalReport:
    """Dispatch on a procedure tag ("BY" | "QH" | "EBFCR")."""
    if name == "BY":
        return by_intervals(batch, sel, q)
    if name in ("QH", "EBFCR") and prior is None:
        raise ConfigError(f"procedure {name} needs a prior")
    if name == "QH":
        return qh_intervals(batch, sel, prior, q, bonferroni_denominator)
    if name == "EBFCR":
        return eb_fcr_intervals(batch, sel, prior, q)
    raise ConfigError(f"unknown procedure {name!r}; expected one of {PROCEDURES}")
