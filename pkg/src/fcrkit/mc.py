"""Seeded Monte Carlo evaluation of the interval procedures.

Estimates the Bayes false coverage rate (expected fraction of selected
regions missing their true mean, with V/max(R, 1) for empty selections),
coverage given selection, and average region length for any
procedure x prior x selection-rule x level configuration.

Reproducibility model: replicate r of a run with seed s draws its truth and
data from a Philox stream keyed by (s, r).  Streams are counter-based, so

* results are a pure function of the scenario (bitwise, including across
  ``threads`` settings -- replicates land in preallocated slots and are
  reduced in index order with exact summation), and
* changing only the procedure or eb_mode leaves the simulated (theta, x)
  draws identical, giving paired comparisons across procedures.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import backend
from .errors import ConfigError, NumericError
from .model import MixturePrior
from .procedures import PROCEDURES
from .selection import SelectionRule, select_indices

__all__ = [
    "EB_MODES",
    "Scenario",
    "EvalReport",
    "replicate_draws",
    "run_scenario",
    "compare_scenarios",
]

EB_MODES = ("OraclePrior", "EstimatedPrior")

_PROC_CODE = {"BY": 0, "QH": 1, "EBFCR": 2}

# Per-replicate fit controls: cheaper than the estimation-module defaults but
# far below the statistical noise of a single replicate's fit.
MC_FIT_TOL = 1e-6
MC_FIT_MAX_ITER = 500

_CHUNK = 1024
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class Scenario:
    """One Monte Carlo configuration."""

    prior: MixturePrior
    m: int
    rule: SelectionRule
    q: float
    procedure: str
    eb_mode: str = "OraclePrior"
    replicates: int = 10_000
    seed: int = 0
    qh_denominator: str = "selected"
    fit_tol: float = MC_FIT_TOL
    fit_max_iter: int = MC_FIT_MAX_ITER

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if not 0.0 < self.q < 1.0:
            raise ConfigError(f"q must lie in (0, 1), got {self.q}")
        if self.procedure not in PROCEDURES:
            raise ConfigError(
                f"procedure must be one of {PROCEDURES}, got {self.procedure!r}"
            )
        if self.eb_mode not in EB_MODES:
            raise ConfigError(f"eb_mode must be one of {EB_MODES}, got {self.eb_mode!r}")
        if self.replicates < 1:
            raise ConfigError(f"replicates must be >= 1, got {self.replicates}")
        if not 0 <= int(self.seed) <= _MASK64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        if self.qh_denominator not in ("selected", "all"):
            raise ConfigError(
                f"qh_denominator must be 'selected' or 'all', got {self.qh_denominator!r}"
            )
        self.rule.validate(self.m)

    def shared_key(self) -> tuple:
        """Everything but procedure/eb_mode; must match across a comparison."""
        return (
            self.prior,
            self.m,
            self.rule,
            self.q,
            self.replicates,
            self.seed,
            self.qh_denominator,
            self.fit_tol,
            self.fit_max_iter,
        )


@dataclass(frozen=True)
class EvalReport:
    """Aggregated Monte Carlo estimates for one scenario."""

    procedure: str
    eb_mode: str
    fcr_hat: float
    fcr_se: float
    fcr_conditional: float | None
    coverage_given_selected: float | None
    avg_length: float
    avg_R: float
    empty_selection_rate: float
    replicates: int
    seed: int
    n_fit_nonconverged: int = 0

    def to_json_dict(self) -> dict:
        return {
            "procedure": self.procedure,
            "eb_mode": self.eb_mode,
            "fcr_hat": self.fcr_hat,
            "fcr_se": self.fcr_se,
            "fcr_conditional": self.fcr_conditional,
            "coverage_given_selected": self.coverage_given_selected,
            "avg_length": self.avg_length,
            "avg_R": self.avg_R,
            "empty_selection_rate": self.empty_selection_rate,
            "replicates": self.replicates,
            "seed": self.seed,
            "n_fit_nonconverged": self.n_fit_nonconverged,
        }


def replicate_draws(
    seed: int, rep: int, m: int, prior: MixturePrior
) -> tuple[np.ndarray, np.ndarray]:
    """Truth and data vectors for one replicate.

    The stream is keyed by (seed, rep), never by procedure, so procedure
    comparisons are paired.  Draw order is fixed: slab indicators, slab
    normals, then observation noise.
    """
    key = np.array([seed & _MASK64, rep], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    u = rng.random(m)
    z_theta = rng.standard_normal(m)
    z_x = rng.standard_normal(m)
    theta = np.where(u < prior.p, math.sqrt(prior.tau2) * z_theta, 0.0)
    x = theta + math.sqrt(prior.sigma2) * z_x
    return theta, x


@dataclass(frozen=True)
class ReplicateTable:
    """Per-replicate counts backing an :class:`EvalReport`."""

    R: np.ndarray
    V: np.ndarray
    sum_length: np.ndarray
    fit_failed: np.ndarray


def run_scenario(
    scenario: Scenario, threads: int = 1, return_table: bool = False
) -> EvalReport | tuple[EvalReport, ReplicateTable]:
    """Run a scenario and aggregate its replicates.

    ``threads`` only schedules the replicate loop; every thread count yields
    bitwise-identical reports.
    """
    if threads < 1:
        raise ConfigError(f"threads must be >= 1, got {threads}")
    kern = backend.kernels()
    s = scenario
    n = s.replicates
    proc = _PROC_CODE[s.procedure]
    estimated = s.eb_mode == "EstimatedPrior"
    qh_all = s.qh_denominator == "all"

    R_arr = np.zeros(n, dtype=np.int64)
    V_arr = np.zeros(n, dtype=np.int64)
    len_arr = np.zeros(n, dtype=np.float64)
    fail_arr = np.zeros(n, dtype=bool)

    def work(lo: int, hi: int) -> None:
        for rep in range(lo, hi):
            theta, x = replicate_draws(s.seed, rep, s.m, s.prior)
            sel = select_indices(x, s.prior.sigma2, s.rule)
            try:
                V, slen, fit_ok, _, _ = kern.run_replicate(
                    theta, x, sel, s.prior.sigma2, s.prior.p, s.prior.tau2,
                    s.q, proc, estimated, s.fit_tol, s.fit_max_iter, qh_all,
                )
            except Exception as exc:
                raise NumericError(f"replicate {rep} failed: {exc}") from exc
            R_arr[rep] = sel.size
            V_arr[rep] = V
            len_arr[rep] = slen
            fail_arr[rep] = not fit_ok

    if threads == 1:
        work(0, n)
    else:
        bounds = [(lo, min(lo + _CHUNK, n)) for lo in range(0, n, _CHUNK)]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [pool.submit(work, lo, hi) for lo, hi in bounds]
            for fut in futures:
                fut.result()

    report = _aggregate(s, R_arr, V_arr, len_arr, fail_arr)
    if return_table:
        return report, ReplicateTable(R_arr, V_arr, len_arr, fail_arr)
    return report


def _aggregate(
    s: Scenario,
    R_arr: np.ndarray,
    V_arr: np.ndarray,
    len_arr: np.ndarray,
    fail_arr: np.ndarray,
) -> EvalReport:
    # fsum over fixed-index arrays: exact, hence independent of how the
    # replicate loop was scheduled.
    n = R_arr.size
    terms = V_arr / np.maximum(R_arr, 1)
    fcr_hat = math.fsum(terms) / n
    if n > 1:
        var = math.fsum((terms - fcr_hat) ** 2) / (n - 1)
        fcr_se = math.sqrt(var / n)
    else:
        fcr_se = 0.0

    total_R = int(R_arr.sum())
    total_V = int(V_arr.sum())
    nonempty = int(np.count_nonzero(R_arr > 0))
    coverage = (total_R - total_V) / total_R if total_R > 0 else None
    avg_length = math.fsum(len_arr) / total_R if total_R > 0 else 0.0
    fcr_cond = math.fsum(terms[R_arr > 0]) / nonempty if nonempty > 0 else None

    return EvalReport(
        procedure=s.procedure,
        eb_mode=s.eb_mode,
        fcr_hat=fcr_hat,
        fcr_se=fcr_se,
        fcr_conditional=fcr_cond,
        coverage_given_selected=coverage,
        avg_length=avg_length,
        avg_R=total_R / n,
        empty_selection_rate=(n - nonempty) / n,
        replicates=n,
        seed=s.seed,
        n_fit_nonconverged=int(fail_arr.sum()),
    )


def compare_scenarios(
    scenarios: list[Scenario], threads: int = 1
) -> tuple[list[EvalReport], list[dict]]:
    """Run scenarios differing only in procedure/eb_mode on shared draws.

    Returns the reports plus a comparison table, one row per scenario with
    the average-length ratio against the BY row (None when BY is absent).
    """
    if not scenarios:
        raise ConfigError("need at least one scenario to compare")
    shared = scenarios[0].shared_key()
    for s in scenarios[1:]:
        if s.shared_key() != shared:
            raise ConfigError(
                "compared scenarios may differ only in procedure and eb_mode"
            )
    reports = [run_scenario(s, threads=threads) for s in scenarios]
    by_length = next((r.avg_length for r in reports if r.procedure == "BY"), None)
    table = []
    for r in reports:
        ratio = None
        if by_length is not None and by_length > 0.0:
            ratio = r.avg_length / by_length
        table.append(
            {
                "procedure": r.procedure,
                "eb_mode": r.eb_mode,
                "fcr_hat": r.fcr_hat,
                "fcr_se": r.fcr_se,
                "avg_length": r.avg_length,
                "avg_R": r.avg_R,
                "length_ratio_vs_by": ratio,
            }
        )
    return reports, table
