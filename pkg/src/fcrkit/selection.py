"""Selection rules: which of the m populations get an interval.

Intervals constructed only for data-selected populations inherit selection
bias; every downstream procedure is judged on the selected set produced here.
All rules act on the standardized magnitude |x_i| / sigma (two-sided).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .errors import ConfigError

__all__ = [
    "Batch",
    "Threshold",
    "TopK",
    "BHLevel",
    "SelectionRule",
    "SelectionResult",
    "select",
    "select_indices",
    "two_sided_pvalues",
]


@dataclass(frozen=True)
class Batch:
    """m parallel observations with identifiers and their known noise variance."""

    ids: tuple[str, ...]
    x: np.ndarray
    sigma2: float

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=np.float64)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "ids", tuple(str(i) for i in self.ids))
        if x.ndim != 1 or x.size < 1:
            raise ValueError("x must be a 1-d array with at least one element")
        if len(self.ids) != x.size:
            raise ValueError(f"{len(self.ids)} ids for {x.size} observations")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("ids must be unique")
        if not np.all(np.isfinite(x)):
            raise ValueError("all observations must be finite")
        if not (math.isfinite(self.sigma2) and self.sigma2 > 0.0):
            raise ValueError(f"sigma2 must be finite and > 0, got {self.sigma2}")

    @property
    def m(self) -> int:
        return int(self.x.size)

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)


@dataclass(frozen=True)
class Threshold:
    """Select i with |x_i| / sigma >= c."""

    c: float

    def validate(self, m: int) -> None:
        if not (math.isfinite(self.c) and self.c >= 0.0):
            raise ConfigError(f"threshold c must be >= 0, got {self.c}")

    def describe(self) -> dict:
        return {"kind": "threshold", "c": self.c}


@dataclass(frozen=True)
class TopK:
    """Select the k indices with largest |x_i|, ties to the smaller index."""

    k: int

    def validate(self, m: int) -> None:
        if not isinstance(self.k, int) or not 1 <= self.k <= m:
            raise ConfigError(f"top-k count must lie in 1..{m}, got {self.k}")

    def describe(self) -> dict:
        return {"kind": "topk", "k": self.k}


@dataclass(frozen=True)
class BHLevel:
    """Benjamini-Hochberg step-up at level alpha on two-sided p-values."""

    alpha: float

    def validate(self, m: int) -> None:
        if not (math.isfinite(self.alpha) and 0.0 < self.alpha < 1.0):
            raise ConfigError(f"BH alpha must lie in (0, 1), got {self.alpha}")

    def describe(self) -> dict:
        return {"kind": "bh", "alpha": self.alpha}


SelectionRule = Threshold | TopK | BHLevel


@dataclass(frozen=True)
class SelectionResult:
    """The selected index set together with the rule that produced it."""

    rule: SelectionRule
    selected: tuple[int, ...]
    m: int

    def __post_init__(self) -> None:
        sel = tuple(int(i) for i in self.selected)
        object.__setattr__(self, "selected", sel)
        if any(not 0 <= i < self.m for i in sel):
            raise ValueError("selected indices out of range")
        if any(b <= a for a, b in zip(sel, sel[1:])):
            raise ValueError("selected indices must be strictly increasing")

    @property
    def R(self) -> int:
        return len(self.selected)


def two_sided_pvalues(x: np.ndarray, sigma: float) -> np.ndarray:
    """p_i = 2 * (1 - Phi(|x_i| / sigma)), via erfc for tail accuracy."""
    return erfc(np.abs(np.asarray(x, dtype=np.float64)) / (sigma * math.sqrt(2.0)))


def select_indices(x: np.ndarray, sigma2: float, rule: SelectionRule) -> np.ndarray:
    """Selected indices (sorted, int64) for a raw observation vector.

    The validation-free inner routine behind :func:`select`; also the single
    source of selection decisions for the Monte Carlo harness, so every
    backend sees identical selected sets.
    """
    sigma = math.sqrt(sigma2)
    if isinstance(rule, Threshold):
        selected = np.flatnonzero(np.abs(x) / sigma >= rule.c)
    elif isinstance(rule, TopK):
        # Stable sort on descending |x| keeps the smaller index first on ties.
        order = np.argsort(-np.abs(x), kind="stable")
        selected = np.sort(order[: rule.k])
    elif isinstance(rule, BHLevel):
        pvals = two_sided_pvalues(x, sigma)
        selected = np.flatnonzero(bh_rejection_mask(pvals, rule.alpha))
    else:
        raise ConfigError(f"unknown selection rule {rule!r}")
    return selected.astype(np.int64)


def select(batch: Batch, rule: SelectionRule) -> SelectionResult:
    """Apply a selection rule to a batch.

    Deterministic and permutation-equivariant (up to the documented top-k
    tie-break toward the smaller index).
    """
    rule.validate(batch.m)
    selected = select_indices(batch.x, batch.sigma2, rule)
    return SelectionResult(rule=rule, selected=tuple(int(i) for i in selected), m=batch.m)


def bh_rejection_mask(pvals: np.ndarray, alpha: float) -> np.ndarray:
    """Benjamini-Hochberg step-up: reject all p <= p_(j*), j* the largest j
    with p_(j) <= alpha * j / m."""
    m = pvals.size
    ps = np.sort(pvals)
    ok = ps <= alpha * np.arange(1, m + 1) / m
    if not ok.any():
        return np.zeros(m, dtype=bool)
    cutoff = ps[np.flatnonzero(ok)[-1]]
    return pvals <= cutoff
