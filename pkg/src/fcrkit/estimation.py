"""Empirical Bayes hyperparameter estimation: fit (p, tau2) with sigma2 known.

Two fitters share the :class:`FitResult` contract:

* :func:`fit_marginal_mle` -- EM on the two-component marginal of X.  The
  slab responsibility of each observation is the E-step; the M-step updates
  p to the mean responsibility and tau2 to the responsibility-weighted
  second moment minus sigma2 (clamped at 0).  The marginal log-likelihood is
  non-decreasing across iterations.
* :func:`fit_moments` -- matches the second and fourth sample moments,

      E[X^2] = sigma2 + p tau2
      E[X^4] = 3 (1-p) sigma2^2 + 3 p (sigma2 + tau2)^2,

  solved in closed form and clamped to the parameter space.  Cheap; used as
  an initializer and cross-check for the MLE.

sigma2 is never estimated; it is part of the batch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .errors import NumericError
from .model import MixturePrior
from .selection import Batch

__all__ = ["FitResult", "fit_marginal_mle", "fit_moments", "DEFAULT_TOL", "DEFAULT_MAX_ITER"]

DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 10_000

# p below this is treated as the spike-only boundary, where tau2 drops out of
# the likelihood and cannot be identified.
_P_BOUNDARY = 1e-6


@dataclass(frozen=True)
class FitResult:
    """A fitted prior plus convergence diagnostics."""

    prior: MixturePrior
    loglik: float
    iterations: int
    converged: bool
    method: str
    flags: tuple[str, ...] = ()
    loglik_trace: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not math.isfinite(self.loglik):
            raise NumericError(f"non-finite log-likelihood {self.loglik!r}")

    def to_json_dict(self) -> dict:
        return {
            "p": self.prior.p,
            "tau2": self.prior.tau2,
            "sigma2": self.prior.sigma2,
            "loglik": self.loglik,
            "iterations": self.iterations,
            "converged": self.converged,
            "method": self.method,
            "flags": list(self.flags),
        }


def _validate_fit_args(batch: Batch, tol: float, max_iter: int) -> None:
    if batch.m < 2:
        raise ValueError(f"need at least 2 observations to fit, got {batch.m}")
    if not tol > 0.0:
        raise ValueError(f"tol must be > 0, got {tol}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")


def fit_marginal_mle(
    batch: Batch,
    init: MixturePrior | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    track_loglik: bool = False,
) -> FitResult:
    """Marginal maximum likelihood for (p, tau2) by EM.

    ``init`` defaults to (p = 0.5, tau2 = sigma2).  Iteration stops when
    max(|dp|, |dtau2|) < tol or after ``max_iter`` M-steps.  When the fit
    lands on the spike-only boundary (p below 1e-6), tau2 is unidentified and
    is reported as the init value with a flag.

    With ``track_loglik`` the per-iterate log-likelihoods are kept on the
    result (``loglik_trace``), handy for monotonicity checks.
    """
    _validate_fit_args(batch, tol, max_iter)
    if init is None:
        init = MixturePrior(p=0.5, tau2=batch.sigma2, sigma2=batch.sigma2)
    elif init.sigma2 != batch.sigma2:
        raise ValueError(
            f"init carries sigma2={init.sigma2} but batch has sigma2={batch.sigma2}"
        )

    kern = backend.kernels()
    p, tau2, loglik, iterations, converged, trace = kern.em_fit(
        batch.x, batch.sigma2, init.p, init.tau2, tol, max_iter, track_loglik
    )
    flags: tuple[str, ...] = ()
    if p <= _P_BOUNDARY or tau2 <= 1e-12 * batch.sigma2:
        # Either boundary (p -> 0 or tau2 -> 0) degenerates the marginal to
        # the pure-null model, under which tau2 carries no information;
        # canonicalize to p = 0 and report tau2 as the init value.
        p, tau2 = 0.0, init.tau2
        loglik = float(kern.loglik_at(batch.x, batch.sigma2, p, tau2))
        flags = ("p_boundary_zero", "tau2_unidentified")
    if not math.isfinite(loglik):
        raise NumericError(f"EM produced non-finite log-likelihood {loglik!r}")
    return FitResult(
        prior=MixturePrior(p=p, tau2=tau2, sigma2=batch.sigma2),
        loglik=loglik,
        iterations=int(iterations),
        converged=bool(converged),
        method="MarginalMLE",
        flags=flags,
        loglik_trace=None if trace is None else np.asarray(trace),
    )


def fit_moments(batch: Batch) -> FitResult:
    """Closed-form moment-matching fit of (p, tau2).

    Inverts the second/fourth-moment system; the excess fourth moment
    identifies tau2 + 2*sigma2 and the excess second moment then gives p.
    Boundary data (no excess variance, or kurtosis at or below the Gaussian)
    yields a clamped fit with explanatory flags.
    """
    if batch.m < 2:
        raise ValueError(f"need at least 2 observations to fit, got {batch.m}")
    sigma2 = batch.sigma2
    x2 = np.square(batch.x)
    m2 = float(x2.mean())
    m4 = float(np.square(x2).mean())
    e2 = m2 - sigma2  # = p * tau2 in the model
    e4 = m4 - 3.0 * sigma2 * sigma2  # = 3 * p * tau2 * (tau2 + 2 * sigma2)

    flags: list[str] = []
    if e2 <= 0.0:
        p, tau2 = 0.0, 0.0
        flags += ["no_excess_variance", "p_clamped"]
    else:
        tau2 = e4 / (3.0 * e2) - 2.0 * sigma2 if e4 > 0.0 else 0.0
        if tau2 <= 0.0:
            # Kurtosis at or below Gaussian: not reachable by the mixture;
            # fall back to the pure-slab fit that preserves the variance.
            p, tau2 = 1.0, e2
            flags += ["kurtosis_below_gaussian", "p_clamped"]
        else:
            p = e2 / tau2
            if p > 1.0:
                p, tau2 = 1.0, e2
                flags += ["p_clamped"]

    kern = backend.kernels()
    loglik = float(kern.loglik_at(batch.x, sigma2, p, tau2))
    return FitResult(
        prior=MixturePrior(p=p, tau2=tau2, sigma2=sigma2),
        loglik=loglik,
        iterations=0,
        converged=True,
        method="Moments",
        flags=tuple(flags),
    )
