"""Pure-numpy implementation of the hot numerical kernels.

This is the fallback backend: same API and same math as the compiled
``fcrkit._kernels`` extension, selected at import time by
:mod:`fcrkit.backend` when the extension is unavailable (or forced via
``FCRKIT_BACKEND=python``).  Within a backend every function is
deterministic; across backends results agree to floating-point roundoff
(summation order differs).

Kernel API
----------
``loglik_at``        marginal log-likelihood of (p, tau2) for a data vector
``em_fit``           EM for the two-component marginal MLE (the public fit)
``mle_fit_fast``     moments-initialized EM + Newton polish, used per
                     replicate inside the Monte Carlo loop
``run_replicate``    selection-to-coverage bookkeeping for one simulated
                     replicate
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc

from .model import _ACKLAM_A, _ACKLAM_B, _ACKLAM_C, _ACKLAM_D, _ACKLAM_PLOW

BACKEND_NAME = "python"

PROC_BY = 0
PROC_QH = 1
PROC_EBFCR = 2

_LOG_2PI = math.log(2.0 * math.pi)
_SQRT_2PI = math.sqrt(2.0 * math.pi)
_P_CLAMP = 1e-12


def _qnorm(u: np.ndarray) -> np.ndarray:
    """Vectorized standard normal quantile: Acklam + one Newton step."""
    u = np.asarray(u, dtype=np.float64)
    a, b, c, d = _ACKLAM_A, _ACKLAM_B, _ACKLAM_C, _ACKLAM_D
    z = np.empty_like(u)

    lo = u < _ACKLAM_PLOW
    hi = u > 1.0 - _ACKLAM_PLOW
    mid = ~(lo | hi)
    if lo.any():
        q = np.sqrt(-2.0 * np.log(u[lo]))
        z[lo] = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    if hi.any():
        q = np.sqrt(-2.0 * np.log(1.0 - u[hi]))
        z[hi] = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    if mid.any():
        q = u[mid] - 0.5
        r = q * q
        z[mid] = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / (
            ((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0
        )
    err = 0.5 * erfc(-z / math.sqrt(2.0)) - u
    z -= err * _SQRT_2PI * np.exp(0.5 * z * z)
    return z


def _clamp_p(p: float) -> float:
    return min(max(p, _P_CLAMP), 1.0 - _P_CLAMP)


def _log_mix(x2: np.ndarray, lphi0: np.ndarray, sigma2: float, p: float, tau2: float):
    """Per-point log marginal density and slab responsibility.

    Returns (logf, r) with logf_i = log[(1-p) phi0(x_i) + p phi1(x_i)] and
    r_i the posterior slab weight, both computed in log space.
    """
    pc = _clamp_p(p)
    v = sigma2 + tau2
    a = math.log1p(-pc) + lphi0
    b = (math.log(pc) - 0.5 * (_LOG_2PI + math.log(v))) - x2 / (2.0 * v)
    hi = np.maximum(a, b)
    logf = hi + np.log1p(np.exp(-np.abs(a - b)))
    r = np.exp(b - logf)
    return logf, r


def loglik_at(x: np.ndarray, sigma2: float, p: float, tau2: float) -> float:
    """Marginal log-likelihood of (p, tau2) given sigma2."""
    x2 = np.square(np.asarray(x, dtype=np.float64))
    lphi0 = -0.5 * (_LOG_2PI + math.log(sigma2)) - x2 / (2.0 * sigma2)
    logf, _ = _log_mix(x2, lphi0, sigma2, p, tau2)
    return float(logf.sum())


def em_fit(
    x: np.ndarray,
    sigma2: float,
    p0: float,
    tau20: float,
    tol: float,
    max_iter: int,
    track: bool = False,
):
    """EM for the marginal MLE of (p, tau2) with sigma2 known.

    E-step: slab responsibilities r_i; M-step: p <- mean(r),
    tau2 <- max(0, sum(r x^2)/sum(r) - sigma2).  Stops when
    max(|dp|, |dtau2|) < tol.  Returns (p, tau2, loglik, iterations,
    converged, trace) where trace (when tracked) holds the log-likelihood of
    every visited iterate, length iterations + 1.
    """
    x = np.asarray(x, dtype=np.float64)
    m = x.size
    x2 = np.square(x)
    lphi0 = -0.5 * (_LOG_2PI + math.log(sigma2)) - x2 / (2.0 * sigma2)

    p, tau2 = float(p0), float(tau20)
    trace = [] if track else None
    iterations = 0
    converged = False
    for _ in range(max_iter):
        logf, r = _log_mix(x2, lphi0, sigma2, p, tau2)
        if track:
            trace.append(float(logf.sum()))
        s0 = float(r.sum())
        s1 = float((r * x2).sum())
        p_new = s0 / m
        tau2_new = max(0.0, s1 / s0 - sigma2) if s0 > 0.0 else tau2
        dp = abs(p_new - p)
        dt = abs(tau2_new - tau2)
        p, tau2 = p_new, tau2_new
        iterations += 1
        if max(dp, dt) < tol:
            converged = True
            break
    loglik = loglik_at(x, sigma2, p, tau2)
    if track:
        trace.append(loglik)
        trace = np.asarray(trace)
    return p, tau2, loglik, iterations, converged, trace


def _moment_init(x2: np.ndarray, sigma2: float) -> tuple[float, float]:
    """Moment-matching starting point, clamped to the interior."""
    m2 = float(x2.mean())
    m4 = float(np.square(x2).mean())
    e2 = m2 - sigma2
    e4 = m4 - 3.0 * sigma2 * sigma2
    p, tau2 = 0.5, sigma2
    if e2 > 0.0 and e4 > 0.0:
        t2 = e4 / (3.0 * e2) - 2.0 * sigma2
        if t2 > 0.0:
            p, tau2 = e2 / t2, t2
    p = min(max(p, 1e-3), 1.0 - 1e-3)
    tau2 = min(max(tau2, 1e-8 * sigma2), 1e8 * sigma2)
    return p, tau2


def _full_pass(x2: np.ndarray, lphi0: np.ndarray, sigma2: float, p: float, v: float):
    """One likelihood pass: value, gradient, Hessian in (p, v), EM sums.

    v = sigma2 + tau2 is the slab marginal variance.  Gradient and Hessian
    are assembled from the slab responsibilities r:

        dl/dp   = sum r/p - (1-r)/(1-p)
        dl/dv   = sum r * d,                  d  = (x^2/v - 1) / (2v)
        d2l/dp2 = -sum (r/p - (1-r)/(1-p))^2
        d2l/dpdv = sum (r/p) ((1-r)/(1-p)) d
        d2l/dv2 = sum r (1-r) d^2 + r d',     d' = -x^2/v^3 + 1/(2 v^2)
    """
    logf, r = _log_mix(x2, lphi0, sigma2, p, v - sigma2)
    pc = _clamp_p(p)
    d = (x2 / v - 1.0) / (2.0 * v)
    dprime = -x2 / (v * v * v) + 1.0 / (2.0 * v * v)
    t1 = r / pc - (1.0 - r) / (1.0 - pc)
    ll = float(logf.sum())
    gp = float(t1.sum())
    gv = float((r * d).sum())
    hpp = -float((t1 * t1).sum())
    hpv = float(((r / pc) * ((1.0 - r) / (1.0 - pc)) * d).sum())
    hvv = float((r * (1.0 - r) * d * d + r * dprime).sum())
    s0 = float(r.sum())
    s1 = float((r * x2).sum())
    return ll, gp, gv, hpp, hpv, hvv, s0, s1


def mle_fit_fast(x: np.ndarray, sigma2: float, tol: float, max_iter: int):
    """Marginal MLE of (p, tau2): moment init, EM warmup, Newton polish.

    Targets the same optimum as :func:`em_fit` but converges in far fewer
    likelihood passes; every Newton step is validated against the likelihood
    and falls back to a plain EM step when rejected.  Returns
    (p, tau2, converged).
    """
    x = np.asarray(x, dtype=np.float64)
    m = x.size
    x2 = np.square(x)
    lphi0 = -0.5 * (_LOG_2PI + math.log(sigma2)) - x2 / (2.0 * sigma2)

    p, tau2 = _moment_init(x2, sigma2)
    v = sigma2 + tau2
    state = _full_pass(x2, lphi0, sigma2, p, v)
    for it in range(1, max_iter + 1):
        ll, gp, gv, hpp, hpv, hvv, s0, s1 = state
        took_newton = False
        if it > 3:
            det = hpp * hvv - hpv * hpv
            if det > 0.0 and hpp < 0.0:
                dp = -(hvv * gp - hpv * gv) / det
                dv = -(hpp * gv - hpv * gp) / det
                p_c = p + dp
                v_c = v + dv
                if _P_CLAMP <= p_c <= 1.0 - _P_CLAMP and v_c >= sigma2:
                    cand = _full_pass(x2, lphi0, sigma2, p_c, v_c)
                    if cand[0] >= ll - 1e-10 * (1.0 + abs(ll)):
                        step = max(abs(p_c - p), abs(v_c - v))
                        p, v, state = p_c, v_c, cand
                        took_newton = True
        if not took_newton:
            p_new = s0 / m
            tau2_new = max(0.0, s1 / s0 - sigma2) if s0 > 0.0 else v - sigma2
            step = max(abs(p_new - p), abs(tau2_new - (v - sigma2)))
            p = p_new
            v = sigma2 + tau2_new
            state = _full_pass(x2, lphi0, sigma2, p, v)
        if step < tol:
            return p, v - sigma2, True
    return p, v - sigma2, False


def _w0_at(x2_sel: np.ndarray, sigma2: float, p: float, tau2: float) -> np.ndarray:
    """Posterior null weight w0 at the selected observations."""
    if p <= 0.0:
        return np.ones_like(x2_sel)
    if p >= 1.0:
        return np.zeros_like(x2_sel)
    v = sigma2 + tau2
    c2 = 0.5 * (1.0 / sigma2 - 1.0 / v)
    mm = math.log(p / (1.0 - p)) - 0.5 * math.log(v / sigma2) + x2_sel * c2
    mm = np.minimum(mm, 709.0)
    return 1.0 / (1.0 + np.exp(mm))


def run_replicate(
    theta: np.ndarray,
    x: np.ndarray,
    sel: np.ndarray,
    sigma2: float,
    p: float,
    tau2: float,
    q: float,
    proc: int,
    estimated: bool,
    fit_tol: float,
    fit_max_iter: int,
    qh_denom_all: bool,
):
    """Coverage bookkeeping for one replicate and one procedure.

    Given the replicate's truth ``theta``, data ``x`` and selected indices
    ``sel``, builds the procedure's regions and returns
    (V, sum_length, fit_converged, p_used, tau2_used) where V is the number
    of selected regions missing their true mean.
    """
    theta = np.asarray(theta, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    sel = np.asarray(sel, dtype=np.int64)
    m = x.size
    R = sel.size
    if R == 0:
        return 0, 0.0, True, p, tau2

    fit_ok = True
    p_used, tau2_used = p, tau2
    if estimated and proc != PROC_BY:
        p_used, tau2_used, fit_ok = mle_fit_fast(x, sigma2, fit_tol, fit_max_iter)

    xs = x[sel]
    ths = theta[sel]
    sigma = math.sqrt(sigma2)

    if proc == PROC_BY:
        z = float(_qnorm(np.array([1.0 - R * q / (2.0 * m)]))[0])
        half = sigma * z
        covered = np.abs(xs - ths) <= half
        return (
            int(R - np.count_nonzero(covered)),
            2.0 * half * R,
            fit_ok,
            p_used,
            tau2_used,
        )

    if proc == PROC_QH:
        level = 1.0 - q / (m if qh_denom_all else R)
    elif proc == PROC_EBFCR:
        level = 1.0 - q
    else:
        raise ValueError(f"unknown procedure code {proc}")

    w0 = _w0_at(np.square(xs), sigma2, p_used, tau2_used)
    atom_only = w0 >= level
    slab_mass = np.where(atom_only, 0.5, (level - w0) / np.maximum(1.0 - w0, 1e-300))
    z = _qnorm(0.5 * (1.0 + np.where(atom_only, 0.0, slab_mass)))
    vmar = sigma2 + tau2_used
    b = tau2_used / vmar
    halfs = np.where(atom_only, 0.0, z * math.sqrt(b * sigma2))
    centers = b * xs

    covered_zero = atom_only | (w0 > 0.0) | (np.abs(centers) <= halfs)
    covered_slab = (~atom_only) & (np.abs(ths - centers) <= halfs)
    covered = np.where(ths == 0.0, covered_zero, covered_slab)
    lengths = np.where(atom_only, 0.0, 2.0 * halfs)
    return (
        int(R - np.count_nonzero(covered)),
        float(lengths.sum()),
        fit_ok,
        p_used,
        tau2_used,
    )
