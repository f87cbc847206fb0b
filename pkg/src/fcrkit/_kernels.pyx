# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementation of the hot numerical kernels.

Scalar C loops mirroring :mod:`fcrkit._kernels_py` (the numpy fallback):
same algorithms, same clamps, same stopping rules.  Results agree with the
fallback up to floating-point summation order.
"""

import numpy as np

from libc.math cimport erfc, exp, fabs, log, log1p, sqrt

BACKEND_NAME = "compiled"

PROC_BY = 0
PROC_QH = 1
PROC_EBFCR = 2

cdef double _LOG_2PI = log(2.0 * 3.141592653589793238462643383279502884)
cdef double _SQRT_2PI = sqrt(2.0 * 3.141592653589793238462643383279502884)
cdef double _SQRT_2 = sqrt(2.0)
cdef double _P_CLAMP = 1e-12

cdef int _PROC_BY = 0
cdef int _PROC_QH = 1
cdef int _PROC_EBFCR = 2

# Acklam's rational approximation, refined by one Newton step (same
# coefficients as fcrkit.model.normal_quantile).
cdef double _A0 = -3.969683028665376e01
cdef double _A1 = 2.209460984245205e02
cdef double _A2 = -2.759285104469687e02
cdef double _A3 = 1.383577518672690e02
cdef double _A4 = -3.066479806614716e01
cdef double _A5 = 2.506628277459239e00
cdef double _B0 = -5.447609879822406e01
cdef double _B1 = 1.615858368580409e02
cdef double _B2 = -1.556989798598866e02
cdef double _B3 = 6.680131188771972e01
cdef double _B4 = -1.328068155288572e01
cdef double _C0 = -7.784894002430293e-03
cdef double _C1 = -3.223964580411365e-01
cdef double _C2 = -2.400758277161838e00
cdef double _C3 = -2.549732539343734e00
cdef double _C4 = 4.374664141464968e00
cdef double _C5 = 2.938163982698783e00
cdef double _D0 = 7.784695709041462e-03
cdef double _D1 = 3.224671290700398e-01
cdef double _D2 = 2.445134137142996e00
cdef double _D3 = 3.754408661907416e00
cdef double _PLOW = 0.02425


cdef inline double _pnorm(double z) noexcept nogil:
    return 0.5 * erfc(-z / _SQRT_2)


cdef double _qnorm(double u) noexcept nogil:
    cdef double q, r, z
    if u < _PLOW:
        q = sqrt(-2.0 * log(u))
        z = (((((_C0 * q + _C1) * q + _C2) * q + _C3) * q + _C4) * q + _C5) / (
            (((_D0 * q + _D1) * q + _D2) * q + _D3) * q + 1.0)
    elif u > 1.0 - _PLOW:
        q = sqrt(-2.0 * log(1.0 - u))
        z = -(((((_C0 * q + _C1) * q + _C2) * q + _C3) * q + _C4) * q + _C5) / (
            (((_D0 * q + _D1) * q + _D2) * q + _D3) * q + 1.0)
    else:
        q = u - 0.5
        r = q * q
        z = (((((_A0 * r + _A1) * r + _A2) * r + _A3) * r + _A4) * r + _A5) * q / (
            ((((_B0 * r + _B1) * r + _B2) * r + _B3) * r + _B4) * r + 1.0)
    z -= (_pnorm(z) - u) * _SQRT_2PI * exp(0.5 * z * z)
    return z


def qnorm(double u):
    """Scalar standard normal quantile (test hook for backend parity)."""
    return _qnorm(u)


cdef inline double _clamp_p(double p) noexcept nogil:
    if p < _P_CLAMP:
        return _P_CLAMP
    if p > 1.0 - _P_CLAMP:
        return 1.0 - _P_CLAMP
    return p


cdef double _loglik_pass(
    const double[::1] x2, const double[::1] lphi0, double sigma2,
    double p, double tau2, double* s0_out, double* s1_out,
) noexcept nogil:
    """log-likelihood plus EM responsibility sums at (p, tau2).

    The log-likelihood is accumulated with Neumaier compensation so that the
    per-step EM monotonicity holds to 1e-9 even for very large m.
    """
    cdef Py_ssize_t i, m = x2.shape[0]
    cdef double pc = _clamp_p(p)
    cdef double v = sigma2 + tau2
    cdef double lw0 = log1p(-pc)
    cdef double lw1 = log(pc) - 0.5 * (_LOG_2PI + log(v))
    cdef double inv2v = 1.0 / (2.0 * v)
    cdef double a, b, u, e, logf, r, t
    cdef double ll = 0.0, comp = 0.0, s0 = 0.0, s1 = 0.0
    for i in range(m):
        a = lw0 + lphi0[i]
        b = lw1 - x2[i] * inv2v
        u = a - b
        e = exp(-fabs(u))
        if u >= 0.0:
            logf = a + log1p(e)
            r = e / (1.0 + e)
        else:
            logf = b + log1p(e)
            r = 1.0 / (1.0 + e)
        t = ll + logf
        if fabs(ll) >= fabs(logf):
            comp += (ll - t) + logf
        else:
            comp += (logf - t) + ll
        ll = t
        s0 += r
        s1 += r * x2[i]
    s0_out[0] = s0
    s1_out[0] = s1
    return ll + comp


ctypedef struct FullPass:
    double ll
    double gp
    double gv
    double hpp
    double hpv
    double hvv
    double s0
    double s1


cdef FullPass _full_pass(
    const double[::1] x2, const double[::1] lphi0, double sigma2,
    double p, double v,
) noexcept nogil:
    """Likelihood value, gradient and Hessian in (p, v), plus EM sums."""
    cdef FullPass out
    cdef Py_ssize_t i, m = x2.shape[0]
    cdef double pc = _clamp_p(p)
    cdef double lw0 = log1p(-pc)
    cdef double lw1 = log(pc) - 0.5 * (_LOG_2PI + log(v))
    cdef double inv2v = 1.0 / (2.0 * v)
    cdef double invv = 1.0 / v
    cdef double a, b, u, e, logf, r, d, dprime, t1, rp, rq
    out.ll = 0.0
    out.gp = 0.0
    out.gv = 0.0
    out.hpp = 0.0
    out.hpv = 0.0
    out.hvv = 0.0
    out.s0 = 0.0
    out.s1 = 0.0
    for i in range(m):
        a = lw0 + lphi0[i]
        b = lw1 - x2[i] * inv2v
        u = a - b
        e = exp(-fabs(u))
        if u >= 0.0:
            logf = a + log1p(e)
            r = e / (1.0 + e)
        else:
            logf = b + log1p(e)
            r = 1.0 / (1.0 + e)
        d = (x2[i] * invv - 1.0) * inv2v
        dprime = -x2[i] * invv * invv * invv + 0.5 * invv * invv
        rp = r / pc
        rq = (1.0 - r) / (1.0 - pc)
        t1 = rp - rq
        out.ll += logf
        out.gp += t1
        out.gv += r * d
        out.hpp -= t1 * t1
        out.hpv += rp * rq * d
        out.hvv += r * (1.0 - r) * d * d + r * dprime
        out.s0 += r
        out.s1 += r * x2[i]
    return out


def loglik_at(const double[::1] x, double sigma2, double p, double tau2):
    """Marginal log-likelihood of (p, tau2) given sigma2."""
    cdef Py_ssize_t i, m = x.shape[0]
    x2_arr = np.empty(m, dtype=np.float64)
    lphi0_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] x2 = x2_arr
    cdef double[::1] lphi0 = lphi0_arr
    _prep(x, sigma2, x2, lphi0)
    cdef double s0 = 0.0, s1 = 0.0
    return _loglik_pass(x2, lphi0, sigma2, p, tau2, &s0, &s1)


cdef void _prep(
    const double[::1] x, double sigma2, double[::1] x2, double[::1] lphi0
) noexcept nogil:
    cdef Py_ssize_t i, m = x.shape[0]
    cdef double c0 = -0.5 * (_LOG_2PI + log(sigma2))
    cdef double inv2s = 1.0 / (2.0 * sigma2)
    for i in range(m):
        x2[i] = x[i] * x[i]
        lphi0[i] = c0 - x2[i] * inv2s


def em_fit(
    const double[::1] x, double sigma2, double p0, double tau20,
    double tol, long max_iter, bint track=False,
):
    """EM for the marginal MLE; same contract as the fallback's em_fit."""
    cdef Py_ssize_t m = x.shape[0]
    x2_arr = np.empty(m, dtype=np.float64)
    lphi0_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] x2 = x2_arr
    cdef double[::1] lphi0 = lphi0_arr
    _prep(x, sigma2, x2, lphi0)

    trace_arr = np.empty(max_iter + 1, dtype=np.float64) if track else None
    cdef double[::1] trace = trace_arr if track else None

    cdef double p = p0, tau2 = tau20
    cdef double ll = 0.0, s0 = 0.0, s1 = 0.0
    cdef double p_new, tau2_new, dp, dt
    cdef long it, iterations = 0
    cdef bint converged = False
    with nogil:
        for it in range(max_iter):
            ll = _loglik_pass(x2, lphi0, sigma2, p, tau2, &s0, &s1)
            if track:
                trace[it] = ll
            p_new = s0 / m
            if s0 > 0.0:
                tau2_new = s1 / s0 - sigma2
                if tau2_new < 0.0:
                    tau2_new = 0.0
            else:
                tau2_new = tau2
            dp = fabs(p_new - p)
            dt = fabs(tau2_new - tau2)
            p = p_new
            tau2 = tau2_new
            iterations += 1
            if dp < tol and dt < tol:
                converged = True
                break
        ll = _loglik_pass(x2, lphi0, sigma2, p, tau2, &s0, &s1)
    if track:
        trace[iterations] = ll
        return p, tau2, ll, iterations, converged, trace_arr[: iterations + 1].copy()
    return p, tau2, ll, iterations, converged, None


cdef void _moment_init(
    const double[::1] x2, double sigma2, double* p_out, double* tau2_out
) noexcept nogil:
    cdef Py_ssize_t i, m = x2.shape[0]
    cdef double m2 = 0.0, m4 = 0.0
    for i in range(m):
        m2 += x2[i]
        m4 += x2[i] * x2[i]
    m2 /= m
    m4 /= m
    cdef double e2 = m2 - sigma2
    cdef double e4 = m4 - 3.0 * sigma2 * sigma2
    cdef double p = 0.5, tau2 = sigma2, t2
    if e2 > 0.0 and e4 > 0.0:
        t2 = e4 / (3.0 * e2) - 2.0 * sigma2
        if t2 > 0.0:
            p = e2 / t2
            tau2 = t2
    if p < 1e-3:
        p = 1e-3
    elif p > 1.0 - 1e-3:
        p = 1.0 - 1e-3
    if tau2 < 1e-8 * sigma2:
        tau2 = 1e-8 * sigma2
    elif tau2 > 1e8 * sigma2:
        tau2 = 1e8 * sigma2
    p_out[0] = p
    tau2_out[0] = tau2


cdef bint _mle_fit_fast(
    const double[::1] x2, const double[::1] lphi0, double sigma2,
    double tol, long max_iter, double* p_out, double* tau2_out,
) noexcept nogil:
    """Moment init + EM warmup + likelihood-guarded Newton polish."""
    cdef Py_ssize_t m = x2.shape[0]
    cdef double p, tau2, v
    _moment_init(x2, sigma2, &p, &tau2)
    v = sigma2 + tau2

    cdef FullPass state = _full_pass(x2, lphi0, sigma2, p, v)
    cdef FullPass cand
    cdef double det, dp, dv, p_c, v_c, step, p_new, tau2_new
    cdef bint took_newton
    cdef long it
    for it in range(1, max_iter + 1):
        took_newton = False
        if it > 3:
            det = state.hpp * state.hvv - state.hpv * state.hpv
            if det > 0.0 and state.hpp < 0.0:
                dp = -(state.hvv * state.gp - state.hpv * state.gv) / det
                dv = -(state.hpp * state.gv - state.hpv * state.gp) / det
                p_c = p + dp
                v_c = v + dv
                if _P_CLAMP <= p_c <= 1.0 - _P_CLAMP and v_c >= sigma2:
                    cand = _full_pass(x2, lphi0, sigma2, p_c, v_c)
                    if cand.ll >= state.ll - 1e-10 * (1.0 + fabs(state.ll)):
                        step = fabs(p_c - p)
                        if fabs(v_c - v) > step:
                            step = fabs(v_c - v)
                        p = p_c
                        v = v_c
                        state = cand
                        took_newton = True
        if not took_newton:
            p_new = state.s0 / m
            if state.s0 > 0.0:
                tau2_new = state.s1 / state.s0 - sigma2
                if tau2_new < 0.0:
                    tau2_new = 0.0
            else:
                tau2_new = v - sigma2
            step = fabs(p_new - p)
            if fabs(tau2_new - (v - sigma2)) > step:
                step = fabs(tau2_new - (v - sigma2))
            p = p_new
            v = sigma2 + tau2_new
            state = _full_pass(x2, lphi0, sigma2, p, v)
        if step < tol:
            p_out[0] = p
            tau2_out[0] = v - sigma2
            return True
    p_out[0] = p
    tau2_out[0] = v - sigma2
    return False


def mle_fit_fast(const double[::1] x, double sigma2, double tol, long max_iter):
    """Marginal MLE of (p, tau2); returns (p, tau2, converged)."""
    cdef Py_ssize_t m = x.shape[0]
    x2_arr = np.empty(m, dtype=np.float64)
    lphi0_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] x2 = x2_arr
    cdef double[::1] lphi0 = lphi0_arr
    _prep(x, sigma2, x2, lphi0)
    cdef double p = 0.0, tau2 = 0.0
    cdef bint ok
    with nogil:
        ok = _mle_fit_fast(x2, lphi0, sigma2, tol, max_iter, &p, &tau2)
    return p, tau2, bool(ok)


def run_replicate(
    const double[::1] theta,
    const double[::1] x,
    const long[::1] sel,
    double sigma2,
    double p,
    double tau2,
    double q,
    int proc,
    bint estimated,
    double fit_tol,
    long fit_max_iter,
    bint qh_denom_all,
):
    """Coverage bookkeeping for one replicate; see the fallback docstring."""
    cdef Py_ssize_t m = x.shape[0]
    cdef Py_ssize_t R = sel.shape[0]
    if R == 0:
        return 0, 0.0, True, p, tau2

    cdef double p_used = p, tau2_used = tau2
    cdef bint fit_ok = True
    cdef double[::1] x2
    cdef double[::1] lphi0
    x2_arr = None
    if estimated and proc != _PROC_BY:
        x2_arr = np.empty(m, dtype=np.float64)
        lphi0_arr = np.empty(m, dtype=np.float64)
        x2 = x2_arr
        lphi0 = lphi0_arr
        with nogil:
            _prep(x, sigma2, x2, lphi0)
            fit_ok = _mle_fit_fast(
                x2, lphi0, sigma2, fit_tol, fit_max_iter, &p_used, &tau2_used
            )

    cdef double sigma = sqrt(sigma2)
    cdef long V = 0
    cdef double sum_length = 0.0
    cdef Py_ssize_t j, i
    cdef double z, half, level, v, b, sb, c2, lr, mm, w0, g, center, th
    cdef bint covered

    with nogil:
        if proc == _PROC_BY:
            z = _qnorm(1.0 - R * q / (2.0 * m))
            half = sigma * z
            for j in range(R):
                i = sel[j]
                if fabs(x[i] - theta[i]) > half:
                    V += 1
            sum_length = 2.0 * half * R
        else:
            if proc == _PROC_QH:
                if qh_denom_all:
                    level = 1.0 - q / m
                else:
                    level = 1.0 - q / R
            else:
                level = 1.0 - q
            v = sigma2 + tau2_used
            b = tau2_used / v
            sb = sqrt(b * sigma2)
            c2 = 0.5 * (1.0 / sigma2 - 1.0 / v)
            if 0.0 < p_used < 1.0:
                lr = log(p_used / (1.0 - p_used)) - 0.5 * log(v / sigma2)
            else:
                lr = 0.0
            for j in range(R):
                i = sel[j]
                th = theta[i]
                if p_used <= 0.0:
                    w0 = 1.0
                elif p_used >= 1.0:
                    w0 = 0.0
                else:
                    mm = lr + x[i] * x[i] * c2
                    if mm > 709.0:
                        mm = 709.0
                    w0 = 1.0 / (1.0 + exp(mm))
                if w0 >= level:
                    # Region is the bare singleton {0}.
                    if th != 0.0:
                        V += 1
                else:
                    g = (level - w0) / (1.0 - w0)
                    z = _qnorm(0.5 * (1.0 + g))
                    half = z * sb
                    center = b * x[i]
                    if th == 0.0:
                        covered = (w0 > 0.0) or (fabs(center) <= half)
                    else:
                        covered = fabs(th - center) <= half
                    if not covered:
                        V += 1
                    sum_length += 2.0 * half
    return V, sum_length, bool(fit_ok), p_used, tau2_used
