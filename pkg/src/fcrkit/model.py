"""Normal-mixture model core: densities, posteriors, and Gaussian utilities.

The model has m parallel populations.  Each true mean theta_i is drawn from a
spike-and-slab prior

    theta_i = 0                  with probability 1 - p
    theta_i ~ Normal(0, tau2)    with probability p

and the observation is X_i | theta_i ~ Normal(theta_i, sigma2) with sigma2
known and equal across populations.  The posterior of theta_i given X_i = x is
again spike-and-slab:

    theta | x  ~  w0(x) * delta_0  +  (1 - w0(x)) * Normal(b*x, b*sigma2)

with shrinkage factor b = tau2 / (tau2 + sigma2) and

    w0(x) = (1-p) * phi(x; 0, sigma2) / [ (1-p) * phi(x; 0, sigma2)
                                          + p * phi(x; 0, sigma2 + tau2) ].

Everything here is computed in log space so that |x|/sigma up to ~40 (routine
in microarray-scale screens) cannot underflow w0 to NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "MixturePrior",
    "Posterior",
    "normal_pdf",
    "normal_log_pdf",
    "normal_cdf",
    "normal_quantile",
    "marginal_pdf",
    "marginal_log_pdf",
    "posterior_at",
    "posterior_region_mass",
]

_LOG_2PI = math.log(2.0 * math.pi)


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class MixturePrior:
    """Hyperparameters of the spike-and-slab prior plus the known noise scale.

    Attributes
    ----------
    p : float
        Prior probability of the nonzero (slab) component, in [0, 1].
    tau2 : float
        Slab prior variance, >= 0.  tau2 = 0 degenerates the slab to a point
        mass at 0 (the fit may land on this boundary).
    sigma2 : float
        Known observation variance, > 0.
    """

    p: float
    tau2: float
    sigma2: float

    def __post_init__(self) -> None:
        p = _require_finite("p", self.p)
        tau2 = _require_finite("tau2", self.tau2)
        sigma2 = _require_finite("sigma2", self.sigma2)
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {p}")
        if tau2 < 0.0:
            raise ValueError(f"tau2 must be >= 0, got {tau2}")
        if sigma2 <= 0.0:
            raise ValueError(f"sigma2 must be > 0, got {sigma2}")

    @property
    def shrinkage(self) -> float:
        """Shrinkage factor b = tau2 / (tau2 + sigma2), in [0, 1)."""
        return self.tau2 / (self.tau2 + self.sigma2)

    @property
    def marginal_var(self) -> float:
        """Variance sigma2 + tau2 of X under the slab component."""
        return self.sigma2 + self.tau2


@dataclass(frozen=True)
class Posterior:
    """Posterior decomposition of one theta given its observation.

    The posterior law is w0 * delta_0 + (1 - w0) * Normal(center, spread2).
    spread2 = 0 means the slab part is a point mass at ``center``.
    """

    w0: float
    center: float
    spread2: float

    def __post_init__(self) -> None:
        w0 = _require_finite("w0", self.w0)
        _require_finite("center", self.center)
        spread2 = _require_finite("spread2", self.spread2)
        if not 0.0 <= w0 <= 1.0:
            raise ValueError(f"w0 must lie in [0, 1], got {w0}")
        if spread2 < 0.0:
            raise ValueError(f"spread2 must be >= 0, got {spread2}")

    @property
    def spread(self) -> float:
        return math.sqrt(self.spread2)

    def prob_nonzero(self) -> float:
        """Posterior probability that theta != 0 (exactly)."""
        if self.spread2 == 0.0 and self.center == 0.0:
            return 0.0
        return 1.0 - self.w0


def normal_pdf(x: float, mean: float, var: float) -> float:
    """Gaussian density (2*pi*var)^(-1/2) * exp(-(x-mean)^2 / (2*var)).

    Raises
    ------
    ValueError
        If any input is non-finite or var <= 0.
    """
    return math.exp(normal_log_pdf(x, mean, var))


def normal_log_pdf(x: float, mean: float, var: float) -> float:
    """Log of :func:`normal_pdf`, safe far out in the tails."""
    x = _require_finite("x", x)
    mean = _require_finite("mean", mean)
    var = _require_finite("var", var)
    if var <= 0.0:
        raise ValueError(f"var must be > 0, got {var}")
    d = x - mean
    return -0.5 * (_LOG_2PI + math.log(var)) - 0.5 * d * d / var


def normal_cdf(z: float) -> float:
    """Standard normal CDF Phi(z) via the complementary error function."""
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


# Acklam's rational approximation to the standard normal quantile.
# |error| < 1.15e-9 on (0, 1); one Newton step against the erfc-based CDF
# brings it to full double precision.
_ACKLAM_A = (
    -3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
    1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00,
)
_ACKLAM_B = (
    -5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
    6.680131188771972e01, -1.328068155288572e01,
)
_ACKLAM_C = (
    -7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
    -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00,
)
_ACKLAM_D = (
    7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
    3.754408661907416e00,
)
_ACKLAM_PLOW = 0.02425


def _acklam(u: float) -> float:
    a, b, c, d = _ACKLAM_A, _ACKLAM_B, _ACKLAM_C, _ACKLAM_D
    if u < _ACKLAM_PLOW:
        q = math.sqrt(-2.0 * math.log(u))
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    if u > 1.0 - _ACKLAM_PLOW:
        q = math.sqrt(-2.0 * math.log(1.0 - u))
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / (
            (((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0
        )
    q = u - 0.5
    r = q * q
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / (
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0)
    )


def normal_quantile(u: float) -> float:
    """Standard normal quantile z with Phi(z) = u, |error| <= 1e-10.

    Rational initial guess (Acklam) refined by one Newton step against the
    erfc-based CDF.

    Raises
    ------
    ValueError
        If u is not strictly inside (0, 1).
    """
    u = _require_finite("u", u)
    if not 0.0 < u < 1.0:
        raise ValueError(f"u must lie in (0, 1), got {u}")
    z = _acklam(u)
    # Newton: z <- z - (Phi(z) - u) / phi(z).  phi(z) never underflows for
    # the |z| <~ 9 reachable from double-precision u.
    err = normal_cdf(z) - u
    z -= err * math.sqrt(2.0 * math.pi) * math.exp(0.5 * z * z)
    return z


def marginal_log_pdf(x: float, prior: MixturePrior) -> float:
    """Log marginal density of X under the mixture prior.

    log[ (1-p) * phi(x; 0, sigma2) + p * phi(x; 0, sigma2 + tau2) ], evaluated
    with a stable two-term log-sum-exp.
    """
    x = _require_finite("x", x)
    if prior.p == 0.0:
        return normal_log_pdf(x, 0.0, prior.sigma2)
    if prior.p == 1.0:
        return normal_log_pdf(x, 0.0, prior.marginal_var)
    la = math.log1p(-prior.p) + normal_log_pdf(x, 0.0, prior.sigma2)
    lb = math.log(prior.p) + normal_log_pdf(x, 0.0, prior.marginal_var)
    hi, lo = (la, lb) if la >= lb else (lb, la)
    return hi + math.log1p(math.exp(lo - hi))


def marginal_pdf(x: float, prior: MixturePrior) -> float:
    """Marginal density (1-p)*phi(x; 0, sigma2) + p*phi(x; 0, sigma2+tau2)."""
    return math.exp(marginal_log_pdf(x, prior))


def posterior_at(x: float, prior: MixturePrior) -> Posterior:
    """Posterior decomposition of theta given X = x.

    w0 = (1-p) * phi(x; 0, sigma2) / marginal_pdf(x), computed in log space so
    it stays finite for |x| up to ~40 sigma; center = b*x and spread2 =
    b*sigma2 with b the shrinkage factor.
    """
    x = _require_finite("x", x)
    b = prior.shrinkage
    center = b * x
    spread2 = b * prior.sigma2
    if prior.p == 0.0:
        return Posterior(w0=1.0, center=center, spread2=spread2)
    if prior.p == 1.0:
        return Posterior(w0=0.0, center=center, spread2=spread2)
    log_spike = math.log1p(-prior.p) + normal_log_pdf(x, 0.0, prior.sigma2)
    log_w0 = log_spike - marginal_log_pdf(x, prior)
    return Posterior(w0=math.exp(min(log_w0, 0.0)), center=center, spread2=spread2)


def posterior_region_mass(region, post: Posterior) -> float:
    """Posterior probability of a region under a spike-and-slab posterior.

    Returns w0 * 1{0 in region} + (1 - w0) * sum over the region's intervals
    of the Normal(center, spread2) mass.  With spread2 = 0 the slab is treated
    as a point mass at ``center``.

    ``region`` is any object exposing ``contains(theta)`` and an ``intervals``
    sequence of (lower, upper) pairs (see
    :class:`fcrkit.regions.CredibleRegion`).
    """
    mass = post.w0 if region.contains(0.0) else 0.0
    slab_weight = 1.0 - post.w0
    if slab_weight == 0.0:
        return mass
    if post.spread2 == 0.0:
        if region.contains(post.center):
            mass += slab_weight
        return mass
    s = post.spread
    for lo, hi in region.intervals:
        mass += slab_weight * (
            normal_cdf((hi - post.center) / s) - normal_cdf((lo - post.center) / s)
        )
    return min(mass, 1.0)
