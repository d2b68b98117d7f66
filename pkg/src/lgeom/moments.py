"""Raw moments, mean, moment generating function and probability weighted moments."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln

from .core import LGParams, cdf, pdf
from .errors import DomainError
from .series import (
    DEFAULT_CONTROL,
    MomentResult,
    SeriesControl,
    complement_or_quadrature,
    power_kernel_mp,
    log_binom,
    outer_sum,
    power_kernel,
    quad,
    series_route,
)

__all__ = [
    "raw_moment",
    "mean",
    "variance",
    "mgf_eval",
    "pwm",
    "lindley_raw_moment",
    "quadrature_moment",
]


def _prefactor(params: LGParams) -> float:
    th = params.theta
    return th * th * (1.0 - params.p) / (th + 1.0)


def _log_linear_weight(js):
    return np.log(np.asarray(js, dtype=float) + 1.0)


def lindley_raw_moment(theta: float, r: int) -> float:
    """Closed-form Lindley moment ``r! (theta + r + 1) / (theta^r (theta + 1))``."""
    return math.factorial(r) * (theta + r + 1.0) / (theta**r * (theta + 1.0))


def _breaks(params: LGParams):
    return (1.0 / params.theta, 10.0 / params.theta, 50.0 / params.theta)


def quadrature_moment(params: LGParams, r: int) -> float:
    """``E[Y^r]`` by adaptive quadrature of ``y^r f(y)``."""
    return quad(lambda y: y**r * pdf(params, y), breaks=_breaks(params))


def raw_moment(params: LGParams, r: int, ctl: SeriesControl = DEFAULT_CONTROL) -> MomentResult:
    """``E[Y^r]`` from the double series in ``j`` (geometric) and ``i`` (binomial).

    ``E[Y^r] = K sum_j (j+1) p^j sum_{i<=j} C(j,i) a^i Gamma(r+i+1)/lam^(r+i+1)
    (1 + (r+i+1)/lam)`` with ``K = theta^2 (1-p)/(theta+1)`` and
    ``lam = theta (j+1)``.  ``p == 0`` uses the closed Lindley form.  For
    ``p <= -1`` the expansion in ``q = -p/(1-p)`` is used instead:
    ``E[Y^r] = theta^2/((theta+1)(1-p)) sum_j (j+1) q^j
    sum_l (-1)^l C(j,l) R(r, l)`` with ``R`` the same kernel.
    """
    r = int(r)
    if r < 1:
        raise DomainError("moment order r must be >= 1")
    if params.p == 0.0:
        return MomentResult(lindley_raw_moment(params.theta, r), 1, 0.0)
    th = params.theta
    if series_route(params.p, ctl) == "complement":
        return complement_or_quadrature(
            params.p, 2, lambda l: power_kernel_mp(r, l, th), ctl,
            th * th / ((th + 1.0) * (1.0 - params.p)), lambda: quadrature_moment(params, r),
        )
    res = outer_sum(
        params.p,
        lambda js: power_kernel(r, js, th),
        _log_linear_weight,
        ctl,
    )
    k = _prefactor(params)
    return MomentResult(k * res.value, res.terms_used, k * res.truncation_estimate)


def _mean_inner(theta: float):
    a = theta / (theta + 1.0)

    def inner(js):
        j = np.asarray(js, dtype=float)[:, None]
        i = np.arange(int(j.max()) + 1, dtype=float)[None, :]
        valid = i <= j
        ii = np.where(valid, i, 0.0)
        lam = theta * (j + 1.0)
        # (j+1)!/(j-i)! a^i (i+1) / lam^(i+2) * (1 + (i+2)/lam)
        logt = gammaln(j + 2.0) - gammaln(j - ii + 1.0) + ii * np.log(a) + np.log(ii + 1.0) - (ii + 2.0) * np.log(lam)
        t = np.exp(logt) * (1.0 + (ii + 2.0) / lam)
        return np.where(valid, t, 0.0).sum(axis=1)

    return inner


def mean(params: LGParams, ctl: SeriesControl = DEFAULT_CONTROL) -> MomentResult:
    """Mean via the falling-factorial form of the ``r = 1`` series.

    Algebraically identical to ``raw_moment(params, 1)`` but summed with
    ``(j+1)!/(j-i)!`` factors instead of a binomial coefficient.
    """
    if params.p == 0.0:
        return MomentResult(lindley_raw_moment(params.theta, 1), 1, 0.0)
    if series_route(params.p, ctl) == "complement":
        return raw_moment(params, 1, ctl)
    res = outer_sum(params.p, _mean_inner(params.theta), lambda js: np.zeros(len(js)), ctl)
    k = _prefactor(params)
    return MomentResult(k * res.value, res.terms_used, k * res.truncation_estimate)


def variance(params: LGParams, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    m1 = raw_moment(params, 1, ctl).value
    m2 = raw_moment(params, 2, ctl).value
    return m2 - m1 * m1


def mgf_eval(params: LGParams, t: float, k_max: int = 40, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Moment generating function as ``sum_{k=0}^{k_max} t^k/k! E[Y^k]``.

    The power series in ``t`` has radius ``theta`` (the exponential tail),
    so ``|t| < theta`` is required.  ``t = 0`` returns exactly 1.
    """
    t = float(t)
    if t >= params.theta:
        raise DomainError(f"MGF does not exist for t >= theta ({params.theta})")
    if t <= -params.theta:
        raise DomainError(f"power series in t diverges for t <= -theta ({-params.theta})")
    if t == 0.0:
        return 1.0
    total = 1.0
    log_abs_t = math.log(abs(t))
    for k in range(1, int(k_max) + 1):
        mk = raw_moment(params, k, ctl).value
        sign = -1.0 if (t < 0 and k % 2) else 1.0
        total += sign * math.exp(k * log_abs_t - math.lgamma(k + 1)) * mk
    return total


def pwm(params: LGParams, s: int, r: int, ctl: SeriesControl = DEFAULT_CONTROL) -> MomentResult:
    """Probability weighted moment ``tau_{s,r} = E[Y^s F(Y)^r]``.

    Expanding ``F^r f = K (1+y) e^{-theta y} (1-c)^r (1 - p c)^{-(r+2)}``
    gives ``tau = K sum_k C(r+1+k, k) p^k sum_{l<=r} (-1)^l C(r,l) R(s, k+l)``
    where ``R(s, m)`` is :func:`~lgeom.series.power_kernel` over
    ``[0, inf)``.  Every exponent is ``theta (k + l + 1) > 0``, so no
    index combination is singular.  For ``r = 0`` this is exactly the raw
    moment series.
    """
    s, r = int(s), int(r)
    if s < 1 or r < 0:
        raise DomainError("pwm needs s >= 1 and r >= 0")
    if r == 0:
        return raw_moment(params, s, ctl)
    th = params.theta
    if series_route(params.p, ctl) == "complement":
        # F^r f = theta^2/((theta+1)(1-p)^(r+1)) (1+y) e^{-theta y} (1-c)^r sum_j C(r+1+j, j) q^j (1-c)^j
        return complement_or_quadrature(
            params.p, r + 2, lambda l: power_kernel_mp(s, l, th), ctl,
            th * th / ((th + 1.0) * (1.0 - params.p) ** (r + 1)),
            lambda: quad(lambda y: y**s * cdf(params, y) ** r * pdf(params, y), breaks=_breaks(params)),
            n0=r,
        )

    ls = np.arange(r + 1)
    signs = np.where(ls % 2 == 1, -1.0, 1.0) * np.exp(log_binom(r, ls))

    def inner(ks):
        ks = np.asarray(ks)
        m = (ks[:, None] + ls[None, :]).ravel()
        vals = power_kernel(s, m, params.theta).reshape(len(ks), r + 1)
        return vals @ signs

    def log_weight(ks):
        return log_binom(np.asarray(ks, dtype=float) + r + 1.0, np.asarray(ks, dtype=float))

    res = outer_sum(params.p, inner, log_weight, ctl)
    k = _prefactor(params)
    return MomentResult(k * res.value, res.terms_used, k * res.truncation_estimate)
