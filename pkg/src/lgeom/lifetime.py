"""Reliability functionals: residual life, inactivity time, income-type curves,
Gini index and mean deviations.

Each functional is evaluated through an incomplete-gamma series and can
be cross-checked against quadrature of its defining integral.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import comb

from .core import LGParams, cdf, hazard, pdf, quantile, survival
from .errors import DomainError, TailError
from .moments import mean
from .series import (
    DEFAULT_CONTROL,
    MomentResult,
    SeriesControl,
    complement_or_quadrature,
    power_kernel_mp,
    survival_kernel_mp,
    outer_sum,
    power_kernel,
    quad,
    series_route,
    survival_power_kernel,
)

__all__ = [
    "CurvePoint",
    "truncated_moment",
    "partial_mean",
    "residual_moment",
    "mean_residual_life",
    "reversed_residual_moment",
    "mean_reversed_residual_life",
    "bonferroni_curve",
    "lorenz_curve",
    "scaled_ttt",
    "gini_index",
    "mean_deviation_about_mean",
    "mean_deviation_about_median",
    "curve_grid",
    "CURVES",
]

# smallest conditioning probability we are willing to divide by
_TAIL_FLOOR = 1e-280


@dataclass(frozen=True)
class CurvePoint:
    u: float
    value: float


def _breaks(params: LGParams):
    return (1.0 / params.theta, 10.0 / params.theta, 50.0 / params.theta)


def _log_lin(js):
    return np.log(np.asarray(js, dtype=float) + 1.0)


def truncated_moment(
    params: LGParams,
    s: int,
    lower: float = 0.0,
    upper: float = np.inf,
    ctl: SeriesControl = DEFAULT_CONTROL,
) -> MomentResult:
    """``int y^s f(y) dy`` over ``[0, upper]`` or ``[lower, inf)``.

    Series: ``K sum_j (j+1) p^j sum_k C(j,k) a^k [G(s+k+1)/lam^(s+k+1) +
    G(s+k+2)/lam^(s+k+2)]`` with ``lam = theta(j+1)`` and ``G`` the lower
    incomplete gamma at ``lam*upper`` or the upper one at ``lam*lower``.
    """
    if lower > 0.0 and np.isfinite(upper):
        raise ValueError("only one finite limit is supported")
    th = params.theta
    if series_route(params.p, ctl) == "complement":
        return complement_or_quadrature(
            params.p, 2, lambda l: power_kernel_mp(s, l, th, lower, upper), ctl,
            th * th / ((th + 1.0) * (1.0 - params.p)),
            lambda: quad(lambda y: y**s * pdf(params, y), lower, upper, breaks=_breaks(params)),
        )
    res = outer_sum(
        params.p,
        lambda js: power_kernel(s, js, th, lower, upper),
        _log_lin,
        ctl,
    )
    k = th * th * (1.0 - params.p) / (th + 1.0)
    return MomentResult(k * res.value, res.terms_used, k * res.truncation_estimate, res.fallback)


def partial_mean(params: LGParams, b: float, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """``I(b) = int_0^b y f(y) dy``."""
    b = float(b)
    if not b > 0:
        raise DomainError("b must be > 0")
    return truncated_moment(params, 1, upper=b, ctl=ctl).value


def residual_moment(params: LGParams, t: float, r: int = 1, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """``mu_r(t) = E[(Y - t)^r | Y > t]``.

    Expands ``(y - t)^r`` binomially into upper-incomplete-gamma series.

    Raises
    ------
    TailError
        If ``S(t)`` has underflowed.
    """
    t, r = float(t), int(r)
    if not t > 0:
        raise DomainError("t must be > 0")
    if r < 1:
        raise DomainError("r must be >= 1")
    s_t = survival(params, t)
    if s_t <= _TAIL_FLOOR:
        raise TailError(f"S({t}) = {s_t} underflows; residual moment undefined numerically")
    total = 0.0
    for i in range(r + 1):
        part = truncated_moment(params, r - i, lower=t, ctl=ctl).value
        total += comb(r, i, exact=True) * (-t) ** i * part
    return max(total / s_t, 0.0)


def mean_residual_life(params: LGParams, t: float, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """Mean residual life ``E[Y - t | Y > t]``; equals the mean at ``t = 0``."""
    t = float(t)
    if t < 0:
        raise DomainError("t must be >= 0")
    if t == 0.0:
        return mean(params, ctl).value
    return residual_moment(params, t, 1, ctl)


def reversed_residual_moment(params: LGParams, t: float, r: int = 1, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """``m_r(t) = E[(t - Y)^r | Y <= t]``, normalized by ``F(t)``.

    Raises
    ------
    TailError
        If ``F(t)`` is numerically zero.
    """
    t, r = float(t), int(r)
    if not t > 0:
        raise DomainError("t must be > 0")
    if r < 1:
        raise DomainError("r must be >= 1")
    f_t = cdf(params, t)
    if f_t <= _TAIL_FLOOR:
        raise TailError(f"F({t}) = {f_t} is numerically zero")
    total = 0.0
    for i in range(r + 1):
        part = truncated_moment(params, r - i, upper=t, ctl=ctl).value
        total += comb(r, i, exact=True) * t**i * (-1.0) ** (r - i) * part
    return min(max(total / f_t, 0.0), t**r)


def mean_reversed_residual_life(params: LGParams, t: float, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    return reversed_residual_moment(params, t, 1, ctl)


def bonferroni_curve(params: LGParams, y: float, ctl: SeriesControl = DEFAULT_CONTROL) -> CurvePoint:
    """``(F(y), I(y) / (mu F(y)))``."""
    y = float(y)
    if not y > 0:
        raise DomainError("y must be > 0")
    u = cdf(params, y)
    if u <= _TAIL_FLOOR:
        raise TailError(f"F({y}) is numerically zero")
    mu = mean(params, ctl).value
    return CurvePoint(u, partial_mean(params, y, ctl) / (mu * u))


def lorenz_curve(params: LGParams, y: float, ctl: SeriesControl = DEFAULT_CONTROL) -> CurvePoint:
    """``(F(y), I(y) / mu)``, i.e. Bonferroni times ``F(y)``."""
    b = bonferroni_curve(params, y, ctl)
    return CurvePoint(b.u, b.value * b.u)


def _ttt_area(params: LGParams, t: float, ctl: SeriesControl) -> float:
    if series_route(params.p, ctl) == "complement":
        # S = c sum_j q^j (1-c)^j
        return complement_or_quadrature(
            params.p, 1, lambda l: survival_kernel_mp(l, params.theta, t), ctl, 1.0,
            lambda: quad(lambda x: survival(params, x), 0.0, t, breaks=_breaks(params)),
        ).value
    res = outer_sum(
        params.p,
        lambda js: survival_power_kernel(js, params.theta, t),
        lambda js: np.zeros(len(js)),
        ctl,
    )
    return (1.0 - params.p) * res.value


def scaled_ttt(params: LGParams, t: float, ctl: SeriesControl = DEFAULT_CONTROL) -> CurvePoint:
    """Scaled total time on test ``(F(t), (1/mu) int_0^t S(u) du)``.

    Uses ``S = (1-p) sum_j p^j c^(j+1)`` so that
    ``int_0^t S = (1-p) sum_j p^j sum_{k<=j+1} C(j+1,k) a^k gamma(k+1; lam t)/lam^(k+1)``.
    """
    t = float(t)
    if not t > 0:
        raise DomainError("t must be > 0")
    mu = mean(params, ctl).value
    return CurvePoint(cdf(params, t), min(_ttt_area(params, t, ctl) / mu, 1.0))


def gini_index(params: LGParams, ctl: SeriesControl = DEFAULT_CONTROL, epsrel: float = 1e-9) -> float:
    """Gini index ``G = 1 - C_F`` with ``C_F = int_0^inf S_F[F(t)] f(t) dt``.

    ``C_F`` is integrated by adaptive quadrature with the series
    total-time-on-test transform inside; the mean is evaluated once per call.
    For ``p <= -1`` the inner transform is integrated directly, since the
    extended-precision series is too costly inside a quadrature loop.
    """
    mu = mean(params, ctl).value
    if series_route(params.p, ctl) == "complement":
        def area(t):
            return quad(lambda x: survival(params, x), 0.0, t, breaks=_breaks(params))
    else:
        def area(t):
            return _ttt_area(params, t, ctl)

    def integrand(t):
        if t <= 0:
            return 0.0
        return min(area(t) / mu, 1.0) * pdf(params, t)

    return 1.0 - quad(integrand, breaks=_breaks(params), epsrel=epsrel)


def mean_deviation_about_mean(params: LGParams, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """``delta_1 = 2 mu F(mu) - 2 I(mu)``."""
    mu = mean(params, ctl).value
    return max(2.0 * mu * cdf(params, mu) - 2.0 * partial_mean(params, mu, ctl), 0.0)


def mean_deviation_about_median(params: LGParams, ctl: SeriesControl = DEFAULT_CONTROL) -> float:
    """``delta_2 = mu - 2 I(M)`` with ``M`` the median."""
    mu = mean(params, ctl).value
    med = quantile(params, 0.5)
    return max(mu - 2.0 * partial_mean(params, med, ctl), 0.0)


CURVES = ("lorenz", "bonferroni", "ttt", "hazard", "mrl")


def curve_grid(params: LGParams, curve: str, points: int = 200, ctl: SeriesControl = DEFAULT_CONTROL):
    """Evaluate a curve on ``points`` abscissae at probability levels ``i/(points+1)``.

    Returns a list of ``(y, u, value)`` triples where ``u = F(y)``.
    """
    if curve not in CURVES:
        raise DomainError(f"unknown curve {curve!r}; choose from {CURVES}")
    points = int(points)
    if points < 1:
        raise DomainError("points must be >= 1")
    levels = np.arange(1, points + 1) / (points + 1.0)
    ys = np.atleast_1d(quantile(params, levels))
    rows = []
    for y in ys:
        y = float(y)
        if curve == "lorenz":
            pt = lorenz_curve(params, y, ctl)
        elif curve == "bonferroni":
            pt = bonferroni_curve(params, y, ctl)
        elif curve == "ttt":
            pt = scaled_ttt(params, y, ctl)
        elif curve == "hazard":
            pt = CurvePoint(cdf(params, y), hazard(params, y))
        else:
            pt = CurvePoint(cdf(params, y), mean_residual_life(params, y, ctl))
        rows.append((y, pt.u, pt.value))
    return rows
