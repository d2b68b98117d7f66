"""Order statistics of an LG sample.

The beta-kernel form ``f_{r:n} = F^{r-1} (1-F)^{n-r} f / B(r, n-r+1)`` is
the evaluation path.  The series forms below expand it in powers of
``p c`` and exist as an independent cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, comb

from .core import LGParams, cdf, pdf, survival
from .errors import DomainError, ParameterError
from .series import DEFAULT_CONTROL, MomentResult, SeriesControl, log_binom, outer_sum, power_kernel, quad

__all__ = [
    "OrderStatSpec",
    "orderstat_pdf",
    "orderstat_moment",
    "orderstat_pdf_series",
    "orderstat_moment_series",
]


@dataclass(frozen=True)
class OrderStatSpec:
    """Rank ``r`` within a sample of size ``n``, ``1 <= r <= n``."""

    r: int
    n: int

    def __post_init__(self):
        if not (isinstance(self.r, (int, np.integer)) and isinstance(self.n, (int, np.integer))):
            raise DomainError("rank and sample size must be integers")
        if not 1 <= self.r <= self.n:
            raise DomainError(f"need 1 <= r <= n, got r={self.r}, n={self.n}")


def _breaks(params: LGParams):
    return (1.0 / params.theta, 10.0 / params.theta, 50.0 / params.theta)


def orderstat_pdf(params: LGParams, spec: OrderStatSpec, y):
    """Density of the ``r``-th smallest of ``n`` i.i.d. LG variables."""
    r, n = spec.r, spec.n
    if r == n == 1:
        return pdf(params, y)
    f = np.asarray(pdf(params, y))
    big_f = np.asarray(cdf(params, y))
    s = np.asarray(survival(params, y))
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.exp(-betaln(r, n - r + 1)) * big_f ** (r - 1) * s ** (n - r) * f
    return float(out) if np.ndim(y) == 0 else out


def orderstat_moment(
    params: LGParams, spec: OrderStatSpec, k: int, ctl: SeriesControl = DEFAULT_CONTROL
) -> MomentResult:
    """``E[Y_{r:n}^k]`` by adaptive quadrature of the beta-kernel density."""
    k = int(k)
    if k < 1:
        raise DomainError("k must be >= 1")
    val = quad(lambda y: y**k * orderstat_pdf(params, spec, y), breaks=_breaks(params))
    return MomentResult(val, 0, 0.0, fallback=True)


def _series_terms(params: LGParams, spec: OrderStatSpec):
    # F^{r-1} S^{n-r} f = K (1+y) e^{-theta y}
    #   * sum_i (-1)^i C(r-1,i) (1-p)^{q_i} sum_l C(q_i+1+l, l) p^l c^{q_i+l},  q_i = n-r+i
    if abs(params.p) >= 1.0:
        raise ParameterError("order statistic series needs |p| < 1")
    r, n = spec.r, spec.n
    th, p = params.theta, params.p
    k_pref = th * th * (1.0 - p) / (th + 1.0) * np.exp(-betaln(r, n - r + 1))
    for i in range(r):
        q = n - r + i
        coef = (-1.0) ** i * comb(r - 1, i, exact=True) * (1.0 - p) ** q
        yield q, k_pref * coef


def orderstat_moment_series(
    params: LGParams, spec: OrderStatSpec, k: int, ctl: SeriesControl = DEFAULT_CONTROL
) -> MomentResult:
    """``E[Y_{r:n}^k]`` from the finite-by-infinite expansion.

    ``sum_i (-1)^i C(r-1,i)(1-p)^{q_i} sum_l C(q_i+1+l,l) p^l sum_m C(q_i+l,m) a^m
    [Gamma(k+m+1)/lam^(k+m+1) + Gamma(k+m+2)/lam^(k+m+2)]`` with
    ``lam = theta (q_i + l + 1)``, times ``K / B(r, n-r+1)``.
    """
    total, terms, tail = 0.0, 0, 0.0
    for q, coef in _series_terms(params, spec):
        res = outer_sum(
            params.p,
            lambda ls, q=q: power_kernel(k, np.asarray(ls) + q, params.theta),
            lambda ls, q=q: log_binom(np.asarray(ls, dtype=float) + q + 1.0, np.asarray(ls, dtype=float)),
            ctl,
        )
        total += coef * res.value
        terms = max(terms, res.terms_used)
        tail += abs(coef) * res.truncation_estimate
    return MomentResult(total, terms, tail)


def orderstat_pdf_series(params: LGParams, spec: OrderStatSpec, y: float, max_terms: int = 5000, rel_tol: float = 1e-15) -> float:
    """Order statistic density from the quadruple sum over ``i, l, m``.

    ``(1+a y)^{q+l}`` is expanded binomially in ``m``, matching the term
    structure of :func:`orderstat_moment_series`.
    """
    y = float(y)
    if y < 0:
        raise DomainError("y must be >= 0")
    th, p = params.theta, params.p
    a = th / (th + 1.0)
    base = (1.0 + y) * np.exp(-th * y)
    total = 0.0
    for q, coef in _series_terms(params, spec):
        inner_total = 0.0
        for l in range(max_terms):
            big = q + l
            m = np.arange(big + 1)
            powers = np.exp(log_binom(big, m) + m * np.log(a * y)) if y > 0 else (m == 0).astype(float)
            term = np.exp(log_binom(q + 1 + l, l)) * p**l
            term *= powers.sum() * np.exp(-big * th * y)
            inner_total += term
            if l > 10 and abs(term) <= rel_tol * abs(inner_total):
                break
        total += coef * base * inner_total
    return total

