"""Truncation control and shared kernels for the LG series expansions.

For ``|p| < 1`` the series come from expanding ``(1 - p c)^{-k}`` in
powers of ``p c`` where ``c = (1 + a y) e^{-theta y}``, ``a = theta/(theta+1)``.
That expansion diverges for ``p <= -1``.  There the identity
``1 - p c = (1 - p)(1 - q (1 - c))`` with ``q = -p/(1-p) in (0, 1)`` gives a
convergent expansion in powers of ``q (1 - c)`` (the series form of the
maximum-of-geometric representation).  Its inner sums alternate and are
evaluated in extended precision; when the term count gets too large the
callers fall back to quadrature of the defining integral.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy import integrate
from scipy.special import gammaln

from . import special
from .errors import ConvergenceError, DomainError, ParameterError

__all__ = [
    "SeriesControl",
    "MomentResult",
    "SeriesWarning",
    "DEFAULT_CONTROL",
    "outer_sum",
    "complement_sum",
    "series_route",
    "complement_or_quadrature",
    "scaled",
    "power_kernel",
    "survival_power_kernel",
    "power_kernel_mp",
    "survival_kernel_mp",
    "log_binom",
    "quad",
]


class SeriesWarning(UserWarning):
    """``|p|`` is close to 1, so the geometric series converges slowly."""


@dataclass(frozen=True)
class SeriesControl:
    """Truncation policy for every infinite series in the package.

    Attributes
    ----------
    rel_tol : float
        Stop once a term is below ``rel_tol * |partial sum|``.
    max_terms : int
        Hard cap on the outer index; exceeding it raises ConvergenceError.
    warn_threshold : float
        Emit :class:`SeriesWarning` when ``|p|`` exceeds this.
    allow_fallback : bool
        Use direct quadrature where the series cannot converge (``p <= -1``).
    """

    rel_tol: float = 1e-14
    max_terms: int = 20000
    warn_threshold: float = 0.99
    allow_fallback: bool = True

    def __post_init__(self):
        if not 0.0 < self.rel_tol <= 1e-3:
            raise DomainError("rel_tol must lie in (0, 1e-3]")
        if int(self.max_terms) < 100:
            raise DomainError("max_terms must be >= 100")
        if not 0.0 < self.warn_threshold < 1.0:
            raise DomainError("warn_threshold must lie in (0, 1)")


DEFAULT_CONTROL = SeriesControl()


@dataclass(frozen=True)
class MomentResult:
    value: float
    terms_used: int
    truncation_estimate: float
    fallback: bool = False
    route: str = "power"

    def __float__(self) -> float:
        return float(self.value)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "terms_used": self.terms_used,
            "truncation_estimate": self.truncation_estimate,
            "quadrature_fallback": self.fallback,
            "route": self.route,
        }


def log_binom(n, k):
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


def quad(func, a=0.0, b=np.inf, breaks=(), epsrel=1e-12):
    """Adaptive quadrature of ``func`` on ``[a, b]`` split at ``breaks``.

    Raises ConvergenceError when scipy reports a failed integration with a
    non-negligible error estimate.
    """
    edges = [a] + sorted(x for x in breaks if a < x < b) + [b]
    total = 0.0
    err_total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(func, lo, hi, epsabs=0.0, epsrel=epsrel, limit=500)
        total += val
        err_total += err
    if not np.isfinite(total) or err_total > max(1e-6 * abs(total), 1e-13):
        raise ConvergenceError(f"quadrature failed: value={total}, error estimate={err_total}")
    return total


def series_route(p: float, ctl: SeriesControl) -> str:
    """``"power"`` for ``|p| < 1`` and ``"complement"`` for ``p <= -1``."""
    if abs(p) < 1.0:
        if abs(p) > ctl.warn_threshold:
            warnings.warn(f"|p| = {abs(p)} is close to 1; series converge slowly", SeriesWarning, stacklevel=3)
        return "power"
    return "complement"


def scaled(res: MomentResult, factor: float) -> MomentResult:
    return MomentResult(factor * res.value, res.terms_used, abs(factor) * res.truncation_estimate, res.fallback, res.route)


# largest inner index the complement route will evaluate before deferring to quadrature
COMPLEMENT_MAX_INDEX = 1500


def _complement_cap(q: float, k: int, rel_tol: float) -> int:
    # first j whose weighted tail is below rel_tol * A(0); A(0) <= total since A >= 0
    log_q = np.log(q)
    js = np.arange(0, 20 * COMPLEMENT_MAX_INDEX)
    logs = log_binom(js + k - 1.0, js) + js * log_q
    below = np.nonzero((logs < np.log(rel_tol) - 3.0) & (js > 10))[0]
    return int(js[below[0]]) if below.size else int(js[-1])


def complement_sum(p: float, k: int, kernel_mp, ctl: SeriesControl, n0: int = 0) -> MomentResult | None:
    """``sum_j C(k-1+j, j) q^j A(j + n0)`` with ``q = -p/(1-p)`` and
    ``A(n) = sum_{l<=n} (-1)^l C(n, l) kernel(l)``.

    ``kernel_mp(l)`` returns the integral of ``g c^l`` for some ``g >= 0`` as
    an mpmath number, so ``A(n)`` is the integral of ``g (1-c)^n``:
    nonnegative and nonincreasing in ``n``, which bounds the tail by
    ``A(j)`` times the remaining weights.  The alternating sums lose about
    ``n log10(2)`` digits, so kernels and sums run at a working precision
    fixed from the largest index needed.  Returns None when that index
    exceeds ``COMPLEMENT_MAX_INDEX``.
    """
    if not p < 0.0:
        raise ParameterError("complement expansion needs p < 0")
    q = -p / (1.0 - p)
    log_q = np.log(q)

    def log_weight(js):
        js = np.asarray(js, dtype=float)
        return log_binom(js + k - 1.0, js)

    cap = min(_complement_cap(q, k, ctl.rel_tol), int(ctl.max_terms))
    if cap + n0 > COMPLEMENT_MAX_INDEX:
        return None
    dps = 25 + int(math.ceil((cap + n0) * math.log10(2.0)))
    with mpmath.workdps(dps):
        cache: list = []
        total = 0.0
        for j in range(cap + 1):
            n = j + n0
            while len(cache) <= n:
                cache.append(mpmath.mpf(kernel_mp(len(cache))))
            acc = mpmath.mpf(0)
            binom = mpmath.mpf(1)
            for l in range(n + 1):
                acc += binom * cache[l] if l % 2 == 0 else -binom * cache[l]
                binom = binom * (n - l) / (l + 1)
            a = max(float(acc), 0.0)
            total += float(np.exp(log_weight(j) + j * log_q)) * a
            if j >= 10:
                tail = _tail_weight(j, log_q, log_weight) * a
                if tail <= ctl.rel_tol * abs(total):
                    return MomentResult(float(total), j + 1, float(tail), route="complement")
    return MomentResult(float(total), cap + 1, float(_tail_weight(cap, log_q, log_weight) * a), route="complement")


def complement_or_quadrature(
    p: float, k: int, kernel_mp, ctl: SeriesControl, factor: float, quad_fn, n0: int = 0
) -> MomentResult:
    """``factor * complement_sum(...)``, or ``quad_fn()`` flagged as a fallback
    when the complement series would need too many terms."""
    res = complement_sum(p, k, kernel_mp, ctl, n0)
    if res is not None:
        return scaled(res, factor)
    if not ctl.allow_fallback:
        raise ParameterError(f"complement series at p={p} needs too many terms and fallback is disabled")
    return MomentResult(float(quad_fn()), 0, 0.0, fallback=True, route="quadrature")


def _int_gamma_mp(n_max: int, lam, lower: float, upper: float) -> list:
    """``G(n) / lam^n`` for ``n = 1..n_max`` with ``G`` the complete, lower or
    upper incomplete gamma over ``[lam*lower, lam*upper]``.

    Integer orders use ``Gamma(n, x) = (n-1)! e^{-x} e_{n-1}(x)`` with
    ``e_k`` the truncated exponential series, so each order costs O(1).
    """
    out = []
    fact = mpmath.mpf(1)
    if lower == 0.0 and upper == np.inf:
        for n in range(1, n_max + 1):
            out.append(fact / lam**n)
            fact *= n
        return out
    x = lam * mpmath.mpf(upper if lower == 0.0 else lower)
    ex = mpmath.exp(-x)
    partial, term = mpmath.mpf(0), mpmath.mpf(1)
    for n in range(1, n_max + 1):
        partial += term
        upper_g = fact * ex * partial
        g = upper_g if lower > 0.0 else fact - upper_g
        out.append(g / lam**n)
        term = term * x / n
        fact *= n
    return out


def power_kernel_mp(s: int, m: int, theta: float, lower: float = 0.0, upper: float = np.inf):
    """Extended-precision :func:`power_kernel` for a single integer ``m``."""
    th = mpmath.mpf(theta)
    a = th / (th + 1)
    g = _int_gamma_mp(s + m + 2, th * (m + 1), lower, upper)
    total = mpmath.mpf(0)
    coef = mpmath.mpf(1)
    for i in range(m + 1):
        total += coef * (g[s + i] + g[s + i + 1])
        coef = coef * a * (m - i) / (i + 1)
    return total


def survival_kernel_mp(m: int, theta: float, upper: float):
    """Extended-precision :func:`survival_power_kernel` for a single integer ``m``."""
    th = mpmath.mpf(theta)
    a = th / (th + 1)
    g = _int_gamma_mp(m + 2, th * (m + 1), 0.0, upper)
    total = mpmath.mpf(0)
    coef = mpmath.mpf(1)
    for i in range(m + 2):
        total += coef * g[i]
        coef = coef * a * (m + 1 - i) / (i + 1)
    return total


def outer_sum(p: float, inner, log_weight, ctl: SeriesControl, block: int = 64) -> MomentResult:
    """Sum ``sum_j w(j) p^j inner(j)`` over ``j = 0, 1, ...``.

    ``inner`` maps an integer array of indices to inner sums that are
    nonincreasing in ``j`` in absolute value (they are integrals of powers
    of ``c <= 1``), and ``log_weight`` maps indices to ``log w(j)``.  The
    truncation estimate bounds the discarded tail by
    ``max|inner| * sum_{j > J} w(j) |p|^j``.
    """
    if p == 0.0:
        val = float(np.exp(log_weight(np.array([0]))[0]) * inner(np.array([0]))[0])
        return MomentResult(val, 1, 0.0)

    log_abs_p = np.log(abs(p))
    total = 0.0
    comp = 0.0  # Kahan compensation
    max_inner = 0.0
    j0 = 0
    while j0 < ctl.max_terms:
        js = np.arange(j0, min(j0 + block, ctl.max_terms))
        inn = np.asarray(inner(js), dtype=float)
        max_inner = max(max_inner, float(np.max(np.abs(inn))))
        sign = np.where((js % 2 == 1) & (p < 0), -1.0, 1.0)
        terms = sign * np.exp(log_weight(js) + js * log_abs_p) * inn
        done_at = None
        for idx, term in enumerate(terms):
            y = term - comp
            t = total + y
            comp = (t - total) - y
            total = t
            j = int(js[idx])
            if j >= 10 and abs(term) <= ctl.rel_tol * abs(total):
                # also require the geometric majorant of the tail to be small
                tail = _tail_weight(j, log_abs_p, log_weight) * max_inner
                if tail <= ctl.rel_tol * abs(total) or tail == 0.0:
                    done_at = j
                    break
        if done_at is not None:
            tail = _tail_weight(done_at, log_abs_p, log_weight) * max_inner
            return MomentResult(float(total), done_at + 1, float(tail))
        j0 += block
    raise ConvergenceError(f"series did not reach rel_tol={ctl.rel_tol} within {ctl.max_terms} terms (p={p})")


def _tail_weight(j: int, log_abs_p: float, log_weight) -> float:
    # sum_{k > j} w(k)|p|^k, summed numerically until terms are negligible
    total = 0.0
    start = j + 1
    for _ in range(200):
        ks = np.arange(start, start + 512)
        logs = log_weight(ks) + ks * log_abs_p
        vals = np.exp(logs)
        total += float(vals.sum())
        if vals[-1] <= 1e-17 * max(total, 1e-300) and logs[-1] < logs[0]:
            break
        start += 512
    return total


def _log_gamma_piece(shape, lam, lower, upper):
    """log of int over [lam*lower, lam*upper] of x^(shape-1) e^-x dx."""
    if lower == 0.0 and np.isinf(upper):
        return gammaln(shape)
    if lower == 0.0:
        return special.log_lower_inc_gamma(shape, lam * upper)
    if np.isinf(upper):
        return special.log_upper_inc_gamma(shape, lam * lower)
    raise ValueError("only [0, b] or [t, inf) ranges are supported")


def power_kernel(s: int, m, theta: float, lower: float = 0.0, upper: float = np.inf):
    """``int y^s (1+y) (1 + a y)^m e^{-theta (m+1) y} dy`` over ``[lower, upper]``.

    Evaluated through the binomial expansion of ``(1 + a y)^m`` as
    ``sum_i C(m, i) a^i [G(s+i+1)/lam^(s+i+1) + G(s+i+2)/lam^(s+i+2)]``
    with ``lam = theta (m + 1)`` and ``G`` the complete, lower or upper
    incomplete gamma function matching the range.  Vectorized over ``m``.
    """
    m = np.atleast_1d(np.asarray(m, dtype=float))
    a = theta / (theta + 1.0)
    mmax = int(m.max())
    i = np.arange(mmax + 1, dtype=float)[None, :]
    mm = m[:, None]
    valid = i <= mm
    lam = theta * (mm + 1.0)
    ii = np.where(valid, i, 0.0)
    log_lam = np.log(lam)
    log_coef = log_binom(mm, ii) + ii * np.log(a)
    lam_b = np.broadcast_to(lam, ii.shape)
    g1 = _log_gamma_piece(s + ii + 1.0, lam_b, lower, upper)
    g2 = _log_gamma_piece(s + ii + 2.0, lam_b, lower, upper)
    t1 = np.exp(log_coef + g1 - (s + ii + 1.0) * log_lam)
    t2 = np.exp(log_coef + g2 - (s + ii + 2.0) * log_lam)
    return np.where(valid, t1 + t2, 0.0).sum(axis=1)


def survival_power_kernel(m, theta: float, upper: float):
    """``int_0^upper (1 + a y)^(m+1) e^{-theta (m+1) y} dy`` for integer arrays ``m``.

    This is ``sum_k C(m+1, k) a^k gamma(k+1; lam*upper) / lam^(k+1)`` with
    ``lam = theta (m+1)``.
    """
    m = np.atleast_1d(np.asarray(m, dtype=float))
    a = theta / (theta + 1.0)
    kmax = int(m.max()) + 1
    k = np.arange(kmax + 1, dtype=float)[None, :]
    mm = m[:, None]
    valid = k <= mm + 1.0
    kk = np.where(valid, k, 0.0)
    lam = theta * (mm + 1.0)
    lam_b = np.broadcast_to(lam, kk.shape)
    g = _log_gamma_piece(kk + 1.0, lam_b, 0.0, upper)
    terms = np.exp(log_binom(mm + 1.0, kk) + kk * np.log(a) + g - (kk + 1.0) * np.log(lam))
    return np.where(valid, terms, 0.0).sum(axis=1)
