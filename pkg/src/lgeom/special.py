"""Log-gamma and incomplete gamma kernels.

The incomplete gamma functions use the usual regime split: the power
series of the regularized lower function when ``t < s + 1`` and a
modified-Lentz continued fraction for the regularized upper function
otherwise.  Everything is carried in log space so that callers can form
ratios such as ``gamma(k + 3; x) / lam**(k + 3)`` for large ``k`` without
overflow.  All functions broadcast over numpy arrays.
"""
from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from .errors import ConvergenceError, DomainError

__all__ = [
    "log_gamma",
    "log_regularized_lower",
    "log_regularized_upper",
    "regularized_lower",
    "regularized_upper",
    "log_lower_inc_gamma",
    "log_upper_inc_gamma",
    "lower_inc_gamma",
    "upper_inc_gamma",
]

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 5000


def _scalar_or_array(out, like):
    if np.ndim(like) == 0:
        return float(out)
    return out


def log_gamma(s):
    """Natural log of the gamma function for ``s > 0``."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(~(s_arr > 0)):
        raise DomainError("log_gamma requires s > 0")
    return _scalar_or_array(gammaln(s_arr), s)


def _check(s, t):
    s_arr, t_arr = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(t, dtype=float))
    if np.any(~(s_arr > 0)):
        raise DomainError("incomplete gamma requires shape s > 0")
    if np.any(~(t_arr >= 0)):
        raise DomainError("incomplete gamma requires t >= 0")
    return s_arr, t_arr


def _log_p_series(s, x):
    # log P(s, x) = -x + s log x - lnG(s+1) + log sum_n x^n / ((s+1)...(s+n))
    term = np.ones_like(x)
    total = np.ones_like(x)
    ap = s.copy()
    active = np.ones(x.shape, dtype=bool)
    for _ in range(_MAX_ITER):
        ap = ap + 1.0
        term = np.where(active, term * x / ap, 0.0)
        total = total + term
        active = term > _EPS * total
        if not active.any():
            break
    else:
        raise ConvergenceError("incomplete gamma series did not converge")
    return -x + s * np.log(x) - gammaln(s + 1.0) + np.log(total)


def _log_q_cfrac(s, x):
    # modified Lentz evaluation of the continued fraction for Q(s, x)
    b = x + 1.0 - s
    c = np.full_like(x, 1.0 / _TINY)
    d = 1.0 / np.where(np.abs(b) < _TINY, _TINY, b)
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, _MAX_ITER):
        an = -i * (i - s)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = b + an / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = np.where(active, d * c, 1.0)
        h = h * delta
        active = np.abs(delta - 1.0) > _EPS
        if not active.any():
            break
    else:
        raise ConvergenceError("incomplete gamma continued fraction did not converge")
    return -x + s * np.log(x) - gammaln(s) + np.log(h)


def _log_pq(s, t):
    """Return ``(log P, log Q)`` for already-validated broadcast arrays."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    log_p = np.empty(t.shape)
    log_q = np.empty(t.shape)

    zero = t == 0.0
    inf = np.isinf(t)
    log_p[zero], log_q[zero] = -np.inf, 0.0
    log_p[inf], log_q[inf] = 0.0, -np.inf

    ser = ~zero & ~inf & (t < s + 1.0)
    if ser.any():
        lp = _log_p_series(s[ser], t[ser])
        log_p[ser] = lp
        log_q[ser] = np.log(-np.expm1(np.minimum(lp, 0.0)))

    cf = ~zero & ~inf & (t >= s + 1.0)
    if cf.any():
        lq = _log_q_cfrac(s[cf], t[cf])
        log_q[cf] = lq
        log_p[cf] = np.log(-np.expm1(np.minimum(lq, 0.0)))
    return log_p, log_q


def log_regularized_lower(s, t):
    """``log P(s, t)`` where ``P = gamma(s; t) / Gamma(s)``."""
    s_arr, t_arr = _check(s, t)
    return _scalar_or_array(_log_pq(s_arr, t_arr)[0], t_arr)


def log_regularized_upper(s, t):
    """``log Q(s, t)`` where ``Q = Gamma(s; t) / Gamma(s)``."""
    s_arr, t_arr = _check(s, t)
    return _scalar_or_array(_log_pq(s_arr, t_arr)[1], t_arr)


def regularized_lower(s, t):
    return np.exp(log_regularized_lower(s, t))


def regularized_upper(s, t):
    return np.exp(log_regularized_upper(s, t))


def log_lower_inc_gamma(s, t):
    """Log of the unregularized lower incomplete gamma ``int_0^t x^(s-1) e^-x dx``."""
    s_arr, t_arr = _check(s, t)
    return _scalar_or_array(gammaln(s_arr) + _log_pq(s_arr, t_arr)[0], t_arr)


def log_upper_inc_gamma(s, t):
    """Log of the unregularized upper incomplete gamma ``int_t^inf x^(s-1) e^-x dx``."""
    s_arr, t_arr = _check(s, t)
    return _scalar_or_array(gammaln(s_arr) + _log_pq(s_arr, t_arr)[1], t_arr)


def lower_inc_gamma(s, t):
    """Lower incomplete gamma function ``gamma(s; t)``.

    Parameters
    ----------
    s : float or array_like
        Shape, strictly positive.
    t : float or array_like
        Upper integration limit, nonnegative (``inf`` allowed).

    Returns
    -------
    float or ndarray
        ``int_0^t x**(s-1) exp(-x) dx``.

    Raises
    ------
    DomainError
        If ``s <= 0`` or ``t < 0``.
    """
    return np.exp(log_lower_inc_gamma(s, t))


def upper_inc_gamma(s, t):
    """Upper incomplete gamma function ``Gamma(s; t) = Gamma(s) - gamma(s; t)``."""
    return np.exp(log_upper_inc_gamma(s, t))
