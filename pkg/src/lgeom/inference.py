"""Maximum likelihood for LG(p, theta): likelihood calculus, EM, Newton, Wald and LR inference.

EM uses the geometric latent count ``Z``.  For ``0 < p < 1`` the LG law is
the minimum of ``Z ~ Geometric(1-p)`` Lindley lifetimes; for ``p < 0`` it
is the maximum of ``Z ~ Geometric(1/(1-p))`` Lindley lifetimes.  In both
cases ``Z | Y`` is a size-biased geometric variable with mean
``(1 + w)/(1 - w)``, where ``w = p c(y)`` (minimum) or
``w = -p/(1-p) (1 - c(y))`` (maximum).  ``p = 0`` is a fixed point of
both updates, so EM is started off zero on the side the score points to.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.stats import chi2, norm

from .core import LGParams, lindley_kernel, logpdf
from .errors import ConvergenceError, DomainError, ParameterError, SingularInformationError
from .numdiff import fd_hessian
from .sample import Sample

__all__ = [
    "FitMethod",
    "EMConfig",
    "FitResult",
    "LRTestResult",
    "as_sample",
    "log_likelihood",
    "score",
    "observed_information",
    "lindley_mle",
    "e_step",
    "fit_em",
    "fit_direct",
    "wald_ci",
    "lr_test",
]


class FitMethod(str, enum.Enum):
    EM = "em"
    DIRECT_NEWTON = "newton"
    CLOSED_FORM = "closed_form"
    PROFILE_NEWTON = "profile_newton"
    QUASI_NEWTON = "quasi_newton"


@dataclass(frozen=True)
class EMConfig:
    tol_param: float = 1e-7
    tol_loglik: float = 1e-9
    max_iter: int = 2000
    theta_bracket: tuple[float, float | None] = (1e-8, None)
    keep_trace: bool = True

    def __post_init__(self):
        if self.max_iter < 1:
            raise DomainError("max_iter must be >= 1")
        lo, hi = self.theta_bracket
        if not lo > 0 or (hi is not None and not hi > lo):
            raise DomainError("theta_bracket must satisfy 0 < low < high")


@dataclass
class FitResult:
    """Outcome of a maximum-likelihood fit.

    ``values`` are the estimates in the order of ``names``; ``cov`` is the
    inverse observed information (``None`` if it could not be inverted).
    """

    model: str
    names: tuple[str, ...]
    values: np.ndarray
    loglik: float
    cov: np.ndarray | None
    iterations: int
    converged: bool
    method: FitMethod
    n: int
    trace: list | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def neg2loglik(self) -> float:
        return -2.0 * self.loglik

    @property
    def k(self) -> int:
        return len(self.names)

    @property
    def std_errors(self) -> np.ndarray:
        if self.cov is None:
            return np.full(self.k, np.nan)
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))

    @property
    def estimates(self) -> dict:
        return dict(zip(self.names, (float(v) for v in self.values)))

    @property
    def params(self) -> LGParams:
        if self.model != "LG":
            raise AttributeError(f"{self.model} fit has no LGParams")
        est = self.estimates
        return LGParams(est["p"], est["theta"])

    def to_dict(self) -> dict:
        se = self.std_errors
        return {
            "model": self.model,
            "estimates": self.estimates,
            "std_errors": {nm: (None if not np.isfinite(s) else float(s)) for nm, s in zip(self.names, se)},
            "loglik": self.loglik,
            "neg2loglik": self.neg2loglik,
            "cov": None if self.cov is None else self.cov.tolist(),
            "iterations": self.iterations,
            "converged": self.converged,
            "method": self.method.value,
            "n": self.n,
            "diagnostics": self.diagnostics,
        }


@dataclass(frozen=True)
class LRTestResult:
    statistic: float
    p_value: float
    df: int
    restricted: FitResult


def as_sample(data) -> Sample:
    return data if isinstance(data, Sample) else Sample.from_values(data)


# ---------------------------------------------------------------------------
# likelihood calculus
# ---------------------------------------------------------------------------


def _c_derivs(theta: float, y: np.ndarray):
    """``c``, ``dc/dtheta`` and ``d2c/dtheta2`` for the Lindley kernel."""
    with np.errstate(under="ignore"):
        e = np.exp(-theta * y)
    c = lindley_kernel(theta, y)
    g = 1.0 + theta * y / (theta + 1.0) - 1.0 / (theta + 1.0) ** 2
    g1 = y / (theta + 1.0) ** 2 + 2.0 / (theta + 1.0) ** 3
    c_t = -y * e * g
    c_tt = y * e * (y * g - g1)
    return c, c_t, c_tt


def log_likelihood(params: LGParams, data) -> float:
    """``2n log theta - n log(1+theta) + n log(1-p) + sum log(1+y) - theta sum y
    - 2 sum log(1 - p c(y))``."""
    y = as_sample(data).values
    n = y.size
    p, th = params.p, params.theta
    c = lindley_kernel(th, y)
    return float(
        2 * n * math.log(th) - n * math.log1p(th) + n * math.log1p(-p)
        + np.log1p(y).sum() - th * y.sum() - 2.0 * np.log1p(-p * c).sum()
    )


def score(params: LGParams, data) -> np.ndarray:
    """Gradient ``(dl/dp, dl/dtheta)`` of the log-likelihood."""
    y = as_sample(data).values
    n = y.size
    p, th = params.p, params.theta
    c, c_t, _ = _c_derivs(th, y)
    d = 1.0 - p * c
    d_p = -n / (1.0 - p) + 2.0 * np.sum(c / d)
    d_t = 2.0 * n / th - n / (1.0 + th) - y.sum() + 2.0 * p * np.sum(c_t / d)
    return np.array([d_p, d_t])


def observed_information(params: LGParams, data) -> np.ndarray:
    """Negative Hessian ``[[I_pp, I_pt], [I_pt, I_tt]]`` of the log-likelihood."""
    y = as_sample(data).values
    n = y.size
    p, th = params.p, params.theta
    c, c_t, c_tt = _c_derivs(th, y)
    d = 1.0 - p * c
    i_pp = n / (1.0 - p) ** 2 - 2.0 * np.sum(c * c / (d * d))
    i_pt = -2.0 * np.sum(c_t / (d * d))
    i_tt = 2.0 * n / th**2 - n / (1.0 + th) ** 2 - 2.0 * p * np.sum(c_tt / d + p * c_t * c_t / (d * d))
    return np.array([[i_pp, i_pt], [i_pt, i_tt]])


def _loglik_vec(data: Sample):
    def f(x):
        p, th = x
        if not (p < 1.0 and th > 0.0):
            return -np.inf
        return log_likelihood(LGParams(p, th), data)

    return f


def _covariance(params: LGParams, data: Sample, diagnostics: dict):
    """Invert the observed information, switching to a finite-difference
    Hessian if the analytic matrix disagrees with it."""
    info = observed_information(params, data)
    try:
        fd = -fd_hessian(_loglik_vec(data), [params.p, params.theta])
        scale = np.max(np.abs(fd))
        mismatch = float(np.max(np.abs(info - fd)) / scale) if scale > 0 else 0.0
    except (ParameterError, ValueError):
        mismatch = 0.0
        fd = info
    diagnostics["information_fd_mismatch"] = mismatch
    if mismatch > 1e-4:
        info = fd
        diagnostics["information_source"] = "finite_difference"
    else:
        diagnostics["information_source"] = "analytic"
    try:
        eig = np.linalg.eigvalsh(info)
        diagnostics["information_min_eigenvalue"] = float(eig.min())
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        diagnostics["information_singular"] = True
        return None
    if eig.min() <= 0:
        diagnostics["information_not_positive_definite"] = True
    return 0.5 * (cov + cov.T)


# ---------------------------------------------------------------------------
# Lindley sub-model
# ---------------------------------------------------------------------------


def lindley_mle(data, tol: float = 1e-14, max_iter: int = 100) -> float:
    """Lindley MLE: the root of ``2/theta - 1/(1+theta) = mean(y)`` by Newton.

    The left side is convex and decreasing in ``theta`` and positive at
    ``1/mean(y)``, so Newton iterates increase monotonically to the root.
    """
    ybar = float(np.mean(as_sample(data).values))
    th = 1.0 / ybar
    for _ in range(max_iter):
        g = 2.0 / th - 1.0 / (1.0 + th) - ybar
        dg = -2.0 / th**2 + 1.0 / (1.0 + th) ** 2
        step = g / dg
        th -= step
        if abs(step) <= tol * th:
            return th
    raise ConvergenceError("Lindley MLE Newton iteration did not converge")


# ---------------------------------------------------------------------------
# EM
# ---------------------------------------------------------------------------


def _branch(p: float) -> str:
    return "min" if p > 0 else "max"


def e_step(params: LGParams, y) -> np.ndarray:
    """Posterior mean of the latent geometric count for each observation."""
    y = np.asarray(y, dtype=float)
    p = params.p
    c = lindley_kernel(params.theta, y)
    if p > 0:
        w = p * c
    elif p < 0:
        w = (-p / (1.0 - p)) * (1.0 - c)
    else:
        return np.ones_like(y)
    return (1.0 + w) / (1.0 - w)


def _log_factor_derivs(theta: float, y: np.ndarray, branch: str):
    """First and second theta-derivatives of ``log c`` (min) or ``log(1-c)`` (max)."""
    c, c_t, c_tt = _c_derivs(theta, y)
    if branch == "min":
        # divide analytically so that underflow of exp(-theta y) does not matter
        base = 1.0 + theta * y / (theta + 1.0)
        g = 1.0 + theta * y / (theta + 1.0) - 1.0 / (theta + 1.0) ** 2
        g1 = y / (theta + 1.0) ** 2 + 2.0 / (theta + 1.0) ** 3
        d1 = -y * g / base
        d2 = y * (y * g - g1) / base - d1 * d1
    else:
        one_minus_c = -np.expm1(-theta * y) - y * theta / (theta + 1.0) * np.exp(-theta * y)
        d1 = -c_t / one_minus_c
        d2 = -c_tt / one_minus_c - d1 * d1
    return d1, d2


def _m_step_theta(y, z, theta_now, branch, cfg: EMConfig):
    n = y.size
    ysum = y.sum()
    wts = z - 1.0

    def eq(th):
        d1, _ = _log_factor_derivs(th, y, branch)
        return 2.0 * n / th - n / (1.0 + th) - ysum + np.sum(wts * d1)

    def deq(th):
        _, d2 = _log_factor_derivs(th, y, branch)
        return -2.0 * n / th**2 + n / (1.0 + th) ** 2 + np.sum(wts * d2)

    lo = cfg.theta_bracket[0]
    hi = cfg.theta_bracket[1] or 10.0 * theta_now
    for _ in range(200):
        if eq(hi) < 0:
            break
        hi *= 2.0
    else:
        raise ConvergenceError(f"M-step: no sign change on bracket ({lo}, {hi}]")
    if not eq(lo) > 0:
        raise ConvergenceError(f"M-step: equation not positive at bracket low end {lo} (upper {hi})")
    th = brentq(eq, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    for _ in range(2):
        d = deq(th)
        if d < 0:
            cand = th - eq(th) / d
            if lo < cand < hi:
                th = cand
    return th


def _default_start(data: Sample) -> LGParams:
    th0 = lindley_mle(data)
    s_p = score(LGParams(0.0, th0), data)[0]
    return LGParams(0.0, th0), s_p


def fit_em(data, init: LGParams | None = None, cfg: EMConfig = EMConfig()) -> FitResult:
    """Fit LG(p, theta) by EM over the latent geometric count.

    Parameters
    ----------
    data : Sample or array_like
    init : LGParams, optional
        Starting point.  The sign of ``init.p`` selects the minimum
        (``p > 0``) or maximum (``p < 0``) representation; EM never crosses
        ``p = 0``.  Defaults to ``theta`` = Lindley MLE and ``p = +/-0.1``
        following the sign of the ``p``-score at the Lindley fit.
    cfg : EMConfig

    Returns
    -------
    FitResult
        ``converged`` is False when ``max_iter`` is hit; the trace holds
        ``(iteration, p, theta, loglik)`` rows.
    """
    sample = as_sample(data)
    sample.require_fit_size(2)
    y = sample.values
    n = y.size
    diagnostics: dict = {}
    if init is None or init.p == 0.0:
        lind, s_p = _default_start(sample)
        theta0 = lind.theta if init is None else init.theta
        init = LGParams(0.1 if s_p > 0 else -0.1, theta0)
        diagnostics["start_rule"] = "lindley_mle_score_sign"
    branch = _branch(init.p)
    diagnostics["branch"] = branch

    p, th = init.p, init.theta
    ll = log_likelihood(init, sample)
    trace = [(0, p, th, ll)] if cfg.keep_trace else None
    worst_drop = 0.0
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        z = e_step(LGParams(p, th), y)
        zsum = z.sum()
        p_new = 1.0 - n / zsum if branch == "min" else 1.0 - zsum / n
        th_new = _m_step_theta(y, z, th, branch, cfg)
        ll_new = log_likelihood(LGParams(p_new, th_new), sample)
        worst_drop = min(worst_drop, ll_new - ll)
        step = max(abs(p_new - p), abs(th_new - th))
        dll = abs(ll_new - ll)
        p, th, ll = p_new, th_new, ll_new
        if trace is not None:
            trace.append((it, p, th, ll))
        if step < cfg.tol_param and dll < cfg.tol_loglik:
            converged = True
            break
    diagnostics["max_loglik_decrease"] = max(0.0, -worst_drop)
    params = LGParams(p, th)
    cov = _covariance(params, sample, diagnostics)
    return FitResult(
        model="LG",
        names=("p", "theta"),
        values=np.array([p, th]),
        loglik=ll,
        cov=cov,
        iterations=it,
        converged=converged,
        method=FitMethod.EM,
        n=n,
        trace=trace,
        diagnostics=diagnostics,
    )


# ---------------------------------------------------------------------------
# direct Newton
# ---------------------------------------------------------------------------

_U_MAX = 36.0  # p = 1 - exp(-u) stays representable below 1
_U_BOUNDARY = 18.0  # p > 1 - 1.5e-8 is reported as drift to the boundary


def fit_direct(
    data,
    init: LGParams | None = None,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> FitResult:
    """Damped Newton ascent on the log-likelihood in ``(u, theta)``, ``p = 1 - e^{-u}``.

    The Hessian is the analytic observed information mapped through the
    reparameterization; when it is not negative definite a Levenberg shift
    is added.  Steps are halved until the log-likelihood does not drop.
    A drift of ``p`` to 1 or ``theta`` to 0 is reported in
    ``diagnostics["boundary"]`` and the fit is marked not converged.
    """
    sample = as_sample(data)
    sample.require_fit_size(2)
    if init is None:
        init = LGParams(0.0, lindley_mle(sample))
    u = -math.log1p(-init.p)
    th = init.theta
    diagnostics: dict = {}
    trace = []

    def state(u_, th_):
        return LGParams(-math.expm1(-u_), th_)

    ll = log_likelihood(state(u, th), sample)
    trace.append((0, state(u, th).p, th, ll))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        prm = state(u, th)
        g_nat = score(prm, sample)
        info = observed_information(prm, sample)
        jac = 1.0 - prm.p  # dp/du
        grad = np.array([g_nat[0] * jac, g_nat[1]])
        hess = np.array(
            [
                [-info[0, 0] * jac * jac - g_nat[0] * jac, -info[0, 1] * jac],
                [-info[0, 1] * jac, -info[1, 1]],
            ]
        )
        if np.max(np.abs(g_nat)) < 1e-12 * sample.n:
            converged = True
            it -= 1
            break
        neg = -hess
        shift = 0.0
        while True:
            try:
                np.linalg.cholesky(neg + shift * np.eye(2))
                break
            except np.linalg.LinAlgError:
                shift = max(2.0 * shift, 1e-8 * max(1.0, np.abs(neg).max()))
        step = np.linalg.solve(neg + shift * np.eye(2), grad)
        t = 1.0
        for _ in range(60):
            u_new, th_new = u + t * step[0], th + t * step[1]
            if th_new > 0 and u_new < _U_MAX:
                ll_new = log_likelihood(state(u_new, th_new), sample)
                if ll_new >= ll - 1e-12 * abs(ll):
                    break
            t *= 0.5
        else:
            diagnostics["line_search_failed"] = True
            break
        dp = abs(state(u_new, th_new).p - state(u, th).p)
        dth = abs(th_new - th)
        u, th, ll = u_new, th_new, ll_new
        trace.append((it, state(u, th).p, th, ll))
        if max(dp, dth) < tol:
            converged = True
            break
    if u > _U_BOUNDARY:
        diagnostics["boundary"] = "p->1"
        converged = False
    elif th < 1e-8:
        diagnostics["boundary"] = "theta->0"
        converged = False
    params = state(u, th)
    cov = _covariance(params, sample, diagnostics)
    return FitResult(
        model="LG",
        names=("p", "theta"),
        values=np.array([params.p, params.theta]),
        loglik=ll,
        cov=cov,
        iterations=it,
        converged=converged,
        method=FitMethod.DIRECT_NEWTON,
        n=sample.n,
        trace=trace,
        diagnostics=diagnostics,
    )


# ---------------------------------------------------------------------------
# interval estimates and tests
# ---------------------------------------------------------------------------


def wald_ci(fit: FitResult, gamma: float = 0.05) -> dict:
    """``100(1-gamma)%`` Wald intervals ``est +/- z_{1-gamma/2} se`` per parameter."""
    if not 0.0 < gamma < 1.0:
        raise DomainError("gamma must lie in (0, 1)")
    if fit.cov is None or not np.all(np.isfinite(fit.std_errors)):
        raise SingularInformationError("fit has no invertible information matrix")
    z = float(norm.ppf(1.0 - gamma / 2.0))
    return {
        nm: (float(v - z * s), float(v + z * s)) for nm, v, s in zip(fit.names, fit.values, fit.std_errors)
    }


def lr_test(data, fit_full: FitResult, null_constraint: str = "p=0") -> LRTestResult:
    """Likelihood-ratio test of the Lindley sub-model (``p = 0``) against LG."""
    if null_constraint.replace(" ", "").lower() not in ("p=0", "p_equals_zero"):
        raise DomainError(f"unsupported null constraint {null_constraint!r}")
    sample = as_sample(data)
    th0 = lindley_mle(sample)
    restricted_params = LGParams(0.0, th0)
    ll0 = log_likelihood(restricted_params, sample)
    info = observed_information(restricted_params, sample)[1, 1]
    restricted = FitResult(
        model="Lindley",
        names=("theta",),
        values=np.array([th0]),
        loglik=ll0,
        cov=np.array([[1.0 / info]]) if info > 0 else None,
        iterations=0,
        converged=True,
        method=FitMethod.PROFILE_NEWTON,
        n=sample.n,
    )
    w = max(2.0 * (fit_full.loglik - ll0), 0.0)
    return LRTestResult(w, float(chi2.sf(w, 1)), 1, restricted)


def loglik_from_density(params: LGParams, data) -> float:
    """``sum log f(y_i)``, the definitional form of :func:`log_likelihood`."""
    return float(np.sum(logpdf(params, as_sample(data).values)))
