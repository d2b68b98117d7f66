"""Competitor lifetime models, their MLEs, and goodness-of-fit reports.

Models: LG(p, theta), extended Lindley EL(alpha, theta, gamma),
Lindley(theta), Weibull(theta, gamma) with ``f = theta gamma x^(gamma-1)
exp(-theta x^gamma)`` and Exp(theta).

The EL survival function is ``((1+theta+theta x)/(1+theta))^alpha
exp(-(theta x)^gamma)``; it reduces to Lindley at ``alpha = gamma = 1``
and to Weibull with rate ``theta^gamma`` at ``alpha = 0``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize
from scipy.special import kolmogorov, xlogy

from . import core, inference
from .errors import ConvergenceError, DataValidationError, DomainError, LGError, ParameterError
from .inference import EMConfig, FitMethod, FitResult, as_sample, lindley_mle
from .numdiff import fd_hessian
from .sample import Sample

__all__ = [
    "ModelName",
    "ModelSpec",
    "GofReport",
    "MODEL_SPECS",
    "model_pdf_cdf",
    "model_logpdf",
    "model_loglik",
    "fit_model",
    "gof_statistics",
    "compare_models",
    "ks_pvalue",
]


class ModelName(str, enum.Enum):
    LG = "LG"
    EL = "EL"
    LINDLEY = "Lindley"
    WEIBULL = "Weibull"
    EXP = "Exp"


_K = {ModelName.LG: 2, ModelName.EL: 3, ModelName.LINDLEY: 1, ModelName.WEIBULL: 2, ModelName.EXP: 1}
_NAMES = {
    ModelName.LG: ("p", "theta"),
    ModelName.EL: ("alpha", "theta", "gamma"),
    ModelName.LINDLEY: ("theta",),
    ModelName.WEIBULL: ("theta", "gamma"),
    ModelName.EXP: ("theta",),
}


@dataclass(frozen=True)
class ModelSpec:
    name: ModelName
    k: int

    def __post_init__(self):
        object.__setattr__(self, "name", ModelName(self.name))
        if self.k != _K[self.name]:
            raise DomainError(f"{self.name.value} has {_K[self.name]} parameters, not {self.k}")

    @classmethod
    def of(cls, name) -> "ModelSpec":
        name = ModelName(name)
        return cls(name, _K[name])

    @property
    def param_names(self) -> tuple[str, ...]:
        return _NAMES[self.name]


MODEL_SPECS = tuple(ModelSpec.of(m) for m in ModelName)


def _as_spec(spec) -> ModelSpec:
    return spec if isinstance(spec, ModelSpec) else ModelSpec.of(spec)


def _check_params(spec: ModelSpec, params) -> np.ndarray:
    x = np.asarray(params, dtype=float).ravel()
    if x.size != spec.k:
        raise DomainError(f"{spec.name.value} needs {spec.k} parameters, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise DomainError("parameters must be finite")
    nm = spec.name
    if nm is ModelName.LG:
        try:
            core.LGParams(*x)
        except ParameterError as exc:
            raise DomainError(str(exc)) from exc
    elif nm is ModelName.EL:
        alpha, th, gam = x
        if not (th > 0 and gam > 0):
            raise DomainError("EL needs theta > 0 and gamma > 0")
        if not (alpha <= 0 or alpha == 1):
            raise DomainError("EL alpha must be <= 0 or exactly 1")
        if alpha == 1 and not _el_alpha_one_valid(th, gam):
            raise DomainError("EL with alpha = 1 has a negative density somewhere for this (theta, gamma)")
    elif not np.all(x > 0):
        raise DomainError(f"{nm.value} parameters must be > 0")
    return x


def _el_alpha_one_valid(th: float, gam: float) -> bool:
    """Whether ``gamma (1+theta+u) u^(gamma-1) >= 1`` for all ``u > 0``.

    For ``gamma > 1`` the left side vanishes at ``u = 0``; for ``gamma < 1``
    its minimum sits at ``u* = (1-gamma)(1+theta)/gamma``.
    """
    if gam > 1.0:
        return False
    if gam == 1.0:
        return True
    u = (1.0 - gam) * (1.0 + th) / gam
    return gam * (1.0 + th + u) * u ** (gam - 1.0) >= 1.0


def _el_log_survival(x, alpha, th, gam):
    return alpha * np.log1p(th * x / (1.0 + th)) - (th * x) ** gam


def model_logpdf(spec, params, y):
    """Log density; ``-inf`` where the EL density formula is not positive."""
    spec = _as_spec(spec)
    x = _check_params(spec, params)
    y = np.asarray(y, dtype=float)
    nm = spec.name
    with np.errstate(divide="ignore", invalid="ignore"):
        if nm is ModelName.LG:
            return core.logpdf(core.LGParams(*x), y)
        if nm is ModelName.EXP:
            return np.log(x[0]) - x[0] * y
        if nm is ModelName.LINDLEY:
            th = x[0]
            return 2 * np.log(th) - np.log1p(th) + np.log1p(y) - th * y
        if nm is ModelName.WEIBULL:
            th, gam = x
            return np.log(th * gam) + xlogy(gam - 1.0, y) - th * y**gam
        alpha, th, gam = x
        z = 1.0 + th + th * y
        bracket = gam * z * (th * y) ** (gam - 1.0) - alpha
        out = (
            np.log(th) + (alpha - 1.0) * np.log(z) - alpha * np.log1p(th)
            + np.log(bracket) - (th * y) ** gam
        )
        return np.where(bracket > 0, out, -np.inf)


def model_pdf_cdf(spec, params, y):
    """``(pdf, cdf)`` of a model at ``y >= 0``."""
    spec = _as_spec(spec)
    x = _check_params(spec, params)
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr < 0):
        raise DomainError("y must be >= 0")
    nm = spec.name
    if nm is ModelName.LG:
        prm = core.LGParams(*x)
        return core.pdf(prm, y), core.cdf(prm, y)
    with np.errstate(over="ignore", divide="ignore"):
        dens = np.exp(model_logpdf(spec, x, y_arr))
    if nm is ModelName.EXP:
        cdf = -np.expm1(-x[0] * y_arr)
    elif nm is ModelName.LINDLEY:
        th = x[0]
        cdf = 1.0 - (1.0 + th * y_arr / (th + 1.0)) * np.exp(-th * y_arr)
    elif nm is ModelName.WEIBULL:
        cdf = -np.expm1(-x[0] * y_arr ** x[1])
    else:
        cdf = -np.expm1(_el_log_survival(y_arr, *x))
    cdf = np.clip(cdf, 0.0, 1.0)
    if np.ndim(y) == 0:
        return float(dens), float(cdf)
    return dens, cdf


def _el_loglik_unrestricted(x, y) -> float:
    alpha, th, gam = x
    if not (th > 0 and gam > 0):
        return -np.inf
    z = 1.0 + th + th * y
    bracket = gam * z * (th * y) ** (gam - 1.0) - alpha
    if np.any(bracket <= 0):
        return -np.inf
    return float(
        np.sum(np.log(th) + (alpha - 1.0) * np.log(z) - alpha * np.log1p(th) + np.log(bracket) - (th * y) ** gam)
    )


def model_loglik(spec, params, data) -> float:
    y = as_sample(data).values
    return float(np.sum(model_logpdf(spec, params, y)))


@dataclass
class GofReport:
    """Goodness-of-fit summary of one fitted model (plug-in parameters)."""

    model: ModelSpec
    n: int
    mles: dict = field(default_factory=dict)
    std_errors: dict = field(default_factory=dict)
    ks: float = float("nan")
    ks_pvalue: float = float("nan")
    neg2loglik: float = float("nan")
    aic: float = float("nan")
    aicc: float = float("nan")
    bic: float = float("nan")
    ad: float | None = float("nan")
    cm: float = float("nan")
    converged: bool = False
    error: str | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def num(v):
            return None if v is None or (isinstance(v, float) and not math.isfinite(v)) else v

        return {
            "model": self.model.name.value,
            "k": self.model.k,
            "n": self.n,
            "mles": self.mles,
            "std_errors": {key: num(v) for key, v in self.std_errors.items()},
            "ks": num(self.ks),
            "ks_pvalue": num(self.ks_pvalue),
            "neg2loglik": num(self.neg2loglik),
            "aic": num(self.aic),
            "aicc": num(self.aicc),
            "bic": num(self.bic),
            "ad": num(self.ad),
            "cm": num(self.cm),
            "converged": self.converged,
            "error": self.error,
            "diagnostics": self.diagnostics,
        }


# ---------------------------------------------------------------------------
# fitting
# ---------------------------------------------------------------------------


def _fd_cov(spec: ModelSpec, values: np.ndarray, sample: Sample, diagnostics: dict):
    def f(x):
        if spec.name is ModelName.EL:
            # the density formula extends smoothly across alpha = 0, which lets
            # central differences straddle the boundary of the alpha <= 0 branch
            return _el_loglik_unrestricted(x, sample.values)
        try:
            return model_loglik(spec, x, sample)
        except DomainError:
            return -np.inf

    hess = fd_hessian(f, values)
    if not np.all(np.isfinite(hess)):
        diagnostics["information_not_finite"] = True
        return None
    info = -hess
    try:
        cov = np.linalg.inv(info)
    except np.linalg.LinAlgError:
        diagnostics["information_singular"] = True
        return None
    if np.linalg.eigvalsh(info).min() <= 0:
        diagnostics["information_not_positive_definite"] = True
    return 0.5 * (cov + cov.T)


def _weibull_mle(y: np.ndarray, tol: float = 1e-12, max_iter: int = 100):
    n = y.size
    ly = np.log(y)

    def profile_score(g):
        w = y**g
        return n / g + ly.sum() - n * np.sum(w * ly) / w.sum()

    lo, hi = 1e-3, 1.0
    while profile_score(hi) > 0:
        hi *= 2.0
        if hi > 1e4:
            raise ConvergenceError("Weibull shape bracket exceeded 1e4")
    gam = brentq(profile_score, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    th = n / np.sum(y**gam)
    # joint Newton polish in (theta, gamma)
    it = 0
    for it in range(1, max_iter + 1):
        w = y**gam
        wl = w * ly
        grad = np.array([n / th - w.sum(), n / gam + ly.sum() - th * wl.sum()])
        hess = np.array(
            [[-n / th**2, -wl.sum()], [-wl.sum(), -n / gam**2 - th * np.sum(wl * ly)]]
        )
        step = np.linalg.solve(hess, grad)
        th, gam = th - step[0], gam - step[1]
        if np.max(np.abs(step) / np.array([th, gam])) < tol:
            break
    return np.array([th, gam]), it


def _el_fit(sample: Sample, diagnostics: dict):
    """Multistart L-BFGS-B over ``alpha <= 0`` plus the isolated ``alpha = 1`` branch."""
    y = sample.values
    spec = ModelSpec.of(ModelName.EL)
    w_par, _ = _weibull_mle(y)
    gam0 = w_par[1]
    th0 = w_par[0] ** (1.0 / gam0)

    def nll(z, alpha=None):
        if alpha is None:
            alpha, lt, lg = z
        else:
            lt, lg = z
        try:
            v = model_loglik(spec, [min(alpha, 0.0) if alpha != 1.0 else 1.0, math.exp(lt), math.exp(lg)], sample)
        except DomainError:
            return 1e300
        return -v if np.isfinite(v) else 1e300

    best = None
    runs = []
    for a0 in (-2.0, -1.0, -0.5, -1e-8):
        res = minimize(
            nll,
            x0=[a0, math.log(th0), math.log(gam0)],
            method="L-BFGS-B",
            bounds=[(-50.0, 0.0), (-30.0, 10.0), (-5.0, 5.0)],
            options={"ftol": 1e-15, "gtol": 1e-10, "maxiter": 2000},
        )
        cand = np.array([res.x[0], math.exp(res.x[1]), math.exp(res.x[2])])
        runs.append((a0, float(-res.fun), bool(res.success)))
        if res.fun < 1e299 and (best is None or res.fun < best[0]):
            best = (res.fun, cand, int(res.nit), bool(res.success))
    lind = lindley_mle(sample)
    res = minimize(
        lambda z: nll(z, alpha=1.0),
        x0=[math.log(lind), 0.0],
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 4000},
    )
    runs.append((1.0, float(-res.fun), bool(res.success)))
    if res.fun < 1e299 and (best is None or res.fun < best[0]):
        best = (res.fun, np.array([1.0, math.exp(res.x[0]), math.exp(res.x[1])]), int(res.nit), bool(res.success))
    diagnostics["multistart"] = [{"alpha0": a, "loglik": ll, "success": ok} for a, ll, ok in runs]
    if best is None:
        raise ConvergenceError("EL multi-start exhausted without a finite likelihood")
    return best[1], best[2], best[3]


def fit_model(spec, data, em: EMConfig = EMConfig(), lg_method: str = "em") -> FitResult:
    """Maximum-likelihood fit of one model.

    LG is delegated to :func:`lgeom.inference.fit_em` (or ``fit_direct``
    when ``lg_method="newton"``).  Other models use finite-difference
    observed information for their covariance.
    """
    spec = _as_spec(spec)
    sample = as_sample(data)
    if sample.n <= spec.k + 1:
        raise DataValidationError(f"{spec.name.value} needs n > {spec.k + 1}, got {sample.n}")
    nm = spec.name
    if nm is ModelName.LG:
        if lg_method == "em":
            return inference.fit_em(sample, cfg=em)
        if lg_method == "newton":
            return inference.fit_direct(sample, tol=em.tol_param, max_iter=em.max_iter)
        raise DomainError(f"unknown LG method {lg_method!r}")
    y = sample.values
    diagnostics: dict = {}
    converged = True
    if nm is ModelName.EXP:
        values, iters, method = np.array([1.0 / y.mean()]), 0, FitMethod.CLOSED_FORM
    elif nm is ModelName.LINDLEY:
        values, iters, method = np.array([lindley_mle(sample)]), 0, FitMethod.DIRECT_NEWTON
    elif nm is ModelName.WEIBULL:
        values, iters = _weibull_mle(y)
        method = FitMethod.PROFILE_NEWTON
    else:
        values, iters, converged = _el_fit(sample, diagnostics)
        method = FitMethod.QUASI_NEWTON
    loglik = model_loglik(spec, values, sample)
    if nm is ModelName.EL and values[0] == 0.0:
        # boundary of the alpha <= 0 branch: one-sided differences would be needed
        diagnostics["alpha_at_boundary"] = True
    cov = _fd_cov(spec, values, sample, diagnostics)
    return FitResult(
        model=nm.value,
        names=spec.param_names,
        values=values,
        loglik=loglik,
        cov=cov,
        iterations=int(iters),
        converged=converged,
        method=method,
        n=sample.n,
        diagnostics=diagnostics,
    )


# ---------------------------------------------------------------------------
# goodness of fit
# ---------------------------------------------------------------------------


def ks_pvalue(d: float, n: int) -> float:
    """Asymptotic Kolmogorov tail probability at ``sqrt(n) D``."""
    return float(kolmogorov(math.sqrt(n) * d))


def gof_statistics(spec, fit: FitResult, data) -> GofReport:
    """K-S, Anderson-Darling, Cramer-von Mises and information criteria.

    All statistics plug in the fitted parameters; no correction is made for
    estimation.  When a fitted cdf value is exactly 0 or 1 the AD statistic
    is reported as ``None`` with a diagnostic.
    """
    spec = _as_spec(spec)
    sample = as_sample(data)
    y = sample.values
    n = sample.n
    k = spec.k
    _, big_f = model_pdf_cdf(spec, fit.values, y)
    big_f = np.asarray(big_f, dtype=float)
    i = np.arange(1, n + 1)
    ks = float(np.max(np.maximum(i / n - big_f, big_f - (i - 1) / n)))
    cm = float(1.0 / (12.0 * n) + np.sum((big_f - (2 * i - 1) / (2.0 * n)) ** 2))
    diagnostics: dict = {"plug_in_parameters": True}
    if np.any(big_f <= 0.0) or np.any(big_f >= 1.0):
        ad = None
        diagnostics["ad_undefined"] = "fitted cdf equals 0 or 1 at an observation"
    else:
        ad = float(-n - np.mean((2 * i - 1) * (np.log(big_f) + np.log1p(-big_f[::-1]))))
    neg2 = -2.0 * fit.loglik
    aic = neg2 + 2.0 * k
    aicc = aic + 2.0 * k * (k + 1) / (n - k - 1) if n - k - 1 > 0 else float("inf")
    bic = neg2 + k * math.log(n)
    return GofReport(
        model=spec,
        n=n,
        mles=fit.estimates,
        std_errors=dict(zip(fit.names, (float(s) for s in fit.std_errors))),
        ks=ks,
        ks_pvalue=ks_pvalue(ks, n),
        neg2loglik=neg2,
        aic=aic,
        aicc=aicc,
        bic=bic,
        ad=ad,
        cm=cm,
        converged=fit.converged,
        diagnostics=diagnostics,
    )


def _sort_key(rep: GofReport):
    bad = rep.error is not None or not math.isfinite(rep.aic)
    return (bad, rep.aic if not bad else 0.0, rep.bic if not bad else 0.0, rep.model.name.value)


def compare_models(data, specs=MODEL_SPECS, em: EMConfig = EMConfig(), lg_method: str = "em") -> list[GofReport]:
    """Fit each model and return reports sorted by AIC, then BIC, then name.

    A model that fails to fit yields a row with ``error`` set; failed rows
    sort last.
    """
    sample = as_sample(data)
    reports = []
    for spec in specs:
        spec = _as_spec(spec)
        try:
            fit = fit_model(spec, sample, em=em, lg_method=lg_method)
            reports.append(gof_statistics(spec, fit, sample))
        except LGError as exc:
            reports.append(GofReport(model=spec, n=sample.n, error=f"{type(exc).__name__}: {exc}"))
    return sorted(reports, key=_sort_key)
