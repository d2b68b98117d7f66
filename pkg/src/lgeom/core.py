"""The Lindley-geometric distribution LG(p, theta).

``Y = min(X_1, ..., X_N)`` with ``X_i`` i.i.d. Lindley(theta) and
``N ~ Geometric(1 - p)`` on ``{1, 2, ...}``.  The resulting density is a
proper density for every ``p < 1``, so the parameter space used here is
``p < 1, theta > 0``; the compounding construction only exists for
``0 < p < 1``.

Every evaluation function is written in terms of the Lindley survival
kernel ``c(y) = (1 + theta*y/(theta+1)) * exp(-theta*y)``.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import ConvergenceError, DomainError, ParameterError
from .sample import Sample

__all__ = [
    "LGParams",
    "DensityKind",
    "DensityShape",
    "HazardKind",
    "HazardShape",
    "ClassificationWarning",
    "lindley_kernel",
    "pdf",
    "logpdf",
    "cdf",
    "survival",
    "hazard",
    "reversed_hazard",
    "quantile",
    "sample",
    "density_threshold",
    "hazard_threshold",
    "density_slope_numerator",
    "hazard_slope_numerator",
    "classify_density",
    "classify_hazard",
]

# exp(-700) is about 1e-304; beyond this the tail is treated as exhausted
_TAIL_CUTOFF = 700.0


@dataclass(frozen=True)
class LGParams:
    """Parameters of LG(p, theta): ``p < 1`` and ``theta > 0``, both finite."""

    p: float
    theta: float

    def __post_init__(self):
        p, theta = float(self.p), float(self.theta)
        if not (math.isfinite(p) and math.isfinite(theta)):
            raise ParameterError(f"parameters must be finite, got p={p}, theta={theta}")
        if not p < 1.0:
            raise ParameterError(f"p must be < 1, got {p}")
        if not theta > 0.0:
            raise ParameterError(f"theta must be > 0, got {theta}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "theta", theta)

    @property
    def a(self) -> float:
        """``theta / (theta + 1)``, the weight on ``y`` inside the kernel."""
        return self.theta / (self.theta + 1.0)


def _as_y(y, strict: bool = False):
    arr = np.asarray(y, dtype=float)
    if strict:
        if np.any(~(arr > 0)):
            raise DomainError("y must be > 0")
    elif np.any(~(arr >= 0)):
        raise DomainError("y must be >= 0")
    return arr


def _out(value, like):
    return float(value) if np.ndim(like) == 0 else value


def lindley_kernel(theta: float, y):
    """Lindley survival function ``(1 + theta*y/(theta+1)) exp(-theta*y)``."""
    y = np.asarray(y, dtype=float)
    with np.errstate(over="ignore", under="ignore"):
        c = (1.0 + theta * y / (theta + 1.0)) * np.exp(-theta * y)
    return np.where(theta * y > _TAIL_CUTOFF, 0.0, c)


def _lindley_cdf(theta: float, y):
    # 1 - c(y) without cancellation near y = 0
    ty = theta * y
    with np.errstate(under="ignore"):
        return -np.expm1(-ty) - y * theta / (theta + 1.0) * np.exp(-ty)


def pdf(params: LGParams, y):
    """Density ``f(y)``.

    Parameters
    ----------
    params : LGParams
    y : float or array_like
        Nonnegative evaluation points.

    Returns
    -------
    float or ndarray
        ``theta^2/(theta+1) (1-p) (1+y) e^{-theta y} / (1 - p c(y))^2``.
    """
    yy = _as_y(y)
    p, th = params.p, params.theta
    c = lindley_kernel(th, yy)
    with np.errstate(under="ignore"):
        num = th * th / (th + 1.0) * (1.0 - p) * (1.0 + yy) * np.exp(-th * yy)
    out = np.where(th * yy > _TAIL_CUTOFF, 0.0, num / (1.0 - p * c) ** 2)
    return _out(out, y)


def logpdf(params: LGParams, y):
    yy = _as_y(y)
    p, th = params.p, params.theta
    c = lindley_kernel(th, yy)
    out = (
        2.0 * np.log(th) - np.log1p(th) + np.log1p(-p) + np.log1p(yy) - th * yy
        - 2.0 * np.log1p(-p * c)
    )
    return _out(out, y)


def cdf(params: LGParams, y):
    """Distribution function ``(1 - c) / (1 - p c)``; exactly 1 once ``theta*y > 700``."""
    yy = _as_y(y)
    p, th = params.p, params.theta
    c = lindley_kernel(th, yy)
    out = _lindley_cdf(th, yy) / (1.0 - p * c)
    out = np.where(th * yy > _TAIL_CUTOFF, 1.0, np.clip(out, 0.0, 1.0))
    return _out(out, y)


def survival(params: LGParams, y):
    """Survival function ``(1 - p) c / (1 - p c)``."""
    yy = _as_y(y)
    p = params.p
    c = lindley_kernel(params.theta, yy)
    out = (1.0 - p) * c / (1.0 - p * c)
    return _out(out, y)


def hazard(params: LGParams, y):
    """Failure rate ``theta^2 (1+y) / ((theta y + theta + 1)(1 - p c))``.

    Starts at ``theta^2 / ((theta+1)(1-p))`` and tends to ``theta``.
    """
    yy = _as_y(y)
    p, th = params.p, params.theta
    c = lindley_kernel(th, yy)
    out = th * th * (1.0 + yy) / ((th * yy + th + 1.0) * (1.0 - p * c))
    return _out(out, y)


def reversed_hazard(params: LGParams, y):
    """Reversed failure rate ``f(y) / F(y)``; diverges as ``y -> 0+``."""
    yy = _as_y(y, strict=True)
    p, th = params.p, params.theta
    c = lindley_kernel(th, yy)
    with np.errstate(under="ignore"):
        num = th * th / (th + 1.0) * (1.0 - p) * (1.0 + yy) * np.exp(-th * yy)
    out = num / ((1.0 - p * c) * _lindley_cdf(th, yy))
    return _out(out, y)


def quantile(params: LGParams, xi, tol: float = 1e-12, max_iter: int = 400):
    """Solve ``F(x) = xi`` for ``x``.

    The root is bracketed on ``[0, U]`` with ``U`` doubled from
    ``1/theta`` until ``F(U) > xi``, narrowed by bisection to width ``tol``
    and finished with two Newton steps.  Vectorized over ``xi``.

    Raises
    ------
    DomainError
        If any ``xi`` is outside ``(0, 1)``.
    ConvergenceError
        If bracketing or bisection exceeds ``max_iter`` steps.
    """
    q = np.asarray(xi, dtype=float)
    if np.any(~((q > 0) & (q < 1))):
        raise DomainError("xi must lie in (0, 1)")
    if not tol > 0:
        raise DomainError("tol must be positive")
    shape = q.shape
    q = q.ravel()

    hi = np.full_like(q, 1.0 / params.theta)
    for _ in range(max_iter):
        low = cdf(params, hi) <= q
        if not low.any():
            break
        hi = np.where(low, 2.0 * hi, hi)
    else:
        raise ConvergenceError("quantile bracket expansion exceeded its iteration cap")

    lo = np.zeros_like(q)
    for _ in range(max_iter):
        if np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        below = cdf(params, mid) < q
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    else:
        raise ConvergenceError("quantile bisection exceeded its iteration cap")

    x = 0.5 * (lo + hi)
    for _ in range(2):
        dens = pdf(params, x)
        step = np.where(dens > 0, (cdf(params, x) - q) / np.where(dens > 0, dens, 1.0), 0.0)
        cand = x - step
        x = np.where((cand >= lo) & (cand <= hi) & (cand > 0), cand, x)
    x = np.where(x > 0, x, hi)
    x = x.reshape(shape)
    return _out(x, xi)


def _lindley_variates(theta: float, size: int, rng: np.random.Generator) -> np.ndarray:
    # mixture: Exp(theta) w.p. theta/(theta+1), Gamma(2, rate theta) otherwise
    use_exp = rng.random(size) < theta / (theta + 1.0)
    shape = np.where(use_exp, 1.0, 2.0)
    return rng.gamma(shape, 1.0 / theta, size)


def sample(params: LGParams, n: int, seed=None, method: str = "auto") -> Sample:
    """Draw ``n`` i.i.d. LG variates.

    Parameters
    ----------
    params : LGParams
    n : int
        Number of draws, at least 1.
    seed : int, numpy Generator or None
        Either a seed for a fresh ``numpy.random.default_rng`` or a
        caller-owned generator.  No global RNG state is touched.
    method : {"auto", "compound", "inverse"}
        ``compound`` draws ``N ~ Geometric(1-p)`` and returns the minimum
        of ``N`` Lindley variates (needs ``0 < p < 1``); ``inverse`` pushes
        uniforms through :func:`quantile`.  ``auto`` uses compounding when
        it exists and inverse transform otherwise.

    Raises
    ------
    ParameterError
        If compounding is requested with ``p <= 0``.
    """
    n = int(n)
    if n < 1:
        raise DomainError("n must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if method == "auto":
        method = "compound" if 0.0 < params.p < 1.0 else "inverse"

    if method == "compound":
        if not 0.0 < params.p < 1.0:
            raise ParameterError("compounding representation needs 0 < p < 1")
        counts = rng.geometric(1.0 - params.p, size=n)
        draws = _lindley_variates(params.theta, int(counts.sum()), rng)
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        values = np.minimum.reduceat(draws, starts)
    elif method == "inverse":
        u = rng.random(n)
        # random() can return exactly 0
        u = np.where(u > 0, u, np.nextafter(0.0, 1.0))
        values = np.asarray(quantile(params, u), dtype=float).reshape(n)
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    return Sample.from_values(values)


# ---------------------------------------------------------------------------
# shape classification
# ---------------------------------------------------------------------------


class ClassificationWarning(UserWarning):
    """Numeric shape scan disagrees with the threshold rule."""


class DensityKind(str, enum.Enum):
    DECREASING = "decreasing"
    UNIMODAL = "unimodal"


class HazardKind(str, enum.Enum):
    BATHTUB = "bathtub"
    INCREASING_THEN_BATHTUB = "increasing_then_bathtub"


@dataclass(frozen=True)
class DensityShape:
    kind: DensityKind
    mode: float | None
    threshold: float

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "mode": self.mode, "threshold": self.threshold}


@dataclass(frozen=True)
class HazardShape:
    """Hazard shape.

    ``kind`` is the branch selected by the ``p`` versus ``1/(1+theta^2)``
    rule.  ``turning_points`` and ``slope_signs`` come from the numeric scan
    of the sign of ``h'`` and are authoritative; ``consistent`` records
    whether the scan matches the branch's predicted pattern.
    """

    kind: HazardKind
    turning_points: tuple[float, ...]
    slope_signs: tuple[int, ...]
    threshold: float
    consistent: bool = field(default=True)

    @property
    def pattern(self) -> str:
        names = {
            (1,): "increasing",
            (-1,): "decreasing",
            (-1, 1): "bathtub",
            (1, -1): "upside_down_bathtub",
            (1, -1, 1): "increasing_then_bathtub",
        }
        return names.get(self.slope_signs, "".join("+" if s > 0 else "-" for s in self.slope_signs))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "threshold": self.threshold,
            "numeric_pattern": self.pattern,
            "turning_points": list(self.turning_points),
            "consistent": self.consistent,
        }


def density_threshold(theta: float) -> float:
    """``(1 - theta^2) / (1 + theta^2)``: above it the density is decreasing."""
    return (1.0 - theta * theta) / (1.0 + theta * theta)


def hazard_threshold(theta: float) -> float:
    """``1 / (1 + theta^2)``: above it the hazard starts out decreasing."""
    return 1.0 / (1.0 + theta * theta)


def density_slope_numerator(params: LGParams, y):
    """Sign-carrying numerator of ``d/dy log f``, scaled by ``exp(-theta y)``.

    Equals ``exp(-theta y) * (g1(y) - g2(y))`` with
    ``g1 = e^{theta y}(1+theta)(1-theta-theta y)`` and
    ``g2 = p(1 + (1+y)^2 theta^2)``; the denominator of the derivative is
    positive, so the sign of this quantity is the sign of ``f'``.
    """
    p, th = params.p, params.theta
    y = np.asarray(y, dtype=float)
    with np.errstate(under="ignore"):
        return (1.0 + th) * (1.0 - th - th * y) - p * (1.0 + (1.0 + y) ** 2 * th * th) * np.exp(-th * y)


def hazard_slope_numerator(params: LGParams, y):
    """``exp(-theta y) * (h1(y) - h2(y))``; its sign is the sign of ``h'``."""
    p, th = params.p, params.theta
    y = np.asarray(y, dtype=float)
    with np.errstate(under="ignore"):
        return (1.0 + th) - p * (1.0 + th + th * y) * (1.0 + (1.0 + y) ** 2 * th * th) * np.exp(-th * y)


def _scan_grid(theta: float, points: int = 4096) -> np.ndarray:
    return np.concatenate(([0.0], np.logspace(-8, np.log10(50.0), points - 1) / theta))


def _sign_changes(func, grid):
    vals = func(grid)
    signs = np.sign(vals)
    # zeros inherit the sign to their right so touching points do not count twice
    for i in range(len(signs) - 2, -1, -1):
        if signs[i] == 0:
            signs[i] = signs[i + 1]
    roots, pattern = [], []
    start = 0
    while start < len(signs) and signs[start] == 0:
        start += 1
    if start == len(signs):
        return roots, pattern
    pattern.append(int(signs[start]))
    for i in range(start, len(signs) - 1):
        if signs[i] != signs[i + 1] and signs[i + 1] != 0:
            a, b = grid[i], grid[i + 1]
            if vals[i] == 0:
                root = a
            else:
                root = brentq(lambda t: float(func(t)), a, b, xtol=1e-14, rtol=4 * np.finfo(float).eps)
            roots.append(float(root))
            pattern.append(int(signs[i + 1]))
    return roots, pattern


def classify_density(params: LGParams, points: int = 4096) -> DensityShape:
    """Decreasing iff ``p > (1 - theta^2)/(1 + theta^2)``, unimodal otherwise.

    For the unimodal branch the mode is the root of
    :func:`density_slope_numerator`, located on a log-spaced scan of
    ``(0, 50/theta)`` and refined by Brent's method.  At the boundary value
    of ``p`` the slope numerator vanishes at zero and the mode is ``0.0``.
    """
    thr = density_threshold(params.theta)
    if params.p > thr:
        return DensityShape(DensityKind.DECREASING, None, thr)
    grid = _scan_grid(params.theta, points)
    roots, pattern = _sign_changes(lambda t: density_slope_numerator(params, t), grid)
    if pattern and pattern[0] > 0 and roots:
        mode = roots[0]
    else:
        mode = 0.0
    return DensityShape(DensityKind.UNIMODAL, mode, thr)


_EXPECTED_HAZARD = {
    HazardKind.BATHTUB: (-1, 1),
    HazardKind.INCREASING_THEN_BATHTUB: (1, -1, 1),
}


def classify_hazard(params: LGParams, points: int = 4096, warn: bool = True) -> HazardShape:
    """Classify the failure-rate shape.

    The branch is ``BATHTUB`` when ``p > 1/(1+theta^2)`` and
    ``INCREASING_THEN_BATHTUB`` otherwise.  Independently, the sign of
    ``h'`` is scanned on ``points`` log-spaced abscissae over ``(0, 50/theta)``
    and each sign change is refined by bisection.  For ``p <= 0`` (and for
    part of ``0 < p <= 1/(1+theta^2)``) the hazard is simply increasing,
    which matches neither branch label; such cases are returned with
    ``consistent=False`` and a :class:`ClassificationWarning`.
    """
    thr = hazard_threshold(params.theta)
    kind = HazardKind.BATHTUB if params.p > thr else HazardKind.INCREASING_THEN_BATHTUB
    grid = _scan_grid(params.theta, points)
    roots, pattern = _sign_changes(lambda t: hazard_slope_numerator(params, t), grid)
    consistent = tuple(pattern) == _EXPECTED_HAZARD[kind]
    if warn and not consistent:
        warnings.warn(
            f"hazard scan for p={params.p}, theta={params.theta} gives slope signs {pattern}, "
            f"branch {kind.value} predicts {list(_EXPECTED_HAZARD[kind])}",
            ClassificationWarning,
            stacklevel=2,
        )
    return HazardShape(kind, tuple(roots), tuple(pattern), thr, consistent)
