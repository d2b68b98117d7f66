"""Central finite differences for gradients and Hessians."""
from __future__ import annotations

import numpy as np

__all__ = ["fd_gradient", "fd_hessian"]


def _steps(x, rel_step):
    x = np.asarray(x, dtype=float)
    return rel_step * np.maximum(np.abs(x), 1e-2)


def fd_gradient(fun, x, rel_step: float = 1e-6) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    h = _steps(x, rel_step)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h[i]
        g[i] = (fun(x + e) - fun(x - e)) / (2.0 * h[i])
    return g


def fd_hessian(fun, x, rel_step: float = 1e-4) -> np.ndarray:
    """Symmetric central-difference Hessian of a scalar function."""
    x = np.asarray(x, dtype=float)
    h = _steps(x, rel_step)
    k = x.size
    f0 = fun(x)
    hess = np.empty((k, k))
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = h[i]
        hess[i, i] = (fun(x + ei) - 2.0 * f0 + fun(x - ei)) / h[i] ** 2
        for j in range(i + 1, k):
            ej = np.zeros(k)
            ej[j] = h[j]
            val = (fun(x + ei + ej) - fun(x + ei - ej) - fun(x - ei + ej) + fun(x - ei - ej)) / (4.0 * h[i] * h[j])
            hess[i, j] = hess[j, i] = val
    return hess
