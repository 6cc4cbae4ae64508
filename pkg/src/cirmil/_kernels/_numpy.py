"""NumPy fallback kernels, vectorized across paths.

Callers guarantee theta >= 1 and 4 alpha mu >= sigma^2; the update is then
a sum of non-negative terms and every state stays >= 0 (also in floats).
"""

from __future__ import annotations

import numpy as np


def _coeffs(alpha, mu, sigma, theta, dt):
    c_lin = (theta - 1.0) * alpha * dt
    c_const = (alpha * mu - 0.25 * sigma * sigma) * dt
    inv = 1.0 / (1.0 + alpha * theta * dt)
    return c_lin, c_const, inv, 0.5 * sigma


def terminal_batch(alpha, mu, sigma, theta, dt, x0, dw):
    """Terminal state and per-path minimum after one implicit Milstein pass.

    dw: (n_paths, n_steps) array of N(0, dt) increments, one row per path.
    Returns (terminal, running_min), each of shape (n_paths,).
    """
    dw = np.ascontiguousarray(dw, dtype=np.float64)
    n_steps = dw.shape[1]
    c_lin, c_const, inv, half_sigma = _coeffs(alpha, mu, sigma, theta, dt)
    x = np.full(dw.shape[0], float(x0))
    x_min = x.copy()
    for j in range(n_steps):
        r = np.sqrt(x) + half_sigma * dw[:, j]
        x = (c_lin * x + c_const + r * r) * inv
        np.minimum(x_min, x, out=x_min)
    return x, x_min


def record_batch(alpha, mu, sigma, theta, dt, x0, dw, record_steps):
    """States at selected step counts (0 = start value).

    record_steps must be strictly increasing ints within [0, n_steps].
    Returns an (n_paths, len(record_steps)) array.
    """
    dw = np.ascontiguousarray(dw, dtype=np.float64)
    n_paths, n_steps = dw.shape
    steps = np.asarray(record_steps, dtype=np.int64)
    if steps.size and (
        steps[0] < 0 or steps[-1] > n_steps or np.any(np.diff(steps) <= 0)
    ):
        raise ValueError("record_steps must be strictly increasing within [0, n_steps]")
    c_lin, c_const, inv, half_sigma = _coeffs(alpha, mu, sigma, theta, dt)
    out = np.empty((n_paths, steps.size))
    x = np.full(n_paths, float(x0))
    k = 0
    if k < steps.size and steps[k] == 0:
        out[:, k] = x
        k += 1
    for j in range(n_steps):
        r = np.sqrt(x) + half_sigma * dw[:, j]
        x = (c_lin * x + c_const + r * r) * inv
        if k < steps.size and steps[k] == j + 1:
            out[:, k] = x
            k += 1
    return out
