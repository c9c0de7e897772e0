"""Euclidean projection onto the probability simplex, row by row."""

import numpy as np


def project_rows(v: np.ndarray) -> np.ndarray:
    """Project every row of ``v`` onto {q >= 0, sum q = 1} (sort-based)."""
    v = np.atleast_2d(np.asarray(v, dtype=float))
    n, k = v.shape
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    idx = np.arange(1, k + 1)
    cond = u - css / idx > 0
    rho = k - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(n), rho] / (rho + 1)
    return np.maximum(v - theta[:, None], 0.0)
