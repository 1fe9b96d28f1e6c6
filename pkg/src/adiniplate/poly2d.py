"""Dense bivariate polynomial helpers on the reference square [-1,1]^2.

A polynomial is stored as a coefficient array ``c`` with ``c[i, j]`` the
coefficient of ``xi**i * eta**j``.  All routines are shape-agnostic so the
same code serves the Adini space (max partial degree 3 in one variable)
and bicubic (Q3) polynomials.
"""

from __future__ import annotations

import numpy as np


def poly_eval(c: np.ndarray, xi, eta):
    """Evaluate c at points (xi, eta); xi/eta may be arrays."""
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    out = np.zeros(np.broadcast(xi, eta).shape)
    for i in range(c.shape[0]):
        for j in range(c.shape[1]):
            if c[i, j] != 0.0:
                out = out + c[i, j] * xi**i * eta**j
    return out


def poly_deriv(c: np.ndarray, dx: int, dy: int) -> np.ndarray:
    """Partial derivative d^(dx+dy) / dxi^dx deta^dy."""
    out = c
    for _ in range(dx):
        n = out.shape[0]
        if n == 1:
            return np.zeros((1, out.shape[1]))
        fac = np.arange(1, n)[:, None]
        out = out[1:, :] * fac
    for _ in range(dy):
        n = out.shape[1]
        if n == 1:
            return np.zeros((out.shape[0], 1))
        fac = np.arange(1, n)[None, :]
        out = out[:, 1:] * fac
    return out


def poly_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.zeros((a.shape[0] + b.shape[0] - 1, a.shape[1] + b.shape[1] - 1))
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            if a[i, j] != 0.0:
                out[i:i + b.shape[0], j:j + b.shape[1]] += a[i, j] * b
    return out


def _mono_integral_1d(k: int) -> float:
    # integral of t^k over [-1, 1]
    return 2.0 / (k + 1) if k % 2 == 0 else 0.0


def poly_integral(c: np.ndarray) -> float:
    """Exact integral of c over the reference square [-1,1]^2."""
    wx = np.array([_mono_integral_1d(i) for i in range(c.shape[0])])
    wy = np.array([_mono_integral_1d(j) for j in range(c.shape[1])])
    return float(wx @ c @ wy)
