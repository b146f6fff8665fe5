"""Scalar chaos-game orbit kernel shared by the sampler and renderer.

JIT-compiled when numba is available; the plain-Python path computes the
identical sequence of doubles, so both give bit-equal orbits.
"""

from __future__ import annotations

import math

import numpy as np

DIVERGENCE_LIMIT = 1e8


def orbit_fill(coeffs, idx, out, limit):
    # Returns -1 on success, else the recurrence step that escaped.
    x = 0.0
    y = 0.0
    out[0, 0] = x
    out[0, 1] = y
    for t in range(idx.shape[0]):
        j = idx[t]
        xn = coeffs[j, 0] * x + coeffs[j, 1] * y + coeffs[j, 4]
        yn = coeffs[j, 2] * x + coeffs[j, 3] * y + coeffs[j, 5]
        if not (math.isfinite(xn) and math.isfinite(yn)):
            return t
        if abs(xn) > limit or abs(yn) > limit:
            return t
        x = xn
        y = yn
        out[t + 1, 0] = x
        out[t + 1, 1] = y
    return -1


def probe_orbit(coeffs, idx, points, limit):
    # One-pass orbit audit. Fills `points` with the second half of the
    # orbit and returns (escaped, lyapunov, extent): mean log tangent
    # growth per step and the bounding-box extent of that second half.
    x = 0.0
    y = 0.0
    ux = 1.0
    uy = 0.0
    lyap = 0.0
    n = idx.shape[0]
    half = n - points.shape[0]
    xmin = xmax = ymin = ymax = 0.0
    for t in range(n):
        j = idx[t]
        a = coeffs[j, 0]
        b = coeffs[j, 1]
        c = coeffs[j, 2]
        d = coeffs[j, 3]
        xn = a * x + b * y + coeffs[j, 4]
        yn = c * x + d * y + coeffs[j, 5]
        if not (math.isfinite(xn) and math.isfinite(yn)):
            return True, 0.0, 0.0
        if abs(xn) > limit or abs(yn) > limit:
            return True, 0.0, 0.0
        x = xn
        y = yn
        vx = a * ux + b * uy
        vy = c * ux + d * uy
        norm = math.sqrt(vx * vx + vy * vy)
        if norm > 0.0:
            lyap += math.log(norm)
            ux = vx / norm
            uy = vy / norm
        else:
            # Tangent annihilated by a rank-deficient map: maximal
            # contraction along this step.
            lyap += -50.0
            ux = 1.0
            uy = 0.0
        if t >= half:
            points[t - half, 0] = x
            points[t - half, 1] = y
            if t == half:
                xmin = xmax = x
                ymin = ymax = y
            else:
                xmin = min(xmin, x)
                xmax = max(xmax, x)
                ymin = min(ymin, y)
                ymax = max(ymax, y)
    return False, lyap / n, max(xmax - xmin, ymax - ymin)


try:  # pragma: no cover - exercised implicitly
    import numba

    orbit_fill = numba.njit(cache=True, nogil=True)(orbit_fill)
    probe_orbit = numba.njit(cache=True, nogil=True)(probe_orbit)
except ImportError:  # pragma: no cover
    pass


def warmup() -> None:
    """Trigger JIT compilation outside any timed region."""
    coeffs = np.array([[0.5, 0.0, 0.0, 0.5, 0.0, 0.0]])
    idx = np.zeros(4, dtype=np.int64)
    out = np.empty((5, 2))
    orbit_fill(coeffs, idx, out, DIVERGENCE_LIMIT)
    probe_orbit(coeffs, idx, np.empty((2, 2)), DIVERGENCE_LIMIT)
