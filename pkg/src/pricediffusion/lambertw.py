"""Principal branch of the Lambert-W function.

Two entry points:

* :func:`lambert_w0` solves ``w * exp(w) = x`` for a real scalar ``x >= -1/e``
  with Halley's method and reports the iteration count and residual.
* :func:`lambert_w0_exp` returns ``W(exp(a))`` without ever forming
  ``exp(a)``; every closed form in this package goes through it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["DomainError", "WResult", "lambert_w0", "lambert_w0_exp"]

_INV_E = math.exp(-1.0)
_MAX_ITER = 50
_RESIDUAL_TOL = 1e-14


class DomainError(ValueError):
    """Argument outside the domain where the quantity is defined."""


@dataclass(frozen=True)
class WResult:
    value: float
    iterations: int
    residual: float


def _initial_guess(x: float) -> float:
    if x < -0.25:
        # branch-point series in p = sqrt(2(e x + 1))
        p = math.sqrt(max(2.0 * (math.e * x + 1.0), 0.0))
        return -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    if x < 3.0:
        return math.log1p(x)
    l1 = math.log(x)
    l2 = math.log(l1)
    return l1 - l2 + l2 / l1


def lambert_w0(x: float) -> WResult:
    """Evaluate W0(x) by Halley iteration.

    Parameters
    ----------
    x : float
        Argument, ``x >= -1/e``.

    Returns
    -------
    WResult
        ``value`` with ``value * exp(value) == x`` up to ``residual``.

    Raises
    ------
    DomainError
        If ``x < -1/e`` or ``x`` is not finite.
    """
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        raise DomainError(f"lambert_w0 needs a finite argument, got {x}")
    if x < -_INV_E:
        if x < -_INV_E * (1.0 + 1e-15):
            raise DomainError(f"lambert_w0 is real only for x >= -1/e, got {x}")
        x = -_INV_E
    if x == 0.0:
        return WResult(0.0, 0, 0.0)
    if x == -_INV_E:
        return WResult(-1.0, 0, abs(-_INV_E - x))

    tol = _RESIDUAL_TOL * abs(x)
    w = _initial_guess(x)
    it = 0
    while it < _MAX_ITER:
        ew = math.exp(w)
        f = w * ew - x
        if abs(f) <= tol:
            break
        wp1 = w + 1.0
        if wp1 == 0.0:
            break
        dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        w -= dw
        it += 1
        if abs(dw) <= 4.0 * np.finfo(float).eps * abs(w):
            break
    residual = abs(w * math.exp(w) - x)
    return WResult(w, it, residual)


def lambert_w0_exp(a):
    """Return ``W(exp(a))`` for real ``a`` (scalar or array), overflow-free.

    Writing ``W(exp(a)) = exp(u)``, the defining identity becomes
    ``u + exp(u) = a``. That function of ``u`` is convex and increasing, so
    Newton's method started to the right of the root (``u = a`` when
    ``a <= 1``, ``u = log(a)`` otherwise) decreases monotonically onto it.
    """
    arr = np.asarray(a, dtype=float)
    u = np.where(arr <= 1.0, arr, np.log(np.maximum(arr, 1.0)))
    for _ in range(_MAX_ITER):
        eu = np.exp(u)
        h = u + eu - arr
        step = h / (1.0 + eu)
        u = u - step
        if np.all(np.abs(step) <= 2.0 * np.finfo(float).eps * np.maximum(1.0, np.abs(u))):
            break
    out = np.exp(u)
    if np.ndim(a) == 0:
        return float(out)
    return out
