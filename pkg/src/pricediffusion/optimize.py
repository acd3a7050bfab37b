"""Golden-section maximization over many independent brackets at once."""

from __future__ import annotations

import math

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0


def golden_max(func, lo, hi, tol):
    """Maximize ``func`` on each bracket ``[lo[i], hi[i]]``.

    ``func`` takes an array of abscissae (same shape as ``lo``) and returns
    the objective elementwise. Iterates until every bracket is narrower than
    ``tol``. Returns ``(x, fx)``; ``x`` is the best point examined, which
    includes both bracket ends so that boundary maxima are found exactly.
    """
    a = np.array(lo, dtype=float)
    b = np.array(hi, dtype=float)
    width = float(np.max(b - a)) if a.size else 0.0
    n = 0 if width <= tol else int(math.ceil(math.log(tol / width) / math.log(INV_PHI)))

    c = a + INV_PHI2 * (b - a)
    d = a + INV_PHI * (b - a)
    fc = func(c)
    fd = func(d)
    for _ in range(n):
        left = fc >= fd  # ties move left: smallest-price convention
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        c_new = np.where(left, a + INV_PHI2 * (b - a), d)
        d_new = np.where(left, c, a + INV_PHI * (b - a))
        # one fresh evaluation per bracket per iteration
        fresh = np.where(left, c_new, d_new)
        f_fresh = func(fresh)
        fc, fd = np.where(left, f_fresh, fd), np.where(left, fc, f_fresh)
        c, d = c_new, d_new

    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    cands = np.stack([lo, c, d, hi])
    vals = np.stack([func(lo), fc, fd, func(hi)])
    best = np.argmax(vals, axis=0)
    idx = np.arange(cands.shape[1]) if cands.ndim == 2 else None
    if idx is None:
        return cands[best], vals[best]
    return cands[best, idx], vals[best, idx]
