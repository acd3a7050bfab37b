"""Least-squares fitting of the diffusion law to adoption/price series.

Alignment convention: the price of period ``k`` drives the adoption that
happens during period ``k``, so with observed fractions ``F_1..F_n`` and
prices ``x_1..x_n`` the model path is

    F^_1 = F_1 (or a free initial fraction),  F^_k = step(F^_{k-1}, x_k).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .diffusion import ModelParams, _check_fraction

__all__ = [
    "AdoptionSeries",
    "FitOptions",
    "FitResult",
    "DegenerateDataError",
    "predict",
    "nrmse",
    "fit",
]

MIN_PERIODS = 4
_PARAM_NAMES = ("p", "q", "alpha", "f0")


class DegenerateDataError(ValueError):
    """Adoption data with zero spread; the normalized error is undefined."""


@dataclass(frozen=True)
class AdoptionSeries:
    periods: tuple
    prices: np.ndarray
    adoption: np.ndarray

    def __post_init__(self):
        prices = np.array(self.prices, dtype=float)
        adoption = np.array(self.adoption, dtype=float)
        if len(prices) != len(adoption) or len(self.periods) != len(adoption):
            raise ValueError("periods, prices and adoption must have equal length")
        if len(adoption) < MIN_PERIODS:
            raise ValueError(f"need at least {MIN_PERIODS} periods, got {len(adoption)}")
        if np.any(~(prices > 0)):
            raise ValueError("prices must be > 0")
        if np.any(~(adoption >= 0)) or np.any(~(adoption <= 1)):
            raise ValueError("adoption fractions must lie in [0, 1]")
        if np.any(np.diff(adoption) < 0):
            raise ValueError("adoption must be nondecreasing")
        prices.setflags(write=False)
        adoption.setflags(write=False)
        object.__setattr__(self, "periods", tuple(self.periods))
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "adoption", adoption)

    def __len__(self):
        return len(self.adoption)


def _step_scalar(p, q, alpha, F, price):
    x = p + q * F - alpha * price
    if x >= 0:
        r = 1.0 / (1.0 + math.exp(-x))
    else:
        z = math.exp(x)
        r = z / (1.0 + z)
    return min(F + (1.0 - F) * r, 1.0)


def predict(params: ModelParams, F0: float, prices: Sequence[float]) -> np.ndarray:
    """Deterministic model path ``[F0, F1, ..., Fn]`` under the given prices."""
    _check_fraction(F0, "F0")
    out = np.empty(len(prices) + 1)
    out[0] = F = float(F0)
    p, q, a = params.p, params.q, params.alpha
    for k, price in enumerate(prices):
        F = _step_scalar(p, q, a, F, float(price))
        out[k + 1] = F
    return out


def nrmse(data, model) -> float:
    """``||data - model|| / ||data - mean(data)||``."""
    data = np.asarray(data, dtype=float)
    model = np.asarray(model, dtype=float)
    if data.shape != model.shape or data.ndim != 1 or len(data) < 2:
        raise ValueError("data and model must be 1-D sequences of equal length >= 2")
    denom = np.linalg.norm(data - data.mean())
    if np.ptp(data) == 0.0 or denom == 0.0:
        raise DegenerateDataError("data are constant; NRMSE undefined")
    return float(np.linalg.norm(data - model) / denom)


@dataclass(frozen=True)
class FitOptions:
    """Which parameters to estimate and how.

    Parameters not listed in ``free`` stay at their value in ``fixed``
    (``f0`` defaults to the first observation).
    """

    free: tuple = ("p", "q", "alpha")
    fixed: dict = field(default_factory=dict)
    n_starts: int = 16
    seed: int | None = 0
    xatol: float = 1e-9
    fatol: float = 1e-15
    maxiter: int = 20000
    p_range: tuple = (-5.0, 5.0)
    q_range: tuple = (0.0, 10.0)
    alpha_range: tuple = (0.01, 10.0)

    def __post_init__(self):
        bad = set(self.free) - set(_PARAM_NAMES)
        if bad:
            raise ValueError(f"unknown parameters {sorted(bad)}")
        if not self.free:
            raise ValueError("at least one parameter must be free")
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")


@dataclass(frozen=True)
class FitResult:
    params: ModelParams
    f0: float
    nrmse: float
    r_squared: float
    residuals: np.ndarray
    converged: bool
    multistart_best_of: int
    sse: float
    evaluations: int
    fitted: np.ndarray = None


class _Objective:
    """Sum of squared errors in an unconstrained-ish coordinate system.

    Coordinates: ``p`` as is, ``q`` as is (bounded below by 0), ``alpha``
    as ``log(alpha)``, ``f0`` as is (bounded to [0, 1]).
    """

    def __init__(self, series: AdoptionSeries, options: FitOptions):
        self.data = series.adoption
        self.prices = series.prices[1:]
        self.free = tuple(n for n in _PARAM_NAMES if n in options.free)
        base = {"p": 0.0, "q": 0.0, "alpha": 1.0, "f0": float(series.adoption[0])}
        base.update(options.fixed)
        self.base = base
        self.evaluations = 0

    def unpack(self, x):
        vals = dict(self.base)
        for name, v in zip(self.free, x):
            vals[name] = math.exp(v) if name == "alpha" else float(v)
        return vals

    def path(self, vals):
        F = min(max(vals["f0"], 0.0), 1.0)
        out = np.empty(len(self.data))
        out[0] = F
        p, q, a = vals["p"], max(vals["q"], 0.0), vals["alpha"]
        for k, price in enumerate(self.prices):
            F = _step_scalar(p, q, a, F, price)
            out[k + 1] = F
        return out

    def __call__(self, x):
        self.evaluations += 1
        vals = self.unpack(x)
        if not all(math.isfinite(v) for v in vals.values()):
            return math.inf
        r = self.path(vals) - self.data
        return float(r @ r)

    def bounds(self):
        table = {"p": (None, None), "q": (0.0, None), "alpha": (None, None), "f0": (0.0, 1.0)}
        return [table[n] for n in self.free]


def _starts(obj: _Objective, options: FitOptions, rng) -> np.ndarray:
    cols = []
    for name in obj.free:
        if name == "p":
            cols.append(rng.uniform(*options.p_range, options.n_starts))
        elif name == "q":
            cols.append(rng.uniform(*options.q_range, options.n_starts))
        elif name == "alpha":
            lo, hi = np.log(options.alpha_range)
            cols.append(rng.uniform(lo, hi, options.n_starts))
        else:
            cols.append(np.full(options.n_starts, obj.base["f0"]))
    return np.column_stack(cols)


def fit(series: AdoptionSeries, options: FitOptions | None = None,
        callback=None) -> FitResult:
    """Multi-start Nelder-Mead least squares on adoption levels.

    ``callback(run_index, x)`` is forwarded to each optimizer run and
    receives the current best vertex in internal coordinates.
    """
    options = options or FitOptions()
    if np.ptp(series.adoption) == 0.0:
        raise DegenerateDataError("adoption series is constant; nothing to fit")
    obj = _Objective(series, options)
    rng = np.random.default_rng(options.seed)

    best = None
    for i, x0 in enumerate(_starts(obj, options, rng)):
        cb = None if callback is None else (lambda xk, i=i: callback(i, xk))
        res = minimize(obj, x0, method="Nelder-Mead", bounds=obj.bounds(), callback=cb,
                       options={"xatol": options.xatol, "fatol": options.fatol,
                                "maxiter": options.maxiter, "maxfev": 2 * options.maxiter,
                                "adaptive": len(x0) > 2})
        if best is None or res.fun < best.fun:
            best = res

    vals = obj.unpack(best.x)
    model = obj.path(vals)
    err = nrmse(series.adoption, model)
    params = ModelParams(vals["p"], max(vals["q"], 0.0), vals["alpha"])
    return FitResult(
        params=params,
        f0=float(model[0]),
        nrmse=err,
        r_squared=1.0 - err ** 2,
        residuals=model - series.adoption,
        converged=bool(best.success),
        multistart_best_of=options.n_starts,
        sse=float(best.fun),
        evaluations=obj.evaluations,
        fitted=model,
    )
