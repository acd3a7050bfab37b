"""Price-augmented logit-hazard diffusion law.

A non-adopter adopts in a period with probability

    R(F, price) = exp(x) / (1 + exp(x)),   x = p + q F - alpha * price,

so the adopted fraction evolves as ``F' = F + (1 - F) R(F, price)``.
All functions accept scalars or numpy arrays for ``F`` and ``price``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .lambertw import DomainError

__all__ = [
    "ModelParams",
    "MarketSpec",
    "Trajectory",
    "DomainError",
    "hazard",
    "step",
    "simulate",
    "incremental_profit",
    "normalize_alpha",
]


@dataclass(frozen=True)
class ModelParams:
    """Diffusion coefficients. ``p`` may be negative; ``q >= 0``; ``alpha > 0``."""

    p: float
    q: float
    alpha: float = 1.0

    def __post_init__(self):
        for name in ("p", "q", "alpha"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.q < 0:
            raise ValueError(f"q must be >= 0, got {self.q}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")


@dataclass(frozen=True)
class MarketSpec:
    """A pricing problem: diffusion law, unit cost and number of stages."""

    params: ModelParams
    cost: float = 0.0
    horizon: int = 1

    def __post_init__(self):
        if not np.isfinite(self.cost) or self.cost < 0:
            raise ValueError(f"cost must be finite and >= 0, got {self.cost}")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ValueError(f"horizon must be a positive integer, got {self.horizon}")

    def with_innovation(self, p: float) -> "MarketSpec":
        return replace(self, params=replace(self.params, p=p))


@dataclass(frozen=True)
class Trajectory:
    adoption: np.ndarray
    prices: np.ndarray
    profits: np.ndarray = field(default=None)

    def __post_init__(self):
        adoption = np.array(self.adoption, dtype=float)
        prices = np.array(self.prices, dtype=float)
        profits = (np.zeros_like(prices) if self.profits is None
                   else np.array(self.profits, dtype=float))
        if len(adoption) != len(prices) + 1:
            raise ValueError("adoption must have exactly one more entry than prices")
        if len(profits) != len(prices):
            raise ValueError("profits must have one entry per price")
        for arr in (adoption, prices, profits):
            arr.setflags(write=False)
        object.__setattr__(self, "adoption", adoption)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "profits", profits)

    @property
    def new_adopters(self) -> np.ndarray:
        return np.diff(self.adoption)

    @property
    def total_profit(self) -> float:
        return float(np.sum(self.profits))

    @property
    def final_adoption(self) -> float:
        return float(self.adoption[-1])


def _check_fraction(F, name="F"):
    F = np.asarray(F, dtype=float)
    if np.any(~(F >= 0.0) | ~(F <= 1.0)):
        raise DomainError(f"{name} must lie in [0, 1]")
    return F


def _logistic(x):
    # exp of a nonpositive argument only, so nothing overflows
    x = np.asarray(x, dtype=float)
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def _exponent(params: ModelParams, F, price):
    return params.p + params.q * F - params.alpha * np.asarray(price, dtype=float)


def _hazard(params, F, price):
    return _logistic(_exponent(params, F, price))


def _step(params, F, price):
    return np.minimum(F + (1.0 - F) * _hazard(params, F, price), 1.0)


def _profit(params, cost, F, price):
    return (price - cost) * (1.0 - F) * _hazard(params, F, price)


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def hazard(params: ModelParams, F, price):
    """Adoption probability of a current non-adopter, in (0, 1)."""
    F = _check_fraction(F)
    return _scalar_or_array(_hazard(params, F, price))


def step(params: ModelParams, F, price):
    """One period of the diffusion law; the result lies in ``[F, 1]``."""
    F = _check_fraction(F)
    return _scalar_or_array(_step(params, F, price))


def incremental_profit(spec: MarketSpec, F, price):
    """Per-period profit ``(price - C)(1 - F) R(F, price)``; negative below cost."""
    F = _check_fraction(F)
    if np.any(np.asarray(price) < 0):
        raise ValueError("price must be >= 0")
    return _scalar_or_array(_profit(spec.params, spec.cost, F, price))


def simulate(spec: MarketSpec, F0: float, prices: Sequence[float]) -> Trajectory:
    """Iterate the diffusion law under a given price path of length ``spec.horizon``."""
    _check_fraction(F0, "F0")
    prices = np.asarray(prices, dtype=float)
    if prices.ndim != 1 or len(prices) != spec.horizon:
        raise ValueError(
            f"expected {spec.horizon} prices, got {len(np.atleast_1d(prices))}")
    if np.any(~(prices >= 0)):
        raise ValueError("prices must be >= 0")
    adoption = np.empty(len(prices) + 1)
    profits = np.empty(len(prices))
    adoption[0] = F0
    for t, price in enumerate(prices):
        F = adoption[t]
        profits[t] = _profit(spec.params, spec.cost, F, price)
        adoption[t + 1] = _step(spec.params, F, price)
    return Trajectory(adoption, prices, profits)


def normalize_alpha(spec: MarketSpec) -> tuple[MarketSpec, float]:
    """Rescale currency so that ``alpha == 1``.

    Returns the rescaled spec and the factor ``s = alpha``. A price ``x`` in
    the rescaled problem is ``x / s`` in original units, and profits scale
    by ``1 / s`` on the way back.
    """
    s = spec.params.alpha
    if s == 1.0:
        return spec, 1.0
    params = replace(spec.params, alpha=1.0)
    return replace(spec, params=params, cost=spec.cost * s), s
