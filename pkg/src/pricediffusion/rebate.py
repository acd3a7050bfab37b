"""Stackelberg rebate game between a policymaker and a monopolist.

The policymaker announces a per-unit rebate ``r`` held fixed over the
horizon; consumers then face the net price ``price - r``. Because the
hazard depends on ``p - (price - r)``, the firm's problem is the ordinary
pricing problem with ``p`` replaced by ``p + r``. The policymaker maximizes

    (F_T - F_0) * (1 - beta * r).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .diffusion import MarketSpec, Trajectory, _check_fraction
from .lambertw import lambert_w0_exp
from .optimize import golden_max
from .pricing import GridConfig, PricingSolution, rollout, solve

__all__ = [
    "GameSpec",
    "RebateEquilibrium",
    "firm_best_response",
    "beta_thresholds",
    "solve_single_period",
    "solve_multi_period",
    "policymaker_value",
]


@dataclass(frozen=True)
class GameSpec:
    market: MarketSpec
    beta: float
    F0: float = 0.0
    rebate_points: int = 64
    r_max: float | None = None
    rebate_tolerance: float = 1e-6
    grid: GridConfig = field(default_factory=lambda: GridConfig(n_points=1001))

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        _check_fraction(self.F0, "F0")
        if self.market.params.alpha != 1.0:
            raise ValueError("the rebate game requires alpha == 1")
        if self.rebate_points < 3:
            raise ValueError("rebate_points must be >= 3")
        if self.r_max is not None and not self.r_max > 0:
            raise ValueError("r_max must be > 0")

    @property
    def rebate_limit(self) -> float:
        # beyond 1/beta the leader's payoff is <= 0 <= its payoff at r = 0
        return self.r_max if self.r_max is not None else 1.0 / self.beta


@dataclass(frozen=True)
class RebateEquilibrium:
    r_star: float
    firm_prices: np.ndarray
    policymaker_value: float
    firm_profit: float
    final_adoption: float
    trajectory: Trajectory
    thresholds: tuple[float, float] | None = None
    root_residual: float | None = None
    scan_rebates: np.ndarray | None = None
    scan_values: np.ndarray | None = None
    scan_local_maxima: int | None = None
    notes: tuple = ()

    @property
    def multimodal(self) -> bool:
        return bool(self.scan_local_maxima and self.scan_local_maxima > 1)


def firm_best_response(market: MarketSpec, F0: float, r: float,
                       config: GridConfig | None = None) -> tuple[PricingSolution, Trajectory]:
    """Firm's optimal pricing under rebate ``r``, rolled out from ``F0``."""
    if r < 0:
        raise ValueError(f"rebate must be >= 0, got {r}")
    shifted = market.with_innovation(market.params.p + r)
    sol = solve(shifted, config or GridConfig(n_points=1001))
    return sol, rollout(sol, F0)


def policymaker_value(F0: float, final_adoption: float, beta: float, r: float) -> float:
    return (final_adoption - F0) * (1.0 - beta * r)


def beta_thresholds(market: MarketSpec, F0: float) -> tuple[float, float]:
    """Return ``(beta_0, beta_hat)`` for the one-period game.

    A positive rebate is optimal iff ``beta < beta_0``; the net consumer
    price at equilibrium is positive iff ``beta > beta_hat``.
    """
    _check_fraction(F0, "F0")
    par, C = market.params, market.cost
    a = par.p + par.q * F0
    beta0 = (1.0 + lambert_w0_exp(a - (C + 1.0))) ** -2
    # 1 / beta_hat = C + 1 + e^a + (1 + e^a)^2, evaluated as e^{-2a} / (...)
    if a > 0:
        ea = math.exp(-a)
        beta_hat = ea * ea / ((C + 1.0) * ea * ea + ea + (ea + 1.0) ** 2)
    else:
        e = math.exp(a)
        beta_hat = 1.0 / (C + 1.0 + e + (1.0 + e) ** 2)
    if not beta_hat < beta0:
        raise ArithmeticError(f"expected beta_hat < beta_0, got {beta_hat} >= {beta0}")
    return beta0, beta_hat


def _single_period_rhs(a: float, r: float) -> float:
    return r + (1.0 + lambert_w0_exp(a + r)) ** 2


def solve_single_period(game: GameSpec) -> RebateEquilibrium:
    """Closed-form threshold analysis plus a bisection root solve for ``T == 1``."""
    market = game.market
    if market.horizon != 1:
        raise ValueError("solve_single_period needs horizon == 1")
    par, C, F0, beta = market.params, market.cost, game.F0, game.beta
    beta0, beta_hat = beta_thresholds(market, F0)
    a = par.p + par.q * F0 - (C + 1.0)
    target = 1.0 / beta

    notes = []
    if beta >= beta0 or F0 >= 1.0:
        r_star, residual = 0.0, None
        if F0 >= 1.0:
            notes.append("F0 = 1: leader payoff is identically zero; r* = 0 by convention")
    else:
        lo, hi = 0.0, 1.0
        while _single_period_rhs(a, hi) < target:
            lo, hi = hi, 2.0 * hi
        while True:
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if _single_period_rhs(a, mid) < target:
                lo = mid
            else:
                hi = mid
        r_star = lo if abs(_single_period_rhs(a, lo) - target) <= abs(
            _single_period_rhs(a, hi) - target) else hi
        residual = abs(_single_period_rhs(a, r_star) - target)

    _, traj = firm_best_response(market, F0, r_star, GridConfig(n_points=2))
    price = float(traj.prices[0])
    if F0 < 1.0 and abs(beta - beta_hat) > 1e-12 * beta_hat:
        if (beta > beta_hat) != (price > r_star):
            raise ArithmeticError(
                f"net-price sign contradicts beta_hat: beta={beta}, price={price}, r*={r_star}")
    return RebateEquilibrium(
        r_star=r_star,
        firm_prices=traj.prices,
        policymaker_value=policymaker_value(F0, traj.final_adoption, beta, r_star),
        firm_profit=traj.total_profit,
        final_adoption=traj.final_adoption,
        trajectory=traj,
        thresholds=(beta0, beta_hat),
        root_residual=residual,
        notes=tuple(notes),
    )


def _count_local_maxima(v: np.ndarray) -> int:
    n = len(v)
    count = 0
    for i in range(n):
        left = v[i - 1] if i > 0 else -np.inf
        right = v[i + 1] if i < n - 1 else -np.inf
        if v[i] > left and v[i] >= right:
            count += 1
    return count


def solve_multi_period(game: GameSpec) -> RebateEquilibrium:
    """Scan the rebate grid, then refine the best cell by golden section.

    Each rebate value costs one full pricing solve and rollout. Unimodality
    of the leader's payoff is not assumed; the scan curve is returned and
    ``scan_local_maxima`` counts its local maxima.
    """
    market, F0, beta = game.market, game.F0, game.beta
    cache: dict[float, tuple[float, Trajectory]] = {}

    def evaluate(r: float) -> float:
        r = float(r)
        if r not in cache:
            _, traj = firm_best_response(market, F0, r, game.grid)
            cache[r] = (policymaker_value(F0, traj.final_adoption, beta, r), traj)
        return cache[r][0]

    rs = np.linspace(0.0, game.rebate_limit, game.rebate_points)
    vals = np.array([evaluate(r) for r in rs])
    best = int(np.argmax(vals))
    lo = rs[max(best - 1, 0)]
    hi = rs[min(best + 1, len(rs) - 1)]
    x, fx = golden_max(lambda z: np.array([evaluate(v) for v in np.atleast_1d(z)]),
                       np.array([lo]), np.array([hi]), game.rebate_tolerance)
    r_star, v_star = float(x[0]), float(fx[0])
    if vals[best] >= v_star:
        r_star, v_star = float(rs[best]), float(vals[best])
    traj = cache[r_star][1]

    notes = []
    n_max = _count_local_maxima(vals)
    if n_max > 1:
        notes.append(f"leader payoff scan has {n_max} local maxima")
    if market.params.q > 1.0:
        notes.append("q > 1: firm argmax ties resolved toward the smallest price")

    thresholds = beta_thresholds(market, F0) if market.horizon == 1 else None
    return RebateEquilibrium(
        r_star=r_star,
        firm_prices=traj.prices,
        policymaker_value=v_star,
        firm_profit=traj.total_profit,
        final_adoption=traj.final_adoption,
        trajectory=traj,
        thresholds=thresholds,
        scan_rebates=rs,
        scan_values=vals,
        scan_local_maxima=n_max,
        notes=tuple(notes),
    )
