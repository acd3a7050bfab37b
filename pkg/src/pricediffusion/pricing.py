"""Finite-horizon monopolist pricing by backward induction.

The profit-to-go ``V_t`` is tabulated on a uniform grid over the adopted
fraction ``F``. The last stage is closed-form:

    price*(F) = C + 1 + W(exp(p + qF - C - 1)),   V(F) = (1 - F) W(exp(p + qF - C - 1)).

Earlier stages maximize ``H(F, price) + V_{t+1}(F')`` over ``[0, bound_t]``
per grid point, with ``V_{t+1}`` linearly interpolated. Every function here
requires ``alpha == 1``; see :func:`pricediffusion.diffusion.normalize_alpha`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffusion import MarketSpec, Trajectory, _check_fraction, _profit, _step, simulate
from .lambertw import lambert_w0_exp
from .optimize import golden_max

__all__ = [
    "GridConfig",
    "StageBound",
    "PricingSolution",
    "PropertyCheck",
    "StructureReport",
    "last_period_price",
    "last_period_value",
    "estimate_stage_bound",
    "solve",
    "rollout",
    "verify_structure",
    "stationarity_residuals",
    "grid_convergence",
]


@dataclass(frozen=True)
class GridConfig:
    """Numerical scheme for :func:`solve`.

    ``bound_widening`` enlarges each stage's price bound by that fraction;
    optima landing in the enlarged band are counted in ``StageBound``.
    """

    n_points: int = 2001
    price_tolerance: float = 1e-7
    interpolation: str = "linear"
    scan_points: int = 16
    bound_widening: float = 0.5

    def __post_init__(self):
        if self.n_points < 2:
            raise ValueError(f"n_points must be >= 2, got {self.n_points}")
        if not self.price_tolerance > 0:
            raise ValueError("price_tolerance must be > 0")
        if self.interpolation != "linear":
            raise ValueError("only linear interpolation is supported")
        if self.scan_points < 3:
            raise ValueError("scan_points must be >= 3")


@dataclass(frozen=True)
class StageBound:
    stage: int
    price_bound: float
    lipschitz: float
    search_limit: float
    widened_hits: int = 0


@dataclass(frozen=True)
class PricingSolution:
    spec: MarketSpec
    config: GridConfig
    grid: np.ndarray
    values: np.ndarray
    policies: np.ndarray
    bounds: tuple = field(default=())

    def __post_init__(self):
        for name in ("grid", "values", "policies"):
            getattr(self, name).setflags(write=False)

    @property
    def spacing(self) -> float:
        return float(self.grid[1] - self.grid[0])

    def value(self, t: int, F):
        return np.interp(F, self.grid, self.values[t])

    def policy(self, t: int, F):
        return np.interp(F, self.grid, self.policies[t])


def _require_unit_alpha(spec: MarketSpec):
    if spec.params.alpha != 1.0:
        raise ValueError("pricing requires alpha == 1; call normalize_alpha first")


def _w_last(spec: MarketSpec, F):
    par = spec.params
    return lambert_w0_exp(par.p + par.q * np.asarray(F, dtype=float) - (spec.cost + 1.0))


def last_period_price(spec: MarketSpec, F):
    """Closed-form maximizer of the one-period profit at adopted fraction ``F``."""
    _require_unit_alpha(spec)
    F = _check_fraction(F)
    out = spec.cost + 1.0 + _w_last(spec, F)
    return float(out) if np.ndim(out) == 0 else out


def last_period_value(spec: MarketSpec, F):
    """Maximal one-period profit ``(1 - F) W(exp(p + qF - C - 1))``."""
    _require_unit_alpha(spec)
    F = _check_fraction(F)
    out = (1.0 - F) * _w_last(spec, F)
    return float(out) if np.ndim(out) == 0 else out


def _log_hazard(a, price):
    # log of logistic(a - price), stable for any sign
    return -np.logaddexp(0.0, price - a)


def estimate_stage_bound(spec: MarketSpec, next_values) -> tuple[float, float]:
    """Price bound beyond which no price can beat ``C + L + 1``.

    ``L`` is the largest absolute slope of the piecewise-linear interpolant
    of ``next_values`` (uniform grid on [0, 1]). The bound is the smallest
    price ``x >= max(C + L + 1, x1)`` with ``R(1, x)(x - C + L) <= R(0, C + L + 1)``,
    where ``x1`` maximizes the left-hand side.

    Returns
    -------
    (bound, L)
    """
    _require_unit_alpha(spec)
    v = np.asarray(next_values, dtype=float)
    h = 1.0 / (len(v) - 1)
    L = float(np.max(np.abs(np.diff(v)))) / h if len(v) > 1 else 0.0
    p, q, C = spec.params.p, spec.params.q, spec.cost

    low = C + L + 1.0
    c_up = C - L
    peak = c_up + 1.0 + lambert_w0_exp(p + q - (c_up + 1.0))
    target = _log_hazard(p, low)

    def excess(x):
        return _log_hazard(p + q, x) + np.log(x - c_up) - target

    a = max(low, peak)
    if excess(a) <= 0.0:
        return a, L
    width = 1.0
    b = a + width
    while excess(b) > 0.0:
        width *= 2.0
        b = a + width
    for _ in range(200):
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        if excess(m) > 0.0:
            a = m
        else:
            b = m
    return b, L


def _stage_objective(spec, grid, next_values):
    par, C = spec.params, spec.cost

    def q_value(F, price):
        return _profit(par, C, F, price) + np.interp(_step(par, F, price), grid, next_values)

    return q_value


def _maximize(q_value, F, lo, hi, config, scan_hi):
    """Coarse scan on ``[0, scan_hi]`` then golden section around the best node."""
    xs = np.linspace(0.0, scan_hi, config.scan_points)
    vals = q_value(F[:, None], xs[None, :])
    vmax = vals.max(axis=1, keepdims=True)
    near = vals >= vmax - 1e-12 * (1.0 + np.abs(vmax))
    best = np.argmax(near, axis=1)  # first (smallest) price among ties
    k = len(xs)
    a = np.maximum(xs[np.maximum(best - 1, 0)], lo)
    b = np.minimum(xs[np.minimum(best + 1, k - 1)], hi)
    x, fx = golden_max(lambda z: q_value(F, z), a, b, config.price_tolerance)
    scan_x = xs[best]
    scan_f = vals[np.arange(len(F)), best]
    keep_scan = scan_f > fx
    return np.where(keep_scan, scan_x, x), np.where(keep_scan, scan_f, fx)


def _saturated_price(spec, next_values, h):
    # F = 1: continuity via C + 1 - x + B(1, x) - V'(1) = 0 with the left slope
    slope = (next_values[-1] - next_values[-2]) / h
    c_eff = spec.cost + 1.0 - slope
    return c_eff + lambert_w0_exp(spec.params.p + spec.params.q - c_eff)


def solve(spec: MarketSpec, config: GridConfig | None = None) -> PricingSolution:
    """Backward induction over ``config.n_points`` uniform adoption levels."""
    _require_unit_alpha(spec)
    config = config or GridConfig()
    n, T = config.n_points, spec.horizon
    grid = np.linspace(0.0, 1.0, n)
    h = grid[1] - grid[0]
    values = np.empty((T, n))
    policies = np.empty((T, n))

    values[T - 1] = (1.0 - grid) * _w_last(spec, grid)
    values[T - 1, -1] = 0.0
    policies[T - 1] = spec.cost + 1.0 + _w_last(spec, grid)
    bounds = [StageBound(T - 1, float(policies[T - 1, -1]), 0.0,
                         float(policies[T - 1, -1]))]

    interior = grid[:-1]
    for t in range(T - 2, -1, -1):
        nxt = values[t + 1]
        bound, L = estimate_stage_bound(spec, nxt)
        limit = bound * (1.0 + config.bound_widening)
        q_value = _stage_objective(spec, grid, nxt)
        x, fx = _maximize(q_value, interior, 0.0, limit, config, limit)
        policies[t, :-1] = x
        values[t, :-1] = fx
        policies[t, -1] = _saturated_price(spec, nxt, h)
        values[t, -1] = 0.0
        bounds.append(StageBound(t, bound, L, limit, int(np.sum(x > bound))))

    return PricingSolution(spec, config, grid, values, policies, tuple(reversed(bounds)))


def _local_price(solution: PricingSolution, t: int, F: float) -> float:
    spec, cfg = solution.spec, solution.config
    grid, pol = solution.grid, solution.policies[t]
    n = len(grid)
    h = solution.spacing
    i = min(int(F / h), n - 2)
    nxt = solution.values[t + 1]
    q_value = _stage_objective(spec, grid, nxt)

    lo_cell, hi_cell = max(i - 1, 0), min(i + 2, n - 1)
    half = max(float(np.max(np.abs(np.diff(pol[lo_cell:hi_cell + 1])))),
               10.0 * cfg.price_tolerance)
    limit = solution.bounds[t].search_limit
    centers = np.array([pol[i], pol[i + 1]])
    lo = np.clip(centers - half, 0.0, limit)
    hi = np.clip(centers + half, 0.0, limit)
    Fv = np.full(2, F)
    x, fx = golden_max(lambda z: q_value(Fv, z), lo, hi, cfg.price_tolerance)

    interp = float(np.interp(F, grid, pol))
    f_interp = float(q_value(F, interp))
    k = int(np.argmax(fx))
    return float(x[k]) if fx[k] >= f_interp else interp


def rollout(solution: PricingSolution, F0: float) -> Trajectory:
    """Follow the optimal policy from ``F0``.

    The stage price is re-optimized within the policy's local range around
    the current state rather than read off the interpolated table.
    """
    _check_fraction(F0, "F0")
    spec = solution.spec
    T = spec.horizon
    prices = np.empty(T)
    F = float(F0)
    for t in range(T):
        if F >= 1.0:
            prices[t] = solution.policies[t, -1]
        elif t == T - 1:
            prices[t] = last_period_price(spec, F)
        else:
            prices[t] = _local_price(solution, t, F)
        F = float(_step(spec.params, F, prices[t]))
    return simulate(spec, F0, prices)


@dataclass(frozen=True)
class PropertyCheck:
    passed: bool
    worst: float
    tolerance: float


@dataclass(frozen=True)
class StructureReport:
    """Grid measurements of the monotonicity/concavity structure.

    ``asserted`` is True when ``q <= 1``, where every property is expected
    to hold; otherwise the checks are informational.
    """

    asserted: bool
    checks: dict

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def as_dict(self) -> dict:
        return {
            "asserted": self.asserted,
            "passed": self.passed,
            "checks": {k: {"passed": c.passed, "worst": c.worst, "tolerance": c.tolerance}
                       for k, c in self.checks.items()},
        }


def verify_structure(solution: PricingSolution, tol: float = 1e-6) -> StructureReport:
    """Measure the structural properties expected when ``q <= 1``.

    ``worst`` is the largest violation found (<= 0 means none):

    * policy_increasing_in_F: max decrease of each policy row along F
    * policy_decreasing_in_t: max of ``policy[t+1] - policy[t]``
    * value_decreasing_in_F: max increase of each value row along F
    * value_concave: max second difference, tolerance ``tol * h``
    * policy_positive: minus the smallest price
    """
    pol, val = solution.policies, solution.values
    h = solution.spacing
    first = tol

    def check(worst, tolerance):
        return PropertyCheck(bool(worst <= tolerance), float(worst), tolerance)

    checks = {
        "policy_increasing_in_F": check(float(np.max(-np.diff(pol, axis=1))), first),
        "policy_decreasing_in_t": check(
            float(np.max(pol[1:] - pol[:-1])) if len(pol) > 1 else -np.inf, first),
        "value_decreasing_in_F": check(float(np.max(np.diff(val, axis=1))), first),
        "value_concave": check(
            float(np.max(np.diff(val, n=2, axis=1))) if val.shape[1] > 2 else -np.inf, tol * h),
        "policy_positive": PropertyCheck(bool(np.min(pol) > 0), float(-np.min(pol)), 0.0),
    }
    return StructureReport(solution.spec.params.q <= 1.0, checks)


def stationarity_residuals(solution: PricingSolution) -> np.ndarray:
    """First-order residual ``C + 1 - x + B(F, x) - V'_{t+1}(F')`` at each stage < T-1.

    ``V'`` comes from central differences of the next value row. Returns an
    array of shape ``(T - 1, n - 2)`` over the interior grid nodes.
    """
    spec = solution.spec
    par = spec.params
    grid = solution.grid
    F = grid[1:-1]
    out = []
    for t in range(spec.horizon - 1):
        x = solution.policies[t, 1:-1]
        slope = np.gradient(solution.values[t + 1], grid)
        Fp = _step(par, F, x)
        B = np.exp(par.p + par.q * F - x)
        out.append(spec.cost + 1.0 - x + B - np.interp(Fp, grid, slope))
    return np.array(out).reshape(max(spec.horizon - 1, 0), len(F))


def grid_convergence(spec: MarketSpec, F0: float = 0.0,
                     resolutions=(251, 501, 1001, 2001), **config_kw) -> list[tuple[int, float]]:
    """``V_0(F0)`` at each grid resolution, for judging discretization error."""
    return [(n, float(solve(spec, GridConfig(n_points=n, **config_kw)).value(0, F0)))
            for n in resolutions]

