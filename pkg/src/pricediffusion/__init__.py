"""Logit-hazard diffusion model with optimal pricing and rebate-game solvers."""

from .diffusion import (DomainError, MarketSpec, ModelParams, Trajectory, hazard,
                        incremental_profit, normalize_alpha, simulate, step)
from .estimation import AdoptionSeries, FitOptions, FitResult, fit, nrmse, predict
from .lambertw import WResult, lambert_w0, lambert_w0_exp
from .pricing import (GridConfig, PricingSolution, estimate_stage_bound, last_period_price,
                      last_period_value, rollout, solve, verify_structure)
from .rebate import (GameSpec, RebateEquilibrium, beta_thresholds, firm_best_response,
                     solve_multi_period, solve_single_period)

__version__ = "0.1.0"
