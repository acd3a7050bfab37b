"""Command-line entry point: ``pricediffusion {fit,price,rebate,simulate}``.

Settings resolve as: command-line flag, then ``--config`` JSON file (either
flat or keyed by subcommand), then built-in defaults.

Exit codes: 0 success, 2 input/schema error, 3 fit did not converge.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .diffusion import MarketSpec, ModelParams, normalize_alpha, simulate
from .estimation import DegenerateDataError, FitOptions, fit
from .pricing import (GridConfig, rollout, solve, stationarity_residuals,
                      verify_structure)
from .rebate import GameSpec, solve_multi_period, solve_single_period

log = logging.getLogger("pricediffusion")

EXIT_OK, EXIT_INPUT, EXIT_NONCONVERGED = 0, 2, 3

DEFAULTS = {
    "common": {"out_dir": ".", "format": "csv", "seed": 0},
    "fit": {"input": None, "free": "p,q,alpha", "fix": [], "starts": 16},
    "price": {"p": 1.0, "q": 1.0, "alpha": 1.0, "cost": 1.0, "horizon": 1, "f0": 0.0,
              "grid_points": 2001, "price_tol": 1e-7, "population": None},
    "rebate": {"p": 1.0, "q": 1.0, "cost": 1.0, "horizon": 1, "f0": 0.0, "beta": 0.3,
               "grid_points": 1001, "price_tol": 1e-7, "rebate_points": 64, "r_max": None,
               "rebate_tol": 1e-6, "sweep_beta": None},
    "simulate": {"p": 1.0, "q": 1.0, "alpha": 1.0, "cost": 0.0, "f0": 0.0,
                 "prices": None, "prices_file": None, "population": None},
}


class InputError(Exception):
    pass


def _market_flags(sp, alpha=True):
    sp.add_argument("--p", type=float, help="innovation coefficient")
    sp.add_argument("--q", type=float, help="imitation coefficient (>= 0)")
    if alpha:
        sp.add_argument("--alpha", type=float, help="price sensitivity (> 0)")
    sp.add_argument("--cost", type=float, help="unit production cost")
    sp.add_argument("--f0", type=float, help="initial adopted fraction")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", help="directory for output artifacts")
    common.add_argument("--format", choices=["csv", "json"], help="format of tabular outputs")
    common.add_argument("--seed", type=int, help="random seed (multi-start fits)")
    common.add_argument("--config", help="JSON file with default settings")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="pricediffusion", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("fit", parents=[common], help="fit p, q, alpha to an adoption dataset")
    sp.add_argument("input", help="dataset CSV")
    sp.add_argument("--free", help="comma-separated free parameters among p,q,alpha,f0")
    sp.add_argument("--fix", action="append", metavar="NAME=VALUE",
                    help="value of a parameter held fixed (repeatable)")
    sp.add_argument("--starts", type=int, help="number of multi-start runs")

    sp = sub.add_parser("price", parents=[common], help="solve the optimal pricing problem")
    _market_flags(sp)
    sp.add_argument("--horizon", type=int, help="number of pricing stages T")
    sp.add_argument("--grid-points", type=int, help="adoption grid resolution")
    sp.add_argument("--price-tol", type=float, help="inner maximization tolerance")
    sp.add_argument("--population", type=float, help="scale fractions to head counts")

    sp = sub.add_parser("rebate", parents=[common], help="solve the rebate game")
    _market_flags(sp, alpha=False)
    sp.add_argument("--horizon", type=int)
    sp.add_argument("--beta", type=float, help="policymaker rebate-aversion weight")
    sp.add_argument("--grid-points", type=int)
    sp.add_argument("--price-tol", type=float)
    sp.add_argument("--rebate-points", type=int, help="rebate scan resolution")
    sp.add_argument("--r-max", type=float, help="largest rebate scanned (default 1/beta)")
    sp.add_argument("--rebate-tol", type=float)
    sp.add_argument("--sweep-beta", help="comma-separated beta values to sweep")

    sp = sub.add_parser("simulate", parents=[common], help="simulate a given price path")
    _market_flags(sp)
    sp.add_argument("--prices", help="comma-separated price path")
    sp.add_argument("--prices-file", help="CSV with a 'price' column or one price per line")
    sp.add_argument("--population", type=float)
    return parser


def resolve_settings(args: argparse.Namespace) -> dict:
    settings = dict(DEFAULTS["common"])
    settings.update(DEFAULTS[args.command])
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise InputError("config file must hold a JSON object")
        flat = {k: v for k, v in cfg.items() if k not in DEFAULTS}
        flat.update(cfg.get(args.command, {}))
        for key, value in flat.items():
            key = key.replace("-", "_")
            if key not in settings:
                raise InputError(f"unknown config key '{key}' for '{args.command}'")
            settings[key] = value
    for key, value in vars(args).items():
        if key in settings and value is not None:
            settings[key] = value
    return settings


def _floats(text, name):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise InputError(f"--{name} must be comma-separated numbers") from None


def _market(s, horizon=None, alpha=True):
    try:
        params = ModelParams(float(s["p"]), float(s["q"]), float(s["alpha"]) if alpha else 1.0)
        return MarketSpec(params, float(s["cost"]), int(horizon if horizon is not None else s["horizon"]))
    except (ValueError, TypeError) as exc:
        raise InputError(str(exc)) from None


def _out_dir(s) -> Path:
    out = Path(s["out_dir"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc}") from None
    return out


def trajectory_rows(traj, population=None):
    F, prices, profits = traj.adoption, traj.prices, traj.profits
    rows = []
    for t in range(len(prices)):
        row = [t, F[t], prices[t], F[t + 1] - F[t], profits[t], F[t + 1]]
        if population is not None:
            row += [(F[t + 1] - F[t]) * population, profits[t] * population]
        rows.append(row)
    cols = ["t", "F", "price", "new_adopters", "profit", "F_next"]
    if population is not None:
        cols += ["new_adopters_count", "profit_scaled"]
    return cols, rows


def cmd_fit(s) -> int:
    series = io.read_dataset(s["input"])
    fixed = {}
    for item in s["fix"] or []:
        name, _, value = item.partition("=")
        try:
            fixed[name.strip()] = float(value)
        except ValueError:
            raise InputError(f"--fix expects NAME=VALUE, got {item!r}") from None
    free = tuple(n.strip() for n in str(s["free"]).split(",") if n.strip())
    try:
        options = FitOptions(free=free, fixed=fixed, n_starts=int(s["starts"]), seed=s["seed"])
    except ValueError as exc:
        raise InputError(str(exc)) from None
    result = fit(series, options)
    out = _out_dir(s)
    io.write_json(out / "fit.json", {
        "params": {"p": result.params.p, "q": result.params.q, "alpha": result.params.alpha},
        "f0": result.f0,
        "nrmse": result.nrmse,
        "r_squared": result.r_squared,
        "sse": result.sse,
        "residuals": result.residuals,
        "converged": result.converged,
        "multistart_best_of": result.multistart_best_of,
        "seed": s["seed"],
    })
    rows = [[p, d, m] for p, d, m in zip(series.periods, series.adoption, result.fitted)]
    io.write_table(out / "fit_series", ["period", "data_F", "model_F"], rows, s["format"])
    print(f"p={result.params.p:.6g} q={result.params.q:.6g} alpha={result.params.alpha:.6g} "
          f"NRMSE={result.nrmse:.4f} R2={result.r_squared:.4f}")
    return EXIT_OK if result.converged else EXIT_NONCONVERGED


def cmd_price(s) -> int:
    spec = _market(s)
    try:
        config = GridConfig(n_points=int(s["grid_points"]), price_tolerance=float(s["price_tol"]))
        F0 = float(s["f0"])
        if not 0.0 <= F0 <= 1.0:
            raise ValueError("f0 must lie in [0, 1]")
    except ValueError as exc:
        raise InputError(str(exc)) from None
    unit, scale = normalize_alpha(spec)
    sol = solve(unit, config)
    traj = rollout(sol, F0)
    if scale != 1.0:
        traj = simulate(spec, F0, traj.prices / scale)
    out = _out_dir(s)
    T = spec.horizon
    grid = sol.grid
    io.write_table(out / "values", ["F"] + [f"V_{t}" for t in range(T)],
                   [[grid[i]] + list(sol.values[:, i] / scale) for i in range(len(grid))],
                   s["format"])
    io.write_table(out / "policies", ["F"] + [f"price_{t}" for t in range(T)],
                   [[grid[i]] + list(sol.policies[:, i] / scale) for i in range(len(grid))],
                   s["format"])
    cols, rows = trajectory_rows(traj, s["population"])
    io.write_table(out / "rollout", cols, rows, s["format"])
    report = verify_structure(sol).as_dict()
    stat = stationarity_residuals(sol)
    report.update({
        "alpha_scale": scale,
        "total_profit": traj.total_profit,
        "final_adoption": traj.final_adoption,
        "stage_bounds": [{"stage": b.stage, "price_bound": b.price_bound / scale,
                          "lipschitz": b.lipschitz, "search_limit": b.search_limit / scale,
                          "widened_hits": b.widened_hits} for b in sol.bounds],
        "max_stationarity_residual": float(np.max(np.abs(stat))) if stat.size else None,
    })
    io.write_json(out / "structure.json", report)
    print(f"V0(F0)={sol.value(0, F0) / scale:.8g} prices={np.round(traj.prices, 6).tolist()}")
    return EXIT_OK


def _equilibrium_dict(eq, game):
    d = {
        "beta": game.beta,
        "horizon": game.market.horizon,
        "F0": game.F0,
        "r_star": eq.r_star,
        "firm_prices": eq.firm_prices,
        "policymaker_value": eq.policymaker_value,
        "firm_profit": eq.firm_profit,
        "final_adoption": eq.final_adoption,
        "notes": list(eq.notes),
    }
    if eq.thresholds is not None:
        d["beta_0"], d["beta_hat"] = eq.thresholds
    if eq.root_residual is not None:
        d["root_residual"] = eq.root_residual
    if eq.scan_local_maxima is not None:
        d["scan_local_maxima"] = eq.scan_local_maxima
    return d


def _game(s, market, beta):
    try:
        return GameSpec(market, float(beta), float(s["f0"]),
                        rebate_points=int(s["rebate_points"]),
                        r_max=None if s["r_max"] is None else float(s["r_max"]),
                        rebate_tolerance=float(s["rebate_tol"]),
                        grid=GridConfig(n_points=int(s["grid_points"]),
                                        price_tolerance=float(s["price_tol"])))
    except ValueError as exc:
        raise InputError(str(exc)) from None


def cmd_rebate(s) -> int:
    market = _market(s, alpha=False)
    out = _out_dir(s)
    if s["sweep_beta"] is not None:
        betas = _floats(s["sweep_beta"], "sweep-beta")
        rows = []
        for beta in betas:
            game = _game(s, market, beta)
            eq = solve_single_period(game) if market.horizon == 1 else solve_multi_period(game)
            rows.append([beta, eq.r_star, eq.final_adoption, eq.policymaker_value])
        io.write_table(out / "sweep", ["beta", "r_star", "final_adoption", "policymaker_value"],
                       rows, s["format"])
        print(f"swept {len(rows)} beta values")
        return EXIT_OK

    game = _game(s, market, s["beta"])
    scan = solve_multi_period(game)
    eq = solve_single_period(game) if market.horizon == 1 else scan
    io.write_json(out / "equilibrium.json", _equilibrium_dict(eq, game))
    io.write_table(out / "scan", ["r", "policymaker_value"],
                   list(zip(scan.scan_rebates, scan.scan_values)), s["format"])
    cols, rows = trajectory_rows(eq.trajectory)
    io.write_table(out / "trajectory", cols, rows, s["format"])
    print(f"r*={eq.r_star:.8g} F_T={eq.final_adoption:.6g} Vp={eq.policymaker_value:.6g}")
    return EXIT_OK


def cmd_simulate(s) -> int:
    if s["prices_file"] is not None:
        prices = io.read_prices(s["prices_file"])
    elif s["prices"] is not None:
        prices = np.array(_floats(s["prices"], "prices"))
    else:
        raise InputError("one of --prices or --prices-file is required")
    if len(prices) == 0:
        raise InputError("price path is empty")
    spec = _market(s, horizon=len(prices))
    try:
        traj = simulate(spec, float(s["f0"]), prices)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    out = _out_dir(s)
    cols, rows = trajectory_rows(traj, s["population"])
    io.write_table(out / "trajectory", cols, rows, s["format"])
    print(f"F_T={traj.final_adoption:.8g} profit={traj.total_profit:.8g}")
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "price": cmd_price, "rebate": cmd_rebate, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        settings = resolve_settings(args)
        return COMMANDS[args.command](settings)
    except (InputError, io.DatasetError, DegenerateDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
