"""Command-line interface.

Commands: value, trajectory, critical, bankruptcy, report, estimate.
Figures are emitted as plot-ready CSV rather than images; exit codes are
0 on success, 1 for computation/data errors, 2 for usage errors.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import importlib.resources
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import leverage as lev
from . import montecarlo as mc
from .estimation import EstimationPolicy, estimate_params, load_series
from .impact import ImpactParams, check_validity, expected_impact, impact_from_spread
from .valuation import Position, average_valuation_price, liquidation_value


def parse_fraction(text: str) -> float:
    """Parse a decimal fraction, accepting a '%' suffix ('6.3%' -> 0.063)."""
    text = text.strip()
    if text.endswith("%"):
        return float(text[:-1]) / 100.0
    return float(text)


def parse_grid(text: str) -> np.ndarray:
    """Parse 'start:stop:count' into a uniform grid."""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected start:stop:count, got {text!r}")
    start, stop = parse_fraction(parts[0]), parse_fraction(parts[1])
    count = int(parts[2])
    if count < 1:
        raise argparse.ArgumentTypeError(f"grid count must be >= 1, got {count}")
    return np.linspace(start, stop, count)


def _percent(x: float) -> str:
    return f"{100.0 * x:.4g}%"


def _params_from_args(args) -> ImpactParams:
    if args.params is not None:
        return ImpactParams.load(args.params)
    if args.sigma is None or args.V is None:
        raise ValueError("impact parameters required: --params FILE or --sigma and --V")
    return ImpactParams(
        Y=args.Y, sigma=args.sigma, V=args.V, S=args.S, v=args.v, b=args.b, phi=args.phi
    )


def _add_params_flags(parser) -> None:
    parser.add_argument("--params", metavar="FILE", help="impact-parameter config file")
    parser.add_argument("--Y", type=float, default=1.0, help="impact coefficient (default 1)")
    parser.add_argument("--sigma", type=parse_fraction, help="daily volatility (fraction or %%)")
    parser.add_argument("--V", type=float, help="daily volume, same units as Q")
    parser.add_argument("--S", type=parse_fraction, default=None, help="bid-ask spread fraction")
    parser.add_argument("--v", type=float, default=None, help="volume at best quotes")
    parser.add_argument("--b", type=float, default=None, help="spread-volatility coefficient")
    parser.add_argument("--phi", type=float, default=None, help="transactions per day")


def _write_text(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _write_rows(args, rows) -> None:
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as handle:
            csv.writer(handle).writerows(rows)
    else:
        csv.writer(sys.stdout).writerows(rows)


def cmd_value(args) -> int:
    params = _params_from_args(args)
    pos = Position(Q=args.Q, p0=args.p0, L=args.L)
    mtm = pos.mtm_value
    adj = liquidation_value(pos, params)
    impact = expected_impact(params, args.Q)
    p_tilde = average_valuation_price(pos, params) if args.Q > 0 else args.p0
    haircut = (mtm - adj) / mtm if mtm > 0 else 0.0
    report = check_validity(params, args.Q)
    payload = {
        "mtm_value": mtm,
        "impact_adjusted_value": adj,
        "average_valuation_price": p_tilde,
        "impact": impact,
        "haircut": haircut,
        "warnings": [flag.value for flag in report.flags],
    }
    if args.format == "json":
        _write_text(args, json.dumps(payload, indent=2) + "\n")
    else:
        lines = [
            f"mark-to-market value:   {mtm:.6g}",
            f"impact-adjusted value:  {adj:.6g}",
            f"average valuation price: {p_tilde:.6g}",
            f"impact (full position): {impact:.6g} ({_percent(impact)})",
            f"haircut:                {haircut:.6g} ({_percent(haircut)})",
            "warnings:               "
            + (", ".join(payload["warnings"]) if payload["warnings"] else "none"),
        ]
        _write_text(args, "\n".join(lines) + "\n")
    return 0


def cmd_trajectory(args) -> int:
    if args.mode == "roundtrip":
        if args.Q is None or args.p0 is None:
            raise ValueError("roundtrip mode requires --Q and --p0 plus impact parameters")
        params = _params_from_args(args)
        pos = Position(Q=args.Q, p0=args.p0, L=args.L, E0=args.E0)
        entry, exit_leg = lev.entry_exit_trajectories(pos, params, grid_size=args.grid)
        points = entry + exit_leg
    else:
        if args.lambda0 is not None and args.impact is not None:
            lambda0, cal_i = args.lambda0, args.impact
        elif args.Q is not None and args.p0 is not None:
            params = _params_from_args(args)
            lambda0 = lev.mtm_leverage(args.Q, args.p0, args.L)
            if math.isinf(lambda0):
                raise ValueError("position has non-positive equity; leverage is undefined")
            cal_i = expected_impact(params, args.Q)
        else:
            raise ValueError("need --lambda0 and --impact, or a full position with parameters")
        points = lev.deleverage_trajectory(lambda0, cal_i, np.linspace(0.0, 1.0, args.grid))
    if args.out:
        lev.write_trajectory_csv(points, args.out)
    else:
        sys.stdout.write(lev.trajectory_csv_text(points))
    return 0


def cmd_critical(args) -> int:
    if args.lambda0 is not None:
        lambda0 = args.lambda0
        cal_i = args.impact
    elif args.Q is not None and args.p0 is not None:
        params = _params_from_args(args)
        lambda0 = lev.mtm_leverage(args.Q, args.p0, args.L)
        if math.isinf(lambda0):
            raise ValueError("position has non-positive equity; leverage is undefined")
        cal_i = expected_impact(params, args.Q)
    else:
        raise ValueError("need --lambda0, or a full position with parameters")

    if cal_i is None:
        payload = {"lambda0": lambda0, "I_c": lev.critical_impact(lambda0)}
    else:
        report = lev.classify(lambda0, cal_i)
        payload = {
            "lambda0": lambda0,
            "calI": report.calI,
            "regime": report.regime.value,
            "I_c": report.I_c,
            "lambda_c": report.lambda_c,
        }
        if report.x_star is not None:
            payload["x_star"] = report.x_star
        if report.x_c is not None:
            payload["x_c"] = report.x_c
    if args.format == "json":
        _write_text(args, json.dumps(payload, indent=2) + "\n")
    else:
        lines = []
        for key, value in payload.items():
            if isinstance(value, float):
                lines.append(f"{key}: {value:.10g}")
            else:
                lines.append(f"{key}: {value}")
        _write_text(args, "\n".join(lines) + "\n")
    return 0


def cmd_bankruptcy(args) -> int:
    mode = (
        mc.BankruptcyMode.ANYWHERE_ON_PATH
        if args.mc_mode == "anywhere"
        else mc.BankruptcyMode.AT_END
    )
    points = mc.transition_curve(
        args.lambda0,
        args.eta,
        args.impact_grid,
        args.trials,
        args.seed,
        Y=args.Y,
        sigma=args.sigma if args.sigma is not None else 0.02,
        bankruptcy_mode=mode,
        noise_sigma=args.noise_sigma,
    )
    _write_rows(args, mc.transition_csv_rows(points))
    return 0


def _report_rows(config_path: str):
    config = configparser.ConfigParser()
    config.optionxform = str  # V and v are distinct keys
    read = config.read(config_path)
    if not read:
        raise ValueError(f"cannot read asset config {config_path!r}")
    rows = []
    for section in config.sections():
        asset = config[section]
        Y = asset.getfloat("Y", fallback=1.0)

        def frac(key):
            raw = asset.get(key, fallback=None)
            return parse_fraction(raw) if raw is not None else None

        sigma, V, Q = frac("sigma"), asset.getfloat("V", fallback=None), asset.getfloat("Q", fallback=None)
        S, v, b = frac("S"), asset.getfloat("v", fallback=None), asset.getfloat("b", fallback=None)
        i1 = i2 = None
        if sigma is not None and V is not None and Q is not None:
            i1 = Y * sigma * math.sqrt(Q / V)
        if S is not None and v is not None and b is not None and Q is not None:
            i2 = impact_from_spread(Y, b, S, Q / v)
        if i1 is not None and i1 > 0:
            lambda_c = 1.5 / i1
        elif i2 is not None and i2 > 0:
            lambda_c = 1.5 / i2
        else:
            lambda_c = None
        rows.append(
            {
                "name": section,
                "sigma": sigma,
                "V": V,
                "S": S,
                "v": v,
                "impact_vol_based": i1,
                "impact_spread_based": i2,
                "lambda_c": lambda_c,
                "error": None if (i1 is not None or i2 is not None) else "no usable parameters",
            }
        )
    return rows


def cmd_report(args) -> int:
    path = args.assets
    if path is None:
        path = str(importlib.resources.files("impactval") / "data" / "assets.ini")
    rows = _report_rows(path)
    if args.format == "json":
        _write_text(args, json.dumps(rows, indent=2) + "\n")
        return 0
    if args.format == "csv":
        out = [["name", "sigma", "V", "S", "v", "impact_vol_based", "impact_spread_based", "lambda_c"]]
        for row in rows:
            out.append(
                ["" if row[k] is None else repr(row[k]) if isinstance(row[k], float) else str(row[k])
                 for k in out[0]]
            )
        _write_rows(args, out)
        return 0

    headers = ["asset", "sigma", "V", "S", "v", "I1", "I2", "lambda_c"]
    table = [headers]
    for row in rows:
        if row["error"]:
            table.append([row["name"], f"error: {row['error']}", "", "", "", "", "", ""])
            continue
        table.append(
            [
                row["name"],
                _percent(row["sigma"]) if row["sigma"] is not None else "--",
                f"{row['V']:.4g}" if row["V"] is not None else "--",
                _percent(row["S"]) if row["S"] is not None else "--",
                f"{row['v']:.4g}" if row["v"] is not None else "--",
                _percent(row["impact_vol_based"]) if row["impact_vol_based"] is not None else "--",
                _percent(row["impact_spread_based"]) if row["impact_spread_based"] is not None else "--",
                f"{row['lambda_c']:.4g}" if row["lambda_c"] is not None else "--",
            ]
        )
    widths = [max(len(r[i]) for r in table) for i in range(len(headers))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(r)).rstrip() for r in table]
    _write_text(args, "\n".join(lines) + "\n")
    return 0


def cmd_estimate(args) -> int:
    series = load_series(args.series)
    policy = EstimationPolicy(
        window_days=args.window, exclusion_days=args.exclusion, halflife_days=args.halflife
    )
    params = estimate_params(series, policy, Y=args.Y)
    if args.format == "json":
        payload = {
            k: getattr(params, k)
            for k in ("Y", "sigma", "V", "S", "v", "b", "phi")
            if getattr(params, k) is not None
        }
        _write_text(args, json.dumps(payload, indent=2) + "\n")
    else:
        _write_text(args, params.to_config_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="impactval",
        description="Impact-adjusted valuation and critical-leverage analytics",
    )

    def add_global_flags(target, suppress=False):
        default = argparse.SUPPRESS if suppress else None
        target.add_argument(
            "--format",
            choices=("text", "json", "csv"),
            default=argparse.SUPPRESS if suppress else "text",
        )
        target.add_argument(
            "--seed",
            type=int,
            default=argparse.SUPPRESS if suppress else 12345,
            help="master seed for stochastic runs",
        )
        target.add_argument(
            "--out",
            metavar="PATH",
            default=default,
            help="write output to a file instead of stdout",
        )

    add_global_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    p_value = sub.add_parser("value", help="mark-to-market vs impact-adjusted valuation")
    p_value.add_argument("--Q", type=float, required=True)
    p_value.add_argument("--p0", type=float, required=True)
    p_value.add_argument("--L", type=float, default=0.0)
    _add_params_flags(p_value)
    add_global_flags(p_value, suppress=True)
    p_value.set_defaults(func=cmd_value)

    p_traj = sub.add_parser("trajectory", help="leverage trajectory CSV (exit or round trip)")
    p_traj.add_argument("--lambda0", type=float)
    p_traj.add_argument("--impact", type=parse_fraction, help="full-position impact I(Q)")
    p_traj.add_argument("--Q", type=float)
    p_traj.add_argument("--p0", type=float)
    p_traj.add_argument("--L", type=float, default=0.0)
    p_traj.add_argument("--E0", type=float, help="initial equity (roundtrip mode)")
    p_traj.add_argument("--grid", type=int, default=1000)
    p_traj.add_argument("--mode", choices=("exit", "roundtrip"), default="exit")
    _add_params_flags(p_traj)
    add_global_flags(p_traj, suppress=True)
    p_traj.set_defaults(func=cmd_trajectory)

    p_crit = sub.add_parser("critical", help="criticality report (regime, I_c, lambda_c, x*, x_c)")
    p_crit.add_argument("--lambda0", type=float)
    p_crit.add_argument("--impact", type=parse_fraction)
    p_crit.add_argument("--Q", type=float)
    p_crit.add_argument("--p0", type=float)
    p_crit.add_argument("--L", type=float, default=0.0)
    _add_params_flags(p_crit)
    add_global_flags(p_crit, suppress=True)
    p_crit.set_defaults(func=cmd_critical)

    p_bank = sub.add_parser("bankruptcy", help="bankruptcy-probability transition curve CSV")
    p_bank.add_argument("--lambda0", type=float, required=True)
    p_bank.add_argument("--eta", type=float, required=True, help="participation rate delta_q/V")
    p_bank.add_argument(
        "--impact-grid", type=parse_grid, default=parse_grid("0:0.3:16"),
        help="start:stop:count",
    )
    p_bank.add_argument("--trials", type=int, default=10000)
    p_bank.add_argument("--sigma", type=parse_fraction, help="daily volatility (default 0.02)")
    p_bank.add_argument("--noise-sigma", type=parse_fraction, default=None,
                        help="background noise level (0 for deterministic paths)")
    p_bank.add_argument("--Y", type=float, default=1.0)
    p_bank.add_argument("--mc-mode", choices=("at-end", "anywhere"), default="at-end")
    add_global_flags(p_bank, suppress=True)
    p_bank.set_defaults(func=cmd_bankruptcy)

    p_rep = sub.add_parser("report", help="per-asset impact and critical-leverage table")
    p_rep.add_argument(
        "assets",
        nargs="?",
        default=None,
        help="INI file, one section per asset (default: bundled fixture)",
    )
    add_global_flags(p_rep, suppress=True)
    p_rep.set_defaults(func=cmd_report)

    p_est = sub.add_parser("estimate", help="estimate impact parameters from a market CSV")
    p_est.add_argument("series", help="daily market data CSV")
    p_est.add_argument("--window", type=int, default=126)
    p_est.add_argument("--exclusion", type=int, default=5)
    p_est.add_argument("--halflife", type=int, default=63)
    p_est.add_argument("--Y", type=float, default=1.0)
    add_global_flags(p_est, suppress=True)
    p_est.set_defaults(func=cmd_estimate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
