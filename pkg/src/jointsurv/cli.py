"""Command-line entry point: ``jointsurv {survival,joint,table2,sweep}``.

Human-readable tables go to stdout; ``--json PATH`` additionally writes a
machine-readable report. Exit codes: 0 success, 2 input error, 3 numerical
non-convergence.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .copula import (
    bivariate_upper,
    compare_models,
    copula_first_order,
    copula_joint_equicorrelated,
    copula_joint_general,
    thresholds_from_survival,
)
from .firm_model import (
    CalibrationError,
    CorrelationError,
    CorrelationSpec,
    FirmFileError,
    FirmParams,
    read_correlation_csv,
    read_firm_csv,
    validate_correlation,
)
from .mc_oracle import SimConfig, simulate_joint_survival
from .numerics import ConvergenceError, QuadratureConfig, RngStream
from .perturbation import correlation_duration, default_correlation_matrix, joint_survival
from .survival import default_prob, survival_prob

EXIT_OK, EXIT_INPUT, EXIT_NUMERICS = 0, 2, 3

# reference values: (sigma, d/V0) -> (P, chi, A_fp/sigma^2, A_C/sigma^2)
TABLE2 = [
    (0.30, 0.20, 0.965, -1.81, 0.0697, 0.0717),
    (0.30, 0.30, 0.872, -1.14, 0.611, 0.636),
    (0.30, 0.40, 0.738, -0.636, 2.06, 2.17),
    (0.35, 0.20, 0.916, -1.38, 0.223, 0.231),
    (0.35, 0.30, 0.785, -0.789, 1.08, 1.13),
    (0.35, 0.40, 0.634, -0.343, 2.71, 2.87),
]
TABLE2_TOL = {"survival": 1e-3, "chi": 5e-3, "a_fp_rel": 0.015, "a_c_rel": 0.005}


class InputError(Exception):
    pass


def _jsonable(x: Any) -> Any:
    if dataclasses.is_dataclass(x) and not isinstance(x, type):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(x).items()}
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _report(command: str, inputs: dict, **fields: Any) -> dict:
    base = {
        "version": __version__,
        "command": command,
        "inputs": inputs,
        "method": None,
        "horizon_years": None,
        "p0": None,
        "p1_over_p0": None,
        "joint": None,
        "duration": None,
        "default_correlations": [],
        "stderr": None,
        "warnings": [],
        # method-specific, null where not applicable
        "singles": None,
        "numerical_error": None,
        "chi": None,
        "marginals": None,
        "marginal_stderr": None,
    }
    base.update(fields)
    return _jsonable(base)


def _write_json(path: str | None, report: dict) -> None:
    if path:
        Path(path).write_text(json.dumps(report, indent=2) + "\n")


def _firm_dict(f: FirmParams) -> dict:
    return {"ticker": f.ticker, "sigma": f.sigma, "d_over_v0": f.d_over_v0, "q": f.q,
            "mu_minus_lambda": f.mu - f.lam, "z_d": f.z_d, "eta": f.eta}


def _load_firms(args) -> list[FirmParams]:
    firms = read_firm_csv(args.firms, rate=args.rate)
    if not firms:
        raise InputError(f"{args.firms}: no firms listed")
    return firms


def _quad_cfg(args) -> QuadratureConfig:
    return QuadratureConfig(time_panels=args.time_panels, space_panels=args.space_panels, rel_tol=args.rel_tol)


def _pair_list(d: np.ndarray, tickers: Sequence[str]) -> list[dict]:
    n = len(tickers)
    return [{"pair": [tickers[i], tickers[j]], "value": float(d[i, j])} for i in range(n) for j in range(i + 1, n)]


# ---------------------------------------------------------------------------
# commands


def cmd_survival(args) -> int:
    firms = _load_firms(args)
    t = args.horizon
    rows = [(f.ticker, float(survival_prob(f, t)), float(default_prob(f, t))) for f in firms]
    print(f"{'ticker':<8}{'P(t)':>12}{'1-P(t)':>12}   horizon {t:g}y")
    for tk, p, q in rows:
        print(f"{tk:<8}{p:>12.6f}{q:>12.6f}")
    report = _report(
        "survival",
        {"firms_file": str(args.firms), "firms": [_firm_dict(f) for f in firms]},
        method="closed_form",
        horizon_years=t,
        p0=float(np.prod([r[1] for r in rows])),
        firms=[{"ticker": tk, "survival": p, "default": q} for tk, p, q in rows],
    )
    _write_json(args.json, report)
    return EXIT_OK


def _correlation(args, firms) -> CorrelationSpec:
    if args.corr_file:
        return read_correlation_csv(args.corr_file, [f.ticker for f in firms])
    return validate_correlation(CorrelationSpec.equicorrelated(args.xi), len(firms), horizon=args.horizon)


def cmd_joint(args) -> int:
    firms = _load_firms(args)
    corr = _correlation(args, firms)
    t = args.horizon
    n = len(firms)
    tickers = [f.ticker for f in firms]
    cfg = _quad_cfg(args)
    singles = np.array([float(survival_prob(f, t)) for f in firms])
    inputs: dict[str, Any] = {
        "firms_file": str(args.firms),
        "firms": [_firm_dict(f) for f in firms],
        "correlation": {"kind": corr.kind, "xi": corr.xi if corr.kind != "matrix" else None,
                        "matrix": corr.matrix if corr.kind == "matrix" else None,
                        "file": args.corr_file},
        "quadrature": cfg,
    }
    fields: dict[str, Any] = {"method": args.method, "horizon_years": t, "p0": float(np.prod(singles)),
                              "singles": dict(zip(tickers, singles))}
    if args.method == "perturbation":
        res = joint_survival(firms, corr, t, cfg)
        fields.update(p1_over_p0=res.p1_over_p0, joint=res.joint, warnings=res.warnings,
                      numerical_error=res.error)
        if n > 1:
            fields["duration"] = correlation_duration(firms, t, cfg)
            fields["default_correlations"] = _pair_list(default_correlation_matrix(firms, corr, t, cfg), tickers)
    elif args.method == "copula":
        th = thresholds_from_survival(singles)
        xi_m = corr.as_matrix(n)
        inputs["seed"] = args.seed
        if corr.kind == "equicorrelated":
            joint, err = copula_joint_equicorrelated(th, corr.xi, cfg, RngStream(args.seed)), None
            if corr.xi < 0:
                joint, err = copula_joint_general(th, xi_m, RngStream(args.seed))
        else:
            joint, err = copula_joint_general(th, xi_m, RngStream(args.seed))
        d = np.eye(n)
        for i in range(n):
            for j in range(i + 1, n):
                pij = bivariate_upper(th.chi[i], th.chi[j], xi_m[i, j], cfg)
                v = math.sqrt(singles[i] * (1 - singles[i]) * singles[j] * (1 - singles[j]))
                d[i, j] = d[j, i] = (pij - singles[i] * singles[j]) / v
        fields.update(
            p1_over_p0=copula_first_order(singles, th, xi_m),
            joint=joint,
            stderr=err,
            chi=dict(zip(tickers, th.chi)),
            duration=copula_first_order(singles, th, 1.0) if n > 1 else None,
            default_correlations=_pair_list(d, tickers),
        )
    else:
        sim = SimConfig(paths=args.paths, steps_per_year=args.steps_per_year,
                        bridge_correction=not args.no_bridge, seed=args.seed,
                        block_size=min(args.block_size, args.paths))
        inputs["simulation"] = sim
        res = simulate_joint_survival(firms, corr, t, sim)
        fields.update(joint=res.joint, stderr=res.joint_stderr,
                      marginals=dict(zip(tickers, res.marginals)),
                      marginal_stderr=dict(zip(tickers, res.marginal_stderr)),
                      default_correlations=_pair_list(res.default_correlation, tickers))
    report = _report("joint", inputs, **fields)
    print(f"method      {args.method}")
    print(f"horizon     {t:g}y   firms {n}   correlation {corr.kind}")
    print(f"P0          {fields['p0']:.6f}")
    if fields.get("p1_over_p0") is not None:
        print(f"P1/P0       {fields['p1_over_p0']:.6f}")
    err = f" +/- {fields['stderr']:.2e}" if fields.get("stderr") else ""
    print(f"joint       {fields['joint']:.6f}{err}")
    print(f"1 - joint   {1 - fields['joint']:.6f}")
    if fields.get("duration") is not None:
        print(f"duration    {fields['duration']:.6f}")
    for w in report["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    _write_json(args.json, report)
    return EXIT_OK


def table2_rows(horizon: float = 5.0, cfg: QuadratureConfig | None = None) -> list[dict]:
    """Recompute the identical-firm comparison rows and flag deviations from the reference values."""
    rows = []
    for sigma, d, p_ref, chi_ref, afp_ref, ac_ref in TABLE2:
        c = compare_models([FirmParams(f"s{sigma}_d{d}", sigma, d)], 0.5, horizon, cfg)
        row = {
            "sigma": sigma, "d_over_v0": d,
            "survival": float(c.survival[0]), "chi": float(c.chi[0]),
            "a_fp_over_sigma2": c.a_fp_over_sigma2, "a_c_over_sigma2": c.a_c_over_sigma2,
            "ref": {"survival": p_ref, "chi": chi_ref, "a_fp_over_sigma2": afp_ref, "a_c_over_sigma2": ac_ref},
        }
        flags = []
        if abs(row["survival"] - p_ref) > TABLE2_TOL["survival"]:
            flags.append("survival")
        if abs(row["chi"] - chi_ref) > TABLE2_TOL["chi"]:
            flags.append("chi")
        if abs(row["a_fp_over_sigma2"] / afp_ref - 1) > TABLE2_TOL["a_fp_rel"]:
            flags.append("a_fp")
        if abs(row["a_c_over_sigma2"] / ac_ref - 1) > TABLE2_TOL["a_c_rel"]:
            flags.append("a_c")
        row["flags"] = flags
        rows.append(row)
    return rows


def cmd_table2(args) -> int:
    cfg = _quad_cfg(args)
    rows = table2_rows(args.horizon, cfg)
    print(f"{'sigma':>6}{'d/V0':>6}{'P':>9}{'chi':>9}{'A_fp/s2':>10}{'A_C/s2':>10}  flags")
    for r in rows:
        print(f"{r['sigma']:>6.2f}{r['d_over_v0']:>6.2f}{r['survival']:>9.4f}{r['chi']:>9.4f}"
              f"{r['a_fp_over_sigma2']:>10.4f}{r['a_c_over_sigma2']:>10.4f}  {','.join(r['flags']) or 'ok'}")
    _write_json(args.json, _report("table2", {"horizon_years": args.horizon, "quadrature": cfg,
                                              "tolerances": TABLE2_TOL},
                                   method="perturbation+copula", horizon_years=args.horizon, rows=rows))
    return EXIT_OK


def sweep_rows(chi: float, n: int, grid: Sequence[float], cfg: QuadratureConfig | None = None) -> tuple[float, float, list[dict]]:
    """Exact equicorrelated copula joint along ``grid`` with the linear prediction beside it."""
    th = [chi] * n
    p = float(1 - 0.5 * (1 + math.erf(chi / math.sqrt(2))))
    p0 = copula_joint_equicorrelated(th, 0.0, cfg)
    slope = p0 * copula_first_order([p] * n, th, 1.0) if n > 1 else 0.0
    rows = []
    for xi in grid:
        exact = copula_joint_equicorrelated(th, xi, cfg)
        lin = p0 + slope * xi
        rows.append({"xi": xi, "exact": exact, "linear": lin,
                     "rel_err_survival": (lin - exact) / exact,
                     "rel_err_default": ((1 - lin) - (1 - exact)) / (1 - exact)})
    return p0, slope, rows


def cmd_sweep(args) -> int:
    try:
        grid = [float(x) for x in args.xi_grid.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"bad --xi-grid {args.xi_grid!r}") from None
    if not grid:
        raise InputError("--xi-grid is empty")
    if args.n < 1:
        raise InputError("--n must be >= 1")
    cfg = _quad_cfg(args)
    p0, slope, rows = sweep_rows(args.chi, args.n, grid, cfg)
    print(f"chi {args.chi:g}  n {args.n}  linear: P = {p0:.4f} + {slope:.4f} xi")
    print(f"{'xi':>6}{'exact':>10}{'linear':>10}{'relerr(P)':>11}{'relerr(1-P)':>13}")
    for r in rows:
        print(f"{r['xi']:>6.3f}{r['exact']:>10.4f}{r['linear']:>10.4f}{r['rel_err_survival']:>11.4f}{r['rel_err_default']:>13.4f}")
    _write_json(args.json, _report("sweep", {"chi": args.chi, "n": args.n, "xi_grid": grid, "quadrature": cfg},
                                   method="copula", p0=p0, rows=rows, linear_slope=slope))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jointsurv", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, firms=True):
        if firms:
            p.add_argument("--firms", required=True, help="firm or market-data CSV")
            p.add_argument("--rate", type=float, default=None,
                           help="risk-free rate; only needed when a firm ties exactly one of mu/lambda to it")
        p.add_argument("--horizon", type=float, default=5.0, help="years (default 5)")
        p.add_argument("--json", metavar="PATH", help="also write a JSON report")
        p.add_argument("--time-panels", type=int, default=64)
        p.add_argument("--space-panels", type=int, default=128)
        p.add_argument("--rel-tol", type=float, default=1e-7)

    p = sub.add_parser("survival", help="single-firm survival probabilities")
    common(p)
    p.set_defaults(func=cmd_survival)

    p = sub.add_parser("joint", help="joint survival probability")
    common(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--xi", type=float, help="common asset correlation")
    g.add_argument("--corr-file", help="correlation matrix CSV with ticker header")
    p.add_argument("--method", choices=["perturbation", "copula", "mc"], default="perturbation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--paths", type=int, default=1_000_000)
    p.add_argument("--steps-per-year", type=int, default=252)
    p.add_argument("--block-size", type=int, default=10_000)
    p.add_argument("--no-bridge", action="store_true", help="disable Brownian-bridge crossing correction")
    p.set_defaults(func=cmd_joint)

    p = sub.add_parser("table2", help="identical-firm first-passage vs copula comparison")
    common(p, firms=False)
    p.set_defaults(func=cmd_table2)

    p = sub.add_parser("sweep", help="equicorrelated copula sweep vs linear prediction")
    common(p, firms=False)
    p.add_argument("--chi", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--xi-grid", required=True, help="comma-separated correlations")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, FirmFileError, CorrelationError, CalibrationError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConvergenceError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICS


if __name__ == "__main__":
    sys.exit(main())
