"""Batch command line: pricing, densities, calibration and moment reports.

Every command writes CSV files and a ``manifest.json`` into ``--out``. Exit
codes: 0 success, 1 numerical failure, 2 input error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import (
    QuoteFileError,
    calibrate_intensity,
    calibrate_rate,
    MCPricer,
    read_curve,
    read_quotes,
    swaption_tenor,
)
from .density import DensityGridError, FFTGrid, desk_grid, stationary_density, transition_density
from .levy import AdmissibilityError, QuadratureError
from .montecarlo import price_cdxo_mc, price_forward_mc
from .params import (
    INTENSITY_2020_01_02,
    ParamFileError,
    calibrated_2020_01_02,
    read_params,
    reference_params,
    write_params,
)
from .pide import GridSpec, SolverError, extract, solve
from .pricing import DegenerateAnnuityError, cdxo_terminal_payoff, forward_cdx_value, zcb_price
from .replication import (
    ExtractionError,
    PriceCurve,
    implied_moments,
    model_price_curve,
    write_moments_csv,
)

log = logging.getLogger("cdxlevy")

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2

INPUT_ERRORS = (ParamFileError, QuoteFileError, FileNotFoundError, IsADirectoryError)
NUMERIC_ERRORS = (SolverError, DensityGridError, ExtractionError, DegenerateAnnuityError,
                  QuadratureError, AdmissibilityError, ArithmeticError)


class InputError(ValueError):
    pass


def _bps(x) -> str:
    return f"{x:.5f}"


def _floats(text: str) -> list[float]:
    """``"50,60"`` or ``"50:10:100"`` (inclusive range)."""
    try:
        if ":" in text:
            a, s, b = (float(v) for v in text.split(":"))
            return [float(v) for v in np.arange(a, b + 0.5 * s, s)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list like 50,60 or 50:10:100, got {text!r}")


def _grid_sizes(text: str) -> tuple[int, int]:
    try:
        parts = [int(v) for v in text.lower().split("x")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or NxM, got {text!r}")
    return (parts[0], parts[0]) if len(parts) == 1 else (parts[0], parts[1])


def _params(args):
    if args.params:
        return read_params(args.params)
    return reference_params()


def _file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(args, outputs: list[Path]) -> None:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",)}
    inputs = {}
    for key in ("params", "quotes", "curve"):
        path = getattr(args, key, None)
        if path:
            inputs[key] = _file_digest(path)
    blob = json.dumps({"config": config, "inputs": inputs}, sort_keys=True, default=str)
    manifest = {
        "command": args.command,
        "version": __version__,
        "seed": getattr(args, "seed", None),
        "config": config,
        "input_sha256": inputs,
        "config_hash": hashlib.sha256(blob.encode()).hexdigest(),
        "outputs": sorted(p.name for p in outputs),
    }
    path = Path(args.out) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def _writer(path: Path, header):
    fh = open(path, "w", newline="")
    w = csv.writer(fh)
    w.writerow(header)
    return fh, w


def _grid(args) -> GridSpec:
    return GridSpec(r_max=args.r_max, n_space=args.grid_n, m_time=args.grid_m, n_sim=args.nsim,
                    seed=args.seed, jump_weight=args.jump_weight, extrapolation=args.extrapolation,
                    lambda_max_override=args.lambda_max)


def cmd_price_zcb(args) -> list[Path]:
    p = _params(args)
    out = Path(args.out) / "zcb.csv"
    fh, w = _writer(out, ["maturity", "price", "yield_bps"])
    with fh:
        for T in args.maturities:
            price = float(zcb_price(0.0, T, p.r0, p))
            w.writerow([f"{T:g}", f"{price:.10f}", _bps(-np.log(price) / T * 1e4)])
    return [out]


def cmd_price_forward(args) -> list[Path]:
    p = _params(args)
    base = swaption_tenor(args.expiry, args.tenor)
    out = Path(args.out) / "forward.csv"
    fh, w = _writer(out, ["engine", "strike_bps", "value_bps", "std_error_bps", "cpu_time_s"])
    engines = ["analytic", "pide", "mc"] if args.engine == "all" else [args.engine]
    with fh:
        for k in args.strikes:
            tk = base.with_strike(k * 1e-4)
            for eng in engines:
                t0 = time.process_time()
                se = ""
                if eng == "analytic":
                    v = float(forward_cdx_value(0.0, p.r0, p.lambda0, tk, p))
                elif eng == "pide":
                    sol = solve(lambda R, L: forward_cdx_value(tk.t0, R, L, tk, p), tk.t0, p,
                                _grid(args), keep_all=False)
                    v = extract(sol, 0.0, p.r0, p.lambda0)
                else:
                    est = price_forward_mc(p, tk, args.npaths, np.random.default_rng(args.seed))
                    v, se = est.price, _bps(est.std_error * 1e4)
                w.writerow([eng, f"{k:g}", _bps(v * 1e4), se, f"{time.process_time() - t0:.3f}"])
    return [out]


def cmd_price_cdxo(args) -> list[Path]:
    p = _params(args)
    base = swaption_tenor(args.expiry, args.tenor)
    outputs = []
    if args.convergence:
        out = Path(args.out) / "cdxo_convergence.csv"
        fh, w = _writer(out, ["N", "M", "n_sim", "strike_bps", "option", "price_bps", "cpu_time_s"])
        with fh:
            for k in args.strikes:
                tk = base.with_strike(k * 1e-4)
                for n in args.convergence_n:
                    g = GridSpec(r_max=args.r_max, n_space=n, m_time=args.grid_m, n_sim=args.nsim,
                                 seed=args.seed, jump_weight=args.jump_weight,
                                 extrapolation=args.extrapolation,
                                 lambda_max_override=args.lambda_max)
                    t0 = time.process_time()
                    sol = solve(lambda R, L: cdxo_terminal_payoff(R, L, tk, p, args.option),
                                tk.t0, p, g, keep_all=False)
                    v = extract(sol, 0.0, p.r0, p.lambda0)
                    w.writerow([n, args.grid_m, args.nsim, f"{k:g}", args.option, _bps(v * 1e4),
                                f"{time.process_time() - t0:.3f}"])
        outputs.append(out)
    out = Path(args.out) / "cdxo.csv"
    fh, w = _writer(out, ["engine", "strike_bps", "option", "price_bps", "std_error_bps",
                          "cpu_time_s"])
    engines = ["pide", "mc"] if args.engine in ("all", "analytic") else [args.engine]
    if args.engine == "analytic":
        log.warning("no closed form for swaptions; pricing with pide and mc")
    with fh:
        for k in args.strikes:
            tk = base.with_strike(k * 1e-4)
            for eng in engines:
                t0 = time.process_time()
                se = ""
                if eng == "pide":
                    sol = solve(lambda R, L: cdxo_terminal_payoff(R, L, tk, p, args.option),
                                tk.t0, p, _grid(args), keep_all=False)
                    v = extract(sol, 0.0, p.r0, p.lambda0)
                else:
                    est = price_cdxo_mc(p, tk, args.option, args.npaths,
                                        np.random.default_rng(args.seed))
                    v, se = est.price, _bps(est.std_error * 1e4)
                w.writerow([eng, f"{k:g}", args.option, _bps(v * 1e4), se,
                            f"{time.process_time() - t0:.3f}"])
    outputs.append(out)
    return outputs


def cmd_density(args) -> list[Path]:
    p = _params(args)
    grid = desk_grid(p, args.fft_n) if args.fft_n else desk_grid(p)
    if args.full_grid:
        grid = FFTGrid.full_preset()
    if args.stationary:
        field_ = stationary_density(p, grid, smoothing=args.smoothing)
        name = "density_stationary.csv"
    else:
        field_ = transition_density(args.horizon, p, grid, smoothing=args.smoothing)
        name = f"density_t{args.horizon:g}.csv"
    out = Path(args.out) / name
    field_.to_csv(out, stride=args.stride)
    summ = Path(args.out) / "density_summary.csv"
    fh, w = _writer(summ, ["quantity", "value"])
    with fh:
        w.writerow(["mass", f"{field_.mass:.10f}"])
        w.writerow(["negative_mass", f"{field_.negative_mass:.3e}"])
        w.writerow(["leakage", f"{field_.leakage:.3e}"])
        for key, val in field_.moments().items():
            w.writerow([key, f"{val:.10e}"])
    return [out, summ]


def _curve_from_quotes(quotes) -> PriceCurve:
    rec = {q.strike_bps: q.mid for q in quotes if q.side == "receiver"}
    pay = {q.strike_bps: q.mid for q in quotes if q.side == "payer"}
    strikes = sorted(set(rec) & set(pay))
    if len(strikes) < 3:
        raise InputError("need receiver and payer quotes at three or more common strikes")
    return PriceCurve(np.array(strikes), np.array([rec[k] for k in strikes]),
                      np.array([pay[k] for k in strikes]), tol=1e-6)


def _load_quotes(args):
    quotes = read_quotes(args.quotes)
    if args.date:
        quotes = [q for q in quotes if q.date == args.date]
        if not quotes:
            raise InputError(f"no quotes dated {args.date}")
    return quotes


def _terms(args, quotes) -> list[float]:
    terms = sorted({q.term for q in quotes})
    if args.terms:
        terms = [t for t in terms if any(abs(t - s) < 1e-9 for s in args.terms)]
        if not terms:
            raise InputError("none of the requested terms is quoted")
    return terms


def _spot(args, quotes_for_term) -> float:
    if args.spot_bps:
        return args.spot_bps
    from .replication import forward_spread
    return forward_spread(_curve_from_quotes(quotes_for_term))


def cmd_calibrate(args) -> list[Path]:
    init = _params(args)
    quotes = _load_quotes(args)
    outputs = []
    rate = init
    if args.curve:
        res = calibrate_rate(read_curve(args.curve), init, max_iter=args.max_iter)
        rate = res.params
        out = Path(args.out) / "rate_calibration.csv"
        fh, w = _writer(out, ["r0", "theta_r", "c_r", "gamma_r", "objective", "converged"])
        with fh:
            d = rate.as_dict()
            w.writerow([f"{d[k]:.6g}" for k in ("r0", "theta_r", "c_r", "gamma_r")]
                       + [f"{res.objective:.3e}", int(res.converged)])
        outputs.append(out)
    table = Path(args.out) / "calibration.csv"
    resid = Path(args.out) / "residuals.csv"
    fh, w = _writer(table, ["term", "theta_lambda", "rho", "c_lambda", "gamma_lambda", "c_tau",
                            "gamma_tau", "lambda0", "objective", "iterations", "converged"])
    fr, wr = _writer(resid, ["term", "strike_bps", "side", "mid_bps", "model_bps",
                             "residual_bps"])
    pricer = MCPricer(n_paths=args.npaths, seed=args.seed)
    with fh, fr:
        for term in _terms(args, quotes):
            qt = [q for q in quotes if abs(q.term - term) < 1e-9]
            res = calibrate_intensity(qt, rate, rate, spot_bps=_spot(args, qt),
                                      lambda0_mode=args.lambda0_mode, pricer=pricer,
                                      weighting=args.weighting, max_iter=args.max_iter)
            d = res.params.as_dict()
            w.writerow([f"{term:g}"] + [f"{d[k]:.4f}" for k in
                                        ("theta_lambda", "rho", "c_lambda", "gamma_lambda",
                                         "c_tau", "gamma_tau", "lambda0")]
                       + [f"{res.objective:.6e}", res.iterations, int(res.converged)])
            for r in res.residuals:
                wr.writerow([f"{term:g}", f"{r['strike_bps']:g}", r["side"], _bps(r["mid"]),
                             _bps(r["model"]), _bps(r["residual"])])
            pfile = Path(args.out) / f"params_term{term:g}.txt"
            write_params(res.params, pfile)
            outputs.append(pfile)
    return outputs + [table, resid]


def _model_params_for(args, term: float):
    if args.params:
        return read_params(args.params)
    if term in INTENSITY_2020_01_02:
        return calibrated_2020_01_02(term)
    raise InputError(f"no parameters for term {term}; pass --params")


def _model_report(p, term, strikes, args):
    tenor = swaption_tenor(term, args.tenor)
    lo, hi = strikes[0], strikes[-1]
    dense = np.arange(lo, hi + 1e-9, args.strike_step)
    curve = model_price_curve(p, tenor, dense, args.npaths, np.random.default_rng(args.seed))
    try:
        return implied_moments(curve)
    except ExtractionError:
        # model forward outside the quoted window: extend the strip down to zero
        log.warning("term %g: model forward outside [%g, %g] bps, widening strikes", term, lo, hi)
        dense = np.arange(args.strike_step, hi + 1e-9, args.strike_step)
        curve = model_price_curve(p, tenor, dense, args.npaths, np.random.default_rng(args.seed))
        return implied_moments(curve)


def cmd_moments(args) -> list[Path]:
    quotes = _load_quotes(args) if args.quotes else []
    terms = _terms(args, quotes) if quotes else (args.terms or sorted(INTENSITY_2020_01_02))
    rows = []
    for term in terms:
        qt = [q for q in quotes if abs(q.term - term) < 1e-9]
        mkt = implied_moments(_curve_from_quotes(qt)) if qt else None
        strikes = mkt and sorted({q.strike_bps for q in qt}) or [42.5, 120.0]
        mdl = None if args.market_only else _model_report(_model_params_for(args, term), term,
                                                          strikes, args)
        rows.append((f"{term:g}", mkt, mdl))
    out = Path(args.out) / "moments.csv"
    write_moments_csv(rows, out)
    return [out]


def cmd_correlation(args) -> list[Path]:
    quotes = _load_quotes(args)
    dates = sorted({q.date for q in quotes})
    if len(dates) < 3:
        raise InputError("correlation needs quotes on at least three dates")
    params = _params(args)
    pricer = MCPricer(n_paths=args.npaths, seed=args.seed)
    series = []
    for date in dates:
        day = [q for q in quotes if q.date == date]
        for term in _terms(args, day):
            qt = [q for q in day if abs(q.term - term) < 1e-9]
            mkt = implied_moments(_curve_from_quotes(qt))
            res = calibrate_intensity(qt, params, params, spot_bps=_spot(args, qt),
                                      lambda0_mode=args.lambda0_mode, pricer=pricer,
                                      max_iter=args.max_iter)
            params = res.params  # warm start the next day
            strikes = sorted({q.strike_bps for q in qt})
            mdl = _model_report(params, term, strikes, args)
            series.append((date, term, mkt, mdl))
    out_s = Path(args.out) / "moment_series.csv"
    fh, w = _writer(out_s, ["date", "term", "market_mu2", "market_mu3", "market_mu4",
                            "model_mu2", "model_mu3", "model_mu4"])
    with fh:
        for date, term, a, b in series:
            w.writerow([date, f"{term:g}"] + [f"{v:.6e}" for v in
                                              (a.mu2, a.mu3, a.mu4, b.mu2, b.mu3, b.mu4)])
    out = Path(args.out) / "correlation.csv"
    fh, w = _writer(out, ["statistic", "correlation"])
    with fh:
        for name, attr in (("Variance", "mu2"), ("Skewness", "mu3"), ("Kurtosis", "mu4")):
            a = np.array([getattr(s[2], attr) for s in series])
            b = np.array([getattr(s[3], attr) for s in series])
            rho = float(np.corrcoef(a, b)[0, 1]) if a.std() > 0 and b.std() > 0 else float("nan")
            w.writerow([name, f"{rho:.4f}"])
    return [out_s, out]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--params", help="key=value parameter file (default: reference set)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--grid-n", type=int, default=50, help="PIDE space steps per axis")
    grid.add_argument("--grid-m", type=int, default=100, help="PIDE time steps")
    grid.add_argument("--nsim", type=int, default=100, help="jump-integral samples per step")
    grid.add_argument("--r-max", type=float, default=0.5)
    grid.add_argument("--lambda-max", type=float, default=None)
    grid.add_argument("--jump-weight", choices=["double_gamma", "gamma"], default="double_gamma")
    grid.add_argument("--extrapolation", choices=["linear", "constant"], default="linear")
    grid.add_argument("--engine", choices=["analytic", "pide", "mc", "all"], default="all")
    grid.add_argument("--npaths", type=int, default=100000)
    grid.add_argument("--expiry", type=float, default=15 / 252, help="option expiry T0 (years)")
    grid.add_argument("--tenor", type=float, default=5.0, help="CDX tenor (years)")
    grid.add_argument("--strikes", type=_floats, default=_floats("50:10:100"))

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--quotes", help="quote CSV")
    data.add_argument("--curve", help="yield curve CSV")
    data.add_argument("--date", help="use quotes of this date only")
    data.add_argument("--terms", type=_floats, help="restrict to these option terms")
    data.add_argument("--spot-bps", type=float, help="spot spread for the OTM filter")
    data.add_argument("--lambda0-mode", choices=["joint", "parity"], default="joint")
    data.add_argument("--max-iter", type=int, default=500)
    data.add_argument("--npaths", type=int, default=5000)
    data.add_argument("--tenor", type=float, default=5.0)
    data.add_argument("--strike-step", type=float, default=0.5)

    ap = argparse.ArgumentParser(prog="cdxlevy", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("price-zcb", parents=[common], help="Treasury zero-coupon bonds")
    s.add_argument("--maturities", type=_floats, default=_floats("0.25,0.5,1,2,3,5,7,10,20,30"))
    s.set_defaults(func=cmd_price_zcb)

    s = sub.add_parser("price-forward", parents=[common, grid], help="forward CDX values")
    s.set_defaults(func=cmd_price_forward)

    s = sub.add_parser("price-cdxo", parents=[common, grid], help="CDX swaption prices")
    s.add_argument("--option", choices=["receiver", "payer"], default="receiver")
    s.add_argument("--convergence", action="store_true",
                   help="also emit the PIDE convergence table over N")
    s.add_argument("--convergence-n", type=_floats, default=[50, 100, 150, 200, 250])
    s.set_defaults(func=cmd_price_cdxo)

    s = sub.add_parser("density", parents=[common], help="bivariate density on an FFT grid")
    s.add_argument("--horizon", type=float, default=1.0)
    s.add_argument("--stationary", action="store_true")
    s.add_argument("--fft-n", type=_grid_sizes, help="N or NrxNl (powers of two)")
    s.add_argument("--full-grid", action="store_true", help="N=2^13, B=1e6 (memory hungry)")
    s.add_argument("--smoothing", type=float, default=2.0, help="Gaussian window width in cells")
    s.add_argument("--stride", type=int, default=1, help="write every k-th node")
    s.set_defaults(func=cmd_density)

    s = sub.add_parser("calibrate", parents=[common, data], help="fit parameters to quotes")
    s.add_argument("--weighting", choices=["none", "bidask"], default="none")
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("moments", parents=[common, data], help="market and model spread moments")
    s.add_argument("--market-only", action="store_true")
    s.set_defaults(func=cmd_moments)

    s = sub.add_parser("correlation", parents=[common, data],
                       help="daily calibration and market/model moment correlation")
    s.set_defaults(func=cmd_correlation)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command in ("calibrate", "correlation") and not args.quotes:
        ap.error(f"{args.command} needs --quotes")
    if hasattr(args, "convergence_n"):
        args.convergence_n = [int(n) for n in args.convergence_n]
    try:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        outputs = args.func(args)
        _write_manifest(args, outputs)
    except (InputError, *INPUT_ERRORS) as exc:
        print(f"cdxlevy: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NUMERIC_ERRORS as exc:
        print(f"cdxlevy: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"cdxlevy: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
