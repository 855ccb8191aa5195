"""Nelder-Mead calibration of the rate block to a yield curve and of the
intensity block to swaption quotes, one option maturity at a time.

Parameters are searched in an unconstrained space mapped into their boxes by
a logistic transform (in log space for scales and shapes), so every returned
value is strictly inside its box.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy import optimize

from .montecarlo import common_uniforms, price_cdxo_strip, simulate_inverse
from .ou import ModelParams
from .pricing import TenorStructure, implied_lambda, zcb_price

log = logging.getLogger(__name__)

Side = Literal["receiver", "payer"]


class QuoteFileError(ValueError):
    pass


@dataclass(frozen=True)
class Quote:
    term: float
    strike_bps: float
    side: Side
    bid: float
    ask: float
    mid: float
    date: str = ""

    def __post_init__(self):
        if self.side not in ("receiver", "payer"):
            raise ValueError(f"side must be receiver or payer, got {self.side!r}")
        if not self.bid <= self.mid <= self.ask:
            raise ValueError(f"need bid <= mid <= ask, got {self.bid}, {self.mid}, {self.ask}")
        if self.term <= 0 or self.strike_bps <= 0:
            raise ValueError("term and strike must be positive")


@dataclass(frozen=True)
class CurvePoint:
    tenor: float
    yld: float


@dataclass
class QuoteSurface:
    quotes: list[Quote]
    curve_points: list[CurvePoint] = field(default_factory=list)

    @property
    def terms(self) -> list[float]:
        return sorted({q.term for q in self.quotes})

    @property
    def dates(self) -> list[str]:
        return sorted({q.date for q in self.quotes})

    def for_term(self, term: float, date: str | None = None) -> list[Quote]:
        return [q for q in self.quotes
                if abs(q.term - term) < 1e-9 and (date is None or q.date == date)]

    def on_date(self, date: str) -> "QuoteSurface":
        return QuoteSurface([q for q in self.quotes if q.date == date], self.curve_points)


QUOTE_COLUMNS = ("term_years", "strike_bps", "side", "bid", "ask", "mid")
CURVE_COLUMNS = ("tenor_years", "yield")


def _rows(path, required: Sequence[str]):
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise QuoteFileError(f"{path}: empty file")
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise QuoteFileError(f"{path}:1: missing columns {missing}")
        for row in reader:
            yield reader.line_num, row


def read_quotes(path) -> list[Quote]:
    """Headered CSV with ``term_years, strike_bps, side, bid, ask, mid`` and an
    optional ``date`` column."""
    out = []
    for line, row in _rows(path, QUOTE_COLUMNS):
        try:
            out.append(Quote(float(row["term_years"]), float(row["strike_bps"]),
                             row["side"].strip().lower(), float(row["bid"]), float(row["ask"]),
                             float(row["mid"]), (row.get("date") or "").strip()))
        except (TypeError, ValueError) as exc:
            raise QuoteFileError(f"{path}:{line}: {exc}") from exc
    if not out:
        raise QuoteFileError(f"{path}: no quotes")
    return out


def read_curve(path) -> list[CurvePoint]:
    """Headered CSV with ``tenor_years, yield`` (continuously compounded zero yields)."""
    out = []
    for line, row in _rows(path, CURVE_COLUMNS):
        try:
            pt = CurvePoint(float(row["tenor_years"]), float(row["yield"]))
        except (TypeError, ValueError) as exc:
            raise QuoteFileError(f"{path}:{line}: {exc}") from exc
        if pt.tenor <= 0:
            raise QuoteFileError(f"{path}:{line}: tenor must be positive")
        out.append(pt)
    if not out:
        raise QuoteFileError(f"{path}: no curve points")
    return out


def write_quotes(quotes: Iterable[Quote], path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("date",) + QUOTE_COLUMNS)
        for q in quotes:
            w.writerow([q.date, f"{q.term:.6g}", f"{q.strike_bps:.6g}", q.side,
                        f"{q.bid:.5f}", f"{q.ask:.5f}", f"{q.mid:.5f}"])


def write_curve(points: Iterable[CurvePoint], path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CURVE_COLUMNS)
        for p in points:
            w.writerow([f"{p.tenor:.6g}", f"{p.yld:.10f}"])


# Boxes: (low, high, log-scale?)
BOUNDS = {
    "r0": (0.0, 0.2, False),
    "theta_r": (1e-3, 10.0, True),
    "c_r": (1e-3, 1e3, True),
    "gamma_r": (1e-3, 1e3, True),
    "theta_lambda": (1e-3, 10.0, True),
    "rho": (0.0, 5.0, False),
    "c_lambda": (1e-3, 1e3, True),
    "gamma_lambda": (1e-3, 1e3, True),
    "c_tau": (1e-3, 1e3, True),
    "gamma_tau": (1e-3, 1e3, True),
    "lambda0": (0.0, 1.0, False),
}

RATE_KEYS = ("r0", "theta_r", "c_r", "gamma_r")
INTENSITY_KEYS = ("theta_lambda", "rho", "c_lambda", "gamma_lambda", "c_tau", "gamma_tau")

_Z_MAX = 30.0


def to_unbounded(key: str, value: float) -> float:
    lo, hi, logscale = BOUNDS[key]
    if not lo < value < hi:
        value = min(max(value, lo + 1e-9 * (hi - lo)), hi - 1e-9 * (hi - lo))
    if logscale:
        lo, hi, value = math.log(lo), math.log(hi), math.log(value)
    q = (value - lo) / (hi - lo)
    return math.log(q / (1 - q))


def from_unbounded(key: str, z: float) -> float:
    lo, hi, logscale = BOUNDS[key]
    q = 1.0 / (1.0 + math.exp(-min(max(z, -_Z_MAX), _Z_MAX)))
    if logscale:
        return math.exp(math.log(lo) + q * (math.log(hi) - math.log(lo)))
    return lo + q * (hi - lo)


@dataclass
class CalibrationResult:
    params: ModelParams
    objective: float
    iterations: int
    evaluations: int
    converged: bool
    residuals: list[dict]
    history: list[float] = field(repr=False, default_factory=list)

    def residuals_bps(self) -> np.ndarray:
        return np.array([r["residual"] for r in self.residuals])


class _Search:
    """Nelder-Mead over transformed coordinates that remembers the best point seen."""

    def __init__(self, keys, start: dict, loss, max_iter: int, xatol: float, step: float):
        self.keys = tuple(keys)
        self.loss = loss
        self.best_f = math.inf
        self.best_z = None
        self.history: list[float] = []
        self.max_iter, self.xatol, self.step = max_iter, xatol, step
        self.z0 = np.array([to_unbounded(k, start[k]) for k in self.keys])

    def decode(self, z) -> dict:
        return {k: from_unbounded(k, zi) for k, zi in zip(self.keys, z)}

    def _f(self, z):
        try:
            f = float(self.loss(self.decode(z)))
        except (ArithmeticError, ValueError) as exc:
            log.debug("objective failed at %s: %s", z, exc)
            f = math.inf
        if not math.isfinite(f):
            f = 1e30
        if f < self.best_f:
            self.best_f, self.best_z = f, np.array(z, dtype=float)
        return f

    def run(self, restarts: int = 0):
        """Run, then restart from the best vertex with a fresh simplex ``restarts`` times.

        Restarts stop early once a run converges without improving the best value.
        """
        n = len(self.z0)
        z = self.z0
        nit = nfev = 0
        converged = False
        for attempt in range(restarts + 1):
            before = self.best_f
            simplex = np.vstack([z] + [z + self.step * np.eye(n)[i] for i in range(n)])
            res = optimize.minimize(
                self._f, z, method="Nelder-Mead",
                callback=lambda xk: self.history.append(self.best_f),
                options={"maxiter": self.max_iter, "xatol": self.xatol, "fatol": math.inf,
                         "initial_simplex": simplex, "adaptive": False},
            )
            nit += int(res.nit)
            nfev += int(res.nfev)
            converged = bool(res.status == 0)
            z = self.best_z
            if converged and attempt > 0 and self.best_f >= before:
                break
        if not converged:
            log.warning("Nelder-Mead stopped after %d iterations without converging", nit)
        return self.decode(self.best_z), self.best_f, nit, nfev, converged


def model_yields(params: ModelParams, tenors) -> np.ndarray:
    return np.array([-math.log(float(zcb_price(0.0, t, params.r0, params))) / t for t in tenors])


def calibrate_rate(curve_points: Sequence[CurvePoint], initial: ModelParams,
                   max_iter: int = 500, xatol: float = 1e-6, step: float = 0.25,
                   restarts: int = 1) -> CalibrationResult:
    """Least squares on continuously compounded zero yields over ``(r0, theta_r, c_r, gamma_r)``.

    Intensity parameters of ``initial`` are carried through untouched.
    """
    if len(curve_points) < 3:
        raise ValueError("need at least 3 curve points")
    tenors = np.array([p.tenor for p in curve_points])
    target = np.array([p.yld for p in curve_points])
    base = initial.as_dict()

    def loss(x):
        p = initial.replace(**x)
        return float(np.sum((model_yields(p, tenors) - target) ** 2))

    search = _Search(RATE_KEYS, base, loss, max_iter, xatol, step)
    best, f, nit, nfev, ok = search.run(restarts)
    params = initial.replace(**best)
    fitted = model_yields(params, tenors)
    residuals = [{"tenor": t, "model": m, "quote": q, "residual": (m - q) * 1e4}
                 for t, m, q in zip(tenors, fitted, target)]
    return CalibrationResult(params, f, nit, nfev, ok, residuals, search.history)


def otm_filter(quotes: Sequence[Quote], spot_bps: float, max_otm: float = 0.30) -> list[Quote]:
    """Receivers struck below spot and payers above it, at most ``max_otm`` away in relative terms."""
    out = []
    for q in quotes:
        m = q.strike_bps / spot_bps - 1.0
        if q.side == "receiver" and -max_otm <= m < 0:
            out.append(q)
        elif q.side == "payer" and 0 < m <= max_otm:
            out.append(q)
    return out


@dataclass
class MCPricer:
    """Swaption prices (bps) on frozen uniforms, smooth in the parameters."""

    n_paths: int = 5000
    step: float = 1.0 / 52
    seed: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    def uniforms(self, T0: float) -> np.ndarray:
        steps = max(1, int(math.ceil(T0 / self.step - 1e-9)))
        key = (steps, self.n_paths, self.seed)
        if key not in self._cache:
            self._cache[key] = common_uniforms(self.n_paths, steps, np.random.default_rng(self.seed))
        return self._cache[key]

    def __call__(self, params: ModelParams, tenor: TenorStructure, strikes_bps, sides) -> np.ndarray:
        paths = simulate_inverse(params, tenor.t0, self.uniforms(tenor.t0))
        k = np.asarray(strikes_bps, dtype=float) * 1e-4
        return price_cdxo_strip(params, tenor, k, sides, paths) * 1e4


@dataclass
class PIDEPricer:
    """Swaption prices (bps) from the finite-difference solver, one solve per quote."""

    grid: object = None

    def __call__(self, params: ModelParams, tenor: TenorStructure, strikes_bps, sides) -> np.ndarray:
        from .pide import GridSpec, extract, solve
        from .pricing import cdxo_terminal_payoff

        grid = self.grid or GridSpec()
        out = []
        for k, side in zip(strikes_bps, sides):
            tk = tenor.with_strike(k * 1e-4)
            sol = solve(lambda R, L: cdxo_terminal_payoff(R, L, tk, params, side), tk.t0,
                        params, grid, keep_all=False)
            out.append(extract(sol, 0.0, params.r0, params.lambda0) * 1e4)
        return np.array(out)


def swaption_tenor(term: float, tenor_years: float = 5.0, frequency: int = 2,
                   delta: float = 0.6) -> TenorStructure:
    return TenorStructure.regular(term, tenor_years, frequency, delta=delta)


def calibrate_intensity(maturity_quotes: Sequence[Quote], rate_params: ModelParams,
                        initial: ModelParams, spot_bps: float | None = None,
                        lambda0_mode: Literal["joint", "parity"] = "joint",
                        pricer=None, weighting: Literal["none", "bidask"] = "none",
                        max_otm: float = 0.30, max_iter: int = 500, xatol: float = 1e-6,
                        step: float = 0.25, tenor_years: float = 5.0,
                        filter_otm: bool = True, restarts: int = 2) -> CalibrationResult:
    """Fit ``(theta_l, rho, c_l, gamma_l, c_tau, gamma_tau)`` and possibly ``lambda0``
    to the mid prices of one maturity.

    ``lambda0_mode='parity'`` instead sets ``lambda0`` so the forward CDX struck
    at ``spot_bps`` is worth zero. The loss is the sum of squared bps errors,
    optionally weighted by the inverse squared bid-ask width.
    """
    terms = {q.term for q in maturity_quotes}
    if len(terms) != 1:
        raise ValueError("quotes must share one maturity")
    term = terms.pop()
    tenor = swaption_tenor(term, tenor_years)
    quotes = list(maturity_quotes)
    if filter_otm:
        if spot_bps is None:
            raise ValueError("OTM filtering needs the spot spread")
        quotes = otm_filter(quotes, spot_bps, max_otm)
    if len(quotes) < 4:
        raise ValueError(f"need at least 4 OTM quotes, have {len(quotes)}")
    pricer = pricer or MCPricer()
    strikes = np.array([q.strike_bps for q in quotes])
    sides = [q.side for q in quotes]
    mids = np.array([q.mid for q in quotes])
    if weighting == "bidask":
        width = np.array([max(q.ask - q.bid, 1e-6) for q in quotes])
        weights = 1.0 / width**2
    else:
        weights = np.ones_like(mids)
    rate = {k: rate_params.as_dict()[k] for k in RATE_KEYS}
    keys = INTENSITY_KEYS + (("lambda0",) if lambda0_mode == "joint" else ())
    if lambda0_mode not in ("joint", "parity"):
        raise ValueError(f"unknown lambda0 mode {lambda0_mode!r}")
    if lambda0_mode == "parity" and spot_bps is None:
        raise ValueError("parity mode needs the spot spread")

    def build(x: dict) -> ModelParams:
        p = initial.replace(**rate, **x)
        if lambda0_mode == "parity":
            lam = implied_lambda(spot_bps * 1e-4, 0.0, p.r0, tenor, p, bracket=(0.0, 5.0))
            p = p.replace(lambda0=lam)
        return p

    def loss(x):
        p = build(x)
        model = pricer(p, tenor, strikes, sides)
        return float(np.sum(weights * (model - mids) ** 2))

    search = _Search(keys, initial.as_dict(), loss, max_iter, xatol, step)
    best, f, nit, nfev, ok = search.run(restarts)
    params = build(best)
    model = pricer(params, tenor, strikes, sides)
    residuals = [{"term": term, "strike_bps": k, "side": s, "model": m, "mid": q,
                  "residual": m - q} for k, s, m, q in zip(strikes, sides, model, mids)]
    return CalibrationResult(params, f, nit, nfev, ok, residuals, search.history)


def synthetic_quotes(params: ModelParams, term: float, strikes_bps, pricer=None,
                     half_spread: float = 1.0, date: str = "") -> list[Quote]:
    """Receiver and payer quotes at every strike, mid = model price, fixed half spread."""
    pricer = pricer or MCPricer()
    tenor = swaption_tenor(term)
    out = []
    for side in ("receiver", "payer"):
        prices = pricer(params, tenor, strikes_bps, [side] * len(strikes_bps))
        for k, m in zip(strikes_bps, prices):
            m = max(float(m), 0.0)
            out.append(Quote(term, float(k), side, max(m - half_spread, 0.0), m + half_spread,
                             m, date))
    return out


def synthetic_curve(params: ModelParams, tenors=(0.25, 0.5, 1, 2, 3, 5, 7, 10, 20, 30)) -> list[CurvePoint]:
    return [CurvePoint(float(t), float(y)) for t, y in zip(tenors, model_yields(params, tenors))]
