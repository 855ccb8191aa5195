"""Model-free annuity, forward spread and spread moments under the annuity measure,
read off a strike continuum of receiver and payer swaption prices.

Strikes and prices are both in bps throughout this module.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import PchipInterpolator

from .montecarlo import simulate_to_inception
from .ou import ModelParams
from .pricing import TenorStructure, leg_values


class ExtractionError(ArithmeticError):
    pass


@dataclass(frozen=True)
class PriceCurve:
    """Receiver and payer prices on an ascending strike grid (all in bps)."""

    strikes: np.ndarray
    receiver: np.ndarray
    payer: np.ndarray
    tol: float = field(default=1e-9, repr=False)

    def __post_init__(self):
        k, r, p = (np.asarray(v, dtype=float) for v in (self.strikes, self.receiver, self.payer))
        if not (k.ndim == 1 and k.shape == r.shape == p.shape and k.size >= 2):
            raise ValueError("strikes and prices must be 1-D arrays of equal length >= 2")
        if np.any(np.diff(k) <= 0):
            raise ValueError("strikes must be strictly ascending")
        if np.any(np.diff(r) < -self.tol) or np.any(np.diff(p) > self.tol):
            raise ValueError("receiver prices must rise and payer prices fall with the strike")
        object.__setattr__(self, "strikes", k)
        object.__setattr__(self, "receiver", r)
        object.__setattr__(self, "payer", p)

    def scaled(self, k: float) -> "PriceCurve":
        return PriceCurve(self.strikes, k * self.receiver, k * self.payer, self.tol)

    def trimmed(self) -> "PriceCurve":
        """Drop the outermost quote on each side."""
        s = slice(1, -1)
        return PriceCurve(self.strikes[s], self.receiver[s], self.payer[s], self.tol)


@dataclass(frozen=True)
class MomentReport:
    """``mu4`` is the conventional kurtosis ``E[(c - c_f)^4] / mu2^2``;
    ``mu4_literal`` follows the printed display (``mu2^4`` and a second factor
    12 on the receiver integral)."""

    c_f: float
    annuity: float
    mu2: float
    mu3: float
    mu4: float
    mu4_literal: float
    truncation: dict | None = None


def forward_spread(curve: PriceCurve) -> float:
    """Strike where interpolated payer and receiver prices cross."""
    diff = curve.payer - curve.receiver
    s = np.sign(diff)
    if s[0] <= 0 or s[-1] >= 0:
        if diff[0] == 0.0:
            return float(curve.strikes[0])
        raise ExtractionError("payer minus receiver does not change sign on the strike grid")
    f = PchipInterpolator(curve.strikes, diff)
    j = int(np.argmax(s <= 0))
    lo, hi = curve.strikes[j - 1], curve.strikes[j]
    if diff[j] == 0.0:
        return float(hi)
    return float(optimize.brentq(f, lo, hi, xtol=1e-12))


def payer_at_zero(curve: PriceCurve) -> float:
    """``u_p(0, 0)`` by linear extrapolation of the two lowest payer quotes.

    The result is floored at the parity bound: payer minus receiver is the
    forward, linear in the strike, and receivers are worth nothing at strike 0.
    """
    k, p = curve.strikes, curve.payer
    if k[0] == 0.0:
        return float(p[0])
    f = p - curve.receiver
    slope = (p[1] - p[0]) / (k[1] - k[0])
    parity = f[0] - (f[1] - f[0]) / (k[1] - k[0]) * k[0]
    return float(max(p[0] - slope * k[0], parity, p[0]))


def annuity_estimate(curve: PriceCurve, c_f: float) -> float:
    """Expected annuity ``u_p(0, 0) / c_f`` (bps price over bps spread)."""
    if c_f <= 0:
        raise ExtractionError("forward spread must be positive")
    up0 = payer_at_zero(curve)
    if up0 <= 0:
        raise ExtractionError("extrapolated payer price at strike 0 is not positive")
    return up0 / c_f


@dataclass(frozen=True)
class CarrMadan:
    """``H(c) = level + slope (c - c_hat) + int_0^c_hat H'' (k - c)^+ dk
    + int_c_hat^inf H'' (c - k)^+ dk``."""

    c_hat: float
    level: float
    slope: float
    second: Callable[[np.ndarray], np.ndarray]

    def receiver_density(self, k):
        k = np.asarray(k, dtype=float)
        return np.where((k >= 0) & (k <= self.c_hat), self.second(k), 0.0)

    def payer_density(self, k):
        k = np.asarray(k, dtype=float)
        return np.where(k >= self.c_hat, self.second(k), 0.0)

    def reconstruct(self, c: float) -> float:
        """Evaluate the decomposition at ``c`` by adaptive quadrature."""
        h = self.c_hat
        opts = dict(epsabs=1e-13, epsrel=1e-13, limit=200)
        rec = integrate.quad(lambda k: self.second(k) * (k - c), c, h, **opts)[0] if c < h else 0.0
        pay = integrate.quad(lambda k: self.second(k) * (c - k), h, c, **opts)[0] if c > h else 0.0
        return self.level + self.slope * (c - h) + rec + pay


def carr_madan_weights(H: Callable, c_hat: float, dH: Callable | None = None,
                       d2H: Callable | None = None, step: float = 1e-4) -> CarrMadan:
    """Static replication weights of ``H`` around ``c_hat``.

    Missing derivatives are taken by central differences with the given step.
    """
    if c_hat < 0:
        raise ValueError("expansion point must be nonnegative")
    if dH is None:
        dH = lambda c: (H(c + step) - H(c - step)) / (2 * step)  # noqa: E731
    if d2H is None:
        d2H = lambda c: (H(c + step) - 2 * H(c) + H(c - step)) / step**2  # noqa: E731
    return CarrMadan(float(c_hat), float(H(c_hat)), float(dH(c_hat)),
                     lambda k: np.asarray(d2H(np.asarray(k, dtype=float)), dtype=float))


def _sides(curve: PriceCurve, c_f: float):
    """Receiver leg on strikes <= c_f and payer leg on strikes >= c_f, with c_f
    inserted as a node by monotone interpolation."""
    k = curve.strikes
    r_f = float(np.clip(PchipInterpolator(k, curve.receiver)(c_f), 0.0, None))
    p_f = float(np.clip(PchipInterpolator(k, curve.payer)(c_f), 0.0, None))
    lo = k < c_f
    hi = k > c_f
    kr = np.concatenate([k[lo], [c_f]])
    ur = np.concatenate([curve.receiver[lo], [r_f]])
    kp = np.concatenate([[c_f], k[hi]])
    up = np.concatenate([[p_f], curve.payer[hi]])
    return kr, ur, kp, up


def _raw_moments(curve: PriceCurve, c_f: float, up0: float):
    kr, ur, kp, up = _sides(curve, c_f)
    trap = np.trapezoid

    def both(n):
        return trap((kp - c_f) ** n * up, kp), trap((kr - c_f) ** n * ur, kr)

    p0, r0 = both(0)
    mu2 = 2.0 * c_f / up0 * (p0 + r0)
    if not mu2 > 0:
        raise ExtractionError("variance integral is not positive")
    p1, r1 = both(1)
    mu3 = 6.0 * c_f / (mu2**1.5 * up0) * (p1 + r1)
    p2, r2 = both(2)
    mu4 = 12.0 * c_f / (mu2**2 * up0) * (p2 + r2)
    mu4_lit = 12.0 * c_f / (mu2**4 * up0) * (p2 + 12.0 * r2)
    return float(mu2), float(mu3), float(mu4), float(mu4_lit)


def implied_moments(curve: PriceCurve, c_f: float | None = None,
                    annuity: float | None = None, diagnostic: bool = True) -> MomentReport:
    """Variance, skewness and kurtosis of the inception spread under the annuity measure.

    Strike integrals are trapezoid sums over the quotes; options beyond the last
    quote are taken to be worthless. ``f_p(0, 0)`` is ``annuity * c_f``.
    With ``diagnostic`` the moments are recomputed without the outermost quotes
    and the relative changes reported in ``truncation``.
    """
    if c_f is None:
        c_f = forward_spread(curve)
    if annuity is None:
        annuity = annuity_estimate(curve, c_f)
    if not curve.strikes[0] <= c_f <= curve.strikes[-1]:
        raise ExtractionError("strike grid does not straddle the forward spread")
    fp00 = annuity * c_f
    mu2, mu3, mu4, mu4_lit = _raw_moments(curve, c_f, fp00)
    trunc = None
    if diagnostic and curve.strikes.size >= 5:
        t = curve.trimmed()
        if t.strikes[0] < c_f < t.strikes[-1]:
            m = _raw_moments(t, c_f, fp00)
            trunc = {name: (a - b) / b if b else math.nan
                     for name, a, b in zip(("mu2", "mu3", "mu4"), m[:3], (mu2, mu3, mu4))}
    return MomentReport(c_f, annuity, mu2, mu3, mu4, mu4_lit, trunc)


def model_price_curve(params: ModelParams, tenor: TenorStructure, strikes_bps,
                      n_paths: int, rng: np.random.Generator, step: float | None = None) -> PriceCurve:
    """Receiver/payer prices from one set of simulated inception states.

    Conditional on the state at ``T0`` the payoffs are analytic, so the only
    noise is in the state; common paths keep the curve arbitrage-consistent.
    """
    kw = {} if step is None else {"step": step}
    paths = simulate_to_inception(params, tenor, n_paths, rng, **kw)
    legs = leg_values(tenor.t0, paths.r[:, -1], paths.lam[:, -1], tenor, params)
    weight = paths.discount() * legs.annuity
    spread = legs.protection / legs.annuity * 1e4
    k = np.asarray(strikes_bps, dtype=float)
    order = np.argsort(spread)
    s_sorted, w_sorted = spread[order], weight[order]
    cw = np.concatenate([[0.0], np.cumsum(w_sorted)])
    cws = np.concatenate([[0.0], np.cumsum(w_sorted * s_sorted)])
    idx = np.searchsorted(s_sorted, k)
    n = spread.size
    # E[w (k - c)^+] and E[w (c - k)^+] from prefix sums over sorted spreads
    rec = (k * cw[idx] - cws[idx]) / n
    pay = ((cws[-1] - cws[idx]) - k * (cw[-1] - cw[idx])) / n
    return PriceCurve(k, rec, pay, tol=1e-9)


def annuity_measure_moments(params: ModelParams, tenor: TenorStructure, n_paths: int,
                            rng: np.random.Generator, window: tuple[float, float] | None = None):
    """Direct simulation of ``c_f, mu2, mu3, mu4`` (bps) under the annuity measure.

    With ``window = (lo, hi)`` each power ``(c - c_f)^n`` is replaced by the
    payoff the truncated strike strip actually replicates,
    ``n x a^(n-1) - (n-1) a^n`` with ``x = c - c_f`` and ``a`` the clamp of ``x``
    to ``[lo - c_f, hi - c_f]``.
    """
    paths = simulate_to_inception(params, tenor, n_paths, rng)
    legs = leg_values(tenor.t0, paths.r[:, -1], paths.lam[:, -1], tenor, params)
    w = paths.discount() * legs.annuity
    c = legs.protection / legs.annuity * 1e4
    w = w / w.sum()
    c_f = float(np.dot(w, c))
    x = c - c_f
    if window is None:
        powers = {n: x**n for n in (2, 3, 4)}
    else:
        a = np.clip(x, window[0] - c_f, window[1] - c_f)
        powers = {n: n * x * a ** (n - 1) - (n - 1) * a**n for n in (2, 3, 4)}
    m2 = float(np.dot(w, powers[2]))
    return {"c_f": c_f, "mu2": m2, "mu3": float(np.dot(w, powers[3])) / m2**1.5,
            "mu4": float(np.dot(w, powers[4])) / m2**2}


def write_moments_csv(rows, path) -> None:
    """``rows``: iterable of ``(term, market MomentReport | None, model MomentReport | None)``."""
    cols = ["term", "market_mu2", "market_mu3", "market_mu4",
            "model_mu2", "model_mu3", "model_mu4", "model_mu4_literal"]
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for term, mkt, mdl in rows:
            vals = [term]
            vals += [f"{v:.6e}" for v in (mkt.mu2, mkt.mu3, mkt.mu4)] if mkt else ["", "", ""]
            vals += ([f"{v:.6e}" for v in (mdl.mu2, mdl.mu3, mdl.mu4, mdl.mu4_literal)]
                     if mdl else ["", "", "", ""])
            w.writerow(vals)
