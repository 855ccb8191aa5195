"""Semi-analytic prices: Treasury zero-coupon bonds, CDX legs, forward CDX and the
CDX swaption payoff at expiry.

Every expectation here is ``exp(A - B_r r - B_lambda lambda)`` for deterministic
``A, B_r, B_lambda``; only the jump integrals over time are done numerically.
Values are fractions of notional; multiply by 1e4 for bps.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy import optimize

from .ou import DEFAULT_NODES, LoadingCoeffs, ModelParams, affine_laplace_coeffs

OptionType = Literal["receiver", "payer"]


class DegenerateAnnuityError(ArithmeticError):
    pass


@dataclass(frozen=True)
class TenorStructure:
    """Forward-start CDX: inception ``t0``, premium dates, loss given default, pool size, strike."""

    t0: float
    payments: tuple[float, ...]
    delta: float = 0.6
    n_names: int = 125
    strike: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "payments", tuple(float(x) for x in self.payments))
        dates = (self.t0,) + self.payments
        if self.t0 < 0 or len(self.payments) == 0 or any(b <= a for a, b in zip(dates, dates[1:])):
            raise ValueError("need 0 <= t0 < T1 < ... < TM")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("loss given default must lie in [0, 1]")
        if self.n_names < 1:
            raise ValueError("pool size must be positive")

    @classmethod
    def regular(cls, t0: float, tenor_years: float, frequency: int = 2, **kw) -> "TenorStructure":
        n = int(round(tenor_years * frequency))
        return cls(t0, tuple(t0 + (k + 1) / frequency for k in range(n)), **kw)

    def with_strike(self, strike: float) -> "TenorStructure":
        return TenorStructure(self.t0, self.payments, self.delta, self.n_names, strike)

    @property
    def accruals(self) -> np.ndarray:
        return np.diff(np.concatenate([[self.t0], self.payments]))

    @property
    def starts(self) -> np.ndarray:
        return np.concatenate([[self.t0], self.payments[:-1]])


@dataclass
class LegValues:
    g: np.ndarray
    h: np.ndarray
    accruals: np.ndarray = field(repr=False)
    delta: float = 0.6

    @property
    def annuity(self):
        return np.tensordot(self.accruals, self.h, axes=(0, 0))

    @property
    def protection(self):
        return self.delta * (self.g.sum(axis=0) - self.h.sum(axis=0))


@dataclass(frozen=True)
class _Affine:
    """exp(a - b_r r - b_l lambda), stacked over legs."""

    a: np.ndarray
    b_r: np.ndarray
    b_l: np.ndarray

    def __call__(self, r, lam):
        r = np.asarray(r, dtype=float)
        lam = np.asarray(lam, dtype=float)
        shape = (-1,) + (1,) * np.broadcast(r, lam).ndim
        a, br, bl = (x.reshape(shape) for x in (self.a, self.b_r, self.b_l))
        return np.exp(a - br * r - bl * lam)


def _b(theta, s):
    return -np.expm1(-theta * s) / theta


def _zcb_coeffs(tau, params: ModelParams, nodes=DEFAULT_NODES):
    return affine_laplace_coeffs(tau, LoadingCoeffs(a1=1.0), params, nodes)


def _discount_to(tau, affine: _Affine, params: ModelParams, nodes=DEFAULT_NODES) -> _Affine:
    """Roll ``exp(a - b_r r_T - b_l l_T)`` back over ``tau`` under risk-free discounting."""
    out = [affine_laplace_coeffs(tau, LoadingCoeffs(1.0, 0.0, br, bl), params, nodes)
           for br, bl in zip(affine.b_r, affine.b_l)]
    a, br, bl = (np.array(v) for v in zip(*out)) if out else (np.zeros(0),) * 3
    return _Affine(affine.a + a, br, bl)


@lru_cache(maxsize=64)
def _legs_from(start: float, tenor: TenorStructure, params: ModelParams, nodes=DEFAULT_NODES):
    """Affine forms of ``g_l`` and ``h_l`` counting defaults from ``start`` on.

    With ``start = T0`` these are the inception legs; an earlier ``start`` also
    counts defaults before inception.
    """
    h = [affine_laplace_coeffs(T - start, LoadingCoeffs(1.0, 1.0), params, nodes)
         for T in tenor.payments]
    g = []
    for prev, T in zip(tenor.starts, tenor.payments):
        zeta = _b(params.theta_r, T - prev)
        a_p, _, _ = _zcb_coeffs(T - prev, params, nodes)
        a, br, bl = affine_laplace_coeffs(prev - start, LoadingCoeffs(1.0, 1.0, zeta, 0.0),
                                          params, nodes)
        g.append((a + a_p, br, bl))
    return (_Affine(*(np.array(v) for v in zip(*g))), _Affine(*(np.array(v) for v in zip(*h))))


def zcb_price(t, T, r_t, params: ModelParams, nodes: int = DEFAULT_NODES):
    """Default-free zero-coupon bond ``P(t, T)`` given the short rate ``r_t``."""
    if T < t:
        raise ValueError("need t <= T")
    a, br, _ = _zcb_coeffs(T - t, params, nodes)
    return np.exp(a - br * np.asarray(r_t, dtype=float))


def survival_discount(t, T, r_t, lambda_t, params: ModelParams, nodes: int = DEFAULT_NODES):
    """``E[exp(-int_t^T (r + lambda))]``."""
    a, br, bl = affine_laplace_coeffs(T - t, LoadingCoeffs(1.0, 1.0), params, nodes)
    return np.exp(a - br * np.asarray(r_t, dtype=float) - bl * np.asarray(lambda_t, dtype=float))


def h_leg(t, r_t, lambda_t, T0, T_ell, params: ModelParams, nodes: int = DEFAULT_NODES):
    """``E[exp(-int_t^T0 r) E[exp(-int_T0^Tl (r + lambda)) | F_T0] | F_t]``."""
    if not t <= T0 <= T_ell:
        raise ValueError("need t <= T0 <= T_ell")
    inner = _Affine(*(np.array([v]) for v in
                      affine_laplace_coeffs(T_ell - T0, LoadingCoeffs(1.0, 1.0), params, nodes)))
    return _discount_to(T0 - t, inner, params, nodes)(r_t, lambda_t)[0]


def g_leg(t, r_t, lambda_t, T0, T_ell_minus_1, T_ell, params: ModelParams,
          nodes: int = DEFAULT_NODES):
    """``E[exp(-int_t^T0 r) E[exp(-int_T0^Tl-1 (r + lambda)) P(Tl-1, Tl) | F_T0] | F_t]``."""
    if not (t <= T0 <= T_ell_minus_1 <= T_ell):
        raise ValueError("need t <= T0 <= T_ell_minus_1 <= T_ell")
    zeta = _b(params.theta_r, T_ell - T_ell_minus_1)
    a_p, _, _ = _zcb_coeffs(T_ell - T_ell_minus_1, params, nodes)
    a, br, bl = affine_laplace_coeffs(T_ell_minus_1 - T0, LoadingCoeffs(1.0, 1.0, zeta, 0.0),
                                      params, nodes)
    inner = _Affine(np.array([a + a_p]), np.array([br]), np.array([bl]))
    return _discount_to(T0 - t, inner, params, nodes)(r_t, lambda_t)[0]


def leg_values(t, r_t, lambda_t, tenor: TenorStructure, params: ModelParams,
               nodes: int = DEFAULT_NODES) -> LegValues:
    """All ``g_l`` and ``h_l`` at time ``t <= T0``, vectorized over the state."""
    if t > tenor.t0:
        raise ValueError("legs are defined for t <= T0")
    g_aff, h_aff = _legs_from(tenor.t0, tenor, params, nodes)
    if t < tenor.t0:
        g_aff = _discount_to(tenor.t0 - t, g_aff, params, nodes)
        h_aff = _discount_to(tenor.t0 - t, h_aff, params, nodes)
    return LegValues(g_aff(r_t, lambda_t), h_aff(r_t, lambda_t), tenor.accruals, tenor.delta)


def cdx_spread(t, r_t, lambda_t, tenor: TenorStructure, params: ModelParams,
               nodes: int = DEFAULT_NODES):
    """Par spread ``delta (g - h) / sum(accrual_l h_l)`` (per annum)."""
    legs = leg_values(t, r_t, lambda_t, tenor, params, nodes)
    annuity = legs.annuity
    if np.any(annuity <= 0):
        raise DegenerateAnnuityError("annuity is not positive")
    return legs.protection / annuity


def forward_cdx_value(t, r_t, lambda_t, tenor: TenorStructure, params: ModelParams,
                      include_fep: bool = False, nodes: int = DEFAULT_NODES):
    """Protection-buyer value ``protection - strike * annuity`` of the forward CDX.

    With ``include_fep`` the legs count defaults between ``t`` and inception, and the
    discounted loss paid at inception on those names is added.
    """
    if not include_fep:
        legs = leg_values(t, r_t, lambda_t, tenor, params, nodes)
        return legs.protection - tenor.strike * legs.annuity
    g_aff, h_aff = _legs_from(float(t), tenor, params, nodes)
    g, h = g_aff(r_t, lambda_t), h_aff(r_t, lambda_t)
    annuity = np.tensordot(tenor.accruals, h, axes=(0, 0))
    protection = tenor.delta * (g.sum(axis=0) - h.sum(axis=0))
    front_end = tenor.delta * (zcb_price(t, tenor.t0, r_t, params, nodes)
                               - survival_discount(t, tenor.t0, r_t, lambda_t, params, nodes))
    return protection + front_end - tenor.strike * annuity


def front_end_protection(t, r_t, lambda_t, tenor: TenorStructure, params: ModelParams,
                         nodes: int = DEFAULT_NODES):
    """Value added to the forward CDX by counting pre-inception defaults."""
    return (forward_cdx_value(t, r_t, lambda_t, tenor, params, True, nodes)
            - forward_cdx_value(t, r_t, lambda_t, tenor, params, False, nodes))


def cdxo_terminal_payoff(r, lam, tenor: TenorStructure, params: ModelParams,
                         option: OptionType = "receiver", nodes: int = DEFAULT_NODES):
    """Swaption payoff at expiry T0.

    Receiver: ``[strike * annuity - delta (g - h)]^+``; payer is the mirror image.
    """
    legs = leg_values(tenor.t0, r, lam, tenor, params, nodes)
    receiver_swap = tenor.strike * legs.annuity - legs.protection
    if option == "receiver":
        return np.maximum(receiver_swap, 0.0)
    if option == "payer":
        return np.maximum(-receiver_swap, 0.0)
    raise ValueError(f"unknown option type {option!r}")


def implied_lambda(spread: float, t: float, r_t: float, tenor: TenorStructure,
                   params: ModelParams, bracket=(0.0, 1.0), xtol: float = 1e-14):
    """Intensity making the forward CDX struck at ``spread`` worth zero.

    This is how the unobservable ``lambda_t`` is read off the parity strike.
    """
    tn = tenor.with_strike(spread)

    def f(lam):
        return float(forward_cdx_value(t, r_t, lam, tn, params))

    lo, hi = bracket
    f_lo, f_hi = f(lo), f(hi)
    if f_lo * f_hi > 0:
        raise ValueError("forward value does not change sign on the bracket")
    lam = optimize.brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
    if abs(f(lam)) > 1e-10:
        raise ArithmeticError("root-find on the forward value did not reach 1e-10")
    return lam
