"""Path simulation, doubly stochastic default times and Monte Carlo pricing."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

from .levy import sample_double_gamma_increment, sample_gamma_increment
from .ou import ModelParams
from .pricing import (
    OptionType,
    TenorStructure,
    cdx_spread,
    cdxo_terminal_payoff,
    forward_cdx_value,
    leg_values,
)

DEFAULT_STEP = 1.0 / 252


@dataclass
class MCEstimate:
    price: float
    std_error: float

    def __iter__(self):
        yield self.price
        yield self.std_error


def _estimate(samples) -> MCEstimate:
    samples = np.asarray(samples, dtype=float)
    return MCEstimate(float(samples.mean()), float(samples.std(ddof=1) / math.sqrt(samples.size)))


@dataclass
class PathSet:
    """Simulated paths; arrays have shape (n_paths, len(times)).

    ``int_r`` and ``int_lambda`` are the integrated processes ``Y^r``, ``Y^lambda``
    measured from time 0.
    """

    times: np.ndarray
    r: np.ndarray
    lam: np.ndarray
    int_r: np.ndarray
    int_lambda: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.r.shape[0]

    def discount(self, col: int = -1) -> np.ndarray:
        return np.exp(-self.int_r[:, col])


@dataclass
class DefaultSample:
    thresholds: np.ndarray
    default_times: np.ndarray


def simulate_paths(params: ModelParams, T: float, steps: int, n_paths: int,
                   rng: np.random.Generator, keep_paths: bool = True,
                   r0: float | None = None, lambda0: float | None = None) -> PathSet:
    """Exact OU decay between grid points, jumps aggregated at the end of each step.

    Integrals use the trapezoid rule on each step, which charges half of each
    aggregated jump to the step it arrives in. With ``keep_paths=False`` only
    the first and last columns are stored.
    """
    if steps < 1:
        raise ValueError("need at least one step")
    p = params
    h = T / steps
    dr, dl = math.exp(-p.theta_r * h), math.exp(-p.theta_lambda * h)
    r = np.full(n_paths, p.r0 if r0 is None else r0, dtype=float)
    lam = np.full(n_paths, p.lambda0 if lambda0 is None else lambda0, dtype=float)
    yr = np.zeros(n_paths)
    yl = np.zeros(n_paths)
    cols = steps + 1 if keep_paths else 2
    out = {k: np.empty((n_paths, cols)) for k in ("r", "lam", "yr", "yl")}

    def store(c):
        out["r"][:, c], out["lam"][:, c] = r, lam
        out["yr"][:, c], out["yl"][:, c] = yr, yl

    store(0)
    for k in range(steps):
        jr = sample_gamma_increment(p.rate, h, rng, n_paths)
        jl = sample_double_gamma_increment(p.intensity, h, rng, n_paths)
        r_new = dr * r + jr
        lam_new = dl * lam + p.rho * jr + jl
        yr += 0.5 * h * (r + r_new)
        yl += 0.5 * h * (lam + lam_new)
        r, lam = r_new, lam_new
        if keep_paths:
            store(k + 1)
    if not keep_paths:
        store(1)
    times = np.linspace(0.0, T, steps + 1) if keep_paths else np.array([0.0, T])
    return PathSet(times, out["r"], out["lam"], out["yr"], out["yl"])


def _steps_for(T: float, step: float) -> int:
    return max(1, int(math.ceil(T / step - 1e-9)))


def simulate_to_inception(params: ModelParams, tenor: TenorStructure, n_paths: int,
                          rng: np.random.Generator, step: float = DEFAULT_STEP,
                          r0=None, lambda0=None) -> PathSet:
    return simulate_paths(params, tenor.t0, _steps_for(tenor.t0, step), n_paths, rng,
                          keep_paths=False, r0=r0, lambda0=lambda0)


def common_uniforms(n_paths: int, steps: int, rng: np.random.Generator) -> np.ndarray:
    """Uniforms of shape (steps, 3, n_paths) for :func:`simulate_inverse`."""
    return rng.random((steps, 3, n_paths))


def _gamma_ppf(shape, u):
    # below ~1e-200 the quantile underflows to 0 anyway; gammaincinv returns nan there
    shape = np.asarray(shape, dtype=float)
    live = shape > 1e-200
    return np.where(live, special.gammaincinv(np.where(live, shape, 1.0), u), 0.0)


def simulate_inverse(params: ModelParams, T: float, uniforms: np.ndarray,
                     r0=None, lambda0=None) -> PathSet:
    """Same scheme as :func:`simulate_paths`, driven by fixed uniforms through
    inverse gamma distribution functions.

    The terminal state is then a smooth function of the parameters, which is
    what a derivative-free optimizer needs. Only the end points are stored.
    """
    steps, _, n = uniforms.shape
    p = params
    h = T / steps
    dr, dl = math.exp(-p.theta_r * h), math.exp(-p.theta_lambda * h)
    r = np.full(n, p.r0 if r0 is None else r0, dtype=float)
    lam = np.full(n, p.lambda0 if lambda0 is None else lambda0, dtype=float)
    r_start, l_start = r.copy(), lam.copy()
    yr = np.zeros(n)
    yl = np.zeros(n)
    inner, sub = p.intensity.inner, p.intensity.subordinator
    for k in range(steps):
        u = uniforms[k]
        jr = _gamma_ppf(p.rate.gamma * h, u[0]) / p.rate.c
        clock = _gamma_ppf(sub.gamma * h, u[1]) / sub.c
        jl = _gamma_ppf(inner.gamma * clock, u[2]) / inner.c
        r_new = dr * r + jr
        lam_new = dl * lam + p.rho * jr + jl
        yr += 0.5 * h * (r + r_new)
        yl += 0.5 * h * (lam + lam_new)
        r, lam = r_new, lam_new
    stack = lambda a, b: np.column_stack([a, b])  # noqa: E731
    return PathSet(np.array([0.0, T]), stack(r_start, r), stack(l_start, lam),
                   stack(np.zeros(n), yr), stack(np.zeros(n), yl))


def price_cdxo_strip(params: ModelParams, tenor: TenorStructure, strikes, sides,
                     paths: PathSet) -> np.ndarray:
    """Swaption prices for many (strike, side) pairs on one set of paths at ``T0``.

    ``sides`` holds ``'receiver'`` or ``'payer'`` per strike; strikes are per annum.
    """
    legs = leg_values(tenor.t0, paths.r[:, -1], paths.lam[:, -1], tenor, params)
    disc = paths.discount()
    out = np.empty(len(strikes))
    for j, (k, side) in enumerate(zip(strikes, sides)):
        swap = k * legs.annuity - legs.protection
        if side == "payer":
            swap = -swap
        elif side != "receiver":
            raise ValueError(f"unknown option type {side!r}")
        out[j] = np.mean(disc * np.maximum(swap, 0.0))
    return out


def price_cdxo_mc(params: ModelParams, tenor: TenorStructure, option_type: OptionType,
                  n_paths: int, rng: np.random.Generator, step: float = DEFAULT_STEP,
                  r0=None, lambda0=None) -> MCEstimate:
    """Discounted analytic expiry payoff averaged over simulated states at ``T0``."""
    paths = simulate_to_inception(params, tenor, n_paths, rng, step, r0, lambda0)
    payoff = cdxo_terminal_payoff(paths.r[:, -1], paths.lam[:, -1], tenor, params, option_type)
    return _estimate(paths.discount() * payoff)


def price_forward_mc(params: ModelParams, tenor: TenorStructure, n_paths: int,
                     rng: np.random.Generator, step: float = DEFAULT_STEP,
                     r0=None, lambda0=None) -> MCEstimate:
    """Protection-buyer forward CDX value by simulation to inception."""
    paths = simulate_to_inception(params, tenor, n_paths, rng, step, r0, lambda0)
    value = forward_cdx_value(tenor.t0, paths.r[:, -1], paths.lam[:, -1], tenor, params)
    return _estimate(paths.discount() * value)


def sample_defaults(times: np.ndarray, int_lambda: np.ndarray, n_names: int,
                    rng: np.random.Generator) -> DefaultSample:
    """Default times of ``n_names`` entities sharing one integrated-intensity path.

    ``tau_i = inf{t : Lambda_t >= eps_i}`` with unit exponential thresholds, located
    by linear interpolation of ``Lambda``; ``inf`` when the threshold is never hit.
    """
    eps = rng.exponential(1.0, n_names)
    cum = np.maximum.accumulate(np.asarray(int_lambda, dtype=float))
    tau = np.full(n_names, np.inf)
    hit = eps <= cum[-1]
    if np.any(hit):
        idx = np.searchsorted(cum, eps[hit], side="left")
        idx = np.clip(idx, 1, len(cum) - 1)
        lo, hi = cum[idx - 1], cum[idx]
        frac = np.where(hi > lo, (eps[hit] - lo) / np.where(hi > lo, hi - lo, 1.0), 1.0)
        tau[hit] = times[idx - 1] + frac * (times[idx] - times[idx - 1])
    return DefaultSample(eps, tau)


def model_implied_statistic(params: ModelParams, tenor: TenorStructure,
                            H: Callable[[np.ndarray], np.ndarray], n_paths: int,
                            rng: np.random.Generator, step: float = DEFAULT_STEP,
                            paths: PathSet | None = None) -> MCEstimate:
    """Annuity-measure expectation ``E^A[H(c_T0)]`` as a ratio of Monte Carlo means.

    Numerator weights ``H`` of the inception par spread by the discounted annuity;
    the denominator is the Monte Carlo mean of the same weight, so ``H = 1`` gives
    exactly 1. The standard error comes from the delta method.
    """
    if paths is None:
        paths = simulate_to_inception(params, tenor, n_paths, rng, step)
    r, lam = paths.r[:, -1], paths.lam[:, -1]
    legs = leg_values(tenor.t0, r, lam, tenor, params)
    weight = paths.discount() * legs.annuity
    spread = legs.protection / legs.annuity
    x = weight * np.asarray(H(spread), dtype=float)
    mx, mw = x.mean(), weight.mean()
    ratio = mx / mw
    resid = (x - ratio * weight) / mw
    return MCEstimate(float(ratio), float(resid.std(ddof=1) / math.sqrt(x.size)))


def spread_at_inception(params: ModelParams, tenor: TenorStructure, paths: PathSet):
    return cdx_spread(tenor.t0, paths.r[:, -1], paths.lam[:, -1], tenor, params)
