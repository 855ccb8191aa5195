"""Finite-difference solver for the swaption valuation PIDE on (t, r, lambda).

Convection and discounting are implicit (central differences in space), the
jump integral is explicit and estimated by importance-sampled Monte Carlo with
exponential proposals. The operator is constant in time, so it is factored once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .levy import DoubleGammaDensityTable
from .ou import ModelParams

JumpWeight = Literal["double_gamma", "gamma"]
Extrapolation = Literal["constant", "linear"]


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Mesh on [0, T] x [0, r_max] x [0, rho r_max] with ``N`` space steps per axis.

    ``jump_weight='double_gamma'`` weights intensity jumps by the subordinated
    Levy density; ``'gamma'`` uses ``gamma_l / (c_l y)``, the weight of a plain
    gamma intensity.
    """

    r_max: float = 0.5
    n_space: int = 50
    m_time: int = 100
    n_sim: int = 100
    seed: int = 0
    jump_weight: JumpWeight = "double_gamma"
    extrapolation: Extrapolation = "linear"
    lambda_max_override: float | None = None

    def __post_init__(self):
        if self.n_space < 3 or self.m_time < 1 or self.n_sim < 1 or self.r_max <= 0:
            raise ValueError(f"invalid grid {self}")

    def lambda_max(self, params: ModelParams) -> float:
        lmax = self.lambda_max_override or params.rho * self.r_max
        if lmax <= 0:
            raise ValueError("rho = 0 needs an explicit lambda_max_override")
        return lmax

    def axes(self, params: ModelParams):
        rates = np.linspace(0.0, self.r_max, self.n_space + 1)
        lams = np.linspace(0.0, self.lambda_max(params), self.n_space + 1)
        return rates, lams


@dataclass
class FDSolution:
    """Price lattice ``values[j, i, k]`` at calendar time ``times[j]``.

    ``times[0] = 0`` is the valuation date and ``times[-1] = T`` the expiry.
    """

    times: np.ndarray
    rates: np.ndarray
    intensities: np.ndarray
    values: np.ndarray
    grid: GridSpec = field(repr=False)

    @property
    def today(self) -> np.ndarray:
        return self.values[0]


def _interp_shift(u: np.ndarray, s_i: float, s_k: float, extrapolation: Extrapolation):
    """``u`` evaluated at every node shifted by (s_i, s_k) grid cells, bilinear.

    Off-lattice points beyond the last node are continued constantly or
    linearly from the boundary cell.
    """
    n_i, n_k = u.shape
    i = np.arange(n_i, dtype=float) + s_i
    k = np.arange(n_k, dtype=float) + s_k
    if extrapolation == "constant":
        i = np.clip(i, 0.0, n_i - 1)
        k = np.clip(k, 0.0, n_k - 1)
    i0 = np.clip(np.floor(i).astype(int), 0, n_i - 2)
    k0 = np.clip(np.floor(k).astype(int), 0, n_k - 2)
    fi = (i - i0)[:, None]
    fk = (k - k0)[None, :]
    a = u[np.ix_(i0, k0)]
    b = u[np.ix_(i0 + 1, k0)]
    c = u[np.ix_(i0, k0 + 1)]
    d = u[np.ix_(i0 + 1, k0 + 1)]
    return (1 - fi) * ((1 - fk) * a + fk * c) + fi * ((1 - fk) * b + fk * d)


class _JumpIntegral:
    """Monte Carlo estimator of the jump part of the generator on a lattice."""

    def __init__(self, params: ModelParams, grid: GridSpec):
        self.params = params
        self.grid = grid
        rates, lams = grid.axes(params)
        self.dr = rates[1] - rates[0]
        self.dl = lams[1] - lams[0]
        p = params
        self._table = None
        if grid.jump_weight == "double_gamma" and p.intensity.subordinator.gamma > 0:
            self._table = DoubleGammaDensityTable(p.intensity)

    def weight_rate(self, y):
        g = self.params.rate
        return g.gamma / (g.c * y)

    def weight_intensity(self, y):
        inner = self.params.intensity.inner
        if self.grid.jump_weight == "gamma":
            return inner.gamma / (inner.c * y)
        if self._table is None:
            return np.zeros_like(y)
        return self._table(y) * np.exp(inner.c * y) / inner.c

    def draw(self, rng: np.random.Generator):
        n = self.grid.n_sim
        y_r = rng.exponential(1.0 / self.params.rate.c, n)
        y_l = rng.exponential(1.0 / self.params.intensity.inner.c, n)
        return y_r, y_l

    def apply(self, u: np.ndarray, y_r, y_l) -> np.ndarray:
        p, ext = self.params, self.grid.extrapolation
        n = len(y_r)
        out = np.zeros_like(u)
        if p.rate.gamma > 0:
            # with lambda_max = rho r_max, (y, rho y) moves y/dr cells along both axes
            w = self.weight_rate(y_r)
            for y, wi in zip(y_r, w):
                out += wi * (_interp_shift(u, y / self.dr, p.rho * y / self.dl, ext) - u)
        w = self.weight_intensity(y_l)
        for y, wi in zip(y_l, w):
            if wi == 0.0:
                continue
            out += wi * (_interp_shift(u, 0.0, y / self.dl, ext) - u)
        return out / n


def integral_term(u_slice: np.ndarray, point: tuple[int, int], params: ModelParams,
                  grid: GridSpec, rng: np.random.Generator) -> float:
    """Jump integral at one lattice node ``(i, k)`` from a fresh sample set."""
    est = _JumpIntegral(params, grid)
    y_r, y_l = est.draw(rng)
    return float(est.apply(np.asarray(u_slice, dtype=float), y_r, y_l)[point])


def _operator(params: ModelParams, grid: GridSpec, dt: float):
    """Implicit matrix: discount + central convection inside, second-difference
    extrapolation rows on the boundary."""
    rates, lams = grid.axes(params)
    n = grid.n_space
    size = (n + 1) ** 2
    dr, dl = rates[1] - rates[0], lams[1] - lams[0]

    def idx(i, k):
        return i * (n + 1) + k

    rows, cols, vals = [], [], []

    def put(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    for i in range(n + 1):
        for k in range(n + 1):
            row = idx(i, k)
            if i == 0 or i == n:
                j1, j2 = (1, 2) if i == 0 else (n - 1, n - 2)
                put(row, row, 1.0)
                put(row, idx(j1, k), -2.0)
                put(row, idx(j2, k), 1.0)
            elif k == 0 or k == n:
                j1, j2 = (1, 2) if k == 0 else (n - 1, n - 2)
                put(row, row, 1.0)
                put(row, idx(i, j1), -2.0)
                put(row, idx(i, j2), 1.0)
            else:
                a1 = -params.theta_r * rates[i]
                a2 = -params.theta_lambda * lams[k]
                e = dt * a1 / (2 * dr)
                nn = dt * a2 / (2 * dl)
                put(row, row, 1.0 + dt * rates[i])
                put(row, idx(i + 1, k), -e)
                put(row, idx(i - 1, k), e)
                put(row, idx(i, k + 1), -nn)
                put(row, idx(i, k - 1), nn)
    mat = sparse.csc_matrix((vals, (rows, cols)), shape=(size, size))
    interior = np.zeros((n + 1, n + 1), dtype=bool)
    interior[1:-1, 1:-1] = True
    return mat, interior


def solve(terminal_payoff: Callable[[np.ndarray, np.ndarray], np.ndarray], T: float,
          params: ModelParams, grid: GridSpec, keep_all: bool = True) -> FDSolution:
    """March the payoff at expiry ``T`` back to today.

    ``terminal_payoff(R, L)`` is evaluated on the meshgrid of rates and
    intensities. With a fixed ``grid.seed`` results are reproducible.
    """
    rates, lams = grid.axes(params)
    R, L = np.meshgrid(rates, lams, indexing="ij")
    u = np.asarray(terminal_payoff(R, L), dtype=float)
    if u.shape != R.shape or not np.all(np.isfinite(u)):
        raise ValueError("terminal payoff must be finite on the lattice")
    m = grid.m_time
    dt = T / m
    mat, interior = _operator(params, grid, dt)
    try:
        lu = splu(mat)
    except RuntimeError as exc:
        raise SolverError(f"factorization failed: {exc}") from exc
    jumps = _JumpIntegral(params, grid)
    rng = np.random.default_rng(grid.seed)
    history = [u] if keep_all else None
    for _ in range(m):
        y_r, y_l = jumps.draw(rng)
        rhs = u + dt * jumps.apply(u, y_r, y_l)
        rhs = np.where(interior, rhs, 0.0)
        u = lu.solve(rhs.reshape(-1)).reshape(u.shape)
        if not np.all(np.isfinite(u)):
            raise SolverError("non-finite values in the solution")
        if keep_all:
            history.append(u)
    if keep_all:
        values = np.stack(history[::-1])
        times = np.linspace(0.0, T, m + 1)
    else:
        values = u[None]
        times = np.array([0.0])
    return FDSolution(times, rates, lams, values, grid)


def extract(solution: FDSolution, t: float, r: float, lam: float) -> float:
    """Bilinear in (r, lambda), linear in t."""
    rates, lams, times = solution.rates, solution.intensities, solution.times
    if not (rates[0] <= r <= rates[-1] and lams[0] <= lam <= lams[-1]):
        raise ValueError(f"({r}, {lam}) is outside the solution domain")
    if not (times[0] - 1e-12 <= t <= times[-1] + 1e-12):
        raise ValueError(f"t={t} is outside the solution time range")

    def spatial(slice_):
        dr, dl = rates[1] - rates[0], lams[1] - lams[0]
        return float(_interp_shift(slice_, r / dr, lam / dl, "constant")[0, 0])

    if len(times) == 1:
        return spatial(solution.values[0])
    pos = np.interp(t, times, np.arange(len(times)))
    j = min(int(math.floor(pos)), len(times) - 2)
    f = pos - j
    return (1 - f) * spatial(solution.values[j]) + f * spatial(solution.values[j + 1])
