"""Transition and stationary densities of (r, lambda) by 2D FFT inversion.

With frequencies ``u_k = -B + k eta`` and space nodes ``x_l = x0 + l h``,
``h eta = 2 pi / n``, the inversion sum

    f(x_l) = eta^2 / (4 pi^2) sum_k exp(-i u_k x_l) phi(u_k)

factors into a phase ``(-1)^l`` (because ``B h = pi``), a shift term for
``x0`` and a plain forward FFT along each axis.

The intensity marginal of the double-gamma model has a sharp spike near its
lower bound and a characteristic function that decays only logarithmically,
so the raw inversion rings. By default the transform is multiplied by a
Gaussian window of ``smoothing`` cells, i.e. the density is convolved with a
narrow Gaussian kernel; means are unchanged and :meth:`DensityField.moments`
removes the added variance.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ou import ModelParams, char_fn_state, stationary_char_fn, stationary_moments

log = logging.getLogger(__name__)


class DensityGridError(ArithmeticError):
    """The lattice is too coarse or too narrow for the density at hand."""


def _pair(x) -> tuple[float, float]:
    if np.ndim(x) == 0:
        return float(x), float(x)
    a, b = x
    return float(a), float(b)


@dataclass(frozen=True)
class FFTGrid:
    """Conjugate frequency/space lattices, one per axis (r first, lambda second).

    ``b_freq`` is the frequency half-width ``B``; ``origin`` is the lowest
    space node. ``origin=None`` centres the space grid on zero as in the
    symmetric textbook layout.
    """

    n: tuple[int, int]
    b_freq: tuple[float, float]
    origin: tuple[float, float] | None = None

    def __post_init__(self):
        n = tuple(int(v) for v in _pair(self.n))
        if any(v < 2 or v & (v - 1) for v in n):
            raise ValueError("grid sizes must be powers of two")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "b_freq", _pair(self.b_freq))
        if min(self.b_freq) <= 0:
            raise ValueError("frequency half-width must be positive")
        if self.origin is None:
            object.__setattr__(self, "origin", tuple(-b for b in self.b_space))
        else:
            object.__setattr__(self, "origin", _pair(self.origin))

    @property
    def eta(self) -> np.ndarray:
        return 2.0 * np.asarray(self.b_freq) / np.asarray(self.n)

    @property
    def space_step(self) -> np.ndarray:
        return 2.0 * math.pi / (np.asarray(self.n) * self.eta)

    @property
    def b_space(self) -> tuple[float, float]:
        return tuple(float(v) for v in np.asarray(self.n) * self.space_step / 2.0)

    def axes(self):
        h = self.space_step
        return tuple(self.origin[a] + np.arange(self.n[a]) * h[a] for a in (0, 1))

    def frequencies(self):
        eta = self.eta
        return tuple(-self.b_freq[a] + np.arange(self.n[a]) * eta[a] for a in (0, 1))

    @classmethod
    def covering(cls, r_range: tuple[float, float], lambda_range: tuple[float, float],
                 n=2**10) -> "FFTGrid":
        """Grid whose space lattice starts at the lower ends and spans the given widths."""
        n = _pair(n)
        widths = (r_range[1] - r_range[0], lambda_range[1] - lambda_range[0])
        if min(widths) <= 0:
            raise ValueError("ranges must have positive width")
        b = tuple(math.pi * m / w for m, w in zip(n, widths))
        return cls(n, b, (r_range[0], lambda_range[0]))

    @classmethod
    def full_preset(cls) -> "FFTGrid":
        """n = 2^13 and B = 1e6 on both axes; about 1 GiB of complex128 work space."""
        return cls(2**13, 1.0e6)


DESK_N = (2**8, 2**14)


def desk_grid(params: ModelParams, n=DESK_N, sd: float = 12.0, tail: float = 20.0,
              pad_cells: int = 32) -> FFTGrid:
    """Grid for desk use: a coarse rate axis and a long, fine intensity axis.

    The rate axis reaches ``sd`` stationary deviations above the larger of
    ``r0`` and the stationary mean; the intensity axis reaches ``tail / c_lambda``
    further, where the exponential tail of the jump law is negligible.
    Both start ``pad_cells`` cells below zero so smoothing does not wrap.
    """
    n = _pair(n)
    m = stationary_moments(params)
    top_r = max(params.r0, m["mean_r"]) + sd * math.sqrt(m["var_r"])
    top_l = max(params.lambda0, m["mean_lambda"]) + tail / params.intensity.inner.c
    lo_r = -top_r * pad_cells / (n[0] - pad_cells)
    lo_l = -top_l * pad_cells / (n[1] - pad_cells)
    return FFTGrid.covering((lo_r, top_r), (lo_l, top_l), n)


@dataclass
class DensityField:
    """Raw density values ``values[i, k]`` at ``(rates[i], intensities[k])``.

    Moments use the raw field; :meth:`clipped` exists only for display.
    """

    rates: np.ndarray
    intensities: np.ndarray
    values: np.ndarray
    horizon: float | None
    grid: FFTGrid = field(repr=False)
    smoothing: float = 0.0

    @property
    def cell(self) -> float:
        return float(np.prod(self.grid.space_step))

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.cell)

    @property
    def negative_mass(self) -> float:
        return float(np.minimum(self.values, 0.0).sum() * self.cell)

    @property
    def leakage(self) -> float:
        """Mass the field puts at negative rates or intensities."""
        neg_r, neg_l = self.rates < 0, self.intensities < 0
        inside = self.values[~neg_r][:, ~neg_l].sum() * self.cell
        return float(self.mass - inside)

    def moments(self, deconvolve: bool = True) -> dict[str, float]:
        """Means and variances from the raw field.

        With ``deconvolve`` the variance of the smoothing kernel is subtracted.
        """
        w = self.values * self.cell
        mr = float((w.sum(axis=1) * self.rates).sum())
        ml = float((w.sum(axis=0) * self.intensities).sum())
        vr = float((w.sum(axis=1) * (self.rates - mr) ** 2).sum())
        vl = float((w.sum(axis=0) * (self.intensities - ml) ** 2).sum())
        if deconvolve and self.smoothing:
            h = self.grid.space_step * self.smoothing
            vr -= float(h[0] ** 2)
            vl -= float(h[1] ** 2)
        return {"mean_r": mr, "var_r": vr, "mean_lambda": ml, "var_lambda": vl}

    def marginal(self, axis: str) -> np.ndarray:
        h = self.grid.space_step
        if axis == "r":
            return self.values.sum(axis=1) * h[1]
        if axis == "lambda":
            return self.values.sum(axis=0) * h[0]
        raise ValueError(f"axis must be 'r' or 'lambda', got {axis!r}")

    def clipped(self) -> np.ndarray:
        lost = -self.negative_mass
        if lost > 0:
            log.info("clipping %.3e of negative mass for display", lost)
        return np.maximum(self.values, 0.0)

    def l1_distance(self, other: "DensityField") -> float:
        if self.values.shape != other.values.shape or not (
                np.allclose(self.rates, other.rates) and np.allclose(self.intensities, other.intensities)):
            raise ValueError("fields live on different lattices")
        return float(np.abs(self.values - other.values).sum() * self.cell)

    def to_csv(self, path, stride: int = 1) -> None:
        """Write ``r, lambda, value, mass`` rows; ``mass`` is value times cell area."""
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "lambda", "value", "mass"])
            cell = self.cell
            for i in range(0, len(self.rates), stride):
                for k in range(0, len(self.intensities), stride):
                    v = self.values[i, k]
                    w.writerow([f"{self.rates[i]:.10g}", f"{self.intensities[k]:.10g}",
                                f"{v:.10g}", f"{v * cell:.10g}"])


def _invert(cf_values: np.ndarray, grid: FFTGrid, horizon, tol: float,
            smoothing: float) -> DensityField:
    u_r, u_l = grid.frequencies()
    eta = grid.eta
    x0 = grid.origin
    h = grid.space_step * smoothing
    shift_r = np.exp(-1j * u_r * x0[0] - 0.5 * (u_r * h[0]) ** 2)
    shift_l = np.exp(-1j * u_l * x0[1] - 0.5 * (u_l * h[1]) ** 2)
    z = cf_values * shift_r[:, None] * shift_l[None, :]
    out = np.fft.fft2(z)
    s_r, s_l = ((-1.0) ** np.arange(m) for m in grid.n)
    field_ = (eta[0] * eta[1] / (4 * math.pi**2)) * (out * s_r[:, None] * s_l[None, :]).real
    rates, lams = grid.axes()
    dens = DensityField(rates, lams, field_, horizon, grid, smoothing)
    mass = dens.mass
    if abs(mass - 1.0) > tol:
        raise DensityGridError(f"density mass {mass:.6f} is not 1 within {tol}")
    neg = dens.negative_mass / mass
    if neg < -tol:
        raise DensityGridError(f"negative mass {neg:.3e} below -{tol}; refine the grid")
    return dens


def transition_density(t: float, params: ModelParams, grid: FFTGrid | None = None,
                       tol: float = 1e-3, smoothing: float = 2.0,
                       nodes: int = 32) -> DensityField:
    """Density of ``(r_t, lambda_t)`` started from ``(params.r0, params.lambda0)``.

    Raises :class:`DensityGridError` if the mass misses 1 or the negative
    mass exceeds ``tol``.
    """
    if t <= 0:
        raise ValueError("horizon must be positive")
    grid = grid or desk_grid(params)
    u_r, u_l = grid.frequencies()
    cf = char_fn_state(t, params.r0, params.lambda0, u_r[:, None], u_l[None, :], params, nodes)
    return _invert(cf, grid, float(t), tol, smoothing)


def stationary_density(params: ModelParams, grid: FFTGrid | None = None, tol: float = 1e-3,
                       smoothing: float = 2.0, nodes: int = 8, n_panels: int = 12) -> DensityField:
    grid = grid or desk_grid(params)
    u_r, u_l = grid.frequencies()
    cf = stationary_char_fn(u_r[:, None], u_l[None, :], params, nodes=nodes, n_panels=n_panels)
    return _invert(cf, grid, None, tol, smoothing)
