"""Gamma and gamma-subordinated gamma Levy primitives.

The gamma process with scale ``c`` and shape ``gamma`` has Levy density
``gamma * exp(-c y) / y``. The double gamma process runs an inner gamma
process (``c_lambda``, ``gamma_lambda``) on the clock of an independent gamma
subordinator (``c_tau``, ``gamma_tau``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special


class AdmissibilityError(ValueError):
    """A transform argument touches the branch cut of the complex logarithm."""


class QuadratureError(ArithmeticError):
    """Numerical integration did not reach the requested tolerance."""

    def __init__(self, message: str, error_estimate: float):
        super().__init__(f"{message} (estimated error {error_estimate:.3e})")
        self.error_estimate = error_estimate


@dataclass(frozen=True)
class GammaSpec:
    """Gamma process with scale ``c`` and shape (arrival rate) ``gamma``."""

    c: float
    gamma: float

    def __post_init__(self):
        if not (self.c > 0 and self.gamma >= 0):
            raise ValueError(f"gamma process needs c > 0 and gamma >= 0, got {self}")

    @property
    def mean(self) -> float:
        return self.gamma / self.c

    @property
    def variance(self) -> float:
        return self.gamma / self.c**2


@dataclass(frozen=True)
class DoubleGammaSpec:
    """Gamma process ``inner`` time-changed by the gamma process ``subordinator``."""

    inner: GammaSpec
    subordinator: GammaSpec

    @classmethod
    def from_values(cls, c_lambda, gamma_lambda, c_tau, gamma_tau) -> "DoubleGammaSpec":
        return cls(GammaSpec(c_lambda, gamma_lambda), GammaSpec(c_tau, gamma_tau))

    @property
    def mean(self) -> float:
        return self.subordinator.mean * self.inner.mean

    @property
    def variance(self) -> float:
        cl, gl = self.inner.c, self.inner.gamma
        ct, gt = self.subordinator.c, self.subordinator.gamma
        return gt * gl / (ct**2 * cl**2) * (gl + ct)


@dataclass(frozen=True)
class QuadraturePolicy:
    """Tolerances for the numerically integrated Levy density."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-300
    limit: int = 400
    tail_cutoff: float = 1e-14


def _log1m(z):
    """Principal ``log(1 - z)``; raises when ``1 - z`` lies on the cut."""
    w = 1.0 - np.asarray(z, dtype=complex)
    on_cut = (w.real <= 0.0) & (np.abs(w.imag) <= 1e-300)
    if np.any(on_cut):
        raise AdmissibilityError("argument of log(1 - z) is real and nonpositive")
    return np.log(w)


def gamma_char_exponent(spec: GammaSpec, u):
    """Unit-time characteristic exponent ``log E[exp(i u g_1)]``.

    ``u`` may be complex; ``u = i s`` gives the Laplace exponent at ``-s``.
    """
    u = np.asarray(u, dtype=complex)
    return -spec.gamma * _log1m(1j * u / spec.c)


def double_gamma_char_exponent(spec: DoubleGammaSpec, u):
    """Unit-time characteristic exponent of the subordinated process.

    ``-gamma_tau * log(1 + (gamma_lambda / c_tau) * log(1 - i u / c_lambda))``
    """
    inner = -gamma_char_exponent(spec.inner, u)  # gamma_l * log(1 - iu/c_l)
    sub = spec.subordinator
    return -sub.gamma * _log1m(-inner / sub.c)


def _laplace_log_gamma(spec: GammaSpec, s):
    """``log E[exp(-s g_1)]`` for real ``s > -c``, vectorized."""
    s = np.asarray(s, dtype=float)
    arg = 1.0 + s / spec.c
    if np.any(arg <= 0.0):
        raise AdmissibilityError("Laplace argument must satisfy s > -c")
    return -spec.gamma * np.log1p(s / spec.c)


def _laplace_log_double_gamma(spec: DoubleGammaSpec, s):
    """``log E[exp(-s g~_1)]`` for real admissible ``s``."""
    inner = -_laplace_log_gamma(spec.inner, s)
    arg = 1.0 + inner / spec.subordinator.c
    if np.any(arg <= 0.0):
        raise AdmissibilityError("nested Laplace argument leaves the domain of log")
    return -spec.subordinator.gamma * np.log(arg)


def gamma_levy_density(spec: GammaSpec, y):
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("Levy density is defined for y > 0 only")
    return spec.gamma * np.exp(-spec.c * y) / y


def _mixing_log_integrand(x, log_cy, c_tau, gamma_lambda):
    return gamma_lambda * x * log_cy - c_tau * x - special.gammaln(gamma_lambda * x + 1.0)


def _mixing_integral(y: float, spec: DoubleGammaSpec, quad: QuadraturePolicy) -> float:
    """``gamma_l * int_0^inf exp(-x (c_tau - gamma_l log(c_l y))) / Gamma(gamma_l x + 1) dx``.

    This is the x-integral of ``(c_l y)^(gamma_l x) / Gamma(gamma_l x) * exp(-c_tau x) / x``
    with the 1/x singularity removed via ``u Gamma(u) = Gamma(u + 1)``.
    """
    gl = spec.inner.gamma
    ct = spec.subordinator.c
    log_cy = math.log(spec.inner.c * y)

    def log_f(x):
        return _mixing_log_integrand(x, log_cy, ct, gl)

    # Locate the mode, then push x_max out until the integrand is negligible.
    slope0 = gl * log_cy - ct + gl * np.euler_gamma
    if slope0 > 0:
        # Mode where d/dx log f = 0, i.e. gl*(log_cy - digamma(gl x + 1)) = ct.
        target = log_cy - ct / gl
        u = max(math.exp(target), 1.0)
        for _ in range(60):
            u -= (special.digamma(u) - target) / special.polygamma(1, u)
            u = max(u, 1.0 + 1e-12)
        x_mode = max((u - 1.0) / gl, 0.0)
    else:
        x_mode = 0.0
    peak = log_f(x_mode)
    cut = peak + math.log(quad.tail_cutoff)
    x_max = max(x_mode, 1.0 / gl) * 2.0 + 1.0
    while log_f(x_max) > cut:
        x_max *= 2.0
        if x_max > 1e8:
            raise QuadratureError("mixing integrand does not decay", float("inf"))

    scale = math.exp(peak)

    def f(x):
        return math.exp(log_f(x) - peak)

    points = [x_mode] if 0.0 < x_mode < x_max else None
    val, err = integrate.quad(
        f, 0.0, x_max, epsabs=quad.abs_tol, epsrel=quad.rel_tol,
        limit=quad.limit, points=points,
    )
    if err > max(100 * quad.rel_tol * abs(val), quad.abs_tol):
        raise QuadratureError(f"mixing integral at y={y:g} did not converge", err * scale * gl)
    return gl * val * scale


def double_gamma_levy_density(spec: DoubleGammaSpec, y, quad: QuadraturePolicy | None = None):
    """Levy density of the gamma-subordinated gamma process.

    ``gamma_tau * exp(-c_l y) / y * int_0^inf (c_l y)^(gamma_l x) / Gamma(gamma_l x)
    * exp(-c_tau x) / x dx``, the x-integral done by adaptive quadrature.
    """
    quad = quad or QuadraturePolicy()
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr <= 0):
        raise ValueError("Levy density is defined for y > 0 only")
    flat = y_arr.reshape(-1)
    out = np.empty_like(flat)
    cl = spec.inner.c
    gt = spec.subordinator.gamma
    for i, yi in enumerate(flat):
        out[i] = gt * math.exp(-cl * yi) / yi * _mixing_integral(float(yi), spec, quad)
    return out.reshape(y_arr.shape) if y_arr.ndim else float(out[0])


class DoubleGammaDensityTable:
    """Cubic interpolant of ``log(y * phi(y))`` on a log-spaced grid.

    Used where the double gamma Levy density is evaluated many times, e.g. as
    an importance weight in the PIDE jump integral.
    """

    def __init__(self, spec: DoubleGammaSpec, y_min: float = 1e-8, y_max: float | None = None,
                 n: int = 1000, quad: QuadraturePolicy | None = None):
        from scipy.interpolate import CubicSpline

        if y_max is None:
            y_max = 60.0 / spec.inner.c
        self.spec = spec
        self.y_min, self.y_max = y_min, y_max
        ys = np.geomspace(y_min, y_max, n)
        vals = double_gamma_levy_density(spec, ys, quad or QuadraturePolicy(rel_tol=1e-9))
        self._log_y = np.log(ys)
        with np.errstate(divide="ignore"):
            self._spline = CubicSpline(self._log_y, np.log(np.maximum(ys * vals, 1e-300)))

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        ly = np.log(np.clip(y, self.y_min, self.y_max))
        out = np.exp(self._spline(ly)) / y
        return np.where(y > self.y_max, 0.0, out)


def sample_gamma_increment(spec: GammaSpec, dt: float, rng: np.random.Generator, size=None):
    """Draw ``g_{t+dt} - g_t ~ Gamma(shape=gamma*dt, rate=c)``."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if dt == 0 or spec.gamma == 0:
        return np.zeros(size) if size is not None else 0.0
    return rng.gamma(spec.gamma * dt, 1.0 / spec.c, size=size)


def sample_double_gamma_increment(spec: DoubleGammaSpec, dt: float, rng: np.random.Generator,
                                  size=None):
    """Draw a subordinated increment: ``S ~ Gamma(gamma_tau dt, c_tau)``, then
    ``Gamma(gamma_lambda S, c_lambda)``."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    clock = sample_gamma_increment(spec.subordinator, dt, rng, size)
    shape = spec.inner.gamma * np.asarray(clock)
    if spec.inner.gamma == 0:
        return np.zeros_like(shape) if size is not None else 0.0
    draw = rng.gamma(np.where(shape > 0, shape, 1.0), 1.0 / spec.inner.c, size=size)
    out = np.where(shape > 0, draw, 0.0)
    return out if size is not None else float(out)
