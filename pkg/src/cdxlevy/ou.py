"""Bivariate Levy-driven OU dynamics of the short rate and default intensity.

    dr = -theta_r r dt + dg^r
    dlambda = -theta_lambda lambda dt + rho dg^r + dg~^lambda

with ``g^r`` a gamma process and ``g~^lambda`` a gamma-subordinated gamma
process. ``Y^r`` and ``Y^lambda`` denote the integrated processes.

The workhorse is :func:`affine_log_transform`, the log of
``E[exp(z (a1 dY^r + a2 dY^lam + a3 r_T + a4 lam_T)) | F_t]`` for ``z = i``
(characteristic function) or ``z = -1`` (Laplace transform).
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np

from .levy import (
    AdmissibilityError,
    DoubleGammaSpec,
    GammaSpec,
    _laplace_log_double_gamma,
    _laplace_log_gamma,
    double_gamma_char_exponent,
    gamma_char_exponent,
)

Branch = Literal["oscillatory", "laplace"]

DEFAULT_NODES = 64


@dataclass(frozen=True)
class ModelParams:
    theta_r: float
    theta_lambda: float
    rho: float
    rate: GammaSpec
    intensity: DoubleGammaSpec
    r0: float = 0.0
    lambda0: float = 0.0

    def __post_init__(self):
        if not (self.theta_r > 0 and self.theta_lambda > 0):
            raise ValueError("mean reversion speeds must be positive")
        if self.rho < 0 or self.r0 < 0 or self.lambda0 < 0:
            raise ValueError("rho, r0 and lambda0 must be nonnegative")

    @classmethod
    def from_values(cls, *, r0, theta_r, c_r, gamma_r, rho, lambda0, theta_lambda,
                    c_lambda, gamma_lambda, c_tau, gamma_tau) -> "ModelParams":
        return cls(
            theta_r=theta_r, theta_lambda=theta_lambda, rho=rho,
            rate=GammaSpec(c_r, gamma_r),
            intensity=DoubleGammaSpec.from_values(c_lambda, gamma_lambda, c_tau, gamma_tau),
            r0=r0, lambda0=lambda0,
        )

    def as_dict(self) -> dict[str, float]:
        return {
            "r0": self.r0, "theta_r": self.theta_r, "c_r": self.rate.c,
            "gamma_r": self.rate.gamma, "rho": self.rho, "lambda0": self.lambda0,
            "theta_lambda": self.theta_lambda, "c_lambda": self.intensity.inner.c,
            "gamma_lambda": self.intensity.inner.gamma, "c_tau": self.intensity.subordinator.c,
            "gamma_tau": self.intensity.subordinator.gamma,
        }

    def replace(self, **values) -> "ModelParams":
        d = self.as_dict()
        unknown = set(values) - set(d)
        if unknown:
            raise KeyError(f"unknown parameters: {sorted(unknown)}")
        d.update(values)
        return ModelParams.from_values(**d)


@dataclass(frozen=True)
class LoadingCoeffs:
    """Weights on (integrated rate, integrated intensity, r_T, lambda_T)."""

    a1: float = 0.0
    a2: float = 0.0
    a3: float = 0.0
    a4: float = 0.0

    def nonnegative(self) -> bool:
        return min(dataclasses.astuple(self)) >= 0


def _b(theta, s):
    """(1 - exp(-theta s)) / theta."""
    return -np.expm1(-theta * s) / theta


def xi_r(t, r, a1, a3, params: ModelParams):
    return a1 * r * _b(params.theta_r, t) + a3 * r * np.exp(-params.theta_r * t)


def xi_lambda(t, lam, a2, a4, params: ModelParams):
    return a2 * lam * _b(params.theta_lambda, t) + a4 * lam * np.exp(-params.theta_lambda * t)


def _psi_r_s(s, a1, a2, a3, a4, p: ModelParams):
    """Rate-jump loading at time-to-horizon ``s = T - u``."""
    er, el = np.exp(-p.theta_r * s), np.exp(-p.theta_lambda * s)
    return (a1 * _b(p.theta_r, s) + a2 * p.rho * _b(p.theta_lambda, s)
            + a3 * er + a4 * p.rho * el)


def _psi_l_s(s, a2, a4, p: ModelParams):
    return a2 * _b(p.theta_lambda, s) + a4 * np.exp(-p.theta_lambda * s)


def psi_r(u, T, coeffs: LoadingCoeffs, params: ModelParams):
    c = coeffs
    return _psi_r_s(T - np.asarray(u, dtype=float), c.a1, c.a2, c.a3, c.a4, params)


def psi_lambda(u, T, coeffs: LoadingCoeffs, params: ModelParams):
    return _psi_l_s(T - np.asarray(u, dtype=float), coeffs.a2, coeffs.a4, params)


@lru_cache(maxsize=16)
def gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _jump_integrals(tau, a1, a2, a3, a4, branch: Branch, p: ModelParams,
                    nodes: int = DEFAULT_NODES):
    """Sum over jump sources of ``int_0^tau kappa(z psi(s)) ds`` by Gauss-Legendre.

    Coefficients broadcast; the loop runs over quadrature nodes to keep memory flat.
    """
    tau = float(tau)
    a1, a2, a3, a4 = np.broadcast_arrays(*(np.asarray(a) for a in (a1, a2, a3, a4)))
    if tau == 0.0:
        return np.zeros(a1.shape, dtype=float if branch == "laplace" else complex)
    x, w = gauss_legendre(nodes)
    laplace = branch == "laplace"
    acc = np.zeros(a1.shape, dtype=float if laplace else complex)
    for xi, wi in zip(x, w):
        s = tau * xi
        pr = _psi_r_s(s, a1, a2, a3, a4, p)
        pl = _psi_l_s(s, a2, a4, p)
        if laplace:
            term = _laplace_log_gamma(p.rate, pr) + _laplace_log_double_gamma(p.intensity, pl)
        else:
            term = gamma_char_exponent(p.rate, pr) + double_gamma_char_exponent(p.intensity, pl)
        acc = acc + wi * term
    return tau * acc


def joint_char_exponent(t, T, coeffs: LoadingCoeffs, branch: Branch, params: ModelParams,
                        nodes: int = DEFAULT_NODES):
    """State-free part of the log transform of the affine functional.

    ``branch='oscillatory'``: log E[exp(i(...))] minus ``i(xi_r + xi_lambda)``.
    ``branch='laplace'``: log E[exp(-(...))] plus ``xi_r + xi_lambda``; needs
    nonnegative coefficients.
    """
    if T < t:
        raise ValueError("need t <= T")
    if branch == "laplace" and not coeffs.nonnegative():
        raise AdmissibilityError("Laplace branch requires nonnegative loadings")
    c = coeffs
    out = _jump_integrals(T - t, c.a1, c.a2, c.a3, c.a4, branch, params, nodes)
    return complex(out) if branch == "oscillatory" else float(out)


def affine_log_transform(t, T, r_t, lambda_t, coeffs: LoadingCoeffs, branch: Branch,
                         params: ModelParams, nodes: int = DEFAULT_NODES):
    """Full log transform including the state-dependent terms."""
    c = coeffs
    tau = T - t
    state = xi_r(tau, r_t, c.a1, c.a3, params) + xi_lambda(tau, lambda_t, c.a2, c.a4, params)
    z = 1j if branch == "oscillatory" else -1.0
    return z * state + joint_char_exponent(t, T, coeffs, branch, params, nodes)


def affine_laplace_coeffs(tau, coeffs: LoadingCoeffs, params: ModelParams,
                          nodes: int = DEFAULT_NODES):
    """Return ``(A, B_r, B_lambda)`` with
    ``E[exp(-(a1 dY^r + a2 dY^l + a3 r_T + a4 l_T)) | r, l] = exp(A - B_r r - B_l l)``."""
    c = coeffs
    if not c.nonnegative():
        raise AdmissibilityError("Laplace branch requires nonnegative loadings")
    p = params
    b_r = c.a1 * _b(p.theta_r, tau) + c.a3 * np.exp(-p.theta_r * tau)
    b_l = c.a2 * _b(p.theta_lambda, tau) + c.a4 * np.exp(-p.theta_lambda * tau)
    a = float(_jump_integrals(tau, c.a1, c.a2, c.a3, c.a4, "laplace", p, nodes))
    return a, float(b_r), float(b_l)


def _cf_exponent(u_r, u_l, s, w, p: ModelParams):
    """``sum_j w_j [kappa_r(u_r e^{-theta_r s_j} + rho u_l e^{-theta_l s_j})
    + kappa_l(u_l e^{-theta_l s_j})]``.

    The intensity term depends on ``u_l`` alone, so it is evaluated before
    broadcasting against ``u_r``; this keeps 2D lattices cheap.
    """
    u_r = np.asarray(u_r, dtype=float)
    u_l = np.asarray(u_l, dtype=float)
    shape = np.broadcast_shapes(u_r.shape, u_l.shape)
    acc_r = np.zeros(shape, dtype=complex)
    acc_l = np.zeros(u_l.shape, dtype=complex)
    for sj, wj in zip(s, w):
        er, el = math.exp(-p.theta_r * sj), math.exp(-p.theta_lambda * sj)
        acc_r += wj * gamma_char_exponent(p.rate, u_r * er + p.rho * u_l * el)
        acc_l += wj * double_gamma_char_exponent(p.intensity, u_l * el)
    return acc_r + acc_l


def char_fn_state(t, r0, lambda0, u_r, u_l, params: ModelParams, nodes: int = DEFAULT_NODES):
    """``E[exp(i(u_r r_t + u_l lambda_t)) | r_0, lambda_0]``, vectorized over frequencies."""
    p = params
    drift = u_r * r0 * np.exp(-p.theta_r * t) + u_l * lambda0 * np.exp(-p.theta_lambda * t)
    if t == 0:
        return np.exp(1j * drift)
    x, w = gauss_legendre(nodes)
    return np.exp(1j * drift + _cf_exponent(u_r, u_l, t * x, t * w, p))


def conditional_moments(t, params: ModelParams) -> dict[str, float]:
    """Closed-form mean and variance of ``r_t`` and ``lambda_t`` given the initial state."""
    p = params
    tr, tl = p.theta_r, p.theta_lambda
    g = p.rate
    dg = p.intensity
    mean_r = p.r0 * np.exp(-tr * t) + g.mean * _b(tr, t)
    var_r = g.variance * _b(2 * tr, t)
    mean_l = p.lambda0 * np.exp(-tl * t) + (p.rho * g.mean + dg.mean) * _b(tl, t)
    var_l = (p.rho**2 * g.variance + dg.variance) * _b(2 * tl, t)
    return {"mean_r": float(mean_r), "var_r": float(var_r),
            "mean_lambda": float(mean_l), "var_lambda": float(var_l)}


def stationary_moments(params: ModelParams) -> dict[str, float]:
    p = params
    return {
        "mean_r": p.rate.mean / p.theta_r,
        "var_r": p.rate.variance / (2 * p.theta_r),
        "mean_lambda": (p.rho * p.rate.mean + p.intensity.mean) / p.theta_lambda,
        "var_lambda": (p.rho**2 * p.rate.variance + p.intensity.variance) / (2 * p.theta_lambda),
    }


def _panels(v_max: float, n_panels: int):
    """Panel edges on [0, v_max], geometric away from zero."""
    inner = np.geomspace(v_max / 2**(n_panels - 1), v_max, n_panels)
    return np.concatenate([[0.0], inner])


def stationary_char_fn(alpha1, alpha2, params: ModelParams, v_max: float = 100.0,
                       nodes: int = 16, n_panels: int = 24):
    """Characteristic function ``E[exp(i(alpha1 r + alpha2 lambda))]`` of the stationary law.

    The infinite v-integrals are truncated at ``v_max``.
    """
    x, w = gauss_legendre(nodes)
    edges = _panels(v_max, n_panels)
    h = np.diff(edges)
    v = (edges[:-1, None] + h[:, None] * x[None, :]).ravel()
    wv = (h[:, None] * w[None, :]).ravel()
    return np.exp(_cf_exponent(alpha1, alpha2, v, wv, params))
