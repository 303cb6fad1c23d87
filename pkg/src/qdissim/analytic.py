"""Closed-form Wigner-Weisskopf transfer coefficients of the Heisenberg solution.

    b(t)   = u(t) b(0) + sum_j v_j(t) a_j(0)
    a_j(t) = exp(-i w_j t) a_j(0) + u_j(t) b(0) + sum_s v_js(t) a_s(0)

All expressions are written through F(a, t) = (1 - exp(-i a t)) / a, which
is entire in ``a``; the resonant limits (gamma = 0, w_j = omega_tilde) come
out without special-casing.

The bath-to-bath coefficient v_js has two conventions.  ``"derived"``
integrates the driven bath equation exactly to second order in the coupling,
giving the kernel (exp(i(w_j - w_s)t) - 1)/(w_j - w_s) and i*t on the
diagonal.  ``"literal"`` keeps the alternative kernel exp(i(w_j - w_s)t)/(w_j - w_s)
and t on the diagonal; it does not vanish at t = 0 and is only kept for
comparison.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import BathMode, DerivedRates, ModelParams
from .numdiff import richardson_derivative

CONVENTIONS = ("derived", "literal")


class NearDegenerateWarning(UserWarning):
    """Two distinct bath modes are closer than the degeneracy tolerance."""


@dataclass(frozen=True, eq=False)
class CoefficientSet:
    """All transfer coefficients at one time.

    ``v`` is bath j -> system, ``u_b`` system -> bath j, ``v_cross[j, s]``
    bath s -> bath j (diagonal included, free phase excluded).
    """

    t: float
    u: complex
    v: np.ndarray
    u_b: np.ndarray
    v_cross: np.ndarray
    free_phase: np.ndarray
    source: str = "analytic"

    @property
    def n_modes(self) -> int:
        return len(self.v)

    def bath_block(self) -> np.ndarray:
        """Full bath -> bath transfer matrix including the free phase."""
        return np.diag(self.free_phase) + self.v_cross

    def as_matrix(self) -> np.ndarray:
        n = self.n_modes
        s = np.empty((n + 1, n + 1), dtype=complex)
        s[0, 0] = self.u
        s[0, 1:] = self.v
        s[1:, 0] = self.u_b
        s[1:, 1:] = self.bath_block()
        return s


@dataclass(frozen=True)
class LambdaKernel:
    value: complex
    branch: str  # "equal-index" | "distinct-index"


def _phi1(z):
    """(exp(z) - 1) / z, equal to 1 at z = 0."""
    z = np.asarray(z, dtype=complex)
    # below 1e-8 the two-term series is exact to rounding and avoids dividing subnormals
    tiny = np.abs(z) < 1e-8
    safe = np.where(tiny, 1.0, z)
    return np.where(tiny, 1.0 + 0.5 * z, np.expm1(safe) / safe)


def _dphi1(z):
    """Derivative of _phi1: (z exp(z) - expm1(z)) / z**2."""
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 0.1
    zs = np.where(small, z, 0.0)
    series = np.zeros_like(z)
    for k in range(13, 0, -1):
        series = series * zs + k / math.factorial(k + 1)
    zl = np.where(small, 1.0, z)
    direct = (zl * np.exp(zl) - np.expm1(zl)) / zl**2
    return np.where(small, series, direct)


def transfer_f(a, t):
    """F(a, t) = (1 - exp(-i a t)) / a, continuous at a = 0 where it equals i t."""
    return 1j * t * _phi1(-1j * np.asarray(a) * t)


def transfer_df(a, t):
    return t**2 * _dphi1(-1j * np.asarray(a) * t)


def _detuning(omega_j, rates: DerivedRates):
    return rates.omega_tilde - np.asarray(omega_j) - 0.5j * rates.gamma


def coeff_u(t, rates: DerivedRates):
    """System survival amplitude exp(-gamma t / 2 - i omega_tilde t)."""
    t = np.asarray(t, dtype=float)
    return np.exp((-0.5 * rates.gamma - 1j * rates.omega_tilde) * t)


def coeff_v(t, mode: BathMode, rates: DerivedRates):
    """Bath j -> system coefficient; tends to -i xi t exp(-i w_j t) at exact resonance."""
    d = _detuning(mode.omega, rates)
    return -mode.xi * np.exp(-1j * mode.omega * np.asarray(t)) * transfer_f(d, t)


def coeff_u_b(t, mode: BathMode, rates: DerivedRates):
    """System -> bath j coefficient: the same as coeff_v with conj(xi_j) in place of xi_j."""
    d = _detuning(mode.omega, rates)
    return -np.conj(mode.xi) * np.exp(-1j * mode.omega * np.asarray(t)) * transfer_f(d, t)


def lambda_kernel(t: float, omega_j: float, omega_s: float, same_index: bool,
                  convention: str = "derived") -> LambdaKernel:
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    if same_index:
        value = 1j * t if convention == "derived" else complex(t)
        return LambdaKernel(value, "equal-index")
    diff = omega_j - omega_s
    if convention == "derived":
        value = complex(transfer_f(-diff, t))
    else:
        if diff == 0:
            raise ZeroDivisionError("literal distinct-index kernel diverges for degenerate modes")
        value = np.exp(1j * diff * t) / diff
    return LambdaKernel(complex(value), "distinct-index")


def _divided(fj, fjs, dj, ds, t):
    """[F(dj) - F(dj - ds)] / ds with the ds -> 0 limit F'(dj)."""
    ds = np.asarray(ds, dtype=complex)
    tiny = np.abs(ds) * max(abs(float(t)), 1.0) < 1e-7
    denom = np.where(tiny, 1.0, ds)
    return np.where(tiny, transfer_df(dj - 0.5 * ds, t), (fj - fjs) / denom)


def coeff_v_cross(t: float, mode_j: BathMode, mode_s: BathMode, rates: DerivedRates,
                  same_index: Optional[bool] = None, convention: str = "derived",
                  degeneracy_tol: float = 1e-9) -> complex:
    """Bath s -> bath j coefficient, second order in the coupling (prop. conj(xi_j) xi_s).

    The Lambda branch is chosen by index identity, never by frequency; by
    default ``same_index`` is ``mode_j is mode_s``.
    """
    if same_index is None:
        same_index = mode_j is mode_s
    pre = -np.conj(mode_j.xi) * mode_s.xi * np.exp(-1j * mode_j.omega * t)
    dj = complex(_detuning(mode_j.omega, rates))
    ds = complex(_detuning(mode_s.omega, rates))
    if convention == "literal":
        if not same_index and abs(mode_j.omega - mode_s.omega) < degeneracy_tol:
            warnings.warn("near-degenerate distinct modes: literal kernel diverges",
                          NearDegenerateWarning)
        lam = lambda_kernel(t, mode_j.omega, mode_s.omega, same_index, convention)
        if ds == 0:
            raise ZeroDivisionError("literal v_js is singular at gamma = 0, w_s = omega_tilde")
        return complex(pre * (transfer_f(dj, t) - lam.value) / ds)
    lam = lambda_kernel(t, mode_j.omega, mode_s.omega, same_index, convention)
    if same_index:
        ds = dj
    fj = transfer_f(dj, t)
    return complex(pre * _divided(fj, lam.value, dj, ds, t))


def coeff_v_all(model: ModelParams, rates: DerivedRates, t: float) -> np.ndarray:
    """v_j(t) for every bath mode, without the N x N bath-bath block."""
    w = model.omegas
    if not w.size:
        return np.zeros(0, complex)
    return -model.xi * np.exp(-1j * w * float(t)) * transfer_f(_detuning(w, rates), float(t))


def coefficient_set_analytic(model: ModelParams, rates: DerivedRates, t: float,
                             convention: str = "derived") -> CoefficientSet:
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    t = float(t)
    w = model.omegas
    xi = model.xi
    free = np.exp(-1j * w * t)
    d = _detuning(w, rates)
    fd = transfer_f(d, t) if w.size else np.zeros(0, complex)
    v = -xi * free * fd
    u_b = -np.conj(xi) * free * fd
    pre = -np.conj(xi)[:, None] * xi[None, :] * free[:, None]
    if convention == "derived":
        lam = transfer_f(w[None, :] - w[:, None], t)
        np.fill_diagonal(lam, 1j * t)
        ds = np.broadcast_to(d[None, :], lam.shape)
        v_cross = pre * _divided(fd[:, None], lam, d[:, None], ds, t)
    else:
        n = w.size
        diff = w[:, None] - w[None, :]
        off = ~np.eye(n, dtype=bool)
        if n and np.any(np.abs(diff[off]) < 1e-9):
            warnings.warn("near-degenerate distinct modes: literal kernel diverges",
                          NearDegenerateWarning)
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = np.where(off, np.exp(1j * diff * t) / np.where(off, diff, 1.0), t)
            v_cross = pre * (fd[:, None] - lam) / d[None, :]
    return CoefficientSet(t, complex(coeff_u(t, rates)), v, u_b, v_cross, free, "analytic")


@dataclass(frozen=True)
class LangevinResidual:
    t: float
    dt: float
    u_residual: float
    v_residual: float

    @property
    def max_residual(self) -> float:
        return max(self.u_residual, self.v_residual)


def default_step(model: ModelParams, rates: DerivedRates) -> float:
    return 1e-4 / max(model.max_frequency, abs(rates.omega_tilde), 1.0)


def langevin_residual(model: ModelParams, rates: DerivedRates, t: float,
                      dt: Optional[float] = None) -> LangevinResidual:
    """Residual of the closed forms against the Langevin coefficient ODEs.

    du/dt = (-gamma/2 - i omega_tilde) u and
    dv_j/dt = (-gamma/2 - i omega_tilde) v_j - i xi_j exp(-i w_j t).
    """
    if dt is None:
        dt = default_step(model, rates)
    w = model.omegas
    xi = model.xi
    k = -0.5 * rates.gamma - 1j * rates.omega_tilde
    d = _detuning(w, rates)

    def v_of(s):
        return -xi * np.exp(-1j * w * s) * transfer_f(d, s)

    du = richardson_derivative(lambda s: coeff_u(s, rates), t, dt)
    res_u = float(abs(du - k * coeff_u(t, rates)))
    if w.size:
        dv = richardson_derivative(v_of, t, dt)
        rhs = k * v_of(t) - 1j * xi * np.exp(-1j * w * t)
        res_v = float(np.max(np.abs(dv - rhs)))
    else:
        res_v = 0.0
    return LangevinResidual(float(t), dt, res_u, res_v)
