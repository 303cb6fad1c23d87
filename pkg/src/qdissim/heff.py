"""Bogoliubov-restored canonical mode and its effective Hamiltonian.

The damped mode b~(t) = u(t) b(0) has [b~, b~^+] = exp(-gamma t).  The mix
A = alpha b~ + beta b~^+ is canonical whenever |alpha|^2 - |beta|^2 = exp(gamma t).
Writing abar = alpha' - (gamma/2 + i w~) alpha and bbar = beta' - (gamma/2 - i w~) beta,
the Heisenberg motion dA/dt = i [H_eff, A] fixes

    H_eff = c A^+A + p A^+A^+ + conj(p) AA,
    c = i exp(-gamma t) delta,  delta = abar conj(alpha) - bbar conj(beta),
    p = (i/2) exp(-gamma t) (bbar alpha - abar beta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .model import DerivedRates
from .numdiff import richardson_derivative

FAMILIES = ("exponential", "hyperbolic", "polynomial", "callable")


class InvalidPathError(ValueError):
    """|alpha|^2 - |beta|^2 is not positive, so no projection can restore the constraint."""


class ConstraintViolationError(ValueError):
    """The path does not satisfy |alpha|^2 - |beta|^2 = exp(gamma t)."""


@dataclass(frozen=True, eq=False)
class BogoliubovPath:
    """Time-parametrized (alpha, beta) pair.

    ``alpha_raw``/``beta_raw`` are the family functions; with ``project`` set
    every evaluation rescales both by the positive factor restoring the
    constraint.  Missing derivative functions fall back to Richardson
    differences of the (projected) path.
    """

    gamma: float
    omega_tilde: float
    alpha_raw: Callable
    beta_raw: Callable
    dalpha_raw: Optional[Callable] = None
    dbeta_raw: Optional[Callable] = None
    project: bool = False
    family: str = "callable"
    fd_step: float = 1e-4

    def _raw(self, t):
        return complex(self.alpha_raw(t)), complex(self.beta_raw(t))

    def raw_constraint_residual(self, t: float) -> float:
        a, b = self._raw(t)
        target = math.exp(self.gamma * t)
        return abs(abs(a) ** 2 - abs(b) ** 2 - target) / target

    def _scale(self, t):
        a, b = self._raw(t)
        d = abs(a) ** 2 - abs(b) ** 2
        if not d > 0:
            raise InvalidPathError(f"|alpha|^2 - |beta|^2 = {d:.3g} <= 0 at t = {t}")
        return math.sqrt(math.exp(self.gamma * t) / d), a, b, d

    def values(self, t: float):
        if not self.project:
            return self._raw(t)
        s, a, b, _ = self._scale(t)
        return s * a, s * b

    def alpha(self, t: float) -> complex:
        return self.values(t)[0]

    def beta(self, t: float) -> complex:
        return self.values(t)[1]

    def derivatives(self, t: float):
        """(alpha, beta, d alpha/dt, d beta/dt)."""
        if self.dalpha_raw is None or self.dbeta_raw is None:
            a, b = self.values(t)
            da, db = richardson_derivative(lambda s: np.array(self.values(s)), t, self.fd_step)
            return a, b, complex(da), complex(db)
        da_r, db_r = complex(self.dalpha_raw(t)), complex(self.dbeta_raw(t))
        if not self.project:
            a, b = self._raw(t)
            return a, b, da_r, db_r
        s, a, b, d = self._scale(t)
        dd = 2.0 * (np.conj(a) * da_r).real - 2.0 * (np.conj(b) * db_r).real
        ds = s * (0.5 * self.gamma - 0.5 * dd / d)
        return s * a, s * b, ds * a + s * da_r, ds * b + s * db_r

    def constraint_residual(self, t: float) -> float:
        a, b = self.values(t)
        target = math.exp(self.gamma * t)
        return abs(abs(a) ** 2 - abs(b) ** 2 - target) / target


@dataclass(frozen=True)
class HeffCoeffs:
    t: float
    number_coeff: float
    pair_create: complex
    pair_annihilate: complex
    delta: complex
    number_imag: float = 0.0

    @property
    def number_coeff_raw(self) -> complex:
        return complex(self.number_coeff, self.number_imag)


@dataclass(frozen=True)
class CKMapping:
    """Caldirola-Kanai reading: mass m exp(gamma t), frequency Omega."""

    gamma: float
    omega_tilde: float
    m: float = 1.0

    @property
    def Omega(self) -> float:
        return math.sqrt(0.25 * self.gamma**2 + self.omega_tilde**2)

    @property
    def phi(self) -> float:
        return self.omega_tilde - self.Omega

    def mass(self, t):
        return self.m * np.exp(self.gamma * np.asarray(t))

    def quadrature_scales(self, t: float):
        """(q, p) with Q = q (A + A^+) and P = -i p (A - A^+)."""
        mt = float(self.mass(t))
        return math.sqrt(1.0 / (2.0 * mt * self.Omega)), math.sqrt(mt * self.Omega / 2.0)


def make_path(family: str, params: dict, rates: DerivedRates) -> BogoliubovPath:
    """Build a path from a parametric family.

    exponential: alpha = a exp((gamma/2 + i phi) t), beta = 0; params a, phi.
    hyperbolic:  alpha = exp(gamma t/2) cosh(r) exp(i theta_a),
                 beta = exp(gamma t/2) sinh(r) exp(i theta_b), each of r, theta_a,
                 theta_b linear in t; params r0, r1, ta0, ta1, tb0, tb1.
    polynomial:  alpha, beta polynomials in t (coefficient lists, lowest
                 order first), always projected.
    callable:    user functions alpha(t), beta(t), optional dalpha, dbeta;
                 projected unless project=False.
    """
    g, wt = rates.gamma, rates.omega_tilde
    p = dict(params or {})
    if family == "exponential":
        a = complex(p.pop("a", 1.0))
        phi = float(p.pop("phi", 0.0))
        _no_leftovers(p, family)
        k = 0.5 * g + 1j * phi

        alpha = lambda t: a * np.exp(k * t)  # noqa: E731
        dalpha = lambda t: k * a * np.exp(k * t)  # noqa: E731
        zero = lambda t: 0j  # noqa: E731
        return BogoliubovPath(g, wt, alpha, zero, dalpha, zero,
                              project=not math.isclose(abs(a), 1.0, rel_tol=0, abs_tol=1e-15),
                              family=family)
    if family == "hyperbolic":
        r0, r1 = float(p.pop("r0", 0.0)), float(p.pop("r1", 0.0))
        ta0, ta1 = float(p.pop("ta0", 0.0)), float(p.pop("ta1", 0.0))
        tb0, tb1 = float(p.pop("tb0", 0.0)), float(p.pop("tb1", 0.0))
        _no_leftovers(p, family)

        def alpha(t):
            return np.exp(0.5 * g * t + 1j * (ta0 + ta1 * t)) * np.cosh(r0 + r1 * t)

        def beta(t):
            return np.exp(0.5 * g * t + 1j * (tb0 + tb1 * t)) * np.sinh(r0 + r1 * t)

        def dalpha(t):
            r = r0 + r1 * t
            return np.exp(0.5 * g * t + 1j * (ta0 + ta1 * t)) * (
                (0.5 * g + 1j * ta1) * np.cosh(r) + r1 * np.sinh(r))

        def dbeta(t):
            r = r0 + r1 * t
            return np.exp(0.5 * g * t + 1j * (tb0 + tb1 * t)) * (
                (0.5 * g + 1j * tb1) * np.sinh(r) + r1 * np.cosh(r))

        return BogoliubovPath(g, wt, alpha, beta, dalpha, dbeta, project=False, family=family)
    if family == "polynomial":
        ca = np.asarray(p.pop("alpha", [1.0]), dtype=complex)
        cb = np.asarray(p.pop("beta", [0.0]), dtype=complex)
        _no_leftovers(p, family)
        pa, pb = np.polynomial.Polynomial(ca), np.polynomial.Polynomial(cb)
        dpa, dpb = pa.deriv(), pb.deriv()
        return BogoliubovPath(g, wt, pa, pb, dpa, dpb, project=True, family=family)
    if family == "callable":
        alpha, beta = p.pop("alpha"), p.pop("beta")
        dalpha, dbeta = p.pop("dalpha", None), p.pop("dbeta", None)
        project = bool(p.pop("project", True))
        _no_leftovers(p, family)
        return BogoliubovPath(g, wt, alpha, beta, dalpha, dbeta, project=project, family=family)
    raise ValueError(f"unknown path family {family!r}; expected one of {FAMILIES}")


def _no_leftovers(p: dict, family: str):
    if p:
        raise ValueError(f"unexpected parameters for {family} family: {sorted(p)}")


def heff_coefficients(path: BogoliubovPath, t: float, tol: float = 1e-10) -> HeffCoeffs:
    res = path.constraint_residual(t)
    if res > tol:
        raise ConstraintViolationError(f"constraint residual {res:.3g} > {tol:g} at t = {t}")
    a, b, da, db = path.derivatives(t)
    g, wt = path.gamma, path.omega_tilde
    abar = da - (0.5 * g + 1j * wt) * a
    bbar = db - (0.5 * g - 1j * wt) * b
    delta = abar * np.conj(a) - bbar * np.conj(b)
    damp = math.exp(-g * t)
    number = 1j * damp * delta
    pair = 0.5j * damp * (bbar * a - abar * b)
    return HeffCoeffs(float(t), float(number.real), complex(pair), complex(np.conj(pair)),
                      complex(delta), float(number.imag))


def ck_path(rates: DerivedRates):
    """alpha = exp((gamma/2 + i phi) t), beta = 0 with phi = omega_tilde - Omega."""
    ck = CKMapping(rates.gamma, rates.omega_tilde)
    return make_path("exponential", {"a": 1.0, "phi": ck.phi}, rates), ck


def ck_inline_reading(rates: DerivedRates) -> Callable[[float], HeffCoeffs]:
    """The alternative CK reading H_eff = exp(gamma t) Omega A^+A, for comparison."""
    ck = CKMapping(rates.gamma, rates.omega_tilde)

    def heff(t):
        c = math.exp(rates.gamma * t) * ck.Omega
        return HeffCoeffs(float(t), c, 0j, 0j, complex(0.0, -c * math.exp(rates.gamma * t)))

    return heff


def heisenberg_residual(path: BogoliubovPath, rates: DerivedRates, t: float,
                        dt: Optional[float] = None,
                        heff: Optional[Callable[[float], HeffCoeffs]] = None) -> float:
    """Check that H_eff regenerates the motion of (alpha, beta).

    From dA/dt = i[H_eff, A] = -i c A - 2i p A^+ and A = alpha b~ + beta b~^+:
        d alpha/dt = (gamma/2 + i w~) alpha - i c alpha - 2i p conj(beta)
        d beta/dt  = (gamma/2 - i w~) beta  - i c beta  - 2i p conj(alpha)
    Returns the largest mismatch against Richardson derivatives of the path.
    """
    res = path.constraint_residual(t)
    if res > 1e-10:
        raise ConstraintViolationError(f"constraint residual {res:.3g} at t = {t}")
    if dt is None:
        dt = 1e-4 / max(abs(rates.omega_tilde), rates.gamma, 1.0)
    h = (heff or (lambda s: heff_coefficients(path, s)))(t)
    a, b = path.values(t)
    da, db = richardson_derivative(lambda s: np.array(path.values(s)), t, dt)
    g, wt = rates.gamma, rates.omega_tilde
    c = h.number_coeff
    pred_a = (0.5 * g + 1j * wt) * a - 1j * c * a - 2j * h.pair_create * np.conj(b)
    pred_b = (0.5 * g - 1j * wt) * b - 1j * c * b - 2j * h.pair_create * np.conj(a)
    return float(max(abs(da - pred_a), abs(db - pred_b)))
