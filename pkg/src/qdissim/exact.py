"""Exact finite-bath propagator of the one-excitation (single-particle) problem.

The Heisenberg equations i d/dt (b, a_1, ..., a_N) = M (b, a_1, ..., a_N)
are linear, so S(t) = exp(-i M t) holds every transfer coefficient exactly.
M is Hermitian; it is diagonalized once and S(t) is rebuilt for any t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .analytic import CoefficientSet, coefficient_set_analytic
from .model import DerivedRates, ModelParams, recurrence_time


class NumericalError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class OneParticleMatrix:
    entries: np.ndarray

    def __post_init__(self):
        m = self.entries
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("one-particle matrix must be square")
        if not np.all(np.isfinite(m)):
            raise NumericalError("one-particle matrix has non-finite entries")
        herm = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
        if herm > 1e-14 * max(1.0, float(np.max(np.abs(m)))):
            raise ValueError(f"one-particle matrix not Hermitian (defect {herm:.3g})")
        m.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def eig(self):
        m = self.entries
        try:
            w, v = np.linalg.eigh(m)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                f"eigendecomposition failed (dim {self.dim}, max |entry| {np.max(np.abs(m)):.3g})"
            ) from exc
        return w, v


@dataclass(frozen=True, eq=False)
class PropagatorMatrix:
    t: float
    entries: np.ndarray

    def unitarity_defect(self) -> float:
        s = self.entries
        return float(np.max(np.abs(s @ s.conj().T - np.eye(s.shape[0]))))


@lru_cache(maxsize=32)
def build_matrix(model: ModelParams) -> OneParticleMatrix:
    n = model.n_modes
    m = np.zeros((n + 1, n + 1), dtype=complex)
    m[0, 0] = model.omega
    if n:
        idx = np.arange(1, n + 1)
        m[idx, idx] = model.omegas
        m[0, 1:] = model.xi
        m[1:, 0] = np.conj(model.xi)
    return OneParticleMatrix(m)


def propagator(m: OneParticleMatrix, t) -> PropagatorMatrix:
    """S(t) = exp(-i M t) from the cached eigendecomposition."""
    w, v = m.eig
    phases = np.exp(-1j * w * float(t))
    return PropagatorMatrix(float(t), (v * phases) @ v.conj().T)


def propagators(m: OneParticleMatrix, times) -> np.ndarray:
    """Stack of S(t) over a time grid, shape (len(times), dim, dim)."""
    w, v = m.eig
    times = np.asarray(times, dtype=float)
    phases = np.exp(-1j * np.multiply.outer(times, w))
    return np.einsum("ik,tk,jk->tij", v, phases, v.conj(), optimize=True)


def system_amplitude(model: ModelParams, times) -> np.ndarray:
    """u(t) = S_00(t) over a grid, without forming full matrices."""
    w, v = build_matrix(model).eig
    weights = np.abs(v[0]) ** 2
    return np.exp(-1j * np.multiply.outer(np.asarray(times, dtype=float), w)) @ weights


def coefficients_from_matrix(model: ModelParams, s: np.ndarray, t: float) -> CoefficientSet:
    free = np.exp(-1j * model.omegas * t)
    bath = s[1:, 1:].copy()
    bath[np.diag_indices_from(bath)] -= free
    return CoefficientSet(float(t), complex(s[0, 0]), s[0, 1:].copy(), s[1:, 0].copy(),
                          bath, free, "exact")


def exact_coefficients(model: ModelParams, t: float) -> CoefficientSet:
    s = propagator(build_matrix(model), t).entries
    return coefficients_from_matrix(model, s, t)


@dataclass(frozen=True, eq=False)
class ErrorReport:
    times: np.ndarray
    err_u: np.ndarray
    err_v: np.ndarray
    err_u_b: np.ndarray
    err_v_cross: np.ndarray
    recurrence_time: float

    def max_errors(self) -> dict:
        return {name: float(np.max(getattr(self, name), initial=0.0))
                for name in ("err_u", "err_v", "err_u_b", "err_v_cross")}

    def within(self, budget: float, families=("err_u", "err_v")) -> bool:
        errs = self.max_errors()
        return all(errs[f] <= budget for f in families)


def compare_engines(model: ModelParams, rates: DerivedRates, times,
                    convention: str = "derived") -> ErrorReport:
    times = np.asarray(times, dtype=float)
    stack = propagators(build_matrix(model), times)
    errs = np.zeros((4, times.size))
    for k, t in enumerate(times):
        an = coefficient_set_analytic(model, rates, t, convention)
        ex = coefficients_from_matrix(model, stack[k], t)
        errs[0, k] = abs(an.u - ex.u)
        if model.n_modes:
            errs[1, k] = np.max(np.abs(an.v - ex.v))
            errs[2, k] = np.max(np.abs(an.u_b - ex.u_b))
            errs[3, k] = np.max(np.abs(an.v_cross - ex.v_cross))
    return ErrorReport(times, errs[0], errs[1], errs[2], errs[3], recurrence_time(model))


def energy(model: ModelParams, amplitudes) -> float:
    """<H> of a coherent product: the one-particle quadratic form lambda^+ M lambda."""
    a = np.asarray(amplitudes, dtype=complex)
    return float(np.real(np.vdot(a, build_matrix(model).entries @ a)))


def default_window(model: ModelParams, rates: DerivedRates, fraction: float = 0.8) -> float:
    """min(3 / gamma, fraction * recurrence time)."""
    t_dec = 3.0 / rates.gamma if rates.gamma > 0 else math.inf
    return min(t_dec, fraction * recurrence_time(model))
