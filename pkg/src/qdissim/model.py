"""Model definition: one boson mode linearly coupled to a finite boson bath.

Units are hbar = k_B = 1 and every frequency is angular.  The Hamiltonian is

    H = omega b^+ b + sum_j omega_j a_j^+ a_j + sum_j (xi_j b^+ a_j + h.c.)

with complex couplings xi_j = |xi_j| exp(i sigma_j).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


class InvalidSpecError(ValueError):
    """Raised for an unusable spectral model or bath request."""


class OutOfBandWarning(UserWarning):
    """The renormalized frequency lies outside the discretized bath band."""


class NonExponentialDecayWarning(UserWarning):
    """The exact system amplitude is not well described by exponential decay."""


@dataclass(frozen=True)
class BathMode:
    omega: float
    xi_abs: float
    sigma: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.omega):
            raise InvalidSpecError(f"bath frequency must be finite, got {self.omega}")
        if not (self.xi_abs >= 0.0 and math.isfinite(self.xi_abs)):
            raise InvalidSpecError(f"coupling magnitude must be finite and >= 0, got {self.xi_abs}")
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "xi_abs", float(self.xi_abs))
        object.__setattr__(self, "sigma", float(self.sigma) % TWO_PI)

    @property
    def xi(self) -> complex:
        return self.xi_abs * complex(math.cos(self.sigma), math.sin(self.sigma))


@dataclass(frozen=True)
class ModelParams:
    """System frequency plus an ordered tuple of bath modes.

    Mode order is stable and indexes every per-mode output.  Only the system
    frequency has to be positive; bath modes below zero frequency are allowed
    by the one-excitation dynamics, but the coordinate maps and thermal
    occupations refuse them.
    """

    omega: float
    modes: tuple = ()

    def __post_init__(self):
        if not (self.omega > 0 and math.isfinite(self.omega)):
            raise InvalidSpecError(f"system frequency must be positive, got {self.omega}")
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "modes", tuple(self.modes))
        for m in self.modes:
            if not isinstance(m, BathMode):
                raise TypeError("modes must be BathMode instances")

    @classmethod
    def from_arrays(cls, omega, omegas, xi_abs, sigma=None) -> "ModelParams":
        omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
        xi_abs = np.broadcast_to(np.asarray(xi_abs, dtype=float), omegas.shape)
        if sigma is None:
            sigma = np.zeros_like(omegas)
        sigma = np.broadcast_to(np.asarray(sigma, dtype=float), omegas.shape)
        modes = tuple(BathMode(w, x, s) for w, x, s in zip(omegas, xi_abs, sigma))
        return cls(omega, modes)

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @property
    def omegas(self) -> np.ndarray:
        return np.array([m.omega for m in self.modes], dtype=float)

    @property
    def xi(self) -> np.ndarray:
        return np.array([m.xi for m in self.modes], dtype=complex)

    @property
    def xi_abs(self) -> np.ndarray:
        return np.array([m.xi_abs for m in self.modes], dtype=float)

    @property
    def sigmas(self) -> np.ndarray:
        return np.array([m.sigma for m in self.modes], dtype=float)

    @property
    def is_free(self) -> bool:
        return self.n_modes == 0 or not np.any(self.xi_abs > 0)

    @property
    def max_frequency(self) -> float:
        return float(max([self.omega] + [abs(m.omega) for m in self.modes]))

    def scaled_couplings(self, factor: float) -> "ModelParams":
        return replace(self, modes=tuple(replace(m, xi_abs=m.xi_abs * factor) for m in self.modes))

    def submodel(self, indices: Sequence[int]) -> "ModelParams":
        return replace(self, modes=tuple(self.modes[i] for i in indices))

    def require_positive_frequencies(self, what: str = "this operation"):
        bad = [j for j, m in enumerate(self.modes) if m.omega <= 0]
        if bad:
            raise ValueError(f"{what} needs positive bath frequencies; modes {bad[:5]} are not")


@dataclass(frozen=True)
class DerivedRates:
    """Damping constant and Lamb shift; ``omega_tilde`` is always omega + delta_omega."""

    omega: float
    gamma: float
    delta_omega: float = 0.0
    out_of_band: bool = False
    fit_residual: Optional[float] = None

    def __post_init__(self):
        if not self.gamma >= 0:
            raise ValueError(f"damping constant must be >= 0, got {self.gamma}")

    @property
    def omega_tilde(self) -> float:
        return self.omega + self.delta_omega

    @classmethod
    def explicit(cls, gamma: float, omega_tilde: float) -> "DerivedRates":
        return cls(omega=omega_tilde, gamma=gamma, delta_omega=0.0)


@dataclass(frozen=True)
class SpectralModel:
    """Coupling spectral density J(w) = sum_j |xi_j|^2 delta(w - w_j), smoothed.

    shape
        ``"flat"``: J = strength / width on the band, so ``strength`` is the
        integrated weight.  ``"ohmic"``: J = strength * w * exp(-w / cutoff).
        ``"table"``: piecewise-linear J through ``table`` = ((w, J), ...), zero
        outside the tabulated range.
    The band is [center - width/2, center + width/2].
    """

    shape: str = "flat"
    center: float = 1.0
    width: float = 1.0
    strength: float = 0.0
    cutoff: float = 1.0
    table: tuple = field(default=())

    def __post_init__(self):
        if self.shape not in ("flat", "ohmic", "table"):
            raise InvalidSpecError(f"unknown spectral shape {self.shape!r}")
        if not (self.width > 0 and math.isfinite(self.width)):
            raise InvalidSpecError(f"band width must be positive, got {self.width}")
        if self.strength < 0:
            raise InvalidSpecError("coupling strength must be >= 0")
        if self.shape == "ohmic":
            if self.cutoff <= 0:
                raise InvalidSpecError("ohmic cutoff must be positive")
            if self.band[0] < 0:
                raise InvalidSpecError("ohmic band must lie at non-negative frequencies")
        if self.shape == "table":
            tab = np.asarray(self.table, dtype=float)
            if tab.ndim != 2 or tab.shape[1] != 2 or tab.shape[0] < 2:
                raise InvalidSpecError("table needs at least two (omega, J) rows")
            if np.any(np.diff(tab[:, 0]) <= 0) or np.any(tab[:, 1] < 0):
                raise InvalidSpecError("table frequencies must increase and J must be >= 0")
            object.__setattr__(self, "table", tuple(map(tuple, tab)))

    @property
    def band(self) -> tuple:
        return (self.center - 0.5 * self.width, self.center + 0.5 * self.width)

    def density(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        lo, hi = self.band
        inside = (w >= lo) & (w <= hi)
        if self.shape == "flat":
            out = np.full(w.shape, self.strength / self.width)
        elif self.shape == "ohmic":
            out = self.strength * w * np.exp(-w / self.cutoff)
        else:
            tab = np.asarray(self.table)
            out = np.interp(w, tab[:, 0], tab[:, 1], left=0.0, right=0.0)
        return np.where(inside, out, 0.0)

    def cell_weight(self, a: float, b: float) -> float:
        """Exact integral of J over [a, b] (a <= b, inside the band)."""
        if self.shape == "flat":
            return self.strength * (b - a) / self.width
        if self.shape == "ohmic":
            c = self.cutoff

            def prim(w):
                return -self.strength * c * (w + c) * math.exp(-w / c)

            return prim(b) - prim(a)
        tab = np.asarray(self.table)
        inner = tab[(tab[:, 0] > a) & (tab[:, 0] < b), 0]
        pts = np.concatenate(([a], inner, [b]))
        vals = np.interp(pts, tab[:, 0], tab[:, 1], left=0.0, right=0.0)
        return float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(pts)))

    def total_weight(self) -> float:
        return self.cell_weight(*self.band)


def build_bath(spec: SpectralModel, n_modes: int, phase_seed: Optional[int] = None) -> list:
    """Discretize ``spec`` into ``n_modes`` bath modes on a midpoint grid.

    Each mode carries the exact integral of J over its grid cell, so the
    discrete weights sum to the continuum weight over the band.  Phases are
    zero unless ``phase_seed`` is given.
    """
    if not isinstance(n_modes, (int, np.integer)) or n_modes < 1:
        raise InvalidSpecError(f"n_modes must be a positive integer, got {n_modes!r}")
    lo, hi = spec.band
    step = spec.width / n_modes
    edges = lo + step * np.arange(n_modes + 1)
    edges[-1] = hi
    centers = lo + step * (np.arange(n_modes) + 0.5)
    if n_modes == 1:
        centers = np.array([spec.center])
    weights = np.array([spec.cell_weight(a, b) for a, b in zip(edges[:-1], edges[1:])])
    if phase_seed is None:
        phases = np.zeros(n_modes)
    else:
        phases = np.random.default_rng(phase_seed).uniform(0.0, TWO_PI, n_modes)
    return [BathMode(w, math.sqrt(max(x, 0.0)), s) for w, x, s in zip(centers, weights, phases)]


def mode_spacings(omegas: np.ndarray) -> np.ndarray:
    """Local grid spacing at each (sorted) mode frequency."""
    n = len(omegas)
    if n < 2:
        return np.full(n, np.inf)
    d = np.diff(omegas)
    sp = np.empty(n)
    sp[0], sp[-1] = d[0], d[-1]
    sp[1:-1] = 0.5 * (d[1:] + d[:-1])
    return sp


def recurrence_time(model: ModelParams) -> float:
    """2 pi over the smallest non-zero adjacent bath spacing (inf for N < 2)."""
    w = np.sort(model.omegas)
    d = np.diff(w)
    d = d[d > 0]
    if d.size == 0:
        return math.inf
    return TWO_PI / float(d.min())


def _principal_shift(w0: float, omegas, xi2, spacings) -> float:
    k = int(np.argmin(np.abs(omegas - w0)))
    eta = spacings[k] * (1.0 + 1e-9)
    keep = np.abs(w0 - omegas) > eta
    return float(np.sum(xi2[keep] / (w0 - omegas[keep])))


def golden_rule_rates(model: ModelParams) -> DerivedRates:
    """Golden-rule damping and discrete principal-value Lamb shift.

    The shift is evaluated at the bare frequency, then once more at the
    shifted one; the rate is 2 pi times the local coupling density
    |xi_k|^2 / spacing_k, interpolated at omega_tilde.
    """
    if model.is_free:
        return DerivedRates(omega=model.omega, gamma=0.0, delta_omega=0.0)
    order = np.argsort(model.omegas, kind="stable")
    w = model.omegas[order]
    xi2 = model.xi_abs[order] ** 2
    sp = mode_spacings(w)
    if np.any(sp == 0):
        raise InvalidSpecError("degenerate bath frequencies: local mode density is undefined")
    if len(w) < 2:
        shift = float(np.sum(xi2 / (model.omega - w))) if w[0] != model.omega else 0.0
        warnings.warn("single bath mode: no continuum, golden-rule rate set to 0", OutOfBandWarning)
        return DerivedRates(model.omega, 0.0, shift, out_of_band=True)
    d1 = _principal_shift(model.omega, w, xi2, sp)
    d2 = _principal_shift(model.omega + d1, w, xi2, sp)
    wt = model.omega + d2
    if wt < w[0] or wt > w[-1]:
        warnings.warn(f"omega_tilde={wt:.6g} outside bath band [{w[0]:.6g}, {w[-1]:.6g}]",
                      OutOfBandWarning)
        return DerivedRates(model.omega, 0.0, d2, out_of_band=True)
    gamma = TWO_PI * float(np.interp(wt, w, xi2 / sp))
    return DerivedRates(model.omega, gamma, d2)


def rate_fit_from_exact(model: ModelParams, t_max: float, n_samples: int = 400,
                        residual_threshold: float = 0.02) -> DerivedRates:
    """Fit ln|u(t)| and arg u(t) of the exact system amplitude to straight lines.

    The modulus fit carries an intercept (the short-time non-exponential
    transient); the returned ``fit_residual`` is the RMS misfit of ln|u|.
    """
    from .exact import system_amplitude

    if t_max <= 0:
        raise ValueError("t_max must be positive")
    t_rec = recurrence_time(model)
    if t_max >= t_rec:
        raise ValueError(f"t_max={t_max} is not below the recurrence time {t_rec:.6g}")
    t = np.linspace(0.0, t_max, n_samples)
    u = system_amplitude(model, t)
    logmod = np.log(np.maximum(np.abs(u), 1e-300))
    phase = np.unwrap(np.angle(u))
    design = np.column_stack([np.ones_like(t), t])
    (c0, slope), *_ = np.linalg.lstsq(design, logmod, rcond=None)
    (p0, pslope), *_ = np.linalg.lstsq(design, phase, rcond=None)
    resid = float(np.sqrt(np.mean((logmod - design @ np.array([c0, slope])) ** 2)))
    gamma = max(-2.0 * float(slope), 0.0)
    omega_tilde = -float(pslope)
    if resid > residual_threshold:
        warnings.warn(f"exact decay is not exponential (ln|u| RMS misfit {resid:.3g})",
                      NonExponentialDecayWarning)
    return DerivedRates(model.omega, gamma, omega_tilde - model.omega, fit_residual=resid)
