"""Coherent-state dynamics, packet centers, bath fluctuations and factorization.

Amplitude vectors are ordered (system, bath_1, ..., bath_N).  Forward
evolution applies the forward propagator S(t); the coherent-representation
arguments of the wave function use its adjoint S(t)^+, i.e. the conjugated
coefficients and exp(+i w_j t) on the bath diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .analytic import CoefficientSet, coeff_u, coeff_v_all, coefficient_set_analytic, transfer_f
from .exact import exact_coefficients
from .model import BathMode, DerivedRates, ModelParams


@dataclass(frozen=True, eq=False)
class CoherentAmplitudes:
    lam: complex
    lam_b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lam", complex(self.lam))
        object.__setattr__(self, "lam_b", np.atleast_1d(np.asarray(self.lam_b, dtype=complex)))

    @classmethod
    def from_vector(cls, vec) -> "CoherentAmplitudes":
        vec = np.asarray(vec, dtype=complex)
        return cls(vec[0], vec[1:])

    @classmethod
    def from_centers(cls, model: ModelParams, q0: float, x0) -> "CoherentAmplitudes":
        """Gaussian packets at rest: lambda = sqrt(w / 2) * center (hbar = 1)."""
        model.require_positive_frequencies("coordinate mapping")
        x0 = np.broadcast_to(np.asarray(x0, dtype=float), (model.n_modes,))
        return cls(math.sqrt(model.omega / 2) * q0, np.sqrt(model.omegas / 2) * x0)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate(([self.lam], self.lam_b))

    @property
    def n_modes(self) -> int:
        return self.lam_b.size

    def normalization(self) -> float:
        """N(lambda, {lambda_j}) = exp(-|lambda|^2/2 - sum |lambda_j|^2/2)."""
        return math.exp(-0.5 * float(np.sum(np.abs(self.vector) ** 2)))

    def centers(self, model: ModelParams):
        """(q_0, x_j0) from the real parts of the amplitudes."""
        model.require_positive_frequencies("coordinate mapping")
        q0 = math.sqrt(2 / model.omega) * self.lam.real
        return q0, np.sqrt(2 / model.omegas) * self.lam_b.real


def _check_dims(amps: CoherentAmplitudes, coeffs: CoefficientSet):
    if amps.n_modes != coeffs.n_modes:
        raise ValueError(f"amplitudes carry {amps.n_modes} bath modes, coefficients {coeffs.n_modes}")


def evolve_amplitudes(init: CoherentAmplitudes, coeffs: CoefficientSet) -> CoherentAmplitudes:
    """lambda(t) = S(t) lambda(0); the bath-bath sum includes the diagonal correction."""
    _check_dims(init, coeffs)
    lam = coeffs.u * init.lam + np.dot(coeffs.v, init.lam_b)
    lam_b = coeffs.free_phase * init.lam_b + coeffs.u_b * init.lam + coeffs.v_cross @ init.lam_b
    return CoherentAmplitudes(lam, lam_b)


def wavefunction_arguments(point: CoherentAmplitudes, coeffs: CoefficientSet):
    """Arguments (alpha, beta_j) at which the initial factors are evaluated.

    alpha = conj(u) lambda + sum_j conj(u_b_j) lambda_j and
    beta_j = exp(+i w_j t) lambda_j + conj(v_j) lambda + sum_s conj(v_cross[s, j]) lambda_s.
    """
    _check_dims(point, coeffs)
    alpha = np.conj(coeffs.u) * point.lam + np.dot(np.conj(coeffs.u_b), point.lam_b)
    beta = (np.conj(coeffs.free_phase) * point.lam_b + np.conj(coeffs.v) * point.lam
            + coeffs.v_cross.conj().T @ point.lam_b)
    return complex(alpha), beta


def coherent_factor(mu: complex) -> Callable[[complex], complex]:
    """phi(z) = <z|mu> for an initial coherent state |mu>."""
    mu = complex(mu)

    def phi(z):
        return np.exp(-0.5 * abs(z) ** 2 - 0.5 * abs(mu) ** 2 + np.conj(z) * mu)

    return phi


def fock_factor(coeffs: Sequence[complex]) -> Callable[[complex], complex]:
    """phi(z) = <z|phi> for an initial state given by Fock amplitudes."""
    c = np.asarray(coeffs, dtype=complex)
    sq = np.sqrt([math.factorial(n) for n in range(c.size)], dtype=float)

    def phi(z):
        powers = np.conj(z) ** np.arange(c.size)
        return np.exp(-0.5 * abs(z) ** 2) * np.sum(powers / sq * c)

    return phi


def wavefunction_value(point: CoherentAmplitudes, coeffs: CoefficientSet,
                       factors: Sequence[Callable]) -> complex:
    """Psi(lambda, {lambda_j}, t) = phi(alpha) * prod_j phi_j(beta_j)."""
    alpha, beta = wavefunction_arguments(point, coeffs)
    if len(factors) != 1 + beta.size:
        raise ValueError("need one initial factor per mode")
    value = complex(factors[0](alpha))
    for f, b in zip(factors[1:], beta):
        value *= complex(f(b))
    return value


# --- packet centers -------------------------------------------------------

def theta(t, mode: BathMode, rates: DerivedRates, form: str = "derived"):
    """Oscillatory factor of the Brownian term in the system packet center.

    ``"derived"`` equals L_j Re(v_j) / |xi_j| with L_j = gamma^2/4 + (w_j - omega_tilde)^2,
    exactly consistent with the closed-form v_j.  ``"literal"`` is the alternative
    expression, with sigma_j multiplied by t; it does not reproduce Re(v_j).
    """
    t = np.asarray(t, dtype=float)
    g2 = 0.5 * rates.gamma
    det = mode.omega - rates.omega_tilde
    damp = np.exp(-g2 * t)
    if form == "derived":
        a1 = mode.sigma - mode.omega * t
        a2 = mode.sigma - rates.omega_tilde * t
        return (det * np.cos(a1) + g2 * np.sin(a1)
                - damp * (det * np.cos(a2) + g2 * np.sin(a2)))
    if form == "literal":
        a1 = (rates.omega_tilde + mode.sigma) * t
        a2 = (mode.omega + mode.sigma) * t
        return damp * (g2 * np.sin(a1) + det * np.cos(a1)) - (g2 * np.sin(a2) + det * np.cos(a2))
    raise ValueError("form must be 'derived' or 'literal'")


@dataclass(frozen=True, eq=False)
class SystemTrajectory:
    t: np.ndarray
    classical: np.ndarray
    brownian: np.ndarray

    @property
    def total_q(self) -> np.ndarray:
        return self.classical + self.brownian


@dataclass(frozen=True, eq=False)
class BathCenter:
    t: np.ndarray
    j: int
    free: np.ndarray
    backaction: np.ndarray
    mutual: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.free + self.backaction + self.mutual


def _require_real_centers(init: CoherentAmplitudes):
    if abs(init.lam.imag) > 0 or np.any(init.lam_b.imag != 0):
        raise ValueError("closed-form packet centers need real initial amplitudes; "
                         "use evolve_amplitudes for general ones")


def classical_orbit(t, q0: float, rates: DerivedRates):
    """q_0 exp(-gamma t / 2) cos(omega_tilde t)."""
    return q0 * np.real(coeff_u(t, rates))


def packet_center_q(init: CoherentAmplitudes, model: ModelParams, rates: DerivedRates, t,
                    theta_form: str = "derived") -> SystemTrajectory:
    _require_real_centers(init)
    q0, x0 = init.centers(model)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    classical = classical_orbit(t, q0, rates)
    brownian = np.zeros_like(t)
    for mode, xj in zip(model.modes, x0):
        lor = 0.25 * rates.gamma**2 + (mode.omega - rates.omega_tilde) ** 2
        if mode.xi_abs == 0 or xj == 0:
            continue
        if lor == 0:
            # gamma = 0 exactly on resonance: the Lorentzian form degenerates
            v = -mode.xi * np.exp(-1j * mode.omega * t) * transfer_f(0.0, t)
            brownian += math.sqrt(mode.omega / model.omega) * xj * v.real
            continue
        brownian += (mode.xi_abs * math.sqrt(mode.omega / model.omega) * xj
                     * theta(t, mode, rates, theta_form) / lor)
    return SystemTrajectory(t, classical, brownian)


def bath_center_terms(init: CoherentAmplitudes, model: ModelParams, rates: DerivedRates, t,
                      convention: str = "derived"):
    """(free, backaction, mutual) for every bath mode, each of shape (len(t), N)."""
    _require_real_centers(init)
    q0, x0 = init.centers(model)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    w = model.omegas
    ratios = np.sqrt(w[None, :] / w[:, None])  # [j, s] -> sqrt(w_s / w_j)
    np.fill_diagonal(ratios, 0.0)
    free = x0[None, :] * np.cos(np.outer(t, w))
    back = np.empty_like(free)
    mutual = np.empty_like(free)
    for k, tk in enumerate(t):
        c = coefficient_set_analytic(model, rates, tk, convention)
        back[k] = q0 * np.sqrt(model.omega / w) * c.u_b.real
        mutual[k] = (c.v_cross.real * ratios) @ x0
    return free, back, mutual


def packet_center_bath(init: CoherentAmplitudes, model: ModelParams, rates: DerivedRates, t,
                       j: int, convention: str = "derived") -> BathCenter:
    """Bath packet center split into free motion, back-action and mutual coupling.

    Back-action uses the system -> bath coefficient and the mutual sum the
    bath s -> bath j coefficient (forward propagation); for real couplings
    these coincide with v_j and v_cross[s, j].  The second-order diagonal
    correction v_cross[j, j] is not part of any of the three terms.
    """
    free, back, mutual = bath_center_terms(init, model, rates, t, convention)
    return BathCenter(np.atleast_1d(np.asarray(t, dtype=float)), j,
                      free[:, j], back[:, j], mutual[:, j])


def exact_centers(init: CoherentAmplitudes, model: ModelParams, t) -> np.ndarray:
    """(q_c, x_1c, ..., x_Nc) from exact amplitude evolution; shape (len(t), N + 1)."""
    model.require_positive_frequencies("coordinate mapping")
    scale = np.sqrt(2.0 / np.concatenate(([model.omega], model.omegas)))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty((t.size, model.n_modes + 1))
    for k, tk in enumerate(t):
        out[k] = scale * evolve_amplitudes(init, exact_coefficients(model, tk)).vector.real
    return out


# --- bath fluctuation correlation -----------------------------------------

@dataclass(frozen=True)
class CorrelationQuery:
    t: float
    t_prime: float
    temperature: float = 0.0

    def __post_init__(self):
        if self.temperature < 0 or not math.isfinite(self.temperature):
            raise ValueError("temperature must be finite and >= 0")
        if self.t < 0 or self.t_prime < 0:
            raise ValueError("correlation times must be >= 0")


def occupation(omegas, temperature: float) -> np.ndarray:
    """Bose occupation 1 / (exp(w / T) - 1); identically 0 at T = 0."""
    w = np.asarray(omegas, dtype=float)
    if temperature == 0:
        return np.zeros_like(w)
    if np.any(w <= 0):
        raise ValueError("thermal occupation needs positive bath frequencies")
    return 1.0 / np.expm1(w / temperature)


def correlation_kernel(t: float, t_prime: float, mode: BathMode, rates: DerivedRates) -> complex:
    """f_j(t, t') = conj(g_j(t)) g_j(t'), g_j(t) = (1 - exp(i(w_j - omega_tilde)t - gamma t/2)) exp(-i w_j t)."""
    def g(s):
        x = 1j * (mode.omega - rates.omega_tilde) * s - 0.5 * rates.gamma * s
        return -np.expm1(x) * np.exp(-1j * mode.omega * s)

    return complex(np.conj(g(t)) * g(t_prime))


def bath_correlation(model: ModelParams, rates: DerivedRates, query: CorrelationQuery) -> complex:
    """<B^+(t) B(t')> = sum_j conj(v_j(t)) v_j(t') nbar_j by direct summation."""
    nbar = occupation(model.omegas, query.temperature)
    if not np.any(nbar):
        return 0j
    v1 = coeff_v_all(model, rates, query.t)
    v2 = coeff_v_all(model, rates, query.t_prime)
    return complex(np.sum(np.conj(v1) * v2 * nbar))


def correlation_matrix(model: ModelParams, rates: DerivedRates, times, times_prime,
                       temperature: float) -> np.ndarray:
    """C[a, b] = <B^+(times[a]) B(times_prime[b])> by direct summation."""
    nbar = occupation(model.omegas, temperature)
    t1 = np.atleast_1d(np.asarray(times, dtype=float))
    t2 = np.atleast_1d(np.asarray(times_prime, dtype=float))
    if not np.any(nbar):
        return np.zeros((t1.size, t2.size), dtype=complex)
    v1 = np.array([coeff_v_all(model, rates, t) for t in t1])
    v2 = np.array([coeff_v_all(model, rates, t) for t in t2])
    return (np.conj(v1) * nbar) @ v2.T


def bath_correlation_kernel_form(model: ModelParams, rates: DerivedRates,
                                 query: CorrelationQuery) -> complex:
    """Same correlation written as sum_j 4|xi_j|^2 f_j nbar_j / (gamma^2 + 4 (w_j - omega_tilde)^2)."""
    nbar = occupation(model.omegas, query.temperature)
    total = 0j
    for mode, n in zip(model.modes, nbar):
        if n == 0 or mode.xi_abs == 0:
            continue
        denom = rates.gamma**2 + 4.0 * (mode.omega - rates.omega_tilde) ** 2
        if denom == 0:
            phase = np.exp(1j * mode.omega * (query.t - query.t_prime))
            total += mode.xi_abs**2 * query.t * query.t_prime * phase * n
            continue
        total += 4.0 * mode.xi_abs**2 * correlation_kernel(query.t, query.t_prime, mode, rates) / denom * n
    return complex(total)


# --- factorization --------------------------------------------------------

@dataclass(frozen=True)
class FactorizationReport:
    t: float
    brownian_weight: float
    backaction_weight: float
    mutual_weight: float
    threshold: float

    @property
    def factorized(self) -> bool:
        return self.brownian_weight < self.threshold


def factorization_metrics(model: ModelParams, rates: DerivedRates, t: float,
                          threshold: float = 1e-4) -> FactorizationReport:
    """Entanglement weights from the exact coefficients.

    ``rates`` is accepted for interface symmetry; the weights themselves are
    exact and do not depend on it.
    """
    c = exact_coefficients(model, t)
    off = ~np.eye(model.n_modes, dtype=bool)
    return FactorizationReport(
        float(t),
        float(np.sum(np.abs(c.v) ** 2)),
        float(np.sum(np.abs(c.u_b) ** 2)),
        float(np.sum(np.abs(c.v_cross[off]) ** 2)),
        threshold,
    )
