"""Brute-force second-quantized oracle on a truncated Fock space.

Basis: product states |n_0, n_1, ..., n_N> with every n_k <= n_max, ordered
lexicographically (system first, last bath mode fastest).  The Hamiltonian
conserves the total excitation number, so evolution is done sector by sector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .coherent import CoherentAmplitudes
from .model import ModelParams

DENSE_LIMIT = 2000
DEFAULT_MAX_DIM = 1_000_000


class CutoffTooSmallError(ValueError):
    def __init__(self, message, suggested_n_max):
        super().__init__(message)
        self.suggested_n_max = suggested_n_max


def _ladder(n_max: int) -> sp.csr_matrix:
    return sp.diags(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1, format="csr")


def _embed(op, k, n_modes, n_max):
    eye = sp.identity(n_max + 1, format="csr")
    out = None
    for m in range(n_modes):
        f = op if m == k else eye
        out = f if out is None else sp.kron(out, f, format="csr")
    return out


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True, eq=False)
class FockHamiltonian:
    """Truncated Hamiltonian plus what is needed to evolve number sectors exactly.

    ``method="truncated"`` exponentiates the truncated matrix itself.
    ``method="exact-sectors"`` evolves every complete excitation-number sector
    (no per-mode cap inside the sector) and projects the result back onto the
    truncated box; probability that leaves the box is booked as leakage.
    """

    matrix: sp.csr_matrix
    n_max: int
    n_modes: int
    model: ModelParams

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def occupations(self) -> np.ndarray:
        shape = (self.n_max + 1,) * self.n_modes
        return np.array(np.unravel_index(np.arange(self.dim), shape)).T

    @cached_property
    def total_number(self) -> np.ndarray:
        return self.occupations.sum(axis=1)

    def number_operator(self) -> sp.csr_matrix:
        return sp.diags(self.total_number.astype(float), format="csr")

    @cached_property
    def _dense_eig(self):
        return np.linalg.eigh(self.matrix.toarray())

    @cached_property
    def _truncated_sectors(self):
        blocks = []
        for n in np.unique(self.total_number):
            idx = np.flatnonzero(self.total_number == n)
            if idx.size > DENSE_LIMIT:
                return None
            w, v = np.linalg.eigh(self.matrix[idx][:, idx].toarray())
            blocks.append((idx, w, v))
        return blocks

    def exact_sectors_feasible(self) -> bool:
        top = self.n_max * self.n_modes
        return math.comb(top + self.n_modes - 1, self.n_modes - 1) <= DENSE_LIMIT

    def _sector(self, n: int):
        cache = self.__dict__.setdefault("_sector_cache", {})
        if n in cache:
            return cache[n]
        comps = list(_compositions(n, self.n_modes))
        index = {c: k for k, c in enumerate(comps)}
        freqs = np.concatenate(([self.model.omega], self.model.omegas))
        h = np.zeros((len(comps), len(comps)), dtype=complex)
        for k, c in enumerate(comps):
            h[k, k] = float(np.dot(freqs, c))
            for j, xi in enumerate(self.model.xi, start=1):
                if c[j] == 0:
                    continue
                # b^+ a_j moves one excitation from bath mode j to the system
                tgt = list(c)
                tgt[0] += 1
                tgt[j] -= 1
                amp = xi * math.sqrt((c[0] + 1) * c[j])
                m = index[tuple(tgt)]
                h[m, k] += amp
                h[k, m] += np.conj(amp)
        w, v = np.linalg.eigh(h)
        occ = np.array(comps)
        inside = np.all(occ <= self.n_max, axis=1)
        box = np.ravel_multi_index(occ[inside].T, (self.n_max + 1,) * self.n_modes)
        cache[n] = (w, v, np.flatnonzero(inside), box)
        return cache[n]

    def apply_exp(self, vec: np.ndarray, t: float, method: str = "auto"):
        """exp(-iHt) vec; returns (vector, probability lost from the box, full-space norm drift)."""
        if method == "auto":
            method = "exact-sectors" if self.exact_sectors_feasible() else "truncated"
        if t == 0:
            return vec.copy(), 0.0, 0.0
        if method == "exact-sectors":
            out = np.zeros_like(vec)
            lost = 0.0
            drift = 0.0
            for n in range(self.n_max * self.n_modes + 1):
                w, v, inside, box = self._sector(n)
                sub = np.zeros(v.shape[0], dtype=complex)
                sub[inside] = vec[box]
                before = np.linalg.norm(sub)
                if before == 0:
                    continue
                new = v @ (np.exp(-1j * w * t) * (v.conj().T @ sub))
                drift = max(drift, abs(np.linalg.norm(new) - before))
                out[box] = new[inside]
                lost += float(np.sum(np.abs(np.delete(new, inside)) ** 2))
            return out, lost, drift
        if method != "truncated":
            raise ValueError(f"unknown evolution method {method!r}")
        if self.dim <= DENSE_LIMIT:
            w, v = self._dense_eig
            out = v @ (np.exp(-1j * w * t) * (v.conj().T @ vec))
        else:
            blocks = self._truncated_sectors
            if blocks is None:
                out = expm_multiply(-1j * t * self.matrix, vec)
            else:
                out = np.zeros_like(vec)
                for idx, w, v in blocks:
                    out[idx] = v @ (np.exp(-1j * w * t) * (v.conj().T @ vec[idx]))
        return out, 0.0, abs(np.linalg.norm(out) - np.linalg.norm(vec))


@dataclass(frozen=True, eq=False)
class FockState:
    n_max: int
    mode_count: int
    amplitudes: np.ndarray
    leakage: float = 0.0

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def build_hamiltonian(model: ModelParams, n_max: int, max_dim: int = DEFAULT_MAX_DIM) -> FockHamiltonian:
    n_modes = model.n_modes + 1
    dim = (n_max + 1) ** n_modes
    if dim > max_dim:
        raise ValueError(f"Fock dimension {dim} exceeds bound {max_dim}")
    a = _ladder(n_max)
    ops = [_embed(a, k, n_modes, n_max) for k in range(n_modes)]
    freqs = np.concatenate(([model.omega], model.omegas))
    h = sp.csr_matrix((dim, dim), dtype=complex)
    for k in range(n_modes):
        h = h + freqs[k] * (ops[k].T @ ops[k])
    b = ops[0]
    for j, xi in enumerate(model.xi, start=1):
        hop = xi * (b.T @ ops[j])
        h = h + hop + hop.conj().T
    return FockHamiltonian(sp.csr_matrix(h), n_max, n_modes, model)


def _coherent_coeffs(lam: complex, n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    logfact = np.array([math.lgamma(k + 1) for k in n])
    mag = np.exp(-0.5 * abs(lam) ** 2 + n * math.log(abs(lam)) - 0.5 * logfact) if lam != 0 else (n == 0) * 1.0
    return mag * np.exp(1j * n * np.angle(lam))


def poisson_tail(mean: float, n_max: int) -> float:
    from scipy.stats import poisson

    return float(poisson.sf(n_max, mean))


def coherent_product_state(amps: CoherentAmplitudes, n_max: int, budget: float = 1e-8) -> FockState:
    vec = amps.vector
    tails = [poisson_tail(abs(x) ** 2, n_max) for x in vec]
    leakage = 1.0 - float(np.prod([1.0 - t for t in tails]))
    if leakage > budget:
        need = n_max
        while 1.0 - np.prod([1.0 - poisson_tail(abs(x) ** 2, need) for x in vec]) > budget:
            need += 1
        raise CutoffTooSmallError(f"truncation leakage {leakage:.3g} > budget {budget:g}; "
                                  f"use n_max >= {need}", need)
    state = np.ones(1, dtype=complex)
    for x in vec:
        state = np.kron(state, _coherent_coeffs(x, n_max))
    state /= np.linalg.norm(state)
    return FockState(n_max, vec.size, state, leakage)


def evolve(state: FockState, hamiltonian: FockHamiltonian, t: float,
           method: str = "auto", norm_tol: float = 1e-9) -> FockState:
    """exp(-iHt) applied to ``state``; see FockHamiltonian for the methods."""
    _match(state, hamiltonian)
    out, lost, drift = hamiltonian.apply_exp(state.amplitudes, t, method)
    if drift > norm_tol:
        raise RuntimeError(f"norm drift {drift:.3g} exceeds {norm_tol:g}")
    return FockState(state.n_max, state.mode_count, out, state.leakage + lost)


def _match(state: FockState, hamiltonian: FockHamiltonian):
    if state.n_max != hamiltonian.n_max or state.mode_count != hamiltonian.n_modes:
        raise ValueError("state and Hamiltonian live on different truncated bases")


def overlap(s1: FockState, s2: FockState) -> complex:
    """<s1|s2>."""
    if s1.n_max != s2.n_max or s1.mode_count != s2.mode_count:
        raise ValueError("states live on different truncated bases")
    return complex(np.vdot(s1.amplitudes, s2.amplitudes))


def expect_mode_amplitude(state: FockState, mode: int) -> complex:
    """<a_mode> with mode 0 the system."""
    a = _embed(_ladder(state.n_max), mode, state.mode_count, state.n_max)
    return complex(np.vdot(state.amplitudes, a @ state.amplitudes))


def expect(state: FockState, operator) -> complex:
    return complex(np.vdot(state.amplitudes, operator @ state.amplitudes))


def expect_number(state: FockState, mode: int) -> float:
    a = _embed(_ladder(state.n_max), mode, state.mode_count, state.n_max)
    return float(np.real(np.vdot(state.amplitudes, a.T @ (a @ state.amplitudes))))


def coherent_representation(state: FockState, point: CoherentAmplitudes) -> complex:
    """<lambda, {lambda_j}|state> using the untruncated coherent bra."""
    bra = np.ones(1, dtype=complex)
    for x in point.vector:
        bra = np.kron(bra, _coherent_coeffs(x, state.n_max))
    return complex(np.vdot(bra, state.amplitudes))


def product_state(factors) -> np.ndarray:
    """Kronecker product of per-mode Fock amplitude vectors."""
    out = np.ones(1, dtype=complex)
    for f in factors:
        out = np.kron(out, np.asarray(f, dtype=complex))
    return out


def fidelity(s1: FockState, s2: FockState) -> float:
    """|<s1|s2>| / (|s1| |s2|)."""
    return abs(overlap(s1, s2)) / (s1.norm * s2.norm)


@dataclass(frozen=True)
class OracleComparison:
    times: tuple
    overlap_deficit: float  # max over t of 1 - fidelity
    amplitude_error: float  # max over t and modes of |<a_k> - lambda_k(t)|
    leakage: float  # largest truncation leakage seen


def compare_with_amplitudes(model: ModelParams, amps: CoherentAmplitudes, times, n_max: int = 12,
                            method: str = "auto") -> OracleComparison:
    """Evolve the coherent product in Fock space and compare with S(t) lambda(0)."""
    from .coherent import evolve_amplitudes
    from .exact import exact_coefficients

    ham = build_hamiltonian(model, n_max)
    start = coherent_product_state(amps, n_max)
    deficit = err = leak = 0.0
    for t in times:
        state = evolve(start, ham, float(t), method)
        pred = evolve_amplitudes(amps, exact_coefficients(model, float(t)))
        target = coherent_product_state(pred, n_max, budget=1.0)
        deficit = max(deficit, 1.0 - fidelity(target, state))
        leak = max(leak, state.leakage)
        for k, lam in enumerate(pred.vector):
            err = max(err, abs(expect_mode_amplitude(state, k) - lam))
    return OracleComparison(tuple(float(t) for t in times), deficit, err, leak)
