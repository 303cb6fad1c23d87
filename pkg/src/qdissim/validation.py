"""Invariant suite behind ``qdissim validate``.

Every check yields a record {name, status, tolerance, measured, note};
status is pass, fail or skip.  The report is a pure function of the
resolved config, so repeated runs serialize to identical bytes.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import config as cfgmod
from .analytic import langevin_residual
from .coherent import CoherentAmplitudes, classical_orbit
from .exact import build_matrix, compare_engines, default_window, energy, propagator, propagators
from .fock import CutoffTooSmallError, compare_with_amplitudes
from .heff import (ConstraintViolationError, InvalidPathError, ck_path, heff_coefficients,
                   heisenberg_residual, make_path)
from .model import DerivedRates, ModelParams
from .numdiff import richardson_derivative, richardson_second_derivative


@dataclass(frozen=True)
class Check:
    name: str
    status: str
    tolerance: Optional[float]
    measured: Optional[float]
    note: str = ""

    def as_dict(self) -> dict:
        d = asdict(self)
        for k in ("tolerance", "measured"):
            v = d[k]
            if v is not None and not math.isfinite(v):
                d[k] = str(v)
        return d


def _judge(name, measured, tol, note=""):
    measured = float(measured)
    ok = measured <= tol
    return Check(name, "pass" if ok else "fail", tol, measured, note)


def _skip(name, note):
    return Check(name, "skip", None, None, note)


def _subsample(times: np.ndarray, k: int) -> np.ndarray:
    if times.size <= k:
        return times
    return times[np.unique(np.linspace(0, times.size - 1, k).round().astype(int))]


def transfer_checks(model: ModelParams, init: CoherentAmplitudes, times, thr) -> list:
    out = []
    ts = _subsample(times, 25)
    m = build_matrix(model)
    stack = propagators(m, ts)
    eye = np.eye(model.n_modes + 1)
    unit = max(float(np.max(np.abs(s @ s.conj().T - eye))) for s in stack)
    out.append(_judge("exact.unitarity", unit, thr["unitarity"]))
    rows = float(np.max(np.abs(np.sum(np.abs(stack[:, 0, :]) ** 2, axis=1) - 1.0)))
    out.append(_judge("exact.row_norm", rows, thr["unitarity"]))
    group = 0.0
    for t1, t2 in zip(ts, ts[::-1]):
        lhs = propagator(m, t1 + t2).entries
        rhs = propagator(m, t1).entries @ propagator(m, t2).entries
        group = max(group, float(np.max(np.abs(lhs - rhs))))
    out.append(_judge("exact.group_property", group, thr["group_property"]))
    lam0 = init.vector
    e0 = energy(model, lam0)
    n0 = float(np.sum(np.abs(lam0) ** 2))
    lam_t = stack @ lam0
    drift = max(abs(energy(model, a) - e0) for a in lam_t) / max(1.0, abs(e0))
    out.append(_judge("exact.energy_conservation", drift, thr["energy"], "relative to max(1, |E0|)"))
    ndrift = float(np.max(np.abs(np.sum(np.abs(lam_t) ** 2, axis=1) - n0))) / max(1.0, n0)
    out.append(_judge("exact.amplitude_norm", ndrift, thr["unitarity"], "relative to max(1, |lambda|^2)"))
    return out


def decay_checks(model: ModelParams, rates: DerivedRates, times, thr, convention) -> list:
    out = []
    lang = max(langevin_residual(model, rates, float(t)).max_residual for t in _subsample(times, 20))
    out.append(_judge("analytic.langevin_residual", lang, thr["langevin"]))
    if model.is_free:
        out.append(_skip("analytic.vs_exact", "free system: no bath coupling, no decay to compare"))
        return out
    window = default_window(model, rates)
    if not math.isfinite(window):
        window = float(times[-1])
    rep = compare_engines(model, rates, np.linspace(0.0, window, 101), convention)
    errs = rep.max_errors()
    worst = max(errs["err_u"], errs["err_v"])
    out.append(_judge("analytic.vs_exact", worst, thr["analytic_budget"],
                      f"window [0, {window:.6g}]; err_u {errs['err_u']:.3e}, err_v {errs['err_v']:.3e}"))
    return out


_PURITY_PATHS = (
    ("exponential", {"a": 1.0, "phi": 0.3}),
    ("hyperbolic", {"r0": 0.2, "r1": 0.05, "ta0": 0.1, "ta1": 0.7, "tb0": -0.4, "tb1": 1.3}),
    ("polynomial", {"alpha": [1.0, [0.2, 0.5], [0.0, 0.1]], "beta": [[0.1, 0.0], 0.3]}),
)


def _heff_path(cfg, rates):
    family = cfg["heff"]["family"]
    if family == "ck":
        return ck_path(rates)[0]
    return make_path(family, cfgmod.path_params(family, cfg["heff"]["params"] or {}), rates)


def heff_checks(cfg, rates: DerivedRates, times, thr) -> list:
    out = []
    ts = _subsample(times, 20)
    paths = []
    try:
        paths.append(("configured", _heff_path(cfg, rates)))
    except (ValueError, TypeError) as exc:
        out.append(Check("heff.configured_path", "fail", None, None, str(exc)))
    for family, params in _PURITY_PATHS:
        paths.append((family, make_path(family, cfgmod.path_params(family, params), rates)))
    purity = herm = num_im = 0.0
    try:
        for _, path in paths:
            for t in ts:
                h = heff_coefficients(path, float(t))
                purity = max(purity, abs(h.delta.real) / (1.0 + abs(h.delta)))
                herm = max(herm, abs(h.pair_annihilate - np.conj(h.pair_create)))
                num_im = max(num_im, abs(h.number_imag) / (1.0 + abs(h.number_coeff)))
    except (ConstraintViolationError, InvalidPathError) as exc:
        out.append(Check("heff.path_constraint", "fail", None, None, str(exc)))
    out.append(_judge("heff.delta_purity", purity, thr["delta_purity"], "|Re delta| / (1 + |delta|)"))
    out.append(_judge("heff.pair_hermiticity", herm, thr["hermiticity"]))
    out.append(_judge("heff.number_coeff_real", num_im, thr["hermiticity"],
                      "|Im number_coeff| / (1 + |number_coeff|)"))

    path, ck = ck_path(rates)
    hs = [heff_coefficients(path, float(t)) for t in times]
    pair = max(abs(h.pair_create) for h in hs)
    out.append(_judge("heff.ck_pair_terms", pair, thr["hermiticity"]))
    spread = max(abs(h.number_coeff - ck.Omega) for h in hs) / max(1.0, ck.Omega)
    out.append(_judge("heff.ck_number_constant", spread, thr["hermiticity"],
                      f"number_coeff equals Omega = {ck.Omega:.12g}"))
    res = max(heisenberg_residual(path, rates, float(t)) for t in times)
    out.append(_judge("heff.ck_heisenberg_residual", res, thr["heisenberg"]))
    return out


def orbit_check(init: CoherentAmplitudes, model: ModelParams, rates: DerivedRates, times, thr) -> Check:
    """Residual of q'' + gamma q' + (w~^2 + gamma^2/4) q on the classical term."""
    if model.omega > 0 and init.lam.real != 0:
        q0 = math.sqrt(2 / model.omega) * init.lam.real
        note = ""
    else:
        q0, note = 1.0, "unit amplitude (initial q0 is zero)"
    g, wt = rates.gamma, rates.omega_tilde
    dt = 1e-2 / max(abs(wt), g, 1.0)
    q = lambda s: classical_orbit(s, q0, rates)  # noqa: E731
    worst = 0.0
    for t in times:
        t = float(max(t, 2 * dt))
        res = (richardson_second_derivative(q, t, dt) + g * richardson_derivative(q, t, dt)
               + (wt**2 + 0.25 * g**2) * q(t))
        worst = max(worst, abs(float(res)))
    return _judge("coherent.classical_orbit", worst / max(1.0, abs(q0)), thr["classical_orbit"], note)


def fock_check(model: ModelParams, init: CoherentAmplitudes, rates: DerivedRates, times, cfg) -> Check:
    n_keep = min(int(cfg["fock"]["max_modes"]), 2, model.n_modes)
    order = np.argsort(np.abs(model.omegas - rates.omega_tilde), kind="stable")[:n_keep]
    idx = sorted(int(i) for i in order)
    sub = model.submodel(idx)
    amps = CoherentAmplitudes(init.lam, init.lam_b[idx])
    n_max = int(cfg["fock"]["n_max"])
    ts = _subsample(times, 6)
    try:
        cmp = compare_with_amplitudes(sub, amps, ts, n_max)
    except CutoffTooSmallError as exc:
        return Check("fock.oracle_equivalence", "fail", cfg["thresholds"]["fock"], None,
                     f"{exc} (suggested n_max {exc.suggested_n_max})")
    worst = max(cmp.overlap_deficit, cmp.amplitude_error)
    return _judge("fock.oracle_equivalence", worst, cfg["thresholds"]["fock"],
                  f"modes {idx}, n_max {n_max}; 1 - overlap {cmp.overlap_deficit:.3e}, "
                  f"amplitude error {cmp.amplitude_error:.3e}")


def run(cfg: dict) -> dict:
    """Full report for a resolved config.  Raises ConfigError on bad input."""
    thr = cfg["thresholds"]
    model = cfgmod.build_model(cfg)
    times = cfgmod.time_grid(cfg)
    checks = []
    r = cfg["rates"]
    if r["method"] == "explicit" and float(r["gamma"]) < 0:
        checks.append(Check("rates.gamma_nonnegative", "fail", 0.0, float(r["gamma"]),
                            "damping constant must be >= 0; remaining checks not run"))
        return _report(cfg, checks)
    rates = cfgmod.rates_from_config(cfg, model)
    checks.append(Check("rates.gamma_nonnegative", "pass", 0.0, rates.gamma,
                        "out of band" if rates.out_of_band else ""))
    init = cfgmod.initial_amplitudes(cfg, model)
    checks += transfer_checks(model, init, times, thr)
    checks += decay_checks(model, rates, times, thr, cfg["convention"])
    checks += heff_checks(cfg, rates, times, thr)
    checks.append(orbit_check(init, model, rates, times, thr))
    checks.append(fock_check(model, init, rates, times, cfg))
    return _report(cfg, checks)


def _report(cfg, checks) -> dict:
    failed = [c.name for c in checks if c.status == "fail"]
    return {
        "config_sha256": cfgmod.config_hash(cfg),
        "status": "fail" if failed else "pass",
        "failed": failed,
        "checks": [c.as_dict() for c in checks],
    }
