"""Run configuration: YAML file -> fully resolved, validated dictionary.

Schema (unknown keys are rejected at every level)::

    model:
      omega: 1.0                    # required, > 0
      bath:                         # spectral discretization ...
        shape: flat                 # flat | ohmic | table
        center: 1.0
        width: 10.0
        n_modes: 201
        strength: 0.2387            # flat: integrated weight; ohmic: prefactor
        cutoff: 1.0                 # ohmic only
        table: [[w, J], ...]        # table only
        random_phases: false        # draw sigma_j from `seed`
      modes:                        # ... or an explicit table (not both)
        - {omega: 1.1, xi_abs: 0.05, sigma: 0.0}
    rates:
      method: golden-rule           # golden-rule | fit | explicit
      gamma: null                   # explicit only
      delta_omega: 0.0              # explicit only
      fit_t_max: null               # fit only; default min(3/gamma_golden, 0.8 t_rec)
    initial:                        # either amplitudes ...
      lambda: [1.0, 0.0]            # complex as number or [re, im]
      lambda_b: 0.0                 # scalar (broadcast) or per-mode list
      # ... or packet centers at rest: q0: 1.0, x0: 0.0 (scalar or list)
    grid: {t_start: 0.0, t_end: 10.0, samples: 101}
    temperature: 0.0
    convention: derived             # derived | literal (bath-bath kernel)
    theta_form: derived             # derived | literal (Brownian oscillation factor)
    correlation: {t_prime: grid}    # grid (all pairs) or list of times
    heff: {family: ck, params: {}}
    fock: {n_max: 12, max_modes: 2}
    output: {modes: all}            # all or list of mode indices for per-mode columns
    thresholds: {...}               # see DEFAULT_THRESHOLDS
    seed: 0
"""

from __future__ import annotations

import copy
import hashlib
import json
from typing import Any

import numpy as np
import yaml

from .model import BathMode, DerivedRates, ModelParams, SpectralModel, build_bath, golden_rule_rates


class ConfigError(ValueError):
    pass


DEFAULT_THRESHOLDS = {
    "analytic_budget": 0.05,
    "factorization": 1e-4,
    "unitarity": 1e-10,
    "group_property": 1e-9,
    "energy": 1e-9,
    "langevin": 1e-8,
    "delta_purity": 1e-12,
    "hermiticity": 1e-12,
    "heisenberg": 1e-8,
    "classical_orbit": 1e-8,
    "fock": 1e-6,
}

_BATH_DEFAULTS = {"shape": "flat", "center": None, "width": 1.0, "n_modes": 1, "strength": 0.0,
                  "cutoff": 1.0, "table": None, "random_phases": False}

_DEFAULTS = {
    "rates": {"method": "golden-rule", "gamma": None, "delta_omega": 0.0, "fit_t_max": None},
    "grid": {"t_start": 0.0, "t_end": 10.0, "samples": 101},
    "temperature": 0.0,
    "convention": "derived",
    "theta_form": "derived",
    "correlation": {"t_prime": "grid"},
    "heff": {"family": "ck", "params": {}},
    "fock": {"n_max": 12, "max_modes": 2},
    "output": {"modes": "all"},
    "thresholds": DEFAULT_THRESHOLDS,
    "seed": 0,
}

_TOP_KEYS = {"model", "initial"} | set(_DEFAULTS)


def _strict(section: dict, allowed, where: str):
    if not isinstance(section, dict):
        raise ConfigError(f"{where} must be a mapping")
    extra = sorted(set(section) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _merge(defaults: dict, given: dict, where: str) -> dict:
    _strict(given, defaults, where)
    out = copy.deepcopy(defaults)
    out.update(given)
    return out


def parse_complex(value, where: str) -> complex:
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number or [re, im]")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
        return complex(value[0], value[1])
    raise ConfigError(f"{where}: expected a number or [re, im], got {value!r}")


def _float(value, where: str, positive=False, nonneg=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    v = float(value)
    if positive and not v > 0:
        raise ConfigError(f"{where} must be > 0")
    if nonneg and not v >= 0:
        raise ConfigError(f"{where} must be >= 0")
    return v


def resolve(raw: dict, seed_override=None) -> dict:
    """Expand defaults and validate; the result is plain JSON-serializable data."""
    if raw is None:
        raw = {}
    _strict(raw, _TOP_KEYS, "config")
    cfg: dict[str, Any] = {}
    if "model" not in raw:
        raise ConfigError("config needs a model section")
    model = raw["model"]
    _strict(model, {"omega", "bath", "modes"}, "model")
    if "omega" not in model:
        raise ConfigError("model.omega is required")
    rm = {"omega": _float(model["omega"], "model.omega", positive=True)}
    if "bath" in model and "modes" in model:
        raise ConfigError("model.bath and model.modes are mutually exclusive")
    if "bath" in model:
        bath = _merge(_BATH_DEFAULTS, model["bath"] or {}, "model.bath")
        if bath["center"] is None:
            bath["center"] = rm["omega"]
        for k in ("center", "width", "strength", "cutoff"):
            bath[k] = _float(bath[k], f"model.bath.{k}")
        if not isinstance(bath["n_modes"], int) or isinstance(bath["n_modes"], bool) or bath["n_modes"] < 1:
            raise ConfigError("model.bath.n_modes must be a positive integer")
        if bath["shape"] not in ("flat", "ohmic", "table"):
            raise ConfigError(f"model.bath.shape {bath['shape']!r} not one of flat, ohmic, table")
        if not isinstance(bath["random_phases"], bool):
            raise ConfigError("model.bath.random_phases must be true or false")
        rm["bath"] = bath
    else:
        modes = model.get("modes", []) or []
        if not isinstance(modes, list):
            raise ConfigError("model.modes must be a list")
        out = []
        for k, m in enumerate(modes):
            m = _merge({"omega": None, "xi_abs": 0.0, "sigma": 0.0}, m, f"model.modes[{k}]")
            out.append({key: _float(m[key], f"model.modes[{k}].{key}") for key in m})
        rm["modes"] = out
    cfg["model"] = rm

    for key in ("rates", "grid", "correlation", "heff", "fock", "output", "thresholds"):
        cfg[key] = _merge(_DEFAULTS[key], raw.get(key) or {}, key)
    for key in ("temperature", "convention", "theta_form", "seed"):
        cfg[key] = raw.get(key, _DEFAULTS[key])
    if seed_override is not None:
        cfg["seed"] = int(seed_override)
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool):
        raise ConfigError("seed must be an integer")
    if cfg["rates"]["method"] not in ("golden-rule", "fit", "explicit"):
        raise ConfigError("rates.method must be golden-rule, fit or explicit")
    if cfg["rates"]["method"] == "explicit" and cfg["rates"]["gamma"] is None:
        raise ConfigError("rates.gamma is required for explicit rates")
    if cfg["convention"] not in ("derived", "literal"):
        raise ConfigError("convention must be derived or literal")
    if cfg["theta_form"] not in ("derived", "literal"):
        raise ConfigError("theta_form must be derived or literal")
    cfg["temperature"] = _float(cfg["temperature"], "temperature", nonneg=True)
    g = cfg["grid"]
    g["t_start"] = _float(g["t_start"], "grid.t_start", nonneg=True)
    g["t_end"] = _float(g["t_end"], "grid.t_end", nonneg=True)
    if not isinstance(g["samples"], int) or g["samples"] < 1:
        raise ConfigError("grid.samples must be a positive integer")
    if g["t_end"] < g["t_start"]:
        raise ConfigError("grid.t_end must be >= grid.t_start")
    for k, v in cfg["thresholds"].items():
        cfg["thresholds"][k] = _float(v, f"thresholds.{k}", positive=True)
    modes_out = cfg["output"]["modes"]
    if modes_out != "all" and not (isinstance(modes_out, list) and all(isinstance(i, int) for i in modes_out)):
        raise ConfigError("output.modes must be 'all' or a list of indices")
    tp = cfg["correlation"]["t_prime"]
    if tp != "grid" and not (isinstance(tp, list) and all(isinstance(x, (int, float)) for x in tp)):
        raise ConfigError("correlation.t_prime must be 'grid' or a list of times")
    if cfg["heff"]["family"] not in ("ck", "exponential", "hyperbolic", "polynomial"):
        raise ConfigError("heff.family must be ck, exponential, hyperbolic or polynomial")
    _strict(cfg["heff"]["params"] or {}, {"a", "phi", "r0", "r1", "ta0", "ta1", "tb0", "tb1",
                                         "alpha", "beta"}, "heff.params")

    initial = raw.get("initial") or {}
    _strict(initial, {"lambda", "lambda_b", "q0", "x0"}, "initial")
    amp_keys = {"lambda", "lambda_b"} & set(initial)
    pos_keys = {"q0", "x0"} & set(initial)
    if amp_keys and pos_keys:
        raise ConfigError("initial: give amplitudes (lambda, lambda_b) or centers (q0, x0), not both")
    if pos_keys:
        cfg["initial"] = {"q0": _float(initial.get("q0", 0.0), "initial.q0"),
                          "x0": initial.get("x0", 0.0)}
    else:
        lam = parse_complex(initial.get("lambda", 0.0), "initial.lambda")
        cfg["initial"] = {"lambda": [lam.real, lam.imag], "lambda_b": initial.get("lambda_b", 0.0)}
    return cfg


def load(path, seed_override=None) -> dict:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
    return resolve(raw, seed_override)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def canonical_json(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, separators=(",", ":"))


def build_model(cfg: dict) -> ModelParams:
    m = cfg["model"]
    try:
        if "bath" in m:
            b = m["bath"]
            spec = SpectralModel(b["shape"], b["center"], b["width"], b["strength"], b["cutoff"],
                                 tuple(map(tuple, b["table"] or ())))
            seed = cfg["seed"] if b["random_phases"] else None
            modes = build_bath(spec, b["n_modes"], seed)
        else:
            modes = [BathMode(x["omega"], x["xi_abs"], x["sigma"]) for x in m["modes"]]
        return ModelParams(m["omega"], tuple(modes))
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid model: {exc}") from exc


def rates_from_config(cfg: dict, model: ModelParams) -> DerivedRates:
    from .exact import default_window
    from .model import rate_fit_from_exact

    r = cfg["rates"]
    if r["method"] == "explicit":
        try:
            return DerivedRates(model.omega, _float(r["gamma"], "rates.gamma"),
                                _float(r["delta_omega"], "rates.delta_omega"))
        except ValueError as exc:
            raise ConfigError(f"invalid rates: {exc}") from exc
    golden = golden_rule_rates(model)
    if r["method"] == "golden-rule" or model.is_free:
        return golden
    t_max = r["fit_t_max"]
    if t_max is None:
        t_max = default_window(model, golden)
    return rate_fit_from_exact(model, float(t_max))


def _per_mode(value, n: int, where: str, parse) -> np.ndarray:
    """A list of length n is per-mode; otherwise one value (or one [re, im]) is broadcast."""
    if isinstance(value, list):
        if len(value) == n:
            return np.array([parse(x, f"{where}[{k}]") for k, x in enumerate(value)])
        if parse is parse_complex and len(value) == 2:
            return np.full(n, parse(value, where))
        raise ConfigError(f"{where}: expected {n} entries, got {len(value)}")
    return np.full(n, parse(value, where))


def initial_amplitudes(cfg: dict, model: ModelParams):
    from .coherent import CoherentAmplitudes

    init = cfg["initial"]
    n = model.n_modes
    if "q0" in init:
        x0 = _per_mode(init["x0"], n, "initial.x0", lambda v, w: _float(v, w))
        try:
            return CoherentAmplitudes.from_centers(model, init["q0"], x0)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    lam_b = _per_mode(init["lambda_b"], n, "initial.lambda_b", parse_complex)
    return CoherentAmplitudes(complex(*init["lambda"]), lam_b)


def time_grid(cfg: dict) -> np.ndarray:
    g = cfg["grid"]
    return np.linspace(g["t_start"], g["t_end"], g["samples"])


def selected_modes(cfg: dict, model: ModelParams) -> list:
    sel = cfg["output"]["modes"]
    if sel == "all":
        return list(range(model.n_modes))
    bad = [i for i in sel if not 0 <= i < model.n_modes]
    if bad:
        raise ConfigError(f"output.modes out of range: {bad}")
    return list(sel)


def path_params(family: str, params: dict) -> dict:
    """heff.params with complex entries parsed: ``a`` and polynomial coefficients."""
    if family != "polynomial":
        return {k: (parse_complex(v, f"heff.params.{k}") if k == "a" else _float(v, f"heff.params.{k}"))
                for k, v in params.items()}
    out = {}
    for k, v in params.items():
        if not isinstance(v, list):
            raise ConfigError(f"heff.params.{k} must be a list of coefficients")
        out[k] = [parse_complex(c, f"heff.params.{k}[{i}]") for i, c in enumerate(v)]
    return out
