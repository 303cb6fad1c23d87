"""qdissim command line: config in, CSV time series or a JSON validation report out.

Exit codes: 0 success, 1 validation failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import io
import json
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import config as cfgmod
from . import validation
from .analytic import coefficient_set_analytic
from .coherent import (bath_center_terms, correlation_matrix, exact_centers, factorization_metrics,
                       packet_center_q)
from .config import ConfigError
from .exact import build_matrix, coefficients_from_matrix, propagator
from .heff import ConstraintViolationError, InvalidPathError, ck_path, heff_coefficients, make_path

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG = 0, 1, 2


def _fmt(x) -> str:
    return "%.17g" % x


def _pmap(fn, items, threads: int) -> list:
    """Ordered map; results come back in input order whatever the thread count."""
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


class Table:
    def __init__(self, columns):
        self.columns = list(columns)
        self.rows = []
        self.meta = []

    def add(self, row):
        if len(row) != len(self.columns):
            raise AssertionError("row width does not match header")
        self.rows.append(row)

    def write(self, fh, command: str, cfg: dict):
        fh.write(f"# command: {command}\n")
        fh.write(f"# config_sha256: {cfgmod.config_hash(cfg)}\n")
        fh.write(f"# config: {cfgmod.canonical_json(cfg)}\n")
        for line in self.meta:
            fh.write(f"# {line}\n")
        fh.write(",".join(self.columns) + "\n")
        for row in self.rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _reim(name):
    return [f"{name}_re", f"{name}_im"]


def cmd_coeffs(cfg, threads) -> Table:
    model = cfgmod.build_model(cfg)
    rates = cfgmod.rates_from_config(cfg, model)
    sel = cfgmod.selected_modes(cfg, model)
    m = build_matrix(model)
    cols = ["t"] + _reim("u_analytic") + _reim("u_exact")
    for j in sel:
        for fam in ("v", "u_b"):
            cols += _reim(f"{fam}{j}_analytic") + _reim(f"{fam}{j}_exact")
    cols += ["err_u", "err_v", "err_u_b", "err_v_cross"]
    table = Table(cols)

    def row(t):
        an = coefficient_set_analytic(model, rates, t, cfg["convention"])
        ex = coefficients_from_matrix(model, propagator(m, t).entries, t)
        out = [t, an.u.real, an.u.imag, ex.u.real, ex.u.imag]
        for j in sel:
            for a, e in ((an.v[j], ex.v[j]), (an.u_b[j], ex.u_b[j])):
                out += [a.real, a.imag, e.real, e.imag]
        errs = [abs(an.u - ex.u)]
        for fam in ("v", "u_b", "v_cross"):
            diff = np.abs(getattr(an, fam) - getattr(ex, fam))
            errs.append(float(np.max(diff)) if diff.size else 0.0)
        return out + errs

    for r in _pmap(row, cfgmod.time_grid(cfg), threads):
        table.add(r)
    table.meta.append(f"gamma: {_fmt(rates.gamma)}")
    table.meta.append(f"omega_tilde: {_fmt(rates.omega_tilde)}")
    return table


def cmd_trajectory(cfg, threads) -> Table:
    model = cfgmod.build_model(cfg)
    rates = cfgmod.rates_from_config(cfg, model)
    init = cfgmod.initial_amplitudes(cfg, model)
    sel = cfgmod.selected_modes(cfg, model)
    times = cfgmod.time_grid(cfg)
    try:
        sys_traj = packet_center_q(init, model, rates, times, cfg["theta_form"])
    except ValueError as exc:
        raise ConfigError(f"trajectory: {exc}") from exc
    chunks = _pmap(lambda t: bath_center_terms(init, model, rates, [t], cfg["convention"]), times, threads)
    free = np.vstack([c[0] for c in chunks]) if chunks else np.zeros((0, model.n_modes))
    back = np.vstack([c[1] for c in chunks]) if chunks else free
    mutual = np.vstack([c[2] for c in chunks]) if chunks else free
    exact = exact_centers(init, model, times)
    cols = ["t", "q_c", "classical", "brownian", "q_exact"]
    for j in sel:
        cols += [f"x{j}_c", f"x{j}_free", f"x{j}_backaction", f"x{j}_mutual", f"x{j}_exact"]
    table = Table(cols)
    for k, t in enumerate(times):
        out = [t, sys_traj.total_q[k], sys_traj.classical[k], sys_traj.brownian[k], exact[k, 0]]
        for j in sel:
            total = free[k, j] + back[k, j] + mutual[k, j]
            out += [total, free[k, j], back[k, j], mutual[k, j], exact[k, j + 1]]
        table.add(out)
    return table


def cmd_correlation(cfg, threads) -> Table:
    model = cfgmod.build_model(cfg)
    rates = cfgmod.rates_from_config(cfg, model)
    times = cfgmod.time_grid(cfg)
    tp = cfg["correlation"]["t_prime"]
    tprime = times if tp == "grid" else np.asarray(tp, dtype=float)
    if np.any(tprime < 0):
        raise ConfigError("correlation.t_prime times must be >= 0")
    if cfg["temperature"] > 0:
        try:
            model.require_positive_frequencies("thermal occupation")
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    rows = correlation_matrix(model, rates, times, tprime, cfg["temperature"])
    table = Table(["t", "t_prime", "corr_re", "corr_im"])
    table.meta.append(f"temperature: {_fmt(cfg['temperature'])}")
    for t, row in zip(times, rows):
        for s, c in zip(tprime, row):
            table.add([t, s, c.real, c.imag])
    return table


def cmd_heff(cfg, threads) -> Table:
    model = cfgmod.build_model(cfg)
    rates = cfgmod.rates_from_config(cfg, model)
    family = cfg["heff"]["family"]
    params = cfg["heff"]["params"] or {}
    try:
        if family == "ck":
            if params:
                raise ConfigError("heff.params must be empty for the ck family")
            path, ck = ck_path(rates)
        else:
            path = make_path(family, cfgmod.path_params(family, params), rates)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"heff: {exc}") from exc

    def row(t):
        h = heff_coefficients(path, t)
        return [t, h.number_coeff, h.pair_create.real, h.pair_create.imag,
                h.delta.real, h.delta.imag, path.constraint_residual(t)]

    try:
        rows = _pmap(row, cfgmod.time_grid(cfg), threads)
    except (ConstraintViolationError, InvalidPathError) as exc:
        raise ConfigError(f"heff: {exc}") from exc
    table = Table(["t", "number_coeff", "pair_create_re", "pair_create_im", "delta_re", "delta_im",
                   "constraint_residual"])
    table.meta.append(f"family: {family}")
    if family == "ck":
        table.meta.append(f"Omega: {_fmt(ck.Omega)}")
    for r in rows:
        table.add(r)
    return table


def cmd_factorization(cfg, threads) -> Table:
    model = cfgmod.build_model(cfg)
    rates = cfgmod.rates_from_config(cfg, model)
    thr = cfg["thresholds"]["factorization"]
    reps = _pmap(lambda t: factorization_metrics(model, rates, t, thr), cfgmod.time_grid(cfg), threads)
    table = Table(["t", "brownian_weight", "backaction_weight", "mutual_weight", "factorized"])
    for r in reps:
        table.add([r.t, r.brownian_weight, r.backaction_weight, r.mutual_weight, int(r.factorized)])
    # first grid time from which the weight stays below threshold
    start = len(reps)
    while start > 0 and reps[start - 1].factorized:
        start -= 1
    if start < len(reps):
        verdict = (f"verdict: factorized from t = {_fmt(reps[start].t)} "
                   f"(brownian_weight < {_fmt(thr)} to the end of the grid)")
    else:
        verdict = f"verdict: not factorized on this grid (brownian_weight >= {_fmt(thr)} at the last time)"
    table.meta.append(verdict)
    return table


COMMANDS = {
    "coeffs": cmd_coeffs,
    "trajectory": cmd_trajectory,
    "correlation": cmd_correlation,
    "heff": cmd_heff,
    "factorization": cmd_factorization,
}


def _threads(arg) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("QDISSIM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"QDISSIM_THREADS must be an integer, got {env!r}") from None
    return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qdissim", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS) + ["validate"])
    p.add_argument("--config", required=True, metavar="PATH")
    p.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--threads", type=int, help="worker threads (default: $QDISSIM_THREADS or 1)")
    return p


def _emit(text: str, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        threads = _threads(args.threads)
        cfg = cfgmod.load(args.config, args.seed)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            if args.command == "validate":
                report = validation.run(cfg)
                text = json.dumps(report, indent=2, sort_keys=True) + "\n"
                code = EXIT_OK if report["status"] == "pass" else EXIT_VALIDATION
            else:
                table = COMMANDS[args.command](cfg, threads)
                table.meta += [f"warning: {w.category.__name__}: {w.message}"
                               for w in _unique(caught)]
                buf = io.StringIO()
                table.write(buf, args.command, cfg)
                text, code = buf.getvalue(), EXIT_OK
        for w in _unique(caught):
            print(f"qdissim: warning: {w.message}", file=sys.stderr)
    except ConfigError as exc:
        print(f"qdissim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(text, args.out)
    if code == EXIT_VALIDATION:
        print("qdissim: validation failed: " + ", ".join(report["failed"]), file=sys.stderr)
    return code


def _unique(caught):
    seen, out = set(), []
    for w in caught:
        key = (w.category, str(w.message))
        if key not in seen:
            seen.add(key)
            out.append(w)
    return out


if __name__ == "__main__":
    sys.exit(main())
