"""Inverse filtering of ``h1(L_sym)`` on circulant graphs, averaged over random signals."""
from __future__ import annotations

import logging
import math
import re
import warnings

import numpy as np

from ..errors import InsufficientSamplesError
from ..graphs import build_circulant
from ..inverse import (
    arma_solve,
    cheb_sup_error,
    chebyshev_coeffs,
    fit_rate,
    gd0_solve,
    gd0_step,
    icpa_solve,
    iopa_solve,
    optimal_poly,
    spectral_contraction,
    Approximant,
)
from ..polyfilter import PolyCoeffs, apply, filter_from_dict
from ..shifts import ShiftFamily, circulant_spectrum, lsym_shift
from .config import ExperimentConfig
from .io import ensure_dir, write_csv, write_meta

log = logging.getLogger(__name__)

H1 = PolyCoeffs([27 / 4, -3 / 4, -1.0])
_METHOD = re.compile(r"^(ARMA|GD0|IOPA|ICPA)(\d*)$")


def parse_method(name: str):
    m = _METHOD.match(name.strip().upper())
    if not m or (m.group(1) in ("IOPA", "ICPA") and not m.group(2)):
        raise ValueError(f"unknown method {name!r}; expected ARMA, GD0, IOPA<L> or ICPA<K>")
    return m.group(1), int(m.group(2)) if m.group(2) else None


def circulant_problem(N: int, generators, h: PolyCoeffs = H1):
    """``(family, spectrum)`` for ``L_sym(C(N, Q))`` with its analytic spectrum."""
    G = build_circulant(N, generators)
    spec = circulant_spectrum(N, generators)
    F = ShiftFamily([lsym_shift(G)], spectrum=spec)
    return F, spec


def prepare_methods(h, F, spec, methods):
    """Precompute approximants once; returns ``{name: (runner, info)}``."""
    plans = {}
    for name in methods:
        kind, deg = parse_method(name)
        if kind == "GD0":
            gamma = gd0_step(h, spec)
            rho = spectral_contraction(h, Approximant("scaled-identity", gamma), spec)
            plans[name] = dict(kind=kind, gamma=gamma, bound=rho, contraction=rho)
        elif kind == "IOPA":
            g, aL = optimal_poly(h, spec, deg)
            rho = spectral_contraction(h, Approximant("polynomial", g), spec)
            plans[name] = dict(kind=kind, deg=deg, g=(g, aL), bound=aL, contraction=rho)
        elif kind == "ICPA":
            c = chebyshev_coeffs(h, h.d, deg)
            bK = cheb_sup_error(h, c)
            rho = spectral_contraction(h, Approximant("chebyshev", c), spec)
            plans[name] = dict(kind=kind, deg=deg, c=(c, bK), bound=bK, contraction=rho)
        else:
            plans[name] = dict(kind=kind, bound=None, contraction=None)
    return plans


def run_method(plan, h, F, b, M, x_true):
    kind = plan["kind"]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if kind == "GD0":
            return gd0_solve(lambda z: apply(h, F, z), b, plan["gamma"], M, x_true=x_true)
        if kind == "IOPA":
            return iopa_solve(h, F, b, plan["deg"], M, x_true=x_true, g=plan["g"])
        if kind == "ICPA":
            return icpa_solve(h, F, b, plan["deg"], M, x_true=x_true, c=plan["c"])
        return arma_solve(h, F.shifts[0], b, M, x_true=x_true, S_norm=plan.get("S_norm"))


def exp_circulant(config: ExperimentConfig, *, write: bool = True) -> dict:
    """Mean relative error ``E(m, x)`` per method over random ``x ~ U[-1, 1]^N``.

    Returns ``{"errors": {method: array}, "rates": ..., "iters": ...,
    "diverged": ..., "bounds": ...}`` and writes ``table.csv``, ``rates.csv``,
    ``trace_<method>.csv`` and ``meta.json`` when ``config.out`` is set.
    """
    N, Q, M = config.n, list(config.generators), config.iterations
    h = filter_from_dict(config.filter) if config.filter else H1
    F, spec = circulant_problem(N, Q, h)
    plans = prepare_methods(h, F, spec, config.methods)
    if any(p["kind"] == "ARMA" for p in plans.values()):
        # symmetric circulant shift: ||S||_2 = max |lambda|
        snorm = float(np.abs(spec.lam).max())
        for p in plans.values():
            p["S_norm"] = snorm
    rng = np.random.default_rng(config.seed)
    per_trial = {name: [] for name in plans}
    rates = {name: [] for name in plans}
    clock = {name: [] for name in plans}
    diverged = {name: False for name in plans}
    for trial in range(config.trials):
        x = rng.uniform(-1.0, 1.0, N)
        b = apply(h, F, x)
        for name, plan in plans.items():
            tr = run_method(plan, h, F, b, M, x)
            per_trial[name].append(tr.rel_errors)
            clock[name].append(tr.wallclock_us[-1])
            diverged[name] |= tr.diverged
            try:
                fit = fit_rate(tr)
                rates[name].append(fit.rate)
            except InsufficientSamplesError:
                pass
    errors, mean_rate, iters = {}, {}, {}
    for name in plans:
        E = np.array(per_trial[name])
        errors[name] = np.array([math.fsum(E[:, m]) / E.shape[0] for m in range(E.shape[1])])
        mean_rate[name] = math.fsum(rates[name]) / len(rates[name]) if rates[name] else float("nan")
        hit = np.flatnonzero(errors[name] <= config.tol)
        iters[name] = int(hit[0]) if hit.size else None
        if plans[name]["contraction"] is not None and plans[name]["contraction"] >= 1:
            diverged[name] = True
    result = dict(errors=errors, rates=mean_rate, iters=iters, diverged=diverged,
                  bounds={k: p["bound"] for k, p in plans.items()},
                  contraction={k: p["contraction"] for k, p in plans.items()},
                  wallclock_us={k: float(np.mean(v)) for k, v in clock.items()},
                  # divergence that the a priori bound did not predict
                  unexpected_divergence=[k for k, p in plans.items()
                                         if diverged[k] and (p["bound"] is None or p["bound"] < 1)])
    if write and config.out:
        write_circulant_outputs(config, result)
    return result


def write_circulant_outputs(config, result) -> None:
    out = ensure_dir(config.out)
    ms = [m for m in config.report_m if m <= config.iterations]
    write_csv(out / "table.csv", ["method"] + [f"m{m}" for m in ms],
              [[k] + [round(float(v[m]), 4) for m in ms] for k, v in result["errors"].items()])
    write_csv(out / "rates.csv",
              ["method", "rate", "bound", "contraction", "iterations_to_tol", "diverged"],
              [[k, result["rates"][k], result["bounds"][k], result["contraction"][k],
                result["iters"][k], result["diverged"][k]] for k in result["errors"]])
    for k, v in result["errors"].items():
        write_csv(out / f"trace_{k}.csv", ["m", "mean_rel_error"],
                  [[m, float(e)] for m, e in enumerate(v)])
    write_csv(out / "timings.csv", ["method", "wallclock_us"],
              [[k, round(v, 1)] for k, v in result["wallclock_us"].items()])
    write_meta(out / "meta.json", config, unexpected_divergence=result["unexpected_divergence"])
