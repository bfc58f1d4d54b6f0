"""``polyshift`` command line.

Exit status: 0 on success, 2 when an input violates a precondition, 3 when
the run completed but an iteration diverged unexpectedly.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings

import numpy as np

from ..errors import DivergenceError, PreconditionError
from ..graphs import (
    Graph,
    adjacency,
    build_circulant,
    laplacian,
    read_edge_list,
    sym_normalized_laplacian,
)
from ..inverse import arma_solve, gd0_solve, gd0_step, icpa_solve, iopa_solve
from ..polyfilter import ChebCoeffs, PolyCoeffs, apply, apply_cheb, filter_from_dict
from ..shifts import ShiftFamily, circulant_generator_shift, circulant_spectrum, validate_shift
from .circulant import H1, exp_circulant, parse_method
from .config import ExperimentConfig
from .denoise import exp_temperature, exp_timevarying
from .io import ensure_dir, write_csv, write_meta

log = logging.getLogger("polyshift")

EXIT_OK, EXIT_PRECONDITION, EXIT_DIVERGED = 0, 2, 3


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _floats(text: str) -> list[float]:
    out = []
    for t in text.split(","):
        t = t.strip()
        if not t:
            continue
        if "/" in t:
            a, b = t.split("/")
            out.append(float(a) / float(b))
        else:
            out.append(float(t))
    return out


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config (experiments) or filter spec (filter/inverse)")
    p.add_argument("--n", type=int, help="vertex count")
    p.add_argument("--generators", type=_ints, help="circulant generators, e.g. 1,2,5")
    p.add_argument("--method", help="method name(s), comma separated, e.g. IOPA1,ICPA2")
    p.add_argument("--degree", type=int, help="approximant degree L or K")
    p.add_argument("--trials", type=int)
    p.add_argument("--eta", type=_floats, help="noise level(s), e.g. 0.75,1/2")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--data", help="input data CSV")
    p.add_argument("--iterations", type=int, help="iteration budget M")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="polyshift",
                                 description="Polynomial filters of commuting graph shifts.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, text in [("exp-circulant", "inverse filtering on circulant graphs"),
                       ("exp-timevarying", "denoise simulated time-varying signals"),
                       ("exp-temperature", "denoise hourly temperatures (CSV or synthetic)")]:
        _common(sub.add_parser(name, help=text))
    for name, text in [("filter", "apply a polynomial filter to a signal"),
                       ("inverse", "solve h(S) x = b iteratively")]:
        p = sub.add_parser(name, help=text)
        _common(p)
        p.add_argument("--graph", help="edge-list file (default: circulant from --n/--generators)")
        p.add_argument("--shifts", default=None, help="shift spec, e.g. lsym or circ1+circ2")
        p.add_argument("--signal", help="signal CSV with columns i,value (default: random)")
        if name == "filter":
            p.add_argument("--distributed", action="store_true",
                           help="run the vertex-level simulator and export message stats")
    p = sub.add_parser("spectrum", help="joint spectrum of a shift family")
    p.add_argument("--graph", required=True, help="edge-list file")
    p.add_argument("--shifts", default="lsym", help="shift spec, e.g. lsym or circ1+circ2")
    p.add_argument("--out", help="output directory (default: print CSV)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-v", "--verbose", action="store_true")
    return ap


# ---------------------------------------------------------------- shifts


def parse_shifts(spec: str, G: Graph) -> ShiftFamily:
    """Family from ``'+'``-joined tokens: ``lsym``, ``laplacian``, ``adjacency``, ``circ<q>``."""
    shifts = []
    for tok in (t.strip().lower() for t in spec.split("+")):
        if tok == "lsym":
            M, name = sym_normalized_laplacian(G), "lsym"
        elif tok in ("laplacian", "lap"):
            M, name = laplacian(G), "laplacian"
        elif tok in ("adjacency", "adj"):
            M, name = adjacency(G), "adjacency"
        elif tok.startswith("circ") and tok[4:].isdigit():
            q = int(tok[4:])
            shifts.append(circulant_generator_shift(G.n, q, graph=G))
            continue
        else:
            raise PreconditionError(f"unknown shift token {tok!r}")
        shifts.append(validate_shift(M, G, name))
    return ShiftFamily(shifts)


def _graph_and_family(args, default_shifts="lsym"):
    if getattr(args, "graph", None):
        G = read_edge_list(args.graph)
        fam = parse_shifts(args.shifts or default_shifts, G)
        return G, fam
    N = args.n or 1000
    Q = args.generators or [1, 2, 5]
    G = build_circulant(N, Q)
    spec_txt = args.shifts or "lsym"
    fam = parse_shifts(spec_txt, G)
    if spec_txt == "lsym":
        fam = fam.with_spectrum(circulant_spectrum(N, Q))
    return G, fam


def _load_filter(args, d):
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            return filter_from_dict(json.load(fh))
    if d == 1:
        return H1
    raise PreconditionError("a filter spec (--config) is required for multi-shift families")


def _load_signal(args, n):
    if getattr(args, "signal", None):
        vals = np.zeros(n)
        with open(args.signal, encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                vals[int(row["i"])] = float(row["value"])
        return vals
    return np.random.default_rng(args.seed or 0).uniform(-1, 1, n)


# ---------------------------------------------------------------- commands


def _experiment_config(args, experiment):
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig(experiment)
    if cfg.experiment != experiment:
        raise PreconditionError(f"config is for {cfg.experiment}, not {experiment}")
    for key in ("n", "generators", "trials", "eta", "seed", "out", "data", "iterations"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    if args.method:
        cfg.methods = [m.strip().upper() for m in args.method.split(",") if m.strip()]
    elif args.degree is not None and experiment == "exp-circulant":
        cfg.methods = [f"IOPA{args.degree}", f"ICPA{args.degree}"]
    return cfg


def cmd_exp_circulant(args) -> int:
    cfg = _experiment_config(args, "exp-circulant")
    for m in cfg.methods:
        parse_method(m)
    res = exp_circulant(cfg)
    for k, v in res["errors"].items():
        ms = [m for m in cfg.report_m if m <= cfg.iterations]
        flag = "  diverged" if res["diverged"][k] else ""
        print(f"{k:6s} " + " ".join(f"{v[m]:.4f}" for m in ms) + flag)
    if res["unexpected_divergence"]:
        log.error("unexpected divergence: %s", ", ".join(res["unexpected_divergence"]))
        return EXIT_DIVERGED
    return EXIT_OK


def _print_denoise(res):
    for row in res["rows"]:
        eta, mode, method = row[:3]
        vals = row[5:]
        print(f"eta={eta:<6g} {mode:8s} {method:6s} ISNR={vals[0]:.3f} "
              + " ".join(f"{v:.3f}" for v in vals[1:-1]) + f" inf={vals[-1]:.3f}")


def cmd_exp_timevarying(args) -> int:
    cfg = _experiment_config(args, "exp-timevarying")
    _print_denoise(exp_timevarying(cfg))
    return EXIT_OK


def cmd_exp_temperature(args) -> int:
    cfg = _experiment_config(args, "exp-temperature")
    _print_denoise(exp_temperature(cfg))
    return EXIT_OK


def cmd_filter(args) -> int:
    G, fam = _graph_and_family(args)
    h = _load_filter(args, fam.d)
    x = _load_signal(args, G.n)
    out = ensure_dir(args.out) if args.out else None
    if args.distributed:
        from ..distnet import sim_filter

        g = h if isinstance(h, PolyCoeffs) else None
        if g is None:
            from ..polyfilter import cheb_to_monomial

            g = cheb_to_monomial(h)
        y, stats = sim_filter(g, fam, x, log_messages=out is not None)
        if out:
            stats.to_csv(out / "comm_log.csv")
            stats.to_json(out / "comm_summary.json")
        print(json.dumps(stats.summary()))
    else:
        y = apply_cheb(h, fam, x) if isinstance(h, ChebCoeffs) else apply(h, fam, x)
    if out:
        write_csv(out / "filtered.csv", ["i", "x", "y"], [[i, x[i], y[i]] for i in range(G.n)])
        write_meta(out / "meta.json", {"command": "filter", "graph": G.name, "n": G.n,
                                       "d": fam.d, "seed": args.seed})
    else:
        print(f"||y||_2 = {np.linalg.norm(y):.12g}")
    return EXIT_OK


def cmd_inverse(args) -> int:
    G, fam = _graph_and_family(args)
    h = _load_filter(args, fam.d)
    if not isinstance(h, PolyCoeffs):
        raise PreconditionError("inverse filtering needs a monomial filter spec")
    x = _load_signal(args, G.n)
    b = apply(h, fam, x)
    M = args.iterations or 20
    method = (args.method or "IOPA").upper()
    kind, deg = parse_method(method if method in ("ARMA", "GD0") or method[-1].isdigit()
                             else f"{method}{args.degree if args.degree is not None else 1}")
    name = kind if deg is None else f"{kind}{deg}"
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if kind == "GD0":
            tr = gd0_solve(lambda z: apply(h, fam, z), b, gd0_step(h, fam.spectrum()), M, x_true=x)
        elif kind == "IOPA":
            tr = iopa_solve(h, fam, b, deg, M, x_true=x)
        elif kind == "ICPA":
            tr = icpa_solve(h, fam, b, deg, M, x_true=x)
        else:
            tr = arma_solve(h, fam.shifts[0], b, M, x_true=x)
    if args.out:
        out = ensure_dir(args.out)
        tr.to_csv(out / f"trace_{name}.csv")
        write_csv(out / "solution.csv", ["i", "x_true", "x_hat"],
                  [[i, x[i], tr.x[i]] for i in range(G.n)])
        meta = {k: v for k, v in tr.meta.items() if k != "approximant"}
        if "approximant" in tr.meta:
            meta["approximant"] = tr.meta["approximant"].to_dict()
        write_meta(out / "meta.json", {"command": "inverse", "method": name, "graph": G.name,
                                       "iterations": M, "seed": args.seed},
                   diverged=tr.diverged, solver=meta)
    print(f"{name}: E({tr.iterations}) = {tr.rel_errors[-1]:.3e}"
          + ("  diverged" if tr.diverged else ""))
    if tr.diverged:
        raise DivergenceError(f"{name} diverged")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    G = read_edge_list(args.graph)
    fam = parse_shifts(args.shifts, G)
    spec = fam.spectrum(rng=args.seed)
    if args.out:
        out = ensure_dir(args.out)
        spec.to_csv(out / "spectrum.csv")
        write_meta(out / "meta.json", {"command": "spectrum", "graph": args.graph,
                                       "shifts": args.shifts, "n": G.n, "d": fam.d},
                   distinct=spec.distinct)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["i"] + [f"lambda_{k + 1}" for k in range(spec.d)])
        for i, row in enumerate(spec.lam):
            w.writerow([i] + [repr(float(v)) for v in np.real(row)])
    return EXIT_OK


COMMANDS = {
    "exp-circulant": cmd_exp_circulant,
    "exp-timevarying": cmd_exp_timevarying,
    "exp-temperature": cmd_exp_temperature,
    "filter": cmd_filter,
    "inverse": cmd_inverse,
    "spectrum": cmd_spectrum,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (PreconditionError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
