"""Command-line runner: ``singdiff run <config>`` and ``singdiff validate <config>``.

Exit codes: 0 success, 2 configuration or validation failure, 3 numerical
failure (blow-up, weight collapse, singular evaluation).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .config import load_config
from .errors import ConfigError, NumericalError
from .gibbs_lab import (
    FiniteGibbsModel,
    exact_partition,
    hoeffding_check,
    ldp_gap_study,
    rate_function_on_simplex,
    self_interaction_gap,
)
from .girsanov import rate_function_estimate
from .mckv import mv_particle_reference, picard_solve, poc_study
from .moments import verify_drift_conditions
from .particle_sim import simulate_system
from .paths import SeedSpec
from .plotting import plot_emit

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def write_csv(path, rows):
    """RFC-4180 CSV with ``repr`` floats so reruns are byte-identical."""
    if not rows:
        rows = []
    header = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(row[h]) for h in header])
    return path


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return v


def _map(fn, items, threads):
    """Ordered map over ``items`` with up to ``threads`` workers."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _marginal_rows(grid, measure_at):
    rows = []
    for i, t in enumerate(grid.times()):
        m = measure_at(i)
        rows.append({"time": float(t), "mean": float(m.mean()[0]),
                     "variance": float(m.variance()[0])})
    return rows


# ------------------------------------------------------------ experiments


def _simulate(cfg, out, threads):
    run = cfg.run
    ens = simulate_system(int(run.get("N", 64)), cfg.grid, cfg.law, cfg.drift,
                          cfg.seed, noise_on=bool(run.get("noise", True)),
                          allow_inadmissible=bool(run.get("allow_inadmissible", False)))
    ens.save(os.path.join(out, "ensemble"))
    rows = _marginal_rows(cfg.grid, ens.marginal)
    files = ["ensemble.bin", "ensemble.json",
             write_csv(os.path.join(out, "marginals.csv"), rows)]
    files.append(plot_emit(rows, "convergence", os.path.join(out, "variance.svg"),
                           x="time", y="variance", logy=False,
                           title="empirical variance"))
    return files, {"N": ens.N}


def _solve(cfg):
    run = cfg.run
    return picard_solve(cfg.drift, int(run.get("M", 2000)), cfg.grid, cfg.law,
                        m_exponent=float(run.get("m_exponent", 4.0)),
                        tol=float(run.get("tol", 1e-3)),
                        max_iter=int(run.get("max_iter", 50)),
                        damping=float(run.get("damping", 0.5)), seed=cfg.seed,
                        sampling=run.get("sampling", "rqmc"))


def _picard_outputs(rep, cfg, out):
    rows = rep.rows()
    mu = rep.final
    files = [write_csv(os.path.join(out, "picard.csv"), rows)]
    marg = _marginal_rows(mu.grid, mu.marginal)
    files.append(write_csv(os.path.join(out, "marginals.csv"), marg))
    w = np.sort(mu.weights)[::-1]
    trace = [{"rank": i + 1, "weight": float(v)} for i, v in enumerate(w)]
    files.append(write_csv(os.path.join(out, "weights.csv"), trace))
    files.append(plot_emit(rows, "convergence", os.path.join(out, "picard.svg"),
                           title="Picard distance"))
    files.append(plot_emit(trace, "weights-trace", os.path.join(out, "weights.svg"),
                           title="sorted final weights"))
    return files


def _mckv_solve(cfg, out, threads):
    rep = _solve(cfg)
    files = _picard_outputs(rep, cfg, out)
    return files, {"converged": rep.converged, "iterations": len(rep.iterates),
                   "used_fallback": rep.used_fallback, "ess": rep.final.ess}


def _rate_estimate(cfg, out, threads):
    rep = _solve(cfg)
    files = _picard_outputs(rep, cfg, out)
    est = rate_function_estimate(rep.final, cfg.drift)
    files.append(write_csv(os.path.join(out, "rate.csv"), [est.to_record()]))
    return files, {"converged": rep.converged, **est.to_record()}


def _poc_study(cfg, out, threads):
    run = cfg.run
    ref = mv_particle_reference(cfg.drift, int(run.get("reference_N", 4096)),
                                cfg.grid, cfg.law, cfg.seed)
    N_list = [int(n) for n in run.get("N_list", [32, 128, 512])]
    reps = int(run.get("replicas", 16))
    nproj = int(run.get("n_projections", 128))

    # each size gets the replica block it would get in a joint study
    def one(a):
        shifted = SeedSpec(cfg.seed.master_seed, cfg.seed.replica + a * reps)
        return poc_study(cfg.drift, [N_list[a]], reps, cfg.grid, cfg.law, shifted,
                         ref, nproj)[0]

    rows = [r.to_record() for r in _map(one, range(len(N_list)), threads)]
    files = [write_csv(os.path.join(out, "poc.csv"), rows)]
    files.append(plot_emit(rows, "loglog", os.path.join(out, "poc.svg"),
                           reference_slope=-0.5, title="W1 to reference"))
    return files, {"reference_N": ref.N}


def _verify_moments(cfg, out, threads):
    run = cfg.run
    lambdas = [float(x) for x in run.get("lambdas", [0.2, 0.1, 0.05])]
    betas = [float(x) for x in run.get("betas", [1.0, 4.0])]
    rep = verify_drift_conditions(cfg.drift, lambdas, betas, int(run.get("M", 20000)),
                                  cfg.seed.master_seed, grid=cfg.grid, law=cfg.law,
                                  d=cfg.law.dim)
    rows = rep.rows()
    files = [write_csv(os.path.join(out, "moments.csv"), rows)]
    for j, b in enumerate(betas):
        trend = [{"lambda": lam, "estimate": r.estimates[j]}
                 for lam, r in zip(rep.lambdas, rep.reports)
                 if math.isfinite(r.estimates[j])]
        files.append(plot_emit(trend, "loglog",
                               os.path.join(out, f"moments_beta{j}.svg"),
                               x="lambda", y="estimate", title=f"beta = {b:g}"))
    print(f"{'lambda':>8} {'beta':>6} {'estimate':>14} {'stderr':>12} {'ess':>10}  verdict")
    for r in rows:
        print(f"{r['lambda']:8.4g} {r['beta']:6.3g} {r['estimate']:14.6g} "
              f"{r['stderr']:12.4g} {r['ess']:10.1f}  {r['verdict']}")
    return files, {"admissible": rep.admissible, "quadrature": rep.quadrature}


def _gibbs_lab(cfg, out, threads):
    g = cfg.gibbs
    N = int(g.get("N", 50))
    model = FiniteGibbsModel(g["mu0"], g["V"], N)
    res = int(g.get("grid_resolution", 200))
    index, threshold = int(g.get("set_index", 1)), float(g.get("set_threshold", 0.7))

    def in_set(mu):
        return mu[..., index] >= threshold

    N_list = [int(n) for n in g.get("N_list", [50, 100, 200, 400])]
    gaps = _map(lambda n: ldp_gap_study(model, in_set, [n], res)[0], N_list, threads)
    gap_rows = [r.to_record() for r in gaps]
    part = exact_partition(model)
    rate = rate_function_on_simplex(model, res)
    files = [write_csv(os.path.join(out, "ldp_gap.csv"), gap_rows),
             write_csv(os.path.join(out, "partition.csv"), part.rows())]
    summary = {"log_Z": part.log_Z, "rate_minimum": rate.minimum,
               "rate_minimizer": rate.minimizer.tolist()}
    if np.all(model.V >= 0):
        hrows = [{"beta": r.beta, "lhs": r.lhs, "rhs": r.rhs, "holds": r.holds}
                 for r in hoeffding_check(model, [float(b) for b in g.get("betas", [1.0])])]
        files.append(write_csv(os.path.join(out, "hoeffding.csv"), hrows))
    if np.all(np.isfinite(model.V)):
        gap = self_interaction_gap(model)
        summary["self_interaction_gap"] = gap.gap
        summary["self_interaction_bound"] = gap.bound
    files.append(plot_emit(gap_rows, "loglog", os.path.join(out, "ldp_gap.svg"),
                           x="N", y="gap", title="LDP gap"))
    return files, summary


RUNNERS = {
    "simulate": _simulate,
    "mckv-solve": _mckv_solve,
    "poc-study": _poc_study,
    "verify-moments": _verify_moments,
    "rate-estimate": _rate_estimate,
    "gibbs-lab": _gibbs_lab,
}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def run(config_path, out_dir=None, seed_override=None, threads=1):
    """Run one experiment; returns ``(exit_code, artifact_directory)``."""
    try:
        cfg = load_config(config_path, seed_override, out_dir)
    except ConfigError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_CONFIG, None
    out = cfg.out_dir or os.path.join("runs", os.path.splitext(
        os.path.basename(str(config_path)))[0])
    os.makedirs(out, exist_ok=True)
    manifest = {
        "library_version": __version__,
        "kind": cfg.kind,
        "config": cfg.raw,
        "seeds": {"master": cfg.seed.master_seed, "replica": cfg.seed.replica},
    }
    try:
        files, summary = RUNNERS[cfg.kind](cfg, out, threads)
    except ConfigError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_CONFIG, out
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        manifest["status"] = f"numerical failure: {exc}"
        _write_manifest(out, manifest)
        return EXIT_NUMERIC, out
    manifest["status"] = "ok"
    manifest["outputs"] = sorted(os.path.basename(f) for f in files if f)
    manifest["summary"] = summary
    _write_manifest(out, manifest)
    return EXIT_OK, out


def _write_manifest(out, manifest):
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")


def validate(config_path):
    try:
        cfg = load_config(config_path)
    except ConfigError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"ok: {cfg.kind}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="singdiff", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config (TOML) or manifest.json")
    r.add_argument("config")
    r.add_argument("--out-dir")
    r.add_argument("--seed-override", type=int)
    r.add_argument("--threads", type=int, default=1)
    v = sub.add_parser("validate", help="parse and validate a config")
    v.add_argument("config")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if args.command == "validate":
        return validate(args.config)
    code, out = run(args.config, args.out_dir, args.seed_override, max(1, args.threads))
    if code == EXIT_OK:
        print(f"artifacts written to {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
