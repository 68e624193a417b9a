"""Config-driven command line: five experiment kinds with machine-readable
outputs.

    impulseflow <experiment> --config cfg.json [--system NAME] [--seed N] [--out DIR]

Experiments: simulate, check-hypotheses, measure, entropy, quotient.  Outputs
are written atomically (temp file + rename) and every run emits manifest.json
with the fully resolved configuration, so identical config and seed reproduce
byte-identical files at any worker count.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys as _sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .entropy import EntropyConfig, entropy_estimate
from .hypotheses import hitting_continuity_probe, separation_report, transversality_margin
from .impulsive_system import (
    impulsive_trajectory,
    write_impulses_csv,
    write_trajectory_csv,
)
from .measures import (
    GridPartition,
    occupation_measure,
    pushforward_discrepancy,
    write_measure_csv,
)
from .quotient import equivalence_class, metric_axiom_audit, quotient_distance
from .systems import build_fixture, candidate_cloud, fixture_names, sample_impulsive_set

EXPERIMENTS = ("simulate", "check-hypotheses", "measure", "entropy", "quotient")
SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


def _fail(field: str, why: str):
    raise ConfigError(f"config field {field!r}: {why}")


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    if not isinstance(cfg, dict):
        _fail("<root>", "must be a JSON object")
    version = cfg.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        _fail("schema_version", f"unsupported version {version}")
    return cfg


def _resolve(args) -> dict:
    cfg = _load_config(args.config)
    cfg.setdefault("schema_version", SCHEMA_VERSION)
    if args.system:
        cfg["system"] = {"name": args.system,
                         "overrides": cfg.get("system", {}).get("overrides", {})}
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out:
        cfg["output_dir"] = args.out
    if args.grid:
        cfg.setdefault("params", {})["grid"] = args.grid
    cfg.setdefault("seed", 0)
    cfg.setdefault("params", {})
    cfg.setdefault("output_dir", ".")
    system = cfg.get("system")
    if not system or "name" not in system:
        _fail("system.name", "required (or pass --system)")
    if system["name"] not in fixture_names():
        _fail("system.name", f"unknown; choose from {fixture_names()}")
    system.setdefault("overrides", {})
    if not isinstance(cfg["seed"], int):
        _fail("seed", "must be an integer")
    return cfg


def _parse_grid(text: str, dim: int) -> GridPartition:
    """Parse 'lo:hi:bins,lo:hi:bins,...'; a single triple is broadcast."""
    parts = text.split(",")
    if len(parts) == 1:
        parts = parts * dim
    if len(parts) != dim:
        _fail("params.grid", f"expected {dim} comma-separated lo:hi:bins triples")
    lo, hi, bins = [], [], []
    for p in parts:
        try:
            a, b, n = p.split(":")
            lo.append(float(a))
            hi.append(float(b))
            bins.append(int(n))
        except ValueError:
            _fail("params.grid", f"bad triple {p!r}")
    return GridPartition(lo=tuple(lo), hi=tuple(hi), bins=tuple(bins))


def _atomic_write(path: Path, writer) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_json(path: Path, obj) -> None:
    def w(tmp):
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")
    _atomic_write(path, w)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def _default_box(sys_spec) -> tuple:
    name = sys_spec.name
    if name == "annulus":
        return (-2.0, -2.0), (2.0, 2.0)
    if name == "prey_predator":
        eta = max(sys_spec.impulse.params["eta"])
        return (0.0, 0.0, 0.0), (eta, eta, eta)
    if name == "doubling_suspension":
        return (-1.0, -1.0, 0.0), (1.0, 1.0, 1.0)
    if name == "tangent_degenerate":
        return (-2.5, -2.5), (2.5, 2.5)
    return (0.0, 0.0), (1.0, 1.0)


# --------------------------------------------------------------------------
# Experiments
# --------------------------------------------------------------------------

def _run_simulate(sys_spec, params, rng, outdir: Path) -> dict:
    horizon = float(params.get("horizon", 100.0))
    dt = float(params.get("dt_sample", 0.01))
    if "initial_state" in params:
        x0 = np.asarray(params["initial_state"], dtype=float)
    else:
        x0 = candidate_cloud(sys_spec, 1, rng)[0]
    traj = impulsive_trajectory(sys_spec, x0, horizon, dt)
    _atomic_write(outdir / "trajectory.csv",
                  lambda tmp: write_trajectory_csv(traj, tmp))
    _atomic_write(outdir / "impulses.csv",
                  lambda tmp: write_impulses_csv(traj, tmp))
    return {
        "initial_state": x0.tolist(),
        "n_impulses": traj.n_impulses,
        "outputs": ["trajectory.csv", "impulses.csv"],
    }


def _run_check_hypotheses(sys_spec, params, rng, outdir: Path) -> dict:
    n = int(params.get("n_samples", 1000))
    margin_tol = float(params.get("margin_tol", 1e-6))
    rep_d = transversality_margin(sys_spec, "D", n, margin_tol)
    rep_id = transversality_margin(sys_spec, "ID", n, margin_tol)
    sep = separation_report(sys_spec, min(n, 400))
    probe_point = sample_impulsive_set(sys_spec, "D", 3)[-1]
    scales = params.get("scales", [10.0 ** (-k) for k in range(1, 6)])
    table = hitting_continuity_probe(
        sys_spec, probe_point, int(params.get("approach_dirs", 2)),
        [float(s) for s in scales])
    decays = [row["tau_star_max"] for row in table if np.isfinite(row["tau_star_max"])]
    cont_ok = len(decays) >= 2 and all(a > b for a, b in zip(decays, decays[1:]))
    report = {
        "transversality_D": {
            "sampled_points": rep_d.sampled_points,
            "min_abs_inner": rep_d.min_abs_inner,
            "sign_consistent": rep_d.sign_consistent,
            "common_sign": rep_d.common_sign,
            "worst_point": rep_d.worst_point.tolist(),
            "pass": rep_d.passed,
        },
        "transversality_ID": {
            "sampled_points": rep_id.sampled_points,
            "min_abs_inner": rep_id.min_abs_inner,
            "sign_consistent": rep_id.sign_consistent,
            "common_sign": rep_id.common_sign,
            "worst_point": rep_id.worst_point.tolist(),
            "pass": rep_id.passed,
        },
        "separation": {
            "dist_D_ID": sep.dist_D_ID,
            "xi_margin": sep.xi_margin,
            "pass": sep.dist_D_ID > 0,
        },
        "continuity_table": table,
        "pass": bool(rep_d.passed and rep_id.passed and sep.dist_D_ID > 0
                     and cont_ok),
    }
    _write_json(outdir / "hypotheses.json", _jsonable(report))
    return {"pass": report["pass"], "outputs": ["hypotheses.json"]}


def _run_measure(sys_spec, params, rng, outdir: Path) -> dict:
    horizon = float(params.get("horizon", 1000.0))
    dt = float(params.get("dt_sample", 0.005))
    burn_in = float(params.get("burn_in", 0.1 * horizon))
    t_shift = float(params.get("t_shift", 1.0))
    if "grid" in params:
        grid = _parse_grid(params["grid"], sys_spec.dim)
    else:
        lo, hi = _default_box(sys_spec)
        bins = (int(params.get("bins", 40)),) * sys_spec.dim
        grid = GridPartition(lo=lo, hi=hi, bins=bins)
    if "initial_state" in params:
        x0 = np.asarray(params["initial_state"], dtype=float)
    else:
        x0 = candidate_cloud(sys_spec, 1, rng)[0]
    traj = impulsive_trajectory(sys_spec, x0, horizon, dt)
    mu = occupation_measure(traj, grid, burn_in)
    disc = pushforward_discrepancy(sys_spec, traj, grid, t_shift, burn_in)
    _atomic_write(outdir / "measure.csv", lambda tmp: write_measure_csv(mu, tmp))
    return {
        "initial_state": x0.tolist(),
        "escaped_frac": mu.escaped_frac,
        "pushforward_discrepancy": disc,
        "outputs": ["measure.csv"],
    }


def _run_entropy(sys_spec, params, rng, outdir: Path, seed: int, workers: int) -> dict:
    cfg = EntropyConfig(
        T_list=tuple(params.get("T_list", (2, 3, 4, 5, 6, 7, 8, 9, 10))),
        eps_list=tuple(params.get("eps_list", (0.1,))),
        delta_list=tuple(params.get("delta_list", (0.1,))),
        candidate_count=int(params.get("candidate_count", 4096)),
        dt_check=params.get("dt_check"),
        seed=seed,
        workers=workers,
    )
    est = entropy_estimate(sys_spec, cfg)

    def write_table(tmp):
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["T", "eps", "delta", "s_count", "saturated"])
            for r in est.table:
                w.writerow([repr(r.T), repr(r.eps), repr(r.delta),
                            r.s_count, int(r.saturated)])
    _atomic_write(outdir / "entropy_table.csv", write_table)
    return {
        "h_tau_estimate": est.h_tau_estimate,
        "lower_bound_only": est.lower_bound_only,
        "rates": {f"eps={e},delta={d}": v for (e, d), v in est.rates.items()},
        "diagnostics": _jsonable(est.diagnostics),
        "outputs": ["entropy_table.csv"],
    }


def _run_quotient(sys_spec, params, rng, outdir: Path) -> dict:
    if "points_csv" in params:
        pts = np.loadtxt(params["points_csv"], delimiter=",", skiprows=1, ndmin=2)
        if pts.shape[1] != sys_spec.dim:
            _fail("params.points_csv", "column count does not match state dimension")
    else:
        pts = candidate_cloud(sys_spec, int(params.get("n_points", 200)), rng)
    classes = [equivalence_class(sys_spec, p) for p in pts]
    n = len(classes)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            D[i, j] = D[j, i] = quotient_distance(classes[i], classes[j])
    audit = metric_axiom_audit(sys_spec, pts)

    def write_classes(tmp):
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["point_index", "member_index",
                        *sys_spec.state_names])
            for i, cl in enumerate(classes):
                for k, m in enumerate(cl.members):
                    w.writerow([i, k, *(repr(float(v)) for v in m)])

    def write_dmat(tmp):
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i", "j", "dtilde"])
            for i in range(n):
                for j in range(n):
                    w.writerow([i, j, repr(float(D[i, j]))])

    _atomic_write(outdir / "quotient_classes.csv", write_classes)
    _atomic_write(outdir / "quotient_dmatrix.csv", write_dmat)
    return {
        "n_points": n,
        "audit": {
            "symmetry_violations": audit.symmetry_violations,
            "identity_violations": audit.identity_violations,
            "triangle_violations": audit.triangle_violations,
        },
        "outputs": ["quotient_classes.csv", "quotient_dmatrix.csv"],
    }


# --------------------------------------------------------------------------
# Entry point
# --------------------------------------------------------------------------

def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="impulseflow",
        description="Impulsive-semiflow experiments with reproducible outputs.",
    )
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="JSON experiment configuration")
    p.add_argument("--system", help="builtin system name", default=None)
    p.add_argument("--seed", type=int, default=None, help="64-bit RNG seed")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--grid", default=None,
                   help="measure grid as lo:hi:bins per coordinate, comma-separated")
    p.add_argument("--workers", type=int, default=None,
                   help="worker threads for the entropy experiment")
    return p


def run(config: dict, experiment: str) -> dict:
    """Execute one experiment from a resolved config; returns the manifest."""
    outdir = Path(config["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    sys_spec = build_fixture(config["system"]["name"],
                             config["system"].get("overrides", {}))
    rng = np.random.default_rng(config["seed"])
    params = config.get("params", {})
    # worker count cannot affect any output, so it is kept out of the
    # manifest: reruns are byte-identical at any parallelism
    workers = int(config.pop("workers", 1))

    written: list[str] = []
    try:
        if experiment == "simulate":
            results = _run_simulate(sys_spec, params, rng, outdir)
        elif experiment == "check-hypotheses":
            results = _run_check_hypotheses(sys_spec, params, rng, outdir)
        elif experiment == "measure":
            results = _run_measure(sys_spec, params, rng, outdir)
        elif experiment == "entropy":
            results = _run_entropy(sys_spec, params, rng, outdir,
                                   config["seed"], workers)
        elif experiment == "quotient":
            results = _run_quotient(sys_spec, params, rng, outdir)
        else:
            raise ConfigError(f"unknown experiment {experiment!r}")
        written = results.get("outputs", [])
    except BaseException:
        for name in written:
            f = outdir / name
            if f.exists():
                f.unlink()
        raise
    manifest = {
        "artifact_version": __version__,
        "experiment": experiment,
        "resolved_config": _jsonable(config),
        "results": _jsonable(results),
    }
    _write_json(outdir / "manifest.json", manifest)
    return manifest


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        config = _resolve(args)
        if args.workers is not None:
            config["workers"] = args.workers
        run(config, args.experiment)
    except ConfigError as e:
        print(f"error: {e}", file=_sys.stderr)
        return 2
    except Exception as e:  # runtime failure: partial outputs were removed
        print(f"runtime failure: {e}", file=_sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
