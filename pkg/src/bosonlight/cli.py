"""Batch runner: ``bosonlight <experiment> --config cfg.toml`` and ``bosonlight validate``.

Exit codes: 0 ok, 1 a bound check failed, 2 invalid config or argument,
3 resource limit, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np
import scipy

from . import config as cfgmod
from .bounds import (
    BoundReport,
    compute_constants,
    lr_error,
    max_tau,
    minimal_admissible_R,
    phase_observable,
    schuch_check,
    transport_check,
)
from .errors import BosonlightError, ConfigError, InvalidArgument
from .fock import build_basis, dim_limit
from .hhkl import HHKLConfig, fit_log_linear, hhkl_error_scan, hhkl_sequence, truncation_error_scan
from .hamiltonian import System
from .lattice import estimate_gamma
from .protocol import CnotGateSpec, TransferGateSpec, acceleration_demo, cnot_gate, transfer_gate

CSV_SCHEMA = "bosonlight-results v1"
COLUMNS = ("experiment", "param_name", "param_value", "lhs", "rhs", "satisfied", "config_hash")


def _pool_map(fn, items, workers: int):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _gamma(system: System) -> float:
    return system.structural_gamma()


# -- experiment families -----------------------------------------------------------

def run_constants(cfg: cfgmod.ExperimentConfig, workers: int = 1):
    b = cfg.block("constants")
    gamma = float(cfgmod.require(b, "gamma", "constants"))
    Jbar = float(cfgmod.require(b, "Jbar", "constants"))
    D = int(b.get("D", 1))
    tau = float(b.get("tau", max_tau(gamma, Jbar)))
    table = compute_constants(gamma, Jbar, tau, D, b.get("ell"), b.get("t"), b.get("R"),
                              boundary_size=int(b.get("boundary_size", 0)))
    report = BoundReport("constants")
    report.add("tau", tau, tau, max_tau(gamma, Jbar))
    if table.ell_min is not None and table.ell is not None:
        report.add("ell", table.ell, table.ell_min, table.ell, asserted=False)
    return report, {"constants": table.as_dict()}


def run_transport(cfg: cfgmod.ExperimentConfig, workers: int = 1):
    system = cfg.system()
    evo = cfg.evolution()
    psi = cfg.state(system.basis)
    b = cfg.block("transport")
    lat = system.lattice
    gamma, Jbar = _gamma(system), system.spec.Jbar
    X = b.get("X", list(range(lat.n_sites // 2)))
    ts = cfgmod.times(b, "t", max_tau(gamma, Jbar))
    s_values = [int(s) for s in b.get("s", [1])]
    enforce = bool(b.get("enforce_condition", True))
    R_spec = b.get("R", "admissible")

    jobs = []
    for t in ts:
        Rs = [minimal_admissible_R(t, gamma, Jbar, lat.dimension)] if R_spec == "admissible" else R_spec
        jobs += [(t, int(R), s) for R in Rs for s in s_values]

    def one(job):
        t, R, s = job
        return transport_check(system, psi, X, R, t, s, evo, enforce_condition=enforce)

    report = BoundReport("transport")
    for r in _pool_map(one, jobs, workers):
        for sample in r.samples:
            sample.extra["asserted"] = bool(sample.extra["admissible"])
        report.extend(r)

    payload = {"gamma": gamma, "X": list(X)}
    if "schuch" in cfg.raw:
        sreport = run_schuch(cfg, system, workers)
        report.extend(sreport)
        payload["schuch_instances"] = len(sreport.samples)
    return report, payload


def run_schuch(cfg: cfgmod.ExperimentConfig, system: System, workers: int = 1) -> BoundReport:
    """Short-time bound on every (X, s, state) of the ``[schuch]`` block.

    States are the configured one plus ``random_states`` seeded random draws.
    """
    b = cfg.block("schuch")
    evo = cfg.evolution()
    tau = float(b.get("tau", max_tau(_gamma(system), system.spec.Jbar)))
    X_sets = b.get("X_sets", [list(range(system.lattice.n_sites // 2))])
    s_values = [int(s) for s in b.get("s", [1, 2, 3])]
    states = [cfg.state(system.basis)]
    states += [cfg.rng(1000 + k).standard_normal(system.basis.dim) for k in range(int(b.get("random_states", 0)))]
    states = [v / np.linalg.norm(v) for v in states]
    jobs = [(k, X, s) for k in range(len(states)) for X in X_sets for s in s_values]

    def one(job):
        k, X, s = job
        r = schuch_check(system, states[k], X, tau, s, evo)
        r.samples[0].extra.update(state=k, X=list(X))
        return r

    report = BoundReport("schuch")
    for r in _pool_map(one, jobs, workers):
        report.extend(r)
    return report


def run_lr(cfg: cfgmod.ExperimentConfig, workers: int = 1):
    system = cfg.system()
    evo = cfg.evolution()
    psi = cfg.state(system.basis)
    b = cfg.block("lr")
    lat = system.lattice
    X0 = b.get("X0", [0])
    t = cfgmod.times(b, "t", max_tau(_gamma(system), system.spec.Jbar))[0]
    theta = float(b.get("theta", math.pi / 2))
    Rs = [lat.diameter if R == "diameter" else int(R) for R in b.get("R", [1, 2, 3])]
    O = phase_observable(system.basis, X0, theta)
    errors = _pool_map(lambda R: lr_error(system, psi, O, X0, R, t, evo), Rs, workers)

    report = BoundReport("lr")
    prev = math.inf
    for R, err in zip(Rs, errors):
        report.add("R", R, err, prev, t=t, theta=theta)
        prev = err
        if R >= lat.diameter:
            report.add("R_diameter", R, err, 0.0)
    positive = [(R, e) for R, e in zip(Rs, errors) if e > 0]
    if len(positive) >= 2:
        report.fit = fit_log_linear(*zip(*positive))
    return report, {"errors": dict(zip(map(str, Rs), errors)), "t": t}


def run_hhkl(cfg: cfgmod.ExperimentConfig, workers: int = 1):
    system = cfg.system()
    evo = cfg.evolution()
    psi = cfg.state(system.basis)
    b = cfg.block("hhkl")
    if "ell" not in b and "truncation" not in b:
        raise ConfigError("missing required field 'hhkl.ell' (or an [hhkl.truncation] block)")
    report, payload = BoundReport("hhkl"), {}
    if "ell" in b:
        ells = [int(x) for x in b["ell"]]
        dt = float(cfgmod.require(b, "dt", "hhkl"))
        t_total = float(cfgmod.require(b, "t_total", "hhkl"))
        report = hhkl_error_scan(psi, system, ells, dt, t_total,
                                 interaction_picture=bool(b.get("interaction_picture", False)), evolve_cfg=evo)
        fit = report.fit
        if not fit.get("skipped"):
            report.add("fit_slope", len(ells), fit["slope"], 0.0)
            report.add("fit_r2_deficit", len(ells), 1 - fit["r2"], 1 - float(b.get("r2_min", 0.9)))
        seq = hhkl_sequence(system.lattice, HHKLConfig(ells[0], dt, t_total))
        payload["sequence"] = json.loads(seq.to_json())

    if "truncation" in b:
        tb = b["truncation"]
        lat = system.lattice
        N = cfg.sector(lat.n_sites)
        exact = System(system.spec, build_basis(lat, N, N))
        occ = _product_occupation(cfg, lat.n_sites)
        t = cfgmod.times(tb, "t", max_tau(_gamma(system), system.spec.Jbar))[0]
        qbars = [int(q) for q in cfgmod.require(tb, "qbar", "hhkl.truncation")]
        report.extend(truncation_error_scan(exact, occ, qbars, t, evo))
    return report, payload


def _product_occupation(cfg, n_sites):
    s = cfg.block("state")
    kind = s.get("kind", "mott")
    if kind == "mott":
        return [int(s.get("filling", 1))] * n_sites
    if kind == "product":
        return list(s["occupations"])
    raise ConfigError("hhkl.truncation needs a mott or product state")


def run_protocol(cfg: cfgmod.ExperimentConfig, workers: int = 1):
    b = cfg.block("protocol")
    J, U = float(b.get("J", 1.0)), float(b.get("U", 1e3))
    h = float(b.get("h", U))
    f_transfer = float(b.get("transfer_fidelity_min", 0.99))
    f_flip = float(b.get("flip_fidelity_min", 0.99))
    f_frozen = float(b.get("frozen_fidelity_min", 0.999))
    time_tol = float(b.get("time_tolerance", 0.05))
    report = BoundReport("protocol")
    payload = {"transfer": {}, "cnot": {}}

    transfers = _pool_map(lambda N: transfer_gate(TransferGateSpec(int(N), J, U)), b.get("transfer_N", [1, 2, 3]),
                          workers)
    for res in transfers:
        N = res.params["N"]
        report.add("transfer_infidelity", N, 1 - res.fidelities["stage2"], 1 - f_transfer)
        report.add("transfer_time_deviation", N, abs(res.optimal_time / res.reference_time - 1), time_tol)
        report.add("transfer_degeneracy_error", N, res.checks["degeneracy_error"], 1e-12 * U * N * (N + 1))
        payload["transfer"][str(N)] = asdict(res)

    nbars = [int(n) for n in b.get("cnot_nbar", [1, 2, 3])]
    gates = _pool_map(lambda n: cnot_gate(CnotGateSpec(n, J, U, h)), nbars, workers)
    products = []
    for n, res in zip(nbars, gates):
        flip = min(res.fidelities["11->10"], res.fidelities["10->11"])
        frozen = min(res.fidelities["01->01"], res.fidelities["00->00"])
        report.add("cnot_flip_infidelity", n, 1 - flip, 1 - f_flip)
        report.add("cnot_frozen_infidelity", n, 1 - frozen, 1 - f_frozen)
        products.append(res.optimal_time * math.sqrt(n * (n + 1)))
        payload["cnot"][str(n)] = asdict(res)
    if len(products) >= 2:
        spread = (max(products) - min(products)) / float(np.mean(products))
        report.add("cnot_time_product_spread", len(products), spread, time_tol)
        report.fit = {"time_products": products, "spread": spread}

    rungs = int(b.get("ladder_rungs", 0))
    if rungs >= 2:
        demo = acceleration_demo(rungs, int(b.get("ladder_nbar", 1)), J, U, h, b.get("ladder_t_budget"))
        flip = demo["records"]["flip"]
        report.add("ladder_last_row_infidelity", rungs, 1 - flip.row_fidelities[-1], 0.05,
                   asserted=flip.complete)
        payload["ladder"] = {"gate_time": demo["gate_time"], "bit_transmitted": demo["bit_transmitted"],
                             "records": {k: asdict(v) for k, v in demo["records"].items()}}
    return report, payload


EXPERIMENTS = {
    "constants": run_constants,
    "transport": run_transport,
    "lr": run_lr,
    "hhkl": run_hhkl,
    "protocol": run_protocol,
}


# -- output ------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    return repr(float(x))


def render_csv(report: BoundReport, cfg_hash: str) -> str:
    buf = io.StringIO()
    buf.write(f"# {CSV_SCHEMA} experiment={report.experiment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for s in report.samples:
        w.writerow([report.experiment, s.param_name, _fmt(s.param_value), _fmt(s.lhs), _fmt(s.rhs),
                    _fmt(s.satisfied), cfg_hash])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else str(v)
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": float(x.real), "im": float(x.imag)}
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (frozenset, set)):
        return sorted(_jsonable(v) for v in x)
    return x


def versions() -> dict:
    try:
        own = version("artifact")
    except PackageNotFoundError:
        own = "unknown"
    return {"bosonlight": own, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def failing(report: BoundReport) -> list:
    return [s for s in report.samples if not s.satisfied and s.extra.get("asserted", True)]


def run_experiment(cfg: cfgmod.ExperimentConfig, out_dir: Path | None = None, workers: int = 1):
    """Run, write ``<stem>.csv`` and ``<stem>.json``; returns ``(report, payload, paths)``."""
    start = time.perf_counter()
    report, payload = EXPERIMENTS[cfg.experiment](cfg, workers)
    elapsed = time.perf_counter() - start
    out = cfg.block("output")
    out_dir = Path(out_dir if out_dir is not None else out.get("dir", "results"))
    stem = out.get("stem", cfg.experiment)
    out_dir.mkdir(parents=True, exist_ok=True)
    h = cfg.hash
    csv_path, json_path = out_dir / f"{stem}.csv", out_dir / f"{stem}.json"
    csv_path.write_text(render_csv(report, h))
    sidecar = {
        "schema": CSV_SCHEMA,
        "experiment": cfg.experiment,
        "config_hash": h,
        "config": cfg.raw,
        "source": cfg.source,
        "versions": versions(),
        "timings": {"total_seconds": elapsed},
        "fit": report.fit,
        "samples": [asdict(s) for s in report.samples],
        "results": payload,
    }
    json_path.write_text(json.dumps(_jsonable(sidecar), indent=2, sort_keys=True))
    return report, payload, (csv_path, json_path)


# -- validation --------------------------------------------------------------------

def validate(path: str, seed: int | None = None) -> list[str]:
    """Dry-run findings for a config; an empty list means it looks runnable."""
    try:
        cfg = cfgmod.load(path, seed=seed)
    except BosonlightError as exc:
        return [f"invalid config: {exc}"]
    findings = []
    if cfg.experiment == "constants":
        b = cfg.block("constants")
        try:
            gamma, Jbar = float(b["gamma"]), float(b["Jbar"])
        except KeyError as exc:
            return [f"missing required field 'constants.{exc.args[0]}'"]
        tau = float(b.get("tau", max_tau(gamma, Jbar)))
        if tau > max_tau(gamma, Jbar) * (1 + 1e-12):
            findings.append(f"tau={tau:g} exceeds 1/(4 gamma Jbar)={max_tau(gamma, Jbar):g}")
        if "ell" in b and "t" in b and tau <= max_tau(gamma, Jbar):
            table = compute_constants(gamma, Jbar, tau, int(b.get("D", 1)), b["ell"], b["t"])
            if table.ell < table.ell_min:
                findings.append(f"ell={table.ell} below the admissible minimum {table.ell_min:.6g}")
        return findings
    if cfg.experiment == "protocol":
        return findings
    try:
        lat = cfg.lattice()
        dim = cfg.estimated_dim()
    except BosonlightError as exc:
        return [f"invalid config: {exc}"]
    print(f"estimated basis dimension: {dim}")
    if dim > dim_limit():
        findings.append(f"estimated dimension {dim} exceeds limit {dim_limit()} (BOSONLIGHT_DIM_LIMIT)")
    if cfg.experiment == "transport":
        b = cfg.block("transport")
        gamma = cfg.block("lattice").get("gamma") or estimate_gamma(lat, 4).gamma
        spec = cfg.hamiltonian(lat)
        R_spec = b.get("R", "admissible")
        try:
            ts = cfgmod.times(b, "t", max_tau(gamma, spec.Jbar))
        except ConfigError as exc:
            return findings + [str(exc)]
        if R_spec != "admissible":
            for t in ts:
                Rmin = minimal_admissible_R(t, gamma, spec.Jbar, lat.dimension)
                bad = [R for R in R_spec if R < Rmin]
                if bad:
                    findings.append(f"t={t:g}: R={bad} below the minimal admissible R={Rmin}")
    if cfg.experiment == "hhkl":
        b = cfg.block("hhkl")
        try:
            for ell in b.get("ell", []):
                hhkl_sequence(lat, HHKLConfig(int(ell), float(b["dt"]), float(b["t_total"])))
        except (KeyError, InvalidArgument) as exc:
            findings.append(f"hhkl block: {exc}")
    return findings


# -- entry point -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bosonlight", description="Boson light-cone experiment runner")
    sub = p.add_subparsers(dest="command", required=True)
    for name in (*EXPERIMENTS, "validate"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="TOML experiment config")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        if name != "validate":
            sp.add_argument("--out-dir", default=None, help="output directory (default: [output].dir or results/)")
            sp.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                            help="worker threads for sweep points")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "validate":
        findings = validate(args.config, args.seed)
        for f in findings:
            print(f"warning: {f}")
        if not findings:
            print("ok")
        return 0
    try:
        cfg = cfgmod.load(args.config, args.command, args.seed)
        report, _, paths = run_experiment(cfg, args.out_dir, max(1, args.workers))
    except BosonlightError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    for s in report.samples:
        mark = "ok" if s.satisfied else ("FAIL" if s.extra.get("asserted", True) else "info")
        print(f"{mark:4} {report.experiment} {s.param_name}={s.param_value:g} lhs={s.lhs:.6g} rhs={s.rhs:.6g}")
    print(f"wrote {paths[0]} and {paths[1]}")
    bad = failing(report)
    if bad:
        print(f"{len(bad)} bound check(s) failed", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
