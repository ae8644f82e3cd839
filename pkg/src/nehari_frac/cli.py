"""Batch command-line front end.

Subcommands: constants | project | solve | bubble-scan | curves.  Every run
is driven by one JSON config (--config), writes into --out, and is fully
deterministic for a fixed config and seed: identical reruns produce
byte-identical files.  JSON outputs embed the config hash; CSV outputs get a
sidecar meta JSON; each run writes a manifest with the SHA-256 of every
produced file, re-checkable with verify_output_dir().

Exit codes: 0 success (for solve: all cross-checks pass), 1 internal or
numerical failure, 2 user or configuration error.  NEHARI_FRAC_THREADS caps
internal parallelism (default 1; scans parallelize across independent jobs).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bubbles, constants as consts, fibering, solver
from .config import RunConfig, load_config
from .errors import ConfigError, ConvergenceError, NehariFracError, ZeroPairError
from .fieldio import load_field, save_field
from .grid import Field, FieldPair


def thread_count() -> int:
    raw = os.environ.get("NEHARI_FRAC_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(x) for x in row))
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out: Path, cfg: RunConfig, command: str, files):
    manifest = {
        "command": command,
        "config_hash": cfg.config_hash,
        "params": cfg.params.to_dict(),
        "grid": cfg.grid,
        "seeds": list(cfg.seeds),
        "tolerances": cfg.tolerances,
        "files": {name: _sha256(out / name) for name in sorted(files)},
    }
    _write_json(out / "manifest.json", manifest)


def verify_output_dir(out_dir) -> bool:
    """Re-check the SHA-256 of every file recorded in the run manifest."""
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text())
    for name, digest in manifest["files"].items():
        if _sha256(out / name) != digest:
            return False
    return True


def _primary_seed(cfg: RunConfig, override) -> int:
    return int(override) if override is not None else int(cfg.seeds[0])


def _quotient_kwargs(cfg: RunConfig):
    return {
        "tol": cfg.tolerance("quotient_flat", consts.QUOTIENT_FLAT_TOL),
        "restarts": int(cfg.tolerance("quotient_restarts", consts.QUOTIENT_RESTARTS)),
        "max_iter": int(cfg.tolerance("quotient_max_iter", consts.QUOTIENT_MAX_ITER)),
    }


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_constants(cfg: RunConfig, out: Path, seed_override, quiet: bool) -> int:
    dom = cfg.build_domain()
    seed = _primary_seed(cfg, seed_override)
    report, s_min, pair_min = consts.compute_constants_report(dom, cfg.params, seed=seed, **_quotient_kwargs(cfg))
    payload = report.to_dict()
    payload["config_hash"] = cfg.config_hash
    payload["seed"] = seed
    payload["domain"] = dom.describe()
    payload["domain_hash"] = dom.domain_hash()
    _write_json(out / "constants.json", payload)
    save_field(dom, s_min, out / "s_minimizer.field")
    save_field(dom, pair_min.u, out / "s_ab_minimizer_u.field")
    save_field(dom, pair_min.v, out / "s_ab_minimizer_v.field")
    _write_manifest(out, cfg, "constants", [
        "constants.json",
        "s_minimizer.field", "s_minimizer.field.json",
        "s_ab_minimizer_u.field", "s_ab_minimizer_u.field.json",
        "s_ab_minimizer_v.field", "s_ab_minimizer_v.field.json",
    ])
    if not quiet:
        print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _load_pair(cfg: RunConfig, dom, u_path, v_path) -> FieldPair:
    if not u_path or not v_path:
        raise ConfigError("project needs field files: pass --u and --v or set them in the project block")
    return FieldPair(load_field(dom, u_path), load_field(dom, v_path))


def _curve_rows(triple, params, report, block):
    if report.t1 is not None:
        lo_default = report.t1 / 10.0
    elif report.t_max:
        lo_default = report.t_max / 10.0
    else:
        lo_default = 0.1
    if report.t2 is not None:
        hi_default = 3.0 * report.t2
    elif report.t_max:
        hi_default = 10.0 * report.t_max
    else:
        hi_default = 10.0
    t_lo = float(block.get("t_lo", lo_default))
    t_hi = float(block.get("t_hi", hi_default))
    samples = int(block.get("samples", 2000))
    return fibering.sample_curves(triple, params, t_lo, t_hi, samples)


CURVE_HEADER = ("t", "phi", "phi_prime", "phi_second", "psi")


def cmd_project(cfg: RunConfig, out: Path, seed_override, quiet: bool, u_path=None, v_path=None) -> int:
    dom = cfg.build_domain()
    block = cfg.project or {}
    pair = _load_pair(cfg, dom, u_path or block.get("u"), v_path or block.get("v"))
    report = fibering.project(cfg.params, dom, pair)
    payload = report.to_dict()
    payload["config_hash"] = cfg.config_hash
    payload["domain_hash"] = dom.domain_hash()
    _write_json(out / "fibering_report.json", payload)
    files = ["fibering_report.json"]
    if block.get("curves", False):
        rows = _curve_rows(report.triple, cfg.params, report, block)
        _write_csv(out / "curves.csv", CURVE_HEADER, rows)
        _write_json(out / "curves.meta.json", {"config_hash": cfg.config_hash, "t_max": report.t_max})
        files += ["curves.csv", "curves.meta.json"]
    _write_manifest(out, cfg, "project", files)
    if not quiet:
        print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def cmd_solve(cfg: RunConfig, out: Path, seed_override, quiet: bool) -> int:
    params = cfg.params
    if params.lam <= 0 or params.mu <= 0:
        raise ConfigError("parameters must be positive: solve needs lambda > 0 and mu > 0")
    dom = cfg.build_domain()
    seed = _primary_seed(cfg, seed_override)
    block = cfg.solve or {}
    opts = solver.SolveOptions(
        max_iter=int(block.get("max_iter", cfg.tolerance("max_iter", 4000))),
        grad_rtol=cfg.tolerance("grad_rtol", 1e-9),
        energy_rtol=cfg.tolerance("energy_rtol", 1e-13),
        n_starts=int(block.get("n_starts", cfg.tolerance("n_starts", 4))),
        seed=seed,
        bubble_delta_frac=float(block.get("bubble_delta_frac", 0.25)),
        bubble_eps_frac=float(block.get("bubble_eps_frac", 0.25)),
        theta=float(block.get("theta", 2.0)),
        distinct_tol=cfg.tolerance("distinct_tol", 1e-6),
        semitrivial_tol=cfg.tolerance("semitrivial_tol", 1e-8),
    )
    s_d = s_ab_d = None
    pair_min = None
    if block.get("compute_constants", True):
        s_d, _, s_ab_d, pair_min = consts.compute_S_coupled(dom, params, seed=seed, **_quotient_kwargs(cfg))
    plus, minus = solver.solve_two(params, dom, opts, s_d=s_d, s_ab_d=s_ab_d, s_ab_minimizer=pair_min)

    files = []
    for tag, rep in (("plus", plus), ("minus", minus)):
        payload = rep.to_dict()
        payload["config_hash"] = cfg.config_hash
        payload["domain_hash"] = dom.domain_hash()
        if s_d is not None:
            payload["S_d"] = s_d
        if s_ab_d is not None:
            payload["S_ab_d"] = s_ab_d
        _write_json(out / f"solution_{tag}.json", payload)
        save_field(dom, rep.pair.u, out / f"solution_{tag}_u.field")
        save_field(dom, rep.pair.v, out / f"solution_{tag}_v.field")
        files += [
            f"solution_{tag}.json",
            f"solution_{tag}_u.field", f"solution_{tag}_u.field.json",
            f"solution_{tag}_v.field", f"solution_{tag}_v.field.json",
        ]
    _write_manifest(out, cfg, "solve", files)
    ok = all(v for v in plus.checks.values() if isinstance(v, (bool, np.bool_)))
    if not quiet:
        print(json.dumps({
            "energy_plus": plus.energy,
            "energy_minus": minus.energy,
            "checks": {k: (bool(v) if isinstance(v, (bool, np.bool_)) else v) for k, v in plus.checks.items()},
            "all_checks_pass": bool(ok),
        }, indent=2, sort_keys=True))
    return 0 if ok else 1


BUBBLE_HEADER = (
    "eps", "seminorm_p_pow", "lpstar_pow", "excess", "deficit",
    "t_star", "sup_full", "q_regime", "c_infty", "below_c_infty",
)


def cmd_bubble_scan(cfg: RunConfig, out: Path, seed_override, quiet: bool) -> int:
    params = cfg.params
    dom = cfg.build_domain()
    seed = _primary_seed(cfg, seed_override)
    block = cfg.bubble_scan or {}
    delta = float(block.get("delta", dom.box_length / 4.0))
    theta = float(block.get("theta", 2.0))
    if "eps_list" not in block:
        raise ConfigError("bubble_scan block needs eps_list")
    eps_list = block["eps_list"]
    for e in eps_list:
        if not 0 < e <= delta / 2.0:
            raise ConfigError(f"bubble_scan eps entry {e} violates 0 < eps <= delta/2 = {delta / 2.0}")
    lam = float(block.get("lambda", params.lam))
    mu = float(block.get("mu", params.mu))
    method = block.get("method", "lattice")

    if "s_d" in block and "s_ab_d" in block:
        s_d, s_ab_d = float(block["s_d"]), float(block["s_ab_d"])
    else:
        s_d, _, s_ab_d, _ = consts.compute_S_coupled(dom, params, seed=seed, **_quotient_kwargs(cfg))

    def run_norm():
        return bubbles.norm_estimate_scan(dom, params, delta, theta, eps_list, s_ref=s_d, method=method)

    def run_sup():
        return bubbles.sup_energy_scan(dom, params, delta, theta, eps_list, lam, mu, s_d, s_ab_d)

    if thread_count() > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            norm_future = pool.submit(run_norm)
            sup_future = pool.submit(run_sup)
            norm, sup = norm_future.result(), sup_future.result()
    else:
        norm, sup = run_norm(), run_sup()

    sup_by_eps = {r.eps: r for r in sup}
    rows = []
    for nr in norm.rows:
        sr = sup_by_eps[nr.eps]
        rows.append((
            nr.eps, nr.seminorm_p_pow, nr.lpstar_pow, nr.excess, nr.deficit,
            sr.t_star, sr.sup_full, sr.q_regime, sr.c_infty, sr.below_c_infty,
        ))
    _write_csv(out / "bubble_scan.csv", BUBBLE_HEADER, rows)
    meta = {
        "config_hash": cfg.config_hash,
        "method": norm.method,
        "delta": delta,
        "theta": theta,
        "lambda": lam,
        "mu": mu,
        "S_d": s_d,
        "S_ab_d": s_ab_d,
        "sem_reference": norm.sem_reference,
        "lp_reference": norm.lp_reference,
        "excess_slope": norm.excess_slope,
        "deficit_slope": norm.deficit_slope,
        "excess_slope_predicted": norm.excess_slope_predicted,
        "deficit_slope_predicted": norm.deficit_slope_predicted,
    }
    _write_json(out / "bubble_scan.meta.json", meta)
    _write_manifest(out, cfg, "bubble-scan", ["bubble_scan.csv", "bubble_scan.meta.json"])
    if not quiet:
        print(json.dumps(meta, indent=2, sort_keys=True))
    return 0


def cmd_curves(cfg: RunConfig, out: Path, seed_override, quiet: bool) -> int:
    params = cfg.params
    dom = cfg.build_domain()
    block = cfg.curves or {}
    if block.get("seeded", False):
        if params.lam <= 0 or params.mu <= 0:
            raise ConfigError("seeded curves need lambda > 0 and mu > 0 for a two-root ray")
        rng = np.random.default_rng(_primary_seed(cfg, seed_override))
        pair = FieldPair(
            Field(np.abs(rng.standard_normal(dom.n_interior)) + 1e-3),
            Field(np.abs(rng.standard_normal(dom.n_interior)) + 1e-3),
        )
    else:
        pair = _load_pair(cfg, dom, block.get("u"), block.get("v"))
    report = fibering.project(params, dom, pair)
    rows = _curve_rows(report.triple, params, report, block)
    _write_csv(out / "curves.csv", CURVE_HEADER, rows)
    meta = {
        "config_hash": cfg.config_hash,
        "t_max": report.t_max,
        "t1": report.t1,
        "t2": report.t2,
        "outcome": report.outcome,
    }
    _write_json(out / "curves.meta.json", meta)
    _write_manifest(out, cfg, "curves", ["curves.csv", "curves.meta.json"])
    if not quiet:
        print(json.dumps(meta, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nehari-frac", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("constants", "project", "solve", "bubble-scan", "curves"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--quiet", action="store_true")
        if name == "project":
            p.add_argument("--u", default=None, help="field file for the first component")
            p.add_argument("--v", default=None, help="field file for the second component")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "constants":
            return cmd_constants(cfg, out, args.seed, args.quiet)
        if args.command == "project":
            return cmd_project(cfg, out, args.seed, args.quiet, u_path=args.u, v_path=args.v)
        if args.command == "solve":
            return cmd_solve(cfg, out, args.seed, args.quiet)
        if args.command == "bubble-scan":
            return cmd_bubble_scan(cfg, out, args.seed, args.quiet)
        if args.command == "curves":
            return cmd_curves(cfg, out, args.seed, args.quiet)
        raise ConfigError(f"unknown command {args.command!r}")
    except (ConfigError, ZeroPairError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, NehariFracError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
