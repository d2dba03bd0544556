"""Command-line front end.

Subcommands: solve, sweep, threshold, decay, verify, propagate, rerun.
Every run writes a manifest (command, config hash, seed, version) into its
output directory; rerunning a manifest reproduces the numeric outputs byte
for byte (the manifest itself carries the timestamp and is excluded from
that guarantee).  Exit codes: 0 success, 1 numeric failure, 2 usage/config
error.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from dmsoliton import __version__
from dmsoliton import field as fieldmod
from dmsoliton.config import ConfigError, RunConfig, parse_config
from dmsoliton.decay import (WindowError, fit_exp_rate, fit_superexp_rate,
                             heuristic_rate, make_tail_stats, self_consistency_check)
from dmsoliton.minimizer import energy_curve, minimize
from dmsoliton.propagate import PropagationConfig, breather_experiment, propagate_averaged
from dmsoliton.threshold import threshold_report
from dmsoliton.verify import run_suite, subadditivity_check


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if dataclasses.is_dataclass(obj):
        return dataclasses.asdict(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        h.update(fh.read())
    return h.hexdigest()


def _validate_outputs(outdir: Path) -> None:
    """Re-read everything the run emitted; a run only exits 0 if its own
    outputs parse (JSON loads, CSV columns consistent, fields load)."""
    for fp in sorted(outdir.iterdir()):
        if fp.suffix == ".json":
            with open(fp) as fh:
                json.load(fh)
        elif fp.suffix == ".csv":
            lines = fp.read_text().splitlines()
            if not lines or not lines[0]:
                raise RuntimeError(f"{fp}: empty CSV")
            ncol = len(lines[0].split(","))
            for k, line in enumerate(lines[1:], 2):
                if len(line.split(",")) != ncol:
                    raise RuntimeError(f"{fp}:{k}: expected {ncol} columns")
        elif fp.suffix == ".txt" and fp.name.startswith(("field", "snapshot")):
            fieldmod.load_text(fp)
        elif fp.suffix == ".bin":
            fieldmod.load_binary(fp)


def _outdir(args) -> Path:
    out = Path(args.output or os.environ.get("DMSOLITON_OUTDIR", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(args, outdir: Path, extra=None) -> None:
    m = {
        "command": args.command,
        "config": str(getattr(args, "config", "")) or None,
        "config_sha256": _sha256(args.config) if getattr(args, "config", None) else None,
        "output_dir": str(outdir),
        "seed": getattr(args, "seed", None),
        "threads": getattr(args, "threads", 1),
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "version": __version__,
        "argv": list(getattr(args, "_argv", [])),
    }
    if extra:
        m.update(extra)
    _write_json(outdir / "manifest.json", m)


def _load(args) -> RunConfig:
    cfg = parse_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.raw["seed"] = args.seed
    return cfg


# -- subcommands --------------------------------------------------------------------

def _cmd_solve(args) -> int:
    cfg = _load(args)
    outdir = _outdir(args)
    prob = cfg.problem()
    res = minimize(prob, cfg.solve_config())
    fieldmod.save_text(res.field, outdir / "field.txt")
    fieldmod.save_binary(res.field, outdir / "field.bin")
    record = {
        "lambda": prob.lam, "d_av": prob.d_av,
        "E": res.energy, "omega": res.omega, "residual": res.residual,
        "iterations": res.iterations, "converged": res.converged,
        "negative": res.negative, "message": res.message,
        "box_radius": res.field.box_radius,
        "field_text": "field.txt", "field_binary": "field.bin",
    }
    _write_json(outdir / "result.json", record)
    _manifest(args, outdir)
    _validate_outputs(outdir)
    print(f"solve: E={res.energy!r} omega={res.omega!r} residual={res.residual:.3e} "
          f"converged={res.converged}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    cfg.require("lambda_grid")
    outdir = _outdir(args)
    template = cfg.problem(lam=cfg.raw["lambda_grid"][0])
    solve_cfg = cfg.solve_config()
    grid = cfg.raw["lambda_grid"]
    if args.threads > 1:
        # grid points are independent; results are gathered in grid order
        def solve_one(lam):
            return minimize(replace(template, lam=lam), solve_cfg)
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(solve_one, grid))
        from dmsoliton.minimizer import CurvePoint, EnergyCurve, check_curve
        points = [CurvePoint(lam, r.energy, r.omega, r.residual, r.converged, r.negative)
                  for lam, r in zip(grid, results)]
        curve = EnergyCurve(points=points,
                            violations=check_curve(points, 10 * solve_cfg.grad_tol))
    else:
        curve = energy_curve(template, grid, solve_cfg)
    _write_csv(outdir / "energy_curve.csv",
               ["lambda", "E", "omega", "residual", "converged"],
               [(p.lam, p.energy, p.omega, p.residual, int(p.converged))
                for p in curve.points])
    sub = subadditivity_check(curve, template.nonlinearity.gamma0)
    _write_json(outdir / "subadditivity_report.json", sub.to_dict())
    _write_json(outdir / "curve_checks.json", curve.violations)
    _manifest(args, outdir)
    _validate_outputs(outdir)
    bad = any(curve.violations.values()) or not sub.passed
    print(f"sweep: {len(curve.points)} points, violations="
          f"{ {k: len(v) for k, v in curve.violations.items()} }, "
          f"subadditivity={'ok' if sub.passed else 'FAIL'}")
    return 1 if bad else 0


def _cmd_threshold(args) -> int:
    cfg = _load(args)
    cfg.require("lambda_grid")
    outdir = _outdir(args)
    template = cfg.problem(lam=cfg.raw["lambda_grid"][0])
    rep = threshold_report(template, cfg.raw["lambda_grid"], cfg.solve_config(),
                           bracket=cfg.get("bracket"))
    _write_csv(outdir / "threshold.csv", ["lambda", "R_hat", "E_lambda"],
               [(p.lam, p.r_hat, p.e_lambda if p.e_lambda is not None else float("nan"))
                for p in rep.points])
    summary = {
        "lambda_cr_hat": rep.lambda_cr_hat,
        "r0_hat": rep.r0_hat,
        "checks": rep.checks,
        "bisection_trace": rep.bisection_trace,
    }
    _write_json(outdir / "threshold_summary.json", summary)
    _manifest(args, outdir)
    _validate_outputs(outdir)
    ok = rep.checks.get("pairwise_ok", True) and rep.checks.get("sandwich_ok", True)
    print(f"threshold: lambda_cr_hat={rep.lambda_cr_hat} checks={'ok' if ok else 'FAIL'}")
    return 0 if ok else 1


def _cmd_decay(args) -> int:
    outdir = _outdir(args)
    d_av = omega = None
    if args.result:
        with open(args.result) as fh:
            rec = json.load(fh)
        d_av, omega = rec.get("d_av"), rec.get("omega")
    code = 0
    for fpath in args.fields:
        f = fieldmod.load_binary(fpath) if str(fpath).endswith(".bin") \
            else fieldmod.load_text(fpath)
        stats = make_tail_stats(f)
        summary = {"field": str(fpath), "floor": stats.floor,
                   "window": [stats.n_lo, stats.n_hi]}
        model = np.full_like(stats.beta, np.nan)
        try:
            fit = fit_exp_rate(stats)
            summary["nu_hat"] = fit.rate
            summary["exp_fit_residual"] = fit.residual
            n = np.arange(stats.beta.size)
            model = stats.beta[stats.n_lo] * np.exp(-fit.rate * (n - stats.n_lo))
            fit2 = fit_superexp_rate(stats)
            summary["nu2_hat"] = fit2.rate
            summary["superexp_fit_residual"] = fit2.residual
        except WindowError as exc:
            summary["error"] = str(exc)
            code = 1
        if omega is not None and d_av and omega < 0:
            summary["heuristic_rate"] = heuristic_rate(omega, d_av)
        try:
            rep = self_consistency_check(stats, theta=args.theta, alpha=args.alpha)
            summary["self_consistency"] = dataclasses.asdict(rep)
        except (WindowError, ValueError) as exc:
            summary["self_consistency_error"] = str(exc)
        stem = Path(fpath).stem
        _write_csv(outdir / f"{stem}_tail.csv", ["n", "beta", "model"],
                   [(n, stats.beta[n], model[n]) for n in range(stats.beta.size)])
        _write_json(outdir / f"{stem}_tail.json", summary)
        print(f"decay {fpath}: nu_hat={summary.get('nu_hat')} nu2_hat={summary.get('nu2_hat')}")
    _manifest(args, outdir)
    _validate_outputs(outdir)
    return code


def _cmd_verify(args) -> int:
    outdir = _outdir(args)
    reports = run_suite(args.suite, trials=args.trials, seed=args.seed or 0)
    failures = 0
    for rep in reports:
        _write_json(outdir / f"verify_{rep.estimate_id}.json", rep.to_dict())
        status = "pass" if rep.passed else "FAIL"
        print(f"verify {rep.estimate_id}: worst={rep.worst_ratio:.6e} [{status}]")
        failures += 0 if rep.passed else 1
    _write_json(outdir / "verify_summary.json",
                {"suite": args.suite, "trials": args.trials, "seed": args.seed or 0,
                 "failures": failures,
                 "estimates": {r.estimate_id: r.passed for r in reports}})
    _manifest(args, outdir)
    _validate_outputs(outdir)
    return 1 if failures else 0


def _cmd_propagate(args) -> int:
    cfg = _load(args)
    outdir = _outdir(args)
    prob = cfg.problem()
    solve_cfg = cfg.solve_config()
    res = minimize(prob, solve_cfg)
    profile = cfg.profile()
    if profile is None:
        raise ConfigError(f"{cfg.path}: propagate needs a piecewise profile")
    t_end = cfg.get("t_end", 2.0 * np.pi / abs(res.omega))
    dt = cfg.get("dt", 1e-3)
    pcfg = PropagationConfig(dt=dt, t_end=t_end,
                             epsilon=cfg.get("epsilon", 0.1),
                             scheme=cfg.get("scheme", "strang"), profile=profile)
    n_snap = 16
    sample_times = [k * t_end / n_snap for k in range(n_snap + 1)]
    times, snaps, diags = propagate_averaged(prob, res.field, pcfg, sample_times)
    rows = []
    from dmsoliton.backend import kernels
    from dmsoliton.energy import get_evaluator
    ev = get_evaluator(prob, (snaps[0].size - 1) // 2)
    phi_abs = np.abs(res.field.with_box((snaps[0].size - 1) // 2).values)
    phi_norm = np.sqrt(kernels.l2_norm_sq(res.field.values))
    for k, (t, s) in enumerate(zip(times, snaps)):
        dev = float(np.sqrt(kernels.l2_norm_sq(np.abs(s) - phi_abs))) / phi_norm
        rows.append((t, float(np.sqrt(kernels.l2_norm_sq(s))), ev.value(s), dev))
        snap_field = fieldmod.LatticeField((s.size - 1) // 2, s)
        fieldmod.save_text(snap_field, outdir / f"snapshot_{k:04d}.txt")
    _write_csv(outdir / "trajectory.csv", ["t", "norm", "H", "deviation"], rows)
    out = {"lambda": prob.lam, "d_av": prob.d_av, "omega": res.omega,
           "t_end": t_end, "diagnostics": diags}
    if cfg.get("epsilon_list"):
        rep = breather_experiment(res.field, res.omega, prob, profile,
                                  cfg.raw["epsilon_list"],
                                  PropagationConfig(dt=dt, t_end=t_end,
                                                    epsilon=min(cfg.raw["epsilon_list"]),
                                                    profile=profile))
        out["breather"] = dataclasses.asdict(rep)
        print(f"propagate: devs={rep.deviations} decreasing={rep.strictly_decreasing}")
    _write_json(outdir / "propagation_report.json", out)
    _manifest(args, outdir)
    _validate_outputs(outdir)
    ok = diags["norm_drift"] < 1e-8 * max(t_end, 1.0)
    if "breather" in out:
        ok = ok and out["breather"]["strictly_decreasing"]
    return 0 if ok else 1


def _cmd_rerun(args) -> int:
    with open(args.manifest) as fh:
        m = json.load(fh)
    argv = list(m["argv"])
    if args.output:
        # replace the recorded output directory
        for flag in ("-o", "--output"):
            if flag in argv:
                argv[argv.index(flag) + 1] = args.output
                break
        else:
            argv += ["-o", args.output]
    return main(argv)


# -- parser -------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="dmsoliton",
        description="Diffraction-managed lattice solitons: solve, verify, diagnose.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("config", help="run configuration file")
        p.add_argument("-o", "--output", default=None,
                       help="output directory (default: DMSOLITON_OUTDIR or cwd)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker cap for grids")

    p = sub.add_parser("solve", help="minimize H at fixed power")
    common(p)
    p = sub.add_parser("sweep", help="energy curve over a lambda grid")
    common(p)
    p = sub.add_parser("threshold", help="R(lambda) estimates and lambda_cr")
    common(p)
    p = sub.add_parser("decay", help="tail statistics for stored fields")
    p.add_argument("fields", nargs="+", help="field files (.txt or .bin)")
    p.add_argument("--result", default=None, help="result.json with omega/d_av")
    p.add_argument("--theta", type=float, default=3.0)
    p.add_argument("--alpha", type=float, default=0.25)
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p = sub.add_parser("verify", help="numerical estimate verification battery")
    p.add_argument("--suite", choices=["identities", "inequalities", "all"], default="all")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p = sub.add_parser("propagate", help="averaged flow and breather experiment")
    common(p)
    p = sub.add_parser("rerun", help="re-execute a run from its manifest")
    p.add_argument("manifest")
    p.add_argument("-o", "--output", default=None)
    return ap


_DISPATCH = {
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "threshold": _cmd_threshold,
    "decay": _cmd_decay,
    "verify": _cmd_verify,
    "propagate": _cmd_propagate,
    "rerun": _cmd_rerun,
}


def main(argv=None) -> int:
    ap = _build_parser()
    effective = list(sys.argv[1:]) if argv is None else list(argv)
    try:
        args = ap.parse_args(effective)
    except SystemExit as exc:
        return int(exc.code or 0)
    args._argv = effective
    try:
        return _DISPATCH[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
