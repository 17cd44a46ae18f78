"""Command-line surface: stationary solves, PDE runs, certification, sweeps.

Subcommands
    stationary  solve for the asynchronous state, print/emit JSON
    simulate    integrate the transport equation, emit trajectory artifacts
    certify     replay a trajectory CSV against the Lyapunov bounds
    finite      event-driven finite-N run
    run         full scenario from a config file
    sweep       repeat a scenario over one scalar parameter

Exit codes: 0 success, 2 blow-up when the config did not expect one,
3 certification violation, 4 configuration error.  Sweeps run rows in a
thread pool capped by the PULSEFIELD_THREADS environment variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, MODEL_KINDS
from .continuum import (BlowupError, DensityField, TrajectoryLog, initial_density,
                        integrate)
from .certify import certify_theorem_bounds, fit_decay_rate
from .finite import simulate as finite_simulate, splay_reference
from .models import homoclinic_model, lif_model, load_field_table, tabulated_model
from .quantile import discrete_lyapunov
from .stationary import (NoStationaryStateError, coupling_bounds,
                         existence_condition, solve_stationary_flux)

EXIT_OK = 0
EXIT_UNEXPECTED_BLOWUP = 2
EXIT_CERTIFICATION = 3
EXIT_CONFIG = 4


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _density_csv(path, theta, rho, value_name="rho"):
    _write_csv(path, ["theta", value_name],
               ([_fmt(t), _fmt(r)] for t, r in zip(theta, rho)))


def _quantile_csv(path, theta, rho):
    # per-knot rows; q is the segment value to the right of the knot (the
    # last knot repeats the final segment)
    from .quantile import quantile_transform
    prof = quantile_transform(theta, rho)
    q = np.append(prof.q_seg, prof.q_seg[-1])
    _write_csv(path, ["phi", "Q", "q"],
               ([_fmt(p), _fmt(Q), _fmt(qq)]
                for p, Q, qq in zip(prof.phi, prof.Q, q)))


# -- model flags shared by several subcommands -----------------------------------


def _add_model_args(p):
    p.add_argument("--model", choices=MODEL_KINDS, default="lif")
    p.add_argument("--S", type=float, default=2.1)
    p.add_argument("--gamma", type=float, default=2.0)
    p.add_argument("--x-lo", type=float, default=0.0)
    p.add_argument("--x-hi", type=float, default=1.0)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--lambda-u", type=float, default=1.0)
    p.add_argument("--omega", type=float, default=2.0 * math.pi)
    p.add_argument("--table", default="", help="CSV of x,F samples (tabulated model)")


def _build_model(args):
    if args.model == "lif":
        return lif_model(args.S, args.gamma, args.x_lo, args.x_hi)
    if args.model == "homoclinic":
        return homoclinic_model(args.C, args.lambda_u, args.omega)
    if not args.table:
        raise ConfigError("model.table", "tabulated model needs --table")
    xs, fs = load_field_table(args.table)
    return tabulated_model(xs, fs)


def _resolve_config_path(name) -> Path:
    """Accept a filesystem path or the name of a bundled config."""
    p = Path(name)
    if p.exists():
        return p
    from importlib import resources
    candidate = resources.files("pulsefield").joinpath("configs", p.name)
    if candidate.is_file():
        return Path(str(candidate))
    raise ConfigError(str(name), "config file not found")


# -- scenario orchestration -------------------------------------------------------


def run_scenario(cfg: ExperimentConfig, out_dir=None) -> int:
    """Stationary solve, continuum integration, certification, optional
    finite-N run; writes all artifacts under the output directory."""
    out = Path(out_dir if out_dir is not None else cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "resolved_config.json", cfg.resolved())

    model = cfg.build_model()
    K = cfg["coupling"]["K"]
    sol = cfg["solver"]
    summary: dict = {"K": K, "omega": model.omega,
                     "monotonicity": model.monotonicity.value,
                     "curvature": model.curvature.value}

    # stationary state (reference for V); absence is recorded, not fatal
    reference = None
    stat_info: dict = {}
    try:
        reference = solve_stationary_flux(model, K, n_theta=sol["n_theta"])
        stat_info = {"exists": True, "J_star": reference.J_star, "r": reference.r,
                     "J_interval_hi": None if math.isinf(reference.J_interval[1])
                     else reference.J_interval[1]}
        if cfg["output"]["dump_stationary_density"]:
            _density_csv(out / "rho_star.csv", reference.rho_star.theta,
                         reference.rho_star.rho, value_name="rho_star")
    except NoStationaryStateError as exc:
        stat_info = {"exists": False, "r": exc.result.r,
                     "limit_value": exc.result.to_json()["limit_value"]}
    if model.F is not None:
        stat_info["coupling_bounds"] = coupling_bounds(model).to_json()
    _write_json(out / "stationary.json", stat_info)
    summary["stationary"] = stat_info

    try:
        initial = initial_density(cfg["initial"]["kind"], sol["n_theta"], model, K,
                                  kappa=cfg["initial"]["kappa"], mu=cfg["initial"]["mu"],
                                  epsilon=cfg["initial"]["epsilon"], reference=reference)
    except ValueError as exc:
        # e.g. a perturbed profile without a stationary reference to perturb
        raise ConfigError("initial.kind", str(exc))
    except BlowupError as exc:
        summary["blowup"] = exc.event.to_json()
        summary["exit_code"] = (EXIT_OK if cfg["run"]["expect_blowup"]
                                else EXIT_UNEXPECTED_BLOWUP)
        _write_json(out / "summary.json", summary)
        return summary["exit_code"]

    dt = None
    if sol["align_dt"]:
        dt = initial.dtheta / model.omega
    traj = integrate(model, K, initial, t_max=sol["t_max"], cfl=sol["cfl"],
                     scheme=sol["scheme"], dt=dt,
                     log_stride=cfg["output"]["log_stride"], reference=reference,
                     snapshot_times=cfg["output"]["snapshot_times"])
    traj.to_csv(out / "trajectory.csv")
    if cfg["output"]["dump_density"]:
        for ts, arr in traj.snapshots:
            _density_csv(out / f"density_t{ts:.6g}.csv", traj.initial.theta, arr)
        _density_csv(out / f"density_t{traj.final.t:.6g}.csv",
                     traj.final.theta, traj.final.rho)
    if cfg["output"]["dump_quantiles"]:
        for ts, arr in traj.snapshots:
            _quantile_csv(out / f"quantiles_t{ts:.6g}.csv", traj.initial.theta, arr)
        _quantile_csv(out / f"quantiles_t{traj.final.t:.6g}.csv",
                      traj.final.theta, traj.final.rho)
    summary.update(traj.summary())

    exit_code = EXIT_OK
    if traj.blowup is not None and not cfg["run"]["expect_blowup"]:
        exit_code = EXIT_UNEXPECTED_BLOWUP
    if traj.blowup is None and cfg["run"]["expect_blowup"]:
        summary["expected_blowup_missing"] = True

    if cfg["run"]["certify"] and reference is not None and np.isfinite(traj.V).any():
        report = certify_theorem_bounds(traj, model, K,
                                        tol_abs=cfg["run"]["certify_tol_abs"],
                                        tol_rel=cfg["run"]["certify_tol_rel"])
        fit = fit_decay_rate(traj, model, K)
        cert = report.to_json()
        cert["decay_fit"] = fit.to_json()
        _write_json(out / "certification.json", cert)
        summary["certification"] = cert
        summary["decay_rate"] = fit.rate if math.isfinite(fit.rate) else None
        if not report.verdict(cfg["run"]["certify_min_fraction"]):
            exit_code = max(exit_code, EXIT_CERTIFICATION)

    if cfg["finite"]["enabled"]:
        fdir = out / "finite"
        fdir.mkdir(exist_ok=True)
        summary["finite"] = _run_finite(model, K, cfg["finite"]["N"],
                                        cfg["finite"]["seed"],
                                        cfg["finite"]["n_firings"], fdir)

    summary["exit_code"] = exit_code
    _write_json(out / "summary.json", summary)
    return exit_code


def _run_finite(model, K, N, seed, n_firings, out: Path) -> dict:
    run = finite_simulate(model, K, N, n_firings=n_firings, seed=seed)
    _write_csv(out / "firings.csv", ["t", "id", "absorbed"],
               ([_fmt(ev.t), i, ev.absorbed] for ev in run.events for i in ev.fired))
    with open(out / "snapshots.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        for ts, snap in zip(run.snapshot_times, run.snapshots):
            w.writerow([_fmt(ts)] + [_fmt(v) for v in snap])
    info: dict = {"N": N, "seed": seed, "n_events": run.n_events,
                  "full_sync_event": run.full_sync_event()}
    try:
        ref = splay_reference(N, model, K)
        vn = [discrete_lyapunov(s, ref) for s in run.snapshots]
        info["V_N_first"] = vn[0]
        info["V_N_last"] = vn[-1]
        d = np.diff(vn)
        info["V_N_nonincreasing_fraction"] = float((d <= 1e-12).mean()) if d.size else None
        info["mean_firing_rate"] = run.mean_firing_rate() if run.n_events > 4 else None
    except NoStationaryStateError:
        info["splay_reference"] = "unavailable (no stationary state)"
    _write_json(out / "summary.json", info)
    return info


# -- subcommands -----------------------------------------------------------------


def _cmd_stationary(args) -> int:
    model = _build_model(args)
    res = existence_condition(model, args.K)
    payload = {"exists": res.exists, "r": res.r, "J_star": None,
               "K_lower": None, "K_upper": None}
    if model.F is not None:
        b = coupling_bounds(model)
        payload["K_lower"] = None if b.lower_unbounded else b.lower
        payload["K_upper"] = b.upper
    if res.exists:
        stat = solve_stationary_flux(model, args.K, n_theta=args.ntheta)
        payload["J_star"] = stat.J_star
        if args.rho_csv:
            _density_csv(args.rho_csv, stat.rho_star.theta, stat.rho_star.rho,
                         value_name="rho_star")
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "stationary.json").write_text(text + "\n")
    print(text)
    return EXIT_OK


def _args_to_config(args) -> ExperimentConfig:
    import configparser
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["model"] = {"model": args.model, "S": str(args.S), "gamma": str(args.gamma),
                   "x_lo": str(args.x_lo), "x_hi": str(args.x_hi), "C": str(args.C),
                   "lambda_u": str(args.lambda_u), "omega": str(args.omega)}
    if args.table:
        cp["model"]["table"] = args.table
    cp["coupling"] = {"K": str(args.K)}
    cp["solver"] = {"scheme": args.scheme, "n_theta": str(args.ntheta),
                    "cfl": str(args.cfl), "t_max": str(args.tmax),
                    "align_dt": str(args.align_dt).lower()}
    cp["initial"] = {"kind": args.ic, "kappa": str(args.kappa), "mu": str(args.mu),
                     "epsilon": str(args.epsilon)}
    cp["output"] = {"dir": args.out, "log_stride": str(args.log_stride),
                    "snapshot_times": args.snapshots}
    cp["run"] = {"expect_blowup": str(args.expect_blowup).lower()}
    return ExperimentConfig.from_parser(cp, source="<cli>")


def _cmd_simulate(args) -> int:
    return run_scenario(_args_to_config(args))


def _cmd_certify(args) -> int:
    model = _build_model(args)
    traj = TrajectoryLog.from_csv(args.trajectory)
    report = certify_theorem_bounds(traj, model, args.K,
                                    tol_abs=args.tol_abs, tol_rel=args.tol_rel)
    fit = fit_decay_rate(traj, model, args.K)
    payload = report.to_json()
    payload["decay_fit"] = fit.to_json()
    out = Path(args.out) if args.out else Path(args.trajectory).parent
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "certification.json", payload)
    print(json.dumps(payload, indent=2, sort_keys=True))
    return EXIT_OK if report.verdict(args.min_fraction) else EXIT_CERTIFICATION


def _cmd_finite(args) -> int:
    model = _build_model(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    info = _run_finite(model, args.K, args.N, args.seed, args.nfirings, out)
    print(json.dumps(info, indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.parse(_resolve_config_path(args.config))
    return run_scenario(cfg, out_dir=args.out)


def _sweep_row(cfg: ExperimentConfig, param, value, out_root: Path) -> dict:
    import copy
    row_cfg = ExperimentConfig(copy.deepcopy(cfg.values), cfg.source)
    if param == "K":
        row_cfg.values["coupling"]["K"] = float(value)
    elif param in ("n_theta", "ntheta"):
        row_cfg.values["solver"]["n_theta"] = int(value)
    elif param == "epsilon":
        row_cfg.values["initial"]["epsilon"] = float(value)
    else:
        raise ConfigError(f"sweep.{param}", "sweepable parameters: K, n_theta, epsilon")
    row_dir = out_root / f"{param}={value:g}"
    row: dict = {"param": param, "value": value, "status": "ok", "exists": None,
                 "J_star": None, "J0_final": None, "decay_rate": None, "t_fin": None}
    try:
        code = run_scenario(row_cfg, out_dir=row_dir)
        summary = json.loads((row_dir / "summary.json").read_text())
        row["exists"] = summary.get("stationary", {}).get("exists")
        row["J_star"] = summary.get("stationary", {}).get("J_star")
        row["J0_final"] = summary.get("J0_final")
        row["decay_rate"] = summary.get("decay_rate")
        blow = summary.get("blowup")
        row["t_fin"] = blow["t_fin"] if blow else None
        row["exit_code"] = code
    except Exception as exc:   # noqa: BLE001 - row failures are data
        row["status"] = f"failed: {exc}"
        try:
            stat = json.loads((row_dir / "stationary.json").read_text())
            row["exists"] = stat.get("exists")
            row["J_star"] = stat.get("J_star")
        except OSError:
            pass
    return row


def _cmd_sweep(args) -> int:
    cfg = ExperimentConfig.parse(_resolve_config_path(args.config))
    values = [float(v) for v in args.values.split(",")] if args.values else []
    out_root = Path(args.out or (Path(cfg["output"]["dir"]) / "sweep"))
    out_root.mkdir(parents=True, exist_ok=True)
    workers = int(os.environ.get("PULSEFIELD_THREADS", "0")) or min(4, max(1, len(values)))
    rows: list = [None] * len(values)
    if values:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_sweep_row, cfg, args.param, v, out_root): i
                       for i, v in enumerate(values)}
            for fut, i in futures.items():
                rows[i] = fut.result()
    header = ["param", "value", "status", "exists", "J_star", "J0_final",
              "decay_rate", "t_fin"]
    _write_csv(out_root / "sweep.csv", header,
               ([r["param"], _fmt(r["value"]), r["status"], r["exists"],
                 "" if r["J_star"] is None else _fmt(r["J_star"]),
                 "" if r["J0_final"] is None else _fmt(r["J0_final"]),
                 "" if r["decay_rate"] is None else _fmt(r["decay_rate"]),
                 "" if r["t_fin"] is None else _fmt(r["t_fin"])] for r in rows))
    print((out_root / "sweep.csv").read_text(), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pulsefield", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stationary", help="solve for the asynchronous state")
    _add_model_args(p)
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--ntheta", type=int, default=2048)
    p.add_argument("--out", default="")
    p.add_argument("--rho-csv", default="", help="dump rho_star as theta,rho CSV")
    p.set_defaults(func=_cmd_stationary)

    p = sub.add_parser("simulate", help="integrate the transport equation")
    _add_model_args(p)
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--ntheta", type=int, default=2048)
    p.add_argument("--cfl", type=float, default=0.5)
    p.add_argument("--scheme", choices=("upwind", "semilagrangian"), default="upwind")
    p.add_argument("--ic", choices=("uniform", "vonmises", "perturbed"),
                   default="perturbed")
    p.add_argument("--kappa", type=float, default=2.0)
    p.add_argument("--mu", type=float, default=math.pi)
    p.add_argument("--epsilon", type=float, default=0.2)
    p.add_argument("--tmax", type=float, default=10.0)
    p.add_argument("--log-stride", type=int, default=20)
    p.add_argument("--align-dt", action="store_true", dest="align_dt")
    p.add_argument("--expect-blowup", action="store_true", dest="expect_blowup")
    p.add_argument("--snapshots", default="", help="comma list of snapshot times")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("certify", help="check a trajectory against the V bounds")
    _add_model_args(p)
    p.add_argument("--trajectory", required=True)
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--tol-abs", type=float, default=1e-4)
    p.add_argument("--tol-rel", type=float, default=0.1)
    p.add_argument("--min-fraction", type=float, default=0.99)
    p.add_argument("--out", default="")
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("finite", help="event-driven finite population run")
    _add_model_args(p)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--K", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--nfirings", type=int, default=1000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_finite)

    p = sub.add_parser("run", help="run a full scenario from a config file")
    p.add_argument("config")
    p.add_argument("--out", default=None, help="override the output directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("sweep", help="repeat a scenario over one parameter")
    p.add_argument("--config", required=True)
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_sweep)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
