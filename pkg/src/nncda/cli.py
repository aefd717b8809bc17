"""Command-line entry point: ``nncda {spinup,run,check-params,analyze,reproduce}``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical blow-up,
4 certification failure under ``--strict``.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import diagnostics, interpolants, nudging, solver, theory
from .config import ConfigError, RunConfig
from .interpolants import InterpolantSpec
from .spectral import SpectralField, grad_perp, make_grid, read_checkpoint, write_checkpoint

log = logging.getLogger("nncda")

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_CERT = 0, 2, 3, 4
THRESHOLD = 1e-16


# --------------------------------------------------------------------------- builders

def build_params(cfg: RunConfig) -> solver.PhysicalParams:
    g = make_grid(cfg["grid"]["n"], float(cfg["grid"]["L"]))
    p = cfg["physics"]
    f = p["forcing"]
    forcing = solver.make_forcing(g, int(f["seed"]), int(f["k_min"]), int(f["k_max"]), float(p["target_G"]), float(p["nu"]))
    return solver.PhysicalParams(float(p["nu"]), forcing)


def build_interpolant(cfg: RunConfig) -> InterpolantSpec:
    spec = cfg["da"]["interpolant"]
    L = float(cfg["grid"]["L"])
    if spec["kind"] == interpolants.FOURIER:
        if "m" not in spec:
            return InterpolantSpec.fourier(int(round(L / float(spec["h"]))), L)
        return InterpolantSpec.fourier(int(spec["m"]), L)
    h = float(spec["h"]) if "h" in spec else L / int(spec["m"])
    return InterpolantSpec.volume(h, L)


def build_nudging(cfg: RunConfig, mode: str | None = None, interp: InterpolantSpec | None = None) -> nudging.NudgingConfig:
    da = cfg["da"]
    return nudging.NudgingConfig(float(da["mu"]), float(da["beta"]), float(da["gamma"]),
                                 mode or da["mode"], interp or build_interpolant(cfg))


def cfl_number(psi: SpectralField, dt: float) -> float:
    u = grad_perp(psi)
    umax = max(np.abs(u.u1.to_physical()).max(), np.abs(u.u2.to_physical()).max())
    return float(umax * dt * psi.grid.n / psi.grid.L)


def _resolve_config(args) -> RunConfig:
    if getattr(args, "preset", None) and getattr(args, "config", None):
        raise ConfigError("give either --config or --preset, not both")
    if getattr(args, "config", None):
        cfg = cfgmod.load(args.config)
    else:
        cfg = cfgmod.preset(getattr(args, "preset", None) or "desk")
    return cfg.with_overrides(args.set or [])


def _prepare_output(cfg: RunConfig, override: str | None = None) -> Path:
    out = Path(override) if override else cfg.output_dir()
    out.mkdir(parents=True, exist_ok=True)
    cfg.save(out / "config.toml")
    return out


# --------------------------------------------------------------------------- commands

def cmd_spinup(cfg: RunConfig, out: Path) -> solver.SolverState:
    params = build_params(cfg)
    t = cfg["time"]
    dt = float(t["dt"])
    t0 = time.perf_counter()
    state, series = solver.spinup(params, float(t["t_spinup"]), dt, sample_every=int(t["sample_every"]))
    write_checkpoint(out / "reference.nncda", state.psi, state.t)
    series.to_csv(out / "energy.csv")
    diagnostics.spectrum_to_csv(diagnostics.shell_spectrum(grad_perp(state.psi)), out / "spectrum.csv")
    cfl = cfl_number(state.psi, dt)
    if cfl > cfgmod.CFL_WARN:
        log.warning("advective CFL number %.3f exceeds %.2f; consider a smaller dt", cfl, cfgmod.CFL_WARN)
    log.info("spinup to t=%.4g done in %.1fs, G=%.6g, energy=%.6g, CFL=%.3f",
             state.t, time.perf_counter() - t0, params.grashof, series.energy[-1], cfl)
    return state


def _load_reference(cfg: RunConfig, path) -> solver.SolverState:
    try:
        psi, t = read_checkpoint(path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read reference checkpoint: {exc}") from exc
    n, L = cfg["grid"]["n"], float(cfg["grid"]["L"])
    if psi.grid.n != n or abs(psi.grid.L - L) > 1e-12 * L:
        raise ConfigError(f"checkpoint grid (n={psi.grid.n}, L={psi.grid.L}) does not match config (n={n}, L={L})")
    return solver.SolverState(psi, t)


def _ensemble(cfg: RunConfig, reference: solver.SolverState, configs, out: Path | None = None):
    params = build_params(cfg)
    t = cfg["time"]
    every = int(cfg["io"]["checkpoint_every"])
    callback = None
    if every and out is not None:
        ckdir = out / "checkpoints"
        ckdir.mkdir(exist_ok=True)
        grid = params.grid

        def callback(step, time_, pu, pvs):
            write_checkpoint(ckdir / f"u_{step:08d}.nncda", SpectralField(grid, pu), time_)
            for nc, pv in zip(configs, pvs):
                write_checkpoint(ckdir / f"v_{nc.mode}_{step:08d}.nncda", SpectralField(grid, pv), time_)

    return nudging.run_da_ensemble(reference, params, configs, float(t["dt"]), float(t["t_end"]),
                                   observe_every=int(cfg["da"]["observe_every"]), sample_every=int(t["sample_every"]),
                                   callback=callback, callback_every=every)


def cmd_run(cfg: RunConfig, reference_path, out: Path) -> diagnostics.ErrorSeries:
    reference = _load_reference(cfg, reference_path)
    nc = build_nudging(cfg)
    (result,), final_u = _ensemble(cfg, reference, [nc], out)
    result.series.to_csv(out / "error_series.csv")
    write_checkpoint(out / "u_final.nncda", final_u.psi, final_u.t)
    write_checkpoint(out / "v_final.nncda", result.state.psi, result.state.t)
    return result.series


def theory_constants(cfg: RunConfig, interp: InterpolantSpec | None = None) -> theory.TheoryConstants:
    interp = interp or build_interpolant(cfg)
    if interp.c0 is None:
        g = make_grid(cfg["grid"]["n"], float(cfg["grid"]["L"]))
        interp = interpolants.with_measured_c0(interp, g, trials=20)
    L = float(cfg["grid"]["L"])
    T = float(cfg["theory"]["T_window"]) or None
    da = cfg["da"]
    gamma = float(da["gamma"])
    if not 0 < gamma < 1:
        raise ConfigError("theory thresholds need 0 < gamma < 1")
    return theory.TheoryConstants(
        c=float(cfg["theory"]["c"]), c0=interp.c0, alpha=interp.alpha, lambda1=(2 * math.pi / L) ** 2,
        nu=float(cfg["physics"]["nu"]), G=float(cfg["physics"]["target_G"]), gamma=gamma,
        mu=float(da["mu"]), beta=float(da["beta"]), h=interp.h, T=T, L=L)


def certification_rows(k: theory.TheoryConstants, eps: float) -> list:
    """Rows ``(condition, required, actual, satisfied)`` for both convergence theorems."""
    H = theory.thresholds_H(k, eps)
    V = theory.thresholds_V(k, eps)
    rows = [
        ("H: mu > max{5c^2 l1 G^2 nu, alpha^g c^2 l1 G^2 nu, alpha^g/g}", H.mu_min, k.mu, k.mu > H.mu_min),
        ("H: beta > c^2 l1 G^2 nu", H.beta_min, k.beta, k.beta > H.beta_min),
        ("H: h < sqrt(nu/(2 mu c0))", H.h_mu, k.h, k.h < H.h_mu),
        ("H: h < sqrt(nu/(beta c0))", H.h_beta, k.h, k.h < H.h_beta),
        ("H: h <= a alpha^g (eps/2)^(g/2) nu^(1-g/2)/(mu sqrt(c0))", H.h_eps, k.h, k.h <= H.h_eps),
        ("V: mu > max{(sqrt(c0)+l1^-1/2)^g c l1^2 nu^2 (1+G)^4, 1/(g l1^(g/2)), 3 l1 nu J G}", V.mu_min, k.mu, k.mu > V.mu_min),
        ("V: beta > 3 l1 nu J G", V.beta_min, k.beta, k.beta > V.beta_min),
        ("V: h < L", V.h_domain, k.h, k.h < V.h_domain),
        ("V: h < sqrt(nu/(mu c0))", V.h_mu, k.h, k.h < V.h_mu),
        ("V: h <= a_V (eps/2)^(g/2) nu^(1-g/2)/(mu sqrt(c0))", V.h_eps, k.h, k.h <= V.h_eps),
    ]
    D = theory.switch_denominator_H(k)
    rows.append(("H switch: beta/2 - (c^2/(T nu)) 2(1+l1 nu T) nu G^2 > 0", 0.0, D, D > 0))
    if D > 0:
        rows.append(("H switch time t0 (t_a = 0, v0 = 0)", theory.switch_time_H(k, 0.0), float("nan"), True))
    try:
        rows.append(("V switch time t0 (t_a = 0, v0 = 0)", theory.switch_time_V(k, 0.0), float("nan"), True))
    except theory.CertificationError:
        rows.append(("V switch time t0 (t_a = 0, v0 = 0)", float("nan"), float("nan"), False))
    return rows


def format_table(rows: list) -> str:
    head = ("condition", "required", "actual", "status")
    body = [(c, f"{r:.6g}", "" if math.isnan(a) else f"{a:.6g}", "PASS" if ok else "FAIL") for c, r, a, ok in rows]
    widths = [max(len(x[i]) for x in [head, *body]) for i in range(4)]
    lines = ["  ".join(x[i].ljust(widths[i]) for i in range(4)).rstrip() for x in [head, *body]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def write_rows_csv(rows: list, path) -> None:
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["condition", "required", "actual", "satisfied"])
        for c, r, a, ok in rows:
            w.writerow([c, f"{r:.17g}", f"{a:.17g}", "true" if ok else "false"])


def cmd_check_params(cfg: RunConfig, csv_path=None) -> tuple[list, str]:
    k = theory_constants(cfg)
    rows = certification_rows(k, float(cfg["theory"]["eps"]))
    text = f"certification conditional on c = {k.c:g} (T = {k.window:.6g})\n" + format_table(rows)
    if csv_path:
        write_rows_csv(rows, csv_path)
    return rows, text


def cmd_analyze(series_path, out_path=None, window=None, curvature_tol=0.15) -> tuple[diagnostics.RegimeReport, list]:
    series = diagnostics.ErrorSeries.from_csv(series_path)
    if len(series) < 3:
        raise ValueError(f"{series_path}: need at least 3 samples")
    report = diagnostics.detect_regimes(series, window=window, curvature_tol=curvature_tol)
    if out_path is not None:
        report.to_csv(out_path)
    lines = []
    for s in report.segments:
        fit = _segment_fit(series, s)
        lines.append(f"{s.kind:<18} t=[{s.t_start:.4g}, {s.t_end:.4g}]  rate={s.rate:.6g}  "
                     f"max log residual={s.residual:.3g}  max deviation from fit={fit:.3g}")
    return report, lines


def _segment_fit(series, seg) -> float:
    try:
        return diagnostics.fit_exponential(series, seg.t_start, seg.t_end).max_abs_residual
    except ValueError:
        return float("nan")


def reproduce_configs(cfg: RunConfig) -> list:
    """Control (no nudging), linear and nonlinear runs sharing one interpolant."""
    interp = build_interpolant(cfg)
    da = cfg["da"]
    nonlinear = build_nudging(cfg, "nonlinear", interp)
    return [
        nudging.NudgingConfig(0.0, 0.0, 0.0, "linear", interp),
        nudging.NudgingConfig(float(da["mu"]), float(da["beta"]), 0.0, "linear", interp),
        nonlinear,
    ]


RUN_NAMES = ("control", "linear", "nonlinear")


def cmd_reproduce(cfg: RunConfig, out: Path, window: float | None = None, curvature_tol: float = 0.15) -> dict:
    """Spin-up, three co-evolved assimilation runs, regime analysis and a summary."""
    reference = cmd_spinup(cfg, out)
    configs = reproduce_configs(cfg)
    results, _ = _ensemble(cfg, reference, configs, out)
    summary = {}
    for name, res in zip(RUN_NAMES, results):
        res.series.to_csv(out / f"error_{name}.csv")
        entry = {"time_to_threshold": diagnostics.time_to_threshold(res.series, THRESHOLD),
                 "final_err_H2": res.series.err_H2[-1], "segments": ""}
        if name != "control":
            report = diagnostics.detect_regimes(res.series, window=window, curvature_tol=curvature_tol)
            report.to_csv(out / f"regimes_{name}.csv")
            entry["segments"] = "|".join(report.kinds)
        summary[name] = entry
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["run", "time_to_1e-16", "final_err_H2", "segments"])
        for name, e in summary.items():
            w.writerow([name, f"{e['time_to_threshold']:.17g}", f"{e['final_err_H2']:.17g}", e["segments"]])
    return summary


# --------------------------------------------------------------------------- argparse

def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="TOML run configuration")
    p.add_argument("--preset", choices=sorted(cfgmod.PRESETS), help="start from a built-in preset instead of a file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config entry, e.g. da.mu=4")
    p.add_argument("--output-dir", help=f"output directory (default io.output_dir under ${cfgmod.OUTPUT_ROOT_ENV})")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nncda", description="Nonlinear-nudging data assimilation for 2D Navier-Stokes.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spinup", help="integrate the reference flow from rest")
    _add_config_args(p)

    p = sub.add_parser("run", help="assimilate a reference trajectory")
    _add_config_args(p)
    p.add_argument("--reference", required=True, help="reference checkpoint written by spinup")

    p = sub.add_parser("check-params", help="evaluate the sufficient conditions of the convergence theorems")
    _add_config_args(p)
    p.add_argument("--csv", help="also write the table as CSV")
    p.add_argument("--strict", action="store_true", help="exit 4 if any condition fails")

    p = sub.add_parser("analyze", help="segment an error series into convergence regimes")
    p.add_argument("series", help="error series CSV")
    p.add_argument("--out", help="regime CSV path (default: <series>_regimes.csv)")
    p.add_argument("--window", type=float, help="smoothing window in time units")
    p.add_argument("--curvature-tol", type=float, default=0.15)

    p = sub.add_parser("reproduce", help="spin-up, linear and nonlinear assimilation, analysis")
    p.add_argument("--scale", choices=sorted(cfgmod.PRESETS), default="desk")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--output-dir")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "analyze":
            out = args.out or str(Path(args.series).with_suffix("")) + "_regimes.csv"
            _, lines = cmd_analyze(args.series, out, args.window, args.curvature_tol)
            print("\n".join(lines))
            return EXIT_OK
        if args.command == "reproduce":
            cfg = cfgmod.preset(args.scale).with_overrides(args.set or [])
            out = _prepare_output(cfg, args.output_dir)
            summary = cmd_reproduce(cfg, out)
            for name, e in summary.items():
                print(f"{name:<10} t(err_H2<=1e-16)={e['time_to_threshold']:.4g}  final={e['final_err_H2']:.3e}  {e['segments']}")
            return EXIT_OK
        cfg = _resolve_config(args)
        if args.command == "check-params":
            rows, text = cmd_check_params(cfg, args.csv)
            print(text)
            return EXIT_CERT if args.strict and not all(r[3] for r in rows) else EXIT_OK
        out = _prepare_output(cfg, args.output_dir)
        if args.command == "spinup":
            cmd_spinup(cfg, out)
        else:
            cmd_run(cfg, args.reference, out)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except solver.BlowUpError as exc:
        print(f"numerical blow-up: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
