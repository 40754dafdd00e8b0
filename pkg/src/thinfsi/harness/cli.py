"""Command-line entry point: ``thinfsi <subcommand> [--config PATH] [--out DIR] ...``.

Exit codes: 0 on success, 1 on validation failure (bad input, failed check),
2 on solver failure.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .. import __version__, analysis, fsi_oracle, reconstruct
from ..params import applicability_window, as_rational, build_regime, predict_rates, rescaled_coefficients
from ..reduced_solver import build_forcing, reynolds_residual, solve_w3
from . import study
from .config import ConfigError, RunConfig
from .io import export_snapshots, fmt, read_csv, read_manifest, write_csv, write_manifest
from .svg import write_loglog

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2

RNG_NAME = "numpy.random.PCG64"
DEFAULT_OUT = "thinfsi_out"
INEQUALITY_HEADER = ["check_id", "h", "eps", "lhs", "rhs", "ratio", "pass"]
LEDGER_HEADER = ["step", "t", "kinetic_f", "dissipation", "kinetic_s", "elastic", "lhs_over_t_eps3",
                 "balance_residual", "energy_scale", "int_u3", "int_u1", "int_u2", "norm_u3"]
REDUCED_HEADER = ["step", "t", "w3_max", "w3_l2", "reynolds_residual"]
RESIDUALS_HEADER = ["step", "t", "r_f", "r_b", "div_max", "shear_mean_1", "shear_mean_2"]
RESIDUAL_SCALING_HEADER = ["eps", "r_f", "r_b", "div_max"]
RESIDUAL_RATE_HEADER = ["slope", "intercept", "fit_residual", "predicted", "band", "pass"]
RESIDUAL_PREDICTED = 1.5
RESIDUAL_BAND = 0.1


class UsageError(Exception):
    """Bad command line; the usage text has already been printed."""


class SolverError(RuntimeError):
    """A numerical stage produced no usable result."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------

def _rational_list(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(Fraction(s.strip())) for s in text.split(",") if s.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers or fractions, got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _rational(text: str) -> Fraction:
    try:
        return as_rational(text)
    except (ValueError, ZeroDivisionError, TypeError):
        raise argparse.ArgumentTypeError(f"expected a rational number, got {text!r}")


def _number(text: str) -> float:
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    over = {}
    for name in ("gamma", "kappa", "seed", "count"):
        if getattr(args, name, None) is not None:
            over[name] = getattr(args, name)
    if getattr(args, "h_list", None) is not None:
        over["h_list"] = tuple(args.h_list)
    return cfg.with_overrides(**over)


def _out_dir(args, cfg: RunConfig) -> Path:
    out = args.out or cfg.out_dir or os.environ.get("THINFSI_OUT") or DEFAULT_OUT
    p = Path(out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _manifest(out: Path, command: str, cfg: RunConfig, extra: dict | None = None) -> Path:
    regime = build_regime(cfg.gamma, cfg.kappa, cfg.h_list[0])
    entries: dict[str, object] = {
        "command": command,
        "version": __version__,
        "config_hash": cfg.config_hash(),
        "rng": RNG_NAME,
        "seed": cfg.seed,
    }
    entries.update({f"config.{k}": v for k, v in cfg.as_mapping().items()})
    entries.update(regime.as_manifest())
    entries["regime.h_list"] = ", ".join(repr(h) for h in cfg.h_list)
    entries.update(extra or {})
    return write_manifest(out / "manifest.txt", entries)


def _time_grid(cfg: RunConfig) -> np.ndarray:
    nsteps = int(round(cfg.t_final / cfg.dt))
    if nsteps < 2 or not math.isclose(nsteps * cfg.dt, cfg.t_final, rel_tol=1e-9):
        raise ConfigError(f"time.t_final = {cfg.t_final} must be a multiple (>= 2) of time.dt = {cfg.dt}")
    return np.linspace(0.0, nsteps * cfg.dt, nsteps + 1)


def _snapshot_indices(nsteps: int, snapshots: int) -> list[int]:
    idx = np.unique(np.round(np.linspace(0, nsteps, min(snapshots, nsteps) + 1)).astype(int))
    return [int(i) for i in idx]


def _finite(name: str, *arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(np.asarray(a))):
            raise SolverError(f"{name} produced non-finite values")


def _level_h(args, cfg: RunConfig) -> float:
    return float(args.h) if getattr(args, "h", None) is not None else cfg.h_list[0]


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_regime(args, cfg: RunConfig, out: Path, echo: Callable[[str], None]) -> int:
    h = _level_h(args, cfg)
    regime = build_regime(cfg.gamma, cfg.kappa, h)
    pred = predict_rates(regime)
    lo, hi = applicability_window(regime.gamma)
    echo(f"gamma = {regime.gamma}")
    echo(f"kappa = {regime.kappa}")
    echo(f"tau = {regime.tau}")
    echo(f"chi_tau = {regime.chi_tau}")
    echo(f"applicable = {'true' if pred.theorem_applicable else 'false'}")
    echo(f"reduced_model = {'true' if regime.reduced_valid else 'false'}")
    echo(f"kappa_window = [{lo}, {hi})")
    echo(f"h = {fmt(h)}  eps = {fmt(regime.eps)}  T = {fmt(regime.T_scale)}")
    if regime.reduced_valid:
        c = rescaled_coefficients(regime, cfg.materials, cfg.convention)
        echo(f"C_plate = {fmt(c.C_plate)}  C_biharm = {fmt(c.C_biharm)}  C_inertia = {fmt(c.C_inertia)}"
             f"  ({cfg.convention})")
    rows = [("velocity", pred.vel_eps_pow, pred.vel_h_exp),
            ("pressure", pred.pressure_eps_pow, pred.pressure_h_exp),
            ("disp_horiz", Fraction(0), pred.disp_horiz_exp),
            ("disp_vert", Fraction(0), pred.disp_vert_exp)]
    echo(f"{'norm':<12}{'eps_power':>10}{'h_exponent':>12}{'decimal':>10}")
    for name, ep, hx in rows:
        echo(f"{name:<12}{str(ep):>10}{str(hx):>12}{float(hx):>10.4g}")
    write_csv(out / "exponents.csv", ["norm", "eps_power", "h_exponent", "h_exponent_decimal"],
              [(n, str(ep), str(hx), float(hx)) for n, ep, hx in rows])
    _manifest(out, "regime", cfg, {"applicable": pred.theorem_applicable})
    return EXIT_OK


def cmd_solve_reduced(args, cfg: RunConfig, out: Path, echo) -> int:
    h = _level_h(args, cfg)
    regime = build_regime(cfg.gamma, cfg.kappa, h)
    times = _time_grid(cfg)
    _manifest(out, "solve-reduced", cfg, {"level.h": h})
    forcing = build_forcing(cfg.force(), cfg.materials.eta, times, cfg.n, m=cfg.m, convention=cfg.convention)
    traj = solve_w3(forcing, regime, cfg.materials, times, scheme=cfg.scheme)
    _finite("reduced solver", traj.w, traj.dw)
    res = reynolds_residual(traj, reconstruct.limit_pressure(traj))
    rows = [(i, t, float(np.max(np.abs(traj.w[i]))), float(np.sqrt(np.mean(traj.w[i] ** 2))), res[i])
            for i, t in enumerate(times)]
    write_csv(out / "reduced.csv", REDUCED_HEADER, rows)
    idx = _snapshot_indices(times.size - 1, cfg.snapshots)
    export_snapshots(out / "w3", times[idx], [traj.w[i] for i in idx], prefix="w3")
    echo(f"steps = {times.size - 1}  h = {fmt(h)}  scheme = {cfg.scheme}  convention = {cfg.convention}")
    echo(f"final max|w3| = {fmt(rows[-1][2])}")
    echo(f"max reynolds residual = {fmt(float(np.max(res)))}")
    return EXIT_OK


def cmd_reconstruct(args, cfg: RunConfig, out: Path, echo) -> int:
    h = _level_h(args, cfg)
    regime = build_regime(cfg.gamma, cfg.kappa, h)
    times = _time_grid(cfg)
    _manifest(out, "reconstruct", cfg, {"level.h": h})
    forcing = build_forcing(cfg.force(), cfg.materials.eta, times, cfg.n, m=cfg.m, convention=cfg.convention)
    traj = solve_w3(forcing, regime, cfg.materials, times, scheme=cfg.scheme)
    limit = reconstruct.build_limit(traj, forcing)
    dlimit = reconstruct.limit_time_derivative(traj, forcing)
    approx = reconstruct.assemble_approx(limit, traj, regime, dlimit=dlimit)
    res = reconstruct.residuals(approx, limit, regime, cfg.materials)
    div = np.array([np.max(np.abs(reconstruct.velocity_divergence(v))) for v in approx.v])
    shear = reconstruct.interface_shear_mean(limit)
    _finite("reconstruction", res.r_f_norm, res.r_b_norm, div)
    rows = [(i, t, res.r_f_norm[i], res.r_b_norm[i], div[i], shear[i, 0], shear[i, 1])
            for i, t in enumerate(times)]
    write_csv(out / "residuals.csv", RESIDUALS_HEADER, rows)
    idx = _snapshot_indices(times.size - 1, cfg.snapshots)
    export_snapshots(out / "pressure", times[idx], [limit.p[i] for i in idx], prefix="p")
    echo(f"steps = {times.size - 1}  h = {fmt(h)}  eps = {fmt(regime.eps)}")
    echo(f"max fluid residual = {fmt(float(np.max(res.r_f_norm)))}")
    echo(f"max interface residual = {fmt(float(np.max(res.r_b_norm)))}")
    echo(f"max |div v| = {fmt(float(np.max(div)))}")
    return EXIT_OK


def cmd_verify_inequalities(args, cfg: RunConfig, out: Path, echo) -> int:
    eps_list = tuple(args.eps) if args.eps is not None else cfg.eps_list
    _manifest(out, "verify-inequalities", cfg, {"inequalities.eps_run": ", ".join(repr(e) for e in eps_list),
                                                 "korn.c_test": analysis.KORN_C_TEST})
    rows = []
    failures = 0
    for eps in eps_list:
        if not (0.0 < eps < 1.0):
            raise ConfigError(f"eps must lie in (0, 1), got {eps}")
        reports = analysis.inequality_suite(eps, cfg.seed, cfg.count)
        rows.extend(r.as_row() for r in reports)
        for i in range(cfg.count):
            group = reports[3 * i: 3 * i + 3]
            ok = all(r.passed for r in group)
            failures += not ok
            ratios = "  ".join(f"{r.check_id.split('[')[0]}={r.ratio:.4f}" for r in group)
            echo(f"{'PASS' if ok else 'FAIL'} eps={fmt(eps)} field={i}  {ratios}")
    write_csv(out / "inequalities.csv", INEQUALITY_HEADER, rows)
    if failures:
        print(f"{failures} field(s) violated an inequality", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_run_oracle(args, cfg: RunConfig, out: Path, echo) -> int:
    h = _level_h(args, cfg)
    regime = build_regime(cfg.gamma, cfg.kappa, h)
    nsteps = len(_time_grid(cfg)) - 1
    _manifest(out, "run-oracle", cfg, {"level.h": h})
    mesh = fsi_oracle.FsiMesh.from_regime(regime, cfg.n, cfg.m_f, cfg.m_s)
    record = max(1, nsteps // cfg.snapshots)
    oracle = fsi_oracle.run(regime, cfg.materials, cfg.force(), mesh, cfg.t_final, cfg.dt, record_every=record)
    write_csv(out / "ledger.csv", LEDGER_HEADER, ([getattr(r, k) for k in LEDGER_HEADER] for r in oracle.ledger))
    zero = np.zeros(1)
    u3 = [s.physical_displacement(zero)[2, 0] for s in oracle.states]
    export_snapshots(out / "u3", oracle.times, u3, prefix="u3")
    last = oracle.ledger[-1]
    echo(f"steps = {nsteps}  h = {fmt(h)}  eps = {fmt(regime.eps)}  T = {fmt(regime.T_scale)}")
    echo(f"final LHS/(t eps^3) = {fmt(last.lhs_over_t_eps3)}")
    echo(f"max relative energy balance residual = {fmt(oracle.max_balance_error)}")
    echo(f"final interface mean of u3 = {fmt(last.int_u3)}")
    return EXIT_OK


def _echo_rates(report: study.RateReport, echo) -> None:
    for e in report.entries:
        gated = "gated" if e.norm in study.GATED else "info"
        verdict = e.passed if isinstance(e.passed, str) else ("PASS" if e.passed else "FAIL")
        echo(f"{str(verdict).upper():<8}{e.norm:<12} slope_raw={e.slope_raw:.4f} "
             f"slope_normalized={e.slope_normalized:.4f} predicted={e.predicted} gap={e.gap:.4f} "
             f"monotone={'yes' if e.monotone else 'no'} ({gated})")


def _residual_study(args, cfg: RunConfig, out: Path, echo) -> int:
    eps_list = tuple(args.eps) if args.eps is not None else tuple(2.0 ** -k for k in range(3, 8))
    res = study.residual_scaling(eps_list, n=cfg.n, eta=cfg.materials.eta)
    write_csv(out / "residual.csv", RESIDUAL_SCALING_HEADER, zip(res.eps, res.r_f, res.r_b, res.div_max))
    fit = res.fit
    ok = fit is not None and abs(fit.slope - RESIDUAL_PREDICTED) <= RESIDUAL_BAND
    write_csv(out / "residual_rate.csv", RESIDUAL_RATE_HEADER,
              [(fit.slope if fit else float("nan"), fit.intercept if fit else float("nan"),
                fit.residual if fit else float("nan"), RESIDUAL_PREDICTED, RESIDUAL_BAND, ok)])
    write_loglog(out / "residual.svg", [("r_f", res.eps, res.r_f)], title="fluid residual vs eps",
                 xlabel="eps", ylabel="residual")
    for e, r in zip(res.eps, res.r_f):
        echo(f"eps = {fmt(e)}  r_f = {fmt(r)}")
    echo(f"{'PASS' if ok else 'FAIL'} residual slope = {fit.slope if fit else float('nan'):.4f} "
         f"(predicted {RESIDUAL_PREDICTED} +- {RESIDUAL_BAND})")
    return EXIT_OK if ok else EXIT_VALIDATION


def cmd_convergence_study(args, cfg: RunConfig, out: Path, echo) -> int:
    kind = args.kind or cfg.study
    _manifest(out, "convergence-study", cfg, {"study.kind_run": kind})
    if kind == "residual":
        return _residual_study(args, cfg, out, echo)
    report = study.convergence_study(cfg, out, self_test=(kind == "self-test"))
    for lv in report.levels:
        echo(f"h = {fmt(lv.h)}  velocity = {lv.errors.velocity:.4e}  disp_vert = {lv.errors.disp_vert:.4e}  "
             f"energy ratio = {lv.energy_ratio:.4e}")
    _echo_rates(report, echo)
    return EXIT_OK if report.passed else EXIT_VALIDATION


def _float(s: str) -> float:
    return float(s) if s not in ("", "nan") else float("nan")


def cmd_report(args, cfg: RunConfig | None, out: Path, echo) -> int:
    lines: list[str] = []
    found = False
    if (out / "errors.csv").exists():
        found = True
        errs = read_csv(out / "errors.csv")
        hs = [_float(r["h"]) for r in errs]
        for norm in study.NORMS:
            write_loglog(out / f"rates_{norm}.svg", [(norm, hs, [_float(r[norm]) for r in errs])],
                         title=f"{norm} error vs h", xlabel="h", ylabel="error")
        for r in errs:
            lines.append(f"h = {r['h']}  velocity = {r['velocity']}  pressure = {r['pressure']}  "
                         f"disp_horiz = {r['disp_horiz']}  disp_vert = {r['disp_vert']}  "
                         f"energy_ratio = {r['energy_ratio']}")
    if (out / "rates.csv").exists():
        found = True
        for r in read_csv(out / "rates.csv"):
            lines.append(f"{r['norm']}: slope_raw = {r['slope_raw']}  slope_normalized = {r['slope_normalized']}"
                         f"  predicted = {r['predicted']}  gap = {r['gap']}  pass = {r['pass']}")
    if (out / "residual.csv").exists():
        found = True
        rows = read_csv(out / "residual.csv")
        eps, rf = [_float(r["eps"]) for r in rows], [_float(r["r_f"]) for r in rows]
        write_loglog(out / "residual.svg", [("r_f", eps, rf)], title="fluid residual vs eps",
                     xlabel="eps", ylabel="residual")
        fit = study.fit_slope(zip(eps, rf))
        lines.append(f"residual slope = {fit.slope if fit else float('nan'):.6f}")
    if (out / "inequalities.csv").exists():
        found = True
        rows = read_csv(out / "inequalities.csv")
        bad = sum(r["pass"] != "1" for r in rows)
        worst: dict[str, float] = {}
        for r in rows:
            k = r["check_id"].split("[")[0]
            worst[k] = max(worst.get(k, 0.0), _float(r["ratio"]))
        lines.append(f"inequality checks = {len(rows)}  violations = {bad}")
        lines.extend(f"max ratio {k} = {v:.6f}" for k, v in sorted(worst.items()))
    if (out / "ledger.csv").exists():
        found = True
        rows = read_csv(out / "ledger.csv")
        t = [_float(r["t"]) for r in rows]
        ratio = [_float(r["lhs_over_t_eps3"]) for r in rows]
        write_loglog(out / "energy_ratio.svg", [("LHS/(t eps^3)", t, ratio)], title="energy ratio",
                     xlabel="t", ylabel="ratio")
        bal = max(_float(r["balance_residual"]) / _float(r["energy_scale"]) for r in rows
                  if _float(r["energy_scale"]) > 0) if rows else 0.0
        lines.append(f"final energy ratio = {rows[-1]['lhs_over_t_eps3']}  max balance residual = {bal:.3e}")
    if not found:
        raise ConfigError(f"no persisted results found in {out}")
    if (out / "manifest.txt").exists():
        man = read_manifest(out / "manifest.txt")
        lines.insert(0, f"command = {man.get('command', '?')}  config_hash = {man.get('config_hash', '?')}")
    (out / "summary.txt").write_text("".join(s + "\n" for s in lines))
    for s in lines:
        echo(s)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser and entry point
# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory (default: $THINFSI_OUT or ./thinfsi_out)")
    common.add_argument("--quiet", action="store_true", help="suppress per-item output")

    parser = _Parser(prog="thinfsi", description="Thin-film fluid-structure interaction experiments.")
    parser.add_argument("--version", action="version", version=f"thinfsi {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)
    sub.required = True

    def add(name, help_text, fn, regime=True, level=False):
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if regime:
            p.add_argument("--gamma", type=_rational, help="fluid thickness exponent (eps = h^gamma)")
            p.add_argument("--kappa", type=_rational, help="structure stiffness exponent")
            p.add_argument("--h-list", dest="h_list", type=_rational_list, metavar="H1,H2,...",
                           help="structure thicknesses, strictly decreasing")
        if level:
            p.add_argument("--h", type=_number, help="thickness for a single-level run (default: first of the list)")
        p.set_defaults(fn=fn)
        return p

    add("regime", "Print the scaling regime with its coefficients and predicted rates.", cmd_regime, level=True)
    add("solve-reduced", "Integrate the sixth-order plate equation.", cmd_solve_reduced, level=True)
    add("reconstruct", "Build the limit fields, the approximation and its residuals.", cmd_reconstruct, level=True)
    p = add("verify-inequalities", "Check the thin-domain inequalities on seeded random fields.",
            cmd_verify_inequalities, regime=False)
    p.add_argument("--eps", type=_rational_list, metavar="E1,E2,...", help="fluid thicknesses to test")
    p.add_argument("--seed", type=int, help="seed of the random ensemble")
    p.add_argument("--count", type=int, help="number of random fields per eps")
    add("run-oracle", "Run the full monolithic solver at one thickness.", cmd_run_oracle, level=True)
    p = add("convergence-study", "Oracle against reduced approximation over the h list.", cmd_convergence_study)
    p.add_argument("--kind", choices=("oracle", "residual", "self-test"), help="study type (default: study.kind)")
    p.add_argument("--eps", type=_rational_list, metavar="E1,E2,...", help="eps values for the residual study")
    add("report", "Regenerate plots and a summary from persisted CSVs.", cmd_report, regime=False)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_VALIDATION
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    echo = (lambda s: None) if args.quiet else print
    try:
        if args.command == "report":
            cfg = RunConfig.load(args.config) if args.config else None
            out = Path(args.out or (cfg.out_dir if cfg else None) or os.environ.get("THINFSI_OUT") or DEFAULT_OUT)
            if not out.is_dir():
                raise ConfigError(f"output directory {out} does not exist")
            return cmd_report(args, cfg, out, echo)
        cfg = _load_config(args)
        out = _out_dir(args, cfg)
        return args.fn(args, cfg, out, echo)
    except (fsi_oracle.OracleError, SolverError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"thinfsi: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, ValueError, OSError) as exc:
        print(f"thinfsi: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
