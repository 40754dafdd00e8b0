"""Convergence and scaling studies, slope fitting and the worker pool."""
from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .. import analysis, fsi_oracle, reconstruct
from ..fields import PeriodicField2D
from ..params import build_regime, predict_rates
from ..reduced_solver import build_forcing, solve_w3
from .config import RunConfig
from .io import write_csv


# --------------------------------------------------------------------------
# slope fitting
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    residual: float
    used: int
    dropped: int


def fit_slope(pairs: Iterable[tuple[float, float]]) -> SlopeFit | None:
    """Least-squares fit of ``log(error) = slope * log(h) + intercept``.

    Pairs with a non-positive (or non-finite) error are dropped with a
    warning; fewer than three remaining pairs give ``None``.  ``residual`` is
    the root-mean-square deviation of the fit in natural-log units.
    """
    pairs = list(pairs)
    good = [(h, e) for h, e in pairs if h > 0 and e > 0 and math.isfinite(e) and math.isfinite(h)]
    dropped = len(pairs) - len(good)
    if dropped:
        warnings.warn(f"fit_slope: dropped {dropped} non-positive or non-finite points", RuntimeWarning,
                      stacklevel=2)
    if len(good) < 3:
        return None
    x = np.log([h for h, _ in good])
    y = np.log([e for _, e in good])
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ np.array([slope, intercept]) - y) ** 2)))
    return SlopeFit(float(slope), float(intercept), resid, len(good), dropped)


# --------------------------------------------------------------------------
# worker pool
# --------------------------------------------------------------------------

def run_pool(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """Map ``fn`` over ``items`` with at most ``workers`` processes, preserving order."""
    workers = max(1, min(int(workers), len(items)))
    if workers == 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# one thickness level
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LevelResult:
    h: float
    eps: float
    errors: analysis.ErrorNorms
    energy_ratio: float
    max_balance_error: float
    max_int_u3_rel: float
    ledger: list = field(repr=False)
    seconds: float = 0.0


def _level_inputs(cfg: RunConfig, h: float):
    regime = build_regime(cfg.gamma, cfg.kappa, h)
    mesh = fsi_oracle.FsiMesh.from_regime(regime, cfg.n, cfg.m_f, cfg.m_s)
    return regime, mesh


def approximate_solution(cfg: RunConfig, h: float, times: np.ndarray):
    """Reduced trajectory, limit fields and lifted approximation on ``times``."""
    regime = build_regime(cfg.gamma, cfg.kappa, h)
    force = cfg.force()
    forcing = build_forcing(force, cfg.materials.eta, times, cfg.n, m=cfg.m, convention=cfg.convention)
    traj = solve_w3(forcing, regime, cfg.materials, times, scheme=cfg.scheme)
    limit = reconstruct.build_limit(traj, forcing)
    approx = reconstruct.assemble_approx(limit, traj, regime)
    return traj, limit, approx


def run_level(cfg: RunConfig, h: float, self_test: bool = False) -> LevelResult:
    """Oracle versus reduced approximation at one thickness ``h``."""
    t0 = time.perf_counter()
    regime, mesh = _level_inputs(cfg, h)
    z_f, w_f = analysis.layered_gauss(-regime.eps, 0.0, cfg.m_f)
    z_s, w_s = analysis.layered_gauss(0.0, h, cfg.m_s)
    if self_test:
        nsteps = int(round(cfg.t_final / cfg.dt))
        times = np.linspace(0.0, nsteps * cfg.dt, nsteps + 1)
        _, _, approx = approximate_solution(cfg, h, times)
        appr = [analysis.sample_approx(approx, i, z_f, w_f, z_s, w_s) for i in range(times.size)]
        err = analysis.error_norms(appr, appr, regime)
        return LevelResult(h, regime.eps, err, float("nan"), 0.0, 0.0, [], time.perf_counter() - t0)
    oracle = fsi_oracle.run(regime, cfg.materials, cfg.force(), mesh, cfg.t_final, cfg.dt, record_every=1)
    times = oracle.times
    _, _, approx = approximate_solution(cfg, h, times)
    full = [oracle.sample(i, z_f, w_f, z_s, w_s) for i in range(times.size)]
    appr = [analysis.sample_approx(approx, i, z_f, w_f, z_s, w_s) for i in range(times.size)]
    err = analysis.error_norms(full, appr, regime)
    rel_u3 = max((abs(r.int_u3) / (r.norm_u3 + 1e-300) for r in oracle.ledger), default=0.0)
    return LevelResult(h, regime.eps, err, oracle.ledger[-1].lhs_over_t_eps3, oracle.max_balance_error,
                       rel_u3, oracle.ledger, time.perf_counter() - t0)


def _run_level_job(args):
    cfg, h, self_test = args
    return run_level(cfg, h, self_test)


# --------------------------------------------------------------------------
# rate report
# --------------------------------------------------------------------------

NORMS = ("velocity", "pressure", "disp_horiz", "disp_vert")
#: Norms whose monotone decrease and positive slope gate the study.
GATED = ("velocity", "disp_vert")
BAND = 0.25


@dataclass(frozen=True)
class RateEntry:
    norm: str
    levels: int
    slope_raw: float
    slope_normalized: float
    fit_residual: float
    predicted: Fraction
    gap: float
    within_band: bool
    monotone: bool
    passed: bool | str

    def as_row(self) -> dict:
        return {"norm": self.norm, "levels": self.levels, "slope_raw": self.slope_raw,
                "slope_normalized": self.slope_normalized, "fit_residual": self.fit_residual,
                "predicted": str(self.predicted), "gap": self.gap, "within_band": self.within_band,
                "monotone": self.monotone, "pass": self.passed}


@dataclass(frozen=True, eq=False)
class RateReport:
    gamma: Fraction
    kappa: Fraction
    levels: list[LevelResult]
    entries: list[RateEntry]
    theorem_applicable: bool
    self_test: bool = False

    def entry(self, norm: str) -> RateEntry:
        return next(e for e in self.entries if e.norm == norm)

    @property
    def passed(self) -> bool:
        return all(e.passed is True or e.passed == "trivial" for e in self.entries if e.norm in GATED)


def _predicted(pred, norm: str) -> Fraction:
    return {"velocity": pred.vel_h_exp, "pressure": pred.pressure_h_exp,
            "disp_horiz": pred.disp_horiz_exp, "disp_vert": pred.disp_vert_exp}[norm]


def build_report(cfg: RunConfig, levels: list[LevelResult], self_test: bool = False) -> RateReport:
    """Fit slopes of raw and normalised errors and compare with the predicted exponents.

    Gating (velocity and vertical displacement): raw errors decrease
    monotonically as ``h`` decreases and both the raw slope and the slope of
    the normalised error are positive.  The distance between the normalised
    slope and the predicted ``h`` exponent is informational, with a band of
    +-0.25.
    """
    regime0 = build_regime(cfg.gamma, cfg.kappa, levels[0].h)
    pred = predict_rates(regime0)
    entries = []
    for norm in NORMS:
        hs = [lv.h for lv in levels]
        raw = [getattr(lv.errors, norm) for lv in levels]
        normed = [lv.errors.normalized(build_regime(cfg.gamma, cfg.kappa, lv.h))[norm] for lv in levels]
        p = _predicted(pred, norm)
        if self_test or all(e == 0 for e in raw):
            entries.append(RateEntry(norm, len(levels), float("nan"), float("nan"), float("nan"), p,
                                     float("nan"), False, True, "trivial"))
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            fr = fit_slope(zip(hs, raw))
            fn = fit_slope(zip(hs, normed))
        monotone = all(b < a for a, b in zip(raw, raw[1:]))
        s_raw = fr.slope if fr else float("nan")
        s_norm = fn.slope if fn else float("nan")
        gap = s_norm - float(p)
        passed = bool(monotone and fr is not None and fn is not None and s_raw > 0 and s_norm > 0)
        entries.append(RateEntry(norm, len(levels), s_raw, s_norm, fn.residual if fn else float("nan"), p, gap,
                                 bool(abs(gap) <= BAND), monotone, passed))
    return RateReport(cfg.gamma, cfg.kappa, levels, entries, pred.theorem_applicable, self_test)


def convergence_study(cfg: RunConfig, out: Path | None = None, self_test: bool = False) -> RateReport:
    """Run every ``h`` level, fit slopes and (optionally) persist CSVs and plots."""
    if len(cfg.h_list) < 3:
        raise ValueError(f"a convergence study needs >= 3 h levels, got {len(cfg.h_list)}")
    jobs = [(cfg, h, self_test) for h in cfg.h_list]
    levels = []
    try:
        for res in run_pool(_run_level_job, jobs, cfg.workers) if cfg.workers > 1 else map(_run_level_job, jobs):
            levels.append(res)
            if out is not None:
                write_level(out, len(levels) - 1, res)
    finally:
        if out is not None and levels:
            write_errors(out / "errors.csv", levels)
    report = build_report(cfg, levels, self_test)
    if out is not None:
        write_rates(out, report)
    return report


# --------------------------------------------------------------------------
# residual scaling (no oracle)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ResidualScaling:
    eps: tuple[float, ...]
    r_f: tuple[float, ...]
    r_b: tuple[float, ...]
    div_max: tuple[float, ...]
    fit: SlopeFit | None


def residual_scaling(eps_list: Sequence[float] = tuple(2.0 ** -k for k in range(3, 8)), n: int = 16,
                     mode: tuple[int, int] = (1, 0), eta: float = 1.0, m: int = 4) -> ResidualScaling:
    """Steady fluid residual for fixed single-mode limit data over a range of ``eps``.

    The limit pressure is ``cos(2 pi (k . y'))`` with no volume force, so the
    flow is pure Poiseuille and its time derivative vanishes.
    """
    from ..params import MaterialParams
    p = PeriodicField2D.from_function(lambda a, b: np.cos(2 * np.pi * (mode[0] * a + mode[1] * b)), n)
    limit = reconstruct.steady_limit(p, eta=eta, m=m)
    mats = MaterialParams(eta=eta)
    rf, rb, dv = [], [], []
    for e in eps_list:
        regime = build_regime(1, Fraction(7, 2), e)
        approx = reconstruct.lift_fluid(limit, e)
        _, norms = reconstruct.fluid_residual(approx, regime, mats, steady=True)
        rf.append(float(norms[0]))
        b = reconstruct.boundary_residual(limit, regime, eta)[0]
        rb.append(float(np.sqrt(np.sum(np.mean(b ** 2, axis=(-2, -1))))))
        dv.append(float(np.max(np.abs(reconstruct.velocity_divergence(approx.v[0])))))
    return ResidualScaling(tuple(eps_list), tuple(rf), tuple(rb), tuple(dv), fit_slope(zip(eps_list, rf)))


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------

ENERGY_HEADER = ["step", "t", "kinetic_f", "dissipation", "kinetic_s", "elastic", "lhs_over_t_eps3"]
ERRORS_HEADER = ["h", "eps", "velocity", "pressure", "disp_horiz", "disp_vert", "translation",
                 "disp_horiz_corrected", "energy_ratio", "max_balance_error", "max_int_u3_rel"]
RATES_HEADER = ["norm", "levels", "slope_raw", "slope_normalized", "fit_residual", "predicted", "gap",
                "within_band", "monotone", "pass"]


def write_energy(path: Path, ledger) -> Path:
    return write_csv(path, ENERGY_HEADER, ([getattr(r, k) for k in ENERGY_HEADER] for r in ledger))


def write_level(out: Path, i: int, level: LevelResult) -> None:
    d = Path(out) / f"level_{i}"
    if level.ledger:
        write_energy(d / "energy.csv", level.ledger)


def write_errors(path: Path, levels: list[LevelResult]) -> Path:
    rows = []
    for lv in levels:
        e = lv.errors
        rows.append([lv.h, lv.eps, e.velocity, e.pressure, e.disp_horiz, e.disp_vert, e.translation,
                     e.disp_horiz_corrected, lv.energy_ratio, lv.max_balance_error, lv.max_int_u3_rel])
    return write_csv(path, ERRORS_HEADER, rows)


def write_rates(out: Path, report: RateReport) -> None:
    from .svg import write_loglog
    out = Path(out)
    write_csv(out / "rates.csv", RATES_HEADER, (e.as_row() for e in report.entries))
    hs = [lv.h for lv in report.levels]
    for norm in NORMS:
        raw = [getattr(lv.errors, norm) for lv in report.levels]
        write_loglog(out / f"rates_{norm}.svg", [(norm, hs, raw)],
                     title=f"{norm} error vs h", xlabel="h", ylabel="error")
