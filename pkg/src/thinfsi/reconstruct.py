"""Limit fields and approximate solutions of the thin fluid/plate problem.

From a reduced trajectory ``w3`` this module rebuilds the limit pressure,
the Poiseuille-Couette horizontal velocities and the plate translations on
the reference fluid slab, lifts them to the physical thin domain, and
evaluates the residuals the lifted fields leave in the full equations.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from .fields import (PeriodicField2D, SlabField3D, VerticalGrid, spectral_derivative,
                     spectral_laplacian, vertical_grid)
from .params import Convention, MaterialParams, ScalingRegime, forcing_sign
from .reduced_solver import ReducedForcing, ReducedTrajectory


@dataclass(frozen=True, eq=False)
class LimitFields:
    """Limit pressure, horizontal velocities and plate translations per time."""

    times: np.ndarray
    p: list[PeriodicField2D]
    v: list[SlabField3D]
    dt_a: np.ndarray
    a: np.ndarray
    eta: float

    @property
    def grid(self) -> VerticalGrid:
        return self.v[0].grid


@dataclass(frozen=True, eq=False)
class ApproxSolution:
    """Approximate fields on the physical thin domain, in rescaled time.

    ``v`` lives on ``(0,1)^2 x [-eps, 0]`` and ``u`` on ``(0,1)^2 x [0, h]``;
    ``dv``/``du`` hold time derivatives when they are available in closed form.
    """

    times: np.ndarray
    v: list[SlabField3D]
    p: list[PeriodicField2D]
    u: list[SlabField3D]
    du: list[SlabField3D]
    dv: list[SlabField3D] | None
    eps: float
    h: float


@dataclass(frozen=True, eq=False)
class Residuals:
    r_f: list[SlabField3D]
    r_f_norm: np.ndarray
    r_b: list[np.ndarray]
    r_b_norm: np.ndarray


# --------------------------------------------------------------------------
# limit fields
# --------------------------------------------------------------------------

def limit_pressure(traj: ReducedTrajectory, regime: ScalingRegime | None = None,
                   materials: MaterialParams | None = None) -> list[PeriodicField2D]:
    """``p = chi rho_s d_tt w3 + C_biharm (Lap')^2 w3`` at every snapshot."""
    regime = traj.regime if regime is None else regime
    materials = traj.materials if materials is None else materials
    return [PeriodicField2D(a) for a in _pressure_array(traj.w, traj.ddw, traj, regime, materials)]


def _pressure_array(w, ddw, traj, regime, materials):
    p = traj.coefficients.C_biharm * spectral_laplacian(w, power=2)
    if regime.chi_tau == 1:
        if ddw is None:
            raise ValueError("critical case needs the second time derivative of w3")
        p = p + materials.rho_s_hat * ddw
    return p


def translational_velocity(f: Sequence[SlabField3D], eta: float,
                           convention: Convention = "consistent") -> np.ndarray:
    """Plate translation velocities ``dt_a`` of shape ``(len(f), 2)``.

    ``dt a_alpha = -int_omega d3 F_alpha(y', 0) dy'`` with the derivative of the
    kernel taken analytically:
    ``d3 F_alpha(y', 0) = (int zeta f_alpha + int f_alpha) / eta``.
    """
    out = np.empty((len(f), 2))
    for i, fi in enumerate(f):
        g = fi.grid
        fa = fi.values[:2]
        d3 = (g.integrate(fa, axis=1, weight=(0.0, 1.0)) + g.integrate(fa, axis=1)) / eta
        out[i] = -forcing_sign(convention) * d3.mean(axis=(-2, -1))
    return out


def translations(dt_a: np.ndarray, times: np.ndarray) -> np.ndarray:
    """``a(t) = int_0^t dt_a`` by the trapezoidal rule."""
    return cumulative_trapezoid(dt_a, np.asarray(times), axis=0, initial=0.0)


def limit_velocity(p: PeriodicField2D, F_alpha: SlabField3D, dt_a: Sequence[float], eta: float) -> SlabField3D:
    """``v_alpha = y3 (y3 + 1) d_alpha p / (2 eta) + F_alpha + (1 + y3) dt_a_alpha``."""
    if p.shape != (F_alpha.n1, F_alpha.n2):
        raise ValueError(f"grid mismatch: pressure {p.shape} vs kernel {(F_alpha.n1, F_alpha.n2)}")
    y = F_alpha.grid.nodes[:, None, None]
    grad = np.stack([spectral_derivative(p.values, 1), spectral_derivative(p.values, 2)])
    poiseuille = (y * (y + 1.0) / (2.0 * eta))[None] * grad[:, None]
    couette = (1.0 + y)[None] * np.asarray(dt_a, float)[:, None, None, None]
    return F_alpha.with_values(poiseuille + F_alpha.values[:2] + couette)


def build_limit(traj: ReducedTrajectory, forcing: ReducedForcing) -> LimitFields:
    """Assemble every limit field of a trajectory computed from ``forcing``."""
    if forcing.times.size != traj.times.size or not np.allclose(forcing.times, traj.times):
        raise ValueError("forcing and trajectory use different time grids")
    eta = traj.materials.eta
    p = limit_pressure(traj)
    dt_a = translational_velocity(forcing.f, eta, forcing.convention)
    a = translations(dt_a, traj.times)
    v = [limit_velocity(pi, Fa, da, eta) for pi, Fa, da in zip(p, forcing.F_alpha, dt_a)]
    return LimitFields(traj.times, p, v, dt_a, a, eta)


def limit_time_derivative(traj: ReducedTrajectory, forcing: ReducedForcing) -> LimitFields | None:
    """Closed-form time derivative of the limit fields for time-independent forcing.

    Returns ``None`` when it is not available (time-dependent forcing or the
    critical inertia case), in which case callers fall back to differencing.
    """
    if forcing.time_dependent or traj.regime.chi_tau == 1:
        return None
    eta = traj.materials.eta
    dp = [PeriodicField2D(a) for a in traj.coefficients.C_biharm * spectral_laplacian(traj.dw, power=2)]
    zero_dt_a = np.zeros((traj.times.size, 2))
    v = [limit_velocity(pi, Fa * 0.0, da, eta) for pi, Fa, da in zip(dp, forcing.F_alpha, zero_dt_a)]
    return LimitFields(traj.times, dp, v, zero_dt_a, zero_dt_a.copy(), eta)


def steady_limit(p: PeriodicField2D, eta: float = 1.0, f: SlabField3D | None = None,
                 m: int = 4, convention: Convention = "consistent") -> LimitFields:
    """Single-snapshot limit data from a prescribed pressure and force.

    Used for residual-scaling studies where the limit fields are held fixed
    while the thickness shrinks.  Without ``f`` the flow is pure Poiseuille.
    """
    from .reduced_solver import forcing_kernels
    if f is None:
        grid = vertical_grid(m, -1.0, 0.0)
        F_alpha = SlabField3D.zeros(grid, p.n1, p.n2, ncomp=2)
        dt_a = np.zeros((1, 2))
    else:
        F_alpha, _ = forcing_kernels(f, eta, convention)
        dt_a = translational_velocity([f], eta, convention)
    v = limit_velocity(p, F_alpha, dt_a[0], eta)
    return LimitFields(np.zeros(1), [p], [v], dt_a, np.zeros((1, 2)), eta)


def lift_fluid(limit: LimitFields, eps: float) -> ApproxSolution:
    """Fluid part of the approximate solution only (no structure fields)."""
    v = [lift_velocity(vi, eps) for vi in limit.v]
    return ApproxSolution(limit.times, v, list(limit.p), [], [], None, eps, float("nan"))


# --------------------------------------------------------------------------
# approximate solution on the physical domain
# --------------------------------------------------------------------------

def lift_velocity(v: SlabField3D, eps: float) -> SlabField3D:
    """``eps^2 (v1, v2, v3)`` on ``[-eps, 0]`` with ``v3`` making the field solenoidal.

    The result lives on an LGL grid one degree richer than ``v``, so the
    cumulative integral defining the vertical component is represented exactly.
    """
    src = v.grid
    fine = vertical_grid(src.m + 1, -eps, 0.0)
    y_fine = fine.nodes / eps
    horiz = src.evaluate(v.values, y_fine, axis=1)
    div = spectral_derivative(v.values[0], 1) + spectral_derivative(v.values[1], 2)
    # int_{-1}^{y} div dxi on the reference slab, sampled at the fine nodes
    cum = _cumulative_at(src, div, y_fine)
    vals = np.empty((3,) + horiz.shape[1:])
    vals[:2] = eps ** 2 * horiz
    vals[2] = -eps ** 3 * cum
    return SlabField3D(vals, fine, "fluid")


def _cumulative_at(grid: VerticalGrid, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Exact ``int_{a}^{z} f`` of the interpolant of ``values`` at arbitrary ``points``."""
    gx, gw = np.polynomial.legendre.leggauss(grid.m // 2 + 2)
    out = np.zeros((points.size,) + values.shape[1:])
    for i, z in enumerate(points):
        half = 0.5 * (z - grid.a)
        if half == 0.0:
            continue
        zq = grid.a + (gx + 1.0) * half
        row = (gw * half) @ grid.interp_matrix(zq)
        out[i] = np.tensordot(row, values, axes=([0], [0]))
    return out


def _plate_displacement(w: np.ndarray, a: Sequence[float], regime: ScalingRegime, m: int) -> SlabField3D:
    """``h^{kappa-3} (h^{-gamma} a_alpha - (x3 - h/2) d_alpha w3, w3)`` on ``[0, h]``."""
    h = regime.h
    grid = vertical_grid(m, 0.0, h)
    s = h ** (float(regime.kappa) - 3.0)
    z = (grid.nodes - h / 2)[:, None, None]
    gw = [spectral_derivative(w, 1), spectral_derivative(w, 2)]
    vals = np.empty((3, grid.size) + w.shape)
    for al in range(2):
        vals[al] = s * (h ** (-float(regime.gamma)) * a[al] - z * gw[al][None])
    vals[2] = s * w[None]
    return SlabField3D(vals, grid, "structure")


def assemble_approx(limit: LimitFields, traj: ReducedTrajectory, regime: ScalingRegime | None = None,
                    dlimit: LimitFields | None = None, structure_m: int = 2) -> ApproxSolution:
    """Lift the limit fields to the physical domain of thickness ``(eps, h)``.

    ``regime`` may differ from the trajectory's in ``h`` only (the limit data
    do not depend on ``h``).  ``dlimit`` is the closed-form time derivative
    from :func:`limit_time_derivative`, if available.
    """
    regime = traj.regime if regime is None else regime
    if (regime.gamma, regime.kappa) != (traj.regime.gamma, traj.regime.kappa):
        raise ValueError("regime exponents differ from the trajectory's")
    if limit.times.size != traj.times.size:
        raise ValueError("limit fields and trajectory use different time grids")
    eps = regime.eps
    v = [lift_velocity(vi, eps) for vi in limit.v]
    dv = None if dlimit is None else [lift_velocity(vi, eps) for vi in dlimit.v]
    u = [_plate_displacement(traj.w[i], limit.a[i], regime, structure_m) for i in range(traj.times.size)]
    du = [_plate_displacement(traj.dw[i], limit.dt_a[i], regime, structure_m) for i in range(traj.times.size)]
    return ApproxSolution(limit.times, v, list(limit.p), u, du, dv, eps, regime.h)


# --------------------------------------------------------------------------
# residuals
# --------------------------------------------------------------------------

def velocity_divergence(v: SlabField3D) -> np.ndarray:
    """Pointwise ``div v`` at the slab nodes (spectral horizontally, exact vertically)."""
    return (spectral_derivative(v.values[0], 1) + spectral_derivative(v.values[1], 2)
            + v.grid.derivative(v.values[2], axis=0))


def _time_derivative(fields: list[SlabField3D], times: np.ndarray) -> list[SlabField3D]:
    if len(fields) < 3:
        raise ValueError("differencing needs at least 3 time samples")
    arr = np.stack([f.values for f in fields])
    d = np.gradient(arr, times, axis=0, edge_order=2)
    return [fields[0].with_values(x) for x in d]


def fluid_residual(approx: ApproxSolution, regime: ScalingRegime, materials: MaterialParams,
                   steady: bool = False) -> tuple[list[SlabField3D], np.ndarray]:
    """``r_f = rho_f T^{-1} d_t v - eta Lap' v - eta d_33 v_3 e_3`` and its L2 norm per time.

    ``steady=True`` drops the inertial term (fixed-in-time limit data).
    """
    eta, rho_f = materials.eta, materials.rho_f
    if steady:
        dv = None
    elif approx.dv is not None:
        dv = approx.dv
    else:
        dv = _time_derivative(approx.v, approx.times)
    Tinv = 1.0 / regime.T_scale
    out, norms = [], np.empty(len(approx.v))
    for i, v in enumerate(approx.v):
        r = -eta * spectral_laplacian(v.values)
        r[2] -= eta * v.grid.derivative(v.values[2], axis=0, order=2)
        if dv is not None:
            r += rho_f * Tinv * dv[i].values
        ri = v.with_values(r)
        out.append(ri)
        norms[i] = ri.norm()
    return out, norms


def boundary_residual(limit: LimitFields, regime: ScalingRegime, eta: float | None = None) -> list[np.ndarray]:
    """Interface residual ``r_b`` on omega, shape ``(3, n1, n2)`` per time."""
    eta = limit.eta if eta is None else eta
    eps = regime.eps
    out = []
    for v in limit.v:
        g = v.grid
        d3 = g.derivative(v.values, axis=1)[:, -1]
        div_h = spectral_derivative(v.values[0], 1) + spectral_derivative(v.values[1], 2)
        grad_div = [spectral_derivative(div_h, 1), spectral_derivative(div_h, 2)]
        r = np.empty((3,) + v.values.shape[2:])
        for al in range(2):
            r[al] = eta * (eps * d3[al] - eps ** 3 * g.integrate(grad_div[al], axis=0))
        r[2] = -2.0 * eta * eps ** 2 * div_h[-1]
        out.append(r)
    return out


def interface_shear_mean(limit: LimitFields) -> np.ndarray:
    """``int_omega d3 v_alpha(y', 0)`` per time, shape ``(N+1, 2)``."""
    return np.array([v.grid.derivative(v.values, axis=1)[:, -1].mean(axis=(-2, -1)) for v in limit.v])


def residuals(approx: ApproxSolution, limit: LimitFields, regime: ScalingRegime,
              materials: MaterialParams, steady: bool = False) -> Residuals:
    r_f, r_f_norm = fluid_residual(approx, regime, materials, steady=steady)
    r_b = boundary_residual(limit, regime, materials.eta)
    r_b_norm = np.array([np.sqrt(np.sum(np.mean(r ** 2, axis=(-2, -1)))) for r in r_b])
    return Residuals(r_f, r_f_norm, r_b, r_b_norm)


@dataclass(frozen=True, eq=False)
class StructureTestField:
    """Test displacement ``psi`` on the structure slab and its time derivative per time."""

    psi: list[SlabField3D]
    dpsi: list[SlabField3D]


def _slab_integral(f: np.ndarray, grid: VerticalGrid) -> float:
    return float(np.mean(grid.integrate(f, axis=0)))


def structure_residual_action(approx: ApproxSolution, test: StructureTestField, regime: ScalingRegime,
                              materials: MaterialParams) -> float:
    """Action of the structure residual on ``psi`` integrated over the time grid.

    ``-rho_s^h T^{-1} int int d_t u . d_t psi
      + T int int [lam^2/(2 mu + lam) div u div'(psi_1, psi_2) + lam div u d_3 psi_3]``
    """
    if len(test.psi) != len(approx.u) or len(test.dpsi) != len(approx.u):
        raise ValueError("test field must be sampled at every approximate-solution time")
    mu, lam, rho_s = regime.lame(materials)
    T = regime.T_scale
    integrand = np.empty(len(approx.u))
    for i, (u, du, psi, dpsi) in enumerate(zip(approx.u, approx.du, test.psi, test.dpsi)):
        g = psi.grid
        # evaluate the (affine-in-x3) approximate displacement on the test grid
        u_vals = u.grid.evaluate(u.values, g.nodes, axis=1)
        du_vals = du.grid.evaluate(du.values, g.nodes, axis=1)
        inertial = _slab_integral(np.sum(du_vals * dpsi.values, axis=0), g)
        div_u = (spectral_derivative(u_vals[0], 1) + spectral_derivative(u_vals[1], 2)
                 + g.derivative(u_vals[2], axis=0))
        div_psi_h = spectral_derivative(psi.values[0], 1) + spectral_derivative(psi.values[1], 2)
        d3psi3 = g.derivative(psi.values[2], axis=0)
        coupling = _slab_integral(lam ** 2 / (2 * mu + lam) * div_u * div_psi_h + lam * div_u * d3psi3, g)
        integrand[i] = -rho_s / T * inertial + T * coupling
    if integrand.size == 1:
        return float(integrand[0])
    return float(trapezoid(integrand, approx.times))
