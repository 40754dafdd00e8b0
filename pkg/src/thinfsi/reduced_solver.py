"""The linear sixth-order thin-film equation for the plate deflection.

Per Fourier mode ``k`` the equation reads

    C_inertia |k|^2 w'' + w' + C_plate |k|^6 w = F_k,

with zero initial data.  Forcing is piecewise constant on each step, and
each step is advanced with the exact solution of this constant-coefficient
mode ODE, so the update is exact whenever ``F`` is constant in time.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fields import PeriodicField2D, SlabField3D, VerticalGrid, wavenumbers
from .forces import VolumeForce, reference_grid
from .params import (Convention, MaterialParams, PlateCoefficients, ScalingRegime,
                     forcing_sign, rescaled_coefficients)


# --------------------------------------------------------------------------
# forcing
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ReducedForcing:
    """Kernels ``F_alpha`` on the reference fluid slab and the plate load ``F``."""

    times: np.ndarray
    f: list[SlabField3D]
    F_alpha: list[SlabField3D]
    F: list[PeriodicField2D]
    eta: float
    convention: str
    time_dependent: bool


def forcing_kernels(f: SlabField3D, eta: float, convention: Convention = "consistent") -> tuple[SlabField3D, PeriodicField2D]:
    """``F_alpha`` (two components) and ``F`` for one force snapshot.

    ``F_alpha(y3) = (y3+1)/eta int_{-1}^0 zeta f dzeta
                    + 1/eta int_{-1}^{y3} (y3 - zeta) f dzeta``
    multiplied by the convention's sign, and
    ``F = -int_{-1}^0 (d1 F_1 + d2 F_2) dy3``.
    """
    if f.domain != "fluid":
        raise ValueError("forcing must live on the fluid slab")
    if f.ncomp < 2:
        raise ValueError("force needs at least the two horizontal components")
    g = f.grid
    fa = f.values[:2]
    y = g.nodes[None, :, None, None]
    first_moment = g.integrate(fa, axis=1, weight=(0.0, 1.0))[:, None]
    cum0 = g.cumulative(fa, axis=1)
    cum1 = g.cumulative(fa, axis=1, weight=(0.0, 1.0))
    kern = ((y + 1.0) * first_moment + y * cum0 - cum1) / eta
    kern *= forcing_sign(convention)
    F_alpha = SlabField3D(kern, g, "fluid")
    div = F_alpha.component(0).horizontal_derivative(1).values[0] + \
        F_alpha.component(1).horizontal_derivative(2).values[0]
    F = PeriodicField2D(-g.integrate(div, axis=0))
    return F_alpha, F


def build_forcing(force: VolumeForce, eta: float, times: Sequence[float], n: int, m: int = 8,
                  convention: Convention = "consistent", grid: VerticalGrid | None = None) -> ReducedForcing:
    """Sample ``force`` and build ``F_alpha`` and ``F`` at every time in ``times``."""
    times = np.asarray(times, dtype=float)
    grid = reference_grid(m) if grid is None else grid
    if not force.time_dependent:
        f0 = force.sample(grid, n, n, float(times[0]) if times.size else 0.0)
        Fa0, F0 = forcing_kernels(f0, eta, convention)
        k = times.size
        return ReducedForcing(times, [f0] * k, [Fa0] * k, [F0] * k, eta, convention, False)
    fs, Fas, Fs = [], [], []
    for t in times:
        ft = force.sample(grid, n, n, float(t))
        Fa, F = forcing_kernels(ft, eta, convention)
        fs.append(ft)
        Fas.append(Fa)
        Fs.append(F)
    return ReducedForcing(times, fs, Fas, Fs, eta, convention, True)


# --------------------------------------------------------------------------
# trajectory
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ReducedTrajectory:
    """Snapshots of ``w3`` (and its time derivatives) on a time grid.

    ``w``, ``dw`` and ``ddw`` are arrays of shape ``(N+1, n1, n2)``; ``ddw`` is
    ``None`` unless the rotational inertia term is active.
    """

    times: np.ndarray
    w: np.ndarray
    dw: np.ndarray
    ddw: np.ndarray | None
    F: np.ndarray
    coefficients: PlateCoefficients
    regime: ScalingRegime
    materials: MaterialParams
    convention: str = "consistent"
    forcing_constant: bool = True

    def __post_init__(self):
        for arr in (self.w, self.dw, self.F) + ((self.ddw,) if self.ddw is not None else ()):
            arr.setflags(write=False)

    @property
    def nsteps(self) -> int:
        return self.times.size - 1

    def w_field(self, i: int) -> PeriodicField2D:
        return PeriodicField2D(self.w[i])

    def dw_field(self, i: int) -> PeriodicField2D:
        return PeriodicField2D(self.dw[i])

    def ddw_field(self, i: int) -> PeriodicField2D:
        if self.ddw is None:
            raise ValueError("second time derivative is only tracked when chi_tau = 1")
        return PeriodicField2D(self.ddw[i])

    def F_field(self, i: int) -> PeriodicField2D:
        return PeriodicField2D(self.F[i])


def _stack_forcing(F, times: np.ndarray) -> tuple[np.ndarray, bool]:
    if isinstance(F, ReducedForcing):
        return np.stack([f.values for f in F.F]), not F.time_dependent
    if isinstance(F, PeriodicField2D):
        return np.broadcast_to(F.values, (times.size,) + F.shape).copy(), True
    arr = np.stack([f.values if isinstance(f, PeriodicField2D) else np.asarray(f, float) for f in F])
    if arr.shape[0] != times.size:
        raise ValueError(f"{arr.shape[0]} forcing samples for {times.size} times")
    constant = bool(np.all(arr == arr[:1]))
    return arr, constant


def _phi(r1, r2, dt):
    """``phi1 = (e^{r1 dt} - e^{r2 dt}) / (r1 - r2)`` evaluated without cancellation."""
    z = (r1 - r2) * dt
    small = np.abs(z) < 1e-8
    safe = np.where(small, 1.0, z)
    exprel = np.where(small, 1.0 + z / 2 + z * z / 6, np.expm1(safe) / safe)
    return np.exp(r2 * dt) * dt * exprel


def solve_w3(F, regime: ScalingRegime, materials: MaterialParams, times: Sequence[float],
             scheme: str = "exponential", convention: Convention = "consistent") -> ReducedTrajectory:
    """Integrate the reduced equation from zero data over ``times``.

    ``F`` is a :class:`ReducedForcing`, one :class:`PeriodicField2D` (constant
    in time) or a sequence of fields/arrays aligned with ``times``.  On each
    step the forcing is frozen at the average of its endpoint samples.
    ``scheme`` is ``"exponential"`` (exact per-mode update) or
    ``"implicit-euler"`` (first order, for like-for-like comparison with
    implicit time integrators).
    """
    if not regime.reduced_valid:
        raise ValueError(f"tau = {regime.tau} > -1: the reduced model does not apply")
    if isinstance(F, ReducedForcing):
        convention = F.convention
    coeffs = rescaled_coefficients(regime, materials, convention)
    if coeffs.C_plate <= 0:
        raise ValueError("C_plate must be positive")
    if scheme not in ("exponential", "implicit-euler"):
        raise ValueError(f"unknown scheme {scheme!r}")
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 1 or np.any(np.diff(times) <= 0):
        raise ValueError("time grid must be strictly increasing")
    Fn, constant = _stack_forcing(F, times)
    n1, n2 = Fn.shape[1:]
    k1, k2 = wavenumbers(n1, n2)
    K2 = (k1 ** 2 + k2[:, : n2 // 2 + 1] ** 2)
    lam = coeffs.C_plate * K2 ** 3
    inertia = coeffs.C_inertia * K2
    chi = regime.chi_tau == 1 and coeffs.C_inertia > 0

    Fhat = np.fft.rfft2(Fn, axes=(-2, -1))
    N = times.size
    w = np.zeros((N,) + Fhat.shape[1:], complex)
    dw = np.zeros_like(w)
    ddw = np.zeros_like(w) if chi else None
    if chi:
        nz = inertia > 0
        a = np.where(nz, inertia, 1.0)
        sq = np.sqrt((1.0 - 4.0 * a * lam).astype(complex))
        r1 = (-1.0 - sq) / (2.0 * a)
        r2 = np.where(nz, 2.0 * lam / (-1.0 - sq), 0.0)
        wp_den = np.where(lam > 0, lam, 1.0)
    dw[0] = Fhat[0] - lam * w[0]
    if chi:
        dw[0] = np.where(nz, 0.0, Fhat[0])

    for n in range(N - 1):
        dt = times[n + 1] - times[n]
        Fs = 0.5 * (Fhat[n] + Fhat[n + 1])
        if not chi:
            if scheme == "exponential":
                decay = np.exp(-lam * dt)
                gain = np.where(lam > 0, -np.expm1(-lam * dt) / np.where(lam > 0, lam, 1.0), dt)
                w[n + 1] = decay * w[n] + gain * Fs
            else:
                w[n + 1] = (w[n] + dt * Fs) / (1.0 + dt * lam)
            dw[n + 1] = Fhat[n + 1] - lam * w[n + 1]
            continue
        wp = np.where(nz, Fs / wp_den, 0.0)
        x0, v0 = w[n] - wp, dw[n]
        if scheme == "exponential":
            p1 = _phi(r1, r2, dt)
            e2 = np.exp(r2 * dt)
            phi0 = (e2 - r2 * p1).real
            dphi1 = (e2 + r1 * p1).real
            p1r = p1.real
            r12 = (r1 * r2).real
            xn = phi0 * x0 + p1r * v0
            vn = -r12 * p1r * x0 + dphi1 * v0
        else:
            # (1/dt) [x_{n+1} - x_n] = v_{n+1};  a (v_{n+1} - v_n)/dt = -v_{n+1} - lam x_{n+1}
            det = a + dt + lam * dt * dt
            vn = (a * v0 - lam * dt * x0) / det
            xn = x0 + dt * vn
        w[n + 1] = np.where(nz, xn + wp, w[n] + dt * Fs)
        dw[n + 1] = np.where(nz, vn, Fhat[n + 1])

    if chi:
        for n in range(N):
            ddw[n] = np.where(nz, (Fhat[n] - dw[n] - lam * w[n]) / a, 0.0)

    back = lambda arr: np.fft.irfft2(arr, s=(n1, n2), axes=(-2, -1))
    return ReducedTrajectory(
        times=times, w=back(w), dw=back(dw), ddw=None if ddw is None else back(ddw), F=Fn,
        coefficients=coeffs, regime=regime, materials=materials, convention=convention,
        forcing_constant=constant)


def reynolds_residual(traj: ReducedTrajectory, p: Sequence[PeriodicField2D],
                      F: Sequence[PeriodicField2D] | None = None) -> np.ndarray:
    """L2(omega) norm of ``dw/dt - Lap' p / (12 eta) - F`` at every snapshot."""
    if len(p) != traj.times.size:
        raise ValueError(f"{len(p)} pressure snapshots for {traj.times.size} times")
    eta = traj.materials.eta
    out = np.empty(traj.times.size)
    for i, pi in enumerate(p):
        if pi.shape != traj.w.shape[1:]:
            raise ValueError(f"grid mismatch: pressure {pi.shape} vs trajectory {traj.w.shape[1:]}")
        Fi = traj.F[i] if F is None else F[i].values
        r = traj.dw[i] - pi.laplacian().values / (12.0 * eta) - Fi
        out[i] = np.sqrt(np.mean(r ** 2))
    return out


def mode_energy(w: np.ndarray) -> float:
    """``sum_k |k|^6 |w_k|^2`` (normalised), the quadratic form dissipated by the flow."""
    n1, n2 = w.shape
    k1, k2 = wavenumbers(n1, n2)
    K2 = k1 ** 2 + k2 ** 2
    c = np.fft.fft2(w) / (n1 * n2)
    return float(np.sum(K2 ** 3 * np.abs(c) ** 2))
