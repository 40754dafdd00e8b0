"""Monolithic solver for the linear Stokes / elastodynamics problem on the thin domain.

Discretization
--------------
Horizontally the unknowns are expanded in Fourier modes ``exp(i k . x')`` of
the periodic unit square, which decouples the linear problem mode by mode.
Vertically each mode is discretized with continuous piecewise-quadratic
velocity/displacement and piecewise-linear pressure elements on ``m_f`` fluid
layers over ``[-eps, 0]`` and ``m_s`` structure layers over ``[0, h]``.  The
interface node is shared, so the fluid velocity and the structure velocity
are one unknown there; the stress balance is then natural in the weak form.

Time stepping
-------------
Implicit Euler in rescaled time ``t`` (physical time ``T_scale * t``).  The
velocity unknown ``W`` holds the fluid velocity on fluid nodes and the
structure velocity ``d u / d(physical time)`` on structure nodes; the
displacement is updated by ``u <- u + T_scale * dt * W``.  Multiplying the
momentum balance by ``T_scale`` gives, for every mode, the Hermitian system

    [ rho/dt M + T A_f + T^2 dt K_s   -T B^H ] [W]   [ rho/dt M W_n + T b - T K_s u_n ]
    [ -T B                             0     ] [p] = [ 0                              ]

which is factorized once and reused for every step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .analysis import EnergyTerms, SampledFields
from .fields import grid_points
from .forces import VolumeForce
from .params import MaterialParams, ScalingRegime

# Gauss rule used for all element integrals (exact for products of quadratics)
_GX, _GW = np.polynomial.legendre.leggauss(4)


def _p2_basis(xi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Quadratic Lagrange basis on ``[-1, 1]`` with nodes ``-1, 0, 1`` and its derivative."""
    N = np.stack([0.5 * xi * (xi - 1.0), 1.0 - xi ** 2, 0.5 * xi * (xi + 1.0)], axis=-1)
    dN = np.stack([xi - 0.5, -2.0 * xi, xi + 0.5], axis=-1)
    return N, dN


def _p1_basis(xi: np.ndarray) -> np.ndarray:
    return np.stack([0.5 * (1.0 - xi), 0.5 * (1.0 + xi)], axis=-1)


class OracleError(RuntimeError):
    """Assembly or solve failure of the monolithic system."""


# --------------------------------------------------------------------------
# mesh and state
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FsiMesh:
    """``n x n`` periodic horizontal grid, ``m_f`` fluid and ``m_s`` structure layers."""

    n: int
    m_f: int
    m_s: int
    eps: float
    h: float

    def __post_init__(self):
        if self.n < 4 or self.n % 2:
            raise ValueError(f"horizontal grid size must be even and >= 4, got {self.n}")
        if self.m_f < 1 or self.m_s < 1:
            raise ValueError("need at least one fluid and one structure layer")
        if not (self.eps > 0 and self.h > 0):
            raise ValueError("layer thicknesses must be positive")

    @classmethod
    def from_regime(cls, regime: ScalingRegime, n: int = 16, m_f: int = 6, m_s: int = 6) -> "FsiMesh":
        return cls(n, m_f, m_s, regime.eps, regime.h)

    @property
    def interface(self) -> int:
        """Global index of the shared interface node."""
        return 2 * self.m_f

    @property
    def n_nodes(self) -> int:
        return 2 * (self.m_f + self.m_s) + 1

    @property
    def nodes(self) -> np.ndarray:
        zf = np.linspace(-self.eps, 0.0, 2 * self.m_f + 1)
        zs = np.linspace(0.0, self.h, 2 * self.m_s + 1)
        return np.concatenate([zf, zs[1:]])

    @property
    def pressure_nodes(self) -> np.ndarray:
        return np.linspace(-self.eps, 0.0, self.m_f + 1)

    def elements(self) -> list[tuple[int, float, float, str]]:
        """``(first node, z_lo, z_hi, kind)`` for every vertical element, bottom to top."""
        z = self.nodes
        out = []
        for e in range(self.m_f + self.m_s):
            kind = "fluid" if e < self.m_f else "structure"
            out.append((2 * e, z[2 * e], z[2 * e + 2], kind))
        return out

    def evaluate(self, nodal: np.ndarray, zq: np.ndarray) -> np.ndarray:
        """Piecewise-quadratic interpolant of ``nodal`` (node axis 0) at points ``zq``."""
        z = self.nodes
        ne = self.m_f + self.m_s
        edges = z[::2]
        idx = np.clip(np.searchsorted(edges, zq, side="right") - 1, 0, ne - 1)
        lo, hi = edges[idx], edges[idx + 1]
        xi = 2.0 * (zq - lo) / (hi - lo) - 1.0
        N, _ = _p2_basis(xi)
        out = np.zeros((zq.size,) + nodal.shape[1:], dtype=nodal.dtype)
        for a in range(3):
            out += N[:, a].reshape((-1,) + (1,) * (nodal.ndim - 1)) * nodal[2 * idx + a]
        return out

    def evaluate_pressure(self, nodal: np.ndarray, zq: np.ndarray) -> np.ndarray:
        zp = self.pressure_nodes
        idx = np.clip(np.searchsorted(zp, zq, side="right") - 1, 0, self.m_f - 1)
        xi = 2.0 * (zq - zp[idx]) / (zp[idx + 1] - zp[idx]) - 1.0
        N = _p1_basis(xi)
        shape = (-1,) + (1,) * (nodal.ndim - 1)
        return N[:, 0].reshape(shape) * nodal[idx] + N[:, 1].reshape(shape) * nodal[idx + 1]


def mode_index(n: int) -> np.ndarray:
    """Integer wave numbers ``(j1, j2)`` of every fft2 slot on an ``n x n`` grid."""
    j = np.rint(np.fft.fftfreq(n, 1.0 / n)).astype(int)
    J1, J2 = np.meshgrid(j, j, indexing="ij")
    return np.stack([J1.ravel(), J2.ravel()], axis=1)


@dataclass(frozen=True, eq=False)
class FsiState:
    """Discrete state in Fourier-mode form.

    ``vel[k, node, comp]`` is the fluid velocity on fluid nodes and the
    structure velocity on structure nodes (one shared value at the
    interface); ``disp`` is the displacement, zero below the interface;
    ``p[k, node]`` the pressure; ``slots`` the fft2 slots of the active modes.
    Time ``t`` is rescaled time.
    """

    t: float
    slots: np.ndarray
    vel: np.ndarray
    disp: np.ndarray
    p: np.ndarray
    mesh: FsiMesh

    @property
    def v(self) -> np.ndarray:
        """Fluid velocity modes, nodes ``0 .. interface``."""
        return self.vel[:, : self.mesh.interface + 1]

    @property
    def udot(self) -> np.ndarray:
        """Structure velocity modes, nodes ``interface .. top``."""
        return self.vel[:, self.mesh.interface:]

    @property
    def u(self) -> np.ndarray:
        return self.disp[:, self.mesh.interface:]

    def _physical(self, modes: np.ndarray) -> np.ndarray:
        """Real nodal values on the ``n x n`` grid from mode coefficients ``(K, ...)``."""
        n = self.mesh.n
        full = np.zeros((n * n,) + modes.shape[1:], complex)
        full[self.slots] = modes
        full = full.reshape((n, n) + modes.shape[1:])
        vals = np.fft.ifft2(full, axes=(0, 1)).real * (n * n)
        return np.moveaxis(vals, (0, 1), (-2, -1))

    def physical_velocity(self, zq: np.ndarray | None = None) -> np.ndarray:
        """Velocity ``(3, nz, n, n)`` at mesh nodes or at points ``zq``."""
        modes = self.vel if zq is None else np.stack([self.mesh.evaluate(c, zq) for c in self.vel])
        return np.moveaxis(self._physical(modes), 1, 0)

    def physical_displacement(self, zq: np.ndarray | None = None) -> np.ndarray:
        modes = self.disp if zq is None else np.stack([self.mesh.evaluate(c, zq) for c in self.disp])
        return np.moveaxis(self._physical(modes), 1, 0)

    def physical_pressure(self, zq: np.ndarray | None = None) -> np.ndarray:
        modes = self.p if zq is None else np.stack([self.mesh.evaluate_pressure(c, zq) for c in self.p])
        return self._physical(modes)

    def interface_means(self) -> tuple[float, np.ndarray, float]:
        """``int_omega u3``, ``int_omega u_alpha`` at the interface and ``||u3||_omega``."""
        zero = np.flatnonzero(self.slots == 0)
        ui = self.disp[:, self.mesh.interface]
        means = ui[zero[0]].real if zero.size else np.zeros(3)
        norm3 = float(np.sqrt(np.sum(np.abs(ui[:, 2]) ** 2)))
        return float(means[2]), np.asarray(means[:2], float), norm3


# --------------------------------------------------------------------------
# assembly
# --------------------------------------------------------------------------

def _strain_rows(N, dN, J, k1, k2) -> np.ndarray:
    """Voigt strain (engineering shears) at quadrature points: shape ``(nq, 6, 9)``.

    Local dofs are ordered node-major: ``3 * a + comp``.
    """
    nq = N.shape[0]
    B = np.zeros((nq, 6, 9), complex)
    d = dN / J
    for a in range(3):
        c = 3 * a
        B[:, 0, c] = 1j * k1 * N[:, a]
        B[:, 1, c + 1] = 1j * k2 * N[:, a]
        B[:, 2, c + 2] = d[:, a]
        B[:, 3, c + 1] = d[:, a]
        B[:, 3, c + 2] = 1j * k2 * N[:, a]
        B[:, 4, c] = d[:, a]
        B[:, 4, c + 2] = 1j * k1 * N[:, a]
        B[:, 5, c] = 1j * k2 * N[:, a]
        B[:, 5, c + 1] = 1j * k1 * N[:, a]
    return B


def _gradient_rows(N, dN, J, k1, k2) -> np.ndarray:
    """Full gradient ``d_j v_i`` at quadrature points: shape ``(nq, 9, 9)``."""
    nq = N.shape[0]
    G = np.zeros((nq, 9, 9), complex)
    d = dN / J
    for a in range(3):
        for i in range(3):
            G[:, 3 * i + 0, 3 * a + i] = 1j * k1 * N[:, a]
            G[:, 3 * i + 1, 3 * a + i] = 1j * k2 * N[:, a]
            G[:, 3 * i + 2, 3 * a + i] = d[:, a]
    return G


def _divergence_rows(N, dN, J, k1, k2) -> np.ndarray:
    D = np.zeros((N.shape[0], 9), complex)
    d = dN / J
    for a in range(3):
        D[:, 3 * a] = 1j * k1 * N[:, a]
        D[:, 3 * a + 1] = 1j * k2 * N[:, a]
        D[:, 3 * a + 2] = d[:, a]
    return D


def _mass_rows(N) -> np.ndarray:
    """``v_i`` at quadrature points: shape ``(nq, 3, 9)``."""
    R = np.zeros((N.shape[0], 3, 9))
    for a in range(3):
        for i in range(3):
            R[:, i, 3 * a + i] = N[:, a]
    return R


@dataclass(frozen=True, eq=False)
class ModeMatrices:
    """Hermitian matrices of one Fourier mode on the full node set (``3 * n_nodes`` dofs)."""

    k: tuple[float, float]
    M_f: np.ndarray
    M_s: np.ndarray
    A_f: np.ndarray
    G_f: np.ndarray
    K_s: np.ndarray
    B: np.ndarray
    load: np.ndarray


def assemble_mode(mesh: FsiMesh, k1: float, k2: float, mu: float, lam: float, eta: float) -> ModeMatrices:
    """Element matrices of mode ``(k1, k2)`` with unit densities.

    ``load`` maps vertical samples of a force at the element quadrature points
    (shape ``(n_elem * nq, 3)``) to the load vector.
    """
    nd = 3 * mesh.n_nodes
    npr = mesh.m_f + 1
    M_f = np.zeros((nd, nd))
    M_s = np.zeros((nd, nd))
    A_f = np.zeros((nd, nd), complex)
    G_f = np.zeros((nd, nd), complex)
    K_s = np.zeros((nd, nd), complex)
    B = np.zeros((npr, nd), complex)
    elems = mesh.elements()
    nq = _GX.size
    load = np.zeros((nd, mesh.m_f * nq * 3))
    N, dN = _p2_basis(_GX)
    Np = _p1_basis(_GX)
    C_f = np.diag([2 * eta] * 3 + [eta] * 3)
    C_s = np.diag([2 * mu] * 3 + [mu] * 3)
    C_s[:3, :3] += lam
    for e, (g0, lo, hi, kind) in enumerate(elems):
        J = 0.5 * (hi - lo)
        w = _GW * J
        sl = slice(3 * g0, 3 * g0 + 9)
        R = _mass_rows(N)
        mass = np.einsum("q,qia,qib->ab", w, R, R)
        S = _strain_rows(N, dN, J, k1, k2)
        if kind == "fluid":
            M_f[sl, sl] += mass
            A_f[sl, sl] += np.einsum("q,qia,ij,qjb->ab", w, S.conj(), C_f, S)
            Gr = _gradient_rows(N, dN, J, k1, k2)
            G_f[sl, sl] += np.einsum("q,qia,qib->ab", w, Gr.conj(), Gr)
            D = _divergence_rows(N, dN, J, k1, k2)
            B[e: e + 2, sl] += np.einsum("q,qr,qa->ra", w, Np, D)
            for q in range(nq):
                col = 3 * (e * nq + q)
                load[sl, col: col + 3] += w[q] * R[q].T
        else:
            M_s[sl, sl] += mass
            K_s[sl, sl] += np.einsum("q,qia,ij,qjb->ab", w, S.conj(), C_s, S)
    return ModeMatrices((k1, k2), M_f, M_s, A_f, G_f, K_s, B, load)


def quadrature_points(mesh: FsiMesh) -> np.ndarray:
    """Vertical quadrature points of every fluid element, bottom to top."""
    pts = []
    for g0, lo, hi, kind in mesh.elements():
        if kind == "fluid":
            pts.append(0.5 * (lo + hi) + 0.5 * (hi - lo) * _GX)
    return np.concatenate(pts)


@dataclass(eq=False)
class FsiOperators:
    """Per-mode matrices and their factorizations for one mesh and step size."""

    mesh: FsiMesh
    regime: ScalingRegime
    materials: MaterialParams
    dt: float
    slots: np.ndarray
    modes: list[ModeMatrices]
    factors: list = field(repr=False)
    free: np.ndarray = field(repr=False)
    systems: list = field(repr=False, default_factory=list)
    solve_tol: float = 1e-9

    @property
    def rho_s(self) -> float:
        return self.regime.lame(self.materials)[2]

    def energy_parts(self, state: FsiState) -> tuple[float, float, float]:
        """Kinetic fluid, kinetic structure and elastic energy (physical units)."""
        kf = ks = el = 0.0
        for i, mm in enumerate(self.modes):
            x = state.vel[i].ravel()
            u = state.disp[i].ravel()
            kf += 0.5 * self.materials.rho_f * float(np.real(x.conj() @ mm.M_f @ x))
            ks += 0.5 * self.rho_s * float(np.real(x.conj() @ mm.M_s @ x))
            el += 0.5 * float(np.real(u.conj() @ mm.K_s @ u))
        return kf, ks, el

    def viscous_rates(self, state: FsiState) -> tuple[float, float]:
        """``a_f(v, v) = 2 eta int |sym grad v|^2`` and ``eta/2 int |grad v|^2``."""
        a = g = 0.0
        for i, mm in enumerate(self.modes):
            x = state.vel[i].ravel()
            a += float(np.real(x.conj() @ mm.A_f @ x))
            g += float(np.real(x.conj() @ mm.G_f @ x))
        return a, 0.5 * self.materials.eta * g

    def divergence_residual(self, state: FsiState) -> float:
        return float(max((np.max(np.abs(mm.B @ state.vel[i].ravel()), initial=0.0)
                          for i, mm in enumerate(self.modes)), default=0.0))


def active_slots(force: VolumeForce, mesh: FsiMesh, times=(0.0, 1.0), tol: float = 1e-13) -> np.ndarray:
    """fft2 slots carrying a nonzero force coefficient at any of ``times``."""
    zq = quadrature_points(mesh)
    mask = np.zeros(mesh.n * mesh.n, bool)
    for t in times:
        fh = _force_modes(force, mesh, zq, t)
        mag = np.max(np.abs(fh), axis=(1, 2))
        scale = max(float(np.max(mag, initial=0.0)), 1e-300)
        mask |= mag > tol * scale
    return np.flatnonzero(mask)


def _force_modes(force: VolumeForce, mesh: FsiMesh, zq: np.ndarray, t: float) -> np.ndarray:
    """Normalised fft2 coefficients of the physical force: shape ``(n*n, nq_total, 3)``."""
    n = mesh.n
    y1, y2 = grid_points(n, n)
    comps = force.physical(y1[None], y2[None], zq[:, None, None], t, mesh.eps)
    arr = np.stack(comps, axis=-1)  # (nz, n, n, 3)
    c = np.fft.fft2(arr, axes=(1, 2)) / (n * n)
    return np.moveaxis(c, (1, 2), (0, 1)).reshape(n * n, zq.size, 3)


def assemble(mesh: FsiMesh, regime: ScalingRegime, materials: MaterialParams, dt: float,
             slots: np.ndarray) -> FsiOperators:
    """Build and factorize the per-mode systems for the modes in ``slots``."""
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    mu, lam, rho_s = regime.lame(materials)
    T = regime.T_scale
    rho_f, eta = materials.rho_f, materials.eta
    idx = mode_index(mesh.n)
    nd = 3 * mesh.n_nodes
    free = np.arange(3, nd)  # drop the bottom no-slip node
    modes, factors, systems = [], [], []
    for s in slots:
        k1, k2 = 2 * np.pi * idx[s]
        mm = assemble_mode(mesh, k1, k2, mu, lam, eta)
        S = (rho_f * mm.M_f + rho_s * mm.M_s) / dt + T * mm.A_f + T * T * dt * mm.K_s
        Bf = mm.B[:, free]
        top = np.hstack([S[np.ix_(free, free)], -T * Bf.conj().T])
        bot = np.hstack([-T * Bf, np.zeros((Bf.shape[0], Bf.shape[0]))])
        system = np.vstack([top, bot])
        if not np.all(np.isfinite(system)):
            raise OracleError(f"non-finite entries in the system of mode {tuple(idx[s])}")
        lu = lu_factor(system, check_finite=False)
        if np.any(np.diag(lu[0]) == 0):
            raise OracleError(f"singular system for mode {tuple(idx[s])}")
        modes.append(mm)
        factors.append(lu)
        systems.append(system)
    return FsiOperators(mesh, regime, materials, dt, np.asarray(slots), modes, factors, free, systems)


def zero_state(ops: FsiOperators) -> FsiState:
    K, nn = len(ops.slots), ops.mesh.n_nodes
    return FsiState(0.0, ops.slots, np.zeros((K, nn, 3), complex), np.zeros((K, nn, 3), complex),
                    np.zeros((K, ops.mesh.m_f + 1), complex), ops.mesh)


def step(state: FsiState, ops: FsiOperators, force_modes: np.ndarray) -> FsiState:
    """One implicit Euler step; ``force_modes`` are the force coefficients at the new time."""
    T, dt = ops.regime.T_scale, ops.dt
    mesh = ops.mesh
    rho_f = ops.materials.rho_f
    free = ops.free
    vel = np.zeros_like(state.vel)
    disp = state.disp.copy()
    p = np.zeros_like(state.p)
    s_mask = np.zeros((mesh.n_nodes, 1))
    s_mask[mesh.interface:] = 1.0
    for i, (mm, lu) in enumerate(zip(ops.modes, ops.factors)):
        w0 = state.vel[i].ravel()
        u0 = state.disp[i].ravel()
        rhs = (rho_f * mm.M_f + ops.rho_s * mm.M_s) @ w0 / dt + T * (mm.load @ force_modes[i].ravel()) \
            - T * (mm.K_s @ u0)
        b = np.concatenate([rhs[free], np.zeros(mm.B.shape[0])])
        x = lu_solve(lu, b, check_finite=False)
        if not np.all(np.isfinite(x)):
            raise OracleError("non-finite solution")
        if ops.systems:
            A = ops.systems[i]
            res = np.linalg.norm(A @ x - b)
            ref = np.linalg.norm(np.abs(A) @ np.abs(x)) + np.linalg.norm(b)
            if res > ops.solve_tol * ref:
                raise OracleError(f"linear solve residual {res / ref:.2e} above tolerance")
        w = np.zeros(3 * mesh.n_nodes, complex)
        w[free] = x[: free.size]
        vel[i] = w.reshape(-1, 3)
        disp[i] = state.disp[i] + T * dt * s_mask * vel[i]
        p[i] = x[free.size:]
    return FsiState(state.t + dt, state.slots, vel, disp, p, mesh)


# --------------------------------------------------------------------------
# time loop
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LedgerRow:
    step: int
    t: float
    kinetic_f: float
    dissipation: float
    kinetic_s: float
    elastic: float
    lhs_over_t_eps3: float
    balance_residual: float
    energy_scale: float
    int_u3: float
    int_u1: float
    int_u2: float
    norm_u3: float


@dataclass(frozen=True, eq=False)
class OracleRun:
    regime: ScalingRegime
    materials: MaterialParams
    mesh: FsiMesh
    dt: float
    states: list[FsiState]
    ledger: list[LedgerRow]
    operators: FsiOperators

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    def energy_terms(self) -> list[EnergyTerms]:
        return [EnergyTerms(self.regime.T_scale * r.t, r.kinetic_f, r.dissipation, r.kinetic_s,
                            r.elastic, self.regime.eps) for r in self.ledger]

    @property
    def max_balance_error(self) -> float:
        """Largest per-step energy-balance residual relative to the energy scale."""
        return max((r.balance_residual / r.energy_scale for r in self.ledger if r.energy_scale > 0),
                   default=0.0)

    def sample(self, i: int, z_f: np.ndarray, w_f: np.ndarray, z_s: np.ndarray,
               w_s: np.ndarray) -> SampledFields:
        s = self.states[i]
        return SampledFields(s.t, z_f, w_f, z_s, w_s, s.physical_velocity(z_f), s.physical_pressure(z_f),
                             s.physical_displacement(z_s))


def run(regime: ScalingRegime, materials: MaterialParams, force: VolumeForce, mesh: FsiMesh,
        t_final: float, dt: float, record_every: int = 1,
        progress: Callable[[int, int], None] | None = None) -> OracleRun:
    """Integrate from rest to ``t_final`` (rescaled time) and keep an energy ledger.

    States are recorded at ``t = 0`` and every ``record_every`` steps (the
    last step is always recorded).  The ledger has one row per step.
    """
    if not regime.reduced_valid:
        raise ValueError(f"tau = {regime.tau} > -1 lies outside the scaling covered here")
    nsteps = int(round(t_final / dt))
    if nsteps < 1 or not math.isclose(nsteps * dt, t_final, rel_tol=1e-9):
        raise ValueError(f"t_final = {t_final} is not a positive multiple of dt = {dt}")
    zq = quadrature_points(mesh)
    slots = active_slots(force, mesh, times=(0.0, 0.5 * t_final, t_final)) if not force.is_zero() \
        else np.zeros(0, int)
    ops = assemble(mesh, regime, materials, dt, slots)
    state = zero_state(ops)
    states = [state]
    ledger: list[LedgerRow] = []
    T = regime.T_scale
    eps3 = regime.eps ** 3
    dissipation = 0.0
    E_prev = 0.0
    for n in range(1, nsteps + 1):
        t_new = n * dt
        fmodes = _force_modes(force, mesh, zq, t_new)[slots] if slots.size else np.zeros((0, zq.size, 3))
        new = step(state, ops, fmodes)
        kf, ks, el = ops.energy_parts(new)
        a_f, grad_rate = ops.viscous_rates(new)
        dissipation += T * dt * grad_rate
        work = 0.0
        num = 0.0
        for i, mm in enumerate(ops.modes):
            x = new.vel[i].ravel()
            dW = x - state.vel[i].ravel()
            dU = (new.disp[i] - state.disp[i]).ravel()
            work += float(np.real(x.conj() @ (mm.load @ fmodes[i].ravel())))
            rho_M = materials.rho_f * mm.M_f + ops.rho_s * mm.M_s
            num += 0.5 * float(np.real(dW.conj() @ rho_M @ dW)) + 0.5 * float(np.real(dU.conj() @ mm.K_s @ dU))
        E_new = kf + ks + el
        resid = abs(E_new - E_prev + num + T * dt * a_f - T * dt * work)
        scale = max(E_new, E_prev, num, T * dt * abs(work), T * dt * a_f)
        E_prev = E_new
        t_phys = T * t_new
        lhs = kf + dissipation + ks + el
        iu3, iua, nu3 = new.interface_means()
        ledger.append(LedgerRow(n, t_new, kf, dissipation, ks, el, lhs / (t_phys * eps3), resid, scale,
                                iu3, float(iua[0]), float(iua[1]), nu3))
        state = new
        if n % record_every == 0 or n == nsteps:
            states.append(state)
        if progress is not None:
            progress(n, nsteps)
    return OracleRun(regime, materials, mesh, dt, states, ledger, ops)


def patch_energy(mu: float, lam: float, E: np.ndarray, h: float = 1.0, layers: int = 1) -> tuple[float, float]:
    """Discrete and exact elastic energy densities of ``u = E z`` on a structure slab.

    ``E`` is a 3-vector: the displacement is ``u(z) = E * z`` (only vertical
    gradients are representable in the zero mode).  Returns ``(discrete, exact)``
    values of ``u^T K u`` and ``vol * (2 mu |e|^2 + lam tr(e)^2)``.
    """
    mesh = FsiMesh(4, 1, layers, 1.0, h)
    mm = assemble_mode(mesh, 0.0, 0.0, mu, lam, 1.0)
    u = np.zeros((mesh.n_nodes, 3))
    u[mesh.interface:] = np.outer(mesh.nodes[mesh.interface:], E)
    x = u.ravel()
    disc = float(np.real(x @ mm.K_s @ x))
    grad = np.zeros((3, 3))
    grad[:, 2] = E
    e = 0.5 * (grad + grad.T)
    exact = h * (2 * mu * np.sum(e * e) + lam * np.trace(e) ** 2)
    return disc, exact
