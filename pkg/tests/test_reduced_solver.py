import time
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.linalg import expm

from thinfsi.fields import PeriodicField2D
from thinfsi.forces import constant_horizontal, single_mode, zero_force
from thinfsi.params import MaterialParams, build_regime, rescaled_coefficients
from thinfsi.reduced_solver import build_forcing, forcing_kernels, mode_energy, reynolds_residual, solve_w3
from thinfsi.reconstruct import limit_pressure

TWO_PI = 2 * np.pi
REG = build_regime(1, Fraction(7, 2), 0.25)
CRIT = build_regime(1, 5, 0.25)
MATS = MaterialParams()


def cos_mode(n=16, k=(1, 0), amp=1.0):
    return PeriodicField2D.from_function(lambda a, b: amp * np.cos(TWO_PI * (k[0] * a + k[1] * b)), n)


# ---------------------------------------------------------------- forcing

def test_zero_force_gives_zero_kernels():
    fr = build_forcing(zero_force(), 1.0, [0.0, 1.0], 8)
    assert not np.any(fr.F_alpha[0].values) and not np.any(fr.F[0].values)


@pytest.mark.parametrize("eta", [1.0, 2.5])
def test_constant_force_kernel_closed_form(eta):
    fr = build_forcing(constant_horizontal(1.0, 0.0), eta, [0.0], 4, m=6, convention="literal")
    y = fr.F_alpha[0].grid.nodes
    expected = (-(y + 1) / 2 + (y + 1) ** 2 / 2) / eta
    assert np.allclose(fr.F_alpha[0].values[0, :, 0, 0], expected, atol=1e-14)
    assert np.allclose(fr.F_alpha[0].values[1], 0.0)
    assert np.max(np.abs(fr.F[0].values)) < 1e-13


def test_consistent_convention_flips_kernel():
    a = build_forcing(constant_horizontal(), 1.0, [0.0], 4, convention="literal").F_alpha[0].values
    b = build_forcing(constant_horizontal(), 1.0, [0.0], 4, convention="consistent").F_alpha[0].values
    assert np.array_equal(a, -b)


def _profile_kernel_integral(g, eta):
    """Brute-force int_{-1}^0 F_1-profile dy3 for f1 = g(y3) by nested adaptive quadrature."""
    m1 = quad(lambda z: z * g(z), -1, 0, epsabs=1e-14)[0]

    def kern(y):
        inner = quad(lambda z: (y - z) * g(z), -1, y, epsabs=1e-14)[0] if y > -1 else 0.0
        return ((y + 1) * m1 + inner) / eta

    return quad(kern, -1, 0, epsabs=1e-13)[0]


def test_single_mode_plate_load_against_quadrature():
    eta = 1.3
    prof = (0.5, -2.0, 1.0)
    fr = build_forcing(single_mode(profile=prof), eta, [0.0], 16, m=8, convention="literal")
    I = _profile_kernel_integral(np.polynomial.Polynomial(prof), eta)
    expected = PeriodicField2D.from_function(lambda a, b: -TWO_PI * np.cos(TWO_PI * a) * I, 16)
    assert np.max(np.abs(fr.F[0].values - expected.values)) < 1e-10


def test_forcing_requires_fluid_slab():
    f = single_mode().sample(__import__("thinfsi.fields", fromlist=["x"]).vertical_grid(4, 0, 1), 4)
    with pytest.raises(ValueError):
        forcing_kernels(f.with_values(f.values).__class__(f.values, f.grid, "structure"), 1.0)


# ---------------------------------------------------------------- solver

def test_zero_forcing_zero_solution():
    tr = solve_w3(PeriodicField2D.zeros(8), REG, MATS, np.linspace(0, 1, 11))
    assert not np.any(tr.w) and not np.any(tr.dw)


@pytest.mark.parametrize("convention", ["literal", "consistent"])
def test_single_mode_closed_form(convention):
    C = rescaled_coefficients(REG, MATS, convention).C_plate
    times = np.linspace(0, 0.02, 21)
    tr = solve_w3(cos_mode(), REG, MATS, times, convention=convention)
    lam = C * TWO_PI ** 6
    for i, t in enumerate(times):
        expected = (1 - np.exp(-lam * t)) / lam * np.cos(TWO_PI * np.arange(16) / 16)
        assert np.allclose(tr.w[i][:, 0], expected, rtol=0, atol=1e-13 * (1 + abs(expected).max()))


def test_steady_limit_approached():
    C = rescaled_coefficients(REG, MATS).C_plate
    lam = C * TWO_PI ** 6
    tr = solve_w3(cos_mode(), REG, MATS, [0.0, 50.0 / lam])
    assert np.allclose(tr.w[-1], cos_mode().values / lam, atol=1e-15)


def test_constant_forcing_grows_linearly():
    times = np.array([0.0, 0.3, 1.0, 2.5])
    tr = solve_w3(PeriodicField2D(np.full((8, 8), 0.7)), REG, MATS, times)
    assert np.allclose(tr.w[:, 3, 5], 0.7 * times, atol=1e-14)


def test_rejects_invalid_regime_and_grid():
    with pytest.raises(ValueError):
        solve_w3(cos_mode(), build_regime(1, 7, 0.25), MATS, [0, 1])
    with pytest.raises(ValueError):
        solve_w3(cos_mode(), REG, MATS, [0, 1, 1])
    with pytest.raises(ValueError):
        solve_w3(cos_mode(), REG, MATS, [0, 1], scheme="rk4")


def test_implicit_euler_first_order():
    C = rescaled_coefficients(REG, MATS).C_plate
    lam = C * TWO_PI ** 6
    T = 1.0 / lam
    exact = (1 - np.exp(-lam * T)) / lam
    errs = []
    for n in (20, 40, 80):
        tr = solve_w3(cos_mode(), REG, MATS, np.linspace(0, T, n + 1), scheme="implicit-euler")
        errs.append(abs(tr.w[-1][0, 0] - exact))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 1.0) < 0.1)


def test_time_dependent_forcing_second_order():
    force = single_mode(profile=(0.0, -2.0), ramp=0.002)
    ref_t = np.linspace(0, 0.004, 4097)
    ref = solve_w3(build_forcing(force, 1.0, ref_t, 8), REG, MATS, ref_t).w[-1]
    errs = []
    for n in (16, 32, 64):
        t = np.linspace(0, 0.004, n + 1)
        errs.append(np.max(np.abs(solve_w3(build_forcing(force, 1.0, t, 8), REG, MATS, t).w[-1] - ref)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)


def _inertia_reference(a, lam, F, times):
    A = np.array([[0.0, 1.0, 0.0], [-lam / a, -1.0 / a, F / a], [0.0, 0.0, 0.0]])
    return np.array([(expm(A * t) @ np.array([0.0, 0.0, 1.0]))[:2] for t in times])


@pytest.mark.parametrize("k", [(1, 0), (1, 1), (3, 2)])
def test_inertia_case_against_matrix_exponential(k):
    mats = MaterialParams(rho_s_hat=2.0)
    coeffs = rescaled_coefficients(CRIT, mats, "consistent")
    K2 = TWO_PI ** 2 * (k[0] ** 2 + k[1] ** 2)
    a, lam = coeffs.C_inertia * K2, coeffs.C_plate * K2 ** 3
    times = np.linspace(0, 0.01, 11)
    tr = solve_w3(cos_mode(k=k), CRIT, mats, times, convention="consistent")
    ref = _inertia_reference(a, lam, 1.0, times)
    assert np.allclose(tr.w[:, 0, 0], ref[:, 0], atol=1e-12 * max(1, abs(ref[:, 0]).max()))
    assert np.allclose(tr.dw[:, 0, 0], ref[:, 1], atol=1e-10 * max(1, abs(ref[:, 1]).max()))
    # trivial initial data; the mean mode carries no inertia and only sees round-off here
    assert np.max(np.abs(tr.dw[0])) < 1e-15 and not np.any(tr.w[0])


def test_inertia_implicit_euler_converges():
    mats = MaterialParams(rho_s_hat=2.0)
    times = np.linspace(0, 0.005, 6)
    exact = solve_w3(cos_mode(), CRIT, mats, times).w[-1]
    errs = []
    for n in (50, 100, 200):
        t = np.linspace(0, 0.005, n + 1)
        errs.append(np.max(np.abs(solve_w3(cos_mode(), CRIT, mats, t, scheme="implicit-euler").w[-1] - exact)))
    assert errs[0] > errs[1] > errs[2]
    assert np.log2(errs[1] / errs[2]) == pytest.approx(1.0, abs=0.2)


def test_ddw_only_in_critical_case():
    tr = solve_w3(cos_mode(), REG, MATS, [0, 0.1])
    with pytest.raises(ValueError):
        tr.ddw_field(0)
    tr2 = solve_w3(cos_mode(), CRIT, MATS, [0, 0.1])
    assert tr2.ddw_field(1).shape == (16, 16)


def test_trajectory_is_read_only():
    tr = solve_w3(cos_mode(), REG, MATS, [0, 0.1])
    with pytest.raises(ValueError):
        tr.w[0, 0, 0] = 1.0


# ---------------------------------------------------------------- Reynolds residual

def _solve_single_mode(scheme="exponential"):
    times = np.linspace(0, 0.02, 11)
    forcing = build_forcing(single_mode(profile=(0.0, -2.0)), 1.0, times, 16, convention="consistent")
    return solve_w3(forcing, REG, MATS, times, scheme=scheme)


@pytest.mark.parametrize("scheme", ["exponential", "implicit-euler"])
def test_reynolds_residual_small(scheme):
    tr = _solve_single_mode(scheme)
    res = reynolds_residual(tr, limit_pressure(tr))
    assert np.all(res < 1e-8)


def test_reynolds_residual_detects_perturbation():
    tr = _solve_single_mode()
    p = limit_pressure(tr)
    base = reynolds_residual(tr, p)
    delta = 1e-3
    bump = cos_mode(amp=delta)
    C = tr.coefficients.C_biharm
    p2 = [q + bump.laplacian(2) * C for q in p]
    res = reynolds_residual(tr, p2)
    # Lap' of the extra pressure over 12 eta: |(2 pi)^6| C delta / 12 / sqrt(2)
    expected = C * TWO_PI ** 6 * delta / 12 / np.sqrt(2)
    assert np.all(res > base)
    assert np.allclose(res, expected, rtol=1e-6)


def test_reynolds_residual_zero_trajectory():
    tr = solve_w3(PeriodicField2D.zeros(8), REG, MATS, [0, 0.1, 0.2])
    assert np.all(reynolds_residual(tr, limit_pressure(tr)) == 0.0)


def test_reynolds_residual_grid_mismatch():
    tr = solve_w3(PeriodicField2D.zeros(8), REG, MATS, [0, 0.1])
    with pytest.raises(ValueError):
        reynolds_residual(tr, [PeriodicField2D.zeros(4)] * 2)
    with pytest.raises(ValueError):
        reynolds_residual(tr, [PeriodicField2D.zeros(8)])


def test_mode_energy_of_single_mode():
    w = cos_mode(n=8).values
    assert mode_energy(w) == pytest.approx(TWO_PI ** 6 / 2, rel=1e-12)


@settings(max_examples=30)
@given(st.integers(0, 3), st.integers(0, 3), st.floats(0.1, 5.0), st.floats(1e-4, 0.05))
def test_linearity_and_realness(k1, k2, amp, t_end):
    times = np.linspace(0, t_end, 5)
    a = solve_w3(cos_mode(n=8, k=(k1, k2)), REG, MATS, times)
    b = solve_w3(cos_mode(n=8, k=(k1, k2), amp=amp), REG, MATS, times)
    assert np.allclose(b.w, amp * a.w, atol=1e-12 * (1 + np.abs(b.w).max()))
    assert np.isrealobj(b.w)


def test_criterion_runtime_32():
    t0 = time.perf_counter()
    solve_w3(cos_mode(n=32), REG, MATS, np.linspace(0, 0.05, 201))
    assert time.perf_counter() - t0 < 1.0
