import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thinfsi import analysis as an
from thinfsi.fields import SlabField3D, vertical_grid
from thinfsi.params import build_regime

TWO_PI = 2 * np.pi
REG = build_regime(1, Fraction(7, 2), 0.25)


def fluid(fn, eps, m=4, n=8):
    return SlabField3D.from_function(fn, vertical_grid(m, -eps, 0.0), n, domain="fluid", ncomp=3)


def structure(fn, h, m=4, n=8):
    return SlabField3D.from_function(fn, vertical_grid(m, 0.0, h), n, domain="structure", ncomp=3)


def shear(eps):
    return fluid(lambda a, b, z: [z + eps + 0 * a, 0 * z * a, 0 * z * a], eps)


# ---------------------------------------------------------------- Poincare and trace

@pytest.mark.parametrize("eps", [0.25, 1 / 16])
def test_poincare_linear_profile(eps):
    rep = an.poincare_check(shear(eps), eps)
    assert rep.lhs == pytest.approx(math.sqrt(eps ** 3 / 3), rel=1e-12)
    d3_norm = rep.rhs / (an.POINCARE_CONSTANT * eps)
    assert d3_norm == pytest.approx(math.sqrt(eps), rel=1e-12)
    assert rep.lhs / d3_norm == pytest.approx(eps / math.sqrt(3), rel=1e-12)
    assert rep.passed


@pytest.mark.parametrize("eps", [0.25, 1 / 16])
def test_trace_equality_case(eps):
    rep = an.trace_check(shear(eps), eps)
    assert rep.lhs == pytest.approx(eps, rel=1e-12)
    assert rep.rhs == pytest.approx(eps, rel=1e-12)
    assert rep.passed


@pytest.mark.parametrize("check", [an.poincare_check, an.trace_check, an.korn_check])
def test_zero_field(check):
    rep = check(fluid(lambda a, b, z: [0 * a * z] * 3, 0.1), 0.1)
    assert rep.lhs == 0.0 and rep.passed
    assert rep.ratio == 0.0


def test_bottom_trace_precondition():
    v = fluid(lambda a, b, z: [1 + 0 * a * z, 0 * a * z, 0 * a * z], 0.1)
    for check in (an.poincare_check, an.trace_check, an.korn_check):
        with pytest.raises(an.PreconditionError):
            check(v, 0.1)
    with pytest.raises(an.PreconditionError):
        an.poincare_check(shear(0.1), 0.2)


def test_verdict_slack():
    assert an._verdict(1.0 + 1e-12, 1.0)
    assert not an._verdict(1.0 + 1e-6, 1.0)


def test_report_row():
    row = an.poincare_check(shear(0.25), 0.25).as_row()
    assert set(row) == {"check_id", "h", "eps", "lhs", "rhs", "ratio", "pass"}


# ---------------------------------------------------------------- Korn

def test_korn_shear_has_zero_lhs():
    assert an.korn_check(shear(0.1), 0.1).lhs == 0.0


def test_korn_gradient_field_finite():
    eps = 0.125
    psi = lambda a, b: np.cos(TWO_PI * a) * np.sin(TWO_PI * b)
    dpsi1 = lambda a, b: -TWO_PI * np.sin(TWO_PI * a) * np.sin(TWO_PI * b)
    dpsi2 = lambda a, b: TWO_PI * np.cos(TWO_PI * a) * np.cos(TWO_PI * b)
    v = fluid(lambda a, b, z: [(z + eps) ** 2 * dpsi1(a, b), (z + eps) ** 2 * dpsi2(a, b),
                               2 * (z + eps) * psi(a, b)], eps)
    r = an.korn_ratio(v, eps)
    assert math.isfinite(r) and r > 0
    # sym grad of a gradient is the Hessian, so the antisymmetric part vanishes
    G = an.gradient(v)
    assert np.max(np.abs(G - np.swapaxes(G, 0, 1))) < 1e-10 * np.max(np.abs(G))


def test_korn_constant_covers_calibration_ensemble():
    ratios = an.korn_ensemble(0.25, seed=an.KORN_SEED, count=50)
    assert ratios.max() < an.KORN_C_TEST


@pytest.mark.parametrize("eps", [0.25, 1 / 16])
def test_inequality_suite_seeded(eps):
    reports = an.inequality_suite(eps, seed=7, count=20)
    assert len(reports) == 60
    assert all(r.passed for r in reports)
    again = an.inequality_suite(eps, seed=7, count=20)
    assert [r.lhs for r in reports] == [r.lhs for r in again]


@settings(max_examples=25)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([0.5, 0.25, 0.125, 1 / 16, 1 / 32]))
def test_random_fields_satisfy_poincare_and_trace(seed, eps):
    v = an.random_fluid_field(np.random.default_rng(seed), eps)
    assert an.poincare_check(v, eps).passed
    assert an.trace_check(v, eps).passed


# ---------------------------------------------------------------- plate decomposition

def test_griso_pure_mean():
    h = 0.25
    u = structure(lambda a, b, z: [np.sin(TWO_PI * a) + 0 * z, np.cos(TWO_PI * b) + 0 * z, 1 + a + 0 * z], h)
    parts = an.griso_decompose(u)
    assert np.max(np.abs(parts.r)) < 1e-13
    assert np.max(np.abs(parts.warping.values)) < 1e-13


def test_griso_linear_profile():
    h = 0.125
    g = lambda a, b: np.cos(TWO_PI * (a + b))
    u = structure(lambda a, b, z: [(z - h / 2) * g(a, b), 0 * z * a, 0 * z * a], h)
    parts = an.griso_decompose(u)
    assert np.allclose(parts.r[1], g(*np.meshgrid(np.arange(8) / 8, np.arange(8) / 8, indexing="ij")), atol=1e-12)
    assert np.max(np.abs(parts.warping.values)) < 1e-13


def test_griso_quadratic_profile():
    h = 0.25
    gfun = lambda a, b: np.sin(TWO_PI * a)
    u = structure(lambda a, b, z: [(z - h / 2) ** 2 * gfun(a, b), 0 * a * z, 0 * a * z], h)
    parts = an.griso_decompose(u)
    y1 = np.arange(8)[:, None] / 8 + 0 * np.arange(8)[None]
    gv = gfun(y1, 0)
    assert np.allclose(parts.w[0], h ** 2 / 12 * gv, atol=1e-14)
    assert np.max(np.abs(parts.r)) < 1e-14
    z = parts.warping.grid.nodes
    expected = ((z - h / 2) ** 2 - h ** 2 / 12)[:, None, None] * gv[None]
    assert np.allclose(parts.warping.values[0], expected, atol=1e-14)
    mean, first = an.griso_orthogonality(parts)
    assert mean < 1e-12 and first < 1e-12


def test_griso_rejects_bad_thickness():
    u = structure(lambda a, b, z: [0 * a * z] * 3, 0.25)
    with pytest.raises(ValueError):
        an.griso_decompose(u, h=0.0)
    with pytest.raises(ValueError):
        an.griso_decompose(u, h=0.5)


@settings(max_examples=25)
@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([0.5, 0.25, 0.125, 1 / 16]))
def test_griso_recomposition_and_orthogonality(seed, h):
    u = an.random_structure_field(np.random.default_rng(seed), h)
    parts = an.griso_decompose(u)
    scale = max(1.0, np.max(np.abs(u.values)))
    assert np.max(np.abs(parts.recompose().values - u.values)) < 1e-12 * scale
    mean, first = an.griso_orthogonality(parts)
    assert mean < 1e-12 * scale and first < 1e-12 * scale


def test_griso_ratio_of_elementary_field_is_one():
    h = 0.25
    u = structure(lambda a, b, z: [np.sin(TWO_PI * a) + (z - h / 2) * np.cos(TWO_PI * b),
                                   -(z - h / 2) * np.sin(TWO_PI * a), np.cos(TWO_PI * (a + b)) + 0 * z], h)
    assert an.griso_estimate_ratio(u) == pytest.approx(1.0, rel=1e-12)


def test_griso_ratio_rigid_translation_not_applicable():
    u = structure(lambda a, b, z: [1 + 0 * a * z, 2 + 0 * a * z, 3 + 0 * a * z], 0.25)
    assert math.isnan(an.griso_estimate_ratio(u))


def test_griso_ratio_does_not_explode():
    r4 = an.griso_ensemble(0.25, seed=3, count=20)
    r8 = an.griso_ensemble(0.125, seed=3, count=20)
    assert np.all(np.isfinite(r4)) and np.all(np.isfinite(r8))
    assert r8.max() < 2 * r4.max()


# ---------------------------------------------------------------- energy

def test_energy_terms_ratio():
    e = an.EnergyTerms(t=2.0, kinetic_f=1.0, dissipation=2.0, kinetic_s=3.0, elastic=4.0, eps=0.5)
    assert e.lhs == 10.0
    assert e.ratio == pytest.approx(10.0 / (2.0 * 0.125))
    assert math.isnan(an.EnergyTerms(0.0, 0, 0, 0, 0, 0.5).ratio)


def test_continuum_energy_zero():
    assert an.continuum_energy(None, None, None, REG, 1, 1, 0, 1) == (0.0, 0.0, 0.0)


def test_continuum_energy_shear():
    eps, h = REG.eps, REG.h
    v = fluid(lambda a, b, z: [eps ** 2 * (z + eps) + 0 * a, 0 * a * z, 0 * a * z], eps)
    u = structure(lambda a, b, z: [0.01 * z + 0 * a, 0 * a * z, 0 * a * z], h)
    kf, ks, el = an.continuum_energy(v, u, None, REG, rho_f=2.0, mu_hat=1.0, lambda_hat=3.0, rho_s_hat=1.0)
    assert kf == pytest.approx(0.5 * 2.0 * eps ** 4 * eps ** 3 / 3, rel=1e-12)
    assert ks == 0.0
    mu = h ** -3.5
    # sym grad has two entries 0.005, divergence zero
    assert el == pytest.approx(mu * 2 * 0.005 ** 2 * h, rel=1e-12)


# ---------------------------------------------------------------- error norms

def _sampled(t, v, p, u, zf, wf, zs, ws):
    return an.SampledFields(t, zf, wf, zs, ws, v, p, u)


def test_layered_gauss_exact():
    z, w = an.layered_gauss(-0.25, 0.0, 3)
    assert w.sum() == pytest.approx(0.25)
    assert np.sum(w * z ** 7) == pytest.approx((0 - 0.25 ** 8) / 8, rel=1e-12)


def test_error_norms_self_comparison_zero():
    zf, wf = an.layered_gauss(-REG.eps, 0, 2)
    zs, ws = an.layered_gauss(0, REG.h, 2)
    rng = np.random.default_rng(0)
    series = [_sampled(t, rng.normal(size=(3, zf.size, 4, 4)), rng.normal(size=(zf.size, 4, 4)),
                       rng.normal(size=(3, zs.size, 4, 4)), zf, wf, zs, ws) for t in (0, 0.1, 0.2)]
    e = an.error_norms(series, series, REG)
    assert (e.velocity, e.pressure, e.disp_horiz, e.disp_vert, e.translation) == (0, 0, 0, 0, 0)


def test_error_norms_linear_in_perturbation():
    zf, wf = an.layered_gauss(-REG.eps, 0, 2)
    zs, ws = an.layered_gauss(0, REG.h, 2)
    times = np.array([0.0, 0.1, 0.3])
    mode = np.cos(TWO_PI * np.arange(4) / 4)[:, None] * np.ones((1, 4))
    delta = 1e-3
    base = [_sampled(t, np.zeros((3, zf.size, 4, 4)), np.zeros((zf.size, 4, 4)),
                     np.zeros((3, zs.size, 4, 4)), zf, wf, zs, ws) for t in times]
    bump_v = np.zeros((3, zf.size, 4, 4))
    bump_v[0] = delta * mode
    bump_u = np.zeros((3, zs.size, 4, 4))
    bump_u[2] = delta * mode
    pert = [_sampled(s.t, s.v + bump_v, s.p + delta * mode, s.u + bump_u, zf, wf, zs, ws) for s in base]
    e = an.error_norms(pert, base, REG)
    mode_sq = 0.5   # mean of cos^2
    assert e.velocity == pytest.approx(delta * math.sqrt(mode_sq * REG.eps * times[-1]), rel=1e-12)
    assert e.pressure == pytest.approx(delta * math.sqrt(mode_sq * REG.eps * times[-1]), rel=1e-12)
    assert e.disp_vert == pytest.approx(delta * math.sqrt(mode_sq * REG.h), rel=1e-12)
    assert e.disp_horiz == 0.0


def test_error_norms_time_grid_mismatch():
    zf, wf = an.layered_gauss(-0.25, 0, 1)
    s = lambda t: _sampled(t, np.zeros((3, 4, 2, 2)), np.zeros((4, 2, 2)), np.zeros((3, 4, 2, 2)), zf, wf, zf, wf)
    with pytest.raises(ValueError):
        an.error_norms([s(0), s(1)], [s(0)], REG)
    with pytest.raises(ValueError):
        an.error_norms([s(0), s(1)], [s(0), s(2)], REG)


def test_translation_mismatch_removed():
    zf, wf = an.layered_gauss(-REG.eps, 0, 1)
    zs, ws = an.layered_gauss(0, REG.h, 1)
    a = _sampled(0.0, np.zeros((3, 4, 4, 4)), np.zeros((4, 4, 4)), np.zeros((3, 4, 4, 4)), zf, wf, zs, ws)
    u = np.zeros((3, 4, 4, 4))
    u[0] = 0.3
    b = _sampled(0.0, a.v, a.p, u, zf, wf, zs, ws)
    e = an.error_norms([a], [b], REG)
    assert e.translation == pytest.approx(0.3)
    assert e.disp_horiz_corrected < 1e-15 and e.disp_horiz > 0


def test_normalized_powers():
    e = an.ErrorNorms(h=0.25, eps=0.25, velocity=1.0, pressure=1.0, disp_horiz=1.0, disp_vert=1.0,
                      translation=0.0, disp_horiz_corrected=1.0)
    n = e.normalized(REG)
    assert n["velocity"] == pytest.approx(0.25 ** -2.5)
    assert n["pressure"] == pytest.approx(0.25 ** -0.5)
    assert n["disp_horiz"] == pytest.approx(0.25 ** -2.0)
    assert n["disp_vert"] == pytest.approx(0.25 ** -1.0)
