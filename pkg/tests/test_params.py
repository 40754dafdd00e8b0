import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from thinfsi.params import (MaterialParams, applicability_window, as_rational, build_regime, forcing_sign,
                            predict_rates, rescaled_coefficients)

rationals = st.fractions(min_value=Fraction(1, 8), max_value=Fraction(8), max_denominator=12)
thickness = st.floats(min_value=1e-3, max_value=0.999)


def test_regime_subcritical_example():
    r = build_regime(1, Fraction(7, 2), 1 / 8)
    assert r.tau == Fraction(-5, 2)
    assert r.eps == pytest.approx(1 / 8, rel=1e-15)
    assert r.chi_tau == 0
    assert r.reduced_valid


def test_regime_critical_inertia_case():
    r = build_regime(1, 5, 1 / 8)
    assert r.tau == -1
    assert r.chi_tau == 1
    assert r.reduced_valid


def test_regime_outside_reduced_model():
    r = build_regime(1, Fraction(13, 2), 1 / 8)
    assert r.tau == Fraction(1, 2)
    assert not r.reduced_valid


@pytest.mark.parametrize("gamma, kappa, h", [(0, 1, 0.5), (-1, 3, 0.5), (1, 0, 0.5), (1, 3, 0.0),
                                             (1, 3, 1.0), (1, 3, 1.5)])
def test_regime_rejects_bad_input(gamma, kappa, h):
    with pytest.raises(ValueError):
        build_regime(gamma, kappa, h)


def test_as_rational_parses_exactly():
    assert as_rational("7/2") == Fraction(7, 2)
    assert as_rational(3.5) == Fraction(7, 2)
    assert as_rational(0.1) == Fraction(1, 10)
    with pytest.raises(TypeError):
        as_rational(True)


def test_predict_rates_examples():
    p = predict_rates(build_regime(1, Fraction(7, 2), 0.25))
    assert p.vel_h_exp == Fraction(1, 2)
    assert p.disp_vert_exp == Fraction(1, 2)
    assert p.theorem_applicable
    p2 = predict_rates(build_regime(2, Fraction(11, 2), 0.25))
    assert applicability_window(2) == (Fraction(5), Fraction(6))
    assert p2.vel_h_exp == Fraction(1, 2)
    assert p2.theorem_applicable
    assert not predict_rates(build_regime(1, Fraction(21, 5), 0.25)).theorem_applicable


def test_coefficients_literal_constant():
    r = build_regime(1, Fraction(7, 2), 0.25)
    c = rescaled_coefficients(r, MaterialParams(eta=1, mu_hat=1, lambda_hat=0), "literal")
    assert c.C_biharm == pytest.approx(4 / 3, rel=1e-14)
    assert c.C_plate == pytest.approx(1 / 9, rel=1e-14)
    assert c.C_inertia == 0.0


def test_coefficients_consistent_constant():
    r = build_regime(1, Fraction(7, 2), 0.25)
    c = rescaled_coefficients(r, MaterialParams(eta=2, mu_hat=1, lambda_hat=1), "consistent")
    # plate modulus mu (mu + lambda) / (2 mu + lambda) = 2/3, times 1/3
    assert c.C_biharm == pytest.approx(2 / 9, rel=1e-14)
    assert c.C_plate == pytest.approx(2 / 9 / 24, rel=1e-14)


def test_coefficients_inertia_only_at_critical_scaling():
    m = MaterialParams(eta=2.0, rho_s_hat=3.0)
    assert rescaled_coefficients(build_regime(1, 5, 0.25), m).C_inertia == pytest.approx(3.0 / 24.0)
    with pytest.raises(ValueError):
        rescaled_coefficients(build_regime(1, 7, 0.25), m)


def test_coefficient_grows_with_lambda():
    r = build_regime(1, Fraction(7, 2), 0.25)
    vals = [rescaled_coefficients(r, MaterialParams(lambda_hat=lam)).C_biharm for lam in (0, 1, 10, 1e3, 1e6)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert all(math.isfinite(v) for v in vals)


def test_forcing_sign_conventions():
    assert forcing_sign("literal") == 1.0
    assert forcing_sign("consistent") == -1.0
    with pytest.raises(ValueError):
        forcing_sign("other")


@pytest.mark.parametrize("kw", [dict(eta=0), dict(rho_f=-1), dict(mu_hat=0), dict(lambda_hat=-0.1),
                                dict(rho_s_hat=0)])
def test_material_validation(kw):
    with pytest.raises(ValueError):
        MaterialParams(**kw)


@given(rationals, rationals, thickness)
def test_regime_identities(gamma, kappa, h):
    r = build_regime(gamma, kappa, h)
    assert r.tau == kappa - 3 * gamma - 3
    assert (r.chi_tau == 1) == (kappa == 3 * gamma + 2)
    assert r.reduced_valid == (r.tau <= -1)
    assert math.isclose(r.eps, h ** float(gamma), rel_tol=1e-12)
    assert math.isclose(r.T_scale, h ** float(r.tau), rel_tol=1e-12)


@given(rationals, rationals)
def test_applicability_implies_nonnegative_rates(gamma, kappa):
    p = predict_rates(build_regime(gamma, kappa, 0.5))
    lo, hi = applicability_window(gamma)
    assert p.theorem_applicable == (lo <= kappa < hi and kappa - 3 * gamma - 3 < -1)
    if p.theorem_applicable:
        assert min(p.vel_h_exp, p.pressure_h_exp, p.disp_horiz_exp, p.disp_vert_exp) >= 0
        assert kappa - 3 * gamma - 3 < -1
