import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import trapezoid

from thinfsi.fields import (PeriodicField2D, SlabField3D, horizontal_derivative, lgl_nodes, read_field_csv,
                            spectral_laplacian, vertical_grid, vertical_integral, write_field_csv)

TWO_PI = 2 * np.pi
even_n = st.sampled_from([2, 4, 8, 16])
finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_sine_derivative():
    f = PeriodicField2D.from_function(lambda a, b: np.sin(TWO_PI * a), 16)
    d = horizontal_derivative(f, 1, 1)
    expected = PeriodicField2D.from_function(lambda a, b: TWO_PI * np.cos(TWO_PI * a), 16)
    assert np.max(np.abs(d.values - expected.values)) < 1e-12 * TWO_PI


@pytest.mark.parametrize("axis", [1, 2])
@pytest.mark.parametrize("order", range(1, 7))
def test_constant_has_zero_derivative(axis, order):
    f = PeriodicField2D(np.full((8, 8), 3.7))
    assert np.max(np.abs(horizontal_derivative(f, axis, order).values)) < 1e-12


@pytest.mark.parametrize("order", [0, 7, 1.5])
def test_derivative_order_rejected(order):
    f = PeriodicField2D.zeros(8)
    with pytest.raises(ValueError):
        horizontal_derivative(f, 1, order)


def test_triple_laplacian_eigenvalue():
    f = PeriodicField2D.from_function(lambda a, b: np.cos(TWO_PI * a) * np.cos(TWO_PI * b), 16)
    lam = -(8 * np.pi ** 2) ** 3
    got = f.laplacian(3).values
    # round-off in the top modes is amplified by |k|^6, hence the relative bound
    assert np.max(np.abs(got - lam * f.values)) < 1e-10 * abs(lam)


def test_field_rejects_bad_shapes():
    with pytest.raises(ValueError):
        PeriodicField2D(np.zeros((7, 8)))
    with pytest.raises(ValueError):
        PeriodicField2D(np.zeros(8))
    with pytest.raises(TypeError):
        PeriodicField2D(np.zeros((4, 4), complex))


@given(even_n, st.data())
def test_transform_roundtrip_and_mean(n, data):
    vals = data.draw(arrays(float, (n, n), elements=finite))
    f = PeriodicField2D(vals)
    back = PeriodicField2D.from_coeffs(f.coeffs)
    scale = max(1.0, np.max(np.abs(vals)))
    assert np.max(np.abs(back.values - vals)) <= 1e-12 * scale
    assert f.mean() == pytest.approx(vals.mean(), abs=1e-12 * scale)
    c = f.coeffs
    flipped = np.conj(np.roll(np.flip(c, (0, 1)), 1, axis=(0, 1)))
    assert np.allclose(c, flipped, atol=1e-9 * scale)


@given(even_n, st.data())
def test_parseval(n, data):
    f = PeriodicField2D(data.draw(arrays(float, (n, n), elements=finite)))
    assert f.norm() == pytest.approx(f.spectral_norm(), rel=1e-10, abs=1e-12)


def test_lgl_nodes_contain_endpoints():
    x, w = lgl_nodes(6)
    assert x[0] == -1.0 and x[-1] == 1.0
    assert w.sum() == pytest.approx(2.0, rel=1e-14)
    g = vertical_grid(6, -0.25, 0.0)
    assert g.nodes[0] == pytest.approx(-0.25) and g.nodes[-1] == 0.0


def test_vertical_integral_first_moment():
    g = vertical_grid(4, -1.0, 0.0)
    f = SlabField3D(np.ones((1, g.size, 4, 4)), g)
    out = vertical_integral(f, weight=(0.0, 1.0))
    assert np.allclose(out.values, -0.5, atol=1e-15)


def test_vertical_integral_zero_field():
    g = vertical_grid(4, -1.0, 0.0)
    f = SlabField3D.zeros(g, 4)
    assert np.all(vertical_integral(f).values == 0.0)
    assert np.all(vertical_integral(f, to="node").values == 0.0)


def test_vertical_integral_kernel_value():
    # int_{-1}^{0} (0 - zeta) zeta d zeta = 1/3 in absolute value, sign negative
    g = vertical_grid(5, -1.0, 0.0)
    f = SlabField3D.from_function(lambda a, b, z: z + 0 * a, g, 4)
    cum0 = vertical_integral(f, to="node")
    cum1 = vertical_integral(f, to="node", weight=(0.0, 1.0))
    y = g.nodes[None, :, None, None]
    kernel = y * cum0.values - cum1.values
    assert np.allclose(kernel[0, -1], -1.0 / 3.0, atol=1e-14)
    # brute-force check at every node with a fine composite rule
    for i, yi in enumerate(g.nodes):
        zz = np.linspace(-1.0, yi, 20001)
        ref = trapezoid((yi - zz) * zz, zz)
        assert kernel[0, i, 0, 0] == pytest.approx(ref, abs=1e-8)


def test_vertical_integral_orientation_check():
    g = vertical_grid(4, -1.0, 0.0)
    f = SlabField3D.zeros(g, 4)
    with pytest.raises(ValueError):
        vertical_integral(f, domain="structure")


@given(st.integers(2, 8), st.data())
def test_polynomial_exactness(m, data):
    coeffs = data.draw(arrays(float, (m + 1,), elements=st.floats(-5, 5)))
    g = vertical_grid(m, -0.3, 0.2)
    p = np.polynomial.Polynomial(coeffs)
    vals = p(g.nodes)
    exact = p.integ()(0.2) - p.integ()(-0.3)
    assert g.integrate(vals) == pytest.approx(exact, abs=1e-12 * (1 + np.abs(coeffs).sum()))
    assert np.allclose(g.derivative(vals), p.deriv()(g.nodes), atol=1e-9 * (1 + np.abs(coeffs).sum()))


@given(st.integers(2, 6), st.data())
def test_slab_norm_nonnegative_and_zero_only_for_zero(m, data):
    g = vertical_grid(m, 0.0, 0.5)
    entries = st.one_of(st.just(0.0), st.floats(1e-3, 10), st.floats(-10, -1e-3))
    vals = data.draw(arrays(float, (2, m + 1, 4, 4), elements=entries))
    f = SlabField3D(vals, g, "structure")
    n = f.norm()
    assert n >= 0.0
    assert (n == 0.0) == (not np.any(vals))


def test_spectral_laplacian_of_stack():
    f = PeriodicField2D.from_function(lambda a, b: np.sin(TWO_PI * (a + 2 * b)), 8)
    stack = np.stack([f.values, 2 * f.values])
    lap = spectral_laplacian(stack)
    assert np.allclose(lap[1], -2 * 5 * TWO_PI ** 2 * f.values, atol=1e-10)


def test_csv_roundtrip(tmp_path):
    f = PeriodicField2D.from_function(lambda a, b: np.cos(TWO_PI * a) + b, 8)
    back = read_field_csv(write_field_csv(tmp_path / "p.csv", f))
    assert np.array_equal(back.values, f.values)
    g = vertical_grid(3, 0.0, 0.125)
    s = SlabField3D(np.random.default_rng(1).normal(size=(3, 4, 4, 6)), g, "structure")
    back = read_field_csv(write_field_csv(tmp_path / "s.csv", s))
    assert np.array_equal(back.values, s.values)
    assert back.domain == "structure" and back.grid.b == 0.125
