import numpy as np
import pytest

from thinfsi.fields import vertical_grid
from thinfsi.forces import FORCE_REGISTRY, constant_horizontal, make_force, reference_grid, single_mode, zero_force


def test_registry_ids():
    assert set(FORCE_REGISTRY) == {"zero", "constant-horizontal", "single-mode"}
    with pytest.raises(ValueError):
        make_force("gravity")


def test_zero_force_samples_zero():
    f = zero_force().sample(reference_grid(4), 8)
    assert f.ncomp == 3 and not np.any(f.values)
    assert zero_force().is_zero()


def test_constant_horizontal_components():
    f = constant_horizontal(2.0, -1.0).sample(reference_grid(3), 4)
    assert np.all(f.values[0] == 2.0) and np.all(f.values[1] == -1.0) and np.all(f.values[2] == 0.0)


def test_single_mode_profile_and_phase():
    force = single_mode(a1=1.5, k1=1, k2=2, phase="cos", profile=(0.0, -2.0))
    y1, y2, y3 = 0.1, 0.3, -0.4
    f1, f2, f3 = force(np.array(y1), np.array(y2), np.array(y3))
    assert f1 == pytest.approx(1.5 * np.cos(2 * np.pi * (y1 + 2 * y2)) * 0.8)
    assert f2 == 0.0 and f3 == 0.0
    with pytest.raises(ValueError):
        single_mode(phase="tan")


def test_ramp_is_time_dependent():
    force = single_mode(ramp=0.1)
    assert force.time_dependent
    g = reference_grid(2)
    assert not np.any(force.sample(g, 4, t=0.0).values)
    late = force.sample(g, 4, t=10.0).values
    steady = single_mode().sample(g, 4).values
    assert np.allclose(late, steady, atol=1e-30 + 1e-40)


def test_physical_scaling():
    force = single_mode(profile=(1.0, 1.0))
    eps = 0.125
    a = force.physical(np.array(0.25), np.array(0.0), np.array(-eps / 2), 0.0, eps)[0]
    b = force(np.array(0.25), np.array(0.0), np.array(-0.5))[0]
    assert a == b


def test_sample_shape():
    g = vertical_grid(5, -1.0, 0.0)
    f = single_mode().sample(g, 8, 6)
    assert f.values.shape == (3, 6, 8, 6)
