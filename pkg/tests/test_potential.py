import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eigenphase.classical import interaction_volume_mc
from eigenphase.potential import (
    EnergyProblem,
    PotentialSpec,
    central_interaction_volume,
    construct_potential,
    rescale_to_unit_energy,
)


def test_zero_potential():
    V = construct_potential(PotentialSpec.zero(3))
    assert V.support_radius == 0.0
    x = np.random.default_rng(0).normal(size=(50, 3))
    assert np.all(V.value(x) == 0.0)


def test_center_value():
    V = construct_potential(PotentialSpec.radial_bump(0.4, 1.0, 3))
    assert V.value(np.zeros(3)) == pytest.approx(0.4, abs=0)


def test_bump_sum_support_radius():
    spec = PotentialSpec.bump_sum([(0.3, 0.5, (0.6, 0, 0)), (0.3, 0.5, (-0.6, 0, 0))], 3)
    assert construct_potential(spec).support_radius == pytest.approx(1.1, abs=1e-15)


@pytest.mark.parametrize(
    "bumps",
    [
        [(0.7, 0.5, (0.1, 0.0)), (0.7, 0.5, (-0.1, 0.0))],  # overlapping bumps sum above 1
    ],
)
def test_rejects_large_sup(bumps):
    with pytest.raises(ValueError):
        construct_potential(PotentialSpec.bump_sum(bumps, 2))


def test_rejects_bad_parameters():
    with pytest.raises(ValueError):
        PotentialSpec.radial_bump(1.2, 1.0, 3)
    with pytest.raises(ValueError):
        PotentialSpec.radial_bump(0.2, 0.0, 3)
    with pytest.raises(ValueError):
        PotentialSpec.radial_bump(0.2, -1.0, 3)
    with pytest.raises(ValueError):
        PotentialSpec("radial_bump", 4, ())


def test_spec_json_roundtrip():
    spec = PotentialSpec.bump_sum([(0.3, 0.5, (0.5, 0.0)), (-0.2, 0.4, (-0.5, 0.1))], 2)
    assert PotentialSpec.from_dict(spec.to_dict()) == spec


@settings(max_examples=60, deadline=None)
@given(
    st.floats(0.05, 0.95),
    st.floats(0.0, 2.0),
    st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3),
)
def test_vanishes_outside_support(V0, extra, direction):
    V = construct_potential(PotentialSpec.bump_sum([(V0, 0.5, (0.4, 0, 0)), (-V0 / 2, 0.3, (0, -0.5, 0))], 3))
    u = np.asarray(direction) / np.linalg.norm(direction)
    x = (V.support_radius + extra) * u
    val, grad = V.value_and_gradient(x)
    assert val == 0.0
    assert np.all(grad == 0.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-0.8, 0.8), min_size=3, max_size=3))
def test_gradient_matches_finite_differences(x):
    V = construct_potential(PotentialSpec.radial_bump(0.4, 1.0, 3))
    x = np.asarray(x)
    if not 1e-2 < np.linalg.norm(x) < 0.9:
        return
    g = V.gradient(x)
    step = 1e-5
    fd = np.array([(V.value(x + step * e) - V.value(x - step * e)) / (2 * step) for e in np.eye(3)])
    assert np.allclose(fd, g, rtol=1e-6, atol=1e-6 * np.max(np.abs(g)))


def test_rescale_identity_and_example():
    V = construct_potential(PotentialSpec.radial_bump(0.4, 1.0, 3))
    same = EnergyProblem(0.1, 1.0, V)
    assert rescale_to_unit_energy(same) is same
    out = rescale_to_unit_energy(EnergyProblem(0.2, 4.0, V))
    assert out.h == pytest.approx(0.1, rel=1e-15)
    assert out.E == 1.0
    assert out.potential.value(np.zeros(3)) == pytest.approx(0.1, rel=1e-15)
    again = rescale_to_unit_energy(out)
    assert again is out


def test_rescale_rejects_nonpositive_energy():
    V = construct_potential(PotentialSpec.radial_bump(0.4, 1.0, 3))
    with pytest.raises(ValueError):
        rescale_to_unit_energy(EnergyProblem(0.1, 0.0, V))
    with pytest.raises(ValueError):
        EnergyProblem(0.0, 1.0, V)


def test_counting_normalization_invariant_under_rescaling():
    # (2 pi h)^{d-1} / c_V(E) with c_V(E) = E^{(d-1)/2} Vol(I) must equal the
    # same ratio for the rescaled unit-energy problem
    d, E, h = 3, 2.5, 0.1
    spec = PotentialSpec.bump_sum([(0.5, 0.5, (0.3, 0, 0)), (0.5, 0.4, (-0.4, 0.2, 0))], d)
    V = construct_potential(spec)
    est = interaction_volume_mc(V, 40000, 1.5 * V.support_radius, seed=5)
    c_E = E ** ((d - 1) / 2) * est.volume
    tilde = rescale_to_unit_energy(EnergyProblem(h, E, V))
    est_t = interaction_volume_mc(tilde.potential, 40000, 1.5 * V.support_radius, seed=6)
    lhs = h ** (d - 1) / c_E
    rhs = tilde.h ** (d - 1) / est_t.volume
    sigma = math.hypot(est.std_error / est.volume, est_t.std_error / est_t.volume) * rhs
    assert abs(lhs - rhs) < 4 * sigma


def test_central_interaction_volume():
    assert central_interaction_volume(1.0, 3) == pytest.approx(4 * math.pi**2)
    assert central_interaction_volume(1.0, 2) == pytest.approx(4 * math.pi)
