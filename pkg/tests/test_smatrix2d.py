import functools
import math

import numpy as np
import pytest
from scipy import integrate, special

import oracles
from conftest import bump, two_bump
from eigenphase.partialwave import phase_table
from eigenphase.potential import PotentialSpec, construct_potential
from eigenphase.smatrix2d import (
    GridOptions,
    NystromSystem,
    SMatrix2D,
    UnderResolvedError,
    build_smatrix,
    calibrate_gamma,
    eigenphases,
    match_eigenphases,
    solve_scattered_field,
)

ZERO2 = construct_potential(PotentialSpec.zero(2))


@functools.lru_cache(maxsize=None)
def smatrix(V0: float = 0.3, h: float = 0.3, N_ang: int = 128, which: str = "two"):
    V = {"two": two_bump(V0), "central": bump(V0, 2), "rotated": rotated_two_bump(V0)}[which]
    return build_smatrix(V, h, N_ang)


@functools.lru_cache(maxsize=None)
def rotated_two_bump(V0: float):
    return construct_potential(PotentialSpec.bump_sum([(V0, 0.5, (0.0, 0.5)), (V0, 0.5, (0.0, -0.5))], 2))


def born_far_field(V0: float, h: float, angle: float) -> complex:
    """int e^{-ik(theta - theta').y} U(y) dy for the unit-radius central bump."""
    k = 1.0 / h
    q = 2 * k * abs(math.sin(angle / 2))
    val, _ = integrate.quad(lambda r: oracles.bump(r, V0) * special.j0(q * r) * r, 0, 1, limit=200, epsabs=1e-14)
    return 2 * math.pi * val / h**2


def test_free_problem_is_trivial():
    S = build_smatrix(ZERO2, 0.3, 16)
    assert np.array_equal(S.entries, np.eye(16))
    assert S.unitarity_defect == 0.0
    field = solve_scattered_field(ZERO2, 0.3, 0.0)
    assert field.scattered.size == 0 or np.all(field.scattered == 0)
    assert np.all(field.far_field(np.linspace(0, 6, 7)) == 0)
    assert np.all(eigenphases(S).betas == 0)


def test_born_far_field():
    V0, h = 1e-3, 0.3
    field = solve_scattered_field(bump(V0, 2), h, 0.0)
    angles = np.linspace(0, math.pi, 7)
    f = field.far_field(angles)
    born = np.array([born_far_field(V0, h, a) for a in angles])
    # sup-norm relative error; the amplitude crosses zero near 2 pi / 3
    assert np.max(np.abs(f - born)) <= 0.05 * np.max(np.abs(born))


def test_amplitude_matches_scattered_field_asymptotics():
    # u_scat(r theta) sqrt(r) e^{-ikr} -> f(theta) for large r
    V, h = two_bump(), 0.3
    field = solve_scattered_field(V, h, 0.2)
    sys_ = field.system
    k = sys_.k
    theta = 1.1
    r = 400.0
    x = r * np.array([math.cos(theta), math.sin(theta)])
    G = 0.25j * special.hankel1(0, k * np.linalg.norm(x - sys_.nodes, axis=1))
    u_s = -sys_.weight * np.sum(G * sys_.U * field.total)
    f = field.amplitude([theta])[0]
    assert abs(u_s * math.sqrt(r) * np.exp(-1j * k * r) - f) < 2e-2 * abs(f)


def test_residual_small():
    field = solve_scattered_field(two_bump(), 0.3, 0.4)
    assert field.residual < 1e-8


def test_grid_refinement():
    angles = np.linspace(0, 2 * math.pi, 12, endpoint=False)
    coarse = solve_scattered_field(two_bump(), 0.3, 0.3, GridOptions(ppw=32)).amplitude(angles)
    fine = solve_scattered_field(two_bump(), 0.3, 0.3, GridOptions(ppw=64)).amplitude(angles)
    assert np.max(np.abs(coarse - fine)) < 1e-4


def test_resolution_preconditions():
    with pytest.raises(UnderResolvedError):
        NystromSystem(two_bump(), 0.15)
    with pytest.raises(UnderResolvedError):
        NystromSystem(two_bump(), 0.3, GridOptions(ppw=8))
    with pytest.raises(ValueError):
        NystromSystem(bump(0.3, 3), 0.3)


def test_unitarity_budget():
    S = smatrix()
    assert S.unitarity_defect < 1e-2
    assert S.residual < 1e-8


def test_determinant_modulus():
    S = smatrix()
    lam = np.linalg.eigvals(S.entries)
    assert abs(np.prod(np.abs(lam)) - 1) <= S.N_ang * S.unitarity_defect


def test_symmetric_reflection():
    # the two-bump potential is even under y -> -y: S(theta, theta') = S(-theta, -theta')
    S = smatrix().entries
    n = S.shape[0]
    flip = (-np.arange(n)) % n
    assert np.max(np.abs(S - S[np.ix_(flip, flip)])) < 1e-10


def test_rotation_conjugates_s():
    S = smatrix(which="two")
    R = smatrix(which="rotated")
    a = np.sort(eigenphases(S).betas)
    b = np.sort(eigenphases(R).betas)
    assert np.max(np.abs(a - b)) < 1e-6


def test_central_cross_check():
    S = smatrix(which="central")
    t = phase_table(bump(0.3, 2), 0.3, 2)
    central = np.repeat(t.beta, t.d_l)
    assert match_eigenphases(eigenphases(S).betas, central) < 1e-2


def test_gamma_calibration_picks_outgoing_sign():
    cal = calibrate_gamma()
    assert cal.chosen == "minus_i_over_4pi"
    assert cal.scores["plus_i_over_4pi"]["unitarity_defect"] > 1e-2


def test_angular_refinement_stable():
    a = eigenphases(smatrix(N_ang=128)).betas
    b = eigenphases(smatrix(N_ang=192)).betas
    assert match_eigenphases(b, a, threshold=1e-2) < 1e-2
    assert match_eigenphases(a, b, threshold=1e-2) < 1e-2


def test_free_limit_linear():
    m1 = np.max(np.abs(eigenphases(build_smatrix(two_bump(1e-3), 0.3, 64)).betas))
    m2 = np.max(np.abs(eigenphases(build_smatrix(two_bump(2e-3), 0.3, 64)).betas))
    assert m2 / m1 == pytest.approx(2.0, rel=1e-2)


def test_eigenphase_band_rejection():
    S = smatrix()
    bad = SMatrix2D(S.h, S.N_ang, S.nodes, S.entries * 1.001, S.unitarity_defect, S.gamma)
    with pytest.raises(UnderResolvedError):
        eigenphases(bad)
    with pytest.raises(UnderResolvedError):
        eigenphases(SMatrix2D(S.h, S.N_ang, S.nodes, S.entries, 0.5, S.gamma))


def test_dump_load(tmp_path):
    S = smatrix()
    path, side = S.dump(tmp_path / "S.bin")
    assert path.stat().st_size == 16 * S.N_ang**2
    back = SMatrix2D.load(path)
    assert np.array_equal(back.entries, S.entries)
    assert back.unitarity_defect == S.unitarity_defect
    assert back.gamma == S.gamma
