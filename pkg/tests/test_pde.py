import numpy as np
import pytest

from dispflow.fields import Grid, MapState, iterated_covariant, l2_inner, TangentSection, covariant_derivative, velocity
from dispflow.pde import (
    FlowCoefficients,
    darios_rhs,
    fm_rhs,
    nonlinearity,
    rhs_extrinsic,
    rhs_intrinsic,
    rhs_regularized_tube,
)
from dispflow.geometry import TubeExceeded

from conftest import TWO_PI, great_circle, perturbed_circle, rand_curve

TARGETS = ["s2", "t2-clifford", "s6"]


def test_coefficients_validation():
    with pytest.raises(ValueError):
        FlowCoefficients(1.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        FlowCoefficients(1.0, 0.0, -0.1)
    assert FlowCoefficients(0.0, 0.0, 0.1).schrodinger_mode


@pytest.mark.parametrize("target", TARGETS)
def test_constant_curve_is_a_fixed_point(target):
    u = rand_curve(32, target, 0)
    const = MapState(u.grid, 0.0, np.tile(u.points[0], (32, 1)), target)
    c = FlowCoefficients(1.3, -0.4, 0.1)
    assert np.abs(rhs_extrinsic(const, c)).max() == 0.0
    assert np.abs(rhs_intrinsic(const, c).vectors).max() == 0.0


@pytest.mark.parametrize("target", TARGETS)
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_intrinsic_equals_extrinsic(target, seed):
    u = rand_curve(128, target, seed)
    c = FlowCoefficients(0.8, -1.1)
    assert np.abs(rhs_intrinsic(u, c).vectors - rhs_extrinsic(u, c)).max() < 1e-10


def test_parabolic_block_matches_third_covariant_derivative():
    # -eps v_xxxx + (F_eps - F_0) = -eps dw(nabla^3 u_x)
    for target in TARGETS:
        u = rand_curve(128, target, 5)
        eps = 0.3
        c0, c1 = FlowCoefficients(1.0, 0.5), FlowCoefficients(1.0, 0.5, eps)
        lhs = rhs_extrinsic(u, c1) - rhs_extrinsic(u, c0)
        W3 = iterated_covariant(u, 3)[3].vectors
        assert np.abs(lhs + eps * W3).max() < 1e-10 * max(1, np.abs(W3).max())


@pytest.mark.parametrize("target", TARGETS)
def test_extrinsic_field_is_tangent(target):
    u = rand_curve(128, target, 9)
    F = rhs_extrinsic(u, FlowCoefficients(1.0, 0.2, 0.05))
    assert np.abs(u.target.tangent_project(u.points, F) - F).max() < 1e-10


def test_tangency_residual_decays_under_refinement():
    res = []
    for n in (16, 32, 64, 128):
        u = perturbed_circle(n, amp=0.2)
        F = rhs_extrinsic(u, FlowCoefficients(1.0, 0.5))
        res.append(np.abs(u.target.tangent_project(u.points, F) - F).max())
    assert res[0] > res[1] > res[2] > res[3]
    assert res[3] < 1e-10 and res[2] < 1e-4 * res[1]


def test_great_circle_field_is_pure_translation():
    u = great_circle(64, length=TWO_PI)
    a, b = 0.7, 1.9
    F = rhs_extrinsic(u, FlowCoefficients(a, b))
    np.testing.assert_allclose(F, b * velocity(u).vectors, atol=1e-12)


def test_linear_in_coefficients():
    # the J term carries no coefficient, so superposition holds after removing it
    u = rand_curve(64, "s6", 4)
    c1, c2 = FlowCoefficients(0.3, 1.1), FlowCoefficients(-1.4, 0.25)
    s = FlowCoefficients(c1.a + c2.a, c1.b + c2.b)
    lhs = rhs_intrinsic(u, s).vectors
    rhs = rhs_intrinsic(u, c1).vectors + rhs_intrinsic(u, c2).vectors - rhs_intrinsic(u, FlowCoefficients(0.0, 0.0)).vectors
    assert np.abs(lhs - rhs).max() < 1e-13 * np.abs(lhs).max()


def test_J_term_integrates_to_zero_against_velocity():
    for target in TARGETS:
        u = rand_curve(128, target, 6)
        ux = velocity(u)
        JW = TangentSection(u, u.target.complex_structure(u.points, covariant_derivative(u, ux).vectors))
        assert abs(l2_inner(covariant_derivative(u, JW), ux)) < 1e-9


def test_tube_rhs_on_manifold_agrees_with_extrinsic():
    u = rand_curve(64, "s2", 1)
    c = FlowCoefficients(1.0, 0.5, 0.02)
    np.testing.assert_allclose(rhs_regularized_tube(u.points, c, "s2", u.grid.length), rhs_extrinsic(u, c), atol=1e-12)


def test_tube_rhs_ignores_constant_normal_offset_in_F():
    u = rand_curve(64, "s6", 2)
    c = FlowCoefficients(1.0, 0.5, 0.02)
    Q = 1.1 * u.points
    F = rhs_regularized_tube(Q, c, "s6", u.grid.length) + c.epsilon * np.fft.irfft(
        (2 * np.pi * np.fft.rfftfreq(64, d=u.grid.dx)) ** 4 * np.fft.rfft(Q, axis=0).T, n=64
    ).T
    np.testing.assert_allclose(F, nonlinearity(u, c), atol=1e-9)


def test_tube_rhs_raises_outside_tube():
    u = rand_curve(32, "s2", 1)
    with pytest.raises(TubeExceeded):
        rhs_regularized_tube(1.7 * u.points, FlowCoefficients(1.0, 0.5, 0.1), "s2", u.grid.length)


def test_normal_part_decays_under_tube_flow():
    # d/dt ||rho||^2 = -2 eps ||rho_xx||^2 with rho = Q - pi(Q), measured by a
    # centred RK4 difference of the tube equation
    from dispflow.fields import spectral_derivative

    u = perturbed_circle(128)
    g, c = u.grid, FlowCoefficients(1.0, 0.5, 1e-2)
    Q0 = u.points * (1 + 0.05 * (1 + 0.5 * np.cos(2 * g.x)))[:, None]

    def rho(Q):
        return Q - u.target.project(Q)

    def f(Q):
        return rhs_regularized_tube(Q, c, "s2", g.length)

    h = 1e-7
    k1 = f(Q0)
    k2 = f(Q0 + h / 2 * k1)
    k3 = f(Q0 + h / 2 * k2)
    k4 = f(Q0 + h * k3)
    inc = h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    n2 = lambda r: np.sum(r * r) * g.dx
    rate = (n2(rho(Q0 + inc)) - n2(rho(Q0 - inc))) / (2 * h)
    pred = -2 * c.epsilon * n2(spectral_derivative(rho(Q0), 2, g.length))
    assert pred < 0 and abs(rate - pred) <= 0.05 * abs(pred)


def test_darios_cases():
    gc = great_circle(64)
    assert np.abs(darios_rhs(gc)).max() < 1e-12
    const = MapState(gc.grid, 0.0, np.tile([0, 0, 1.0], (64, 1)), "s2")
    assert np.abs(darios_rhs(const)).max() == 0.0
    u = rand_curve(128, "s2", 3)
    np.testing.assert_allclose(darios_rhs(u), rhs_intrinsic(u, FlowCoefficients(0.0, 0.0)).vectors, atol=1e-10)
    assert np.abs(np.einsum("ij,ij->i", darios_rhs(u), u.points)).max() < 1e-12


def test_fm_cases():
    u = rand_curve(128, "s2", 4)
    F = fm_rhs(u, 0.9)
    np.testing.assert_allclose(F, rhs_intrinsic(u, FlowCoefficients(0.9, 0.45)).vectors, atol=1e-10)
    assert np.abs(np.einsum("ij,ij->i", F, u.points)).max() < 1e-12
    const = MapState(u.grid, 0.0, np.tile([1.0, 0, 0], (128, 1)), "s2")
    assert np.abs(fm_rhs(const, 0.9)).max() == 0.0
    gc = great_circle(64)
    np.testing.assert_allclose(fm_rhs(gc, 0.9), 0.45 * velocity(gc).vectors, atol=1e-12)


def test_s2_models_reject_other_targets():
    u = rand_curve(32, "s6", 0)
    with pytest.raises(ValueError):
        darios_rhs(u)
    with pytest.raises(ValueError):
        fm_rhs(u, 1.0)


def test_raw_arrays_need_target_and_length():
    u = rand_curve(32, "s2", 0)
    with pytest.raises(TypeError):
        rhs_extrinsic(u.points, FlowCoefficients(1.0, 0.0))
    np.testing.assert_array_equal(
        rhs_extrinsic(u.points, FlowCoefficients(1.0, 0.0), "s2", u.grid.length),
        rhs_extrinsic(u, FlowCoefficients(1.0, 0.0)),
    )
