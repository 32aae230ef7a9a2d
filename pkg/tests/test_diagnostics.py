import csv
import io
import json

import numpy as np
import pytest

from dispflow import diagnostics as dg
from dispflow.fields import Grid, MapState, TangentSection, iterated_covariant, l2_norm_sq, velocity
from dispflow.pde import FlowCoefficients

from conftest import TWO_PI, great_circle, perturbed_circle, rand_curve, random_tangent


def test_gauge_factor_zero_velocity():
    u = MapState(Grid(32, 1.0), 0.0, np.tile([0, 0, 1.0], (32, 1)), "s2")
    assert np.all(dg.gauge_factor(u, 1.0) == 0.0)
    assert dg.appendix_commutator_check(u, 4, 1.0) == 0.0


@pytest.mark.parametrize("a", [0.5, -2.0])
def test_gauge_factor_great_circle_is_linear(a):
    u = great_circle(64, length=3.0)
    c0 = TWO_PI / 3.0
    K = dg.gauge_factor(u, a)
    np.testing.assert_allclose(K, -(c0**2) * u.grid.x / (3 * a), atol=1e-12)
    np.testing.assert_allclose(dg.gauge_factor(u, a, method="spectral"), K, atol=1e-12)


def test_gauge_factor_monotone_with_sign_of_a():
    u = rand_curve(64, "s6", 1)
    for a in (1.3, -0.4):
        dK = np.diff(dg.gauge_factor(u, a))
        assert np.all(np.sign(dK) == -np.sign(a))
    with pytest.raises(ValueError):
        dg.gauge_factor(u, 0.0)
    with pytest.raises(ValueError):
        dg.gauge_factor(u, 1.0, method="trapezoid")


def test_gauge_methods_agree_to_quadrature_order():
    u = rand_curve(256, "s2", 2)
    Kr = dg.gauge_factor(u, 1.0)
    Ks = dg.gauge_factor(u, 1.0, method="spectral")
    assert np.abs(Kr - Ks).max() < 2 * u.grid.dx * np.abs(Ks).max()


def test_gauge_bound_below_ceiling():
    for seed in range(5):
        u = rand_curve(64, "s6", seed)
        l2 = l2_norm_sq(velocity(u))
        for a in (0.5, 1.0, -3.0):
            assert dg.gauge_bound(u, a) <= dg.gauge_ceiling(l2, a)


def test_gauge_energy_definition():
    u = rand_curve(64, "s2", 3)
    Ws = iterated_covariant(u, 4)
    K = dg.gauge_factor(u, 0.7)
    exp = np.sqrt(sum(l2_norm_sq(W) for W in Ws[:4]) + l2_norm_sq(Ws[4].scaled(np.exp(K))))
    assert dg.gauge_energy(u, 4, 0.7) == pytest.approx(exp, rel=1e-14)
    np.testing.assert_allclose(dg.gauged_section(u, 4, 0.7).vectors, Ws[4].scaled(np.exp(K)).vectors)
    with pytest.raises(ValueError):
        dg.gauge_energy(u, 0, 1.0)


def test_conserved_energy_great_circle():
    u = great_circle(128, length=2.0)
    c0 = TWO_PI / 2.0
    assert dg.conserved_energy(u) == pytest.approx(c0**6 * 2.0 / 8, rel=1e-12)


def test_conserved_energy_rejects_s6():
    with pytest.raises(dg.WrongTarget):
        dg.conserved_energy(rand_curve(32, "s6", 0))


def test_conserved_energy_flat_torus_is_bending_energy():
    u = rand_curve(128, "t2-clifford", 0)
    assert dg.conserved_energy(u) == pytest.approx(l2_norm_sq(iterated_covariant(u, 2)[2]), rel=1e-14)


def test_dissipation_residual_geodesic_is_floor_dominated():
    u = great_circle(64)
    v = u.replace(time=1e-4)
    assert dg.dissipation_residual(u, v, FlowCoefficients(1.0, 0.5, 0.01), 1e-4) < 1e-6


def test_dissipation_residual_conservation_mode():
    u = perturbed_circle(64)
    assert dg.dissipation_residual(u, u.replace(time=1e-3), FlowCoefficients(1.0, 0.5), 1e-3) == 0.0


@pytest.mark.parametrize("seed", [0, 1])
def test_appendix_identities_on_s6(seed):
    u = rand_curve(256, "s6", seed)
    assert dg.appendix_commutator_check(u, 4, 1.0) < 1e-8
    assert dg.appendix_commutator_check(u, 1, -0.6) < 1e-8


def test_appendix_identities_great_circle():
    assert dg.appendix_commutator_check(great_circle(64, target="s6"), 4, 1.0) < 1e-10


def test_appendix_residual_decays_spectrally():
    res = [dg.appendix_commutator_check(rand_curve(n, "s6", 0), 4, 1.0) for n in (16, 32, 64, 128)]
    floor = 1e-11
    for coarse, fine in zip(res, res[1:]):
        assert fine < floor or fine < 1e-2 * coarse
    assert res[0] > 1e-4 and res[-1] < floor


def test_appendix_check_needs_m_and_a():
    u = rand_curve(32, "s6", 0)
    with pytest.raises(ValueError):
        dg.appendix_commutator_check(u, 0, 1.0)
    with pytest.raises(ValueError):
        dg.appendix_commutator_check(u, 4, 0.0)


def test_pairings_on_kahler_target_vanish():
    u = rand_curve(128, "s2", 1)
    V = iterated_covariant(u, 4)[4]
    assert dg.nabla_J_energy_pairing_check(u, V) <= 1e-10


def test_pairings_on_s6():
    u = rand_curve(256, "s6", 1)
    V = iterated_covariant(u, 4)[4]
    assert dg.nabla_J_energy_pairing_check(u, V) <= 1e-8
    W1 = TangentSection(u, random_tangent(u, 1))
    W2 = TangentSection(u, random_tangent(u, 2))
    assert dg.nabla_J_symmetrized_pairing(u, W1, W2) <= 1e-8


def test_record_and_csv():
    u = perturbed_circle(64)
    c = FlowCoefficients(1.0, 0.5, 0.01)
    r = dg.record(u, c, 4)
    assert len(r.sobolev) == 5 and r.l2_energy == r.sobolev[0]
    assert all(s >= 0 for s in r.sobolev) and r.constraint_violation >= 0
    assert r.gauge_bound <= dg.gauge_ceiling(r.l2_energy, 1.0)
    assert dg.norm_equivalence_holds(r, 4, dg.gauge_ceiling(r.l2_energy, 1.0))
    text = dg.records_to_csv([r], 4)
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["t", "l2", "h1", "h2", "h3", "h4", "N_m", "E", "constraint", "dissipation_residual", "gauge_bound"]
    assert rows[1][9] == ""  # no previous state, no dissipation residual


def test_record_on_s6_leaves_E_empty():
    r = dg.record(rand_curve(32, "s6", 0), FlowCoefficients(1.0, 0.5), 4)
    assert r.conserved_E is None
    row = dg.records_to_csv([r], 4).splitlines()[1].split(",")
    assert row[7] == ""


def test_record_without_gauge_when_a_is_zero():
    r = dg.record(perturbed_circle(32), FlowCoefficients(0.0, 0.0, 0.1), 2)
    assert r.gauge_energy_Nm is None and r.gauge_bound is None


def test_norm_equivalence_detects_violation():
    r = dg.record(perturbed_circle(64), FlowCoefficients(1.0, 0.5), 4)
    assert not dg.norm_equivalence_holds(r, 4, 1e-3)


def test_relative_drift():
    assert dg.relative_drift([2.0, 2.002, 1.999]) == pytest.approx(1e-3)
    assert dg.relative_drift([None, None]) is None


def test_summary_keys_in_order():
    class T:
        pass

    from dispflow.solver import Termination, Trajectory

    u = perturbed_circle(32)
    tr = Trajectory(snapshots=[u], diagnostics=[dg.record(u, FlowCoefficients(1.0, 0.5), 4)], termination=Termination("completed"))
    s = dg.summarize(tr)
    assert list(s) == ["termination", "t_final", "max_constraint", "max_drift_l2", "max_drift_E", "doubling_time_N4"]
    assert json.loads(dg.summary_json(s)) == s
