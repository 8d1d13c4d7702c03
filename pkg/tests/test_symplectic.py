import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import heisenberg_ivp, heisenberg_oracle

from reebspiral import (CharacteristicDataError, IntegratorConfig, PhasePoint, geodesic,
                        heisenberg_geodesic, integrate)
from reebspiral.models import contact_form, sample_points
from reebspiral.symplectic import (bracket_identity_residuals, cometric, hamiltonian_lift,
                                   hamiltonian_vector_field, lift_function, poisson_fd)


def test_two_oracle_routes_agree():
    t = np.linspace(0, 20, 20001)
    q0, p0 = (0.3, -0.2, 0.1), (0.6, 0.8, -3.0)
    np.testing.assert_allclose(heisenberg_oracle(t, q0, p0), heisenberg_ivp(t, q0, p0), atol=1e-9)


@pytest.mark.parametrize("q0,p0", [((0, 0, 0), (1.0, 0.0, -1.0)), ((0.3, -0.2, 0.1), (0.6, 0.8, -3.0)),
                                   ((1.0, 2.0, -1.0), (0.0, 1.0, 10.0)), ((0, 0, 0), (0.8, -0.6, 0.5))])
def test_geodesic_matches_heisenberg_oracle(heis, q0, p0):
    t = np.linspace(0, 20, 4001)
    tr = geodesic(heis, np.array(q0, float), np.array(p0, float), 20.0, t_eval=t)
    ref = heisenberg_ivp(t, q0, tr.p[0])
    assert np.max(np.abs(tr.q - ref)) < 1e-6
    assert np.max(np.abs(tr.gstar - 1.0)) < 1e-8


def _lifts(q0, p0):
    x, y, _ = q0
    return p0[0] - y / 2 * p0[2], p0[1] + x / 2 * p0[2], -p0[2]


def test_closed_form_helper_matches_oracle():
    t = np.linspace(0, 20, 20001)
    q0, p0 = (0.3, -0.2, 0.1), (0.6, 0.8, -3.0)
    np.testing.assert_allclose(heisenberg_geodesic(t, *_lifts(q0, p0), q0=q0),
                               heisenberg_oracle(t, q0, p0), atol=1e-9)


def test_lift_examples(heis):
    z = PhasePoint.make(np.zeros(3), [0.3, 0.0, -10.0])
    assert hamiltonian_lift(heis, "X", z) == pytest.approx(0.3)
    z = PhasePoint.make([1.0, -4.0, 2.0], [0.5, 1.5, 2.5])
    assert hamiltonian_lift(heis, "Z", z) == pytest.approx(-2.5)
    z = PhasePoint.make([1.0, -4.0, 2.0], np.zeros(3))
    assert hamiltonian_lift(heis, "Y", z) == 0.0


def test_cometric_examples(heis):
    assert cometric(heis, PhasePoint.make(np.zeros(3), [3.0, 4.0, 7.0])) == pytest.approx(25.0)
    assert cometric(heis, PhasePoint.make([1.0, 2.0, 0.0], [1.0, 0.0, -2.0])) == pytest.approx(10.0)


@pytest.mark.parametrize("name", ["heis", "s3"])
def test_cometric_vanishes_on_annihilator(name, request):
    m = request.getfixturevalue(name)
    for q in sample_points(m, 10, seed=1):
        p = -2.7 * contact_form(m, q).components
        assert cometric(m, PhasePoint.make(q.coords, p, q.chart)) < 1e-20


def test_poisson_examples(heis):
    z = np.array([0.4, -0.3, 1.0, 0.2, 0.7, -10.0])
    hX, hY = lift_function(heis, "X"), lift_function(heis, "Y")
    assert poisson_fd(hX, hY, z) == pytest.approx(10.0, abs=1e-6)
    assert poisson_fd(hX, hX, z) == 0.0
    assert poisson_fd(lambda q, p: q[0], lambda q, p: p[0], z) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("name", ["heis", "heis_q", "s3"])
def test_bracket_identities(name, request):
    res = bracket_identity_residuals(request.getfixturevalue(name), n=30, seed=2)
    assert max(res.values()) < 1e-6, res


def test_hamiltonian_vector_field_examples(heis):
    z = PhasePoint.make([0.5, -1.0, 2.0], [0.1, 0.2, 0.3])
    np.testing.assert_allclose(hamiltonian_vector_field("hZ", z, heis), [0, 0, -1, 0, 0, 0], atol=1e-14)
    np.testing.assert_allclose(hamiltonian_vector_field(lambda q, p: 4.2, z), 0.0)


@pytest.mark.parametrize("name", ["heis", "s3"])
def test_named_field_matches_finite_differences(name, request):
    m = request.getfixturevalue(name)
    from reebspiral.symplectic import cometric_function
    for q in sample_points(m, 5, seed=8):
        p = np.array([0.3, -0.8, 1.7])
        z = PhasePoint.make(q.coords, p, q.chart)
        g = cometric_function(m, q.chart)
        fd = hamiltonian_vector_field(lambda a, b: 0.5 * g(a, b), z)
        np.testing.assert_allclose(hamiltonian_vector_field("gstar", z, m), fd, atol=1e-7)


def test_reeb_lift_flow_is_vertical_translation(heis):
    z0 = PhasePoint.make(np.zeros(3), [0.2, -0.4, 1.5])
    tr = integrate(heis, "hZ", z0, 2.0)
    np.testing.assert_allclose(tr.q[-1], [0, 0, -2], atol=1e-12)
    np.testing.assert_allclose(tr.p[-1], z0.p.components, atol=1e-12)


def test_zero_time_gives_single_sample(s3):
    z0 = PhasePoint.make([0.1, 0.2, 0.3], [1.0, 0.0, 0.0])
    tr = integrate(s3, "gstar", z0, 0.0)
    assert len(tr) == 1
    np.testing.assert_array_equal(tr.q[0], z0.q.coords)


def test_characteristic_data_rejected(s3):
    q = sample_points(s3, 1, seed=9)[0]
    with pytest.raises(CharacteristicDataError):
        geodesic(s3, q, 3.0 * contact_form(s3, q).components, 1.0)


def test_s3_geodesic_crosses_charts_and_conserves_energy(s3):
    tr = geodesic(s3, np.zeros(3), np.array([1.0, 0.3, -0.5]), 30.0)
    assert set(np.unique(tr.chart)) == {0, 1}
    assert tr.energy_drift < 1e-8


def test_time_reversal(s3):
    tr = geodesic(s3, np.zeros(3), np.array([0.6, -0.2, 3.0]), 7.0)
    back = integrate(s3, "gstar", tr.end, -7.0)
    end = s3.to_chart(back.end.q, 0)
    np.testing.assert_allclose(end.coords, 0.0, atol=1e-8)


def test_compiled_and_interpreted_paths_agree(s3):
    plain = dataclasses.replace(s3, kernel=None)
    z0 = PhasePoint.make([0.2, -0.1, 0.3], [0.5, 0.4, 2.0])
    t = np.linspace(0, 5, 11)
    a = integrate(s3, "gstar", z0, 5.0, t_eval=t)
    b = integrate(plain, "gstar", z0, 5.0, t_eval=t)
    np.testing.assert_allclose(a.q, b.q, atol=1e-8)
    np.testing.assert_array_equal(a.chart, b.chart)


def test_callable_hamiltonian(heis):
    # H = p_x moves x at unit speed
    z0 = PhasePoint.make(np.zeros(3), [0.0, 0.0, 0.0])
    tr = integrate(heis, lambda q, p: p[0], z0, 1.5)
    np.testing.assert_allclose(tr.q[-1], [1.5, 0, 0], atol=1e-9)


def test_midpoint_method_conserves_energy(heis):
    cfg = IntegratorConfig(method="midpoint", midpoint_step=1e-2)
    tr = geodesic(heis, np.zeros(3), np.array([1.0, 0.0, -2.0]), 10.0, cfg)
    assert tr.energy_drift < 1e-10
    ref = heisenberg_ivp(tr.t, (0, 0, 0), tr.p[0])
    assert np.max(np.abs(tr.q - ref)) < 1e-3


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0)
    with pytest.raises(ValueError):
        IntegratorConfig(method="euler")


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.2, 2 * math.pi), st.floats(-8, 8))
def test_energy_and_reeb_momentum_conserved_on_heisenberg(x, y, angle, pz):
    from reebspiral import builtin_model
    m = builtin_model("heisenberg")
    p = np.array([math.cos(angle) + y / 2 * pz, math.sin(angle) - x / 2 * pz, pz])
    tr = geodesic(m, np.array([x, y, 0.0]), p, 5.0)
    assert tr.energy_drift < 1e-8
    assert np.max(np.abs(tr.hZ - tr.hZ[0])) < 1e-9
