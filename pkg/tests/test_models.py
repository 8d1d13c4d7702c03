import math

import numpy as np
import pytest

from reebspiral import ContactModel, ManifoldPoint, ModelError, builtin_model, lie_bracket, reeb_vector
from reebspiral.models import (MODEL_NAMES, contact_form, frame_components, s3_transition_jacobian,
                               sample_points, validate_model)


def test_heisenberg_frame_at_origin(heis):
    F = heis.frame_at(np.zeros(3))
    np.testing.assert_array_equal(F, [[1, 0, 0], [0, 1, 0]])


def test_quotient_shares_frame_and_period(heis_q):
    np.testing.assert_array_equal(heis_q.frame_at(np.zeros(3)), [[1, 0, 0], [0, 1, 0]])
    assert heis_q.periods[2] == pytest.approx(2 * math.pi)
    d = heis_q.difference(ManifoldPoint([0.0, 0.0, 2 * math.pi + 0.1]), ManifoldPoint(np.zeros(3)))
    np.testing.assert_allclose(d, [0, 0, 0.1], atol=1e-14)


@pytest.mark.parametrize("name,kw", [("nonsense", {}), ("heisenberg-quotient", {"T0": 0.0}),
                                     ("heisenberg-quotient", {"T0": -1.0}), ("s3", {"aniso": 0.0})])
def test_bad_catalog_requests(name, kw):
    with pytest.raises(ModelError):
        builtin_model(name, **kw)


@pytest.mark.parametrize("q", [(0.0, 0.0, 0.0), (3.0, -2.0, 5.0)])
def test_heisenberg_bracket_is_vertical(heis, q):
    np.testing.assert_allclose(lie_bracket(heis, "X", "Y", q).components, [0, 0, 1], atol=1e-12)


@pytest.mark.parametrize("name", MODEL_NAMES)
def test_bracket_with_itself_vanishes(name):
    m = builtin_model(name)
    for q in sample_points(m, 5, seed=3):
        np.testing.assert_allclose(lie_bracket(m, "X", "X", q).components, 0, atol=1e-12)
        np.testing.assert_allclose(lie_bracket(m, "Y", "Y", q).components, 0, atol=1e-12)


def test_bracket_antisymmetry(s3):
    for q in sample_points(s3, 5, seed=4):
        a = lie_bracket(s3, "X", "Z", q).components
        b = lie_bracket(s3, "Z", "X", q).components
        np.testing.assert_allclose(a, -b, atol=1e-12)


def test_heisenberg_reeb_field(heis, rng):
    for q in rng.uniform(-3, 3, size=(10, 3)):
        np.testing.assert_allclose(reeb_vector(heis, q), [0, 0, -1], atol=1e-12)


def test_heisenberg_contact_form(heis, rng):
    np.testing.assert_allclose(contact_form(heis, np.zeros(3)).components, [0, 0, -1], atol=1e-14)
    for x, y, z in rng.uniform(-3, 3, size=(10, 3)):
        np.testing.assert_allclose(contact_form(heis, (x, y, z)).components, [-y / 2, x / 2, -1],
                                   atol=1e-12)


@pytest.mark.parametrize("name", MODEL_NAMES)
def test_contact_form_annihilates_frame(name):
    m = builtin_model(name)
    for q in sample_points(m, 10, seed=5):
        a = contact_form(m, q).components
        F = m.frame_at(q)
        assert abs(a @ F[0]) < 1e-12 and abs(a @ F[1]) < 1e-12
        assert a @ reeb_vector(m, q) == pytest.approx(1.0, abs=1e-12)


def test_validate_heisenberg_tight(heis):
    rep = validate_model(heis, n=100)
    assert rep.ok(1e-8), rep.lines()


def test_validate_s3(s3):
    rep = validate_model(s3, n=100)
    assert rep.ok(1e-6), rep.lines()


def test_validate_flags_degenerate_frame():
    def frame(c, chart):
        x, y, z = c
        X = np.array([1.0, 0.0, -y / 2])
        return np.vstack([X, X])

    bad = ContactModel("degenerate", frame)
    rep = validate_model(bad, n=5)
    assert rep.degenerate and not rep.ok()
    assert any("dependent" in f for f in rep.failures)


def test_custom_model_without_jacobians_matches_catalog(heis, rng):
    # same frame, derivatives by finite differences only
    plain = ContactModel("heisenberg-fd", heis.frame)
    for q in rng.uniform(-2, 2, size=(5, 3)):
        np.testing.assert_allclose(reeb_vector(plain, q), reeb_vector(heis, q), atol=1e-8)
        np.testing.assert_allclose(lie_bracket(plain, "X", "Y", q).components, [0, 0, 1], atol=1e-8)
    assert validate_model(plain, n=20).ok(1e-6)


def test_s3_charts_agree(s3, rng):
    # the same point in both charts carries the same frame up to the transition Jacobian
    for q in sample_points(s3, 10, seed=6):
        other = s3.to_chart(q, 1 - q.chart)
        back = s3.to_chart(other, q.chart)
        np.testing.assert_allclose(back.coords, q.coords, atol=1e-12)
        _, jac = s3.transition(q.coords, q.chart, other.chart)
        np.testing.assert_allclose(jac @ s3.frame_at(q).T, s3.frame_at(other).T, atol=1e-10)


def test_s3_transition_jacobian_matches_differences(rng):
    x = rng.normal(size=3) * 0.7
    h = 1e-6
    fd = np.empty((3, 3))
    from reebspiral.models import _s3_transition
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd[:, i] = (_s3_transition(x + e, 0, 1)[0] - _s3_transition(x - e, 0, 1)[0]) / (2 * h)
    np.testing.assert_allclose(s3_transition_jacobian(x), fd, atol=1e-8)


def test_frame_components_round_trip(s3):
    q = sample_points(s3, 1, seed=7)[0]
    F = s3.frame_at(q)
    v = 0.3 * F[0] - 1.2 * F[1]
    v = v + 0.5 * reeb_vector(s3, q)
    np.testing.assert_allclose(frame_components(s3, q, v), [0.3, -1.2, 0.5], atol=1e-10)


def test_manifold_point_rejects_nonfinite():
    with pytest.raises(ValueError):
        ManifoldPoint([0.0, math.nan, 0.0])
