import math

import numpy as np
import pytest

from reebspiral import (ManifoldPoint, PhasePoint, RegimeError, adiabatic_scan, convergence_scan,
                        fit_loglog, geodesic, spiral_prediction, spiral_run)
from reebspiral.models import contact_form
from reebspiral.spiral import (adiabatic_drift, calibrate_signs, cone_coordinates, initial_covector,
                               model_flow, predict_path, spiral_error, times_i)


def test_cone_coordinates_example(heis):
    cc = cone_coordinates(heis, PhasePoint.make(np.zeros(3), [1.0, 0.0, -10.0]))
    assert (cc.rho_hat, cc.J_hat, cc.theta_hat) == pytest.approx((10.0, 0.1, 0.0))
    assert not cc.on_boundary


def test_cone_coordinates_boundary(heis):
    q = ManifoldPoint([0.3, -0.2, 0.0])
    cc = cone_coordinates(heis, PhasePoint.make(q.coords, 4.0 * contact_form(heis, q).components))
    assert cc.J_hat == 0.0 and cc.on_boundary


def test_cone_coordinates_wrong_cone(heis):
    with pytest.raises(ValueError):
        cone_coordinates(heis, PhasePoint.make(np.zeros(3), [1.0, 0.0, 10.0]))


def test_cone_angle_in_rotated_frame(heis):
    c, s = math.cos(0.3), math.sin(0.3)
    cc = cone_coordinates(heis, PhasePoint.make(np.zeros(3), [1.0, 0.0, -10.0]), ([c, s], [-s, c]))
    assert cc.theta_hat == pytest.approx(-0.3)


def test_model_flow(heis_q):
    m = ManifoldPoint([0.1, 0.2, 0.3])
    q, J, theta = model_flow(m, 0.5, 0.0, math.pi, heis_q)
    np.testing.assert_allclose(q.coords, [0.1, 0.2, 0.3 - math.pi / 4], atol=1e-12)
    assert (J, theta) == (0.5, pytest.approx(2 * math.pi))
    q, J, theta = model_flow(m, 0.5, 1.0, 0.0, heis_q)
    assert q.coords.tolist() == m.coords.tolist() and theta == 1.0


def test_times_i():
    np.testing.assert_array_equal(times_i(np.array([1.0, 0.0])), [0.0, 1.0])
    np.testing.assert_array_equal(times_i(times_i(np.array([0.3, 0.4]))), [-0.3, -0.4])


def test_initial_covector_lifts(s3):
    q = ManifoldPoint([0.2, 0.1, -0.3])
    p = initial_covector(s3, q, np.array([0.6, 0.8]), 17.0)
    cc = cone_coordinates(s3, PhasePoint.make(q.coords, p))
    assert cc.rho_hat == pytest.approx(17.0) and cc.J_hat == pytest.approx(1 / 17)


def test_heisenberg_prediction_example(heis):
    pred = spiral_prediction(heis, np.zeros(3), [1.0, 0.0, 0.0], 10.0)
    np.testing.assert_allclose(pred.Q0.coords, [0.0, -0.1, 0.0], atol=1e-12)
    assert pred.J0 == pytest.approx(0.1, abs=1e-12)
    assert pred.radius == pytest.approx(0.1, abs=1e-12)
    assert pred.reeb_speed == pytest.approx(0.05, abs=1e-12)
    assert pred.loop_period == pytest.approx(2 * math.pi / 10, abs=1e-12)


def test_heisenberg_prediction_matches_closed_form(heis):
    """Centre -i/h0, radius 1/h0, z dropping by pi r^2 per loop."""
    h0 = 10.0
    pred = spiral_prediction(heis, np.zeros(3), [1.0, 0.0, 0.0], h0)
    t = np.linspace(0.0, pred.horizon, 257)
    path = predict_path(pred, t)
    xy = (1j / h0) * (np.exp(-1j * h0 * t) - 1)
    z = -0.5 * (t / h0 - np.sin(h0 * t) / h0**2)
    np.testing.assert_allclose(path.position, np.column_stack([xy.real, xy.imag, z]), atol=1e-10)
    # per loop, z drops by pi r^2 = pi / h0^2
    loop = 2 * math.pi / h0
    assert predict_path(pred, [0.0, loop]).position[-1, 2] == pytest.approx(-math.pi / h0**2, abs=1e-12)


@pytest.mark.parametrize("name,h0", [("heis", 10.0), ("heis", 33.0), ("heis_q", 80.0)])
def test_flat_models_are_exact(name, h0, request):
    run = spiral_run(request.getfixturevalue(name), (0.3, -0.7, 0.2), None, h0, 0.5)
    assert run.pos_err < 1e-9
    assert run.vel_frame_err < 1e-9
    assert run.J_drift < 1e-10


def test_zero_horizon(s3):
    assert spiral_error(s3, np.zeros(3), None, 10.0, 0.0) == (0.0, 0.0)


def test_regime_guard(s3):
    with pytest.raises(RegimeError):
        spiral_prediction(s3, np.zeros(3), None, 2.0)
    pred = spiral_prediction(s3, np.zeros(3), None, 10.0, 0.5)
    with pytest.raises(RegimeError):
        predict_path(pred, [0.0, 6.0])


def test_velocity_must_be_unit(s3):
    with pytest.raises(ValueError):
        spiral_prediction(s3, np.zeros(3), s3.frame_at(np.zeros(3))[0] * 2, 10.0)


def test_calibration_is_stable(s3):
    signs = {calibrate_signs(s3, (0.1, 0.2, -0.1), None, h0) for h0 in (10.0, 20.0, 40.0)}
    assert len(signs) == 1


def test_fixed_signs_skip_calibration(s3):
    pred = spiral_prediction(s3, np.zeros(3), None, 20.0, signs=(-1, -1))
    assert pred.calibration == {"calibrated": False}


def test_s3_prediction_starts_at_q0(s3):
    pred = spiral_prediction(s3, (0.1, -0.2, 0.2), None, 40.0)
    path = predict_path(pred, [0.0])
    np.testing.assert_allclose(path.position[0], [0.1, -0.2, 0.2], atol=1e-12)


def test_s3_errors_shrink_with_momentum(s3):
    a = spiral_run(s3, np.zeros(3), None, 10.0)
    b = spiral_run(s3, np.zeros(3), None, 40.0)
    assert b.pos_err < a.pos_err / 8
    assert b.vel_frame_err < a.vel_frame_err / 2


def test_fit_loglog_recovers_power_law():
    x = np.array([10.0, 20.0, 40.0, 80.0])
    fit = fit_loglog(x, 3.0 * x**-2.0)
    assert fit.slope == pytest.approx(-2.0) and fit.r2 == pytest.approx(1.0)
    assert fit.intercept == pytest.approx(math.log(3.0))


def test_fit_loglog_noise_floor():
    fit = fit_loglog([1, 2, 3], [1e-13, 1e-14, 0.0])
    assert fit.exact and fit.as_dict()["slope"] == "exact"
    partial = fit_loglog([1, 2, 4], [1.0, 0.25, 1e-15])
    assert partial.points_used == 2 and partial.slope == pytest.approx(-2.0)


def test_heisenberg_scan_reports_exact(heis):
    scan = convergence_scan(heis, np.zeros(3), None, (10.0, 20.0, 40.0), 0.5)
    assert scan.pos_fit.exact and scan.signs_stable


def test_convergence_scan_needs_three_points(s3):
    with pytest.raises(ValueError):
        convergence_scan(s3, np.zeros(3), None, (10.0, 20.0))


def test_heisenberg_action_is_conserved(heis):
    p0 = initial_covector(heis, ManifoldPoint(np.zeros(3)), np.array([1.0, 0.0]), 20.0)
    assert adiabatic_drift(heis, np.zeros(3), p0, 30.0).drift < 1e-10


def test_adiabatic_scan_s3(s3):
    scan = adiabatic_scan(s3, np.zeros(3), None, (10.0, 20.0, 40.0), 0.5)
    assert scan.bounded
    assert scan.fit.slope > 2.5
    assert [r.J0 for r in scan.results] == pytest.approx([0.1, 0.05, 0.025])


@pytest.mark.parametrize("h0", [10.0, 20.0, 40.0, 80.0])
def test_measured_radius_agrees_with_inverse_momentum(s3, h0):
    pred = spiral_prediction(s3, np.zeros(3), None, h0)
    assert abs(pred.J0 - 1 / h0) < 1 / h0**2


def test_s3_prediction_over_a_full_horizon(s3):
    run = spiral_run(s3, np.zeros(3), None, 20.0, 1.0)
    assert run.pos_err < 10 * run.J0**2


def test_s3_error_ratio_for_doubled_momentum(s3):
    a = spiral_run(s3, (0.1, 0.2, -0.1), None, 10.0)
    b = spiral_run(s3, (0.1, 0.2, -0.1), None, 20.0)
    assert 3.0 <= a.pos_err / b.pos_err <= 5.3


def test_threaded_scan_matches_serial(s3):
    serial = convergence_scan(s3, np.zeros(3), None, (10.0, 20.0, 40.0), 0.5, workers=1)
    threaded = convergence_scan(s3, np.zeros(3), None, (10.0, 20.0, 40.0), 0.5, workers=3)
    assert list(serial.rows()) == list(threaded.rows())
