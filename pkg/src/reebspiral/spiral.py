"""Spiraling of high-momentum geodesics around Reeb orbits.

A unit-speed geodesic starting at q0 with velocity X0 and Reeb momentum
h_Z = h0 >> 1 follows, for times O(h0), a circle of radius J0 ~ 1/h0 turning
at angular speed 1/J0 around the Reeb orbit of a nearby point Q0, itself
traversed at speed J0/2:

    position(t) = Gamma(J0 t/2) - eps i J0 e^{i sigma t/J0} Y(J0 t/2)
    velocity(t) = e^{i sigma t/J0} Y(J0 t/2)

with Y the metric transport of Y0 along Gamma, i the rotation X -> Y of D,
and (eps, sigma) sign conventions calibrated from a single short loop.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .models import ContactModel, ManifoldPoint, TangentVec, as_point, reeb_vector
from .reeb import REEB_CONFIG, ReebOrbit, frame_components, reeb_flow, transport_frame, transport_rate
from .symplectic import (DEFAULT_CONFIG, IntegratorConfig, PhasePoint, frame_batch, geodesic,
                         integrate, lifts)

MIN_H0 = 5.0
NOISE_FLOOR = 1e-11
SPIRAL_CONFIG = IntegratorConfig(rel_tol=1e-13, abs_tol=1e-13, max_step=0.1)
SAMPLES_PER_LOOP = 32


class RegimeError(ValueError):
    """Momentum too small for the asymptotic formulas, or horizon exceeded."""


@dataclass(frozen=True)
class ConeCoordinates:
    rho_hat: float
    J_hat: float
    theta_hat: float
    frame_used: tuple
    on_boundary: bool = False


def times_i(c: np.ndarray) -> np.ndarray:
    """Multiplication by i on (X, Y) components."""
    return np.stack([-c[..., 1], c[..., 0]], axis=-1)


def cone_coordinates(model: ContactModel, z: PhasePoint, frame=None) -> ConeCoordinates:
    """(rho, J, theta) estimated from h_Z, g* and the angle of (h_E1, h_E2).

    ``frame`` is a pair of D-vectors (chart vectors or (X, Y) components);
    the default is (X, Y).
    """
    hx, hy, hz = (float(v[0]) for v in lifts(model, z.q.coords, z.p.components, [z.q.chart]))
    if not hz > 0:
        raise ValueError("h_Z <= 0: point is not in the positive cone")
    if frame is None:
        e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    else:
        e1 = frame_components(model, z.q, frame[0])
        e2 = frame_components(model, z.q, frame[1])
    h = np.array([hx, hy])
    g = float(h @ h)
    return ConeCoordinates(hz, math.sqrt(g) / hz, math.atan2(float(e2 @ h), float(e1 @ h)),
                           (tuple(e1), tuple(e2)), on_boundary=g == 0.0)


def model_flow(m, J: float, theta: float, t: float, model: ContactModel,
               cfg: IntegratorConfig = REEB_CONFIG) -> tuple:
    """Normal-form flow: (R_{J t/2}(m), J, theta + t/J)."""
    if not J > 0:
        raise ValueError("J must be positive")
    return reeb_flow(model, as_point(m), J * t / 2.0, cfg), J, theta + t / J


def initial_covector(model: ContactModel, q0: ManifoldPoint, X0c: np.ndarray, h0: float) -> np.ndarray:
    """Covector with (h_X, h_Y) equal to the components of X0 and h_Z = h0."""
    F = model.frame_at(q0)
    rows = np.vstack([F[0], F[1], reeb_vector(model, q0)])
    return np.linalg.solve(rows, np.array([X0c[0], X0c[1], h0]))


def _unit_components(model, q0, X0) -> np.ndarray:
    if X0 is None:
        return np.array([1.0, 0.0])
    c = frame_components(model, q0, X0)
    n = float(np.linalg.norm(c))
    if abs(n - 1.0) > 1e-9:
        raise ValueError("X0 must be a unit vector of D")
    return c / n


@dataclass(frozen=True, eq=False)
class SpiralPrediction:
    model: ContactModel
    q0: ManifoldPoint
    X0: np.ndarray          # (X, Y) components at q0
    h0: float
    J0: float
    Q0: ManifoldPoint
    Y0: np.ndarray          # (X, Y) components at Q0
    eps: int
    sigma: int
    loop_period: float
    transport_rate: float
    horizon: float
    phase0: float = 0.0
    calibration: dict = field(default_factory=dict)

    @property
    def radius(self) -> float:
        return self.J0

    @property
    def reeb_speed(self) -> float:
        return self.J0 / 2.0

    @property
    def center_orbit(self) -> ReebOrbit:
        return transport_frame(self.model, self.Q0, (self.Y0, times_i(self.Y0)),
                               self.reeb_speed * self.horizon, samples=64)


def _velocity_angle_period(model, z0: PhasePoint, h0: float, cfg, turns: int = 8) -> tuple:
    """Mean duration of the first ``turns`` full turns of (h_X, h_Y), and the turn direction."""
    guess = 2 * math.pi / h0
    ts = np.linspace(0.0, (turns + 0.6) * guess, 64 * turns + 1)
    tr = integrate(model, "gstar", z0, ts[-1], cfg, ts)
    hx, hy, _ = lifts(model, tr.q, tr.p, tr.chart)
    ang = np.unwrap(np.arctan2(hy, hx))
    start = ang[0]
    ang -= start
    target = 2 * math.pi * turns
    k = int(np.argmax(np.abs(ang) >= target))
    if abs(ang[k]) < target:
        raise RegimeError("velocity did not complete a turn; momentum too small")
    sign = 1 if ang[k] > 0 else -1
    i0 = k - 1
    base = tr.point(i0)
    a0 = ang[i0]

    def turn(s):
        if s == 0.0:
            end = base
        else:
            end = integrate(model, "gstar", base, s, cfg, np.array([s])).end
        hx_, hy_, _ = lifts(model, end.q.coords, end.p.components, [end.q.chart])
        a = math.atan2(float(hy_[0]), float(hx_[0])) - start
        a = a0 + math.remainder(a - a0, 2 * math.pi)
        return a - sign * target

    ds = ts[k] - ts[i0]
    s = brentq(turn, 0.0, ds, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    return (ts[i0] + s) / turns, sign


def _solve_J(R: float, sigma: int, w: float) -> float:
    """Positive J with sigma/J + w J/2 = R, the root closest to 1/|R|."""
    J = 1.0 / abs(R)
    for _ in range(200):
        denom = R - w * J / 2.0
        J_new = sigma / denom
        if not J_new > 0:
            return 1.0 / abs(R)
        if abs(J_new - J) <= 1e-16 * J:
            return J_new
        J = J_new
    return J


def _center(model, q0: ManifoldPoint, Y0: np.ndarray, J0: float, eps: int) -> ManifoldPoint:
    """Q with Q - eps J0 i Y0 = q0, the offset evaluated with the frame at Q."""
    iY = times_i(Y0)
    Q = q0.coords.copy()
    for _ in range(100):
        F = model.frame(Q, q0.chart)
        Q_new = q0.coords + eps * J0 * (iY @ F)
        if np.max(np.abs(Q_new - Q)) <= 1e-17 + 1e-16 * np.max(np.abs(Q_new)):
            Q = Q_new
            break
        Q = Q_new
    return ManifoldPoint(Q, q0.chart)


def _build(model, q0, X0c, h0, J0, eps, sigma, P, w, horizon, calib) -> SpiralPrediction:
    Q0 = _center(model, q0, X0c, J0, eps)
    return SpiralPrediction(model, q0, X0c, h0, J0, Q0, X0c.copy(), eps, sigma, P, w, horizon,
                            calibration=calib)


@dataclass(frozen=True, eq=False)
class PredictedPath:
    """Predicted spiral sampled at ``t``.

    ``velocity`` holds chart vectors based on the centre orbit point
    ``center[i]`` (where the transported frame lives); ``vel_frame`` holds
    the same vectors as (X, Y) components.
    """

    t: np.ndarray
    position: np.ndarray
    chart: np.ndarray
    center: np.ndarray
    velocity: np.ndarray
    vel_frame: np.ndarray


def predict_path(pred: SpiralPrediction, ts) -> PredictedPath:
    ts = np.asarray(ts, dtype=float)
    if ts.size and np.max(np.abs(ts)) > pred.horizon * (1 + 1e-12):
        raise RegimeError("time beyond the prediction horizon")
    taus = pred.reeb_speed * ts
    orbit = transport_frame(pred.model, pred.Q0, (pred.Y0, times_i(pred.Y0)),
                            float(taus[-1]) if ts.size else 0.0, t_eval=taus)
    phase = pred.sigma * ts / pred.J0 + pred.phase0
    cs, sn = np.cos(phase), np.sin(phase)
    e = orbit.e1
    vel = np.stack([cs * e[:, 0] - sn * e[:, 1], sn * e[:, 0] + cs * e[:, 1]], axis=-1)
    disp = -pred.eps * pred.J0 * times_i(vel)
    X, Y, _ = frame_batch(pred.model, orbit.q, orbit.chart)
    pos = orbit.q + disp[:, :1] * X + disp[:, 1:] * Y
    return PredictedPath(ts, pos, orbit.chart, orbit.q, vel[:, :1] * X + vel[:, 1:] * Y, vel)


def predict_state(pred: SpiralPrediction, t: float) -> tuple:
    """Predicted position, and predicted velocity as a vector at the centre orbit point."""
    ts = np.array([0.0, t]) if t != 0.0 else np.array([0.0])
    path = predict_path(pred, ts)
    ch = int(path.chart[-1])
    return (ManifoldPoint(path.position[-1], ch),
            TangentVec(ManifoldPoint(path.center[-1], ch), path.velocity[-1]))


def _errors(model, pred: SpiralPrediction, tr, ts) -> tuple:
    """Position, chart-velocity and frame-velocity errors at each sample."""
    path = predict_path(pred, ts)
    hx, hy, _ = lifts(model, tr.q, tr.p, tr.chart)
    X, Y, _ = frame_batch(model, tr.q, tr.chart)
    true_q = tr.q.copy()
    true_v = hx[:, None] * X + hy[:, None] * Y
    for i in np.nonzero(tr.chart != path.chart)[0]:
        src = ManifoldPoint(true_q[i], int(tr.chart[i]))
        true_q[i], jac = model.transition(src.coords, src.chart, int(path.chart[i]))
        true_v[i] = jac @ true_v[i]
    pos_err = np.linalg.norm(true_q - path.position, axis=1)
    vel_err = np.linalg.norm(true_v - path.velocity, axis=1)
    vel_frame_err = np.hypot(hx - path.vel_frame[:, 0], hy - path.vel_frame[:, 1])
    return pos_err, vel_err, vel_frame_err


def spiral_prediction(model: ContactModel, q0, X0=None, h0: float = 20.0, c: float = 0.5,
                      signs: Optional[tuple] = None,
                      cfg: IntegratorConfig = SPIRAL_CONFIG) -> SpiralPrediction:
    """Spiral parameters for the geodesic from q0 with unit velocity X0 and h_Z = h0.

    J0 solves sigma/J0 + w J0/2 = R, where R is the measured mean angular speed
    of the velocity in the (X, Y) frame over its first turns and w the
    transport rate at q0. ``signs = (eps, sigma)`` skips the calibration that
    otherwise picks the pair with the smallest one-loop position error.
    """
    if not h0 >= MIN_H0:
        raise RegimeError(f"h0 = {h0} is below the asymptotic guard {MIN_H0}")
    q0 = as_point(q0)
    X0c = _unit_components(model, q0, X0)
    p0 = initial_covector(model, q0, X0c, h0)
    z0 = PhasePoint.make(q0.coords, p0, q0.chart)
    P, turn = _velocity_angle_period(model, z0, h0, cfg)
    R = turn * 2 * math.pi / P
    w = transport_rate(model, q0)
    sigma_meas = turn
    J0 = _solve_J(R, sigma_meas, w)
    horizon = c * h0
    if signs is not None:
        eps, sigma = signs
        return _build(model, q0, X0c, h0, J0, eps, sigma, P, w, horizon, {"calibrated": False})
    ts = np.linspace(0.0, P, SAMPLES_PER_LOOP + 1)
    tr = integrate(model, "gstar", z0, P, cfg, ts)
    errs = {}
    for eps in (1, -1):
        for sigma in (1, -1):
            pred = _build(model, q0, X0c, h0, J0, eps, sigma, P, w, max(horizon, P), {})
            errs[(eps, sigma)] = float(np.max(_errors(model, pred, tr, ts)[0]))
    eps, sigma = min(errs, key=lambda k: (errs[k], -k[0], -k[1]))
    calib = {"calibrated": True, "one_loop_errors": {f"{k[0]:+d},{k[1]:+d}": v for k, v in errs.items()}}
    return _build(model, q0, X0c, h0, J0, eps, sigma, P, w, horizon, calib)


def calibrate_signs(model: ContactModel, q0, X0=None, h0: float = 20.0) -> tuple:
    pred = spiral_prediction(model, q0, X0, h0)
    return pred.eps, pred.sigma


def _grid(pred: SpiralPrediction, T: float, per_loop: int = SAMPLES_PER_LOOP) -> np.ndarray:
    n = max(16, int(math.ceil(abs(T) / (2 * math.pi * pred.J0) * per_loop)))
    return np.linspace(0.0, T, n + 1)


@dataclass(frozen=True)
class SpiralRun:
    h0: float
    J0: float
    pos_err: float
    vel_err: float
    J_drift: float
    J_ratio: float
    signs: tuple
    vel_frame_err: float


def spiral_run(model: ContactModel, q0, X0=None, h0: float = 20.0, c: float = 0.5,
               signs: Optional[tuple] = None, cfg: IntegratorConfig = SPIRAL_CONFIG) -> SpiralRun:
    """One geodesic against its prediction over t in [0, c h0], plus the J drift."""
    pred = spiral_prediction(model, q0, X0, h0, c, signs, cfg)
    T = c * h0
    if T == 0.0:
        return SpiralRun(h0, pred.J0, 0.0, 0.0, 0.0, 1.0, (pred.eps, pred.sigma), 0.0)
    ts = _grid(pred, T)
    p0 = initial_covector(model, pred.q0, pred.X0, h0)
    tr = integrate(model, "gstar", PhasePoint.make(pred.q0.coords, p0, pred.q0.chart), T, cfg, ts)
    pos_err, vel_err, vel_frame_err = _errors(model, pred, tr, ts)
    J = np.sqrt(tr.gstar) / tr.hZ
    return SpiralRun(h0, pred.J0, float(pos_err.max()), float(vel_err.max()),
                     float(np.max(np.abs(J - J[0]))), float(np.max(J / J[0])),
                     (pred.eps, pred.sigma), float(vel_frame_err.max()))


def spiral_error(model: ContactModel, q0, X0=None, h0: float = 20.0, c: float = 0.5,
                 signs: Optional[tuple] = None, cfg: IntegratorConfig = SPIRAL_CONFIG) -> tuple:
    """(sup position error, sup velocity error) over t in [0, c h0]."""
    run = spiral_run(model, q0, X0, h0, c, signs, cfg)
    return run.pos_err, run.vel_err


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    r2: float
    points_used: int
    exact: bool = False

    def as_dict(self) -> dict:
        if self.exact:
            return {"slope": "exact", "intercept": None, "r2": None, "points_used": 0}
        return {"slope": self.slope, "intercept": self.intercept, "r2": self.r2,
                "points_used": self.points_used}


def fit_loglog(x: Sequence[float], y: Sequence[float], floor: float = NOISE_FLOOR) -> LogLogFit:
    """Least-squares line through (log x, log y), ignoring y below ``floor``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = y > floor
    if keep.sum() < 2:
        return LogLogFit(math.nan, math.nan, math.nan, int(keep.sum()), exact=not keep.any())
    lx, ly = np.log(x[keep]), np.log(y[keep])
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss if ss > 0 else 1.0
    return LogLogFit(float(slope), float(intercept), r2, int(keep.sum()))


@dataclass(frozen=True)
class ConvergenceScan:
    runs: list
    pos_fit: LogLogFit
    vel_fit: LogLogFit
    signs: tuple
    signs_stable: bool

    @property
    def exact(self) -> bool:
        return self.pos_fit.exact and self.vel_fit.exact

    def rows(self):
        for r in self.runs:
            yield (r.h0, r.J0, r.pos_err, r.vel_err, r.J_drift)

    def summary(self) -> dict:
        return {"pos": self.pos_fit.as_dict(), "vel": self.vel_fit.as_dict(),
                "signs": {"eps": self.signs[0], "sigma": self.signs[1]},
                "signs_stable": self.signs_stable}


def _map(fn, items, workers: int):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def convergence_scan(model: ContactModel, q0, X0=None, h0_list=(10.0, 20.0, 40.0, 80.0),
                     c: float = 0.5, cfg: IntegratorConfig = SPIRAL_CONFIG,
                     workers: int = 1) -> ConvergenceScan:
    """Fit log(error) against log(h0) across a scan; expected slopes -2 and -1."""
    h0_list = [float(h) for h in h0_list]
    if len(h0_list) < 3:
        raise ValueError("a convergence scan needs at least three h0 values")
    runs = _map(lambda h: spiral_run(model, q0, X0, h, c, None, cfg), h0_list, workers)
    signs = [r.signs for r in runs]
    hs = [r.h0 for r in runs]
    return ConvergenceScan(runs, fit_loglog(hs, [r.pos_err for r in runs]),
                           fit_loglog(hs, [r.vel_err for r in runs]), signs[0],
                           all(s == signs[0] for s in signs))


@dataclass(frozen=True)
class DriftResult:
    J0: float
    drift: float
    max_ratio: float
    T: float


def adiabatic_drift(model: ContactModel, q0, p0, T: float,
                    cfg: IntegratorConfig = SPIRAL_CONFIG, samples: Optional[int] = None) -> DriftResult:
    """max |J(t) - J(0)| and max J(t)/J(0) along the unit-speed geodesic over [0, T]."""
    q0 = as_point(q0)
    z = PhasePoint.make(q0.coords, p0, q0.chart)
    hz0 = float(lifts(model, z.q.coords, z.p.components, [q0.chart])[2][0])
    if not hz0 > 0:
        raise ValueError("h_Z(q0, p0) must be positive")
    hx, hy, hz = (float(v[0]) for v in lifts(model, q0.coords, np.asarray(p0, float), [q0.chart]))
    J_start = math.hypot(hx, hy) / hz
    if samples is None:
        samples = max(256, int(math.ceil(abs(T) / (2 * math.pi * J_start) * SAMPLES_PER_LOOP)))
    ts = np.linspace(0.0, T, samples + 1)
    tr = geodesic(model, q0, p0, T, cfg, ts)
    J = np.sqrt(tr.gstar) / tr.hZ
    return DriftResult(float(J[0]), float(np.max(np.abs(J - J[0]))), float(np.max(J / J[0])), T)


@dataclass(frozen=True)
class AdiabaticScan:
    h0: list
    results: list
    fit: LogLogFit

    @property
    def bounded(self) -> bool:
        return all(r.max_ratio <= 2.0 for r in self.results)

    def rows(self):
        for h, r in zip(self.h0, self.results):
            yield (h, r.J0, r.drift, r.max_ratio)


def adiabatic_scan(model: ContactModel, q0, X0=None, h0_list=(10.0, 20.0, 40.0, 80.0),
                   c: float = 0.5, cfg: IntegratorConfig = SPIRAL_CONFIG,
                   floor: float = 1e-14, workers: int = 1) -> AdiabaticScan:
    """Drift of J over t in [0, c h0] for each h0, and its exponent against J(0)."""
    q0 = as_point(q0)
    X0c = _unit_components(model, q0, X0)

    def one(h):
        p0 = initial_covector(model, q0, X0c, h)
        return adiabatic_drift(model, q0, p0, c * h, cfg)

    hs = [float(h) for h in h0_list]
    res = _map(one, hs, workers)
    return AdiabaticScan(hs, res, fit_loglog([r.J0 for r in res], [r.drift for r in res], floor))
