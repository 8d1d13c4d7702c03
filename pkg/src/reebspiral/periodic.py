"""Predicted lengths of closed spiraling geodesics and a shooting solver for them.

A geodesic spiraling around a closed Reeb orbit of period T0 with monodromy
alpha0 closes up after covering the orbit j times and winding k times when
J T = 2 j T0 and T/J + j alpha0 = 2 k pi, which gives

    T_{j,k} = 2 sqrt(j k pi T0 (1 - j alpha0 / (2 k pi))).

Monodromy here uses the rotation sense of the spiral: alpha0 = sigma * a,
where a is the counter-clockwise accumulated transport angle and sigma the
calibrated rotation sign of the velocity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .models import ContactModel, ManifoldPoint, as_point
from .reeb import ReebOrbit, transport_rate
from .spiral import times_i, calibrate_signs, initial_covector
from .symplectic import IntegrationError, IntegratorConfig, PhasePoint, integrate, lifts

SHOOT_CONFIG = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-12, max_step=0.1)
FD_STEP = 1e-7
MAX_ITER = 50
# singular values below this fraction are symmetry directions or finite-difference noise
LSTSQ_RCOND = 1e-6


class PredictionError(ValueError):
    """The (j, k) prediction is outside its regime (non-positive discriminant)."""


def predicted_length(T0: float, alpha0: float, j: int, k: int) -> tuple:
    """(T_{j,k}, J) with J = 2 j T0 / T_{j,k}."""
    if not T0 > 0:
        raise PredictionError("T0 must be positive")
    if j < 1 or k < 1 or int(j) != j or int(k) != k:
        raise PredictionError("j and k must be positive integers")
    disc = 1.0 - j * alpha0 / (2 * k * math.pi)
    if not disc > 0:
        raise PredictionError(f"1 - j alpha0/(2 k pi) = {disc:.3g} is not positive")
    T = 2.0 * math.sqrt(j * k * math.pi * T0 * disc)
    return T, 2.0 * j * T0 / T


def spiral_monodromy(accumulated: float, sigma: int) -> float:
    """Monodromy measured in the spiral's rotation sense."""
    return sigma * accumulated + 0.0  # no negative zero


@dataclass(frozen=True, eq=False)
class Seed:
    z0: PhasePoint
    T: float
    J: float
    j: int
    k: int


def predicted_seed(model: ContactModel, orbit: ReebOrbit, alpha0: float, j: int, k: int,
                   phase: float = 0.0, signs: Optional[tuple] = None) -> Seed:
    """Initial state of the predicted spiral around ``orbit`` with g* = 1.

    The velocity of a unit geodesic turns at rate -h_Z in the model frame,
    while the spiral turns at sigma/J + w J/2 (w the transport rate), so the
    seed uses h_Z = -(sigma/J + w J/2). For w = 0 this is h_Z = 1/J.
    """
    if orbit.period is None:
        raise ValueError("orbit needs a measured period")
    T, J = predicted_length(orbit.period, alpha0, j, k)
    start = orbit.start
    if signs is None:
        signs = calibrate_signs(model, start)
    eps, sigma = signs
    w = transport_rate(model, start)
    hz = -(sigma / J + w * J / 2.0)
    if not hz > 0:
        raise PredictionError("seed momentum is not in the positive cone")
    Y0 = np.array([math.cos(phase), math.sin(phase)])
    F = model.frame_at(start)
    disp = -eps * J * times_i(Y0)
    q = ManifoldPoint(start.coords + disp @ F, start.chart)
    p = initial_covector(model, q, Y0, hz)
    return Seed(PhasePoint.make(q.coords, p, q.chart), T, J, j, k)


def _in_chart(model: ContactModel, q: np.ndarray, p: np.ndarray, src: int, dst: int) -> tuple:
    if src == dst:
        return q, p
    q_new, jac = model.transition(q, src, dst)
    return q_new, np.linalg.solve(jac.T, p)


def closure_residual(model: ContactModel, z0: PhasePoint, T: float,
                     cfg: IntegratorConfig = SHOOT_CONFIG) -> np.ndarray:
    """(q(T) - q(0) modulo periods, p(T) - p(0), g*(z0) - 1), all in the start chart."""
    hx, hy, _ = lifts(model, z0.q.coords, z0.p.components, [z0.q.chart])
    g = float(hx[0] ** 2 + hy[0] ** 2)
    if T == 0.0:
        return np.array([0, 0, 0, 0, 0, 0, g - 1.0])
    end = integrate(model, "gstar", z0, T, cfg, np.array([T])).end
    q, p = _in_chart(model, end.q.coords, end.p.components, end.q.chart, z0.q.chart)
    dq = model.difference(ManifoldPoint(q, z0.q.chart), z0.q)
    return np.concatenate([dq, p - z0.p.components, [g - 1.0]])


@dataclass(frozen=True, eq=False)
class ShootResult:
    z0: PhasePoint
    T: float
    residual: float
    iterations: int
    converged: bool
    history: tuple


def _transverse_basis(model: ContactModel, z0: PhasePoint) -> np.ndarray:
    """Orthonormal basis (6, 5) of the complement of the flow and Reeb-lift directions."""
    from .symplectic import hamiltonian_vector_field

    v1 = hamiltonian_vector_field("gstar", z0, model)
    v2 = hamiltonian_vector_field("hZ", z0, model)
    Q, _ = np.linalg.qr(np.column_stack([v1, v2]), mode="complete")
    sv = np.linalg.svd(np.column_stack([v1, v2]), compute_uv=False)
    rank = int(np.sum(sv > 1e-12 * max(sv[0], 1e-300)))
    return Q[:, rank:]


def shoot_closed_geodesic(model: ContactModel, seed, tol: float = 1e-9,
                          max_iter: int = MAX_ITER, cfg: IntegratorConfig = SHOOT_CONFIG) -> ShootResult:
    """Damped Gauss-Newton on (transverse initial data, T) for a zero closure residual.

    The two symmetry directions (the geodesic flow itself and the cotangent
    lift of the Reeb flow) are frozen. The Jacobian uses central differences.
    """
    if isinstance(seed, Seed):
        z_seed, T = seed.z0, seed.T
    else:
        z_seed, T = seed
    base = z_seed.state
    chart = z_seed.q.chart
    B = _transverse_basis(model, z_seed)
    n = B.shape[1]
    x = np.zeros(n + 1)
    x[n] = T

    def state(x):
        s = base + B @ x[:n]
        return PhasePoint.make(s[:3], s[3:], chart)

    def resid(x):
        try:
            return closure_residual(model, state(x), x[n], cfg)
        except (IntegrationError, ValueError):
            return np.full(7, np.inf)

    # momentum rows scale like 1/J near the orbit; weight them to match positions
    weight = np.ones(7)
    weight[3:6] = 1.0 / max(1.0, float(np.linalg.norm(z_seed.p.components)))

    r = resid(x)
    norm = float(np.linalg.norm(r))
    if not np.isfinite(norm):
        raise ValueError("seed residual is not finite")
    history = [norm]
    it = 0
    while norm >= tol and it < max_iter:
        it += 1
        Jm = np.empty((7, n + 1))
        for c in range(n + 1):
            h = FD_STEP * (max(1.0, abs(x[c])) if c == n else 1.0)
            e = np.zeros(n + 1)
            e[c] = h
            Jm[:, c] = (resid(x + e) - resid(x - e)) / (2 * h)
        step, *_ = np.linalg.lstsq(weight[:, None] * Jm, -weight * r, rcond=LSTSQ_RCOND)
        lam = 1.0
        improved = False
        while lam > 1e-6:
            x_try = x + lam * step
            r_try = resid(x_try)
            n_try = float(np.linalg.norm(r_try))
            if np.isfinite(n_try) and np.linalg.norm(weight * r_try) < np.linalg.norm(weight * r):
                x, r, norm = x_try, r_try, n_try
                improved = True
                break
            lam *= 0.5
        history.append(norm)
        if not improved:
            break
    return ShootResult(state(x), float(x[n]), norm, it, norm < tol, tuple(history))


@dataclass(frozen=True)
class WindingCheck:
    turns: float          # signed velocity turns in the (X, Y) frame
    reeb_time: float      # integral of J/2 along the geodesic


def spiral_action(hz: float, rate: float, sigma: int) -> float:
    """Small root J of sigma/J + rate J/2 = -h_Z."""
    disc = hz * hz - 2.0 * sigma * rate
    if disc < 0:
        return math.nan
    return -2.0 * sigma / (hz + math.copysign(math.sqrt(disc), hz))


def winding(model: ContactModel, z0: PhasePoint, T: float, sigma: int = -1,
            samples_per_turn: int = 64, cfg: IntegratorConfig = SHOOT_CONFIG) -> WindingCheck:
    """Turns of the velocity in the model frame and elapsed Reeb time along the orbit.

    The Reeb time integrates J/2 with J recovered pointwise from h_Z through
    the spiral relation; a (j, k) solution covers j T0 and turns k times.
    """
    hx, hy, hz = (float(v[0]) for v in lifts(model, z0.q.coords, z0.p.components, [z0.q.chart]))
    n = max(256, int(math.ceil(T * abs(hz) / (2 * math.pi) * samples_per_turn)))
    ts = np.linspace(0.0, T, n + 1)
    tr = integrate(model, "gstar", z0, T, cfg, ts)
    hx, hy, _ = lifts(model, tr.q, tr.p, tr.chart)
    ang = np.unwrap(np.arctan2(hy, hx))
    J = np.array([spiral_action(tr.hZ[i] / math.sqrt(tr.gstar[i]),
                                transport_rate(model, tr.point(i).q), sigma) for i in range(len(ts))])
    return WindingCheck(float((ang[-1] - ang[0]) / (2 * math.pi)), float(trapezoid(J, ts) / 2.0))


@dataclass(frozen=True)
class SpectrumRow:
    j: int
    k: int
    T_pred: float
    T_found: float
    rel_dev: float
    residual: float
    iters: int
    status: str

    def as_tuple(self) -> tuple:
        return (self.j, self.k, self.T_pred, self.T_found, self.rel_dev, self.residual,
                self.iters, self.status)


def length_spectrum(model: ContactModel, orbit: ReebOrbit, alpha0: float,
                    j_values: Sequence[int], k_values: Sequence[int], tol: float = 1e-9,
                    signs: Optional[tuple] = None, cfg: IntegratorConfig = SHOOT_CONFIG) -> list:
    """Shoot from the predicted seed of every (j, k); rows are ordered by j, then k."""
    if signs is None:
        signs = calibrate_signs(model, orbit.start)
    rows = []
    for j in j_values:
        for k in k_values:
            try:
                seed = predicted_seed(model, orbit, alpha0, j, k, signs=signs)
            except PredictionError:
                rows.append(SpectrumRow(j, k, math.nan, math.nan, math.nan, math.nan, 0, "regime"))
                continue
            try:
                res = shoot_closed_geodesic(model, seed, tol, cfg=cfg)
            except (ValueError, IntegrationError):
                rows.append(SpectrumRow(j, k, seed.T, math.nan, math.nan, math.nan, 0, "failed"))
                continue
            status = "converged" if res.converged else "failed"
            rows.append(SpectrumRow(j, k, seed.T, res.T, abs(res.T - seed.T) / seed.T,
                                    res.residual, res.iterations, status))
    return rows


def deviation_trend(rows: Sequence[SpectrumRow]) -> float:
    """Least-squares slope of rel_dev against k over converged rows."""
    pts = [(r.k, r.rel_dev) for r in rows if r.status == "converged"]
    if len(pts) < 2:
        return math.nan
    k, d = np.array(pts, dtype=float).T
    if np.ptp(k) == 0:
        return 0.0
    return float(np.polyfit(k, d, 1)[0])
