"""Reeb flow, metric transport of D-frames along it, and monodromy.

Frames along an orbit are stored by their components in the model frame
(X, Y), which keeps them chart independent. Transport is a rotation
e' = -Omega e in components. Two rules are available:

``strain-free``
    Lie transport along Z with its symmetric part removed: Omega is the
    antisymmetric part w of the matrix of E -> [Z, E] on D.
``curvature-corrected`` (default)
    The strain-free rate lowered by half the curvature invariant of the
    structure, Omega = w - kappa/2. Write [Y, X] = Z + c1 X + c2 Y; then
    kappa = Y(c1) - X(c2) - c1^2 - c2^2 + w. This is the rotation that
    spiraling geodesics actually follow; on round SU(2) it makes the
    predicted closed-geodesic lengths exact.

Both rules are metric, preserve orientation, are independent of the choice
of orthonormal frame and agree on the Heisenberg group.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import kernels
from .models import (ContactModel, ManifoldPoint, ModelError, TangentVec, as_point,
                     field_jacobian, lie_bracket, reeb_vector)
from .models import frame_components as basis_components
from .symplectic import (IntegrationError, IntegratorConfig, frame_batch, python_switch,
                         run_driver)

REEB_CONFIG = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-12, max_step=0.05)
RETURN_TOL = 1e-9

TRANSPORT_RULES = {"curvature-corrected": kernels.CURVATURE_CORRECTED,
                   "strain-free": kernels.STRAIN_FREE}
DEFAULT_RULE = "curvature-corrected"
# step for the derivatives of the bracket coefficients in the curvature invariant
CURVATURE_FD_STEP = 1e-4


def reeb_field(model: ContactModel, q) -> TangentVec:
    q = as_point(q)
    return TangentVec(q, reeb_vector(model, q))


def strain_rotation_matrix(model: ContactModel, q) -> np.ndarray:
    """Matrix of E -> [Z, E] on D in the frame (X, Y); columns are [Z,X], [Z,Y]."""
    q = as_point(q)
    if model.kernel is not None:
        kind, params = model.kernel
        return kernels.strain_rotation(kind, np.asarray(params, dtype=float),
                                       np.ascontiguousarray(q.coords))
    F = model.frame_at(q)
    DF = model.frame_jac_at(q)
    Z = reeb_vector(model, q)
    DZ = field_jacobian(model, "Z", q)
    basis = np.column_stack([F[0], F[1], Z])
    L = np.empty((2, 2))
    for col in range(2):
        # [Z, V] = DV.Z - DZ.V
        L[:, col] = np.linalg.solve(basis, DF[col] @ Z - DZ @ F[col])[:2]
    return L


def _rule_code(rule: str) -> int:
    try:
        return TRANSPORT_RULES[rule]
    except KeyError:
        raise ValueError(f"unknown transport rule {rule!r}; expected one of "
                         f"{', '.join(TRANSPORT_RULES)}") from None


def _bracket_coefficients(model: ContactModel, q: ManifoldPoint) -> np.ndarray:
    """(c1, c2) in [Y, X] = Z + c1 X + c2 Y."""
    return basis_components(model, q, lie_bracket(model, "Y", "X", q).components)[:2]


def curvature_invariant(model: ContactModel, q) -> float:
    """kappa = Y(c1) - X(c2) - c1^2 - c2^2 + w, with w the strain-free rate."""
    q = as_point(q)
    L = strain_rotation_matrix(model, q)
    w = 0.5 * (L[0, 1] - L[1, 0])
    if model.kernel is not None:
        # built-in frames have [X, Y] = -Z exactly
        return float(w)
    c = _bracket_coefficients(model, q)
    F = model.frame_at(q)
    h = CURVATURE_FD_STEP

    def along(v, idx):
        up = _bracket_coefficients(model, ManifoldPoint(q.coords + h * v, q.chart))[idx]
        dn = _bracket_coefficients(model, ManifoldPoint(q.coords - h * v, q.chart))[idx]
        return (up - dn) / (2 * h)

    return float(along(F[1], 0) - along(F[0], 1) - c[0] ** 2 - c[1] ** 2 + w)


def transport_rate(model: ContactModel, q, rule: str = DEFAULT_RULE) -> float:
    """Counter-clockwise angular speed of transported frames relative to (X, Y)."""
    code = _rule_code(rule)
    q = as_point(q)
    L = strain_rotation_matrix(model, q)
    w = 0.5 * (L[0, 1] - L[1, 0])
    if code == kernels.STRAIN_FREE:
        return float(w)
    return float(w - 0.5 * curvature_invariant(model, q))


def _transport_python_rhs(model: ContactModel, rule: str):
    def rhs(ci, cf, y, chart, dy):
        pt = ManifoldPoint(y[:3], chart)
        dy[:3] = reeb_vector(model, pt)
        w = transport_rate(model, pt, rule)
        dy[3] = -w * y[4]
        dy[4] = w * y[3]
        dy[5] = -w * y[6]
        dy[6] = w * y[5]
    return rhs


def _run_transport(model: ContactModel, q: ManifoldPoint, e1, e2, tau: float,
                   cfg: IntegratorConfig, t_eval=None, rule: str = DEFAULT_RULE):
    code = _rule_code(rule)
    y0 = np.concatenate([q.coords, e1, e2])
    if model.kernel is not None:
        kind, params = model.kernel
        ci = np.array([kind, kernels.REEB_TRANSPORT, code], dtype=np.int64)
        return run_driver(kernels.builtin_rhs, kernels.builtin_switch, ci,
                          np.asarray(params, dtype=float), y0, q.chart, tau, cfg, t_eval)
    return run_driver(_transport_python_rhs(model, rule), python_switch(model, with_momentum=False),
                      None, None, y0, q.chart, tau, cfg, t_eval, compiled=False)


def reeb_flow(model: ContactModel, q, tau: float, cfg: IntegratorConfig = REEB_CONFIG,
              chart: Optional[int] = None) -> ManifoldPoint:
    """R_tau(q); the result is expressed in ``chart`` when given."""
    q = as_point(q)
    if tau == 0.0:
        out = q
    else:
        _, ys, cs, _ = _run_transport(model, q, np.zeros(2), np.zeros(2), tau, cfg)
        out = ManifoldPoint(ys[-1, :3], int(cs[-1]))
    return out if chart is None else model.to_chart(out, chart)


def reeb_path(model: ContactModel, q, taus, cfg: IntegratorConfig = REEB_CONFIG):
    """Reeb flow sampled at the (monotone) times ``taus``: (coords, charts)."""
    q = as_point(q)
    taus = np.asarray(taus, dtype=float)
    T = float(taus[-1]) if taus.size else 0.0
    _, ys, cs, _ = _run_transport(model, q, np.zeros(2), np.zeros(2), T, cfg, taus)
    return ys[:, :3], cs


def _return_offset(model, q0: ManifoldPoint, q: ManifoldPoint) -> np.ndarray:
    try:
        return model.difference(q, q0)
    except ModelError:
        return np.full(3, np.inf)


def find_reeb_period(model: ContactModel, q, tau_max: float, tol: float = RETURN_TOL,
                     cfg: IntegratorConfig = REEB_CONFIG, samples: int = 2000) -> Optional[float]:
    """Primitive period of the Reeb orbit through q, or None if it does not return by tau_max.

    Candidates are sign changes of <q(tau) - q, Z(q(tau))> from negative to
    positive (a local minimum of the return distance); each is refined by
    bracketing root finding and accepted when the distance is below ``tol``.
    """
    q0 = as_point(q)
    taus = np.linspace(0.0, tau_max, samples + 1)
    qs, cs = reeb_path(model, q0, taus, cfg)

    def offset_at(i_base: int, dtau: float) -> ManifoldPoint:
        base = ManifoldPoint(qs[i_base], int(cs[i_base]))
        return reeb_flow(model, base, dtau, cfg)

    def slope(pt: ManifoldPoint) -> float:
        d = _return_offset(model, q0, pt)
        if not np.all(np.isfinite(d)):
            return math.inf
        Z = reeb_vector(model, model.to_chart(pt, q0.chart))
        return float(d @ Z)

    vals = np.array([slope(ManifoldPoint(qs[i], int(cs[i]))) for i in range(len(taus))])
    Z0 = reeb_vector(model, q0)
    step_len = float(np.linalg.norm(Z0)) * (taus[1] - taus[0])
    for i in range(1, len(taus) - 1):
        if not (vals[i] < 0.0 <= vals[i + 1]):
            continue
        d_i = np.linalg.norm(_return_offset(model, q0, ManifoldPoint(qs[i], int(cs[i]))))
        if d_i > 4.0 * step_len + 1e-6:
            continue
        root = brentq(lambda s: slope(offset_at(i, s - taus[i])), taus[i], taus[i + 1],
                      xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
        dist = np.linalg.norm(_return_offset(model, q0, offset_at(i, root - taus[i])))
        if dist < tol:
            return float(root)
    return None


@dataclass(frozen=True, eq=False)
class ReebOrbit:
    """A Reeb trajectory with a transported orthonormal frame of D.

    ``e1[i]``, ``e2[i]`` are the (X, Y) components of the transported frame at
    ``q[i]`` (chart ``chart[i]``).
    """

    start: ManifoldPoint
    period: Optional[float]
    tau: np.ndarray
    q: np.ndarray
    chart: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    model: ContactModel

    def __len__(self) -> int:
        return self.tau.shape[0]

    def frame_vectors(self) -> tuple:
        """Transported frame as chart vectors, arrays of shape (N, 3)."""
        X, Y, _ = frame_batch(self.model, self.q, self.chart)
        return (self.e1[:, :1] * X + self.e1[:, 1:] * Y, self.e2[:, :1] * X + self.e2[:, 1:] * Y)

    def gram_error(self) -> float:
        g11 = np.sum(self.e1 * self.e1, axis=1)
        g22 = np.sum(self.e2 * self.e2, axis=1)
        g12 = np.sum(self.e1 * self.e2, axis=1)
        return float(max(np.max(np.abs(g11 - 1)), np.max(np.abs(g22 - 1)), np.max(np.abs(g12))))

    def orientation(self) -> np.ndarray:
        return self.e1[:, 0] * self.e2[:, 1] - self.e1[:, 1] * self.e2[:, 0]

    def frame_angle(self) -> np.ndarray:
        """Continuous angle of e1 relative to X along the samples."""
        return np.unwrap(np.arctan2(self.e1[:, 1], self.e1[:, 0]))

    def rows(self):
        E1, E2 = self.frame_vectors()
        for i in range(len(self)):
            yield (self.tau[i], *self.q[i], *E1[i], *E2[i])


def frame_components(model: ContactModel, q: ManifoldPoint, v) -> np.ndarray:
    """(X, Y) components of a D-vector; raises if v is not in D."""
    if isinstance(v, TangentVec):
        v = v.components
    v = np.asarray(v, dtype=float)
    if v.shape == (2,):
        return v
    F = model.frame_at(q)
    c, *_ = np.linalg.lstsq(F.T, v, rcond=None)
    if np.linalg.norm(F.T @ c - v) > 1e-8 * max(1.0, np.linalg.norm(v)):
        raise ValueError("vector is not in the contact distribution")
    return c


def transport_frame(model: ContactModel, q, frame0=None, tau: float = 0.0,
                    cfg: IntegratorConfig = REEB_CONFIG, samples: Optional[int] = None,
                    t_eval=None, period: Optional[float] = None,
                    rule: str = DEFAULT_RULE) -> ReebOrbit:
    """Transport an orthonormal positively oriented frame of D(q) along the Reeb flow.

    ``frame0`` defaults to (X, Y) and may hold chart vectors or (X, Y)
    components. Samples are taken at ``t_eval``, or ``samples + 1`` equally
    spaced times, or every accepted step.
    """
    q = as_point(q)
    if frame0 is None:
        e1, e2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    else:
        e1 = frame_components(model, q, frame0[0])
        e2 = frame_components(model, q, frame0[1])
    gram = np.array([[e1 @ e1, e1 @ e2], [e1 @ e2, e2 @ e2]])
    if np.max(np.abs(gram - np.eye(2))) > 1e-9:
        raise ValueError("frame0 is not orthonormal")
    if e1[0] * e2[1] - e1[1] * e2[0] <= 0:
        raise ValueError("frame0 is not positively oriented")
    if t_eval is None and samples is not None:
        t_eval = np.linspace(0.0, tau, samples + 1)
    ts, ys, cs, _ = _run_transport(model, q, e1, e2, tau, cfg, t_eval, rule)
    return ReebOrbit(q, period, ts, ys[:, :3].copy(), cs, ys[:, 3:5].copy(), ys[:, 5:7].copy(),
                     model)


@dataclass(frozen=True)
class Monodromy:
    angle: float          # reduced to (-pi, pi]
    accumulated: float    # continuous rotation over ``loops`` periods
    loops: int
    closure_error: float

    @property
    def winding_class(self) -> int:
        """Number of full turns removed by the reduction."""
        return int(round((self.accumulated - self.angle) / (2 * math.pi)))


def monodromy(model: ContactModel, orbit, loops: int = 1, cfg: IntegratorConfig = REEB_CONFIG,
              samples_per_loop: int = 2000, closure_tol: float = 1e-6,
              rule: str = DEFAULT_RULE) -> Monodromy:
    """Counter-clockwise rotation of a transported frame after ``loops`` periods.

    ``orbit`` is a ReebOrbit with a period or a ``(point, period)`` pair.
    """
    if isinstance(orbit, ReebOrbit):
        q, T0 = orbit.start, orbit.period
    else:
        q, T0 = as_point(orbit[0]), orbit[1]
    if T0 is None or not T0 > 0:
        raise ValueError("monodromy needs an orbit with a positive period")
    n = samples_per_loop * loops
    tr = transport_frame(model, q, None, loops * T0, cfg, samples=n, rule=rule)
    end = ManifoldPoint(tr.q[-1], int(tr.chart[-1]))
    err = float(np.linalg.norm(model.difference(end, q)))
    if not err < closure_tol:
        raise IntegrationError(f"transported frame did not return to the start point (gap {err:.2e})")
    acc = float(tr.frame_angle()[-1])
    red = math.remainder(acc, 2 * math.pi)
    if red <= -math.pi:
        red += 2 * math.pi
    return Monodromy(red, acc, loops, err)


def periodic_orbit(model: ContactModel, q, tau_max: float, samples: int = 400,
                   cfg: IntegratorConfig = REEB_CONFIG, rule: str = DEFAULT_RULE) -> ReebOrbit:
    """Measure the period through q and return one transported loop."""
    q = as_point(q)
    T0 = find_reeb_period(model, q, tau_max, cfg=cfg)
    if T0 is None:
        raise ValueError("no Reeb return within tau_max")
    tr = transport_frame(model, q, None, T0, cfg, samples=samples, rule=rule)
    return ReebOrbit(q, T0, tr.tau, tr.q, tr.chart, tr.e1, tr.e2, model)
