"""Hamiltonian lifts, the cometric, Poisson brackets and the geodesic integrator.

Sign conventions: omega = dq ^ dp, the Hamiltonian vector field of h is
(dh/dp, -dh/dq) and {f, g} = df/dq . dg/dp - df/dp . dg/dq, so that
{h_V, h_W} = -h_[V,W].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np

from . import kernels
from .models import (ContactModel, Covec, ManifoldPoint, as_point, field_value, lie_bracket,
                     reeb_vector, sample_points)

PhaseFn = Callable[[np.ndarray, np.ndarray], float]

FD_REL_STEP = 1e-6

STATUS_NAMES = {kernels.OK: "ok", kernels.MAX_STEPS: "max_steps",
                kernels.STEP_UNDERFLOW: "step_underflow"}


class IntegrationError(RuntimeError):
    """Step-size underflow, step budget exhausted or an unusable chart exit."""


class CharacteristicDataError(ValueError):
    """Initial covector annihilates D (g* = 0), so no geodesic is defined."""


@dataclass(frozen=True, eq=False)
class PhasePoint:
    q: ManifoldPoint
    p: Covec

    def __post_init__(self):
        if self.p.base is not self.q and (self.p.base.chart != self.q.chart
                                          or not np.array_equal(self.p.base.coords, self.q.coords)):
            raise ValueError("covector base differs from q")

    @classmethod
    def make(cls, q, p, chart: int = 0) -> "PhasePoint":
        qq = as_point(q, chart)
        return cls(qq, Covec(qq, p))

    @property
    def state(self) -> np.ndarray:
        return np.concatenate([self.q.coords, self.p.components])


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-10
    max_step: float = 0.1
    dense_output: bool = False
    method: str = "dop853"
    midpoint_step: float = 1e-3
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.max_step > 0):
            raise ValueError("tolerances and max_step must be positive")
        if self.method not in ("dop853", "midpoint"):
            raise ValueError(f"unknown method {self.method!r}")

    def with_(self, **kw) -> "IntegratorConfig":
        return replace(self, **kw)


DEFAULT_CONFIG = IntegratorConfig()


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Samples of an integrated phase curve.

    Times are monotone in the direction of integration (decreasing for
    negative horizons). ``chart[i]`` is the chart of sample ``i``.
    """

    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    chart: np.ndarray
    gstar: np.ndarray
    hZ: np.ndarray
    stats: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.t.shape[0]

    def point(self, i: int) -> PhasePoint:
        return PhasePoint.make(self.q[i], self.p[i], int(self.chart[i]))

    @property
    def end(self) -> PhasePoint:
        return self.point(-1)

    @property
    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.gstar - self.gstar[0]))) if len(self) else 0.0

    def rows(self):
        for i in range(len(self)):
            yield (self.t[i], *self.q[i], *self.p[i], self.gstar[i], self.hZ[i])


# ---------------------------------------------------------------------------
# lifts


def frame_batch(model: ContactModel, q: np.ndarray, charts=None) -> tuple:
    """Frame (X, Y) and Reeb field Z at many points; arrays of shape (N, 3)."""
    q = np.atleast_2d(np.asarray(q, dtype=float))
    if model.kernel is not None and model.kernel[0] == kernels.HEISENBERG:
        n = q.shape[0]
        X = np.zeros((n, 3))
        Y = np.zeros((n, 3))
        X[:, 0] = 1.0
        X[:, 2] = -0.5 * q[:, 1]
        Y[:, 1] = 1.0
        Y[:, 2] = 0.5 * q[:, 0]
        Z = np.zeros((n, 3))
        Z[:, 2] = -1.0
        return X, Y, Z
    if model.kernel is not None and model.kernel[0] == kernels.S3:
        a, b = model.kernel[1]
        r2 = np.sum(q * q, axis=1)[:, None]

        def field_(u):
            return 0.5 * (1.0 - r2) * u + (q @ u)[:, None] * q + np.cross(q, u)

        return (field_(np.array([a, 0.0, 0.0])), field_(np.array([0.0, b, 0.0])),
                field_(np.array([0.0, 0.0, -2.0 * a * b])))
    charts = np.zeros(q.shape[0], dtype=int) if charts is None else charts
    X = np.empty_like(q)
    Y = np.empty_like(q)
    Z = np.empty_like(q)
    for i in range(q.shape[0]):
        pt = ManifoldPoint(q[i], int(charts[i]))
        F = model.frame_at(pt)
        X[i], Y[i] = F
        Z[i] = reeb_vector(model, pt)
    return X, Y, Z


def lifts(model: ContactModel, q, p, charts=None) -> tuple:
    """(h_X, h_Y, h_Z) at one or many phase points."""
    X, Y, Z = frame_batch(model, q, charts)
    p = np.atleast_2d(np.asarray(p, dtype=float))
    return (np.sum(p * X, axis=1), np.sum(p * Y, axis=1), np.sum(p * Z, axis=1))


def hamiltonian_lift(model: ContactModel, V, z: PhasePoint) -> float:
    """<p, V(q)> for V in {'X', 'Y', 'Z'}, a TangentVec or a field callable."""
    return float(z.p.components @ field_value(model, V, z.q))


def cometric(model: ContactModel, z: PhasePoint) -> float:
    F = model.frame_at(z.q)
    hx, hy = F @ z.p.components
    return float(hx * hx + hy * hy)


def reeb_lift(model: ContactModel, z: PhasePoint) -> float:
    return hamiltonian_lift(model, "Z", z)


def lift_function(model: ContactModel, V, chart: int = 0) -> PhaseFn:
    """Phase function (q, p) -> h_V(q, p) in a fixed chart."""
    def h(q, p):
        return float(np.asarray(p) @ field_value(model, V, ManifoldPoint(q, chart)))
    return h


def cometric_function(model: ContactModel, chart: int = 0) -> PhaseFn:
    def g(q, p):
        F = model.frame(np.asarray(q, dtype=float), chart)
        h = F @ np.asarray(p, dtype=float)
        return float(h @ h)
    return g


# ---------------------------------------------------------------------------
# finite-difference mechanics


def _grad(f: PhaseFn, q: np.ndarray, p: np.ndarray) -> tuple:
    gq = np.empty(3)
    gp = np.empty(3)
    for i in range(3):
        hq = FD_REL_STEP * max(1.0, abs(q[i]))
        e = np.zeros(3)
        e[i] = hq
        gq[i] = (f(q + e, p) - f(q - e, p)) / (2 * hq)
        hp = FD_REL_STEP * max(1.0, abs(p[i]))
        e = np.zeros(3)
        e[i] = hp
        gp[i] = (f(q, p + e) - f(q, p - e)) / (2 * hp)
    return gq, gp


def _qp(z) -> tuple:
    if isinstance(z, PhasePoint):
        return z.q.coords, z.p.components
    z = np.asarray(z, dtype=float)
    return z[:3], z[3:6]


def poisson_fd(f: PhaseFn, g: PhaseFn, z) -> float:
    q, p = _qp(z)
    fq, fp = _grad(f, q, p)
    gq, gp = _grad(g, q, p)
    return float(fq @ gp - fp @ gq)


BRACKET_PAIRS = (("X", "Y"), ("X", "Z"), ("Y", "Z"))


def bracket_identity_residuals(model: ContactModel, n: int = 100, seed: int = 0) -> dict:
    """max |{h_V, h_W} + h_[V,W]| over random phase points, per pair of frame fields.

    The left side is a finite-difference Poisson bracket of the lifts, the
    right side uses the vector-field bracket, so the two routes are independent.
    """
    rng = np.random.default_rng(seed)
    pts = sample_points(model, n, seed)
    out = {f"{{h_{a},h_{b}}}": 0.0 for a, b in BRACKET_PAIRS}
    for q in pts:
        p = rng.normal(size=3)
        for a, b in BRACKET_PAIRS:
            lhs = poisson_fd(lift_function(model, a, q.chart), lift_function(model, b, q.chart),
                             np.concatenate([q.coords, p]))
            rhs = -float(p @ lie_bracket(model, a, b, q).components)
            key = f"{{h_{a},h_{b}}}"
            out[key] = max(out[key], abs(lhs - rhs))
    return out


def hamiltonian_vector_field(H: Union[PhaseFn, str], z, model: Optional[ContactModel] = None) -> np.ndarray:
    """Phase velocity (dH/dp, -dH/dq).

    ``H='gstar/2'`` (or ``'hZ'``) with a model uses exact frame derivatives.
    """
    if isinstance(H, str):
        if model is None:
            raise ValueError("named Hamiltonians need a model")
        chart = z.q.chart if isinstance(z, PhasePoint) else 0
        rhs = _python_rhs(model, _mode(H))
        dy = np.empty(6)
        q, p = _qp(z)
        rhs(None, None, np.concatenate([q, p]), chart, dy)
        return dy
    q, p = _qp(z)
    gq, gp = _grad(H, q, p)
    return np.concatenate([gp, -gq])


# ---------------------------------------------------------------------------
# integration


def _mode(H: str) -> int:
    if H in ("gstar", "gstar/2", "g*/2", "geodesic"):
        return kernels.GEODESIC
    if H in ("hZ", "h_Z", "reeb"):
        return kernels.LIFT_Z
    raise ValueError(f"unknown Hamiltonian {H!r}")


def _python_rhs(model: ContactModel, mode: int) -> Callable:
    """Right-hand side built from the model's frame callables."""
    if mode == kernels.GEODESIC:
        def rhs(ci, cf, y, chart, dy):
            pt = ManifoldPoint(y[:3], chart)
            F = model.frame_at(pt)
            DF = model.frame_jac_at(pt)
            h = F @ y[3:6]
            dy[:3] = h @ F
            dy[3:6] = -(h[0] * (y[3:6] @ DF[0]) + h[1] * (y[3:6] @ DF[1]))
    elif mode == kernels.LIFT_Z:
        from .models import field_jacobian

        def rhs(ci, cf, y, chart, dy):
            pt = ManifoldPoint(y[:3], chart)
            dy[:3] = reeb_vector(model, pt)
            dy[3:6] = -(y[3:6] @ field_jacobian(model, "Z", pt))
    else:
        raise ValueError("transport mode is handled by the reeb module")
    return rhs


def _callable_rhs(H: PhaseFn) -> Callable:
    def rhs(ci, cf, y, chart, dy):
        gq, gp = _grad(H, y[:3], y[3:6])
        dy[:3] = gp
        dy[3:6] = -gq
    return rhs


def python_switch(model: ContactModel, with_momentum: bool = True) -> Callable:
    """Chart switch for generic models: leave a chart once |x| > chart_radius."""
    radius = model.chart_radius

    def switch(ci, cf, y, chart):
        if model.transition is None or not math.isfinite(radius):
            return chart
        x = y[:3]
        if x @ x <= radius * radius:
            return chart
        target = (chart + 1) % model.n_charts
        x_new, jac = model.transition(x.copy(), chart, target)
        if with_momentum:
            y[3:6] = np.linalg.solve(jac.T, y[3:6])
        y[:3] = x_new
        return target

    return switch


def _no_switch(ci, cf, y, chart):
    return chart


def run_driver(rhs, switch, ctx_i, ctx_f, y0, chart0, T, cfg: IntegratorConfig, t_eval=None,
               compiled: bool = True):
    """Dispatch to the compiled or interpreted driver and raise on failure.

    The compiled drivers always use the built-in right-hand side; ``rhs`` and
    ``switch`` only matter when ``compiled`` is false.
    """
    te = np.empty(0) if t_eval is None else np.ascontiguousarray(t_eval, dtype=float)
    y0 = np.ascontiguousarray(y0, dtype=float)
    if cfg.method == "midpoint":
        drive = kernels.midpoint_drive if compiled else kernels.with_callbacks(
            kernels.midpoint_drive, rhs, switch)
        ts, ys, cs, st = drive(ctx_i, ctx_f, y0, int(chart0), float(T),
                               cfg.midpoint_step, 100)
        if te.size:
            idx = np.clip(np.searchsorted(np.abs(ts), np.abs(te) - 1e-12), 0, len(ts) - 1)
            ts, ys, cs = te.copy(), ys[idx], cs[idx]
    else:
        drive = kernels.dop853_drive if compiled else kernels.with_callbacks(
            kernels.dop853_drive, rhs, switch)
        ts, ys, cs, st = drive(ctx_i, ctx_f, y0, int(chart0), float(T),
                               cfg.rel_tol, cfg.abs_tol, cfg.max_step, 0.0, te, cfg.max_steps)
    status = int(st[3])
    if status != kernels.OK:
        raise IntegrationError(f"integration stopped: {STATUS_NAMES.get(status, status)} "
                               f"after {int(st[0])} steps")
    stats = {"accepted": int(st[0]), "rejected": int(st[1]), "nfev": int(st[2]),
             "method": cfg.method}
    return np.asarray(ts), np.asarray(ys), np.asarray(cs), stats


def integrate(model: ContactModel, H: Union[str, PhaseFn], z0: PhasePoint, T: float,
              cfg: IntegratorConfig = DEFAULT_CONFIG, t_eval=None) -> Trajectory:
    """Integrate the Hamiltonian flow of ``H`` from ``z0`` for time ``T``.

    Named Hamiltonians ('gstar' for g*/2, 'hZ') on catalog models run in the
    compiled kernels; callables run through the interpreted driver with a
    finite-difference vector field. Without ``t_eval`` every accepted step
    is recorded.
    """
    y0 = z0.state
    if isinstance(H, str):
        mode = _mode(H)
        if model.kernel is not None:
            kind, params = model.kernel
            ci = np.array([kind, mode, 0], dtype=np.int64)
            ts, ys, cs, stats = run_driver(kernels.builtin_rhs, kernels.builtin_switch, ci,
                                           np.asarray(params, dtype=float), y0, z0.q.chart,
                                           T, cfg, t_eval)
        else:
            ts, ys, cs, stats = run_driver(_python_rhs(model, mode), python_switch(model), None,
                                           None, y0, z0.q.chart, T, cfg, t_eval, compiled=False)
    else:
        ts, ys, cs, stats = run_driver(_callable_rhs(H), python_switch(model), None, None, y0,
                                       z0.q.chart, T, cfg, t_eval, compiled=False)
    q = ys[:, :3].copy()
    p = ys[:, 3:6].copy()
    hx, hy, hz = lifts(model, q, p, cs)
    return Trajectory(ts, q, p, cs, hx * hx + hy * hy, hz, stats)


def normalize_covector(model: ContactModel, q: ManifoldPoint, p) -> np.ndarray:
    """Rescale p so that g*(q, p) = 1; raises on characteristic data."""
    p = np.asarray(p.components if isinstance(p, Covec) else p, dtype=float)
    F = model.frame_at(q)
    h = F @ p
    g = float(h @ h)
    scale = max(float(p @ p), 1e-300)
    if not g > 1e-24 * scale:
        raise CharacteristicDataError("initial covector lies in the annihilator of D (g* = 0)")
    return p / math.sqrt(g)


def geodesic(model: ContactModel, q0, p0, T: float, cfg: IntegratorConfig = DEFAULT_CONFIG,
             t_eval=None) -> Trajectory:
    """Unit-speed normal geodesic: p0 is rescaled to g* = 1, then g*/2 is integrated."""
    q0 = as_point(q0)
    p = normalize_covector(model, q0, p0)
    return integrate(model, "gstar", PhasePoint.make(q0.coords, p, q0.chart), T, cfg, t_eval)


def heisenberg_geodesic(t, hX: float, hY: float, hZ: float, q0=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Closed-form Heisenberg geodesic positions, shape (len(t), 3).

    w = h_X + i h_Y obeys w' = -i h_Z w, (x + iy)' = w and z' = (x y' - y x')/2.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    w0 = complex(hX, hY)
    x0, y0, z0 = q0
    if abs(hZ) < 1e-12:
        c = w0 * t
        area = np.zeros_like(t)
    else:
        c = (1j * w0 / hZ) * (np.exp(-1j * hZ * t) - 1.0)
        # twice the signed area swept by c relative to its start
        area = -abs(w0) ** 2 * (t / hZ - np.sin(hZ * t) / hZ**2)
    s = complex(x0, y0)
    # z' = Im(conj(s + c) c')/2 splits into the relative term plus a cross term
    cross = 0.5 * np.imag(np.conj(s) * c)
    out = np.empty((t.size, 3))
    out[:, 0] = x0 + c.real
    out[:, 1] = y0 + c.imag
    out[:, 2] = z0 + 0.5 * area + cross
    return out
