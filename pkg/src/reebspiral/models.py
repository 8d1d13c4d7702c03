"""Contact sub-Riemannian 3-manifold models.

A model is a chart atlas plus an oriented orthonormal frame (X, Y) of the
contact distribution D. The Reeb field, contact form and brackets are all
derived from the frame.

Conventions: [V, W] = DW.V - DV.W in chart coordinates, and the Reeb field Z
is normalised by [X, Y] = -Z mod D with [X, Z], [Y, Z] in D.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import kernels

H_FD = 1e-5


class ModelError(ValueError):
    """Invalid model name, parameters or a degenerate frame."""


@dataclass(frozen=True, eq=False)
class ManifoldPoint:
    coords: np.ndarray
    chart: int = 0

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float).reshape(3)
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite chart coordinates")
        object.__setattr__(self, "coords", c)


@dataclass(frozen=True, eq=False)
class TangentVec:
    base: ManifoldPoint
    components: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "components", np.asarray(self.components, dtype=float).reshape(3))


@dataclass(frozen=True, eq=False)
class Covec:
    base: ManifoldPoint
    components: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "components", np.asarray(self.components, dtype=float).reshape(3))


def as_point(q, chart: int = 0) -> ManifoldPoint:
    if isinstance(q, ManifoldPoint):
        return q
    return ManifoldPoint(np.asarray(q, dtype=float), chart)


FrameFn = Callable[[np.ndarray, int], np.ndarray]


@dataclass(frozen=True, eq=False)
class ContactModel:
    """An immutable contact sub-Riemannian model.

    ``frame(coords, chart)`` returns a (2, 3) array whose rows are X and Y.
    The optional ``frame_jacobian`` (2, 3, 3), ``frame_hessian`` (2, 3, 3, 3)
    and ``reeb_jacobian`` hooks supply exact derivatives; anything missing is
    replaced by central differences with step ``H_FD``.

    ``kernel`` is ``(kind, params)`` for the compiled built-in families.
    """

    name: str
    frame: FrameFn
    frame_jacobian: Optional[Callable] = None
    frame_hessian: Optional[Callable] = None
    reeb_jacobian: Optional[Callable] = None
    n_charts: int = 1
    transition: Optional[Callable] = None
    chart_radius: float = math.inf
    periods: tuple = (None, None, None)
    kernel: Optional[tuple] = None
    params: dict = field(default_factory=dict)

    @property
    def analytic_brackets(self) -> bool:
        return self.frame_jacobian is not None and self.reeb_jacobian is not None

    def frame_at(self, q) -> np.ndarray:
        q = as_point(q)
        return np.asarray(self.frame(q.coords, q.chart), dtype=float)

    def frame_jac_at(self, q) -> np.ndarray:
        q = as_point(q)
        if self.frame_jacobian is not None:
            return np.asarray(self.frame_jacobian(q.coords, q.chart), dtype=float)
        return _fd_jacobian(lambda c: self.frame(c, q.chart), q.coords)

    def frame_hess_at(self, q) -> np.ndarray:
        q = as_point(q)
        if self.frame_hessian is not None:
            return np.asarray(self.frame_hessian(q.coords, q.chart), dtype=float)
        return _fd_jacobian(lambda c: self.frame_jac_at(ManifoldPoint(c, q.chart)), q.coords)

    def to_chart(self, q, chart: int) -> ManifoldPoint:
        q = as_point(q)
        if q.chart == chart:
            return q
        if self.transition is None:
            raise ModelError(f"model {self.name!r} has no chart {chart}")
        return ManifoldPoint(self.transition(q.coords, q.chart, chart)[0], chart)

    def difference(self, q1, q2) -> np.ndarray:
        """Chart displacement q1 - q2 in q2's chart, reduced modulo coordinate periods."""
        q1 = self.to_chart(q1, as_point(q2).chart)
        d = q1.coords - as_point(q2).coords
        for i, per in enumerate(self.periods):
            if per:
                d[i] -= per * np.round(d[i] / per)
        return d


def _fd_jacobian(fn, x: np.ndarray, h: float = H_FD) -> np.ndarray:
    """Central differences; the differentiated axis is appended last."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        cols.append((np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2 * h))
    return np.stack(cols, axis=-1)


# ---------------------------------------------------------------------------
# built-in catalog


def _kernel_frame(kind, params):
    def frame(c, chart):
        F = np.empty((2, 3))
        DF = np.empty((2, 3, 3))
        kernels.frame_eval(kind, params, np.ascontiguousarray(c, dtype=float), F, DF)
        return F

    def jac(c, chart):
        F = np.empty((2, 3))
        DF = np.empty((2, 3, 3))
        kernels.frame_eval(kind, params, np.ascontiguousarray(c, dtype=float), F, DF)
        return DF

    def reeb_jac(c, chart):
        Z = np.empty(3)
        DZ = np.empty((3, 3))
        kernels.reeb_eval(kind, params, np.ascontiguousarray(c, dtype=float), Z, DZ)
        return Z, DZ

    return frame, jac, reeb_jac


def _s3_hessian(c, chart, coefs):
    H = np.zeros((2, 3, 3, 3))
    for v, (k, coef) in enumerate(coefs):
        u = np.zeros(3)
        u[k] = coef
        d = np.eye(3)
        # d/dx_k of DV[i, j] = -d_jk u_i + u_j d_ik + u_k d_ij
        H[v] = (-np.einsum("jk,i->ijk", d, u) + np.einsum("j,ik->ijk", u, d)
                + np.einsum("k,ij->ijk", u, d))
    return H


def _s3_transition(c, src, dst):
    x = np.ascontiguousarray(c, dtype=float)
    if float(x @ x) == 0.0:
        raise ModelError("point is the pole of the target chart")
    x_new = np.empty(3)
    p_new = np.empty(3)
    kernels.s3_chart_map(x, np.zeros(3), x_new, p_new)
    return x_new, s3_transition_jacobian(x)


def s3_transition_jacobian(x: np.ndarray) -> np.ndarray:
    """d x'/d x for x' = -x/|x|^2."""
    x = np.asarray(x, dtype=float)
    r2 = float(x @ x)
    return -(np.eye(3) / r2 - 2.0 * np.outer(x, x) / r2**2)


def builtin_model(name: str, T0: float = 2 * math.pi, aniso: float = 1.1) -> ContactModel:
    """Look up a catalog model.

    ``heisenberg``: R^3 with X = d_x - (y/2) d_z, Y = d_y + (x/2) d_z.
    ``heisenberg-quotient``: the same frame with z ~ z + T0.
    ``s3``: SU(2) with the left-invariant frame X = a qi, Y = b qj
    (a = aniso, b = 1/aniso) in two stereographic charts; its Reeb orbits are
    Hopf fibres.
    """
    if name == "heisenberg":
        kind = kernels.HEISENBERG
        params = np.zeros(2)
        frame, jac, reeb_jac = _kernel_frame(kind, params)
        return ContactModel("heisenberg", frame, jac, lambda c, ch: np.zeros((2, 3, 3, 3)),
                            reeb_jac, kernel=(kind, params))
    if name == "heisenberg-quotient":
        if not T0 > 0:
            raise ModelError("heisenberg-quotient needs T0 > 0")
        kind = kernels.HEISENBERG
        params = np.zeros(2)
        frame, jac, reeb_jac = _kernel_frame(kind, params)
        return ContactModel("heisenberg-quotient", frame, jac, lambda c, ch: np.zeros((2, 3, 3, 3)),
                            reeb_jac, periods=(None, None, float(T0)), kernel=(kind, params),
                            params={"T0": float(T0)})
    if name == "s3":
        if not aniso > 0:
            raise ModelError("s3 needs aniso > 0")
        a = float(aniso)
        b = 1.0 / a
        kind = kernels.S3
        params = np.array([a, b])
        frame, jac, reeb_jac = _kernel_frame(kind, params)
        coefs = ((0, a), (1, b))
        return ContactModel("s3", frame, jac, lambda c, ch: _s3_hessian(c, ch, coefs), reeb_jac,
                            n_charts=2, transition=_s3_transition,
                            chart_radius=kernels.S3_SWITCH_RADIUS, kernel=(kind, params),
                            params={"aniso": a})
    raise ModelError(f"unknown model {name!r}; expected heisenberg, heisenberg-quotient or s3")


MODEL_NAMES = ("heisenberg", "heisenberg-quotient", "s3")


# ---------------------------------------------------------------------------
# vector fields and brackets


def _bracket_field(model: ContactModel, q: ManifoldPoint) -> np.ndarray:
    """W = [X, Y] at q."""
    F = model.frame_at(q)
    DF = model.frame_jac_at(q)
    return DF[1] @ F[0] - DF[0] @ F[1]


def _bracket_field_jac(model, q) -> np.ndarray:
    F = model.frame_at(q)
    DF = model.frame_jac_at(q)
    H = model.frame_hess_at(q)
    # d/dq_k (DY.X - DX.Y)
    return (np.einsum("ijk,j->ik", H[1], F[0]) + DF[1] @ DF[0]
            - np.einsum("ijk,j->ik", H[0], F[1]) - DF[0] @ DF[1])


def reeb_vector(model: ContactModel, q) -> np.ndarray:
    """Reeb field components from the bracket characterisation.

    With W = [X, Y], write Z = -W + uX + vY. Requiring [X, Z] and [Y, Z] to
    have no W component in the basis (X, Y, W) gives v = [X, W]_W and
    u = -[Y, W]_W.
    """
    q = as_point(q)
    F = model.frame_at(q)
    DF = model.frame_jac_at(q)
    W = _bracket_field(model, q)
    DW = _bracket_field_jac(model, q)
    basis = np.column_stack([F[0], F[1], W])
    det = np.linalg.det(basis)
    if not np.isfinite(det) or abs(det) < 1e-12:
        raise ModelError("contact condition violated: [X, Y] lies in D (or frame degenerate)")
    XW = DW @ F[0] - DF[0] @ W
    YW = DW @ F[1] - DF[1] @ W
    v = np.linalg.solve(basis, XW)[2]
    u = -np.linalg.solve(basis, YW)[2]
    return -W + u * F[0] + v * F[1]


def field_value(model: ContactModel, V, q) -> np.ndarray:
    """Evaluate a field given as 'X', 'Y', 'Z', a TangentVec or a callable coords -> 3-vector."""
    q = as_point(q)
    if isinstance(V, str):
        if V == "X":
            return model.frame_at(q)[0]
        if V == "Y":
            return model.frame_at(q)[1]
        if V == "Z":
            return reeb_vector(model, q)
        raise ValueError(f"unknown field id {V!r}")
    if isinstance(V, TangentVec):
        return V.components
    return np.asarray(V(q.coords), dtype=float)


def field_jacobian(model: ContactModel, V, q) -> np.ndarray:
    q = as_point(q)
    if isinstance(V, str):
        if V in ("X", "Y"):
            return model.frame_jac_at(q)["XY".index(V)]
        if V == "Z":
            if model.reeb_jacobian is not None:
                return np.asarray(model.reeb_jacobian(q.coords, q.chart)[1])
            return _fd_jacobian(lambda c: reeb_vector(model, ManifoldPoint(c, q.chart)), q.coords)
    if isinstance(V, TangentVec):
        return np.zeros((3, 3))
    return _fd_jacobian(lambda c: field_value(model, V, ManifoldPoint(c, q.chart)), q.coords)


def lie_bracket(model: ContactModel, V, W, q) -> TangentVec:
    """[V, W](q) = DW.V - DV.W, exact when the model has analytic Jacobians."""
    q = as_point(q)
    v = field_value(model, V, q)
    w = field_value(model, W, q)
    comp = field_jacobian(model, W, q) @ v - field_jacobian(model, V, q) @ w
    return TangentVec(q, comp)


def frame_components(model: ContactModel, q, vec) -> np.ndarray:
    """Components of a chart vector in the basis (X, Y, Z) at q."""
    q = as_point(q)
    F = model.frame_at(q)
    basis = np.column_stack([F[0], F[1], reeb_vector(model, q)])
    return np.linalg.solve(basis, np.asarray(vec, dtype=float))


def contact_form(model: ContactModel, q) -> Covec:
    """alpha_g(q): alpha(X) = alpha(Y) = 0, alpha(Z) = 1."""
    q = as_point(q)
    F = model.frame_at(q)
    rows = np.vstack([F[0], F[1], reeb_vector(model, q)])
    if abs(np.linalg.det(rows)) < 1e-12:
        raise ModelError("frame degenerate at q")
    return Covec(q, np.linalg.solve(rows, np.array([0.0, 0.0, 1.0])))


def _d_alpha(model, q: ManifoldPoint) -> np.ndarray:
    """Exterior derivative of alpha as the antisymmetric matrix d_i a_j - d_j a_i."""
    grad = _fd_jacobian(lambda c: contact_form(model, ManifoldPoint(c, q.chart)).components, q.coords)
    # grad[j, i] = d alpha_j / d q_i
    return grad.T - grad


@dataclass
class ValidationReport:
    model: str
    n_points: int
    residuals: dict
    degenerate: bool = False
    failures: list = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        vals = [v for v in self.residuals.values() if np.isfinite(v)]
        return max(vals) if vals else math.inf

    def ok(self, tol: float = 1e-6) -> bool:
        return (not self.degenerate and all(np.isfinite(v) for v in self.residuals.values())
                and self.max_residual < tol)

    def lines(self) -> list:
        out = [f"model {self.model}: {self.n_points} points"]
        for k, v in self.residuals.items():
            out.append(f"  {k:<22s} {v:.3e}")
        if self.degenerate:
            out.append("  frame degeneracy detected")
        out.extend(f"  {f}" for f in self.failures)
        return out


def sample_points(model: ContactModel, n: int, seed: int = 0) -> list:
    """Random points inside the model's chart domains."""
    rng = np.random.default_rng(seed)
    if model.name == "s3" or model.n_charts == 2:
        pts = []
        for _ in range(n):
            g = rng.normal(size=4)
            g /= np.linalg.norm(g)
            # stereographic chart 0 from -1, chart 1 from +1; use the one with |x| <= 1
            if g[0] >= 0:
                pts.append(ManifoldPoint(g[1:] / (1 + g[0]), 0))
            else:
                pts.append(ManifoldPoint(g[1:] / (1 - g[0]), 1))
        return pts
    return [ManifoldPoint(rng.uniform(-2.0, 2.0, size=3), 0) for _ in range(n)]


def validate_model(model: ContactModel, sample_points_: Sequence | None = None, n: int = 100,
                   seed: int = 0) -> ValidationReport:
    """Check the Reeb/contact identities at sample points (report only, never raises)."""
    pts = list(sample_points_) if sample_points_ is not None else sample_points(model, n, seed)
    keys = ("alpha(Z)-1", "dalpha(Z,X)", "dalpha(Z,Y)", "dalpha(X,Y)-1",
            "[X,Z] along Z", "[Y,Z] along Z", "[X,Y]+Z mod D")
    res = {k: 0.0 for k in keys}
    report = ValidationReport(model.name, len(pts), res)
    for q in pts:
        q = as_point(q)
        F = model.frame_at(q)
        gram = F @ F.T
        if abs(np.linalg.det(gram)) < 1e-10:
            report.degenerate = True
            report.failures.append(f"X, Y dependent at {q.coords.tolist()}")
            continue
        try:
            Z = reeb_vector(model, q)
            alpha = contact_form(model, q).components
            da = _d_alpha(model, q)
            XZ = lie_bracket(model, "X", "Z", q).components
            YZ = lie_bracket(model, "Y", "Z", q).components
            XY = lie_bracket(model, "X", "Y", q).components
        except (ModelError, np.linalg.LinAlgError) as exc:
            report.degenerate = True
            report.failures.append(f"{exc} at {q.coords.tolist()}")
            continue
        basis = np.column_stack([F[0], F[1], Z])
        vals = {
            "alpha(Z)-1": abs(alpha @ Z - 1.0),
            "dalpha(Z,X)": abs(Z @ da @ F[0]),
            "dalpha(Z,Y)": abs(Z @ da @ F[1]),
            "dalpha(X,Y)-1": abs(F[0] @ da @ F[1] - 1.0),
            "[X,Z] along Z": abs(np.linalg.solve(basis, XZ)[2]),
            "[Y,Z] along Z": abs(np.linalg.solve(basis, YZ)[2]),
            "[X,Y]+Z mod D": abs(np.linalg.solve(basis, XY + Z)[2]),
        }
        for k, v in vals.items():
            res[k] = max(res[k], float(v))
    if report.degenerate:
        for k in keys:
            res[k] = math.nan if res[k] == 0.0 else res[k]
    return report
