"""Hot numeric kernels.

Everything here is written in the numba-compatible subset of numpy so the
same source runs compiled (default) or interpreted when
``REEBSPIRAL_DISABLE_JIT=1`` is set.

State layouts used by :func:`builtin_rhs`::

    GEODESIC        y = (q, p)           H = g*/2
    LIFT_Z          y = (q, p)           H = h_Z
    REEB_TRANSPORT  y = (q, e1, e2)      q' = Z, e' = -Omega e  (ctx_i[2] picks the rule)

``e1``/``e2`` are frame components in the model frame (X, Y), so they are
chart independent.
"""

import math
import types

import numpy as np
from scipy.integrate._ivp import dop853_coefficients as _dop

from ._jit import kernel, py_func

N_STAGES = _dop.N_STAGES
RK_A = np.ascontiguousarray(_dop.A[:N_STAGES, :N_STAGES])
RK_B = np.ascontiguousarray(_dop.B)
RK_E3 = np.ascontiguousarray(_dop.E3)
RK_E5 = np.ascontiguousarray(_dop.E5)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERR_EXPONENT = -1.0 / 8.0

# model kinds
HEISENBERG = 0
S3 = 1

# rhs modes
GEODESIC = 0
LIFT_Z = 1
REEB_TRANSPORT = 2

# transport rules (third slot of ctx_i in REEB_TRANSPORT mode)
CURVATURE_CORRECTED = 0
STRAIN_FREE = 1

# s3 charts are swapped once |x| exceeds this radius (the other chart then has |x| < 1/R)
S3_SWITCH_RADIUS = 1.5

# driver status codes
OK = 0
MAX_STEPS = 1
STEP_UNDERFLOW = 2


@kernel
def s3_field(x, coef, k, V, DV):
    """Left-invariant field ``coef * q e_k`` of SU(2) in a stereographic chart.

    V(x) = (1 - |x|^2)/2 u + (x.u) x + x cross u, with u = coef e_k.
    """
    u0 = 0.0
    u1 = 0.0
    u2 = 0.0
    if k == 0:
        u0 = coef
    elif k == 1:
        u1 = coef
    else:
        u2 = coef
    x0 = x[0]
    x1 = x[1]
    x2 = x[2]
    r2 = x0 * x0 + x1 * x1 + x2 * x2
    xu = x0 * u0 + x1 * u1 + x2 * u2
    half = 0.5 * (1.0 - r2)
    V[0] = half * u0 + xu * x0 + (x1 * u2 - x2 * u1)
    V[1] = half * u1 + xu * x1 + (x2 * u0 - x0 * u2)
    V[2] = half * u2 + xu * x2 + (x0 * u1 - x1 * u0)
    u = (u0, u1, u2)
    for i in range(3):
        for j in range(3):
            DV[i, j] = -x[j] * u[i] + u[j] * x[i]
        DV[i, i] += xu
    DV[0, 1] += u2
    DV[0, 2] -= u1
    DV[1, 0] -= u2
    DV[1, 2] += u0
    DV[2, 0] += u1
    DV[2, 1] -= u0


@kernel
def frame_eval(kind, params, q, F, DF):
    """Orthonormal frame (X, Y) of D into ``F[0], F[1]`` and Jacobians into ``DF``.

    ``DF[v, i, j]`` is d(F[v, i]) / dq_j.
    """
    if kind == HEISENBERG:
        F[:, :] = 0.0
        DF[:, :, :] = 0.0
        F[0, 0] = 1.0
        F[0, 2] = -0.5 * q[1]
        F[1, 1] = 1.0
        F[1, 2] = 0.5 * q[0]
        DF[0, 2, 1] = -0.5
        DF[1, 2, 0] = 0.5
    else:
        s3_field(q, params[0], 0, F[0], DF[0])
        s3_field(q, params[1], 1, F[1], DF[1])


@kernel
def reeb_eval(kind, params, q, Z, DZ):
    if kind == HEISENBERG:
        Z[0] = 0.0
        Z[1] = 0.0
        Z[2] = -1.0
        DZ[:, :] = 0.0
    else:
        s3_field(q, -2.0 * params[0] * params[1], 2, Z, DZ)


@kernel
def solve3(M, rhs, out):
    """Cramer's rule for a 3x3 system; returns the determinant."""
    det = (M[0, 0] * (M[1, 1] * M[2, 2] - M[1, 2] * M[2, 1])
           - M[0, 1] * (M[1, 0] * M[2, 2] - M[1, 2] * M[2, 0])
           + M[0, 2] * (M[1, 0] * M[2, 1] - M[1, 1] * M[2, 0]))
    for c in range(3):
        d = 0.0
        cols = np.empty((3, 3))
        for i in range(3):
            for j in range(3):
                cols[i, j] = rhs[i] if j == c else M[i, j]
        d = (cols[0, 0] * (cols[1, 1] * cols[2, 2] - cols[1, 2] * cols[2, 1])
             - cols[0, 1] * (cols[1, 0] * cols[2, 2] - cols[1, 2] * cols[2, 0])
             + cols[0, 2] * (cols[1, 0] * cols[2, 1] - cols[1, 1] * cols[2, 0]))
        out[c] = d / det
    return det


@kernel
def strain_rotation(kind, params, q):
    """Frame matrix L of Lie derivative along Z on D: columns [Z,X], [Z,Y] in (X, Y)."""
    F = np.empty((2, 3))
    DF = np.empty((2, 3, 3))
    Z = np.empty(3)
    DZ = np.empty((3, 3))
    frame_eval(kind, params, q, F, DF)
    reeb_eval(kind, params, q, Z, DZ)
    basis = np.empty((3, 3))
    for i in range(3):
        basis[i, 0] = F[0, i]
        basis[i, 1] = F[1, i]
        basis[i, 2] = Z[i]
    L = np.empty((2, 2))
    v = np.empty(3)
    c = np.empty(3)
    for col in range(2):
        for i in range(3):
            acc = 0.0
            for j in range(3):
                acc += DF[col, i, j] * Z[j] - DZ[i, j] * F[col, j]
            v[i] = acc
        solve3(basis, v, c)
        L[0, col] = c[0]
        L[1, col] = c[1]
    return L


@kernel
def builtin_rhs(ctx_i, ctx_f, y, chart, dy):
    kind = ctx_i[0]
    mode = ctx_i[1]
    q = y[:3]
    if mode == GEODESIC:
        F = np.empty((2, 3))
        DF = np.empty((2, 3, 3))
        frame_eval(kind, ctx_f, q, F, DF)
        p = y[3:6]
        hx = p[0] * F[0, 0] + p[1] * F[0, 1] + p[2] * F[0, 2]
        hy = p[0] * F[1, 0] + p[1] * F[1, 1] + p[2] * F[1, 2]
        for i in range(3):
            dy[i] = hx * F[0, i] + hy * F[1, i]
        for j in range(3):
            gx = 0.0
            gy = 0.0
            for i in range(3):
                gx += p[i] * DF[0, i, j]
                gy += p[i] * DF[1, i, j]
            dy[3 + j] = -(hx * gx + hy * gy)
    elif mode == LIFT_Z:
        Z = np.empty(3)
        DZ = np.empty((3, 3))
        reeb_eval(kind, ctx_f, q, Z, DZ)
        p = y[3:6]
        for i in range(3):
            dy[i] = Z[i]
        for j in range(3):
            acc = 0.0
            for i in range(3):
                acc += p[i] * DZ[i, j]
            dy[3 + j] = -acc
    else:
        Z = np.empty(3)
        DZ = np.empty((3, 3))
        reeb_eval(kind, ctx_f, q, Z, DZ)
        for i in range(3):
            dy[i] = Z[i]
        L = strain_rotation(kind, ctx_f, q)
        w = 0.5 * (L[0, 1] - L[1, 0])
        if ctx_i[2] == CURVATURE_CORRECTED:
            # [X, Y] = -Z exactly for the built-in frames, so the curvature
            # invariant equals w and the corrected rate is w - w/2
            w = 0.5 * w
        # e' = -Omega e with Omega = [[0, w], [-w, 0]]
        dy[3] = -w * y[4]
        dy[4] = w * y[3]
        dy[5] = -w * y[6]
        dy[6] = w * y[5]


@kernel
def s3_chart_map(x, p, x_new, p_new):
    """Transition x' = -x/|x|^2 between the two stereographic charts (an involution).

    Covectors pull back through the Jacobian of the inverse map, which is the
    same map evaluated at x'.
    """
    r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
    for i in range(3):
        x_new[i] = -x[i] / r2
    s2 = 1.0 / r2
    for i in range(3):
        acc = 0.0
        for j in range(3):
            dt = -((1.0 if i == j else 0.0) / s2 - 2.0 * x_new[i] * x_new[j] / (s2 * s2))
            acc += dt * p[j]
        p_new[i] = acc


@kernel
def builtin_switch(ctx_i, ctx_f, y, chart):
    if ctx_i[0] != S3:
        return chart
    r2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2]
    if r2 <= S3_SWITCH_RADIUS * S3_SWITCH_RADIUS:
        return chart
    x_new = np.empty(3)
    p_new = np.empty(3)
    if ctx_i[1] == REEB_TRANSPORT:
        s3_chart_map(y[:3], np.zeros(3), x_new, p_new)
        y[:3] = x_new
    else:
        s3_chart_map(y[:3], y[3:6], x_new, p_new)
        y[:3] = x_new
        y[3:6] = p_new
    return 1 - chart


# Drivers call these globals; numba binds them at compile time, which keeps
# the compiled drivers cacheable. Interpreted copies rebind them.
rhs_fn = builtin_rhs
switch_fn = builtin_switch


def with_callbacks(driver, rhs, switch):
    """Interpreted copy of ``driver`` calling ``rhs``/``switch`` instead of the built-ins."""
    f = py_func(driver)
    env = dict(f.__globals__)
    env["rhs_fn"] = rhs
    env["switch_fn"] = switch
    return types.FunctionType(f.__code__, env, f.__name__, f.__defaults__, f.__closure__)


@kernel
def _rms(v, scale):
    acc = 0.0
    for i in range(v.shape[0]):
        r = v[i] / scale[i]
        acc += r * r
    return math.sqrt(acc / v.shape[0])


@kernel
def _scale(y, rtol, atol):
    n = y.shape[0]
    scale = np.empty(n)
    for i in range(n):
        scale[i] = atol + abs(y[i]) * rtol
    return scale


@kernel
def _first_guess(y, f, scale):
    d0 = _rms(y, scale)
    d1 = _rms(f, scale)
    if d0 < 1e-5 or d1 < 1e-5:
        return 1e-6
    return 0.01 * d0 / d1


@kernel
def _first_refine(f, f1, scale, h0):
    d1 = _rms(f, scale)
    d2 = _rms(f1 - f, scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / 8.0)
    return min(100.0 * h0, h1)


@kernel
def _grow(ts, ys, cs):
    cap = ts.shape[0] * 2
    ts2 = np.empty(cap)
    ys2 = np.empty((cap, ys.shape[1]))
    cs2 = np.empty(cap, np.int64)
    ts2[: ts.shape[0]] = ts
    ys2[: ts.shape[0]] = ys
    cs2[: ts.shape[0]] = cs
    return ts2, ys2, cs2


@kernel
def dop853_drive(ctx_i, ctx_f, y0, chart0, t_end, rtol, atol,
                 max_step, first_step, t_eval, max_steps):
    """Adaptive Dormand-Prince 8(5,3) integration of an autonomous ODE.

    ``t_eval`` holds output times (same sign as ``t_end``, increasing in
    magnitude); steps are shortened to land on them exactly. With an empty
    ``t_eval`` every accepted step is recorded. Returns
    ``(t, y, chart, stats)`` with ``stats = [accepted, rejected, nfev, status]``.
    """
    n = y0.shape[0]
    y = y0.copy()
    chart = chart0
    direction = 1.0 if t_end >= 0.0 else -1.0
    T = abs(t_end)
    n_eval = t_eval.shape[0]
    use_eval = n_eval > 0
    cap = n_eval + 1 if use_eval else 256
    ts = np.empty(cap)
    ys = np.empty((cap, n))
    cs = np.empty(cap, np.int64)
    count = 0
    ie = 0

    if use_eval:
        while ie < n_eval and abs(t_eval[ie]) <= 0.0:
            ts[count] = t_eval[ie]
            ys[count] = y
            cs[count] = chart
            count += 1
            ie += 1
    else:
        ts[0] = 0.0
        ys[0] = y
        cs[0] = chart
        count = 1

    f = np.empty(n)
    rhs_fn(ctx_i, ctx_f, y, chart, f)
    nfev = 1
    n_acc = 0
    n_rej = 0
    status = OK
    if T == 0.0:
        stats = np.array([0, 0, nfev, status], dtype=np.int64)
        return ts[:count], ys[:count], cs[:count], stats

    if first_step > 0.0:
        h = first_step
    else:
        scale = _scale(y, rtol, atol)
        h0 = _first_guess(y, f, scale)
        f1 = np.empty(n)
        rhs_fn(ctx_i, ctx_f, y + direction * h0 * f, chart, f1)
        h = _first_refine(f, f1, scale, h0)
        nfev += 1
    h = min(h, max_step, T)

    K = np.empty((N_STAGES + 1, n))
    y_new = np.empty(n)
    f_new = np.empty(n)
    ytmp = np.empty(n)
    s = 0.0
    rejected = False
    while s < T:
        if n_acc + n_rej >= max_steps:
            status = MAX_STEPS
            break
        h_use = h
        last = False
        if s + h_use >= T:
            h_use = T - s
            last = True
        hit = False
        if use_eval and ie < n_eval and s + h_use >= abs(t_eval[ie]):
            h_use = abs(t_eval[ie]) - s
            hit = True
            last = abs(t_eval[ie]) >= T
        if h_use <= 0.0:
            # output time coincides with the current time
            if count == ts.shape[0]:
                ts, ys, cs = _grow(ts, ys, cs)
            ts[count] = t_eval[ie]
            ys[count] = y
            cs[count] = chart
            count += 1
            ie += 1
            continue
        hd = direction * h_use

        for i in range(n):
            K[0, i] = f[i]
        for st in range(1, N_STAGES):
            for i in range(n):
                acc = 0.0
                for j in range(st):
                    acc += RK_A[st, j] * K[j, i]
                ytmp[i] = y[i] + hd * acc
            rhs_fn(ctx_i, ctx_f, ytmp, chart, K[st])
        for i in range(n):
            acc = 0.0
            for j in range(N_STAGES):
                acc += RK_B[j] * K[j, i]
            y_new[i] = y[i] + hd * acc
        rhs_fn(ctx_i, ctx_f, y_new, chart, f_new)
        for i in range(n):
            K[N_STAGES, i] = f_new[i]
        nfev += N_STAGES

        e5 = 0.0
        e3 = 0.0
        for i in range(n):
            sc = atol + max(abs(y[i]), abs(y_new[i])) * rtol
            a5 = 0.0
            a3 = 0.0
            for j in range(N_STAGES + 1):
                a5 += K[j, i] * RK_E5[j]
                a3 += K[j, i] * RK_E3[j]
            a5 /= sc
            a3 /= sc
            e5 += a5 * a5
            e3 += a3 * a3
        if e5 == 0.0 and e3 == 0.0:
            err = 0.0
        else:
            err = h_use * e5 / math.sqrt((e5 + 0.01 * e3) * n)

        if err < 1.0:
            n_acc += 1
            if last:
                s = T
            elif hit:
                s = abs(t_eval[ie])
            else:
                s += h_use
            for i in range(n):
                y[i] = y_new[i]
                f[i] = f_new[i]
            if err == 0.0:
                factor = MAX_FACTOR
            else:
                factor = min(MAX_FACTOR, SAFETY * err ** ERR_EXPONENT)
            if rejected:
                factor = min(1.0, factor)
            rejected = False
            h_next = h_use * factor
            if hit:
                # a shortened step says little about the natural step size
                h_next = max(h_next, h)
            h = min(h_next, max_step)

            new_chart = switch_fn(ctx_i, ctx_f, y, chart)
            if new_chart != chart:
                chart = new_chart
                rhs_fn(ctx_i, ctx_f, y, chart, f)
                nfev += 1

            if use_eval:
                while ie < n_eval and abs(t_eval[ie]) <= s:
                    if count == ts.shape[0]:
                        ts, ys, cs = _grow(ts, ys, cs)
                    ts[count] = t_eval[ie]
                    ys[count] = y
                    cs[count] = chart
                    count += 1
                    ie += 1
            else:
                if count == ts.shape[0]:
                    ts, ys, cs = _grow(ts, ys, cs)
                ts[count] = direction * s
                ys[count] = y
                cs[count] = chart
                count += 1
        else:
            n_rej += 1
            rejected = True
            h = h_use * max(MIN_FACTOR, SAFETY * err ** ERR_EXPONENT)
            if h < 1e-14 * max(1.0, s):
                status = STEP_UNDERFLOW
                break

    stats = np.array([n_acc, n_rej, nfev, status], dtype=np.int64)
    return ts[:count], ys[:count], cs[:count], stats


@kernel
def midpoint_drive(ctx_i, ctx_f, y0, chart0, t_end, step, max_iter):
    """Fixed-step implicit midpoint rule (symplectic), solved by fixed-point iteration."""
    n = y0.shape[0]
    T = abs(t_end)
    direction = 1.0 if t_end >= 0.0 else -1.0
    n_steps = int(math.ceil(T / step - 1e-12)) if T > 0.0 else 0
    h = direction * (T / n_steps) if n_steps > 0 else 0.0
    ts = np.empty(n_steps + 1)
    ys = np.empty((n_steps + 1, n))
    cs = np.empty(n_steps + 1, np.int64)
    y = y0.copy()
    chart = chart0
    ts[0] = 0.0
    ys[0] = y
    cs[0] = chart
    f = np.empty(n)
    mid = np.empty(n)
    y_new = np.empty(n)
    nfev = 0
    status = OK
    for k in range(n_steps):
        rhs_fn(ctx_i, ctx_f, y, chart, f)
        nfev += 1
        for i in range(n):
            y_new[i] = y[i] + h * f[i]
        converged = False
        for it in range(max_iter):
            for i in range(n):
                mid[i] = 0.5 * (y[i] + y_new[i])
            rhs_fn(ctx_i, ctx_f, mid, chart, f)
            nfev += 1
            delta = 0.0
            for i in range(n):
                v = y[i] + h * f[i]
                d = abs(v - y_new[i]) / (1.0 + abs(v))
                if d > delta:
                    delta = d
                y_new[i] = v
            if delta < 1e-14:
                converged = True
                break
        if not converged:
            status = STEP_UNDERFLOW
        for i in range(n):
            y[i] = y_new[i]
        chart = switch_fn(ctx_i, ctx_f, y, chart)
        ts[k + 1] = (k + 1) * h
        ys[k + 1] = y
        cs[k + 1] = chart
    stats = np.array([n_steps, 0, nfev, status], dtype=np.int64)
    return ts, ys, cs, stats
