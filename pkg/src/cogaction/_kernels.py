"""Hot numeric kernels, each in a compiled-loop and a vectorized-numpy flavour.

The public wrappers at the bottom of the module dispatch on
``_accel.use_numba()``. Loop kernels are written for numba's nopython mode; the
numpy kernels are the reference path and the fallback when numba is disabled.

Potentials reach the loop kernels as a packed program: an int code per term,
offsets into one flat float parameter array, and the signal vector ``u``
(length 0 when no term is time varying).
"""
import math

import numpy as np

from . import _accel
from ._accel import njit

QUADRATIC = 0
DOUBLE_WELL = 1
ROSENBROCK = 2
LOGISTIC = 3
COUPLED = 4


# ---------------------------------------------------------------------------
# potentials, loop flavour
#
# Each term loops over the rows of Q itself and accumulates into ``out``;
# per-row array views cost more than the arithmetic, so none are created.


@njit
def _term_values(code, fp, lo, Q, U, out):
    M, n = Q.shape
    if code == QUADRATIC:
        for k in range(M):
            s = 0.0
            for i in range(n):
                row = 0.0
                for j in range(n):
                    row += fp[lo + i * n + j] * Q[k, j]
                s += Q[k, i] * row
            out[k] += 0.5 * s
    elif code == DOUBLE_WELL:
        for k in range(M):
            s = 0.0
            for i in range(n):
                d = Q[k, i] * Q[k, i] - 1.0
                s += d * d
            out[k] += fp[lo] * s
    elif code == ROSENBROCK:
        a = fp[lo]
        b = fp[lo + 1]
        for k in range(M):
            s = 0.0
            for i in range(n - 1):
                d1 = Q[k, i + 1] - Q[k, i] * Q[k, i]
                d2 = a - Q[k, i]
                s += b * d1 * d1 + d2 * d2
            out[k] += s
    elif code == LOGISTIC:
        D = int(fp[lo])
        X = lo + 1
        Y = lo + 1 + D * n
        for k in range(M):
            s = 0.0
            for j in range(D):
                z = 0.0
                for i in range(n):
                    z += fp[X + j * n + i] * Q[k, i]
                z = -fp[Y + j] * z
                if z > 0.0:
                    s += z + math.log1p(math.exp(-z))
                else:
                    s += math.log1p(math.exp(z))
            out[k] += s / D
    else:
        gain = fp[lo]
        m = int(fp[lo + 1])
        B = lo + 2
        for k in range(M):
            uu = 0.0
            for c in range(m):
                uu += U[k, c] * U[k, c]
            s = 0.0
            for i in range(n):
                bu = 0.0
                for c in range(m):
                    bu += fp[B + i * m + c] * U[k, c]
                d = Q[k, i] - bu
                s += d * d
            out[k] += 0.5 * gain * uu * s


@njit
def _term_grads(code, fp, lo, Q, U, out):
    M, n = Q.shape
    if code == QUADRATIC:
        for k in range(M):
            for i in range(n):
                row = 0.0
                for j in range(n):
                    row += fp[lo + i * n + j] * Q[k, j]
                out[k, i] += row
    elif code == DOUBLE_WELL:
        c4 = 4.0 * fp[lo]
        for k in range(M):
            for i in range(n):
                out[k, i] += c4 * Q[k, i] * (Q[k, i] * Q[k, i] - 1.0)
    elif code == ROSENBROCK:
        a = fp[lo]
        b = fp[lo + 1]
        for k in range(M):
            for i in range(n - 1):
                d1 = Q[k, i + 1] - Q[k, i] * Q[k, i]
                out[k, i] += -4.0 * b * Q[k, i] * d1 - 2.0 * (a - Q[k, i])
                out[k, i + 1] += 2.0 * b * d1
    elif code == LOGISTIC:
        D = int(fp[lo])
        X = lo + 1
        Y = lo + 1 + D * n
        for k in range(M):
            for j in range(D):
                y = fp[Y + j]
                z = 0.0
                for i in range(n):
                    z += fp[X + j * n + i] * Q[k, i]
                z = -y * z
                # d/dz log(1 + e^z) = sigmoid(z)
                if z >= 0.0:
                    sig = 1.0 / (1.0 + math.exp(-z))
                else:
                    ez = math.exp(z)
                    sig = ez / (1.0 + ez)
                for i in range(n):
                    out[k, i] += -y * fp[X + j * n + i] * sig / D
    else:
        gain = fp[lo]
        m = int(fp[lo + 1])
        B = lo + 2
        for k in range(M):
            uu = 0.0
            for c in range(m):
                uu += U[k, c] * U[k, c]
            for i in range(n):
                bu = 0.0
                for c in range(m):
                    bu += fp[B + i * m + c] * U[k, c]
                out[k, i] += gain * uu * (Q[k, i] - bu)


@njit
def potential_values_loop(codes, offs, fp, Q, U):
    out = np.zeros(Q.shape[0])
    for t in range(codes.shape[0]):
        _term_values(codes[t], fp, offs[t], Q, U, out)
    return out


@njit
def potential_grads_loop(codes, offs, fp, Q, U):
    out = np.zeros_like(Q)
    for t in range(codes.shape[0]):
        _term_grads(codes[t], fp, offs[t], Q, U, out)
    return out


@njit
def _stage_grad(codes, offs, fp, X, ustage, k, s, Ub, G):
    # gradient at the single state X[0] with the stage-s input of step k
    for c in range(Ub.shape[1]):
        Ub[0, c] = ustage[k, s, c]
    G[:] = 0.0
    for t in range(codes.shape[0]):
        _term_grads(codes[t], fp, offs[t], X, Ub, G)


# ---------------------------------------------------------------------------
# fixed-step classical RK4


@njit
def rk4_second_order_loop(codes, offs, fp, q0, v0, mass, eta, h, nsteps, ustage):
    n = q0.shape[0]
    Q = np.empty((nsteps + 1, n))
    V = np.empty((nsteps + 1, n))
    Q[0] = q0
    V[0] = v0
    X = np.empty((1, n))
    G = np.empty((1, n))
    Ub = np.empty((1, ustage.shape[2]))
    kq = np.empty((4, n))
    kv = np.empty((4, n))
    # stage s starts from the state advanced by frac[s] * h along stage s-1
    frac = (0.0, 0.5, 0.5, 1.0)
    usel = (0, 1, 1, 2)
    bad = -1
    for k in range(nsteps):
        for s in range(4):
            for i in range(n):
                if s == 0:
                    X[0, i] = Q[k, i]
                    kq[0, i] = V[k, i]
                else:
                    X[0, i] = Q[k, i] + frac[s] * h * kq[s - 1, i]
                    kq[s, i] = V[k, i] + frac[s] * h * kv[s - 1, i]
            _stage_grad(codes, offs, fp, X, ustage, k, usel[s], Ub, G)
            for i in range(n):
                kv[s, i] = -(eta * kq[s, i] + G[0, i]) / mass
        ok = True
        for i in range(n):
            Q[k + 1, i] = Q[k, i] + (h / 6.0) * (kq[0, i] + 2.0 * kq[1, i] + 2.0 * kq[2, i] + kq[3, i])
            V[k + 1, i] = V[k, i] + (h / 6.0) * (kv[0, i] + 2.0 * kv[1, i] + 2.0 * kv[2, i] + kv[3, i])
            if not (math.isfinite(Q[k + 1, i]) and math.isfinite(V[k + 1, i])):
                ok = False
        if not ok:
            bad = k + 1
            break
    return Q, V, bad


@njit
def rk4_first_order_loop(codes, offs, fp, q0, eta, h, nsteps, ustage):
    n = q0.shape[0]
    Q = np.empty((nsteps + 1, n))
    Q[0] = q0
    X = np.empty((1, n))
    G = np.empty((1, n))
    Ub = np.empty((1, ustage.shape[2]))
    kq = np.empty((4, n))
    frac = (0.0, 0.5, 0.5, 1.0)
    usel = (0, 1, 1, 2)
    bad = -1
    for k in range(nsteps):
        for s in range(4):
            for i in range(n):
                if s == 0:
                    X[0, i] = Q[k, i]
                else:
                    X[0, i] = Q[k, i] + frac[s] * h * kq[s - 1, i]
            _stage_grad(codes, offs, fp, X, ustage, k, usel[s], Ub, G)
            for i in range(n):
                kq[s, i] = -G[0, i] / eta
        ok = True
        for i in range(n):
            Q[k + 1, i] = Q[k, i] + (h / 6.0) * (kq[0, i] + 2.0 * kq[1, i] + 2.0 * kq[2, i] + kq[3, i])
            if not math.isfinite(Q[k + 1, i]):
                ok = False
        if not ok:
            bad = k + 1
            break
    return Q, bad


def rk4_second_order_numpy(grad, q0, v0, mass, eta, h, nsteps, ustage):
    """Same scheme as the loop kernel; ``grad(q, u)`` is a numpy callable."""
    Q = np.empty((nsteps + 1, q0.shape[0]))
    V = np.empty_like(Q)
    Q[0] = q0
    V[0] = v0
    for k in range(nsteps):
        q, v = Q[k], V[k]
        k1q = v.copy()
        k1v = -(eta * v + grad(q, ustage[k, 0])) / mass
        q2 = q + 0.5 * h * k1q
        v2 = v + 0.5 * h * k1v
        k2q = v2
        k2v = -(eta * v2 + grad(q2, ustage[k, 1])) / mass
        q3 = q + 0.5 * h * k2q
        v3 = v + 0.5 * h * k2v
        k3q = v3
        k3v = -(eta * v3 + grad(q3, ustage[k, 1])) / mass
        q4 = q + h * k3q
        v4 = v + h * k3v
        k4q = v4
        k4v = -(eta * v4 + grad(q4, ustage[k, 2])) / mass
        Q[k + 1] = q + (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
        V[k + 1] = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if not (np.all(np.isfinite(Q[k + 1])) and np.all(np.isfinite(V[k + 1]))):
            return Q, V, k + 1
    return Q, V, -1


def rk4_first_order_numpy(grad, q0, eta, h, nsteps, ustage):
    Q = np.empty((nsteps + 1, q0.shape[0]))
    Q[0] = q0
    for k in range(nsteps):
        q = Q[k]
        k1 = -grad(q, ustage[k, 0]) / eta
        k2 = -grad(q + 0.5 * h * k1, ustage[k, 1]) / eta
        k3 = -grad(q + 0.5 * h * k2, ustage[k, 1]) / eta
        k4 = -grad(q + h * k3, ustage[k, 2]) / eta
        Q[k + 1] = q + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(Q[k + 1])):
            return Q, k + 1
    return Q, -1


# ---------------------------------------------------------------------------
# difference stencils on a uniform grid; q has shape (N+1, n)


def d1_numpy(q, h):
    out = np.empty_like(q)
    out[1:-1] = (q[2:] - q[:-2]) / (2.0 * h)
    out[0] = (-3.0 * q[0] + 4.0 * q[1] - q[2]) / (2.0 * h)
    out[-1] = (3.0 * q[-1] - 4.0 * q[-2] + q[-3]) / (2.0 * h)
    return out


def d2_numpy(q, h):
    out = np.empty_like(q)
    out[1:-1] = (q[2:] - 2.0 * q[1:-1] + q[:-2]) / (h * h)
    out[0] = (2.0 * q[0] - 5.0 * q[1] + 4.0 * q[2] - q[3]) / (h * h)
    out[-1] = (2.0 * q[-1] - 5.0 * q[-2] + 4.0 * q[-3] - q[-4]) / (h * h)
    return out


def d1_transpose_numpy(g, h):
    out = np.zeros_like(g)
    s = g / (2.0 * h)
    out[2:] += s[1:-1]
    out[:-2] -= s[1:-1]
    out[0] += -3.0 * s[0]
    out[1] += 4.0 * s[0]
    out[2] += -s[0]
    out[-1] += 3.0 * s[-1]
    out[-2] += -4.0 * s[-1]
    out[-3] += s[-1]
    return out


def d2_transpose_numpy(g, h):
    out = np.zeros_like(g)
    s = g / (h * h)
    out[2:] += s[1:-1]
    out[1:-1] -= 2.0 * s[1:-1]
    out[:-2] += s[1:-1]
    out[0] += 2.0 * s[0]
    out[1] += -5.0 * s[0]
    out[2] += 4.0 * s[0]
    out[3] += -s[0]
    out[-1] += 2.0 * s[-1]
    out[-2] += -5.0 * s[-1]
    out[-3] += 4.0 * s[-1]
    out[-4] += -s[-1]
    return out


def quadratic_part_numpy(q, h, c, cmid, a2, a1, cross, a0, forward):
    """Value and full-node gradient of the derivative/confinement terms.

    ``c`` holds trapezoid-times-weight node coefficients, ``cmid`` the interval
    coefficients used when ``forward`` selects the per-interval kinetic term.
    """
    cc = c[:, None]
    value = 0.0
    grad = np.zeros_like(q)
    if a2 != 0.0 or cross != 0.0 or (a1 != 0.0 and not forward):
        vel = d1_numpy(q, h)
        acc = d2_numpy(q, h)
        if a2 != 0.0:
            value += 0.5 * a2 * np.sum(c * np.sum(acc * acc, axis=1))
        if cross != 0.0:
            value += cross * np.sum(c * np.sum(vel * acc, axis=1))
        if a1 != 0.0 and not forward:
            value += 0.5 * a1 * np.sum(c * np.sum(vel * vel, axis=1))
        ga = cc * (a2 * acc + cross * vel)
        gv = cc * (cross * acc + (0.0 if forward else a1) * vel)
        grad += d2_transpose_numpy(ga, h) + d1_transpose_numpy(gv, h)
    if a1 != 0.0 and forward:
        dq = (q[1:] - q[:-1]) / h
        value += 0.5 * a1 * np.sum(cmid * np.sum(dq * dq, axis=1))
        s = a1 * cmid[:, None] * dq / h
        grad[1:] += s
        grad[:-1] -= s
    if a0 != 0.0:
        value += 0.5 * a0 * np.sum(c * np.sum(q * q, axis=1))
        grad += a0 * cc * q
    return value, grad


@njit
def quadratic_part_loop(q, h, c, cmid, a2, a1, cross, a0, forward):
    N1, n = q.shape
    N = N1 - 1
    value = 0.0
    grad = np.zeros_like(q)
    ih2 = 1.0 / (h * h)
    i2h = 1.0 / (2.0 * h)
    a1c = 0.0 if forward else a1
    for i in range(n):
        for k in range(N1):
            if k == 0:
                vel = (-3.0 * q[0, i] + 4.0 * q[1, i] - q[2, i]) * i2h
                acc = (2.0 * q[0, i] - 5.0 * q[1, i] + 4.0 * q[2, i] - q[3, i]) * ih2
            elif k == N:
                vel = (3.0 * q[N, i] - 4.0 * q[N - 1, i] + q[N - 2, i]) * i2h
                acc = (2.0 * q[N, i] - 5.0 * q[N - 1, i] + 4.0 * q[N - 2, i] - q[N - 3, i]) * ih2
            else:
                vel = (q[k + 1, i] - q[k - 1, i]) * i2h
                acc = (q[k + 1, i] - 2.0 * q[k, i] + q[k - 1, i]) * ih2
            ck = c[k]
            value += ck * (0.5 * a2 * acc * acc + cross * vel * acc
                           + 0.5 * a1c * vel * vel + 0.5 * a0 * q[k, i] * q[k, i])
            ga = ck * (a2 * acc + cross * vel) * ih2
            gv = ck * (cross * acc + a1c * vel) * i2h
            if k == 0:
                grad[0, i] += 2.0 * ga - 3.0 * gv
                grad[1, i] += -5.0 * ga + 4.0 * gv
                grad[2, i] += 4.0 * ga - gv
                grad[3, i] += -ga
            elif k == N:
                grad[N, i] += 2.0 * ga + 3.0 * gv
                grad[N - 1, i] += -5.0 * ga - 4.0 * gv
                grad[N - 2, i] += 4.0 * ga + gv
                grad[N - 3, i] += -ga
            else:
                grad[k + 1, i] += ga + gv
                grad[k, i] += -2.0 * ga
                grad[k - 1, i] += ga - gv
            grad[k, i] += a0 * ck * q[k, i]
        if forward and a1 != 0.0:
            for k in range(N):
                dq = (q[k + 1, i] - q[k, i]) / h
                value += 0.5 * a1 * cmid[k] * dq * dq
                s = a1 * cmid[k] * dq / h
                grad[k + 1, i] += s
                grad[k, i] -= s
    return value, grad


# ---------------------------------------------------------------------------
# dispatch


def quadratic_part(q, h, c, cmid, a2, a1, cross, a0, forward):
    if _accel.use_numba():
        return quadratic_part_loop(q, h, c, cmid, float(a2), float(a1), float(cross),
                                   float(a0), bool(forward))
    return quadratic_part_numpy(q, h, c, cmid, a2, a1, cross, a0, forward)
