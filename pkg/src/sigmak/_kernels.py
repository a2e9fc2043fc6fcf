"""Hot numeric kernels with two interchangeable implementations.

Every kernel exists as a numba ``@njit`` loop (``nb_*``) and as a pure-numpy
vectorised path (``np_*``).  The public names dispatch to one of the two at
import time according to the ``SIGMAK_BACKEND`` environment variable
(``numba`` or ``numpy``).  The default is ``numba`` when it can be imported.

Set ``SIGMAK_BACKEND=numpy`` to run the whole package without compiling
anything; ``benchmarks/bench_kernels.py`` times both paths on the same
inputs.
"""

from __future__ import annotations

import math
import os

import numpy as np

try:  # pragma: no cover - exercised implicitly
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAVE_NUMBA = False


def _resolve_backend() -> str:
    requested = os.environ.get("SIGMAK_BACKEND", "").strip().lower()
    if requested in ("numpy", "np", "0", "off"):
        return "numpy"
    if requested in ("numba", "nb", "1", "on", ""):
        return "numba" if HAVE_NUMBA else "numpy"
    raise ValueError(f"unknown SIGMAK_BACKEND={requested!r}")


BACKEND = _resolve_backend()


def _njit(*args, **kwargs):
    if not HAVE_NUMBA:
        def deco(fn):
            return fn
        return deco
    return numba.njit(*args, cache=True, **kwargs)


# ---------------------------------------------------------------------------
# elementary symmetric polynomials
# ---------------------------------------------------------------------------

def np_esp_all(lam):
    """All sigma_0..sigma_n of each row of ``lam`` (shape (N, n))."""
    lam = np.asarray(lam, dtype=float)
    N, n = lam.shape
    e = np.zeros((N, n + 1))
    e[:, 0] = 1.0
    for i in range(n):
        # descending j so each lambda_i enters a product at most once
        e[:, 1:i + 2] = e[:, 1:i + 2] + lam[:, i:i + 1] * e[:, 0:i + 1]
    return e


@_njit
def nb_esp_all(lam):
    N, n = lam.shape
    e = np.zeros((N, n + 1))
    for row in range(N):
        e[row, 0] = 1.0
        for i in range(n):
            li = lam[row, i]
            for j in range(i + 1, 0, -1):
                e[row, j] += li * e[row, j - 1]
    return e


def np_esp_excluded(lam):
    """sigma_l(lambda | i) for every i and l: shape (N, n, n + 1)."""
    lam = np.asarray(lam, dtype=float)
    N, n = lam.shape
    out = np.zeros((N, n, n + 1))
    for i in range(n):
        rest = np.delete(lam, i, axis=1)
        out[:, i, :n] = np_esp_all(rest)
    return out


@_njit
def nb_esp_excluded(lam):
    N, n = lam.shape
    out = np.zeros((N, n, n + 1))
    e = np.zeros(n + 1)
    for row in range(N):
        for i in range(n):
            for j in range(n + 1):
                e[j] = 0.0
            e[0] = 1.0
            cnt = 0
            for m in range(n):
                if m == i:
                    continue
                lm = lam[row, m]
                for j in range(cnt + 1, 0, -1):
                    e[j] += lm * e[j - 1]
                cnt += 1
            for j in range(n + 1):
                out[row, i, j] = e[j]
    return out


# ---------------------------------------------------------------------------
# radial profile evaluation (cubic Hermite with asymptotic tail)
# ---------------------------------------------------------------------------
# tail = (a_lin, a_log, a_const, a_inv, p): z(s) ~ a_lin s - a_log log s + a_const + a_inv s^-p

def np_hermite_eval(s, r, z, dz, tail):
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    r0, rN = r[0], r[-1]
    lo = s < r0
    hi = s > rN
    mid = ~(lo | hi)
    if np.any(mid):
        sm = s[mid]
        j = np.clip(np.searchsorted(r, sm, side="right") - 1, 0, len(r) - 2)
        hj = r[j + 1] - r[j]
        t = (sm - r[j]) / hj
        t2 = t * t
        t3 = t2 * t
        out[mid] = ((2 * t3 - 3 * t2 + 1) * z[j] + (t3 - 2 * t2 + t) * hj * dz[j]
                    + (-2 * t3 + 3 * t2) * z[j + 1] + (t3 - t2) * hj * dz[j + 1])
    if np.any(lo):
        sl = s[lo]
        out[lo] = z[0] + (sl * sl - r0 * r0) * dz[0] / (2.0 * r0)
    if np.any(hi):
        sh = s[hi]
        out[hi] = tail[0] * sh - tail[1] * np.log(sh) + tail[2] + tail[3] * sh ** (-tail[4])
    return out


@_njit
def _nb_hermite_scalar(s, r, z, dz, tail):
    M = r.shape[0]
    if s < r[0]:
        return z[0] + (s * s - r[0] * r[0]) * dz[0] / (2.0 * r[0])
    if s > r[M - 1]:
        return tail[0] * s - tail[1] * math.log(s) + tail[2] + tail[3] * s ** (-tail[4])
    lo = 0
    hi = M - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if r[mid] <= s:
            lo = mid
        else:
            hi = mid
    hj = r[lo + 1] - r[lo]
    t = (s - r[lo]) / hj
    t2 = t * t
    t3 = t2 * t
    return ((2 * t3 - 3 * t2 + 1) * z[lo] + (t3 - 2 * t2 + t) * hj * dz[lo]
            + (-2 * t3 + 3 * t2) * z[lo + 1] + (t3 - t2) * hj * dz[lo + 1])


@_njit
def nb_hermite_eval(s, r, z, dz, tail):
    out = np.empty(s.shape[0])
    for i in range(s.shape[0]):
        out[i] = _nb_hermite_scalar(s[i], r, z, dz, tail)
    return out


# ---------------------------------------------------------------------------
# barrier envelopes: sup / inf over directions of const_d + z(|x + P_d|)
# ---------------------------------------------------------------------------

def np_envelope(pts, shifts, consts, r, z, dz, tail, sign, chunk=2048):
    pts = np.asarray(pts, dtype=float)
    N = pts.shape[0]
    best = np.empty(N)
    arg = np.empty(N, dtype=np.int64)
    for a in range(0, N, chunk):
        blk = pts[a:a + chunk]
        d = blk[:, None, :] + shifts[None, :, :]
        s = np.sqrt(np.einsum("ijk,ijk->ij", d, d))
        vals = np_hermite_eval(s.ravel(), r, z, dz, tail).reshape(s.shape) + consts[None, :]
        if sign > 0:
            idx = np.argmax(vals, axis=1)
        else:
            idx = np.argmin(vals, axis=1)
        arg[a:a + chunk] = idx
        best[a:a + chunk] = vals[np.arange(len(blk)), idx]
    return best, arg


@_njit
def nb_envelope(pts, shifts, consts, r, z, dz, tail, sign):
    N, n = pts.shape
    D = shifts.shape[0]
    best = np.empty(N)
    arg = np.empty(N, dtype=np.int64)
    for i in range(N):
        bv = -np.inf if sign > 0 else np.inf
        bi = 0
        for d in range(D):
            acc = 0.0
            for c in range(n):
                t = pts[i, c] + shifts[d, c]
                acc += t * t
            v = consts[d] + _nb_hermite_scalar(math.sqrt(acc), r, z, dz, tail)
            if (sign > 0 and v > bv) or (sign <= 0 and v < bv):
                bv = v
                bi = d
        best[i] = bv
        arg[i] = bi
    return best, arg


# ---------------------------------------------------------------------------
# discrete Legendre conjugate: max_j (x_j . xi - u_j)
# ---------------------------------------------------------------------------

def np_conjugate(xs, us, xis, chunk=256):
    xs = np.asarray(xs, dtype=float)
    xis = np.asarray(xis, dtype=float)
    Q = xis.shape[0]
    best = np.empty(Q)
    arg = np.empty(Q, dtype=np.int64)
    for a in range(0, Q, chunk):
        vals = xis[a:a + chunk] @ xs.T - us[None, :]
        idx = np.argmax(vals, axis=1)
        arg[a:a + chunk] = idx
        best[a:a + chunk] = vals[np.arange(len(idx)), idx]
    return best, arg


@_njit
def nb_conjugate(xs, us, xis):
    N, n = xs.shape
    Q = xis.shape[0]
    best = np.empty(Q)
    arg = np.empty(Q, dtype=np.int64)
    for q in range(Q):
        bv = -np.inf
        bi = 0
        for j in range(N):
            v = -us[j]
            for c in range(n):
                v += xs[j, c] * xis[q, c]
            if v > bv:
                bv = v
                bi = j
        best[q] = bv
        arg[q] = bi
    return best, arg


# ---------------------------------------------------------------------------
# radial ODE: y' from the sigma_k radial identity, integrated with Dormand-Prince 5(4)
# ---------------------------------------------------------------------------
# mode 0: soliton, target (C - 1/sqrt(1 - y^2))^k ; mode 1: constant, target c / binom(n, k)

@_njit
def _radial_slope_rate(r, y, n, k, C, target_const, mode):
    one_m = 1.0 - y * y
    if one_m <= 0.0 or y <= 0.0:
        return np.nan
    if mode == 0:
        base = C - 1.0 / math.sqrt(one_m)
        if base <= 0.0:
            return np.nan
        target = base ** k
    else:
        target = target_const
    lead = (n / k) * one_m * target * one_m ** (0.5 * k) * (r / y) ** (k - 1)
    return lead - ((n - k) / k) * y * one_m / r


def radial_slope_rate(r, y, n, k, C, target_const, mode):
    """Scalar y' of the radial equation; nan outside the admissible slope range."""
    one_m = 1.0 - y * y
    if one_m <= 0.0 or y <= 0.0:
        return math.nan
    if mode == 0:
        base = C - 1.0 / math.sqrt(one_m)
        if base <= 0.0:
            return math.nan
        target = base ** k
    else:
        target = target_const
    lead = (n / k) * one_m * target * one_m ** (0.5 * k) * (r / y) ** (k - 1)
    return lead - ((n - k) / k) * y * one_m / r


_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1 / 5, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3 / 40, 9 / 40, 0.0, 0.0, 0.0, 0.0],
    [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0, 0.0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0, 0.0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656, 0.0],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
])
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])


@_njit
def nb_integrate_radial(r0, y0, u0, r_max, n, k, C, target_const, mode, rtol, atol,
                        stop_gap, max_steps, A, Cn, E):
    rs = np.empty(max_steps)
    ys = np.empty(max_steps)
    us = np.empty(max_steps)
    dys = np.empty(max_steps)
    K = np.zeros((7, 2))
    r = r0
    y = y0
    u = u0
    f0 = _radial_slope_rate(r, y, n, k, C, target_const, mode)
    rs[0] = r
    ys[0] = y
    us[0] = u
    dys[0] = f0
    cnt = 1
    h = 0.1 * r0
    status = 0
    while r < r_max:
        if cnt >= max_steps:
            status = 2
            break
        if r + h > r_max:
            h = r_max - r
        if h < 1e-14 * max(1.0, r):
            status = 3
            break
        K[0, 0] = f0
        K[0, 1] = y
        bad = False
        for s in range(1, 7):
            ys_ = y
            us_ = u
            for j in range(s):
                ys_ += h * A[s, j] * K[j, 0]
                us_ += h * A[s, j] * K[j, 1]
            fy = _radial_slope_rate(r + Cn[s] * h, ys_, n, k, C, target_const, mode)
            if not np.isfinite(fy):
                bad = True
                break
            K[s, 0] = fy
            K[s, 1] = ys_
        if bad:
            h *= 0.25
            continue
        ynew = y
        unew = u
        ey = 0.0
        eu = 0.0
        for j in range(7):
            ynew += h * A[6, j] * K[j, 0]
            unew += h * A[6, j] * K[j, 1]
            ey += h * E[j] * K[j, 0]
            eu += h * E[j] * K[j, 1]
        sy = atol + rtol * max(abs(y), abs(ynew))
        su = atol + rtol * max(abs(u), abs(unew))
        err = max(abs(ey) / sy, abs(eu) / su)
        if err <= 1.0:
            r = r + h
            y = ynew
            u = unew
            f0 = K[6, 0]
            rs[cnt] = r
            ys[cnt] = y
            us[cnt] = u
            dys[cnt] = f0
            cnt += 1
            if mode == 1 and 1.0 - y < stop_gap:
                status = 1
                break
        if err == 0.0:
            fac = 5.0
        else:
            fac = min(5.0, max(0.2, 0.9 * err ** (-0.2)))
        h *= fac
    return rs[:cnt], ys[:cnt], us[:cnt], dys[:cnt], status


def np_integrate_radial(r0, y0, u0, r_max, n, k, C, target_const, mode, rtol, atol,
                        stop_gap, max_steps, A=None, Cn=None, E=None):
    """Fallback path: scipy's Dormand-Prince (RK45) with the same tolerances."""
    from scipy.integrate import solve_ivp

    def rhs(r, Y):
        fy = radial_slope_rate(r, Y[0], n, k, C, target_const, mode)
        if not math.isfinite(fy):
            fy = 0.0
        return [fy, Y[0]]

    events = None
    if mode == 1:
        def gap(r, Y):
            return (1.0 - Y[0]) - stop_gap
        gap.terminal = True
        events = gap
    sol = solve_ivp(rhs, (r0, r_max), [y0, u0], method="RK45", rtol=rtol, atol=atol,
                    events=events, first_step=0.1 * r0)
    rs = sol.t
    ys = sol.y[0]
    us = sol.y[1]
    if mode == 1 and sol.status == 1:
        re = sol.t_events[0][0]
        Ye = sol.y_events[0][0]
        rs = np.append(rs, re)
        ys = np.append(ys, Ye[0])
        us = np.append(us, Ye[1])
    dys = np.array([radial_slope_rate(a, b, n, k, C, target_const, mode) for a, b in zip(rs, ys)])
    status = 1 if (mode == 1 and sol.status == 1) else (0 if sol.success else 3)
    return rs, ys, us, dys, status


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

def esp_all(lam):
    lam = np.ascontiguousarray(lam, dtype=float)
    return nb_esp_all(lam) if BACKEND == "numba" else np_esp_all(lam)


def esp_excluded(lam):
    lam = np.ascontiguousarray(lam, dtype=float)
    return nb_esp_excluded(lam) if BACKEND == "numba" else np_esp_excluded(lam)


def hermite_eval(s, r, z, dz, tail):
    shape = np.shape(s)
    s = np.ascontiguousarray(s, dtype=float)
    tail = np.asarray(tail, dtype=float)
    if BACKEND == "numba":
        return nb_hermite_eval(s.ravel(), r, z, dz, tail).reshape(shape)
    return np_hermite_eval(s.ravel(), r, z, dz, tail).reshape(shape)


def envelope(pts, shifts, consts, r, z, dz, tail, sign):
    pts = np.ascontiguousarray(pts, dtype=float)
    shifts = np.ascontiguousarray(shifts, dtype=float)
    consts = np.ascontiguousarray(consts, dtype=float)
    tail = np.asarray(tail, dtype=float)
    if BACKEND == "numba":
        return nb_envelope(pts, shifts, consts, r, z, dz, tail, float(sign))
    return np_envelope(pts, shifts, consts, r, z, dz, tail, sign)


def conjugate(xs, us, xis):
    xs = np.ascontiguousarray(xs, dtype=float)
    us = np.ascontiguousarray(us, dtype=float)
    xis = np.ascontiguousarray(xis, dtype=float)
    if BACKEND == "numba":
        return nb_conjugate(xs, us, xis)
    return np_conjugate(xs, us, xis)


def integrate_radial(r0, y0, u0, r_max, n, k, C, target_const, mode, rtol, atol,
                     stop_gap=1e-8, max_steps=400000):
    args = (float(r0), float(y0), float(u0), float(r_max), float(n), float(k), float(C),
            float(target_const), int(mode), float(rtol), float(atol), float(stop_gap),
            int(max_steps))
    if BACKEND == "numba":
        return nb_integrate_radial(*args, _A, _C, _E)
    return np_integrate_radial(*args)
