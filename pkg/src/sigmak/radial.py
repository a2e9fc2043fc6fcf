"""Radially symmetric profiles: translating solitons and constant-curvature barriers.

For u = u(r) with slope y = u'(r) the principal curvatures of the graph are

    kappa = (y' / (1 - y^2), y / r, ..., y / r) / sqrt(1 - y^2)

and sigma_k(kappa) / binom(n, k) = target turns into a first-order ODE for y.
The soliton target is (C - 1/sqrt(1 - y^2))^k, the constant target c/binom(n, k).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ConvergenceError, ProfileRangeError, SpacelikeError
from .symfun import SpectralPoint, binom

R_START = 1e-6


@dataclass(frozen=True)
class RadialParams:
    n: int
    k: int
    rhs_kind: str = "soliton"
    C: float = 2.0
    c: float = 1.0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if not 1 <= self.k <= self.n:
            raise ValueError(f"k={self.k} out of range 1..{self.n}")
        if self.rhs_kind not in ("soliton", "constant"):
            raise ValueError(f"unknown rhs_kind {self.rhs_kind!r}")
        if self.rhs_kind == "soliton" and not self.C > 1:
            raise ValueError("soliton speed constant C must exceed 1")
        if self.rhs_kind == "constant" and not self.c > 0:
            raise ValueError("constant curvature level c must be positive")

    @property
    def soliton(self) -> bool:
        return self.rhs_kind == "soliton"

    @property
    def C_tilde(self) -> float:
        """Asymptotic slope: sqrt(1 - 1/C^2) for solitons, 1 (light cone) otherwise."""
        return math.sqrt(1.0 - 1.0 / self.C ** 2) if self.soliton else 1.0

    @property
    def slope_bound(self) -> float:
        return self.C_tilde

    @property
    def log_coeff_exact(self) -> float:
        """(1/C^2) ((n-k)/n)^{1/k}; zero in constant mode."""
        if not self.soliton:
            return 0.0
        return (1.0 / self.C ** 2) * ((self.n - self.k) / self.n) ** (1.0 / self.k)

    @property
    def slope0(self) -> float:
        """y'(0): C - 1 for solitons, the umbilic curvature (c/binom)^{1/k} otherwise."""
        if self.soliton:
            return self.C - 1.0
        return (self.c / binom(self.n, self.k)) ** (1.0 / self.k)

    @property
    def tail_power(self) -> float:
        """Decay exponent q of the height correction z0 - C~ r + L log r - c0 ~ r^-q.

        For k < n (and in constant mode) the correction is O(1/r).  For k = n the
        slope gap obeys e' ~ -a e^n r^(n-1), so e ~ r^(-n/(n-1)) and q = 1/(n-1).
        """
        if self.soliton and self.k == self.n:
            return 1.0 / (self.n - 1)
        return 1.0

    @property
    def _mode(self) -> int:
        return 0 if self.soliton else 1

    @property
    def _target_const(self) -> float:
        return 0.0 if self.soliton else self.c / binom(self.n, self.k)

    def to_dict(self):
        return {"n": self.n, "k": self.k, "rhs_kind": self.rhs_kind, "C": self.C, "c": self.c}


@dataclass(frozen=True)
class AsymptoteReport:
    z_inf: float
    z_inf_richardson: float
    log_coeff: float
    c0: float
    inv_coeff: float
    fit_window: tuple
    fit_residual: float
    converged: bool
    z_rate: float = float("nan")
    z_end: float = float("nan")

    def to_dict(self):
        return {
            "z_inf": self.z_inf,
            "z_inf_richardson": self.z_inf_richardson,
            "log_coeff": self.log_coeff,
            "c0": self.c0,
            "inv_coeff": self.inv_coeff,
            "fit_window": list(self.fit_window),
            "fit_residual": self.fit_residual,
            "converged": self.converged,
            "z_rate": self.z_rate,
            "z_end": self.z_end,
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        return text


@dataclass
class RadialProfile:
    """Sampled radial solution: slope y(r), height z0(r), and y'(r)."""

    r: np.ndarray
    y: np.ndarray
    z0: np.ndarray
    dy: np.ndarray
    params: RadialParams
    tail: tuple = (0.0, 0.0, 0.0, 0.0, 1.0)
    c0_raw: float = 0.0
    status: str = "ok"
    meta: dict = field(default_factory=dict)

    @property
    def r_end(self) -> float:
        return float(self.r[-1])

    @property
    def z(self) -> np.ndarray:
        """z = r (C~ - y); tends to the log coefficient for solitons."""
        return self.r * (self.params.C_tilde - self.y)

    @property
    def kappa(self) -> np.ndarray:
        """Principal curvatures at every sample, shape (len(r), n)."""
        n = self.params.n
        w = np.sqrt(1.0 - self.y ** 2)
        out = np.empty((self.r.size, n))
        out[:, 0] = self.dy / (1.0 - self.y ** 2) / w
        out[:, 1:] = (self.y / self.r / w)[:, None]
        return out

    @property
    def kappa_max(self) -> np.ndarray:
        return self.kappa.max(axis=1)

    def height(self, s):
        """z0 at radius s (Hermite interpolation, asymptotic tail beyond r_end)."""
        s = np.abs(np.asarray(s, dtype=float))
        return _kernels.hermite_eval(s, self.r, self.z0, self.y, np.asarray(self.tail))

    def slope(self, s):
        """y at radius s; Hermite in (y, y') inside, tail derivative outside."""
        s = np.abs(np.asarray(s, dtype=float))
        shape = s.shape
        s = s.ravel()
        out = np.empty_like(s)
        inside = s <= self.r_end
        if np.any(inside):
            a_lin = (self.y[1] - self.y[0]) / (self.r[1] - self.r[0])
            tail = (a_lin, 0.0, 0.0, 0.0, 1.0)
            out[inside] = _kernels.hermite_eval(s[inside], self.r, self.y, self.dy, np.asarray(tail))
            low = s < self.r[0]
            out[low] = self.params.slope0 * s[low]
        if np.any(~inside):
            a_lin, a_log, _, a_inv, pw = self.tail
            so = s[~inside]
            out[~inside] = a_lin - a_log / so - pw * a_inv * so ** (-pw - 1.0)
        return out.reshape(shape)

    # Legendre dual of the radial profile: z0*(tau) = r tau - z0(r) with tau = y(r)
    def dual(self, tau, extrapolate=True):
        tau = np.abs(np.asarray(tau, dtype=float))
        shape = tau.shape
        t = tau.ravel()
        vals = self.r * self.y - self.z0
        out = np.empty_like(t)
        inside = t <= self.y[-1]
        if np.any(inside):
            out[inside] = _kernels.hermite_eval(t[inside], self.y, vals, self.r, np.zeros(5))
        if np.any(~inside):
            if not extrapolate:
                raise ProfileRangeError(f"dual profile requested at tau={t[~inside].max()} "
                                        f"beyond the tabulated {self.y[-1]}")
            rr = self.radius_of_slope(t[~inside])
            out[~inside] = rr * t[~inside] - self.height(rr)
        return out.reshape(shape)

    def radius_of_slope(self, tau):
        """Inverse of the slope map r -> y(r)."""
        from scipy.optimize import brentq

        tau = np.asarray(tau, dtype=float)
        shape = tau.shape
        t = tau.ravel()
        out = np.empty_like(t)
        for i, ti in enumerate(t):
            if ti >= self.params.slope_bound:
                raise ProfileRangeError(f"slope {ti} at or beyond the bound {self.params.slope_bound}")
            if ti <= self.y[-1]:
                out[i] = np.interp(ti, self.y, self.r)
                j = np.searchsorted(self.y, ti)
                lo = self.r[max(j - 1, 0)]
                hi = self.r[min(j, self.r.size - 1)]
                if hi > lo:
                    out[i] = brentq(lambda s: float(self.slope(s)) - ti, lo, hi, xtol=1e-14)
                continue
            hi = self.r_end * 2
            while float(self.slope(hi)) < ti:
                hi *= 2
                if hi > 1e15:
                    raise ProfileRangeError(f"slope {ti} not reached by the tail")
            out[i] = brentq(lambda s: float(self.slope(s)) - ti, self.r_end, hi, xtol=1e-12)
        return out.reshape(shape)

    def dual_slope(self, tau):
        """d z0*/d tau = r(tau)."""
        return self.radius_of_slope(tau)

    def shifted(self, delta: float) -> "RadialProfile":
        a_lin, a_log, a_const, a_inv, pw = self.tail
        return RadialProfile(self.r, self.y, self.z0 + delta, self.dy, self.params,
                             (a_lin, a_log, a_const + delta, a_inv, pw), self.c0_raw,
                             self.status, dict(self.meta))

    def to_csv(self, path):
        cols = np.column_stack([self.r, self.y, self.z0, self.z, self.kappa_max])
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("r,y,z0,z,kappa_max\n")
            for row in cols:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


# ---------------------------------------------------------------------------
# pointwise operations
# ---------------------------------------------------------------------------

def radial_curvature(r: float, y: float, yprime: float, n: int) -> SpectralPoint:
    if r <= 0:
        raise ValueError("radius must be positive")
    if abs(y) >= 1:
        raise SpacelikeError(f"|y|={abs(y)} >= 1: graph is not spacelike")
    w = math.sqrt(1.0 - y * y)
    lam = np.full(n, y / r / w)
    lam[0] = yprime / (1.0 - y * y) / w
    return SpectralPoint(lam)


def ode_rhs(r: float, y: float, p: RadialParams) -> float:
    """Solve the radial equation algebraically for y'."""
    if r <= 0:
        raise ValueError("radius must be positive")
    if y >= p.slope_bound or y <= -p.slope_bound:
        raise SpacelikeError(f"slope {y} outside the admissible range (bound {p.slope_bound})")
    if y == 0.0:
        if r > R_START:
            raise ValueError("y = 0 away from the origin: series start violated")
        return p.slope0
    val = _kernels.radial_slope_rate(r, y, p.n, p.k, p.C, p._target_const, p._mode)
    if not math.isfinite(val):
        raise SpacelikeError(f"slope {y} outside the admissible range")
    return val


def ode_sides(r, y, yprime, p: RadialParams):
    """Left and right hand sides of the radial equation (vectorised)."""
    r = np.asarray(r, dtype=float)
    y = np.asarray(y, dtype=float)
    yp = np.asarray(yprime, dtype=float)
    n, k = p.n, p.k
    one_m = 1.0 - y ** 2
    lhs = one_m ** (-k / 2) * (y / r) ** (k - 1) * ((k / n) * yp / one_m + ((n - k) / n) * y / r)
    if p.soliton:
        rhs = (p.C - 1.0 / np.sqrt(one_m)) ** k
    else:
        rhs = np.full_like(lhs, p._target_const)
    return lhs, rhs


# ---------------------------------------------------------------------------
# integration and asymptotics
# ---------------------------------------------------------------------------

def _fit_tail(r, resid, p: RadialParams):
    """Least squares of resid(r) against (-log r, 1, r^-q) (soliton) or (1, r^-q)."""
    q = p.tail_power
    if p.soliton:
        A = np.column_stack([-np.log(r), np.ones_like(r), r ** (-q)])
    else:
        A = np.column_stack([np.ones_like(r), r ** (-q)])
    coef, *_ = np.linalg.lstsq(A, resid, rcond=None)
    misfit = float(np.max(np.abs(A @ coef - resid)))
    if p.soliton:
        return float(coef[0]), float(coef[1]), float(coef[2]), misfit
    return 0.0, float(coef[0]), float(coef[1]), misfit


def integrate_profile(p: RadialParams, r_max: float = 1e3, tol: float = 1e-10,
                      stop_gap: float = 1e-8) -> RadialProfile:
    if not r_max > 1:
        raise ValueError("r_max must exceed 1")
    if not tol > 0:
        raise ValueError("tol must be positive")
    s0 = p.slope0
    r0 = R_START
    rs, ys, us, dys, status = _kernels.integrate_radial(
        r0, s0 * r0, 0.5 * s0 * r0 ** 2, r_max, p.n, p.k, p.C, p._target_const, p._mode,
        tol, tol, stop_gap)
    rs, ys, us, dys = (np.array(a, dtype=float) for a in (rs, ys, us, dys))
    if status == 3:
        raise ConvergenceError(f"step size underflow at r={rs[-1]:.6g}")
    if status == 2:
        raise ConvergenceError(f"step budget exhausted at r={rs[-1]:.6g}")
    if p.soliton and rs[-1] < r_max * (1 - 1e-12):
        raise SpacelikeError(f"slope bound reached before r_max at r={rs[-1]:.6g}")
    # drop repeated abscissae (zero-length terminal steps)
    keep = np.concatenate([[True], np.diff(rs) > 0])
    rs, ys, us, dys = rs[keep], ys[keep], us[keep], dys[keep]
    stop = "r_max" if status == 0 else "light_cone"
    meta = {"stop": stop, "tol": tol}
    prof = RadialProfile(rs, ys, us, dys, p, tail=(p.C_tilde, 0.0, 0.0, 0.0, p.tail_power),
                         meta=meta)
    rep = asymptote_extract(prof, require_rmax=False)
    return RadialProfile(rs, ys, us - rep.c0, dys, p,
                         tail=(p.C_tilde, rep.log_coeff, 0.0, rep.inv_coeff, p.tail_power),
                         c0_raw=rep.c0, status="ok", meta=meta)


def _z_at(prof: RadialProfile, s: float) -> float:
    return s * (prof.params.C_tilde - float(prof.slope(s)))


def asymptote_extract(prof: RadialProfile, require_rmax: bool = True,
                      residual_threshold: float = 1e-5) -> AsymptoteReport:
    """Limit of z = r (C~ - y) and the constants of the height expansion.

    z is sampled at r_end, r_end/2, r_end/4.  The halving ratio q of successive
    differences gives the algebraic rate of approach; the limit is extrapolated
    as z_end - d1 q / (1 - q), which reduces to the Richardson value
    2 z(r_end) - z(r_end/2) when the rate is 1/r.
    """
    p = prof.params
    r_end = prof.r_end
    if require_rmax and p.soliton and r_end < 1e3 * (1 - 1e-12):
        raise ProfileRangeError("asymptote extraction needs a profile reaching r >= 1e3")
    z_end = _z_at(prof, r_end)
    z_half = _z_at(prof, 0.5 * r_end)
    z_quarter = _z_at(prof, 0.25 * r_end)
    richardson = 2.0 * z_end - z_half
    d1, d2 = z_half - z_end, z_quarter - z_half
    rate = float("nan")
    z_inf = z_end
    if d1 != 0 and d2 != 0 and d1 * d2 > 0 and abs(d1) < abs(d2):
        q = d1 / d2
        rate = -math.log2(q)
        z_inf = z_end - d1 * q / (1.0 - q)
    lo = r_end / 10.0
    rr = np.geomspace(lo, r_end, 200)
    resid = prof.height(rr) - p.C_tilde * rr
    log_coeff, c0, inv, misfit = _fit_tail(rr, resid, p)
    soliton = p.soliton
    return AsymptoteReport(
        z_inf=max(z_inf, 0.0) if soliton else 0.0,
        z_inf_richardson=richardson if soliton else 0.0,
        log_coeff=log_coeff,
        c0=c0,
        inv_coeff=inv,
        fit_window=(float(lo), float(r_end)),
        fit_residual=misfit,
        converged=bool(misfit <= residual_threshold),
        z_rate=rate,
        z_end=z_end if soliton else 0.0,
    )


def substitution_diagnostics(prof: RadialProfile) -> dict:
    """z, A(r), B(r), C(r) of the z-substitution z' = -B z^k + C, with their limits."""
    p = prof.params
    if not p.soliton:
        raise ValueError("substitution diagnostics are defined for soliton profiles only")
    n, k, C, Ct = p.n, p.k, p.C, p.C_tilde
    r, y = prof.r, prof.y
    z = prof.z
    A = (Ct + y) / (np.sqrt(1.0 - y ** 2) + 1.0 / C)
    B = C ** k * (n / k) * (1.0 - y ** 2) / y ** (k - 1) * A ** k
    Cr = z / r + ((n - k) / k) * y * (1.0 - y ** 2)
    B_inf = (n / k) * C ** (2 * k - 2) * Ct
    C_inf = ((n - k) / k) * (1.0 / C ** 2) * Ct
    return {
        "r": r,
        "z": z,
        "A": A,
        "B": B,
        "C": Cr,
        "B_inf": B_inf,
        "C_inf": C_inf,
        "z_limit": (C_inf / B_inf) ** (1.0 / k),
    }


def profile_residual(prof: RadialProfile) -> np.ndarray:
    """Residual of the radial equation at every accepted sample (skipping r0)."""
    lhs, rhs = ode_sides(prof.r[1:], prof.y[1:], prof.dy[1:], prof.params)
    return lhs - rhs
