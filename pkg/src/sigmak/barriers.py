"""Sub- and supersolution envelopes built from tilted, recentred radial profiles.

For a direction y on the sphere and a radial profile z0,

    z_i(x, y) = phi(s y) - p_i . s y + z0(|x + p_i|),   p_i = Dphi(s y) +/- 2 M s y,

with s = C~ for solitons and s = 1 for prescribed curvature.  q1 = sup_y z_1 and
q2 = inf_y z_2 over a finite sphere mesh.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels
from .errors import CalibrationError, ProfileRangeError
from .geometry import graph_kappa_batch, sphere_directions
from .radial import RadialParams, RadialProfile, integrate_profile
from .symfun import binom

MESH_SIZE = {2: 256, 3: 1024}


# ---------------------------------------------------------------------------
# boundary data on the sphere
# ---------------------------------------------------------------------------

class SphereData:
    """A function Phi on the unit sphere with its tangential gradient.

    ``fn`` receives unit vectors (N, n).  Without an explicit ``grad`` the
    tangential gradient is taken by central differences of the 0-homogeneous
    extension Phi(y / |y|), whose ambient gradient on the sphere is tangential.
    """

    def __init__(self, fn: Callable, grad: Callable | None = None, n: int = 2, label: str = "callable",
                 table=None):
        self.fn = fn
        self._grad = grad
        self.n = n
        self.label = label
        self.table = table

    def __call__(self, dirs):
        return np.asarray(self.fn(np.atleast_2d(dirs)), dtype=float)

    def grad(self, dirs):
        dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
        if self._grad is not None:
            g = np.asarray(self._grad(dirs), dtype=float)
            return g - np.sum(g * dirs, axis=1)[:, None] * dirs
        eps = 1e-6
        out = np.empty_like(dirs)
        for a in range(dirs.shape[1]):
            e = np.zeros(dirs.shape[1])
            e[a] = eps
            yp = dirs + e
            ym = dirs - e
            yp /= np.linalg.norm(yp, axis=1)[:, None]
            ym /= np.linalg.norm(ym, axis=1)[:, None]
            out[:, a] = (self.fn(yp) - self.fn(ym)) / (2 * eps)
        return out - np.sum(out * dirs, axis=1)[:, None] * dirs

    @property
    def is_zero(self) -> bool:
        return self.label == "zero"

    @classmethod
    def zero(cls, n: int) -> "SphereData":
        return cls(lambda d: np.zeros(len(d)), lambda d: np.zeros_like(d), n, "zero", [])

    @classmethod
    def linear(cls, a) -> "SphereData":
        a = np.asarray(a, dtype=float)
        return cls(lambda d: d @ a, lambda d: np.broadcast_to(a, d.shape).copy(), a.size, "linear",
                   a.tolist())

    @classmethod
    def harmonics(cls, n: int, coeffs) -> "SphereData":
        """Truncated harmonic expansion.

        n = 2: coeffs = [a0, a1, b1, a2, b2, ...] for a0 + sum a_m cos(m t) + b_m sin(m t).
        n = 3: up to nine real harmonics of degree <= 2 in the order
               1, x, y, z, xy, yz, xz, x^2 - y^2, 3 z^2 - 1.
        Values and gradients are exact (polynomials in the direction).
        """
        c = np.asarray(coeffs, dtype=float)
        if n == 2:
            def fn(d):
                zc = d[:, 0] + 1j * d[:, 1]
                out = np.full(len(d), c[0] if c.size else 0.0)
                for m in range(1, (c.size - 1) // 2 + 1):
                    zm = zc ** m
                    out += c[2 * m - 1] * zm.real + c[2 * m] * zm.imag
                return out

            def grad(d):
                zc = d[:, 0] + 1j * d[:, 1]
                g = np.zeros_like(d)
                for m in range(1, (c.size - 1) // 2 + 1):
                    dz = m * zc ** (m - 1)
                    # d/dx1 z^m = m z^{m-1}, d/dx2 z^m = i m z^{m-1}
                    g[:, 0] += c[2 * m - 1] * dz.real + c[2 * m] * dz.imag
                    g[:, 1] += c[2 * m - 1] * (1j * dz).real + c[2 * m] * (1j * dz).imag
                return g

            return cls(fn, grad, 2, "harmonics", c.tolist())
        if n == 3:
            if c.size > 9:
                raise ValueError("at most nine harmonic coefficients (degree <= 2) for n = 3")
            cc = np.zeros(9)
            cc[: c.size] = c

            def fn(d):
                x, y, z = d[:, 0], d[:, 1], d[:, 2]
                basis = [np.ones_like(x), x, y, z, x * y, y * z, x * z, x * x - y * y, 3 * z * z - 1]
                return sum(cc[i] * basis[i] for i in range(9))

            def grad(d):
                x, y, z = d[:, 0], d[:, 1], d[:, 2]
                o = np.zeros_like(x)
                one = np.ones_like(x)
                gb = [(o, o, o), (one, o, o), (o, one, o), (o, o, one), (y, x, o), (o, z, y),
                      (z, o, x), (2 * x, -2 * y, o), (o, o, 6 * z)]
                return np.stack([sum(cc[i] * gb[i][a] for i in range(9)) for a in range(3)], axis=1)

            return cls(fn, grad, 3, "harmonics", cc.tolist())
        raise ValueError("harmonic tables are provided for n = 2, 3")

    def c2_norm(self, dirs=None) -> float:
        """Rough max |Phi| + |D Phi| + |D^2 Phi| over a mesh (second differences)."""
        dirs = sphere_directions(self.n, MESH_SIZE[self.n]) if dirs is None else dirs
        d2 = _second_differences(self, dirs, 0.02)
        return float(np.max(np.abs(self(dirs))) + np.max(np.linalg.norm(self.grad(dirs), axis=1))
                     + np.max(np.abs(d2)))


def _great_circle_points(dirs, h):
    """For each direction, points at angles +-h along tangent directions."""
    n = dirs.shape[1]
    tangents = []
    for d in dirs:
        # orthonormal basis of the tangent space
        q, _ = np.linalg.qr(np.column_stack([d, np.eye(n)]))
        tangents.append(q[:, 1:n].T)
    tangents = np.asarray(tangents)  # (N, n-1, n)
    plus = np.cos(h) * dirs[:, None, :] + np.sin(h) * tangents
    minus = np.cos(h) * dirs[:, None, :] - np.sin(h) * tangents
    return plus, minus


def _second_differences(phi: SphereData, dirs, h):
    plus, minus = _great_circle_points(dirs, h)
    N, T, n = plus.shape
    f0 = phi(dirs)
    fp = phi(plus.reshape(-1, n)).reshape(N, T)
    fm = phi(minus.reshape(-1, n)).reshape(N, T)
    return (fp - 2 * f0[:, None] + fm) / h ** 2


def check_c2(phi: SphereData, dirs, h=None):
    """Second differences at spacing h and h/2 must agree; a jump scales them by 4, a kink by 2."""
    if h is None:
        h = 2 * np.pi / len(dirs) if phi.n == 2 else 0.05
    a = np.max(np.abs(_second_differences(phi, dirs, h)))
    b = np.max(np.abs(_second_differences(phi, dirs, h / 2)))
    if not np.isfinite(a) or not np.isfinite(b) or b > 1.5 * a + 1e-6:
        raise CalibrationError(f"boundary data is not C^2 on the sphere mesh "
                               f"(second differences {a:.3g} -> {b:.3g} on halving)")
    return a, b


# ---------------------------------------------------------------------------
# barrier set
# ---------------------------------------------------------------------------

@dataclass
class BarrierSet:
    phi: SphereData
    M: float
    sphere_mesh: np.ndarray
    mode: str
    profile: RadialProfile
    profile_super: RadialProfile | None = None
    extrapolate: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError("tilt magnitude M must be positive")
        if self.mode not in ("prescribed", "soliton"):
            raise ValueError(f"unknown mode {self.mode!r}")
        self.sphere_mesh = np.asarray(self.sphere_mesh, dtype=float)

    @property
    def n(self) -> int:
        return self.sphere_mesh.shape[1]

    @property
    def scale(self) -> float:
        return self.profile.params.C_tilde if self.mode == "soliton" else 1.0

    def _profile(self, which):
        if which == 2 and self.profile_super is not None:
            return self.profile_super
        return self.profile

    def family(self, which):
        """(shifts p_i, constants phi - p_i . s y) over the mesh."""
        p1, p2 = tilt_vectors(self.phi, self.M, self.sphere_mesh, self.scale)
        p = p1 if which == 1 else p2
        s = self.scale
        consts = self.phi(self.sphere_mesh) - s * np.sum(p * self.sphere_mesh, axis=1)
        return p, consts

    def evaluate(self, pts, which):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        p, consts = self.family(which)
        prof = self._profile(which)
        if not self.extrapolate:
            reach = np.max(np.linalg.norm(pts, axis=1)) + np.max(np.linalg.norm(p, axis=1))
            if reach > prof.r_end:
                raise ProfileRangeError(f"barrier needs the profile up to r={reach:.4g} "
                                        f"but it ends at {prof.r_end:.4g}")
        tail = np.asarray(prof.tail, dtype=float)
        return _kernels.envelope(pts, p, consts, prof.r, prof.z0, prof.y, tail,
                                 1.0 if which == 1 else -1.0)


def tilt_vectors(phi: SphereData, M: float, y, scale: float = 1.0):
    """p_1, p_2 = Dphi(s y) +/- 2 M s y with Dphi the tangential gradient on the radius-s sphere."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    dphi = phi.grad(y) / scale
    return dphi + 2 * M * scale * y, dphi - 2 * M * scale * y


def barrier_value(x, which: int, b: BarrierSet):
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    vals, _ = b.evaluate(np.atleast_2d(x), which)
    return float(vals[0]) if single else vals


def make_barriers(phi: SphereData, mode: str, n: int, k: int, M: float = 1.0, C: float = 2.0,
                  c1: float | None = None, c2: float | None = None, mesh_size: int | None = None,
                  profiles=None) -> BarrierSet:
    mesh = sphere_directions(n, mesh_size or MESH_SIZE[n])
    if profiles is None:
        if mode == "soliton":
            profiles = (integrate_profile(RadialParams(n, k, "soliton", C=C)), None)
        else:
            c1 = binom(n, k) if c1 is None else c1
            c2 = c1 if c2 is None else c2
            if not c1 >= c2 > 0:
                raise ValueError("barrier levels need c1 >= c2 > 0")
            profiles = (_constant_profile(n, k, c1), _constant_profile(n, k, c2))
    return BarrierSet(phi, M, mesh, mode, profiles[0], profiles[1],
                      meta={"C": C, "c1": c1, "c2": c2, "k": k})


def _constant_profile(n, k, c):
    """Constant-curvature radial profile normalised so that u - r -> 0."""
    return integrate_profile(RadialParams(n, k, "constant", c=c), r_max=1e3)


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------

def _validation_points(n, radius, count):
    g = np.linspace(-radius, radius, count)
    mesh = np.meshgrid(*([g] * n), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _paraboloid_gap(phi: SphereData, mesh, M, s):
    """min over mesh pairs of phi(w) - [phi(y) + Dphi.(s w - s y)] + M s^2 |w - y|^2 (>= 0 required)."""
    f = phi(mesh)
    g = phi.grad(mesh)  # tangential gradient of Phi; Dphi(s y).(s w - s y) = g.(w - y)
    diff = mesh[None, :, :] - mesh[:, None, :]
    lin = f[:, None] + np.einsum("ik,ijk->ij", g, diff)
    quad = M * s ** 2 * np.sum(diff * diff, axis=2)
    lower = f[None, :] - lin + quad
    upper = lin + quad - f[None, :]
    return float(min(lower.min(), upper.min()))


def _smooth_residual(b: BarrierSet, which, pts, h, k, C):
    """Curvature residual of q_which at points where the active direction is locally constant."""
    n = b.n
    offs = [np.zeros(n)]
    for a in range(n):
        e = np.zeros(n)
        e[a] = h
        offs += [e, -e]
    for a in range(n):
        for c in range(a + 1, n):
            for sa in (1, -1):
                for sc in (1, -1):
                    e = np.zeros(n)
                    e[a] = sa * h
                    e[c] = sc * h
                    offs.append(e)
    offs = np.asarray(offs)
    allp = (pts[:, None, :] + offs[None, :, :]).reshape(-1, n)
    vals, arg = b.evaluate(allp, which)
    vals = vals.reshape(len(pts), len(offs))
    arg = arg.reshape(len(pts), len(offs))
    smooth = np.all(arg == arg[:, :1], axis=1)
    if not np.any(smooth):
        return np.zeros(0)
    v = vals[smooth]
    du = np.empty((v.shape[0], n))
    d2 = np.empty((v.shape[0], n, n))
    idx = 1
    for a in range(n):
        du[:, a] = (v[:, idx] - v[:, idx + 1]) / (2 * h)
        d2[:, a, a] = (v[:, idx] - 2 * v[:, 0] + v[:, idx + 1]) / h ** 2
        idx += 2
    for a in range(n):
        for c in range(a + 1, n):
            pp, pm, mp, mm = v[:, idx], v[:, idx + 1], v[:, idx + 2], v[:, idx + 3]
            d2[:, a, c] = d2[:, c, a] = (pp - pm - mp + mm) / (4 * h * h)
            idx += 4
    bound = b.scale if b.mode == "soliton" else 1.0
    lam = graph_kappa_batch(du, d2, bound)
    e = _kernels.esp_all(lam)
    sk = np.maximum(e[:, k], 0.0)
    if b.mode == "soliton":
        w = np.sqrt(1 - np.sum(du * du, axis=1))
        return (sk / binom(n, k)) ** (1.0 / k) - (C - 1.0 / w)
    level = b.meta["c1"] if which == 1 else b.meta["c2"]
    return sk - level


def calibrate_M(phi: SphereData, mode: str, params: dict, return_report: bool = False):
    """Smallest M = 2^j (j >= 0) passing the barrier checks on a validation grid."""
    n = int(params["n"])
    k = int(params["k"])
    C = float(params.get("C", 2.0))
    mesh = sphere_directions(n, MESH_SIZE[n])
    check_c2(phi, mesh)
    norm = phi.c2_norm(mesh)
    M_max = 1e3 * (1 + norm)
    radius = float(params.get("validation_radius", 4.0))
    count = int(params.get("validation_count", 21 if n == 2 else 9))
    pts = _validation_points(n, radius, count)
    h_fd = float(params.get("fd_step", 1e-3))
    res_tol = float(params.get("residual_tol", 1e-3))
    base = make_barriers(phi, mode, n, k, M=1.0, C=C, c1=params.get("c1"), c2=params.get("c2"))
    # the paraboloid check uses a thinned mesh to keep the pair count modest
    thin = mesh[:: max(1, len(mesh) // 256)]
    s = base.scale
    history = []
    M = 1.0
    while M <= M_max:
        b = BarrierSet(phi, M, mesh, mode, base.profile, base.profile_super, meta=dict(base.meta))
        q1, _ = b.evaluate(pts, 1)
        q2, _ = b.evaluate(pts, 2)
        order = float(np.max(q1 - q2))
        gap = _paraboloid_gap(phi, thin, M, s)
        r1 = _smooth_residual(b, 1, pts, h_fd, k, C)
        r2 = _smooth_residual(b, 2, pts, h_fd, k, C)
        sub_ok = r1.size == 0 or r1.min() >= -res_tol
        sup_ok = r2.size == 0 or r2.max() <= res_tol
        ok = order <= 0 and gap >= -1e-12 and sub_ok and sup_ok
        history.append({"M": M, "max_q1_minus_q2": order, "paraboloid_gap": gap,
                        "sub_residual_min": float(r1.min()) if r1.size else None,
                        "super_residual_max": float(r2.max()) if r2.size else None,
                        "passed": bool(ok)})
        if ok:
            return (M, history) if return_report else M
        M *= 2.0
    raise CalibrationError(f"no admissible M up to M_max={M_max:.4g}")


# ---------------------------------------------------------------------------
# sandwich
# ---------------------------------------------------------------------------

@dataclass
class SandwichReport:
    lower_violation: float
    upper_violation: float
    lower_location: np.ndarray
    upper_location: np.ndarray
    count: int

    def passed(self, slack: float) -> bool:
        return self.lower_violation <= slack and self.upper_violation <= slack

    def to_dict(self):
        return {"lower_violation": self.lower_violation, "upper_violation": self.upper_violation,
                "lower_location": self.lower_location.tolist(),
                "upper_location": self.upper_location.tolist(), "count": self.count}


def check_sandwich(f, b: BarrierSet, mask=None) -> SandwichReport:
    """Max of q1 - u and u - q2 over the active nodes (or ``mask``) of a graph field."""
    mask = f.active if mask is None else mask
    pts = f.grid.coords()[mask.ravel()]
    u = f.values.ravel()[mask.ravel()]
    q1, _ = b.evaluate(pts, 1)
    q2, _ = b.evaluate(pts, 2)
    lo = q1 - u
    hi = u - q2
    i = int(np.argmax(lo))
    j = int(np.argmax(hi))
    return SandwichReport(float(lo[i]), float(hi[j]), pts[i], pts[j], int(len(u)))
