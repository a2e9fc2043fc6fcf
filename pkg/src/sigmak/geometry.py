"""Spacelike graphs in Minkowski space: curvature, support function, Legendre duality."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import LinearNDInterpolator

from . import _kernels
from .errors import ConvexityError, SpacelikeError
from .fields import DualField, GraphField, Grid, masks_from_inside
from .symfun import SpectralPoint, sym_eig

SPACELIKE_MARGIN = 1e-12
SOLITON_MARGIN = 1e-10


@dataclass(frozen=True)
class JetPoint:
    x: np.ndarray
    u: float
    du: np.ndarray
    d2u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float).ravel())
        object.__setattr__(self, "du", np.asarray(self.du, dtype=float).ravel())
        d2 = np.asarray(self.d2u, dtype=float)
        object.__setattr__(self, "d2u", 0.5 * (d2 + d2.T))


@dataclass(frozen=True)
class GraphGeometry:
    w: float
    nu: np.ndarray
    gamma: np.ndarray
    curvature_matrix: np.ndarray
    kappa: SpectralPoint


@dataclass(frozen=True)
class DualJetPoint:
    xi: np.ndarray
    ustar: float
    dustar: np.ndarray
    d2ustar: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "xi", np.asarray(self.xi, dtype=float).ravel())
        object.__setattr__(self, "dustar", np.asarray(self.dustar, dtype=float).ravel())
        d2 = np.asarray(self.d2ustar, dtype=float)
        object.__setattr__(self, "d2ustar", 0.5 * (d2 + d2.T))


def minkowski_dot(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.sum(a[..., :-1] * b[..., :-1], axis=-1) - a[..., -1] * b[..., -1]


# ---------------------------------------------------------------------------
# batched kernels shared with the solver
# ---------------------------------------------------------------------------

def spacelike_w(du, bound=1.0, margin=SPACELIKE_MARGIN):
    du = np.asarray(du, dtype=float)
    q = np.sum(du * du, axis=-1)
    bad = q >= (bound * (1 - margin)) ** 2
    if np.any(bad):
        raise SpacelikeError(f"|Du| >= {bound:g} at {int(bad.sum())} node(s)",
                             nodes=np.flatnonzero(np.atleast_1d(bad))[:20])
    return np.sqrt(1.0 - q)


def gamma_matrix(du, w=None):
    """gamma^{ik} = delta + u_i u_k / (w (1 + w)), the square root of g^{ij}."""
    du = np.asarray(du, dtype=float)
    w = spacelike_w(du) if w is None else w
    n = du.shape[-1]
    return np.eye(n) + du[..., :, None] * du[..., None, :] / (w * (1 + w))[..., None, None]


def curvature_matrix_batch(du, d2u, w=None):
    """a_ij = gamma^{ik} u_kl gamma^{lj} / w; returns (a, gamma, w)."""
    w = spacelike_w(du) if w is None else w
    g = gamma_matrix(du, w)
    a = g @ d2u @ g / w[..., None, None]
    return 0.5 * (a + np.swapaxes(a, -1, -2)), g, w


def dual_gamma_matrix(xi, ws):
    n = xi.shape[-1]
    return np.eye(n) - xi[..., :, None] * xi[..., None, :] / (1 + ws)[..., None, None]


def dual_matrix_batch(xi, d2, bound=1.0):
    """w* gamma* D2u* gamma*; returns (a*, gamma*, w*)."""
    xi = np.asarray(xi, dtype=float)
    q = np.sum(xi * xi, axis=-1)
    if np.any(q >= bound ** 2):
        raise SpacelikeError("|xi| outside the admissible ball",
                             nodes=np.flatnonzero(np.atleast_1d(q >= bound ** 2))[:20])
    ws = np.sqrt(1.0 - q)
    g = dual_gamma_matrix(xi, ws)
    a = ws[..., None, None] * (g @ d2 @ g)
    return 0.5 * (a + np.swapaxes(a, -1, -2)), g, ws


# ---------------------------------------------------------------------------
# pointwise operations
# ---------------------------------------------------------------------------

def graph_geometry(j: JetPoint, bound: float = 1.0) -> GraphGeometry:
    w = float(spacelike_w(j.du[None, :], bound)[0])
    a, g, _ = curvature_matrix_batch(j.du[None, :], j.d2u[None, :, :], np.array([w]))
    lam, _ = sym_eig(a[0])
    nu = np.append(j.du, 1.0) / w
    return GraphGeometry(w=w, nu=nu, gamma=g[0], curvature_matrix=a[0], kappa=SpectralPoint(lam))


def support_function(j: JetPoint) -> float:
    """v = <X, nu> = (x . Du - u) / w."""
    w = float(spacelike_w(j.du[None, :])[0])
    return float((j.x @ j.du - j.u) / w)


def dual_curvature_radii(d: DualJetPoint, bound: float = 1.0) -> SpectralPoint:
    a, _, _ = dual_matrix_batch(d.xi[None, :], d.d2ustar[None, :, :], bound)
    lam, _ = sym_eig(a[0])
    if lam[0] <= 0:
        raise ConvexityError("dual Hessian is not positive definite")
    return SpectralPoint(lam)


def graph_kappa_batch(du, d2u, bound=1.0):
    w = spacelike_w(du, bound)
    a, _, _ = curvature_matrix_batch(du, d2u, w)
    return sym_eig(a)[0]


def dual_kappa_batch(xi, d2):
    a, _, _ = dual_matrix_batch(xi, d2)
    return sym_eig(a)[0]


# ---------------------------------------------------------------------------
# Legendre transform of grid fields
# ---------------------------------------------------------------------------

def _check_convex(d2, where):
    lam = np.linalg.eigvalsh(d2)
    bad = lam[:, 0] <= 0
    if np.any(bad):
        raise ConvexityError(f"discrete Hessian not positive definite at {int(bad.sum())} "
                             f"{where} node(s)", nodes=np.flatnonzero(bad)[:20])


def _resample(src_pts, src_vals, grid: Grid, keep=None, cls=GraphField, meta=None, erode=2):
    """Linear interpolation of scattered samples onto a grid (Delaunay in any n).

    Nodes within ``erode`` layers of the hull are dropped: sliver triangles along
    the hull spoil the discrete convexity of the interpolant there.
    """
    interp = LinearNDInterpolator(src_pts, src_vals)
    xs = grid.coords()
    vals = interp(xs)
    inside = np.isfinite(vals)
    hull = inside.reshape(grid.shape)
    for _ in range(erode):
        hull = hull & ~_dilate(~hull, grid.n)
    inside = hull.ravel()
    if keep is not None:
        inside &= np.asarray(keep).ravel()
    interior, boundary = masks_from_inside(grid, inside.reshape(grid.shape))
    # boundary halo nodes must carry finite values
    ok = np.isfinite(vals) & (interior | boundary).ravel()
    interior &= ok.reshape(grid.shape)
    interior, boundary = masks_from_inside(grid, interior)
    active = (interior | boundary).ravel()
    missing = active & ~np.isfinite(vals)
    if np.any(missing):
        # shrink once more so every active node is covered by the hull
        interior = interior & ~_dilate(missing.reshape(grid.shape), grid.n)
        interior, boundary = masks_from_inside(grid, interior)
        active = (interior | boundary).ravel()
    out = np.where(active, vals, np.nan)
    return cls(grid, out, interior, boundary, dict(meta or {}))


def _dilate(mask, n):
    out = mask.copy()
    for ax in range(n):
        out |= np.roll(mask, 1, axis=ax) | np.roll(mask, -1, axis=ax)
    return out


def legendre_forward(f: GraphField, m: int | None = None, radius: float | None = None) -> DualField:
    """Sample (Du, x.Du - u) at interior nodes and resample onto a xi-grid.

    The xi-grid spans the bounding box of the gradient image with ``m`` nodes per
    axis (default: the source resolution); ``radius`` optionally restricts the
    dual domain to a ball.  The source grid is recorded for the inverse.
    """
    x, u, du, d2 = f.interior_jets()
    _check_convex(d2, "primal")
    spacelike_w(du)
    ustar = np.einsum("ij,ij->i", x, du) - u
    m = m or max(f.grid.shape)
    lo = du.min(axis=0)
    hi = du.max(axis=0)
    span = float(np.max(hi - lo))
    h = span / (m - 1)
    shape = tuple(int(np.floor((hi[a] - lo[a]) / h + 1e-9)) + 1 for a in range(f.n))
    grid = Grid(tuple(float(v) for v in lo), h, shape)
    keep = None
    if radius is not None:
        keep = np.linalg.norm(grid.coords(), axis=1) < radius
    meta = {"source_grid": {"lo": list(f.grid.lo), "h": f.grid.h, "shape": list(f.grid.shape)},
            "source_kind": "graph"}
    return _resample(du, ustar, grid, keep, DualField, meta)


def legendre_inverse(g: DualField, grid: Grid | None = None) -> GraphField:
    """x = Du*(xi), u = xi . Du* - u*, resampled onto ``grid`` (default: the recorded source)."""
    xi, us, dus, d2 = g.interior_jets()
    _check_convex(d2, "dual")
    u = np.einsum("ij,ij->i", xi, dus) - us
    if grid is None:
        src = g.meta.get("source_grid")
        if src is None:
            lo = dus.min(axis=0)
            hi = dus.max(axis=0)
            m = max(g.grid.shape)
            h = float(np.max(hi - lo)) / (m - 1)
            grid = Grid(tuple(float(v) for v in lo), h,
                        tuple(int(np.floor((hi[a] - lo[a]) / h + 1e-9)) + 1 for a in range(g.n)))
        else:
            grid = Grid(tuple(src["lo"]), float(src["h"]), tuple(src["shape"]))
    return _resample(dus, u, grid, None, GraphField, {"source_kind": "dual"})


def dual_from_function(grid: Grid, inside, ustar_fn, meta=None) -> DualField:
    interior, boundary = masks_from_inside(grid, inside)
    active = (interior | boundary).ravel()
    vals = np.full(grid.size, np.nan)
    vals[active] = ustar_fn(grid.coords()[active])
    return DualField(grid, vals, interior, boundary, dict(meta or {}))


def discrete_conjugate(x, u, xi, refine=True):
    """max_j (x_j . xi - u_j) over scattered primal samples, with a local quadratic refinement.

    The refinement replaces the maximising sample by the stationary point of the
    local quadratic model u(x) ~ u_j + Du_j.(x - x_j) + (x - x_j).H_j.(x - x_j)/2
    when derivative information is supplied as ``u = (values, Du, D2u)``.
    """
    if isinstance(u, tuple):
        vals, du, d2 = u
    else:
        vals, du, d2 = u, None, None
    best, arg = _kernels.conjugate(np.asarray(x, float), np.asarray(vals, float), np.asarray(xi, float))
    if refine and du is not None:
        dxi = xi - du[arg]
        step = np.linalg.solve(d2[arg], dxi[..., None])[..., 0]
        best = best + 0.5 * np.einsum("ij,ij->i", dxi, step)
    return best, arg


# ---------------------------------------------------------------------------
# asymptotic defect
# ---------------------------------------------------------------------------

def sphere_directions(n: int, count: int) -> np.ndarray:
    """Uniform angles on S^1 or a Fibonacci lattice on S^2."""
    if n == 2:
        t = 2 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(t), np.sin(t)])
    if n == 3:
        i = np.arange(count) + 0.5
        z = 1 - 2 * i / count
        rho = np.sqrt(1 - z * z)
        phi = np.pi * (1 + 5 ** 0.5) * i
        return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
    raise ValueError("sphere meshes are provided for n = 2, 3")


def asymptotic_defect(f, phi, mode: str, params=None, radii=(10.0,), directions=None,
                      n: int | None = None) -> np.ndarray:
    """u(R w) minus the leading asymptotic expansion, shape (len(radii), len(directions)).

    ``f`` is a GraphField or a callable on points (N, n).  ``phi`` is a callable
    on unit directions; in soliton mode it is read as phi(C~ w).
    """
    if mode not in ("prescribed", "soliton"):
        raise ValueError(f"unknown mode {mode!r}")
    if isinstance(f, GraphField):
        n = f.n
        evalf = f.interpolate
    else:
        if n is None:
            raise ValueError("n is required for callable fields")
        evalf = f
    if directions is None:
        directions = sphere_directions(n, 64 if n == 2 else 256)
    directions = np.asarray(directions, dtype=float)
    radii = np.asarray(radii, dtype=float)
    ph = np.zeros(len(directions)) if phi is None else np.asarray(phi(directions), dtype=float)
    out = np.empty((radii.size, len(directions)))
    for i, R in enumerate(radii):
        vals = np.asarray(evalf(R * directions), dtype=float)
        if np.any(~np.isfinite(vals)):
            raise ValueError(f"radius {R} leaves the field's domain")
        if mode == "prescribed":
            out[i] = vals - (R + ph)
        else:
            Ct = math.sqrt(1 - 1 / params.C ** 2)
            L = (1 / params.C ** 2) * ((params.n - params.k) / params.n) ** (1 / params.k)
            out[i] = vals - (Ct * R - L * math.log(R) + ph)
    return out
