"""Checks of a priori estimates and structural identities on computed solutions.

Every check returns a CheckResult and leaves its inputs untouched.  Boundedness
statements whose constants are only existential are tested as stabilisation
across exhaustion stages: last value <= 1.1 x the running max of the others.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .barriers import BarrierSet, check_sandwich
from .fields import DualField, GraphField, GridField, masks_from_inside
from .geometry import dual_kappa_batch, graph_kappa_batch
from .radial import RadialProfile, radial_curvature
from .symfun import binom, sigma_batch

STABILITY_FACTOR = 1.1

# estimates covered by this module (name -> check function)
COVERAGE = {
    "gradient_bound": "check_gradient_bound_cutoff",
    "gradient_bound_soliton": "check_gradient_bound_cutoff",
    "pogorelov_product": "check_pogorelov",
    "support_band": "check_support_band",
    "bounded_curvature": "check_curvature_bounded",
    "flow_residual": "check_flow_residual",
    "comparison_principle": "check_comparison",
    "barrier_sandwich": "check_sandwich_stages",
}


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: object
    bound: object
    location: object = None
    status: str = "ok"
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status == "ok":
            for v in np.atleast_1d(np.asarray(self.measured, dtype=float)).ravel():
                if not math.isfinite(v):
                    raise ValueError(f"{self.name}: non-finite measured value")

    def to_dict(self):
        return _plain({"name": self.name, "passed": bool(self.passed), "measured": self.measured,
                       "bound": self.bound, "location": self.location, "status": self.status,
                       "details": self.details})


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _stabilised(seq):
    seq = [float(v) for v in seq]
    if len(seq) < 2:
        return True, float("nan")
    prev = max(seq[:-1])
    return seq[-1] <= STABILITY_FACTOR * prev, prev


def _gradient_of(fn, pts, h=1e-5):
    g = np.empty_like(pts)
    for a in range(pts.shape[1]):
        e = np.zeros(pts.shape[1])
        e[a] = h
        g[:, a] = (fn(pts + e) - fn(pts - e)) / (2 * h)
    return g


# ---------------------------------------------------------------------------
# C1 estimate
# ---------------------------------------------------------------------------

def check_gradient_bound(u: GraphField, ubar, Psi, slope_bound: float = 1.0, Psi_grad=None,
                         rel_tol: float = 1e-2) -> CheckResult:
    """1/sqrt(b^2 - |Du|^2) <= sup_{u>Psi}[(ubar - Psi)/sqrt(b^2 - |DPsi|^2)] / (u - Psi).

    b = 1 for the prescribed problem, b = C~ for solitons.  ``ubar`` and ``Psi``
    are callables on point arrays.
    """
    x, uv, du, d2 = u.interior_jets()
    if np.any(np.linalg.eigvalsh(d2)[:, 0] <= 0):
        raise ValueError("gradient bound needs a strictly convex u")
    psi = Psi(x)
    ub = ubar(x)
    if np.any(uv >= ub):
        raise ValueError("gradient bound needs u < ubar")
    bmask = u.boundary.ravel()
    xb = u.grid.coords()[bmask]
    if not np.all(Psi(xb) > ubar(xb)):
        raise ValueError("gradient bound needs Psi > ubar near the boundary")
    sel = uv > psi
    if not sel.any():
        raise ValueError("the set {u > Psi} is empty")
    dpsi = Psi_grad(x) if Psi_grad is not None else _gradient_of(Psi, x)
    b2 = slope_bound ** 2
    sup = np.max((ub[sel] - psi[sel]) / np.sqrt(b2 - np.sum(dpsi[sel] ** 2, axis=1)))
    lhs = 1 / np.sqrt(b2 - np.sum(du[sel] ** 2, axis=1))
    rhs = sup / (uv[sel] - psi[sel])
    ratio = lhs / rhs
    i = int(np.argmax(ratio))
    return CheckResult("gradient_bound", bool(ratio[i] <= 1 + rel_tol), float(ratio[i]), 1 + rel_tol,
                       x[sel][i].tolist(), details={"slack": float(1 - ratio[i]), "nodes": int(sel.sum())})


def _disc_subfield(f: GraphField, radius: float) -> GraphField:
    inside = (np.linalg.norm(f.grid.coords(), axis=1) <= radius).reshape(f.grid.shape) & f.interior
    interior, bnd = masks_from_inside(f.grid, inside)
    keep = interior | bnd
    return GraphField(f.grid, np.where(keep, f.values, np.nan), interior, bnd, dict(f.meta))


def check_gradient_bound_cutoff(f: GraphField, ubar, slope_bound: float = 1.0, radius=None,
                                name: str = "gradient_bound") -> CheckResult:
    """Gradient bound on a disc around the origin with a narrow cone cut-off.

    Psi = c + b sqrt(eps^2 + |x - x0|^2) with x0 the discrete minimiser and
    b = slope_bound, so |DPsi| < b.  eps is the widest of a fixed ladder for which
    Psi clears ubar on the disc boundary; c sits just below min u so that
    {u > Psi} is a neighbourhood of x0.  Skipped (not failed) when no such cone exists.
    """
    if radius is None:
        R_in = float(np.min(np.linalg.norm(f.points(f.boundary), axis=1)))
        radius = min(1.5, 0.8 * R_in)
    g = _disc_subfield(f, radius)
    pts = g.points(g.interior)
    uv = g.values[g.interior]
    x0 = pts[int(np.argmin(uv))]
    xb = g.points(g.boundary)
    b = float(slope_bound)
    delta = 0.05 * b
    ub_b = ubar(xb)
    for eps in (1.0, 0.8, 0.6, 0.4, 0.2, 0.1):
        c = float(uv.min()) - b * eps - delta
        if np.all(c + b * np.sqrt(eps ** 2 + np.sum((xb - x0) ** 2, axis=1)) > ub_b):
            break

    def Psi(x):
        return c + b * np.sqrt(eps ** 2 + np.sum((x - x0) ** 2, axis=1))

    def Psi_grad(x):
        d = x - x0
        return b * d / np.sqrt(eps ** 2 + np.sum(d * d, axis=1))[:, None]

    try:
        res = check_gradient_bound(g, ubar, Psi, b, Psi_grad)
    except ValueError as exc:
        return CheckResult(name, True, float("nan"), None, status="skipped",
                           details={"reason": str(exc)})
    res.name = name
    res.details.update({"eps": eps, "radius": radius})
    return res


# ---------------------------------------------------------------------------
# C2 quantities
# ---------------------------------------------------------------------------

def _kappa_max(f: GraphField, bound=1.0):
    x, uv, du, d2 = f.interior_jets()
    lam = graph_kappa_batch(du, d2, bound)
    return x, uv, lam[:, -1]


def pogorelov_products(stages, s: float):
    out = []
    for f in stages:
        x, uv, kmax = _kappa_max(f)
        sel = uv < s
        if not sel.any():
            out.append((float("nan"), None))
            continue
        prod = (s - uv[sel]) * kmax[sel]
        i = int(np.argmax(prod))
        out.append((float(prod[i]), x[sel][i].tolist()))
    return out


def check_pogorelov(stages, s: float) -> CheckResult:
    """max over {u < s} of (s - u) kappa_max per stage; bounded if the last does not outgrow the rest."""
    stages = list(stages)
    if all(float(np.nanmin(f.values[f.interior])) >= s for f in stages):
        raise ValueError(f"s = {s} lies below every stage minimum")
    vals = pogorelov_products(stages, s)
    seq = [v for v, _ in vals if math.isfinite(v)]
    ok, prev = _stabilised(seq)
    return CheckResult("pogorelov_product", ok, seq, STABILITY_FACTOR * prev if seq[:-1] else None,
                       vals[-1][1], details={"s": s})


def check_curvature_bounded(stages) -> CheckResult:
    if isinstance(stages, (GridField, RadialProfile)):
        stages = [stages]
    seq = []
    loc = None
    for f in stages:
        if isinstance(f, RadialProfile):
            km = f.kappa_max
            i = int(np.argmax(km))
            seq.append(float(km[i]))
            loc = [float(f.r[i])]
        else:
            x, _, kmax = _kappa_max(f)
            i = int(np.argmax(kmax))
            seq.append(float(kmax[i]))
            loc = x[i].tolist()
    ok, prev = _stabilised(seq)
    return CheckResult("bounded_curvature", ok, seq, STABILITY_FACTOR * prev if len(seq) > 1 else None, loc)


# ---------------------------------------------------------------------------
# soliton identities
# ---------------------------------------------------------------------------

def flow_residual(obj, C: float, n: int, k: int):
    """sigma_k^{1/k}/binom^{1/k} - C + 1/sqrt(1 - |Du|^2), i.e. the forced flow with u_t = -1.

    Returns (points, residual).  Dual fields use sigma_k(1/kappa*) = sigma_{n-k}/sigma_n (kappa*).
    """
    bk = binom(n, k)
    if isinstance(obj, RadialProfile):
        dy = obj.dy
        sk = np.array([sigma_batch(k, np.asarray(radial_curvature(r, y, yp, n).lam)[None, :])[0]
                       for r, y, yp in zip(obj.r, obj.y, dy)])
        w = np.sqrt(1 - obj.y ** 2)
        return obj.r[:, None], np.maximum(sk, 0) ** (1 / k) / bk ** (1 / k) - C + 1 / w
    if isinstance(obj, DualField):
        xi, _, _, d2 = obj.interior_jets()
        ks = dual_kappa_batch(xi, d2)
        sk = sigma_batch(n - k, ks) / sigma_batch(n, ks)
        w = np.sqrt(1 - np.sum(xi ** 2, axis=1))
        return xi, np.maximum(sk, 0) ** (1 / k) / bk ** (1 / k) - C + 1 / w
    x, _, du, d2 = obj.interior_jets()
    lam = graph_kappa_batch(du, d2)
    sk = sigma_batch(k, lam)
    w = np.sqrt(1 - np.sum(du ** 2, axis=1))
    return x, np.maximum(sk, 0) ** (1 / k) / bk ** (1 / k) - C + 1 / w


def check_flow_residual(obj, C: float, n: int, k: int, tol: float | None = None) -> CheckResult:
    """Bound 10 tol (solver tolerance) or, without one, 10 h^2 for sampled fields."""
    pts, res = flow_residual(obj, C, n, k)
    if tol is None:
        tol = obj.h ** 2 if isinstance(obj, GridField) else 1e-10
    bound = 10 * tol
    i = int(np.argmax(np.abs(res)))
    m = float(abs(res[i]))
    return CheckResult("flow_residual", m <= bound, m, bound, np.asarray(pts[i]).tolist())


def support_band(obj, C: float, n: int, k: int):
    """u (C~^2 - |Du|^2) after shifting u so that min u >= 1."""
    Ct2 = 1 - 1 / C ** 2
    if isinstance(obj, RadialProfile):
        u = obj.height(obj.r)
        g2 = obj.y ** 2
        pts = obj.r[:, None]
    else:
        pts, u, du, _ = obj.interior_jets()
        g2 = np.sum(du ** 2, axis=1)
    u = u + max(0.0, 1.0 - float(np.min(u)))
    return pts, u * (Ct2 - g2)


def support_band_limit(C: float, n: int, k: int) -> float:
    return 2 * (1 - 1 / C ** 2) / C ** 2 * ((n - k) / n) ** (1 / k)


def check_support_band(obj, C: float, n: int, k: int, soliton: bool = True) -> CheckResult:
    if not soliton or (isinstance(obj, RadialProfile) and not obj.params.soliton):
        raise ValueError("support band applies to soliton solutions only")
    pts, band = support_band(obj, C, n, k)
    i = int(np.argmin(band))
    tail = float(band[-1]) if isinstance(obj, RadialProfile) else float(band[np.argmax(np.linalg.norm(pts, axis=1))])
    limit = support_band_limit(C, n, k)
    details = {"min": float(band.min()), "max": float(band.max()), "tail": tail, "tail_limit": limit,
               "tail_rel_error": abs(tail - limit) / limit if limit > 0 else abs(tail)}
    return CheckResult("support_band", bool(band.min() > 0), float(band.min()), 0.0,
                       np.asarray(pts[i]).tolist(), details=details)


# ---------------------------------------------------------------------------
# maximum principle and barriers
# ---------------------------------------------------------------------------

def check_comparison(u1: GridField, u2: GridField, tol: float, psi_u_nonneg: bool = True,
                     name: str = "comparison_principle") -> CheckResult:
    """max (u1 - u2)^+ for boundary data g1 <= g2; bound 10 tol."""
    if u1.grid != u2.grid or not np.array_equal(u1.active, u2.active):
        raise ValueError("comparison needs solutions on the same grid")
    if not psi_u_nonneg:
        return CheckResult(name, True, float("nan"), 10 * tol, None, status="skipped",
                           details={"reason": "right-hand side is not nondecreasing in u"})
    d = np.where(u1.active, u1.values - u2.values, -np.inf)
    i = np.unravel_index(int(np.argmax(d)), d.shape)
    m = max(float(d[i]), 0.0)
    loc = [float(u1.grid.axes[a][i[a]]) for a in range(u1.n)]
    diff = (u2.values - u1.values)[u1.active]
    return CheckResult(name, m <= 10 * tol, m, 10 * tol, loc,
                       details={"min_gap": float(diff.min()), "max_gap": float(diff.max())})


def check_sandwich_stages(stages, barriers: BarrierSet, slack: float) -> CheckResult:
    worst = -np.inf
    loc = None
    per = []
    for f in stages:
        r = check_sandwich(f, barriers)
        v = max(r.lower_violation, r.upper_violation)
        per.append(v)
        if v > worst:
            worst = v
            loc = (r.lower_location if r.lower_violation >= r.upper_violation else r.upper_location).tolist()
    return CheckResult("barrier_sandwich", bool(worst <= slack), per, slack, loc)


# ---------------------------------------------------------------------------
# reporting
# ---------------------------------------------------------------------------

def coverage_manifest(results=None) -> dict:
    """Static list of covered estimates, with the checks actually run if given."""
    out = {"estimates": dict(sorted(COVERAGE.items()))}
    if results is not None:
        out["run"] = sorted({r.name for r in results})
    return out


def verification_report(results, path=None) -> dict:
    rep = {"checks": [r.to_dict() for r in results],
           "passed": all(r.passed for r in results),
           "coverage": coverage_manifest(results)}
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(rep, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return rep
