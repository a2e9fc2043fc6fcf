"""Entire solutions approximated by exhaustion over growing domains.

theorem1: prescribed curvature, dual problems on balls B_r with r_j = 1 - 2^-j.
theorem2: prescribed curvature, primal problems on sublevel sets {q1 < 2^j}.
theorem3: solitons; k = n by primal sublevel stages of the k = n subsolution,
          k < n by dual stages on B_tau, tau_j = C~ (1 - 2^-j), with boundary data
          u^{n*} + (z0^k)* - (z0^n)* built from the k = n result.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .barriers import BarrierSet, SphereData, check_sandwich, make_barriers
from .errors import ConvergenceError, PlanError
from .fields import DualField, GraphField, Grid, masks_from_inside
from .geometry import discrete_conjugate, legendre_inverse, sphere_directions
from .radial import RadialParams, RadialProfile, integrate_profile
from .solver import (ADMISSIBILITY_ERRORS, Ball, LevelSetDomain, ProblemSpec, RHS,
                     SolitonRHS, newton_solve)
MODES = ("theorem1", "theorem2", "theorem3")


@dataclass
class ExhaustionPlan:
    mode: str
    sequence: list
    n: int
    k: int
    rhs: RHS
    watch_radius: float = 2.0
    phi: SphereData | None = None
    h: float = 0.125
    dual_h: float | None = None
    dual_cells: int = 8
    M: float = 1.0
    c1: float | None = None
    c2: float | None = None
    tol: float = 1e-10
    tol_entire: float = 1e-4
    inner_levels: list | None = None
    keep_fields: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise PlanError(f"unknown exhaustion mode {self.mode!r}")
        seq = [float(v) for v in self.sequence]
        if len(seq) < 1 or any(b <= a for a, b in zip(seq, seq[1:])):
            raise PlanError("stage sequence must be strictly increasing")
        if self.mode == "theorem1" and not (0 < seq[0] and seq[-1] < 1):
            raise PlanError("dual radii must lie in (0, 1)")
        if self.mode == "theorem3":
            if not isinstance(self.rhs, SolitonRHS):
                raise PlanError("theorem3 plans need a soliton right-hand side")
            if self.k < self.n and not seq[-1] < self.rhs.C_tilde:
                raise PlanError("dual radii must stay below C~")
        self.sequence = seq
        if self.phi is None:
            self.phi = SphereData.zero(self.n)

    @classmethod
    def geometric(cls, mode, stages, n, k, rhs, start=1, **kw):
        """Schedules r_j = 1 - 2^-j, tau_j = C~ (1 - 2^-j), or levels 2^j."""
        js = range(start, start + stages)
        if mode == "theorem1":
            seq = [1 - 2.0 ** -j for j in js]
        elif mode == "theorem3" and k < n:
            seq = [rhs.C_tilde * (1 - 2.0 ** -j) for j in js]
        else:
            seq = [2.0 ** j for j in js]
        return cls(mode, seq, n, k, rhs, **kw)


@dataclass
class StageRecord:
    index: int
    parameter: float
    report: dict
    diff_on_K: float = float("nan")
    boundary_min: float = float("nan")
    sandwich: dict = field(default_factory=dict)
    field: GraphField | None = None
    dual: DualField | None = None


@dataclass
class ExhaustionReport:
    mode: str
    stages: list
    converged: bool
    failed_stage: int | None = None
    message: str = ""
    wall_time: float = 0.0
    inner: "ExhaustionReport | None" = None
    asymptotics: dict | None = None

    @property
    def diffs(self):
        return [s.diff_on_K for s in self.stages]

    def to_dict(self):
        out = {
            "mode": self.mode,
            "converged": self.converged,
            "failed_stage": self.failed_stage,
            "message": self.message,
            "wall_time": self.wall_time,
            "stages": [{"index": s.index, "parameter": s.parameter, "diff_on_K": s.diff_on_K,
                        "boundary_min": s.boundary_min, "sandwich": s.sandwich,
                        "solve": s.report} for s in self.stages],
        }
        if self.inner is not None:
            out["inner"] = self.inner.to_dict()
        if self.asymptotics is not None:
            out["asymptotics"] = self.asymptotics
        return out


# ---------------------------------------------------------------------------
# level-set domains
# ---------------------------------------------------------------------------

@dataclass
class DomainMask:
    domain: LevelSetDomain
    grid: Grid
    interior: np.ndarray
    boundary: np.ndarray


def _as_callable(ubar):
    if isinstance(ubar, RadialProfile):
        prof = ubar
        return (lambda p: prof.height(np.linalg.norm(np.atleast_2d(p), axis=1))), float(prof.z0[0])
    if isinstance(ubar, BarrierSet):
        b = ubar
        return (lambda p: b.evaluate(np.atleast_2d(p), 1)[0]), None
    return ubar, None


def _ray_extent(f, level, n):
    """Largest radius of {f < level} along a fan of rays (bisection on all rays at once)."""
    dirs = sphere_directions(n, 64 if n == 2 else 128)
    hi = np.ones(len(dirs))
    below = f(dirs) < level
    while below.any():
        hi[below] *= 2
        if hi.max() > 1e7:
            raise PlanError("sublevel set is unbounded")
        below = f(hi[:, None] * dirs) < level
    lo = np.zeros(len(dirs))
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        inside = f(mid[:, None] * dirs) < level
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return float(hi.max())


def level_set_domain(ubar, level: float, h: float = 0.125, n: int = 2) -> DomainMask:
    """{ubar < level} as a masked grid region."""
    f, fmin = _as_callable(ubar)
    if isinstance(ubar, BarrierSet):
        n = ubar.n
    if fmin is None:
        fmin = float(f(np.zeros((1, n)))[0])
        # coarse search for the minimum of the convex function
        pts = np.linspace(-2, 2, 9)
        mesh = np.stack([m.ravel() for m in np.meshgrid(*([pts] * n), indexing="ij")], axis=1)
        fmin = min(fmin, float(np.min(f(mesh))))
    if level <= fmin:
        raise PlanError(f"level {level} does not exceed the minimum {fmin:.6g}: empty domain")
    extent = _ray_extent(f, level, n)
    grid = Grid.covering(n, extent, h)
    inside = (f(grid.coords()) < level).reshape(grid.shape)
    interior, boundary = masks_from_inside(grid, inside)
    if not interior.any():
        raise PlanError("sublevel set contains no interior grid node")
    return DomainMask(LevelSetDomain(f, level, extent), grid, interior, boundary)


def mask_is_grid_convex(mask: np.ndarray) -> bool:
    """True entries are contiguous along every axis line and every diagonal (n = 2, 3)."""
    mask = np.asarray(mask, dtype=bool)

    def contiguous(line):
        idx = np.flatnonzero(line)
        return idx.size == 0 or idx[-1] - idx[0] + 1 == idx.size

    n = mask.ndim
    for ax in range(n):
        moved = np.moveaxis(mask, ax, -1).reshape(-1, mask.shape[ax])
        if not all(contiguous(l) for l in moved):
            return False
    planes = [mask] if n == 2 else [mask[i] for i in range(mask.shape[0])] + \
        [mask[:, j] for j in range(mask.shape[1])] + [mask[:, :, l] for l in range(mask.shape[2])]
    for pl in planes:
        for off in range(-pl.shape[0] + 1, pl.shape[1]):
            if not contiguous(np.diagonal(pl, off)):
                return False
            if not contiguous(np.diagonal(pl[::-1], off)):
                return False
    return True


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _watch_points(n, radius, h):
    half = int(np.floor(radius / h))
    g = h * np.arange(-half, half + 1)
    mesh = np.meshgrid(*([g] * n), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    return pts[np.linalg.norm(pts, axis=1) <= radius]


def _on_K(f: GraphField, pts):
    """Stage values on K (NaN where the stage domain does not reach)."""
    return f.interpolate(pts)


def _boundary_min(f: GraphField) -> float:
    return float(np.nanmin(f.values[f.boundary]))


def _finish_stage(plan, rec: StageRecord, f: GraphField, prev, K, barriers):
    vals = _on_K(f, K)
    if prev is not None:
        both = np.isfinite(vals) & np.isfinite(prev)
        if both.any():
            rec.diff_on_K = float(np.max(np.abs(vals[both] - prev[both])))
    rec.boundary_min = _boundary_min(f)
    if barriers is not None:
        rec.sandwich = check_sandwich(f, barriers).to_dict()
    if plan.keep_fields:
        rec.field = f
    return vals


# ---------------------------------------------------------------------------
# stage drivers
# ---------------------------------------------------------------------------

def _primal_level_stages(plan: ExhaustionPlan, barriers: BarrierSet, spec_k: int, rhs: RHS,
                         report: ExhaustionReport):
    n = plan.n
    K = _watch_points(n, plan.watch_radius, plan.h)
    q1 = lambda p: barriers.evaluate(np.atleast_2d(p), 1)[0]  # noqa: E731
    prof = barriers.profile
    # a recentred radial member solves the equation exactly; adding a linear
    # tilt instead can push |Du| past the cone where the slope is near C~
    centre = np.mean(barriers.family(1)[0], axis=0)

    def smooth(p):
        return prof.height(np.linalg.norm(p + centre, axis=1))

    prev = None
    last = None
    for j, level in enumerate(plan.sequence):
        dm = level_set_domain(barriers, level, plan.h, n)
        spec = ProblemSpec(n=n, k=spec_k, form="primal", rhs=rhs, domain=dm.domain,
                           params={"level": level}, tol=plan.tol)
        # the envelope q1 has discrete kinks that the cross stencil reads as
        # non-admissible, so start from the smooth radial member and continue
        # the boundary trace to q1
        pts = dm.grid.coords()
        bm = dm.boundary.ravel()
        active = (dm.interior | dm.boundary).ravel()
        g = q1(pts[bm])
        vals = np.full(dm.grid.size, np.nan)
        vals[active] = smooth(pts[active])
        vals[active] += float(np.mean(g - vals[bm]))
        f0 = GraphField(dm.grid, vals, dm.interior, dm.boundary, {"level": level})
        rec = StageRecord(j, level, {})
        try:
            f, rep = newton_solve(spec, f0, boundary=g)
        except (ConvergenceError, *ADMISSIBILITY_ERRORS) as exc:
            report.failed_stage = j
            report.message = f"stage {j} (level {level}) failed: {exc}"
            rec.report = {"error": str(exc)}
            report.stages.append(rec)
            return None
        rec.report = rep.to_dict()
        f.meta.update({"level": level, "stage": j})
        prev = _finish_stage(plan, rec, f, prev, K, barriers)
        report.stages.append(rec)
        last = f
    return last


def _dual_ball_stages(plan: ExhaustionPlan, rhs: RHS, k: int, boundary_fn, initial_fn,
                      report: ExhaustionReport, barriers: BarrierSet | None, limit: float):
    n = plan.n
    K = _watch_points(n, plan.watch_radius, plan.h)
    prev = None
    last = None
    for j, r in enumerate(plan.sequence):
        # the dual Hessian blows up towards the degenerate sphere: keep a fixed
        # number of cells across the remaining gap
        dh = min(plan.dual_h or plan.h / 8, (limit - r) / plan.dual_cells)
        grid = Grid.covering(n, r, dh)
        inside = (np.linalg.norm(grid.coords(), axis=1) < r).reshape(grid.shape)
        interior, bnd = masks_from_inside(grid, inside)
        act = (interior | bnd).ravel()
        pts = grid.coords()[act]
        if np.max(np.linalg.norm(pts, axis=1)) >= limit:
            raise PlanError(f"dual stage {j} halo reaches the degenerate sphere; reduce dual_h")
        bm = bnd.ravel()
        g = boundary_fn(grid.coords()[bm])
        vals = np.full(grid.size, np.nan)
        vals[act] = initial_fn(pts)
        vals[act] += float(np.mean(g - vals[bm]))
        f0 = DualField(grid, vals, interior, bnd, {})
        spec = ProblemSpec(n=n, k=k, form="dual", rhs=rhs, domain=Ball(r), params={"r": r},
                           tol=plan.tol)
        rec = StageRecord(j, r, {})
        try:
            d, rep = newton_solve(spec, f0, boundary=g)
            f = legendre_inverse(d, _primal_grid_for(d, plan.h))
        except (ConvergenceError, *ADMISSIBILITY_ERRORS) as exc:
            report.failed_stage = j
            report.message = f"stage {j} (radius {r}) failed: {exc}"
            rec.report = {"error": str(exc)}
            report.stages.append(rec)
            return None
        rec.report = rep.to_dict()
        f.meta.update({"radius": r, "stage": j})
        if plan.keep_fields:
            rec.dual = d
        prev = _finish_stage(plan, rec, f, prev, K, barriers)
        report.stages.append(rec)
        last = f
    return last


def _primal_grid_for(d: DualField, h):
    """Centred primal grid covering the gradient image of a dual field."""
    _, _, dus, _ = d.interior_jets()
    ext = float(np.max(np.abs(dus)))
    return Grid.covering(d.n, ext, h, margin=1)


# ---------------------------------------------------------------------------
# public drivers
# ---------------------------------------------------------------------------

def _prescribed_barriers(plan: ExhaustionPlan) -> BarrierSet:
    c = float(plan.rhs.value(np.zeros((1, plan.n)), np.zeros(1), np.zeros((1, plan.n)))[0])
    c1 = plan.c1 if plan.c1 is not None else c
    c2 = plan.c2 if plan.c2 is not None else c1
    return make_barriers(plan.phi, "prescribed", plan.n, plan.k, M=plan.M, c1=c1, c2=c2)


def _sampled_conjugate(fn, n, radius, h):
    """xi -> sup_x (x . xi - fn(x)) over a sampled disc, refined where the FD Hessian is convex."""
    grid = Grid.covering(n, radius, h, margin=1)
    inside = (np.linalg.norm(grid.coords(), axis=1) < radius).reshape(grid.shape)
    interior, bnd = masks_from_inside(grid, inside)
    act = (interior | bnd).ravel()
    vals = np.full(grid.size, np.nan)
    vals[act] = fn(grid.coords()[act])
    x, u, du, d2 = GraphField(grid, vals, interior, bnd).interior_jets()
    ok = np.all(np.linalg.eigvalsh(d2) > 1e-8, axis=1)

    def conj(xi):
        xi = np.atleast_2d(xi)
        best, arg = discrete_conjugate(x, u, xi, refine=False)
        good = ok[arg]
        if good.any():
            dxi = xi[good] - du[arg[good]]
            step = np.linalg.solve(d2[arg[good]], dxi[..., None])[..., 0]
            best[good] += 0.5 * np.einsum("ij,ij->i", dxi, step)
        return best

    return conj


def exhaust(plan: ExhaustionPlan):
    t0 = time.perf_counter()
    report = ExhaustionReport(plan.mode, [], False)
    if plan.mode == "theorem2":
        barriers = _prescribed_barriers(plan)
        _check_watch_level(plan, barriers)
        last = _primal_level_stages(plan, barriers, plan.k, plan.rhs, report)
    elif plan.mode == "theorem1":
        barriers = _prescribed_barriers(plan)
        prof = barriers.profile
        reach = float(prof.radius_of_slope(np.array([plan.sequence[-1]]))[0])
        if reach <= plan.watch_radius:
            raise PlanError(f"watch radius {plan.watch_radius} exceeds the primal reach "
                            f"{reach:.4g} of the largest dual ball")
        q1 = lambda p: barriers.evaluate(p, 1)[0]  # noqa: E731
        p1, _ = barriers.family(1)
        flat = float(np.max(prof.slope(np.linalg.norm(p1, axis=1))))
        if plan.sequence[0] <= flat:
            raise PlanError(f"first dual radius {plan.sequence[0]:.4g} lies inside the flat "
                            f"region |xi| < {flat:.4g} of the subsolution's conjugate; lower M")
        bfn = _sampled_conjugate(q1, plan.n, 1.5 * reach + 4 * plan.M, plan.h / 2)

        def initial_fn(xi):
            return prof.dual(np.linalg.norm(xi, axis=1))

        last = _dual_ball_stages(plan, plan.rhs, plan.k, bfn, initial_fn, report, barriers, 1.0)
    else:
        last, barriers, report = _soliton_stages(plan, report)
    report.wall_time = time.perf_counter() - t0
    if last is None:
        report.converged = False
        return None, report
    diffs = [d for d in report.diffs if np.isfinite(d)]
    report.converged = bool(diffs) and diffs[-1] <= plan.tol_entire
    if not report.message:
        report.message = "converged" if report.converged else "stage sequence exhausted"
    if plan.mode == "theorem3":
        report.asymptotics = fit_direction_constants(last, barriers.profile, plan.phi,
                                                     plan.watch_radius)
    out = _restrict(last, None, plan.watch_radius)
    return out, report


def fit_direction_constants(f: GraphField, prof: RadialProfile, phi: SphereData, radius: float,
                            n_dirs: int = 16, n_r: int = 9) -> dict:
    """Per-direction constant c(theta) in u(r theta) ~ z(r) + c(theta) on [radius/2, radius].

    z is the radial soliton, so for zero sphere data c vanishes up to the
    stage error.  Nothing is asserted; `spread` is the range of u - z along
    the ray and shows how far the annulus is from the asymptotic regime.
    """
    n = f.n
    dirs = sphere_directions(n, n_dirs)
    rs = np.linspace(0.5 * radius, radius, n_r)
    pts = (dirs[:, None, :] * rs[None, :, None]).reshape(-1, n)
    d = (f.interpolate(pts) - prof.height(np.linalg.norm(pts, axis=1))).reshape(len(dirs), n_r)
    ok = np.all(np.isfinite(d), axis=1)
    c = np.full(len(dirs), np.nan)
    spread = np.full(len(dirs), np.nan)
    c[ok] = d[ok].mean(axis=1)
    spread[ok] = np.ptp(d[ok], axis=1)
    return {"directions": dirs.tolist(), "radii": [float(rs[0]), float(rs[-1])],
            "constant": [None if not np.isfinite(v) else float(v) for v in c],
            "phi": [float(v) for v in phi(dirs)],
            "spread": [None if not np.isfinite(v) else float(v) for v in spread]}


def _check_watch_level(plan, barriers):
    dm_pts = _watch_points(plan.n, plan.watch_radius, plan.h)
    q1 = barriers.evaluate(dm_pts, 1)[0]
    if np.max(q1) >= plan.sequence[-1]:
        raise PlanError("watch region lies outside the largest stage domain")


def _restrict(f: GraphField, K, radius) -> GraphField:
    """Sub-field on the ball of the given radius (interior nodes of f only, plus their halo)."""
    grid = f.grid
    inside = (np.linalg.norm(grid.coords(), axis=1) <= radius).reshape(grid.shape) & f.interior
    interior, bnd = masks_from_inside(grid, inside)
    keep = interior | bnd
    return type(f)(grid, np.where(keep, f.values, np.nan), interior, bnd,
                   dict(f.meta, watch_radius=radius))


def _soliton_stages(plan: ExhaustionPlan, report: ExhaustionReport):
    n, k = plan.n, plan.k
    C = plan.rhs.C
    prof_n = integrate_profile(RadialParams(n, n, "soliton", C=C))
    bar_n = BarrierSet(plan.phi, plan.M, sphere_directions(n, 256 if n == 2 else 1024),
                       "soliton", prof_n, meta={"C": C, "k": n})
    if k == n:
        _check_watch_level(plan, bar_n)
        last = _primal_level_stages(plan, bar_n, n, plan.rhs, report)
        return last, bar_n, report
    # k < n: the k = n entire approximation supplies u^{n*}
    levels = plan.inner_levels or [2.0 ** j for j in range(1, 5)]
    inner_plan = ExhaustionPlan("theorem3", levels, n, n, plan.rhs, plan.watch_radius, plan.phi,
                                plan.h, M=plan.M, tol=plan.tol, keep_fields=True)
    inner = ExhaustionReport("theorem3", [], False)
    _check_watch_level(inner_plan, bar_n)
    un = _primal_level_stages(inner_plan, bar_n, n, plan.rhs, inner)
    inner.converged = un is not None
    report.inner = inner
    if un is None:
        report.failed_stage = -1
        report.message = "k = n stage failed: " + inner.message
        return None, None, report
    prof_k = integrate_profile(RadialParams(n, k, "soliton", C=C))
    bar_k = BarrierSet(plan.phi, plan.M, bar_n.sphere_mesh, "soliton", prof_k,
                       meta={"C": C, "k": k})
    x, u, du, d2 = un.interior_jets()

    def un_star(xi):
        val, _ = discrete_conjugate(x, (u, du, d2), np.atleast_2d(xi))
        return val

    def boundary_fn(xi):
        r = np.linalg.norm(xi, axis=1)
        return un_star(xi) + prof_k.dual(r) - prof_n.dual(r)

    # initial guess: radial dual profile plus the affine tilt of phi's mean gradient
    mesh = bar_k.sphere_mesh
    tilt = np.mean(plan.phi.grad(mesh), axis=0) / prof_k.params.C_tilde
    shift = float(np.mean(plan.phi(mesh)))

    def initial_fn(xi):
        return prof_k.dual(np.linalg.norm(xi, axis=1)) + xi @ tilt - shift

    gmax = float(np.max(np.linalg.norm(du, axis=1)))
    if plan.sequence[-1] >= gmax:
        raise PlanError(f"dual radius {plan.sequence[-1]:.4g} exceeds the gradient image "
                        f"{gmax:.4g} of the k = n stage")
    last = _dual_ball_stages(plan, plan.rhs, k, boundary_fn, initial_fn, report, bar_k,
                             prof_k.params.C_tilde)
    return last, bar_k, report


def soliton_pipeline(phi: SphereData, C: float, n: int, k: int, plan: ExhaustionPlan | None = None,
                     **kw):
    """Entire k-soliton approximation; returns (field on K, report, barriers)."""
    if plan is None:
        stages = kw.pop("stages", 4)
        plan = ExhaustionPlan.geometric("theorem3", stages, n, k, SolitonRHS(C), phi=phi, **kw)
    if plan.mode != "theorem3":
        raise PlanError("soliton pipeline requires a theorem3 plan")
    out, rep = exhaust(plan)
    return out, rep
