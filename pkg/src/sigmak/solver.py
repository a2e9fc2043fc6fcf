"""Damped Newton for the curvature equations on masked grids.

Primal form:  G(sigma_k(kappa[u])) - psi(x, u, Du) = 0 with G the identity, or
(. / binom(n, k))^{1/k} for the soliton right-hand side C - 1/w.
Dual form:    (sigma_n / sigma_{n-k})^{1/k}(kappa*[u*]) - psi*^{1/k} = 0.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import symfun
from .errors import ConeViolationError, ConvergenceError, ConvexityError, SpacelikeError
from .fields import DualField, GraphField, Grid, GridField, masks_from_inside
from .geometry import curvature_matrix_batch, dual_matrix_batch, spacelike_w, SOLITON_MARGIN
from .symfun import binom

CLOSED_CONE_SLACK = 1e-10


# ---------------------------------------------------------------------------
# right-hand sides
# ---------------------------------------------------------------------------

class RHS:
    """psi(x, u, p) with derivatives; subclasses are the whitelisted forms."""

    kind = "callable"
    monotone = True  # psi_u >= 0

    def value(self, x, u, p):
        raise NotImplementedError

    def derivatives(self, x, u, p):
        """(psi_x, psi_u, psi_p) by central differences unless overridden."""
        N, n = x.shape
        eps = 1e-6
        px = np.empty((N, n))
        pp = np.empty((N, n))
        for a in range(n):
            e = np.zeros(n)
            e[a] = eps
            px[:, a] = (self.value(x + e, u, p) - self.value(x - e, u, p)) / (2 * eps)
            pp[:, a] = (self.value(x, u, p + e) - self.value(x, u, p - e)) / (2 * eps)
        pu = (self.value(x, u + eps, p) - self.value(x, u - eps, p)) / (2 * eps)
        return px, pu, pp

    def to_dict(self):
        return {"kind": self.kind}


class ConstantRHS(RHS):
    kind = "constant"

    def __init__(self, c):
        if not c > 0:
            raise ValueError("constant right-hand side must be positive")
        self.c = float(c)

    def value(self, x, u, p):
        return np.full(len(x), self.c)

    def derivatives(self, x, u, p):
        z = np.zeros_like(x)
        return z, np.zeros(len(x)), z.copy()

    def to_dict(self):
        return {"kind": self.kind, "constants": [self.c]}


class RadialPolyRHS(RHS):
    """psi = sum_j c_j |x|^j."""

    kind = "radial_poly"

    def __init__(self, coeffs):
        self.coeffs = np.asarray(coeffs, dtype=float)
        if self.coeffs.size == 0 or self.coeffs[0] <= 0 or np.any(self.coeffs < 0):
            raise ValueError("radial polynomial needs c_0 > 0 and non-negative coefficients")

    def _poly(self, r):
        return np.polynomial.polynomial.polyval(r, self.coeffs)

    def value(self, x, u, p):
        return self._poly(np.linalg.norm(x, axis=1))

    def to_dict(self):
        return {"kind": self.kind, "constants": self.coeffs.tolist()}


class SeparableRHS(RHS):
    """psi = a(|x|) (b0 + beta tanh u), a a positive radial polynomial, beta >= 0."""

    kind = "separable"

    def __init__(self, a_coeffs, b0, beta):
        self.a = RadialPolyRHS(a_coeffs)
        self.b0 = float(b0)
        self.beta = float(beta)
        if self.beta < 0:
            raise ValueError("separable form requires beta >= 0 (psi nondecreasing in u)")
        if not self.b0 > self.beta:
            raise ValueError("separable form requires b0 > beta for positivity")

    def value(self, x, u, p):
        return self.a.value(x, u, p) * (self.b0 + self.beta * np.tanh(u))

    def to_dict(self):
        return {"kind": self.kind, "constants": [self.b0, self.beta],
                "a": self.a.coeffs.tolist()}


class CallableRHS(RHS):
    """Arbitrary psi for tests; monotonicity is declared, not checked."""

    def __init__(self, fn: Callable, monotone: bool = True):
        self.fn = fn
        self.monotone = bool(monotone)

    def value(self, x, u, p):
        return np.asarray(self.fn(x, u, p), dtype=float) * np.ones(len(x))


class SolitonRHS(RHS):
    """C - 1/sqrt(1 - |p|^2), the normalised soliton right-hand side."""

    kind = "soliton"

    def __init__(self, C):
        if not C > 1:
            raise ValueError("soliton constant must exceed 1")
        self.C = float(C)

    @property
    def C_tilde(self):
        return math.sqrt(1 - 1 / self.C ** 2)

    def value(self, x, u, p):
        w = np.sqrt(1 - np.sum(p * p, axis=1))
        return self.C - 1 / w

    def derivatives(self, x, u, p):
        w = np.sqrt(1 - np.sum(p * p, axis=1))
        return np.zeros_like(x), np.zeros(len(x)), -p / w[:, None] ** 3

    def to_dict(self):
        return {"kind": self.kind, "constants": [self.C]}


def rhs_from_config(cfg: dict) -> RHS:
    kind = cfg.get("kind")
    const = cfg.get("constants", [])
    if kind == "constant":
        return ConstantRHS(const[0])
    if kind == "radial_poly":
        return RadialPolyRHS(const)
    if kind == "separable":
        return SeparableRHS(cfg.get("a", [1.0]), const[0], const[1])
    if kind == "soliton":
        return SolitonRHS(const[0])
    raise ValueError(f"right-hand side kind {kind!r} is not in the whitelist")


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Ball:
    radius: float
    center: tuple = ()

    def inside(self, pts):
        c = np.asarray(self.center, dtype=float) if self.center else 0.0
        return np.linalg.norm(pts - c, axis=1) < self.radius

    @property
    def extent(self):
        return self.radius

    def to_dict(self):
        return {"kind": "ball", "radius": self.radius}


@dataclass(frozen=True)
class LevelSetDomain:
    """{x : f(x) < level} for a convex f; ``extent`` bounds the set in sup norm."""

    func: Callable
    level: float
    extent: float

    def inside(self, pts):
        return np.asarray(self.func(pts)) < self.level

    def to_dict(self):
        return {"kind": "level_set", "level": self.level, "extent": self.extent}


# ---------------------------------------------------------------------------
# problem description and report
# ---------------------------------------------------------------------------

@dataclass
class ProblemSpec:
    n: int
    k: int
    form: str = "primal"
    rhs: RHS = None
    domain: object = None
    boundary: Callable | None = None
    params: dict = field(default_factory=dict)
    tol: float = 1e-10
    max_iter: int = 40

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("n must be >= 2")
        if not 1 <= self.k <= self.n:
            raise ValueError(f"k={self.k} out of range 1..{self.n}")
        if self.form not in ("primal", "dual"):
            raise ValueError(f"unknown form {self.form!r}")
        if self.rhs is None:
            raise ValueError("a right-hand side is required")
        c1, c2 = self.params.get("c1"), self.params.get("c2")
        if c1 is not None and c2 is not None and not c1 >= c2 > 0:
            raise ValueError("barrier levels need c1 >= c2 > 0")

    @property
    def soliton(self) -> bool:
        return isinstance(self.rhs, SolitonRHS)

    @property
    def slope_bound(self) -> float:
        if self.soliton:
            return self.rhs.C_tilde * (1 - SOLITON_MARGIN)
        return 1.0

    def to_dict(self):
        out = {"n": self.n, "k": self.k, "form": self.form, "rhs": self.rhs.to_dict(),
               "params": dict(self.params), "tol": self.tol, "max_iter": self.max_iter}
        if self.domain is not None and hasattr(self.domain, "to_dict"):
            out["domain"] = self.domain.to_dict()
        return out


@dataclass
class SolveReport:
    residual_history: list = field(default_factory=list)
    newton_iterations: int = 0
    damping_events: int = 0
    continuation_steps: int = 0
    kappa_min: float = float("nan")
    kappa_max: float = float("nan")
    cone_margin: float = float("nan")
    wall_time: float = 0.0
    converged: bool = False
    message: str = ""
    iterate_cone_margins: list = field(default_factory=list)

    @property
    def residual_norm(self) -> float:
        return self.residual_history[-1] if self.residual_history else float("nan")

    def to_dict(self):
        return {
            "residual_history": [float(v) for v in self.residual_history],
            "residual_norm": float(self.residual_norm),
            "newton_iterations": self.newton_iterations,
            "damping_events": self.damping_events,
            "continuation_steps": self.continuation_steps,
            "kappa_min": float(self.kappa_min),
            "kappa_max": float(self.kappa_max),
            "cone_margin": float(self.cone_margin),
            "wall_time": float(self.wall_time),
            "converged": self.converged,
            "message": self.message,
        }


# ---------------------------------------------------------------------------
# discrete operator
# ---------------------------------------------------------------------------

@dataclass
class Evaluation:
    R: np.ndarray
    J: sp.csr_matrix | None
    lam: np.ndarray
    margin: np.ndarray


class DiscreteOperator:
    """Residual and Jacobian of a ProblemSpec on a fixed field topology."""

    def __init__(self, spec: ProblemSpec, f: GridField, closed: bool = False):
        self.spec = spec
        # closed: admit the cone boundary up to round-off (evaluation only, never for iterates)
        self.closed = closed
        st = f.stencil
        self.rows = st.rows
        self.stencil = st
        self.x = f.grid.coords()[st.rows]
        self.D1 = [D[:, st.rows].tocsr() for D in st.D1]
        self.D2 = {ab: D[:, st.rows].tocsr() for ab, D in st.D2.items()}
        self.n = f.n

    def _jets(self, values):
        du, d2 = self.stencil.derivatives(values)
        return values[self.rows], du, d2

    # primal --------------------------------------------------------------
    def _primal_G(self, lam):
        spec = self.spec
        e = symfun._kernels.esp_all(lam)
        s = e[:, spec.k]
        if spec.soliton:
            return (s / binom(spec.n, spec.k)) ** (1.0 / spec.k), e
        return s, e

    def _primal(self, values, want_jac):
        spec = self.spec
        n, k = spec.n, spec.k
        u, du, d2 = self._jets(values)
        w = spacelike_w(du, spec.slope_bound)
        a, g, _ = curvature_matrix_batch(du, d2, w)
        lam, Q = symfun.sym_eig(a)
        margin = symfun.cone_margin_batch(k, lam)
        bad = margin < -CLOSED_CONE_SLACK if self.closed else margin <= 0
        if np.any(bad):
            raise ConeViolationError(f"curvature leaves Gamma_{k} at {int(bad.sum())} node(s)",
                                     nodes=self.rows[np.flatnonzero(bad)[:20]])
        G, e = self._primal_G(lam)
        psi = spec.rhs.value(self.x, u, du)
        R = G - psi
        if not want_jac:
            return Evaluation(R, None, lam, margin)
        dG = symfun.sigma_gradient_batch(k, lam)
        if spec.soliton:
            b = binom(n, k)
            dG = dG * ((1.0 / k) * (e[:, k] / b) ** (1.0 / k - 1.0) / b)[:, None]
        Fij = np.einsum("nij,nj,nkj->nik", Q, dG, Q)
        P = g @ Fij @ g / w[:, None, None]
        # dG/dp through gamma(p) and w(p)
        ww = w * (1 + w)
        dww = -(1 + 2 * w) / w
        gH = g @ d2
        Gp = np.empty_like(du)
        for c in range(n):
            pc = du[:, c]
            ec = np.zeros(n)
            ec[c] = 1.0
            outer = ec[None, :, None] * du[:, None, :] + du[:, :, None] * ec[None, None, :]
            dg = (outer / ww[:, None, None]
                  - du[:, :, None] * du[:, None, :] * (dww * pc / ww ** 2)[:, None, None])
            da = (dg @ d2 @ g + gH @ dg) / w[:, None, None] + a * (pc / w ** 2)[:, None, None]
            Gp[:, c] = np.einsum("nij,nij->n", Fij, da)
        _, psi_u, psi_p = spec.rhs.derivatives(self.x, u, du)
        J = self._assemble(P, Gp - psi_p, -psi_u)
        return Evaluation(R, J, lam, margin)

    # dual ----------------------------------------------------------------
    def _dual_target(self, xi, us, dus):
        """psi*^{1/k} and its (u*, Du*) derivatives."""
        spec = self.spec
        n, k = spec.n, spec.k
        if spec.soliton:
            C = spec.rhs.C
            ws = np.sqrt(1.0 - np.sum(xi * xi, axis=1))
            den = C - 1.0 / ws
            if np.any(den <= 0):
                raise SpacelikeError("dual node outside the soliton ball")
            t = binom(n, k) ** (-1.0 / k) / den
            return t, np.zeros(len(xi)), np.zeros_like(xi)
        x = dus
        u = np.einsum("ij,ij->i", xi, dus) - us
        psi = spec.rhs.value(x, u, xi)
        if np.any(psi <= 0):
            raise ValueError("right-hand side must stay positive")
        px, pu, _ = spec.rhs.derivatives(x, u, xi)
        t = psi ** (-1.0 / k)
        dt = (-1.0 / k) * psi ** (-1.0 / k - 1.0)
        t_u = dt * (-pu)
        t_p = dt[:, None] * (px + pu[:, None] * xi)
        return t, t_u, t_p

    def _dual(self, values, want_jac):
        spec = self.spec
        n, k = spec.n, spec.k
        us, dus, d2 = self._jets(values)
        xi = self.x
        bound = spec.rhs.C_tilde if spec.soliton else 1.0
        a, g, ws = dual_matrix_batch(xi, d2, bound)
        lam, Q = symfun.sym_eig(a)
        margin = lam[:, 0]
        bad = margin < -CLOSED_CONE_SLACK if self.closed else margin <= 0
        if np.any(bad):
            raise ConvexityError(f"dual Hessian not positive definite at {int(bad.sum())} node(s)",
                                 nodes=self.rows[np.flatnonzero(bad)[:20]])
        Fv = symfun.quotient_value_batch(n, k, lam)
        t, t_u, t_p = self._dual_target(xi, us, dus)
        R = Fv - t
        if not want_jac:
            return Evaluation(R, None, lam, margin)
        dF = symfun.quotient_gradient_batch(n, k, lam, value=Fv)
        Fij = np.einsum("nij,nj,nkj->nik", Q, dF, Q)
        P = ws[:, None, None] * (g @ Fij @ g)
        J = self._assemble(P, -t_p, -t_u)
        return Evaluation(R, J, lam, margin)

    def _assemble(self, P, first, zeroth):
        J = sp.diags(zeroth)
        for a in range(self.n):
            J = J + sp.diags(first[:, a]) @ self.D1[a]
        for (a, b), D in self.D2.items():
            coef = P[:, a, a] if a == b else 2.0 * P[:, a, b]
            J = J + sp.diags(coef) @ D
        return J.tocsr()

    def evaluate(self, values, want_jac=True) -> Evaluation:
        values = np.asarray(values, dtype=float).ravel()
        if self.spec.form == "primal":
            return self._primal(values, want_jac)
        return self._dual(values, want_jac)


def residual(f: GridField, spec: ProblemSpec) -> np.ndarray:
    """Nodewise residual; fields on the closed cone (e.g. affine data) are accepted."""
    return DiscreteOperator(spec, f, closed=True).evaluate(f.values, want_jac=False).R


def jacobian(f: GridField, spec: ProblemSpec) -> sp.csr_matrix:
    return DiscreteOperator(spec, f, closed=True).evaluate(f.values, want_jac=True).J


def jacobian_diagnostics(J: sp.csr_matrix) -> dict:
    """Sign pattern of the linearisation and positivity of -J^{-1} 1."""
    J = J.tocsr()
    d = J.diagonal()
    off = J - sp.diags(d)
    offv = off.data
    z = spla.spsolve(J.tocsc(), np.ones(J.shape[0]))
    return {
        "diag_negative": int(np.sum(d < 0)),
        "diag_positive": int(np.sum(d > 0)),
        "offdiag_positive": int(np.sum(offv > 0)),
        "offdiag_negative": int(np.sum(offv < 0)),
        "inverse_constant_min": float(np.min(-z)),
        "monotone": bool(np.all(-z > 0)),
        "symmetry_defect": float(abs(J - J.T).max()) if J.nnz else 0.0,
    }


# ---------------------------------------------------------------------------
# Newton iteration
# ---------------------------------------------------------------------------

ADMISSIBILITY_ERRORS = (ConeViolationError, SpacelikeError, ConvexityError)


def _linear_solve(J, rhs, n):
    if n <= 2:
        return spla.spsolve(J.tocsc(), rhs)
    try:
        ilu = spla.spilu(J.tocsc(), drop_tol=1e-5, fill_factor=20)
        M = spla.LinearOperator(J.shape, ilu.solve)
        x, info = spla.gmres(J, rhs, M=M, rtol=1e-12, atol=0.0, restart=100, maxiter=50)
        if info == 0:
            return x
    except RuntimeError:
        pass
    return spla.spsolve(J.tocsc(), rhs)


def _newton(op: DiscreteOperator, values, tol, max_iter, report: SolveReport):
    rows = op.rows
    ev = op.evaluate(values, want_jac=True)
    norm = float(np.max(np.abs(ev.R)))
    report.residual_history.append(norm)
    report.iterate_cone_margins.append(float(ev.margin.min()))
    for _ in range(max_iter):
        if norm <= tol:
            return values, ev
        delta = _linear_solve(ev.J, -ev.R, op.n)
        l2 = float(np.linalg.norm(ev.R))
        alpha = 1.0
        while True:
            trial = values.copy()
            trial[rows] += alpha * delta
            try:
                ev_t = op.evaluate(trial, want_jac=True)
                l2_t = float(np.linalg.norm(ev_t.R))
                ok = np.isfinite(l2_t) and l2_t <= (1 - 1e-4 * alpha) * l2
            except ADMISSIBILITY_ERRORS:
                ok = False
            if ok:
                break
            alpha *= 0.5
            report.damping_events += 1
            if alpha < 1e-12:
                raise ConvergenceError("line search stagnated", report)
        values, ev = trial, ev_t
        norm = float(np.max(np.abs(ev.R)))
        report.newton_iterations += 1
        report.residual_history.append(norm)
        report.iterate_cone_margins.append(float(ev.margin.min()))
    if norm <= tol:
        return values, ev
    raise ConvergenceError(f"no convergence in {max_iter} Newton steps (residual {norm:.3e})", report)


def _harmonic_lift(f: GridField, op: DiscreteOperator, bvals):
    """Discrete Laplace extension of boundary increments into the interior."""
    L = sum(op.stencil.D2[a, a] for a in range(f.n))
    full = np.zeros(f.grid.size)
    full[f.boundary.ravel()] = bvals
    rhs = -(L @ full)
    Lii = L[:, op.rows]
    inner = spla.spsolve(Lii.tocsc(), rhs)
    full[op.rows] = inner
    return full


def newton_solve(spec: ProblemSpec, initial: GridField, tol=None, max_iter=None,
                 boundary=None, max_halvings=12):
    """Solve with boundary continuation from the initial boundary trace to ``boundary``.

    ``boundary`` is an array over boundary nodes or a callable on their
    coordinates; None keeps the initial trace.
    """
    t0 = time.perf_counter()
    tol = spec.tol if tol is None else tol
    max_iter = spec.max_iter if max_iter is None else max_iter
    report = SolveReport()
    op = DiscreteOperator(spec, initial)
    bmask = initial.boundary.ravel()
    values = initial.values.ravel().copy()
    # admissibility at initialisation is a hard error
    op.evaluate(values, want_jac=False)
    if boundary is None:
        target = values[bmask].copy()
    elif callable(boundary):
        target = np.asarray(boundary(initial.grid.coords()[bmask]), dtype=float)
    else:
        target = np.asarray(boundary, dtype=float)
    start = values[bmask].copy()
    diff = target - start
    if np.max(np.abs(diff), initial=0.0) == 0.0:
        values, ev = _newton(op, values, tol, max_iter, report)
    else:
        lift = _harmonic_lift(initial, op, diff)
        t = 0.0
        step = 1.0
        ev = None
        while t < 1.0:
            s = min(step, 1.0 - t)
            trial = values + s * lift
            trial[bmask] = start + (t + s) * diff
            try:
                sub = SolveReport()
                last = (t + s) >= 1.0
                new_vals, ev = _newton(op, trial, tol if last else max(tol, 1e-8), max_iter, sub)
            except (ConvergenceError, *ADMISSIBILITY_ERRORS):
                step *= 0.5
                report.damping_events += 1
                if step < 0.5 ** max_halvings:
                    raise ConvergenceError(f"boundary continuation stalled at t={t:.4g}", report)
                continue
            report.residual_history.extend(sub.residual_history)
            report.iterate_cone_margins.extend(sub.iterate_cone_margins)
            report.newton_iterations += sub.newton_iterations
            report.damping_events += sub.damping_events
            report.continuation_steps += 1
            values = new_vals
            t += s
            step = min(1.0, 2 * step)
    out = initial.with_values(values.reshape(initial.grid.shape))
    report.kappa_min = float(ev.lam.min())
    report.kappa_max = float(ev.lam.max())
    report.cone_margin = float(ev.margin.min())
    report.converged = True
    report.wall_time = time.perf_counter() - t0
    report.message = "converged"
    out.meta.update({"spec": spec.to_dict(), "residual": report.residual_norm})
    return out, report


# ---------------------------------------------------------------------------
# Dirichlet problems
# ---------------------------------------------------------------------------

def primal_grid(domain, h=None, m=None, n=2) -> Grid:
    if h is None:
        if m is None:
            raise ValueError("give h or m")
        h = 2.0 * domain.extent / (m - 1)
    return Grid.covering(n, domain.extent, h)


def _check_boundary_spacelike(f: GridField, g_vals, bound=1.0):
    """Discrete Lipschitz constant of the boundary data between neighbouring boundary nodes."""
    bmask = f.boundary
    full = np.full(f.grid.shape, np.nan)
    full[bmask] = g_vals
    worst = 0.0
    h = f.h
    for a in range(f.n):
        for b in range(a, f.n):
            offs = [(a, 1)] if a == b else [(a, 1, b, 1), (a, 1, b, -1)]
            for off in offs:
                if len(off) == 2:
                    shifted = np.roll(full, -1, axis=a)
                    dist = h
                else:
                    shifted = np.roll(np.roll(full, -off[1], axis=a), -off[3], axis=b)
                    dist = h * math.sqrt(2)
                d = np.abs(shifted - full) / dist
                if np.any(np.isfinite(d)):
                    worst = max(worst, float(np.nanmax(d)))
    if worst >= bound:
        raise SpacelikeError(f"boundary data has discrete Lipschitz constant {worst:.4g} >= {bound:g}")
    return worst


def default_primal_initial(spec: ProblemSpec, grid: Grid, inside, g=None) -> GraphField:
    """Scaled hyperboloid sqrt(rho^2 + |x|^2) with sigma_k = psi(0) (prescribed mode)."""
    interior, boundary = masks_from_inside(grid, inside)
    pts = grid.coords()
    x0 = np.zeros((1, spec.n))
    c = float(spec.rhs.value(x0, np.zeros(1), np.zeros((1, spec.n)))[0])
    if spec.soliton:
        raise ValueError("soliton problems need a barrier or profile initial guess")
    rho = (binom(spec.n, spec.k) / c) ** (1.0 / spec.k)
    vals = np.sqrt(rho ** 2 + np.sum(pts * pts, axis=1))
    active = (interior | boundary).ravel()
    if g is not None:
        bm = boundary.ravel()
        gb = np.asarray(g(pts[bm]), dtype=float)
        vals = vals + float(np.mean(gb - vals[bm]))
    vals = np.where(active, vals, np.nan)
    return GraphField(grid, vals, interior, boundary, {})


def solve_dirichlet_primal(domain, rhs: RHS, g: Callable, n: int, k: int, h=None, m=None,
                           initial: GraphField | None = None, tol=1e-10, max_iter=40,
                           params=None):
    spec = ProblemSpec(n=n, k=k, form="primal", rhs=rhs, domain=domain, boundary=g,
                       params=dict(params or {}), tol=tol, max_iter=max_iter)
    if initial is None:
        grid = primal_grid(domain, h=h, m=m, n=n)
        inside = domain.inside(grid.coords()).reshape(grid.shape)
        initial = default_primal_initial(spec, grid, inside, g)
    gb = np.asarray(g(initial.grid.coords()[initial.boundary.ravel()]), dtype=float)
    _check_boundary_spacelike(initial, gb, spec.slope_bound)
    return newton_solve(spec, initial, boundary=gb)


def ball_grid(n, radius, h=None, m=None):
    if h is None:
        h = 2.0 * radius / (m - 1)
    return Grid.covering(n, radius, h)


def solve_dirichlet_dual(r: float, rhs: RHS, boundary: Callable, n: int, k: int, h=None, m=None,
                         initial: DualField | Callable | None = None, tol=1e-10, max_iter=40,
                         params=None):
    """Dual problem on the ball B_r of the Gauss-map image."""
    limit = rhs.C_tilde if isinstance(rhs, SolitonRHS) else 1.0
    if not 0 < r < limit:
        raise ValueError(f"dual radius must lie in (0, {limit:g}); the endpoint is degenerate")
    spec = ProblemSpec(n=n, k=k, form="dual", rhs=rhs, domain=Ball(r), boundary=boundary,
                       params=dict(params or {}), tol=tol, max_iter=max_iter)
    if isinstance(initial, DualField):
        f0 = initial
    else:
        grid = ball_grid(n, r, h=h, m=m)
        inside = Ball(r).inside(grid.coords()).reshape(grid.shape)
        interior, bnd = masks_from_inside(grid, inside)
        pts = grid.coords()
        act = (interior | bnd).ravel()
        if np.any(np.linalg.norm(pts[act], axis=1) >= limit):
            raise ValueError("grid halo reaches the degenerate sphere; refine the grid")
        if initial is None:
            x0 = np.zeros((1, n))
            c = float(rhs.value(x0, np.zeros(1), np.zeros((1, n)))[0]) if not spec.soliton else 1.0
            rho = (binom(n, k) / c) ** (1.0 / k)
            fn = lambda q: -rho * np.sqrt(1 - np.sum(q * q, axis=1))  # noqa: E731
        else:
            fn = initial
        vals = np.full(grid.size, np.nan)
        vals[act] = fn(pts[act])
        if initial is None:
            bm = bnd.ravel()
            vals[act] += float(np.mean(boundary(pts[bm]) - vals[bm]))
        f0 = DualField(grid, vals, interior, bnd, {})
    return newton_solve(spec, f0, boundary=boundary)
