"""Masked tensor-grid fields and their finite-difference stencils.

A field lives on a uniform tensor grid.  ``interior`` nodes carry the equation
and have their full 3^n neighbourhood inside the ``active`` set; ``boundary``
nodes are the remaining active nodes and hold Dirichlet data.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator


@dataclass(frozen=True)
class Grid:
    lo: tuple
    h: float
    shape: tuple

    @property
    def n(self) -> int:
        return len(self.shape)

    @property
    def axes(self):
        return tuple(self.lo[a] + self.h * np.arange(self.shape[a]) for a in range(self.n))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def strides(self):
        s = []
        acc = 1
        for m in reversed(self.shape):
            s.append(acc)
            acc *= m
        return tuple(reversed(s))

    def coords(self) -> np.ndarray:
        """Node coordinates, shape (size, n), C order."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @classmethod
    def box(cls, lo, hi, m):
        """m nodes per axis spanning [lo, hi] in every coordinate."""
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        h = float((hi[0] - lo[0]) / (m - 1))
        return cls(tuple(float(v) for v in lo), h, tuple([int(m)] * lo.size))

    @classmethod
    def covering(cls, n, radius, h, margin=2):
        """Centred grid of spacing h covering [-radius, radius]^n plus a margin of nodes."""
        half = int(np.ceil(radius / h)) + margin
        m = 2 * half + 1
        return cls(tuple([-half * h] * n), float(h), tuple([m] * n))


def masks_from_inside(grid: Grid, inside: np.ndarray):
    """interior = inside nodes away from the array edge; boundary = their 3^n halo."""
    inside = np.asarray(inside, dtype=bool).reshape(grid.shape)
    interior = inside.copy()
    for a in range(grid.n):
        sl = [slice(None)] * grid.n
        sl[a] = 0
        interior[tuple(sl)] = False
        sl[a] = -1
        interior[tuple(sl)] = False
    active = interior.copy()
    for off in itertools.product((-1, 0, 1), repeat=grid.n):
        active |= np.roll(interior, off, axis=tuple(range(grid.n)))
    boundary = active & ~interior
    return interior, boundary


@dataclass
class Stencil:
    """Sparse derivative operators from all nodes to interior rows."""

    grid: Grid
    rows: np.ndarray
    D1: list
    D2: dict

    @classmethod
    def build(cls, grid: Grid, interior: np.ndarray) -> "Stencil":
        rows = np.flatnonzero(np.asarray(interior).ravel())
        N = grid.size
        nr = rows.size
        ar = np.arange(nr)
        st = grid.strides
        h = grid.h

        def op(offsets, weights):
            I = np.concatenate([ar] * len(offsets))
            J = np.concatenate([rows + o for o in offsets])
            V = np.concatenate([np.full(nr, w) for w in weights])
            return sp.csr_matrix((V, (I, J)), shape=(nr, N))

        D1 = [op([st[a], -st[a]], [0.5 / h, -0.5 / h]) for a in range(grid.n)]
        D2 = {}
        for a in range(grid.n):
            D2[a, a] = op([st[a], 0, -st[a]], [1 / h ** 2, -2 / h ** 2, 1 / h ** 2])
            for b in range(a + 1, grid.n):
                s, t = st[a], st[b]
                w = 0.25 / h ** 2
                D2[a, b] = op([s + t, s - t, -s + t, -s - t], [w, -w, -w, w])
        return cls(grid, rows, D1, D2)

    def derivatives(self, values_flat: np.ndarray):
        """(Du, D2u) at the interior rows, shapes (N, n) and (N, n, n)."""
        v = np.where(np.isfinite(values_flat), values_flat, 0.0)
        n = self.grid.n
        du = np.stack([D @ v for D in self.D1], axis=1)
        d2 = np.empty((self.rows.size, n, n))
        for (a, b), D in self.D2.items():
            d2[:, a, b] = D @ v
            d2[:, b, a] = d2[:, a, b]
        return du, d2


@dataclass
class GridField:
    """Values on a masked tensor grid (NaN off the active set)."""

    grid: Grid
    values: np.ndarray
    interior: np.ndarray
    boundary: np.ndarray
    meta: dict = field(default_factory=dict)

    kind = "grid"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.shape)
        self.interior = np.asarray(self.interior, dtype=bool).reshape(self.grid.shape)
        self.boundary = np.asarray(self.boundary, dtype=bool).reshape(self.grid.shape)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def active(self) -> np.ndarray:
        return self.interior | self.boundary

    @cached_property
    def stencil(self) -> Stencil:
        return Stencil.build(self.grid, self.interior)

    def coords(self) -> np.ndarray:
        return self.grid.coords()

    def points(self, mask=None) -> np.ndarray:
        mask = self.active if mask is None else mask
        return self.grid.coords()[np.asarray(mask).ravel()]

    def interior_jets(self):
        """(x, u, Du, D2u) at interior nodes."""
        st = self.stencil
        du, d2 = st.derivatives(self.values.ravel())
        x = self.grid.coords()[st.rows]
        return x, self.values.ravel()[st.rows], du, d2

    def with_values(self, values) -> "GridField":
        out = type(self)(self.grid, np.array(values, dtype=float).reshape(self.grid.shape),
                         self.interior, self.boundary, dict(self.meta))
        if "stencil" in self.__dict__:
            out.__dict__["stencil"] = self.__dict__["stencil"]
        return out

    def copy(self) -> "GridField":
        return self.with_values(self.values.copy())

    def gradient_active(self) -> np.ndarray:
        """Du at every active node: centred where possible, one-sided second order otherwise."""
        v = self.values
        act = self.active
        h = self.h
        out = np.full(self.grid.shape + (self.n,), np.nan)
        for a in range(self.n):
            def sh(k):
                return np.roll(v, -k, axis=a), np.roll(act, -k, axis=a) & _valid_shift(self.grid.shape, a, k)
            vp, ap = sh(1)
            vm, am = sh(-1)
            vp2, ap2 = sh(2)
            vm2, am2 = sh(-2)
            g = np.full(self.grid.shape, np.nan)
            cen = act & ap & am
            g[cen] = (vp[cen] - vm[cen]) / (2 * h)
            fwd = act & ~cen & ap & ap2
            g[fwd] = (-3 * v[fwd] + 4 * vp[fwd] - vp2[fwd]) / (2 * h)
            bwd = act & ~cen & ~fwd & am & am2
            g[bwd] = (3 * v[bwd] - 4 * vm[bwd] + vm2[bwd]) / (2 * h)
            out[..., a] = g
        return out

    def interpolate(self, pts) -> np.ndarray:
        """Multilinear interpolation; NaN where a cell touches an inactive node."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        vals = np.where(self.active, self.values, np.nan)
        rgi = RegularGridInterpolator(self.grid.axes, vals, method="linear",
                                      bounds_error=False, fill_value=np.nan)
        return rgi(pts)

    # -- persistence ---------------------------------------------------------
    def header(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "shape": list(self.grid.shape),
            "spacing": self.grid.h,
            "lo": list(self.grid.lo),
            "meta": _jsonable(self.meta),
        }

    def to_csv(self, path, extra: dict | None = None):
        xs = self.grid.coords()
        vals = self.values.ravel()
        act = self.active.ravel()
        inter = self.interior.ravel()
        names = [f"x{i + 1}" for i in range(self.n)] + ["u", "interior"]
        cols = []
        if extra:
            for k, arr in extra.items():
                names.append(k)
                cols.append(np.asarray(arr, dtype=float).ravel())
        with open(path, "w", encoding="utf-8", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(names)
            for idx in np.flatnonzero(act):
                row = [_fmt(v) for v in xs[idx]] + [_fmt(vals[idx]), str(int(inter[idx]))]
                row += [_fmt(c[idx]) for c in cols]
                wr.writerow(row)

    def save(self, stem):
        self.to_csv(f"{stem}.csv")
        with open(f"{stem}.json", "w", encoding="utf-8") as fh:
            json.dump(self.header(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, stem) -> "GridField":
        with open(f"{stem}.json", encoding="utf-8") as fh:
            hdr = json.load(fh)
        grid = Grid(tuple(hdr["lo"]), float(hdr["spacing"]), tuple(hdr["shape"]))
        data = np.loadtxt(f"{stem}.csv", delimiter=",", skiprows=1, ndmin=2)
        n = grid.n
        idx = np.rint((data[:, :n] - np.asarray(grid.lo)) / grid.h).astype(int)
        flat = np.ravel_multi_index(tuple(idx.T), grid.shape)
        values = np.full(grid.size, np.nan)
        values[flat] = data[:, n]
        interior = np.zeros(grid.size, bool)
        interior[flat] = data[:, n + 1] > 0.5
        boundary = np.zeros(grid.size, bool)
        boundary[flat] = ~interior[flat]
        kinds = {"graph": GraphField, "dual": DualField}
        klass = kinds.get(hdr.get("kind"), cls)
        return klass(grid, values, interior, boundary, hdr.get("meta", {}))


class GraphField(GridField):
    """Height function u(x) of a spacelike graph."""

    kind = "graph"


class DualField(GridField):
    """Convex potential u*(xi) on the Gauss-map image."""

    kind = "dual"


def _valid_shift(shape, axis, k):
    """Mask of nodes whose shift by k along axis stays inside the array."""
    m = shape[axis]
    ok = np.zeros(m, bool)
    if k >= 0:
        ok[: m - k] = True
    else:
        ok[-k:] = True
    sh = [1] * len(shape)
    sh[axis] = m
    return np.broadcast_to(ok.reshape(sh), shape)


def _fmt(v) -> str:
    v = float(v)
    if v == 0.0:
        return "0"
    return f"{v:.17g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (str, int, float, bool)) or obj is None:
        return obj
    return repr(obj)


def field_on_domain(kind, grid: Grid, inside, func, cls=None) -> GridField:
    """Build a field with masks from ``inside`` and values func(points) on the active set."""
    interior, boundary = masks_from_inside(grid, inside)
    active = (interior | boundary).ravel()
    values = np.full(grid.size, np.nan)
    pts = grid.coords()[active]
    values[active] = func(pts)
    klass = cls or {"graph": GraphField, "dual": DualField}[kind]
    return klass(grid, values, interior, boundary, {})
