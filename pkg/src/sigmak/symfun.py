"""Elementary symmetric polynomials, curvature quotients and their derivatives.

Scalar entry points take a :class:`SpectralPoint` (or anything array-like);
the ``*_batch`` variants operate on stacks of eigenvalue vectors of shape
``(N, n)`` and are what the solver uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np

from . import _kernels
from .errors import ConeViolationError

QUOTIENT_EPS = 1e-14


@dataclass(frozen=True)
class SpectralPoint:
    """Eigenvalue vector (principal curvatures or curvature radii)."""

    lam: np.ndarray
    n: int = field(default=0)

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float).ravel()
        if lam.size < 2:
            raise ValueError("a spectral point needs n >= 2 entries")
        if not np.all(np.isfinite(lam)):
            raise ValueError("spectral point has non-finite entries")
        object.__setattr__(self, "lam", lam)
        if self.n and self.n != lam.size:
            raise ValueError(f"n={self.n} does not match len(lambda)={lam.size}")
        object.__setattr__(self, "n", lam.size)


@dataclass(frozen=True)
class ConeLabel:
    k: int
    inside: bool


def _lam(p) -> np.ndarray:
    if isinstance(p, SpectralPoint):
        return p.lam
    return SpectralPoint(p).lam


def sigma_all(p) -> np.ndarray:
    """Vector (sigma_0, ..., sigma_n)."""
    return _kernels.esp_all(_lam(p)[None, :])[0]


def sigma(k: int, p) -> float:
    lam = _lam(p)
    if not 0 <= k <= lam.size:
        raise ValueError(f"k={k} out of range 0..{lam.size}")
    return float(sigma_all(lam)[k])


def sigma_restricted(l: int, p, excluded) -> float:
    """sigma_l of lambda with the entries in ``excluded`` (1-based) set to zero."""
    lam = _lam(p).copy()
    idx = sorted(set(int(i) for i in excluded))
    if len(idx) != len(list(excluded)):
        raise ValueError("excluded indices must be distinct")
    for i in idx:
        if not 1 <= i <= lam.size:
            raise ValueError(f"excluded index {i} outside 1..{lam.size}")
    if l < 0:
        raise ValueError("l must be non-negative")
    if l > lam.size - len(idx):
        return 0.0
    keep = np.delete(lam, [i - 1 for i in idx])
    if keep.size == 0:
        return 1.0 if l == 0 else 0.0
    e = _kernels.esp_all(keep[None, :])[0]
    return float(e[l])


def in_gamma_k(p, k: int) -> ConeLabel:
    lam = _lam(p)
    if not 1 <= k <= lam.size:
        raise ValueError(f"k={k} out of range 1..{lam.size}")
    e = sigma_all(lam)
    return ConeLabel(k=k, inside=bool(np.all(e[1:k + 1] > 0)))


def sigma_gradient(k: int, p) -> np.ndarray:
    """d sigma_k / d lambda_i = sigma_{k-1}(lambda | i)."""
    lam = _lam(p)
    if not 1 <= k <= lam.size:
        raise ValueError(f"k={k} out of range 1..{lam.size}")
    return sigma_gradient_batch(k, lam[None, :])[0]


def quotient_value(n: int, k: int, p) -> float:
    """(sigma_n / sigma_{n-k})^{1/k}."""
    lam = _lam(p)
    return float(quotient_value_batch(n, k, lam[None, :])[0])


def quotient_gradient(n: int, k: int, p) -> np.ndarray:
    lam = _lam(p)
    return quotient_gradient_batch(n, k, lam[None, :])[0]


# ---------------------------------------------------------------------------
# batched forms
# ---------------------------------------------------------------------------

def sigma_batch(k: int, lam) -> np.ndarray:
    return _kernels.esp_all(lam)[:, k]


def sigma_gradient_batch(k: int, lam) -> np.ndarray:
    return _kernels.esp_excluded(lam)[:, :, k - 1]


def cone_margin_batch(k: int, lam) -> np.ndarray:
    """min_{m <= k} sigma_m, positive exactly inside Gamma_k."""
    e = _kernels.esp_all(lam)
    return e[:, 1:k + 1].min(axis=1)


def _check_quotient_args(n, k, lam):
    lam = np.asarray(lam, dtype=float)
    if lam.ndim != 2 or lam.shape[1] != n:
        raise ValueError(f"expected eigenvalues of shape (N, {n})")
    if not 1 <= k <= n:
        raise ValueError(f"k={k} out of range 1..{n}")
    return lam


def quotient_value_batch(n: int, k: int, lam) -> np.ndarray:
    lam = _check_quotient_args(n, k, lam)
    e = _kernels.esp_all(lam)
    den = e[:, n - k]
    num = e[:, n]
    bad = (den < QUOTIENT_EPS) | (num < 0)
    if np.any(bad):
        raise ConeViolationError("sigma_{n-k} <= 0 or sigma_n < 0: quotient undefined",
                                 nodes=np.flatnonzero(bad)[:20])
    return (num / den) ** (1.0 / k)


def quotient_gradient_batch(n: int, k: int, lam, value=None) -> np.ndarray:
    """Closed-form derivative of the quotient.

    k F^{k-1} dF/dlambda_i = sigma_{n-1}(lambda|i) sigma_{n-k}(lambda|i) / sigma_{n-k}^2
    """
    lam = _check_quotient_args(n, k, lam)
    e = _kernels.esp_all(lam)
    ex = _kernels.esp_excluded(lam)
    den = e[:, n - k]
    if np.any(den < QUOTIENT_EPS):
        raise ConeViolationError("sigma_{n-k} <= 0: quotient undefined",
                                 nodes=np.flatnonzero(den < QUOTIENT_EPS)[:20])
    F = (e[:, n] / den) ** (1.0 / k) if value is None else value
    top = ex[:, :, n - 1] * ex[:, :, n - k]
    return top / (k * (F ** (k - 1))[:, None] * (den ** 2)[:, None])


# ---------------------------------------------------------------------------
# symmetric-function selectors and the matrix derivative
# ---------------------------------------------------------------------------

class SigmaK:
    """F(A) = sigma_k(lambda(A))."""

    def __init__(self, k: int):
        self.k = int(k)

    def value(self, lam):
        return sigma_batch(self.k, lam)

    def gradient(self, lam):
        return sigma_gradient_batch(self.k, lam)

    def __repr__(self):
        return f"SigmaK({self.k})"


class Quotient:
    """F(A) = (sigma_n / sigma_{n-k})^{1/k} of lambda(A)."""

    def __init__(self, n: int, k: int):
        self.n = int(n)
        self.k = int(k)

    def value(self, lam):
        return quotient_value_batch(self.n, self.k, lam)

    def gradient(self, lam):
        return quotient_gradient_batch(self.n, self.k, lam)

    def __repr__(self):
        return f"Quotient({self.n}, {self.k})"


def sym_eig(A):
    """Batched symmetric eigendecomposition, eigenvalues ascending."""
    A = np.asarray(A, dtype=float)
    A = 0.5 * (A + np.swapaxes(A, -1, -2))
    try:
        return np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - defensive
        raise ConeViolationError(f"eigensolve failed: {exc}") from exc


def matrix_derivative(F, A, eig=None):
    """F^{ij} = dF/da_ij for a spectral function F of a symmetric matrix.

    In the eigenbasis A = Q diag(lambda) Q^T the first derivative is diagonal
    with the eigenvalue gradient on the diagonal, so no divided differences
    enter at first order.  Accepts a single (n, n) matrix or a stack (N, n, n).
    """
    A = np.asarray(A, dtype=float)
    single = A.ndim == 2
    if single:
        A = A[None]
    lam, Q = sym_eig(A) if eig is None else eig
    g = F.gradient(lam)
    D = np.einsum("nij,nj,nkj->nik", Q, g, Q)
    return D[0] if single else D


def binom(n: int, k: int) -> int:
    return comb(n, k)
