import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sigmak.errors import ConvexityError, SpacelikeError
from sigmak.fields import Grid, field_on_domain
from sigmak.geometry import (DualJetPoint, JetPoint, asymptotic_defect, dual_curvature_radii,
                             graph_geometry, legendre_forward, legendre_inverse, minkowski_dot,
                             support_function)


def hyp(x):
    x = np.asarray(x, dtype=float)
    r2 = x @ x
    u = math.sqrt(1 + r2)
    return JetPoint(x, u, x / u, (np.eye(len(x)) - np.outer(x, x) / u ** 2) / u)


def hyp_vals(p):
    return np.sqrt(1 + np.sum(p ** 2, axis=1))


points = st.lists(st.floats(-3, 3), min_size=2, max_size=3)


@given(points)
@settings(max_examples=50, deadline=None)
def test_hyperboloid_unit_curvature(x):
    g = graph_geometry(hyp(x))
    assert np.allclose(g.kappa.lam, 1.0, atol=1e-10)
    assert support_function(hyp(x)) == pytest.approx(-1.0, abs=1e-10)
    nu = g.nu
    assert minkowski_dot(nu, nu) == pytest.approx(-1.0, abs=1e-12)


@given(points)
@settings(max_examples=50, deadline=None)
def test_gamma_is_square_root_of_metric(x):
    rng = np.random.default_rng(abs(hash(tuple(x))) % 2 ** 32)
    du = rng.uniform(-1, 1, len(x))
    du *= 0.95 * rng.uniform() / max(np.linalg.norm(du), 1e-9)
    g = graph_geometry(JetPoint(x, 0.0, du, np.eye(len(x))))
    metric = np.eye(len(x)) - np.outer(du, du)
    low = np.eye(len(x)) - np.outer(du, du) / (1 + g.w)
    assert np.allclose(low @ low, metric, atol=1e-12)
    assert np.allclose(g.gamma @ low, np.eye(len(x)), atol=1e-12)
    assert np.allclose(g.gamma @ g.gamma @ metric, np.eye(len(x)), atol=1e-10)


def test_affine_and_quadratic():
    g = graph_geometry(JetPoint([0.3, -1.0], 0.2, [0.4, 0.5], np.zeros((2, 2))))
    assert np.allclose(g.kappa.lam, 0.0)
    g = graph_geometry(JetPoint([0.0, 0.0, 0.0], 0.0, [0, 0, 0], np.eye(3)))
    assert g.w == 1.0
    assert np.allclose(g.curvature_matrix, np.eye(3))
    assert support_function(JetPoint([0, 0], 0.0, [0.3, 0.2], np.zeros((2, 2)))) == 0.0
    assert support_function(JetPoint([0, 0], 1.0, [0, 0], np.eye(2))) == pytest.approx(-1.0)


def test_timelike_gradient_raises():
    with pytest.raises(SpacelikeError):
        graph_geometry(JetPoint([0, 0], 0.0, [0.8, 0.7], np.eye(2)))


def test_rotation_invariance():
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = rng.standard_normal(3)
        du = rng.standard_normal(3)
        du *= 0.9 / np.linalg.norm(du)
        B = rng.standard_normal((3, 3))
        H = B @ B.T
        Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        k1 = graph_geometry(JetPoint(x, 0.0, du, H)).kappa.lam
        k2 = graph_geometry(JetPoint(Q @ x, 0.0, Q @ du, Q @ H @ Q.T)).kappa.lam
        assert np.allclose(k1, k2, atol=1e-10)


def test_dual_radii_examples():
    xi = np.array([0.3, -0.4])
    s = math.sqrt(1 - xi @ xi)
    d2 = (np.eye(2) + np.outer(xi, xi) / s ** 2) / s
    assert np.allclose(dual_curvature_radii(DualJetPoint(xi, -s, xi / s, d2)).lam, 1.0, atol=1e-10)
    assert np.allclose(dual_curvature_radii(DualJetPoint([0, 0, 0], 0.0, [0, 0, 0], np.eye(3))).lam, 1.0)
    with pytest.raises(ConvexityError):
        dual_curvature_radii(DualJetPoint([0, 0], 0.0, [0, 0], -np.eye(2)))


def test_dual_radii_reciprocal_to_curvatures():
    # ellipsoid-like graph u = sqrt(1 + x.Ax) paired through xi = Du
    A = np.diag([1.0, 3.0])
    x = np.array([0.4, -0.2])
    q = math.sqrt(1 + x @ A @ x)
    du = A @ x / q
    d2 = A / q - np.outer(A @ x, A @ x) / q ** 3
    kap = graph_geometry(JetPoint(x, q, du, d2)).kappa.lam
    # u* Hessian is the inverse Hessian of u at the paired point
    rad = dual_curvature_radii(DualJetPoint(du, x @ du - q, x, np.linalg.inv(d2))).lam
    assert np.allclose(np.sort(1 / kap), rad, rtol=1e-8)


@pytest.mark.parametrize("h", [0.1, 0.05])
def test_legendre_hyperboloid_round_trip(h):
    g = Grid.box((-1, -1), (1, 1), int(round(2 / h)) + 1)
    f = field_on_domain("graph", g, np.linalg.norm(g.coords(), axis=1) <= 1.0, hyp_vals)
    d = legendre_forward(f)
    act = d.active.ravel()
    xi = d.coords()[act]
    assert np.max(np.abs(d.values.ravel()[act] + np.sqrt(1 - np.sum(xi ** 2, 1)))) <= 10 * h ** 2
    back = legendre_inverse(d)
    diff = back.values - f.values
    assert np.isfinite(diff).sum() > 50
    assert np.nanmax(np.abs(diff)) <= 10 * h ** 2


def test_legendre_quadratic_self_conjugate():
    h = 0.05
    g = Grid.box((-1, -1), (1, 1), 41)
    f = field_on_domain("graph", g, np.linalg.norm(g.coords(), axis=1) <= 0.8,
                        lambda p: 0.5 * np.sum(p ** 2, 1) + 0.3)
    d = legendre_forward(f)
    act = d.active.ravel()
    xi = d.coords()[act]
    assert np.max(np.abs(d.values.ravel()[act] - (0.5 * np.sum(xi ** 2, 1) - 0.3))) <= 10 * h ** 2


def test_legendre_rejects_nonconvex():
    g = Grid.box((-1, -1), (1, 1), 21)
    f = field_on_domain("graph", g, np.linalg.norm(g.coords(), axis=1) <= 0.8,
                        lambda p: -0.2 * np.sum(p ** 2, 1))
    with pytest.raises(ConvexityError):
        legendre_forward(f)


def test_asymptotic_defect_examples():
    d = asymptotic_defect(hyp_vals, None, "prescribed", radii=[100.0], n=2)
    assert np.allclose(d, math.sqrt(1 + 100.0 ** 2) - 100.0, atol=1e-12)
    assert np.allclose(d, 4.99988e-3, atol=1e-8)
    d = asymptotic_defect(lambda p: np.linalg.norm(p, axis=1) + 1, None, "prescribed",
                          radii=[5.0, 50.0], n=3)
    assert np.allclose(d, 1.0)
    with pytest.raises(ValueError):
        asymptotic_defect(hyp_vals, None, "other", n=2)
