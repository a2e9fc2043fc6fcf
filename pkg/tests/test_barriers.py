import math

import numpy as np
import pytest

from sigmak.barriers import (BarrierSet, SphereData, barrier_value, calibrate_M, check_sandwich,
                             make_barriers, tilt_vectors)
from sigmak.errors import CalibrationError, ProfileRangeError
from sigmak.fields import Grid, field_on_domain
from sigmak.geometry import JetPoint, graph_geometry, sphere_directions
from sigmak.radial import radial_curvature


@pytest.fixture(scope="module")
def zero_barriers(profile_212):
    return BarrierSet(SphereData.zero(2), 0.5, sphere_directions(2, 256), "soliton", profile_212)


def test_tilts_for_zero_data():
    y = sphere_directions(2, 8)
    Ct = math.sqrt(0.75)
    p1, p2 = tilt_vectors(SphereData.zero(2), 0.5, y, Ct)
    assert np.allclose(p1, 2 * 0.5 * Ct * y)
    assert np.allclose(p2, -2 * 0.5 * Ct * y)


def test_tilts_linear_data_tangential():
    a = np.array([0.3, -0.2])
    y = sphere_directions(2, 16)
    phi = SphereData.linear(a)
    p1, _ = tilt_vectors(phi, 1.0, y)
    tang = a[None, :] - (y @ a)[:, None] * y
    assert np.allclose(p1, tang + 2 * y)
    # finite-difference gradient of the same data agrees
    fd = SphereData(lambda d: d @ a, n=2)
    assert np.allclose(fd.grad(y), tang, atol=1e-8)


def test_tilts_antipodal_for_even_data():
    phi = SphereData.harmonics(2, [0.1, 0.0, 0.0, 0.2, -0.1])
    y = sphere_directions(2, 32)
    p1, p2 = tilt_vectors(phi, 0.7, y)
    q1, q2 = tilt_vectors(phi, 0.7, -y)
    assert np.allclose(q1, -p1)
    assert np.allclose(q2, -p2)


def test_q1_at_origin(zero_barriers, profile_212):
    Ct = profile_212.params.C_tilde
    M = 0.5
    expected = -2 * M * Ct ** 2 + float(profile_212.height(2 * M * Ct))
    assert barrier_value(np.zeros(2), 1, zero_barriers) == pytest.approx(expected, abs=1e-12)
    with pytest.raises(ValueError):
        barrier_value(np.zeros(2), 3, zero_barriers)


def test_asymptotic_approach(zero_barriers):
    Ct = math.sqrt(0.75)
    L = 0.25 * 0.5
    prev = np.inf
    for R in (10.0, 100.0, 1e3):
        d = sphere_directions(2, 16) * R
        q1, _ = zero_barriers.evaluate(d, 1)
        q2, _ = zero_barriers.evaluate(d, 2)
        ref = Ct * R - L * math.log(R)
        gap = np.abs(q2 - q1).max()
        assert gap < prev
        prev = gap
    assert np.abs(q1 - ref).max() < 1e-3
    assert np.abs(q2 - ref).max() < 1e-3


def test_order_and_mesh_monotonicity(profile_212):
    phi = SphereData.harmonics(2, [0.0, 0.1, 0.0])
    pts = np.random.default_rng(0).uniform(-3, 3, (200, 2))
    vals = {}
    for m in (64, 256):
        b = BarrierSet(phi, 1.0, sphere_directions(2, m), "soliton", profile_212)
        vals[m] = (b.evaluate(pts, 1)[0], b.evaluate(pts, 2)[0])
        assert np.all(vals[m][0] <= vals[m][1])
    assert np.all(vals[256][0] >= vals[64][0] - 1e-14)
    assert np.all(vals[256][1] <= vals[64][1] + 1e-14)


def test_family_members_share_profile_curvature(zero_barriers, profile_212):
    pr = profile_212
    p, consts = zero_barriers.family(1)
    rng = np.random.default_rng(1)
    for _ in range(10):
        x = rng.uniform(-3, 3, 2)
        i = rng.integers(len(p))
        z = x + p[i]
        r = float(np.linalg.norm(z))
        y = float(pr.slope(r))
        yp = float(np.interp(r, pr.r, pr.dy))
        e = z / r
        du = y * e
        d2 = yp * np.outer(e, e) + (y / r) * (np.eye(2) - np.outer(e, e))
        kap = graph_geometry(JetPoint(x, 0.0, du, d2)).kappa.lam
        assert np.allclose(kap, np.sort(radial_curvature(r, y, yp, 2).lam), atol=1e-6)


def test_prescribed_collapse(profile_212):
    b = make_barriers(SphereData.zero(2), "prescribed", 2, 1, M=1e-7)
    pts = np.random.default_rng(2).uniform(-2, 2, (50, 2))
    q1, _ = b.evaluate(pts, 1)
    q2, _ = b.evaluate(pts, 2)
    ref = b.profile.height(np.linalg.norm(pts, axis=1))
    assert np.abs(q1 - ref).max() < 1e-5
    assert np.abs(q2 - ref).max() < 1e-5


def test_profile_range_without_extrapolation(profile_212):
    b = BarrierSet(SphereData.zero(2), 0.5, sphere_directions(2, 16), "soliton", profile_212,
                   extrapolate=False)
    with pytest.raises(ProfileRangeError):
        b.evaluate([[5e3, 0.0]], 1)


def test_calibrate_zero_data():
    assert calibrate_M(SphereData.zero(2), "soliton", {"n": 2, "k": 1, "C": 2.0}) == 1.0
    assert calibrate_M(SphereData.zero(2), "prescribed", {"n": 2, "k": 1}) == 1.0


def test_calibrate_first_harmonic():
    phi = SphereData.harmonics(2, [0.0, 0.1, 0.0])
    M, hist = calibrate_M(phi, "soliton", {"n": 2, "k": 1, "C": 2.0}, return_report=True)
    assert math.isfinite(M) and M >= 1
    assert hist[-1]["passed"] and hist[-1]["max_q1_minus_q2"] <= 0


def test_calibrate_doubles_for_rough_data():
    phi = SphereData.harmonics(2, [0, 0, 0, 0, 0, 0.5, 0])
    M, hist = calibrate_M(phi, "soliton", {"n": 2, "k": 1, "C": 2.0}, return_report=True)
    assert M == 4.0
    assert [h["M"] for h in hist] == [1.0, 2.0, 4.0]


def test_calibrate_discontinuous_data_fails():
    with pytest.raises(CalibrationError):
        calibrate_M(SphereData(lambda d: np.sign(d[:, 0]), n=2), "soliton", {"n": 2, "k": 1, "C": 2.0})


def test_sandwich_examples(zero_barriers, profile_212):
    g = Grid.covering(2, 3.0, 0.25)
    inside = np.linalg.norm(g.coords(), axis=1) < 3.0
    f = field_on_domain("graph", g, inside, lambda p: profile_212.height(np.linalg.norm(p, axis=1)))
    rep = check_sandwich(f, zero_barriers)
    assert rep.lower_violation <= 1e-8 and rep.upper_violation <= 1e-8
    assert rep.passed(1e-8)
    up = field_on_domain("graph", g, inside, lambda p: zero_barriers.evaluate(p, 2)[0] + 1)
    assert check_sandwich(up, zero_barriers).upper_violation == pytest.approx(1.0)
    lo = field_on_domain("graph", g, inside, lambda p: zero_barriers.evaluate(p, 1)[0])
    assert check_sandwich(lo, zero_barriers).lower_violation == pytest.approx(0.0, abs=1e-14)
    assert set(rep.to_dict()) >= {"lower_violation", "upper_violation", "count"}
