import math

import numpy as np
import pytest

from sigmak.errors import ProfileRangeError, SpacelikeError
from sigmak.radial import (R_START, RadialParams, asymptote_extract, integrate_profile, ode_rhs,
                           profile_residual, radial_curvature, substitution_diagnostics)
from sigmak.symfun import binom

from conftest import soliton_profile


def lhs_oracle(r, y, yp, n, k):
    one = 1 - y * y
    return one ** (-k / 2) * (y / r) ** (k - 1) * (k / n * yp / one + (n - k) / n * y / r)


def test_radial_curvature_examples():
    # radial direction first, then the n - 1 equal tangential values
    assert radial_curvature(1.0, 0.0, 0.7, 3).lam == pytest.approx([0.7, 0.0, 0.0])
    r = 1.0
    y = r / math.sqrt(1 + r * r)
    assert radial_curvature(r, y, (1 + r * r) ** -1.5, 3).lam == pytest.approx([1, 1, 1])
    assert radial_curvature(2.0, 0.5, 0.1, 2).lam == pytest.approx([0.153960, 0.288675], abs=1e-6)
    with pytest.raises(SpacelikeError):
        radial_curvature(1.0, 1.0, 0.0, 2)


def test_ode_rhs_by_substitution():
    p = RadialParams(n=2, k=1, C=2.0)
    yp = ode_rhs(1.0, 0.5, p)
    target = (2.0 - 1 / math.sqrt(0.75))
    assert lhs_oracle(1.0, 0.5, yp, 2, 1) == pytest.approx(target, abs=1e-12)
    assert yp == pytest.approx(0.72307621, abs=1e-8)
    for n, k, C, r, y in [(3, 2, 2.0, 0.7, 0.4), (3, 3, 1.5, 2.0, 0.6), (4, 2, 3.0, 5.0, 0.9)]:
        p = RadialParams(n=n, k=k, C=C)
        yp = ode_rhs(r, y, p)
        assert lhs_oracle(r, y, yp, n, k) == pytest.approx((C - 1 / math.sqrt(1 - y * y)) ** k, abs=1e-12)


def test_ode_rhs_domain_errors():
    p = RadialParams(n=2, k=1, C=2.0)
    with pytest.raises(SpacelikeError):
        ode_rhs(1.0, 0.9, p)
    with pytest.raises(ValueError):
        ode_rhs(1.0, 0.0, p)


def test_ode_origin_limit():
    for n, k, C in [(2, 1, 2.0), (3, 2, 2.0), (3, 3, 1.5)]:
        r = 1e-7
        y = (C - 1) * r
        lhs = lhs_oracle(r, y, C - 1, n, k)
        rhs = (C - 1 / math.sqrt(1 - y * y)) ** k
        assert lhs == pytest.approx((C - 1) ** k, rel=1e-6)
        assert abs(lhs - rhs) < 1e-6


def test_constant_mode_hyperboloid_rate():
    for n, k in [(2, 1), (3, 2), (3, 3)]:
        p = RadialParams(n=n, k=k, rhs_kind="constant", c=binom(n, k))
        for r in (0.3, 1.0, 4.0):
            assert ode_rhs(r, r / math.sqrt(1 + r * r), p) == pytest.approx((1 + r * r) ** -1.5, rel=1e-12)


def test_profile_monotone_and_bounded(profile_322):
    p = profile_322
    Ct = math.sqrt(3) / 2
    assert p.params.C_tilde == pytest.approx(0.8660254, abs=1e-7)
    assert np.all(np.diff(p.y) > 0)
    assert np.all(p.y < Ct)
    assert Ct - p.y[-1] < 1e-3
    assert np.all(np.diff(np.gradient(p.z0, p.r)) >= -1e-12)


@pytest.mark.parametrize("nkc", [(3, 2, 2.0), (2, 1, 2.0), (2, 2, 2.0), (3, 3, 1.5)])
def test_origin_slope(nkc):
    p = soliton_profile(*nkc)
    fd = (float(p.slope(2 * R_START)) - float(p.slope(R_START))) / R_START
    assert fd == pytest.approx(nkc[2] - 1, abs=1e-4)


@pytest.mark.parametrize("nk", [(2, 1), (2, 2), (3, 2)])
def test_constant_mode_recovers_hyperboloid(nk):
    n, k = nk
    tol = 1e-10
    p = integrate_profile(RadialParams(n=n, k=k, rhs_kind="constant", c=binom(n, k)), r_max=50.0, tol=tol)
    assert p.meta["stop"] in ("r_max", "light_cone")
    err = np.max(np.abs(p.y - p.r / np.sqrt(1 + p.r ** 2)))
    assert err <= 10 * tol


@pytest.mark.parametrize("nkc,expected", [((3, 2, 2.0), 0.25 * (1 / 3) ** 0.5),
                                          ((2, 1, 2.0), 0.125),
                                          ((3, 1, 1.5), (1 / 2.25) * (2 / 3))])
def test_z_limit(nkc, expected):
    rep = asymptote_extract(soliton_profile(*nkc))
    assert rep.converged
    assert rep.z_inf == pytest.approx(expected, rel=1e-3)
    assert rep.log_coeff == pytest.approx(expected, rel=1e-2)
    assert abs(rep.c0) < 1e-6


def test_z_limit_equal_orders(profile_222):
    rep = asymptote_extract(profile_222)
    assert rep.z_inf < 5e-3
    assert abs(rep.log_coeff) < 5e-3


def test_asymptote_requires_range():
    p = integrate_profile(RadialParams(n=2, k=1, C=2.0), r_max=100.0)
    with pytest.raises(ProfileRangeError):
        asymptote_extract(p)


def test_substitution_limits(profile_322):
    d = substitution_diagnostics(profile_322)
    assert d["B_inf"] == pytest.approx(3 * math.sqrt(3), abs=1e-5)
    assert d["C_inf"] == pytest.approx(0.1082532, abs=1e-7)
    # A -> 2 C~ / (2 / C) = C C~ as y -> C~
    assert d["A"][-1] == pytest.approx(2.0 * math.sqrt(3) / 2, abs=1e-3)
    z_inf = asymptote_extract(profile_322).z_inf
    assert d["z_limit"] == pytest.approx(z_inf, rel=1e-3)
    assert d["z"][-1] == pytest.approx(d["z_limit"], rel=1e-2)


@pytest.mark.parametrize("nkc", [(3, 2, 2.0), (2, 1, 2.0), (2, 2, 2.0)])
def test_residual_and_curvature_bound(nkc):
    p = soliton_profile(*nkc)
    assert np.max(np.abs(profile_residual(p))) <= 10 * p.meta["tol"]
    assert np.max(p.kappa_max) <= 2 * (nkc[2] - 1)


def test_csv_export(tmp_path, profile_212):
    path = tmp_path / "p.csv"
    profile_212.to_csv(path)
    head = path.read_text().splitlines()
    cols = [c.strip() for c in head[0].lstrip("#").split(",")]
    assert cols[:5] == ["r", "y", "z0", "z", "kappa_max"]
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape[0] == len(profile_212.r)
