import json
import math

import numpy as np
import pytest

from conftest import soliton_profile, soliton_run_22, theorem2_run
from sigmak.barriers import SphereData, make_barriers
from sigmak.fields import Grid, field_on_domain
from sigmak.solver import Ball, ConstantRHS, SolitonRHS, solve_dirichlet_primal
from sigmak.verify import (COVERAGE, CheckResult, check_comparison, check_curvature_bounded,
                           check_flow_residual, check_gradient_bound, check_gradient_bound_cutoff,
                           check_pogorelov, check_sandwich_stages, check_support_band,
                           coverage_manifest, flow_residual, support_band_limit,
                           verification_report)

EXPECTED_ESTIMATES = [
    "barrier_sandwich",
    "bounded_curvature",
    "comparison_principle",
    "flow_residual",
    "gradient_bound",
    "gradient_bound_soliton",
    "pogorelov_product",
    "support_band",
]


def hyp(p):
    return np.sqrt(1 + np.sum(p ** 2, axis=1))


def disc_field(fn, m=41, radius=1.0):
    g = Grid.box((-radius, -radius), (radius, radius), m)
    return field_on_domain("graph", g, np.linalg.norm(g.coords(), axis=1) < radius, fn)


def test_pogorelov_on_hyperboloid():
    s = 1.5
    stages = [disc_field(hyp, m) for m in (21, 41)]
    r = check_pogorelov(stages, s)
    # kappa = 1, so the product is s - u, largest at the minimum u = 1
    assert r.measured == pytest.approx([s - 1] * 2, abs=10 * stages[0].h ** 2)
    assert r.passed
    with pytest.raises(ValueError):
        check_pogorelov(stages, 0.5)


def test_curvature_bounded_examples(profile_322):
    r = check_curvature_bounded(disc_field(hyp))
    assert r.measured[0] == pytest.approx(1.0, abs=1e-3)
    r = check_curvature_bounded(profile_322)
    assert r.passed
    assert profile_322.kappa_max[0] == pytest.approx(2.0 - 1.0, abs=1e-9)


def test_flow_residual_flags_hyperboloid():
    f = disc_field(hyp)
    x, res = flow_residual(f, 2.0, 2, 2)
    assert np.abs(res - (-1 + hyp(x))).max() <= f.h ** 2
    assert not check_flow_residual(f, 2.0, 2, 2).passed


def test_flow_residual_affine_is_constant():
    a = np.array([0.3, -0.4])
    f = disc_field(lambda p: p @ a + 2.0)
    for k in (1, 2):
        _, res = flow_residual(f, 2.0, 2, k)
        assert np.allclose(res, -2.0 + 1 / math.sqrt(1 - a @ a), atol=1e-12)


@pytest.mark.parametrize("n,k", [(3, 2), (2, 1), (2, 2)])
def test_flow_residual_radial_soliton(n, k):
    r = check_flow_residual(soliton_profile(n, k, 2.0), 2.0, n, k)
    assert r.passed
    assert r.measured <= r.bound


@pytest.mark.parametrize("n,k", [(3, 2), (2, 1)])
def test_support_band_tail(n, k):
    r = check_support_band(soliton_profile(n, k, 2.0), 2.0, n, k)
    assert r.passed
    assert r.measured > 0
    assert r.details["tail"] == pytest.approx(support_band_limit(2.0, n, k), rel=1e-2)


def test_support_band_k_equals_n_tail_vanishes(profile_222):
    assert support_band_limit(2.0, 2, 2) == 0.0
    r = check_support_band(profile_222, 2.0, 2, 2)
    assert r.passed
    assert 0 < r.details["tail"] < 5e-3
    with pytest.raises(ValueError):
        check_support_band(profile_222, 2.0, 2, 2, soliton=False)


def test_comparison_identical_and_skipped():
    f, _ = solve_dirichlet_primal(Ball(1.0), ConstantRHS(2.0), hyp, 2, 1, m=17)
    r = check_comparison(f, f.copy(), 1e-10)
    assert r.passed and r.measured == 0.0
    s = check_comparison(f, f, 1e-10, psi_u_nonneg=False)
    assert s.status == "skipped" and s.passed
    other = disc_field(hyp, m=21)
    with pytest.raises(ValueError):
        check_comparison(f, other, 1e-10)


def test_comparison_raised_boundary():
    f1, _ = solve_dirichlet_primal(Ball(1.0), ConstantRHS(2.0), hyp, 2, 1, m=17)
    f2, _ = solve_dirichlet_primal(Ball(1.0), ConstantRHS(2.0), lambda p: hyp(p) + 0.1, 2, 1, m=17)
    r = check_comparison(f1, f2, 1e-10)
    assert r.passed
    assert r.details["min_gap"] >= -1e-9
    assert r.details["max_gap"] <= 0.1 + 1e-9


def test_coverage_manifest_static_list():
    m = coverage_manifest()
    assert sorted(m["estimates"]) == EXPECTED_ESTIMATES
    assert sorted(COVERAGE) == EXPECTED_ESTIMATES
    import sigmak.verify as v
    assert all(callable(getattr(v, fn)) for fn in COVERAGE.values())


def test_gradient_bound_preconditions():
    aff = disc_field(lambda p: 0.2 * p[:, 0] + 1.0)
    with pytest.raises(ValueError, match="convex"):
        check_gradient_bound(aff, lambda x: hyp(x) + 5, lambda x: hyp(x))
    f = disc_field(hyp)
    with pytest.raises(ValueError, match="empty"):
        check_gradient_bound(f, lambda x: hyp(x) + 0.5, lambda x: hyp(x) + 1.0)


def test_gradient_bound_cutoff_prescribed_stages():
    _, _, rep = theorem2_run()
    b = make_barriers(SphereData.zero(2), "prescribed", 2, 1, M=0.1, c1=2.0, c2=2.0)
    for s in rep.stages:
        r = check_gradient_bound_cutoff(s.field, lambda x: b.evaluate(x, 2)[0] + 1e-9)
        assert r.status == "ok"
        assert r.passed
        assert r.measured < 0.5


@pytest.mark.slow
def test_gradient_bound_cutoff_soliton_stages():
    plan, _, rep = soliton_run_22()
    rhs = SolitonRHS(2.0)
    b = make_barriers(SphereData.zero(2), "soliton", 2, 2, M=plan.M, C=2.0)
    for s in rep.stages:
        r = check_gradient_bound_cutoff(s.field, lambda x: b.evaluate(x, 2)[0] + 1e-9,
                                        rhs.C_tilde, name="gradient_bound_soliton")
        assert r.name == "gradient_bound_soliton"
        assert r.status == "ok" and r.passed


def test_sandwich_and_stage_checks_on_levels():
    plan, _, rep = theorem2_run()
    b = make_barriers(SphereData.zero(2), "prescribed", 2, 1, M=0.1, c1=2.0, c2=2.0)
    stages = [s.field for s in rep.stages]
    before = [f.values.copy() for f in stages]
    r = check_sandwich_stages(stages, b, 10 * plan.tol)
    assert r.passed
    p = check_pogorelov(stages, 2.0)
    assert p.passed
    c = check_curvature_bounded(stages)
    assert c.passed
    # checks leave fields untouched and are reproducible
    assert all(np.array_equal(a, f.values, equal_nan=True) for a, f in zip(before, stages))
    assert check_curvature_bounded(stages).to_dict() == c.to_dict()


def test_check_result_rejects_non_finite(tmp_path):
    with pytest.raises(ValueError):
        CheckResult("x", True, float("nan"), 1.0)
    with pytest.raises(ValueError):
        CheckResult("x", True, [1.0, float("inf")], 1.0)
    CheckResult("x", True, float("nan"), None, status="skipped")
    res = [CheckResult("a", True, np.float64(0.5), 1.0, np.array([0.0, 1.0])),
           CheckResult("b", False, [1, 2], 1.5)]
    path = tmp_path / "rep.json"
    rep = verification_report(res, path)
    assert rep["passed"] is False
    on_disk = json.loads(path.read_text())
    assert on_disk == json.loads(json.dumps(rep))
    assert on_disk["coverage"]["run"] == ["a", "b"]
