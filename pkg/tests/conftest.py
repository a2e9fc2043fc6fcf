import functools

import pytest

from sigmak.radial import RadialParams, integrate_profile


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """record(tag, passed, text): one pass/fail line per acceptance criterion."""
    def record(tag, passed, text):
        line = f"{tag} {'PASS' if passed else 'FAIL'}: {text}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@functools.lru_cache(maxsize=None)
def soliton_profile(n, k, C, r_max=1e3):
    return integrate_profile(RadialParams(n=n, k=k, C=C), r_max=r_max)


@pytest.fixture(scope="session")
def profile_322():
    return soliton_profile(3, 2, 2.0)


@pytest.fixture(scope="session")
def profile_212():
    return soliton_profile(2, 1, 2.0)


@pytest.fixture(scope="session")
def profile_222():
    return soliton_profile(2, 2, 2.0)


@functools.lru_cache(maxsize=None)
def soliton_run_22():
    """k = n = 2, C = 2, phi = 0: primal sublevel stages 2, 4, 8, 16 on K = B_2."""
    from sigmak.entire import ExhaustionPlan, exhaust
    from sigmak.solver import SolitonRHS

    plan = ExhaustionPlan("theorem3", [2.0, 4.0, 8.0, 16.0], 2, 2, SolitonRHS(2.0), M=0.1, h=0.125,
                          watch_radius=2.0)
    out, rep = exhaust(plan)
    return plan, out, rep


@functools.lru_cache(maxsize=None)
def dual_run_theorem1():
    """psi = 2, n = 2, k = 1, phi = 0: dual balls r_j = 1 - 2^-j, j = 2..4."""
    from sigmak.entire import ExhaustionPlan, exhaust
    from sigmak.solver import ConstantRHS

    plan = ExhaustionPlan.geometric("theorem1", 3, 2, 1, ConstantRHS(2.0), start=2, M=0.001,
                                    dual_h=0.005, h=0.125, watch_radius=2.0)
    out, rep = exhaust(plan)
    return plan, out, rep


@functools.lru_cache(maxsize=None)
def soliton_run_12():
    """k = 1 < n = 2, C = 2, phi = 0: inner k = n levels, then dual balls tau_j."""
    from sigmak.entire import ExhaustionPlan, exhaust
    from sigmak.solver import SolitonRHS

    rhs = SolitonRHS(2.0)
    plan = ExhaustionPlan.geometric("theorem3", 3, 2, 1, rhs, start=1, M=0.1, h=0.125,
                                    dual_h=0.01, watch_radius=2.0, inner_levels=[2.0, 4.0, 8.0, 16.0])
    out, rep = exhaust(plan)
    return plan, out, rep


@functools.lru_cache(maxsize=None)
def theorem2_run():
    """psi = 2, n = 2, k = 1, phi = 0: primal sublevel stages 2, 4, 8 on K = B_1.5."""
    from sigmak.entire import ExhaustionPlan, exhaust
    from sigmak.solver import ConstantRHS

    plan = ExhaustionPlan("theorem2", [2.0, 4.0, 8.0], 2, 1, ConstantRHS(2.0), M=0.1, h=0.125,
                          watch_radius=1.5)
    out, rep = exhaust(plan)
    return plan, out, rep


@functools.lru_cache(maxsize=None)
def soliton_run_22_fine():
    """As soliton_run_22 on the h = 1/16 grid; the acceptance defect needs the finer mesh."""
    from sigmak.entire import ExhaustionPlan, exhaust
    from sigmak.solver import SolitonRHS

    plan = ExhaustionPlan("theorem3", [2.0, 4.0, 8.0, 16.0], 2, 2, SolitonRHS(2.0), M=0.1, h=0.0625,
                          watch_radius=2.0)
    out, rep = exhaust(plan)
    return plan, out, rep
