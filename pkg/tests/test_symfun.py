import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sigmak import symfun as sf
from sigmak.errors import ConeViolationError


def brute_sigma(k, lam):
    return sum(math.prod(c) for c in itertools.combinations(lam, k)) if k else 1.0


def test_sigma_examples():
    assert sf.sigma(2, [1, 2, 3]) == pytest.approx(11)
    assert sf.sigma(0, [0.3, -2.0]) == 1
    assert [sf.sigma(m, [1, 1, 1]) for m in (1, 2, 3)] == pytest.approx([3, 3, 1])


def test_sigma_out_of_range():
    with pytest.raises(ValueError):
        sf.sigma(4, [1, 2, 3])
    with pytest.raises(ValueError):
        sf.sigma(-1, [1, 2])


def test_sigma_restricted_examples():
    assert sf.sigma_restricted(1, [1, 2, 3], [1]) == pytest.approx(5)
    assert sf.sigma_restricted(2, [1, 2, 3], [2]) == pytest.approx(3)
    assert sf.sigma_restricted(0, [1, 2, 3], [1, 2]) == 1
    assert sf.sigma_restricted(2, [1, 2, 3], [1, 2]) == 0


def test_cone_labels():
    assert sf.in_gamma_k([1, 1], 2).inside
    assert not sf.in_gamma_k([3, -1], 2).inside
    assert sf.in_gamma_k([3, -1], 1).inside


def test_sigma_gradient_examples():
    assert sf.sigma_gradient(2, [1, 2, 3]) == pytest.approx([5, 4, 3])
    assert sf.sigma_gradient(1, [0.2, -4, 7]) == pytest.approx([1, 1, 1])
    assert sf.sigma_gradient(3, [2, 1, 1]) == pytest.approx([1, 2, 2])


def test_quotient_examples():
    assert sf.quotient_value(3, 2, [1, 1, 1]) == pytest.approx(3 ** -0.5)
    assert sf.quotient_value(2, 1, [2, 2]) == pytest.approx(1)
    assert sf.quotient_value(3, 2, [1, 2, 3]) == pytest.approx(1)
    assert sf.quotient_gradient(3, 2, [1, 1, 1]) == pytest.approx([math.sqrt(3) / 9] * 3)
    assert sf.quotient_gradient(2, 1, [1, 1]) == pytest.approx([0.25, 0.25])
    lam = np.array([1.0, 2.0, 3.0])
    assert lam @ sf.quotient_gradient(3, 2, lam) == pytest.approx(sf.quotient_value(3, 2, lam), rel=1e-10)


def test_quotient_cone_violation():
    with pytest.raises(ConeViolationError):
        sf.quotient_value(2, 1, [1.0, -1.0])


def test_matrix_derivative_examples():
    D = sf.matrix_derivative(sf.SigmaK(2), np.diag([1.0, 2.0, 3.0]))
    assert D == pytest.approx(np.diag([5.0, 4.0, 3.0]))
    for n, k in [(3, 1), (3, 2), (4, 3)]:
        D = sf.matrix_derivative(sf.SigmaK(k), np.eye(n))
        assert D == pytest.approx(sf.binom(n - 1, k - 1) * np.eye(n))


def test_matrix_derivative_fd():
    rng = np.random.default_rng(3)
    for _ in range(5):
        B = rng.standard_normal((3, 3))
        A = B @ B.T + 0.5 * np.eye(3)
        D = sf.matrix_derivative(sf.SigmaK(2), A)
        f = lambda M: sf.sigma(2, np.linalg.eigvalsh(M))  # noqa: E731
        h = 1e-6
        fd = np.zeros((3, 3))
        for i in range(3):
            for j in range(3):
                E = np.zeros((3, 3))
                E[i, j] = h
                fd[i, j] = (f(A + E) - f(A - E)) / (2 * h) if i == j else \
                    (f(A + (E + E.T) / 2) - f(A - (E + E.T) / 2)) / (2 * h)
        assert np.allclose(D, fd, rtol=1e-6, atol=1e-7)


lam_pos = st.lists(st.floats(0.1, 10.0), min_size=2, max_size=6)


@given(lam_pos, st.data())
@settings(max_examples=60, deadline=None)
def test_sigma_matches_subset_sums_and_is_symmetric(lam, data):
    n = len(lam)
    perm = data.draw(st.permutations(lam))
    for k in range(n + 1):
        assert sf.sigma(k, lam) == pytest.approx(brute_sigma(k, lam), rel=1e-12)
        assert sf.sigma(k, perm) == pytest.approx(sf.sigma(k, lam), rel=1e-13)


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=6))
@settings(max_examples=60, deadline=None)
def test_recursion_identity(lam):
    n = len(lam)
    for i in range(n):
        for k in range(1, n + 1):
            lhs = sf.sigma(k, lam)
            rhs = sf.sigma_restricted(k, lam, [i + 1]) + lam[i] * sf.sigma_restricted(k - 1, lam, [i + 1])
            assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-9)


@given(lam_pos)
@settings(max_examples=60, deadline=None)
def test_sigma_gradient_fd(lam):
    lam = np.array(lam)
    h = 1e-6
    for k in range(1, len(lam) + 1):
        g = sf.sigma_gradient(k, lam)
        fd = np.array([(sf.sigma(k, lam + h * e) - sf.sigma(k, lam - h * e)) / (2 * h)
                       for e in np.eye(len(lam))])
        assert np.allclose(g, fd, rtol=1e-6, atol=1e-8)


@given(lam_pos, st.integers(1, 6))
@settings(max_examples=60, deadline=None)
def test_quotient_gradient_fd_and_euler(lam, k):
    lam = np.array(lam)
    n = len(lam)
    k = min(k, n)
    g = sf.quotient_gradient(n, k, lam)
    h = 1e-6
    fd = np.array([(sf.quotient_value(n, k, lam + h * e) - sf.quotient_value(n, k, lam - h * e)) / (2 * h)
                   for e in np.eye(n)])
    assert np.allclose(g, fd, rtol=1e-6, atol=1e-10)
    assert lam @ g == pytest.approx(sf.quotient_value(n, k, lam), rel=1e-10)


@given(lam_pos, st.data())
@settings(max_examples=40, deadline=None)
def test_quotient_concavity(lam, data):
    n = len(lam)
    mu = np.array(data.draw(st.lists(st.floats(0.1, 10.0), min_size=n, max_size=n)))
    t = data.draw(st.floats(0, 1))
    lam = np.array(lam)
    for k in range(1, n + 1):
        mid = sf.quotient_value(n, k, t * lam + (1 - t) * mu)
        assert mid >= t * sf.quotient_value(n, k, lam) + (1 - t) * sf.quotient_value(n, k, mu) - 1e-10


def test_batch_matches_scalar():
    rng = np.random.default_rng(0)
    lam = rng.uniform(0.1, 5, (50, 4))
    for k in range(5):
        assert np.allclose(sf.sigma_batch(k, lam), [sf.sigma(k, l) for l in lam])
    for k in range(1, 5):
        assert np.allclose(sf.quotient_gradient_batch(4, k, lam),
                           [sf.quotient_gradient(4, k, l) for l in lam])
