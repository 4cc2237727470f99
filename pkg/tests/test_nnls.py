import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import brute_nnls, kkt_violation, simplex_ls_2

from almm.nnls import (DEFAULT_TOL, NNLSConvergenceError, nnls_gram, solve_fclsu_pixel,
                       solve_nnls, solve_scalar_nnls)


def test_identity_cases():
    np.testing.assert_allclose(solve_nnls(np.eye(2), [0.3, 0.7]), [0.3, 0.7], atol=1e-15)
    np.testing.assert_allclose(solve_nnls(np.eye(2), [-0.5, 1.0]), [0.0, 1.0], atol=1e-15)


def test_unconstrained_solution_already_feasible():
    A = np.array([[1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])
    y = np.array([1.0, 1.0, 0.0])
    oracle = np.linalg.solve(A.T @ A, A.T @ y)
    np.testing.assert_allclose(oracle, [1.0, 0.0], atol=1e-14)
    np.testing.assert_allclose(solve_nnls(A, y), oracle, atol=1e-12)


def test_input_validation():
    with pytest.raises(ValueError):
        solve_nnls(np.array([[np.inf, 1.0]]), [1.0])
    with pytest.raises(ValueError):
        solve_nnls(np.array([[1.0, 0.0], [1.0, 0.0]]), [1.0, 1.0])
    with pytest.raises(ValueError):
        solve_scalar_nnls([1.0, np.nan], [1.0, 1.0])


def test_iteration_cap_reports_best_iterate():
    rng = np.random.default_rng(3)
    A = rng.random((10, 6))
    y = A @ rng.random(6)
    x, ok = nnls_gram(A.T @ A, A.T @ y, DEFAULT_TOL, max_iter=1)
    assert not ok and np.all(x >= 0)
    with pytest.raises(NNLSConvergenceError) as info:
        from almm import nnls
        orig = nnls.nnls_gram
        nnls.nnls_gram = lambda AtA, Aty, tol: orig(AtA, Aty, tol, max_iter=1)
        try:
            solve_nnls(A, y)
        finally:
            nnls.nnls_gram = orig
    assert info.value.best.shape == (6,)


def test_scalar_nnls_examples():
    assert solve_scalar_nnls([1.0, 0.0], [2.0, 5.0]) == 2.0
    assert solve_scalar_nnls([1.0, 1.0], [-1.0, -1.0]) == 0.0
    assert solve_scalar_nnls([0.0, 0.0], [1.0, 1.0]) == 0.0


@settings(max_examples=500)
@given(st.integers(0, 2**32 - 1), st.floats(0, 100, allow_nan=False))
def test_scalar_nnls_recovers_scale(seed, c):
    z = np.random.default_rng(seed).standard_normal(7)
    assert solve_scalar_nnls(z, c * z) == pytest.approx(c, rel=1e-12, abs=1e-12)


def test_fclsu_examples():
    np.testing.assert_allclose(solve_fclsu_pixel(np.eye(2), [0.3, 0.7]), [0.3, 0.7], atol=1e-6)
    y = np.array([0.6, 1.4])
    x = solve_fclsu_pixel(np.eye(2), y)
    oracle = simplex_ls_2(np.eye(2), y)
    np.testing.assert_allclose(x, oracle, atol=1e-4)
    # least-squares projection onto the simplex, not the rescaling y / 1'y
    np.testing.assert_allclose(oracle, [0.1, 0.9], atol=1e-12)
    assert np.sum((y - x) ** 2) < np.sum((y - [0.3, 0.7]) ** 2)
    A = np.random.default_rng(0).random((8, 3))
    np.testing.assert_allclose(solve_fclsu_pixel(A, A[:, 0]), [1, 0, 0], atol=1e-6)


@settings(max_examples=500)
@given(st.integers(0, 2**32 - 1))
def test_fclsu_feasible_and_matches_two_variable_oracle(seed):
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.05, 1, (6, 2))
    y = rng.uniform(0, 1.5, 6)
    x = solve_fclsu_pixel(A, y)
    assert np.all(x >= 0) and abs(x.sum() - 1) <= 1e-6
    ref = simplex_ls_2(A, y)
    f = lambda v: np.sum((y - A @ v) ** 2)  # noqa: E731
    assert f(x) <= f(ref) + 1e-6


def test_brute_force_agreement_1000_instances():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        P = int(rng.integers(1, 4))
        D = int(rng.integers(P, 12))
        A = rng.standard_normal((D, P))
        y = rng.standard_normal(D)
        worst = max(worst, np.max(np.abs(solve_nnls(A, y) - brute_nnls(A, y))))
    assert worst <= 1e-6


def test_kkt_1000_instances():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        P = int(rng.integers(1, 9))
        D = int(rng.integers(1, 21))
        A = rng.standard_normal((D, P))
        if np.linalg.matrix_rank(A) < min(D, P):
            continue
        y = rng.standard_normal(D)
        x = solve_nnls(A, y)
        assert np.all(x >= 0)
        assert kkt_violation(A, y, x, DEFAULT_TOL) <= 1.0


@settings(max_examples=500)
@given(st.integers(0, 2**32 - 1))
def test_kkt_property(seed):
    rng = np.random.default_rng(seed)
    P = int(rng.integers(1, 9))
    D = int(rng.integers(P, 21))
    A = rng.uniform(0, 1, (D, P)) + 0.01
    y = rng.standard_normal(D)
    x = solve_nnls(A, y)
    assert np.all(x >= 0)
    assert kkt_violation(A, y, x, DEFAULT_TOL) <= 1.0


@settings(max_examples=500)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
def test_positive_scaling_equivariance(seed, c):
    rng = np.random.default_rng(seed)
    A = rng.uniform(0, 1, (10, 4)) + 0.01
    y = rng.standard_normal(10)
    np.testing.assert_allclose(solve_nnls(A, c * y), c * solve_nnls(A, y),
                               rtol=1e-8, atol=1e-10 * c)


@settings(max_examples=500)
@given(st.integers(0, 2**32 - 1))
def test_brute_force_property(seed):
    rng = np.random.default_rng(seed)
    P = int(rng.integers(1, 4))
    A = rng.standard_normal((int(rng.integers(P, 10)), P))
    y = rng.standard_normal(A.shape[0])
    np.testing.assert_allclose(solve_nnls(A, y), brute_nnls(A, y), atol=1e-6)
