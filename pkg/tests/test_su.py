import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import random_endmembers, random_simplex

from almm.baselines import unmix_sclsu
from almm.model import ContractError, SolverConfig, objective_value, reconstruct
from almm.su import project_simplex_clamped, unmix_image_almm, unmix_pixel_almm
from almm.svdl import random_orthonormal
from almm.synthetic import SceneSpec, generate_endmembers

RAW = SolverConfig(alpha=0.0)

PINNED_X = np.array([0.313247529748061, 0.4532091990197722, 0.2335432712321668])
PINNED_S = 1.0946619947189273
PINNED_B = np.array([-0.03920215020990651, -0.00855324373458432, -0.05500333169696756,
                     0.00916951899581831, 0.04992419596968634, -0.02399997449094419,
                     -0.04058710893001658, 0.01093003927996499, 0.01509204443353978,
                     -0.00086694796571779])


def fixture_pixel():
    rng = np.random.default_rng(7)
    A = generate_endmembers(SceneSpec(num_bands=50, num_endmembers=3, rng_seed=7)).data
    E = random_orthonormal(50, 10, 7)
    x = rng.dirichlet(np.ones(3))
    b = 0.05 * rng.standard_normal(10)
    y = 1.1 * (A @ x) + E @ b + 0.01 * rng.standard_normal(50)
    return y, A, E


def low_coherence_dictionary(A, L, seed):
    """Orthonormal atoms drawn from the orthogonal complement of span(A)."""
    Q, _ = np.linalg.qr(A)
    Z = np.random.default_rng(seed).standard_normal((A.shape[0], L))
    Z -= Q @ (Q.T @ Z)
    return np.linalg.qr(Z)[0]


def orthonormal_nonneg(D, P):
    A = np.zeros((D, P))
    for p in range(P):
        A[p::P, p] = 1.0
    return A / np.linalg.norm(A, axis=0)


# -- pixel level ----------------------------------------------------------

def test_pure_scaled_pixel_without_dictionary():
    A = orthonormal_nonneg(8, 3)
    x, S, b, st = unmix_pixel_almm(2 * A[:, 0], A, None, RAW)
    np.testing.assert_allclose(x, [1, 0, 0], atol=1e-6)
    assert S == pytest.approx(2.0, abs=1e-6)
    assert b.shape == (0,) and st.converged


def test_noise_free_reconstruction_with_low_coherence_dictionary(rng):
    A = random_endmembers(rng, 40, 4)
    E = low_coherence_dictionary(A, 6, 1)
    for _ in range(10):
        xt = rng.dirichlet(np.ones(4))
        y = 1.2 * (A @ xt) + E @ (0.1 * rng.standard_normal(6))
        x, S, b, _ = unmix_pixel_almm(y, A, E, SolverConfig())
        assert np.linalg.norm(y - (S * (A @ x) + E @ b)) <= 1e-3 * np.linalg.norm(y)


def test_fixture_pixel_regression():
    y, A, E = fixture_pixel()
    x, S, b, st = unmix_pixel_almm(y, A, E, SolverConfig())
    assert st.converged
    np.testing.assert_allclose(x, PINNED_X, rtol=0, atol=1e-12)
    assert S == pytest.approx(PINNED_S, abs=1e-12)
    np.testing.assert_allclose(b, PINNED_B, rtol=0, atol=1e-12)


def test_fixture_pixel_close_to_long_run_reference():
    y, A, E = fixture_pixel()
    xr, Sr, br, _ = unmix_pixel_almm(y, A, E, SolverConfig(eps=1e-10, max_iter=20000))
    np.testing.assert_allclose(PINNED_X, xr, atol=1e-4)
    assert PINNED_S == pytest.approx(Sr, abs=1e-4)
    np.testing.assert_allclose(PINNED_B, br, atol=1e-4)


def test_singular_b_system_needs_beta():
    A = np.eye(4)[:, :2] + 0.1
    E = np.ones((4, 2))
    with pytest.raises(ContractError, match="beta > 0"):
        unmix_pixel_almm(np.ones(4), A, E, SolverConfig(beta=0.0))
    unmix_pixel_almm(np.ones(4), A, E, SolverConfig(beta=1e-3))


def test_zero_pixel_is_degenerate():
    A = np.eye(3)
    x, S, b, st = unmix_pixel_almm(np.zeros(3), A, None, SolverConfig())
    assert st.degenerate and S == 0.0 and np.all(x == 0)


def test_state_invariants(rng):
    A = random_endmembers(rng, 20, 3)
    E = random_orthonormal(20, 4, 0)
    cfg = SolverConfig()
    for _ in range(20):
        y = A @ rng.dirichlet(np.ones(3)) * rng.uniform(0.8, 1.2) + 0.01 * rng.standard_normal(20)
        _, _, _, st = unmix_pixel_almm(y, A, E, cfg)
        mus = np.array([cfg.mu0] + st.mu_history)
        assert np.all(np.diff(mus) >= 0) and mus.max() <= cfg.mu_max
        assert np.all(st.h >= 0)
        if st.converged:
            assert max(st.residuals) < cfg.eps


def test_project_simplex_clamped():
    x, neg = project_simplex_clamped(np.array([[0.6, 0.0], [-0.1, 0.0], [0.5, 0.0]]))
    np.testing.assert_allclose(x[:, 0], [0.6 / 1.1, 0, 0.5 / 1.1])
    assert neg == pytest.approx(0.1) and np.all(x[:, 1] == 0)


# -- image level ----------------------------------------------------------

def test_image_matches_pixel_reference(rng):
    A = random_endmembers(rng, 15, 3)
    E = random_orthonormal(15, 4, 2)
    Y = A @ random_simplex(rng, 3, 4) * 1.1 + 0.02 * rng.standard_normal((15, 4))
    r = unmix_image_almm(Y, A, E, SolverConfig())
    for k in range(4):
        x, S, b, st = unmix_pixel_almm(Y[:, k], A, E, SolverConfig())
        np.testing.assert_allclose(r.X.data[:, k], x, atol=1e-10)
        assert r.S.values[k] == pytest.approx(S, abs=1e-10)
        np.testing.assert_allclose(r.B.data[:, k], b, atol=1e-10)
        assert r.iters[k] == st.iter


def test_image_lifts_pixel_examples(rng):
    A = orthonormal_nonneg(8, 4)
    r = unmix_image_almm(2 * A, A, None, RAW)
    np.testing.assert_allclose(r.X.data, np.eye(4), atol=1e-6)
    np.testing.assert_allclose(r.S.values, 2.0, atol=1e-6)
    y, A, E = fixture_pixel()
    r = unmix_image_almm(np.tile(y[:, None], 4), A, E, SolverConfig())
    np.testing.assert_allclose(r.X.data, np.tile(PINNED_X[:, None], 4), atol=1e-12)


def test_image_scaling_equivariance_without_dictionary(rng):
    A = random_endmembers(rng, 12, 3)
    Y = A @ random_simplex(rng, 3, 4) * rng.uniform(0.8, 1.2, 4)
    r1, r3 = unmix_image_almm(Y, A, None, RAW), unmix_image_almm(3 * Y, A, None, RAW)
    np.testing.assert_allclose(r3.X.data, r1.X.data, atol=1e-6)
    np.testing.assert_allclose(r3.S.values, 3 * r1.S.values, rtol=1e-6)


def test_thread_split_is_deterministic(rng, monkeypatch):
    A = random_endmembers(rng, 15, 3)
    E = random_orthonormal(15, 4, 2)
    Y = A @ random_simplex(rng, 3, 40) + 0.02 * rng.standard_normal((15, 40))
    r1 = unmix_image_almm(Y, A, E)
    monkeypatch.setenv("ALMM_THREADS", "3")
    r3 = unmix_image_almm(Y, A, E)
    for a, b in ((r1.X.data, r3.X.data), (r1.S.values, r3.S.values), (r1.B.data, r3.B.data)):
        assert np.array_equal(a, b)


def test_reduction_to_sclsu_on_100_noise_free_pixels(rng):
    A = random_endmembers(rng, 30, 4)
    Y = A @ random_simplex(rng, 4, 100) * rng.uniform(0.75, 1.25, 100)
    r = unmix_image_almm(Y, A, None, RAW)
    s = unmix_sclsu(Y, A)
    np.testing.assert_allclose(r.X.data, s.X.data, atol=1e-4)
    np.testing.assert_allclose(r.S.values, s.S.values, atol=1e-4)


def test_objective_does_not_increase_on_fixture():
    y, A, E = fixture_pixel()
    cfg = SolverConfig()
    Y = y[:, None]
    f0 = objective_value(Y, A, np.zeros((3, 1)), np.ones(1), E, np.zeros((10, 1)), cfg)
    r = unmix_image_almm(Y, A, E, cfg)
    assert objective_value(Y, A, r.X, r.S, E, r.B, cfg) <= f0


@settings(max_examples=500)
@given(st.integers(0, 2**32 - 1))
def test_abundance_contract_property(seed):
    rng = np.random.default_rng(seed)
    P = int(rng.integers(2, 5))
    D = int(rng.integers(P + 2, 20))
    A = random_endmembers(rng, D, P)
    L = int(rng.integers(0, 3))
    E = random_orthonormal(D, L, seed) if L else None
    Y = A @ random_simplex(rng, P, 3) * rng.uniform(0.5, 1.5, 3) + 0.05 * rng.standard_normal((D, 3))
    r = unmix_image_almm(Y, A, E, SolverConfig(max_iter=200))
    live = r.status != 2
    assert np.all(r.X.data >= -1e-12)
    np.testing.assert_allclose(r.X.data[:, live].sum(axis=0), 1.0, atol=1e-9)
    assert np.all(r.S.values >= 0)
    Yh = reconstruct(A, r.X, r.S, E, r.B if L else None)
    assert np.all(np.isfinite(Yh))


@settings(max_examples=500)
@given(st.integers(0, 2**32 - 1), st.floats(1.01, 3.0), st.floats(1e-4, 1.0))
def test_penalty_monotone_property(seed, rho, mu0):
    rng = np.random.default_rng(seed)
    A = random_endmembers(rng, 10, 3)
    E = random_orthonormal(10, 2, seed)
    y = A @ rng.dirichlet(np.ones(3)) + 0.02 * rng.standard_normal(10)
    cfg = SolverConfig(rho=rho, mu0=mu0, mu_max=1e3, max_iter=80)
    _, _, _, st_ = unmix_pixel_almm(y, A, E, cfg)
    mus = np.array([cfg.mu0] + st_.mu_history)
    assert np.all(np.diff(mus) >= 0)
    assert np.all((mus >= cfg.mu0) & (mus <= cfg.mu_max))
    assert np.all(st_.h >= 0)
