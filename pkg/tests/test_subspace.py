import numpy as np
import pytest

from mirrorsink.errors import ConfigurationError, NumericalError
from mirrorsink.signal_model import SceneConfig, effective_steering, ideal_covariance, stacked_steering
from mirrorsink.subspace import (
    Covariance,
    default_loading,
    eigh_ascending,
    mvdr_inverse,
    noise_projector,
    regularized_inverse,
    sample_covariance,
)

from conftest import LAM, USERS, random_psd


def test_sample_covariance_rank_one(rng):
    r = rng.standard_normal((5, 1)) + 1j * rng.standard_normal((5, 1))
    R = sample_covariance(r).matrix
    np.testing.assert_allclose(R, r @ r.conj().T, atol=1e-14)
    assert np.linalg.matrix_rank(R, tol=1e-10) == 1


def test_sample_covariance_unit_vector():
    X = np.zeros((3, 10), complex)
    X[0] = 1
    np.testing.assert_array_equal(sample_covariance(X).matrix, np.diag([1, 0, 0]))


def test_sample_covariance_double_loop(rng):
    X = rng.standard_normal((12, 128)) + 1j * rng.standard_normal((12, 128))
    ref = np.zeros((12, 12), complex)
    for f in range(X.shape[1]):
        for i in range(12):
            for j in range(12):
                ref[i, j] += X[i, f] * np.conj(X[j, f])
    ref /= X.shape[1]
    C = sample_covariance(X)
    assert np.max(np.abs(C.matrix - ref)) < 1e-12
    assert np.max(np.abs(C.matrix - C.matrix.conj().T)) < 1e-10
    assert np.linalg.eigvalsh(C.matrix)[0] > -1e-10
    assert C.snapshots == 128


def test_sample_covariance_empty():
    with pytest.raises(ConfigurationError):
        sample_covariance(np.zeros((4, 0)))


def test_projector_identity_degenerate():
    P = noise_projector(np.eye(2), 1)
    np.testing.assert_allclose(P.matrix @ P.matrix, P.matrix, atol=1e-12)
    assert np.trace(P.matrix).real == pytest.approx(1.0)


def test_projector_diag():
    np.testing.assert_allclose(noise_projector(np.diag([10.0, 1, 1]), 1).matrix, np.diag([0, 1, 1]), atol=1e-12)


@pytest.mark.parametrize("k", [1, 2, 5, 11])
def test_projector_properties(rng, k):
    R = random_psd(rng, 12)
    W = noise_projector(R, k).matrix
    assert np.max(np.abs(W @ W - W)) < 1e-8
    assert np.max(np.abs(W - W.conj().T)) == 0.0
    assert np.trace(W).real == pytest.approx(12 - k, abs=1e-6)


def test_projector_scale_invariance(rng):
    R = random_psd(rng, 12)
    for c in (1e-3, 2.5, 1e4):
        assert np.max(np.abs(noise_projector(c * R, 3).matrix - noise_projector(R, 3).matrix)) < 1e-8


def test_projector_range():
    with pytest.raises(ConfigurationError):
        noise_projector(np.eye(3), 0)
    with pytest.raises(ConfigurationError):
        noise_projector(np.eye(3), 3)


def test_eigen_reconstruction(rng):
    R = random_psd(rng, 12)
    w, V = eigh_ascending(R)
    assert np.all(np.diff(w) >= 0)
    assert np.linalg.norm((V * w) @ V.conj().T - R) <= 1e-8 * np.linalg.norm(R)


def test_signal_vectors_in_signal_subspace(db6):
    cfg = SceneConfig(users=USERS, snr_db=20)
    P = noise_projector(ideal_covariance(db6, cfg), 2)
    for u in USERS:
        abar = effective_steering(*stacked_steering(db6, u, LAM), cfg.gamma)
        assert np.linalg.norm(P.matrix @ abar) <= 1e-6 * np.linalg.norm(abar)


def test_regularized_inverse_examples(rng):
    np.testing.assert_allclose(regularized_inverse(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(regularized_inverse(np.diag([2.0, 4.0])), np.diag([0.5, 0.25]))
    for _ in range(20):
        R = random_psd(rng, 8, rank=3)
        eps = 1e-3
        inv = regularized_inverse(R, eps)
        assert np.max(np.abs((R + eps * np.eye(8)) @ inv - np.eye(8))) < 1e-8


def test_regularized_inverse_errors(rng):
    with pytest.raises(NumericalError):
        regularized_inverse(random_psd(rng, 6, rank=2), 0.0)
    with pytest.raises(ValueError):
        regularized_inverse(np.eye(2), -1.0)


def test_mvdr_inverse_loading_policy(rng):
    X = rng.standard_normal((12, 128)) + 1j * rng.standard_normal((12, 128))
    _, eps = mvdr_inverse(sample_covariance(X))
    assert eps == 0.0
    C = sample_covariance(X[:, :5])
    inv, eps = mvdr_inverse(C)
    assert eps == pytest.approx(default_loading(C)) and eps > 0
    assert np.all(np.isfinite(inv))


def test_covariance_scaled():
    C = Covariance(np.eye(2), "ideal").scaled(3.0)
    np.testing.assert_array_equal(C.matrix, 3 * np.eye(2))
    assert C.source == "ideal"
