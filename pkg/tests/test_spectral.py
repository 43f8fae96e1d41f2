import numpy as np
import pytest

from cocoa_uq.errors import DataError
from cocoa_uq.spectral import (
    MAX_DIM,
    laplacian_spectrum,
    normalized_laplacian,
    sym_eigenvalues,
)

import oracles


def random_symmetric(rng, n, scale=1.0):
    a = np.array([[rng.uniform(-scale, scale) for _ in range(n)] for _ in range(n)])
    return (a + a.T) / 2.0


def random_similarity(rng, n):
    g = np.array([[rng.uniform(0.0, 1.0) for _ in range(n)] for _ in range(n)])
    g = (g + g.T) / 2.0
    np.fill_diagonal(g, 1.0)
    return g


def test_all_ones_similarity_spectrum():
    # One fully connected component: eigenvalues 0, 1, 1.
    g = np.ones((3, 3))
    got = laplacian_spectrum(g).eigenvalues
    assert np.allclose(got, [0.0, 1.0, 1.0], rtol=0, atol=1e-12)


def test_identity_similarity_spectrum():
    got = laplacian_spectrum(np.eye(2)).eigenvalues
    assert np.allclose(got, [0.0, 0.0], rtol=0, atol=1e-12)


def test_single_element_matrix():
    assert sym_eigenvalues(np.array([[4.25]])) == pytest.approx([4.25])
    assert laplacian_spectrum(np.array([[1.0]])).eigenvalues == pytest.approx([0.0])


def test_eigenvalues_match_lapack(rng):
    for n in (2, 3, 5, 8, 12):
        for _ in range(20):
            a = random_symmetric(rng, n, scale=3.0)
            got = sym_eigenvalues(a)
            want = np.linalg.eigvalsh(a)
            assert np.allclose(got, want, rtol=0, atol=1e-10)


def test_eigenvalues_match_charpoly_roots(rng):
    for _ in range(200):
        a = random_symmetric(rng, 3)
        got = sym_eigenvalues(a)
        want = oracles.eig3_charpoly(a)
        assert np.allclose(got, want, rtol=0, atol=1e-8)


def test_eigenvalue_sum_matches_trace(rng):
    for _ in range(50):
        a = random_symmetric(rng, 6)
        got = sym_eigenvalues(a)
        assert abs(got.sum() - np.trace(a)) < 1e-10


def test_eigenvalues_sorted_ascending(rng):
    got = sym_eigenvalues(random_symmetric(rng, 7))
    assert list(got) == sorted(got)


def test_diagonal_matrix_is_immediate():
    got = sym_eigenvalues(np.diag([3.0, -1.0, 2.0]))
    assert np.allclose(got, [-1.0, 2.0, 3.0], rtol=0, atol=0)


def test_laplacian_matches_oracle_form(rng):
    g = random_similarity(rng, 6)
    lap = normalized_laplacian(g)
    d = g.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(d)
    want = np.eye(6) - inv_sqrt[:, None] * g * inv_sqrt[None, :]
    assert np.allclose(lap, (want + want.T) / 2.0, rtol=0, atol=1e-15)
    assert np.array_equal(lap, lap.T)


def test_laplacian_spectrum_within_known_bounds(rng):
    # Normalized Laplacian eigenvalues live in [0, 2].
    for n in (2, 4, 9):
        eig = laplacian_spectrum(random_similarity(rng, n)).eigenvalues
        assert eig.min() >= -1e-10
        assert eig.max() <= 2.0 + 1e-10


def test_disconnected_blocks_add_zero_eigenvalues():
    # Two all-ones blocks: one zero eigenvalue per component.
    g = np.zeros((5, 5))
    g[:2, :2] = 1.0
    g[2:, 2:] = 1.0
    eig = laplacian_spectrum(g).eigenvalues
    assert np.sum(np.abs(eig) < 1e-10) == 2


@pytest.mark.parametrize(
    "matrix",
    [
        np.ones((2, 3)),
        np.array([[1.0, 0.9], [0.1, 1.0]]),  # asymmetric beyond tolerance
        np.array([[1.0, 1.2], [1.2, 1.0]]),  # entry outside [0, 1]
        np.array([[0.5, 0.1], [0.1, 1.0]]),  # diagonal not pinned to 1
    ],
)
def test_normalized_laplacian_rejects_bad_input(matrix):
    with pytest.raises(DataError):
        normalized_laplacian(matrix)


def test_sym_eigenvalues_rejects_asymmetry_and_size():
    with pytest.raises(DataError):
        sym_eigenvalues(np.array([[0.0, 1.0], [0.5, 0.0]]))
    with pytest.raises(DataError):
        sym_eigenvalues(np.zeros((MAX_DIM + 1, MAX_DIM + 1)))
    with pytest.raises(DataError):
        sym_eigenvalues(np.zeros((2, 3)))


def test_rotation_handles_tiny_off_diagonals():
    # Entries near the convergence threshold must not stall the sweep.
    a = np.array([[1.0, 1e-13, 0.0], [1e-13, 2.0, 1e-13], [0.0, 1e-13, 3.0]])
    got = sym_eigenvalues(a)
    assert np.allclose(got, [1.0, 2.0, 3.0], rtol=0, atol=1e-10)
