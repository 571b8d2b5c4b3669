import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from qcl import linalg
from qcl.errors import DimensionMismatch, NotHermitian

from conftest import random_hermitian


@pytest.mark.parametrize("n", [1, 2, 3, 4, 8, 16])
def test_eig_reconstructs_and_is_orthonormal(rng, n):
    a = random_hermitian(rng, n)
    dec = linalg.hermitian_eig(a)
    assert np.abs(dec.reconstruct() - a).max() < 1e-12
    assert np.abs(dec.vectors.conj().T @ dec.vectors - np.eye(n)).max() < 1e-12
    assert np.all(np.diff(dec.values) >= 0)
    np.testing.assert_allclose(dec.values, np.linalg.eigvalsh(a), atol=1e-12)


def test_eig_diagonal_input_is_exact():
    d = np.diag([3.0, -1.0, 2.0, 0.5])
    dec = linalg.hermitian_eig(d)
    np.testing.assert_array_equal(dec.values, [-1.0, 0.5, 2.0, 3.0])


def test_eig_degenerate_spectrum(rng):
    from conftest import random_unitary
    u = random_unitary(rng, 6)
    a = u @ np.diag([1.0, 1.0, 1.0, 2.0, 2.0, -4.0]) @ u.conj().T
    dec = linalg.hermitian_eig(a)
    np.testing.assert_allclose(dec.values, [-4, 1, 1, 1, 2, 2], atol=1e-12)
    assert np.abs(dec.reconstruct() - a).max() < 1e-12


def test_pauli_y_eigenvalues():
    dec = linalg.hermitian_eig(np.array([[0, -1j], [1j, 0]]))
    np.testing.assert_allclose(dec.values, [-1, 1], atol=1e-15)


def test_not_hermitian_rejected():
    with pytest.raises(NotHermitian):
        linalg.hermitian_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_non_square_rejected():
    with pytest.raises(DimensionMismatch):
        linalg.hermitian_eig(np.zeros((2, 3)))


def test_tiny_antihermitian_noise_is_symmetrized(rng):
    a = random_hermitian(rng, 4)
    a[0, 1] += 1e-15
    dec = linalg.hermitian_eig(a)
    assert np.abs(dec.reconstruct() - (a + a.conj().T) / 2).max() < 1e-12


@pytest.mark.parametrize("n", [2, 3, 8])
@pytest.mark.parametrize("s", [0.0, 0.03, 1.0, 17.5])
def test_expm_matches_scipy(rng, n, s):
    h = random_hermitian(rng, n)
    u = linalg.expm_i_hermitian(h, s)
    np.testing.assert_allclose(u, scipy.linalg.expm(1j * s * h), atol=1e-12)
    assert linalg.is_unitary(u, 1e-12)


def test_expm_diagonal_closed_form():
    h = np.diag([0.0, 10.0, 30.0])
    u = linalg.expm_i_hermitian(h, -8.0)
    np.testing.assert_allclose(np.diag(u), np.exp(-1j * np.array([0, 80, 240])), atol=1e-13)


def test_hs_inner():
    a = np.array([[1, 2j], [0, 1]])
    b = np.array([[1, 1], [1j, 3]])
    assert linalg.hs_inner(a, b) == pytest.approx(np.trace(a.conj().T @ b))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
def test_eig_property(n, seed, scale):
    a = random_hermitian(np.random.default_rng(seed), n, scale)
    dec = linalg.hermitian_eig(a)
    assert np.abs(dec.reconstruct() - a).max() <= 1e-12 * max(1.0, scale * n)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1), st.floats(-5.0, 5.0))
def test_expm_group_property(n, seed, s):
    h = random_hermitian(np.random.default_rng(seed), n)
    u1 = linalg.expm_i_hermitian(h, s)
    u2 = linalg.expm_i_hermitian(h, -s)
    assert np.abs(u1 @ u2 - np.eye(n)).max() < 1e-11
