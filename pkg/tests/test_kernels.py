"""Kernel validation against numpy.linalg oracles."""

import numpy as np
import pytest

from fmlab import kernels as K

rng = np.random.default_rng(1234)


def rand_hermitian(n):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return ((a + a.conj().T) / 2).astype(np.complex128)


def eig_full(h):
    d, e, q = K.tridiag_reduce(h.copy())
    fail = K.tql2(d, e, q)
    assert fail == 0
    order = np.argsort(d, kind="stable")
    return d[order], q[:, order]


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 16, 40])
def test_eig_reconstruction_and_orthonormality(n):
    h = rand_hermitian(n)
    d, q = eig_full(h)
    scale = 1.0 + np.abs(h).max()
    assert np.max(np.abs(q @ np.diag(d) @ q.conj().T - h)) <= 1e-12 * scale * max(n, 4)
    assert np.max(np.abs(q.conj().T @ q - np.eye(n))) <= 1e-12 * max(n, 4)
    assert np.all(np.diff(d) >= 0)


def test_eig_small_oracles():
    d, _ = eig_full(np.array([[0, 1], [1, 0]], dtype=np.complex128))
    assert np.allclose(d, [-1.0, 1.0], atol=1e-14)
    d, q = eig_full(np.diag([3.0, 1.0, 2.0]).astype(np.complex128))
    assert np.allclose(d, [1.0, 2.0, 3.0], atol=1e-14)
    # permutation eigenvectors up to phase
    assert np.allclose(np.abs(q), np.eye(3)[:, [1, 2, 0]], atol=1e-14)


def test_eig_matches_lapack_eigvals():
    for n in (6, 13, 30):
        h = rand_hermitian(n)
        d, _ = eig_full(h)
        ref = np.linalg.eigvalsh(h)
        assert np.max(np.abs(d - ref)) <= 1e-11 * (1.0 + np.abs(ref).max())


def test_eig_degenerate_spectrum():
    # doubly degenerate eigenvalues via a block construction
    u, _ = np.linalg.qr(rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)))
    lam = np.array([-2.0, -2.0, 0.5, 0.5, 0.5, 3.0])
    h = (u * lam) @ u.conj().T
    h = (h + h.conj().T) / 2
    d, q = eig_full(h)
    assert np.max(np.abs(d - lam)) <= 1e-10
    assert np.max(np.abs(q @ np.diag(d) @ q.conj().T - h)) <= 1e-10


@pytest.mark.parametrize("n,m", [(1, 1), (4, 2), (17, 3), (40, 5)])
def test_lu_solve_residual(n, m):
    a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    b = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
    lu = a.copy()
    piv, ok = K.lu_factor(lu)
    assert ok
    x = K.lu_solve(lu, piv, b.copy())
    assert np.max(np.abs(a @ x - b)) <= 1e-11 * (1.0 + np.abs(a).max()) * n


def test_lu_singular_flags_resample():
    a = np.zeros((3, 3), dtype=np.complex128)
    a[0, 1] = 1.0
    _, ok = K.lu_factor(a.copy())
    assert not ok


def test_opnorm_oracles():
    assert K.opnorm(np.eye(5, dtype=np.complex128)) == pytest.approx(1.0, abs=1e-12)
    assert K.opnorm(np.diag([3.0, -4.0]).astype(np.complex128)) == pytest.approx(4.0, rel=1e-10)
    nilpotent = np.array([[0.0, 2.0], [0.0, 0.0]], dtype=np.complex128)
    assert K.opnorm(nilpotent) == pytest.approx(2.0, rel=1e-10)


@pytest.mark.parametrize("k", [1, 2, 3, 7, 16])
def test_opnorm_matches_svd(k):
    m = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    ref = np.linalg.svd(m, compute_uv=False)[0]
    assert K.opnorm(m) == pytest.approx(ref, rel=1e-8)
    # adjoint invariance and unitary invariance
    assert K.opnorm(m.conj().T) == pytest.approx(ref, rel=1e-8)
    u, _ = np.linalg.qr(rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k)))
    v, _ = np.linalg.qr(rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k)))
    assert K.opnorm(u @ m @ v) == pytest.approx(ref, rel=1e-8)


def test_opnorm_batch_agrees_with_scalar():
    for k in (1, 2, 3):
        blocks = rng.standard_normal((40, k, k)) + 1j * rng.standard_normal((40, k, k))
        batch = K.opnorm_batch(blocks)
        singles = np.array([K.opnorm(b) for b in blocks])
        assert np.max(np.abs(batch - singles)) <= 1e-10 * (1.0 + singles.max())


def test_opnorm_rejects_oversized_blocks():
    with pytest.raises(ValueError):
        K.opnorm(np.eye(17, dtype=np.complex128))
