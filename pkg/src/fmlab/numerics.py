"""Spectral and resolvent computations on assembled instances.

All operations are pure functions of their inputs; scratch arrays are local.
Residual tolerances here are contracts checked at runtime, with violations
raised as NumericalError carrying the instance digest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NumericalError, ResampleSignal
from .model import HamiltonianInstance, hermiticity_residual

RECON_TOL = 1e-10  # eigendecomposition reconstruction, relative to 1 + max|H|
SOLVE_TOL = 1e-10  # resolvent solve residual, relative to 1 + |z|
CLUSTER_TOL = 1e-8  # eigenvalue clustering scale for projector blocks

block_opnorm = kernels.opnorm


@dataclass(eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray  # ascending, length N*k
    eigenvectors: np.ndarray  # orthonormal columns, complex128
    origin: str  # digest of the source instance
    k: int  # block size of the source
    n_sites: int

    @property
    def spectral_width(self) -> float:
        return float(self.eigenvalues[-1] - self.eigenvalues[0])

    def site_rows(self, site: int) -> slice:
        return slice(site * self.k, (site + 1) * self.k)


@dataclass(eq=False)
class GreenBlock:
    block: np.ndarray  # k x k complex
    lam: float
    eps: float
    x: int
    y: int

    @property
    def z(self) -> complex:
        return complex(self.lam, self.eps)


def hermitian_eig(h: HamiltonianInstance) -> SpectralDecomposition:
    """Dense Hermitian eigendecomposition via Householder + implicit-shift QL."""
    if hermiticity_residual(h) != 0.0:
        raise NumericalError("instance is not exactly Hermitian", h.digest)
    a = h.matrix.astype(np.complex128, copy=True)
    d, e, q = kernels.tridiag_reduce(a)
    fail = kernels.tql2(d, e, q)
    if fail:
        raise NumericalError(
            f"QL iteration cap {kernels.QL_ITMAX} hit at eigenvalue {fail - 1}", h.digest
        )
    order = np.argsort(d, kind="stable")
    return SpectralDecomposition(
        eigenvalues=d[order],
        eigenvectors=np.ascontiguousarray(q[:, order]),
        origin=h.digest,
        k=h.k,
        n_sites=h.n_sites,
    )


def _shifted_factor(h: HamiltonianInstance, z: complex):
    """LU of (H - z); raises ResampleSignal on a singular pivot."""
    a = h.matrix.astype(np.complex128, copy=True)
    idx = np.arange(a.shape[0])
    a[idx, idx] -= z
    piv, ok = kernels.lu_factor(a)
    if not ok:
        raise ResampleSignal
    return a, piv


def resolvent_block(h: HamiltonianInstance, lam: float, eps: float, x: int, y: int) -> GreenBlock:
    """The k x k block of (H - lam - i eps)^(-1) at (x, y) by direct solve.

    eps = 0 is allowed at finite volume (continuous disorder makes real
    energies almost surely regular); an exactly singular factorization
    raises ResampleSignal for the caller to handle.
    """
    if eps < 0:
        raise NumericalError("resolvent_block needs eps >= 0", h.digest)
    z = complex(lam, eps)
    lu, piv = _shifted_factor(h, z)
    n = h.matrix.shape[0]
    k = h.k
    rhs = np.zeros((n, k), dtype=np.complex128)
    ys = h.block_slice(y)
    rhs[ys, :] = np.eye(k)
    sol = kernels.lu_solve(lu, piv, rhs)
    resid = h.matrix @ sol - z * sol
    resid[ys, :] -= np.eye(k)
    worst = float(np.max(np.abs(resid)))
    if worst > SOLVE_TOL * (1.0 + abs(z)):
        raise NumericalError(f"resolvent solve residual {worst:.3e} too large", h.digest)
    return GreenBlock(block=sol[h.block_slice(x), :].copy(), lam=lam, eps=eps, x=x, y=y)


def resolvent_profile(h: HamiltonianInstance, lam: float, eps: float, x0: int) -> np.ndarray:
    """Blocks G_z(x0, y) for every site y, shape (n_sites, k, k).

    One factorization of (H - conj(z)) suffices: for Hermitian H,
    G_z(x0, y) = [(H - conj(z))^(-1)(y, x0)]*.
    """
    z = complex(lam, eps)
    lu, piv = _shifted_factor(h, np.conj(z))
    n = h.matrix.shape[0]
    k = h.k
    rhs = np.zeros((n, k), dtype=np.complex128)
    rhs[h.block_slice(x0), :] = np.eye(k)
    sol = kernels.lu_solve(lu, piv, rhs)
    cols = sol.reshape(h.n_sites, k, k)
    return np.conj(np.swapaxes(cols, 1, 2))


def spectral_resolvent_block(sd: SpectralDecomposition, z: complex, x: int, y: int) -> np.ndarray:
    """G_z(x, y) summed over the spectral representation (cross-check path)."""
    um = sd.eigenvectors[sd.site_rows(x), :]
    un = sd.eigenvectors[sd.site_rows(y), :]
    weights = 1.0 / (sd.eigenvalues - z)
    return (um * weights[None, :]) @ un.conj().T


def cluster_indices(sd: SpectralDecomposition, interval):
    """Eigenvalue-index clusters inside the closed interval.

    Consecutive eigenvalues within CLUSTER_TOL * (1 + spectral radius) merge
    into one cluster (continuous disorder makes exact degeneracy measure
    zero; the tolerance guards reproducibility).
    """
    lo, hi = float(interval[0]), float(interval[1])
    vals = sd.eigenvalues
    sel = np.where((vals >= lo) & (vals <= hi))[0]
    if sel.size == 0:
        return []
    radius = max(abs(float(vals[0])), abs(float(vals[-1])))
    tol = CLUSTER_TOL * (1.0 + radius)
    out = []
    start = 0
    while start < sel.size:
        stop = start + 1
        while stop < sel.size and vals[sel[stop]] - vals[sel[stop - 1]] <= tol:
            stop += 1
        out.append(sel[start:stop])
        start = stop
    return out


def projector_blocks(sd: SpectralDecomposition, interval, m: int, n: int):
    """[(nu, M_nu)] per eigenvalue cluster in the interval; M_nu = sum psi(m) psi(n)*."""
    um = sd.eigenvectors[sd.site_rows(m), :]
    un = sd.eigenvectors[sd.site_rows(n), :]
    out = []
    for cols in cluster_indices(sd, interval):
        nu = float(np.mean(sd.eigenvalues[cols]))
        out.append((nu, um[:, cols] @ un[:, cols].conj().T))
    return out


def evolve_block(sd: SpectralDecomposition, interval, t: float, m: int, n: int) -> np.ndarray:
    """e^{i t H_I}(m, n) where H_I is H compressed to the spectral window I."""
    k = sd.k
    out = np.eye(k, dtype=np.complex128) if m == n else np.zeros((k, k), dtype=np.complex128)
    for nu, block in projector_blocks(sd, interval, m, n):
        out = out + (np.exp(1j * t * nu) - 1.0) * block
    return out
