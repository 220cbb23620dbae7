"""Hot numeric kernels: tridiagonalization, QL iteration, complex LU, Jacobi.

Every kernel is written in a numba-compilable numpy subset and decorated with
``@njit(cache=True)`` when numba is usable.  Setting the environment variable
``FMLAB_NUMBA=0`` (or numba being missing) selects the pure-numpy fallback,
which executes the identical source without compilation.  Both paths perform
the same floating-point operations in the same order, so results agree to the
last bit apart from possible one-ulp libm differences in ``abs`` of complex
numbers.  ``benchmarks/bench_kernels.py`` times the two paths side by side.

Iteration caps and the singular-pivot threshold are part of the numerical
contract (see :mod:`fmlab.numerics`), not tuning knobs.
"""

from __future__ import annotations

import os

import numpy as np

_flag = os.environ.get("FMLAB_NUMBA", "1").strip().lower()
if _flag in ("0", "off", "false", "no"):
    NUMBA_ENABLED = False
else:
    try:
        from numba import njit as _njit

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        NUMBA_ENABLED = False

if NUMBA_ENABLED:
    def _jit(fn):
        return _njit(cache=True)(fn)
else:
    def _jit(fn):
        return fn


def backend() -> str:
    """Active kernel backend, "numba" or "numpy"."""
    return "numba" if NUMBA_ENABLED else "numpy"


QL_ITMAX = 50  # implicit-shift QL iteration cap per eigenvalue
PIVOT_TINY = 1e-30  # below this magnitude an LU pivot signals "resample"

_EPS = 2.220446049250313e-16


@_jit
def tridiag_reduce(a):
    """Reduce Hermitian a (in place) to real symmetric tridiagonal form.

    Householder similarity from the left column onward, followed by a
    diagonal phase similarity that makes the subdiagonal real nonnegative.
    Returns (d, e, q): diagonal, subdiagonal (e[j] couples j and j+1,
    e[n-1] = 0), and the accumulated unitary with q* a_in q = T.
    """
    n = a.shape[0]
    q = np.eye(n, dtype=np.complex128)
    d = np.zeros(n)
    e = np.zeros(n)
    for k in range(n - 2):
        x = a[k + 1:, k].copy()
        sigma = np.sqrt(np.dot(np.conj(x), x).real)
        if sigma == 0.0:
            continue
        alpha = x[0]
        absa = np.abs(alpha)
        if absa == 0.0:
            phase = 1.0 + 0.0j
        else:
            phase = alpha / absa
        beta = -phase * sigma
        u = x
        u[0] = u[0] - beta
        unorm2 = np.dot(np.conj(u), u).real
        if unorm2 == 0.0:
            continue
        tau = 2.0 / unorm2
        sub = a[k + 1:, k + 1:]
        p = tau * np.dot(np.ascontiguousarray(sub), u)
        kk = 0.5 * tau * np.dot(np.conj(u), p)
        w = p - kk * u
        sub -= w.reshape(-1, 1) * np.conj(u).reshape(1, -1)
        sub -= u.reshape(-1, 1) * np.conj(w).reshape(1, -1)
        a[k + 1, k] = beta
        for i in range(k + 2, n):
            a[i, k] = 0.0
        a[k, k + 1:] = np.conj(a[k + 1:, k])
        qsub = q[:, k + 1:]
        y = np.dot(np.ascontiguousarray(qsub), u)
        qsub -= tau * (y.reshape(-1, 1) * np.conj(u).reshape(1, -1))
    # phase similarity: make the (complex) subdiagonal real >= 0
    d[0] = a[0, 0].real
    ph = np.ones(n, dtype=np.complex128)
    for j in range(n - 1):
        t = a[j + 1, j] * ph[j]
        at = np.abs(t)
        if at == 0.0:
            ph[j + 1] = 1.0 + 0.0j
            e[j] = 0.0
        else:
            ph[j + 1] = t / at
            e[j] = at
        d[j + 1] = a[j + 1, j + 1].real
    for j in range(1, n):
        q[:, j] *= ph[j]
    return d, e, q


@_jit
def tql2(d, e, q):
    """Implicit-shift QL on tridiagonal (d, e), rotating the columns of q.

    d and e are modified in place; on return d holds unordered eigenvalues.
    Returns 0 on success, or 1 + index of the eigenvalue whose iteration
    exceeded QL_ITMAX.
    """
    n = d.shape[0]
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= _EPS * dd:
                    break
                m += 1
            if m == l:
                break
            it += 1
            if it > QL_ITMAX:
                return l + 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            if g >= 0.0:
                g = d[m] - d[l] + e[l] / (g + r)
            else:
                g = d[m] - d[l] + e[l] / (g - r)
            s = 1.0
            c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                tmp = q[:, i + 1].copy()
                q[:, i + 1] = s * q[:, i] + c * tmp
                q[:, i] = c * q[:, i] - s * tmp
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return 0


@_jit
def lu_factor(a):
    """Complex LU with partial pivoting, in place.

    Returns (piv, ok); ok is False when a pivot magnitude falls below
    PIVOT_TINY (caller treats this as a resample signal, not an error).
    """
    n = a.shape[0]
    piv = np.empty(n, dtype=np.int64)
    for j in range(n):
        pj = j
        pmax = np.abs(a[j, j])
        for i in range(j + 1, n):
            mag = np.abs(a[i, j])
            if mag > pmax:
                pmax = mag
                pj = i
        piv[j] = pj
        if pj != j:
            tmp = a[j, :].copy()
            a[j, :] = a[pj, :]
            a[pj, :] = tmp
        if np.abs(a[j, j]) < PIVOT_TINY:
            return piv, False
        if j < n - 1:
            a[j + 1:, j] /= a[j, j]
            a[j + 1:, j + 1:] -= a[j + 1:, j:j + 1] * a[j:j + 1, j + 1:]
    return piv, True


@_jit
def lu_solve(lu, piv, b):
    """Solve (LU) x = P b for b of shape (n, m), in place; returns b."""
    n = lu.shape[0]
    for j in range(n):
        pj = piv[j]
        if pj != j:
            tmp = b[j, :].copy()
            b[j, :] = b[pj, :]
            b[pj, :] = tmp
    for j in range(n - 1):
        b[j + 1:, :] -= lu[j + 1:, j:j + 1] * b[j:j + 1, :]
    for j in range(n - 1, -1, -1):
        b[j, :] /= lu[j, j]
        if j > 0:
            b[:j, :] -= lu[:j, j:j + 1] * b[j:j + 1, :]
    return b


@_jit
def jacobi_eigvals(g):
    """Eigenvalues of a Hermitian k x k matrix by cyclic complex Jacobi.

    Destroys g.  Sized for projector/Gram blocks (k <= 16); sweeps until the
    off-diagonal mass is at machine-zero relative to the Frobenius norm.
    """
    k = g.shape[0]
    if k == 1:
        return np.array([g[0, 0].real])
    fro = 0.0
    for i in range(k):
        for j in range(k):
            fro += np.abs(g[i, j]) ** 2
    tol = 1e-30 * fro + 1e-300
    for _sweep in range(60):
        off = 0.0
        for i in range(k - 1):
            for j in range(i + 1, k):
                off += np.abs(g[i, j]) ** 2
        if off <= tol:
            break
        for p in range(k - 1):
            for qq in range(p + 1, k):
                apq = g[p, qq]
                rmag = np.abs(apq)
                if rmag == 0.0:
                    continue
                phase = apq / rmag
                app = g[p, p].real
                aqq = g[qq, qq].real
                diff = aqq - app
                if diff == 0.0:
                    t = 1.0
                else:
                    theta = diff / (2.0 * rmag)
                    t = 1.0 / (abs(theta) + np.sqrt(1.0 + theta * theta))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # unitary: columns p,q mixed with the phase folding g[p,q] real
                colp = g[:, p].copy()
                colq = g[:, qq].copy()
                g[:, p] = c * colp - s * np.conj(phase) * colq
                g[:, qq] = s * phase * colp + c * colq
                rowp = g[p, :].copy()
                rowq = g[qq, :].copy()
                g[p, :] = c * rowp - s * phase * rowq
                g[qq, :] = s * np.conj(phase) * rowp + c * rowq
    vals = np.empty(k)
    for i in range(k):
        vals[i] = g[i, i].real
    return vals


def opnorm_batch(blocks) -> np.ndarray:
    """Largest singular values of a stack of k x k blocks, shape (m, k, k).

    k = 1 and k = 2 use closed forms (the estimator hot path); larger blocks
    fall back to the Jacobi kernel per block.
    """
    blocks = np.ascontiguousarray(blocks, dtype=np.complex128)
    k = blocks.shape[-1]
    if k == 1:
        return np.abs(blocks[:, 0, 0])
    if k == 2:
        # singular values of a 2x2: s^2 = (f +- sqrt(f^2 - 4 |det|^2)) / 2
        f = np.sum(np.abs(blocks) ** 2, axis=(1, 2))
        det = blocks[:, 0, 0] * blocks[:, 1, 1] - blocks[:, 0, 1] * blocks[:, 1, 0]
        disc = np.sqrt(np.maximum(f * f - 4.0 * np.abs(det) ** 2, 0.0))
        return np.sqrt(np.maximum((f + disc) / 2.0, 0.0))
    return np.array([opnorm(b) for b in blocks])


def opnorm(m) -> float:
    """Largest singular value of a k x k complex block (k <= 16).

    Computed as sqrt(lambda_max(M* M)) with the cyclic Jacobi kernel.
    """
    m = np.ascontiguousarray(m, dtype=np.complex128)
    if m.shape[0] != m.shape[1]:
        raise ValueError("opnorm expects a square block")
    if m.shape[0] > 16:
        raise ValueError("opnorm is sized for blocks with k <= 16")
    if m.shape[0] == 1:
        return float(np.abs(m[0, 0]))
    gram = np.conj(m.T) @ m
    vals = jacobi_eigvals(gram)
    top = float(np.max(vals))
    if top <= 0.0:
        return 0.0
    return float(np.sqrt(top))
