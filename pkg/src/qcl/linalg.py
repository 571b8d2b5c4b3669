"""Dense complex matrix kernel for small Hermitian generators.

Matrices are plain ``numpy`` complex arrays indexed ``a[j, k]`` (0-based);
level ``|j+1>`` of the physics notation is row/column ``j``.

Eigendecompositions use cyclic complex Jacobi rotations compiled with numba.
For the dimensions this package deals with (N <= 16, typically 3..8) this is
faster than per-slice LAPACK calls and it is exactly reentrant.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConvergenceFailure, DimensionMismatch, NotHermitian

HERMITIAN_RTOL = 1e-12
MAX_SWEEPS = 60
MAX_DIM = 16


@dataclass(frozen=True)
class EigenDecomposition:
    """Ascending real eigenvalues and the unitary matrix of column eigenvectors."""

    values: np.ndarray
    vectors: np.ndarray

    def reconstruct(self):
        v = self.vectors
        return (v * self.values) @ v.conj().T


def as_cmatrix(a, name="matrix"):
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def hermitian_residual(a):
    """max |a_jk - conj(a_kj)| relative to max |a| (0 for the zero matrix)."""
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(a - a.conj().T)) / scale)


def symmetrize(a, name="matrix", rtol=HERMITIAN_RTOL):
    """Check Hermiticity within ``rtol`` and return ``(a + a^dag)/2``."""
    a = as_cmatrix(a, name)
    res = hermitian_residual(a)
    if res > rtol:
        raise NotHermitian(f"{name} is not Hermitian (relative residual {res:.3e})")
    return 0.5 * (a + a.conj().T)


def is_unitary(u, atol=1e-10):
    u = np.asarray(u)
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= atol)


# -- compiled kernels ---------------------------------------------------------


@njit(cache=True)
def _jacobi_eigh(a, w, v, max_sweeps):
    """Diagonalize the Hermitian matrix ``a`` in place.

    On return ``w`` holds the ascending eigenvalues and the columns of ``v``
    the eigenvectors. Returns the number of sweeps used, or -1 if the
    off-diagonal mass did not vanish within ``max_sweeps``.
    """
    n = a.shape[0]
    for j in range(n):
        for k in range(n):
            v[j, k] = 0.0
        v[j, j] = 1.0
    fro2 = 0.0
    for j in range(n):
        for k in range(n):
            fro2 += a[j, k].real ** 2 + a[j, k].imag ** 2
    thresh = 1e-30 * fro2
    sweeps = 0
    converged = False
    while sweeps <= max_sweeps:
        off = 0.0
        for p in range(n - 1):
            for q in range(p + 1, n):
                off += a[p, q].real ** 2 + a[p, q].imag ** 2
        if off <= thresh or fro2 == 0.0:
            converged = True
            break
        if sweeps == max_sweeps:
            break
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                r = abs(apq)
                if r == 0.0:
                    continue
                e = apq / r
                app = a[p, p].real
                aqq = a[q, q].real
                theta = (aqq - app) / (2.0 * r)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ec = e.conjugate()
                # a <- a J with J = diag-phase(q) * real rotation(p, q)
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * ec * akq
                    a[k, q] = s * akp + c * ec * akq
                # a <- J^dag a
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * e * aqk
                    a[q, k] = s * apk + c * e * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * ec * vkq
                    v[k, q] = s * vkp + c * ec * vkq
    for j in range(n):
        w[j] = a[j, j].real
    # insertion sort, eigenvalues ascending
    for j in range(1, n):
        k = j
        while k > 0 and w[k - 1] > w[k]:
            tmp = w[k]
            w[k] = w[k - 1]
            w[k - 1] = tmp
            for m in range(n):
                tv = v[m, k]
                v[m, k] = v[m, k - 1]
                v[m, k - 1] = tv
            k -= 1
    if converged:
        return sweeps
    return -1


@njit(cache=True)
def _expm_from_eig(w, v, s, out):
    """out = V diag(exp(i s w)) V^dag."""
    n = w.shape[0]
    ph = np.empty(n, dtype=np.complex128)
    for m in range(n):
        ph[m] = np.exp(1j * s * w[m])
    for j in range(n):
        for k in range(n):
            acc = 0j
            for m in range(n):
                acc += v[j, m] * ph[m] * v[k, m].conjugate()
            out[j, k] = acc


@njit(cache=True)
def _expm_i_hermitian_kernel(h, s, out, max_sweeps):
    n = h.shape[0]
    a = h.copy()
    w = np.empty(n)
    v = np.empty((n, n), dtype=np.complex128)
    if _jacobi_eigh(a, w, v, max_sweeps) < 0:
        return False
    _expm_from_eig(w, v, s, out)
    return True


# -- public API ---------------------------------------------------------------


def hermitian_eig(a, max_sweeps=MAX_SWEEPS):
    """Eigendecomposition of a Hermitian matrix.

    Raises :class:`NotHermitian` if ``a`` violates the symmetry tolerance and
    :class:`ConvergenceFailure` if Jacobi sweeps exceed ``max_sweeps``.
    """
    a = symmetrize(a)
    n = a.shape[0]
    w = np.empty(n)
    v = np.empty((n, n), dtype=np.complex128)
    if _jacobi_eigh(a.copy(), w, v, max_sweeps) < 0:
        raise ConvergenceFailure(f"Jacobi iteration did not converge in {max_sweeps} sweeps")
    return EigenDecomposition(values=w, vectors=v)


def expm_i_hermitian(h, s):
    """Return ``exp(i s h)`` for Hermitian ``h``; with ``s = -dt`` this is a propagator step."""
    h = symmetrize(h)
    if not np.isfinite(s):
        raise ValueError("s must be finite")
    out = np.empty_like(h)
    if not _expm_i_hermitian_kernel(h, float(s), out, MAX_SWEEPS):
        raise ConvergenceFailure("Jacobi iteration did not converge")
    return out


def hs_inner(a, b):
    """Hilbert-Schmidt inner product Tr(a^dag b)."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    return complex(np.vdot(a, b))
