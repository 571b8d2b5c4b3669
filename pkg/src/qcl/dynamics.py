"""Piecewise-constant Schroedinger propagation (atomic units, hbar = 1).

The Hamiltonian on slice ``l`` (time interval ``(t_{l-1}, t_l]``) is

    H_l = H0 + sign * sum_i eps[i, l] * H_i

``sign = -1`` gives the electric-dipole form ``H0 - mu eps(t)``; ``sign = +1``
is used where a problem writes its couplings additively. The sign is carried
explicitly so gradients never have to guess it.
"""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from . import linalg
from .errors import ConvergenceFailure, DimensionMismatch, NonFiniteField


@dataclass(frozen=True)
class Transition:
    j: int
    k: int
    gap: float
    couplings: tuple


@dataclass(frozen=True, eq=False)
class QuantumSystem:
    """Field-free Hamiltonian ``h0`` plus ``K`` Hermitian coupling operators."""

    h0: np.ndarray
    couplings: np.ndarray
    sign: int = -1
    transition_table: tuple = field(init=False, repr=False)

    def __post_init__(self):
        h0 = linalg.symmetrize(self.h0, "h0")
        n = h0.shape[0]
        if n > linalg.MAX_DIM:
            raise DimensionMismatch(f"dimension {n} exceeds {linalg.MAX_DIM}")
        ops = np.asarray(self.couplings, dtype=np.complex128)
        if ops.ndim == 2:
            ops = ops[None]
        if ops.ndim != 3 or ops.shape[0] < 1 or ops.shape[1:] != (n, n):
            raise DimensionMismatch(f"couplings must be K x {n} x {n}, got {ops.shape}")
        ops = np.stack([linalg.symmetrize(op, f"coupling {i}") for i, op in enumerate(ops)])
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")
        h0.setflags(write=False)
        ops.setflags(write=False)
        object.__setattr__(self, "h0", h0)
        object.__setattr__(self, "couplings", ops)
        object.__setattr__(self, "transition_table", _transition_table(h0, ops))

    @property
    def n(self):
        return self.h0.shape[0]

    @property
    def k(self):
        return self.couplings.shape[0]

    def energies(self):
        return self.eigenbasis()[0]

    def eigenbasis(self):
        """Energies and eigenvectors of ``h0``; the identity basis when ``h0`` is diagonal."""
        return _eigenbasis(self.h0)

    def hamiltonian(self, eps):
        """Instantaneous Hamiltonian for the K channel amplitudes ``eps``."""
        eps = np.asarray(eps, dtype=float).reshape(self.k)
        return self.h0 + self.sign * np.tensordot(eps, self.couplings, axes=1)


def _eigenbasis(h0):
    if np.count_nonzero(h0 - np.diag(np.diag(h0))) == 0:
        return np.diag(h0).real.copy(), np.eye(h0.shape[0], dtype=np.complex128)
    d = linalg.hermitian_eig(h0)
    return d.values, d.vectors


def _transition_table(h0, ops):
    energies, vecs = _eigenbasis(h0)
    rotated = [vecs.conj().T @ op @ vecs for op in ops]
    table = []
    n = h0.shape[0]
    for j in range(n):
        for k in range(j + 1, n):
            table.append(
                Transition(j, k, float(abs(energies[j] - energies[k])),
                           tuple(float(abs(op[j, k])) for op in rotated)))
    return tuple(table)


@dataclass(frozen=True, eq=False)
class ControlField:
    """``K x L`` real amplitudes, piecewise constant on ``L`` equal slices of ``[0, T]``."""

    values: np.ndarray
    t_final: float

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim == 1:
            v = v[None]
        if v.ndim != 2 or v.shape[1] < 1:
            raise DimensionMismatch(f"field values must be K x L, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise NonFiniteField("field contains non-finite values")
        if not (np.isfinite(self.t_final) and self.t_final > 0):
            raise ValueError("t_final must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "t_final", float(self.t_final))

    @property
    def k(self):
        return self.values.shape[0]

    @property
    def l(self):
        return self.values.shape[1]

    @property
    def dt(self):
        return self.t_final / self.l

    def times(self):
        """Right endpoints ``t_l = l * dt``, ``l = 1..L``."""
        return self.dt * np.arange(1, self.l + 1)

    def with_values(self, values):
        return ControlField(values, self.t_final)

    @classmethod
    def zeros(cls, k, l, t_final):
        return cls(np.zeros((k, l)), t_final)

    def __eq__(self, other):
        return (isinstance(other, ControlField) and self.t_final == other.t_final
                and np.array_equal(self.values, other.values))

    def save(self, path):
        """Write ``path`` (CSV ``t_index,channel,epsilon``) and ``path.json`` ({T, L, K})."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_index", "channel", "epsilon"])
            for c in range(self.k):
                for l in range(self.l):
                    w.writerow([l, c, repr(float(self.values[c, l]))])
        meta = {"T": repr(self.t_final), "L": self.l, "K": self.k}
        Path(str(path) + ".json").write_text(json.dumps(meta, indent=1) + "\n")

    @classmethod
    def load(cls, path):
        path = Path(path)
        meta = json.loads(Path(str(path) + ".json").read_text())
        values = np.full((meta["K"], meta["L"]), np.nan)
        with path.open(newline="") as fh:
            for row in csv.DictReader(fh):
                values[int(row["channel"]), int(row["t_index"])] = float(row["epsilon"])
        if np.isnan(values).any():
            raise ValueError(f"{path} does not cover every (channel, t_index) cell")
        return cls(values, float(meta["T"]))


@dataclass(frozen=True, eq=False)
class PropagationRecord:
    """``u[l] = U(t_l)`` for ``l = 0..L`` and ``mu_t[i, l-1] = U(t_l)^dag H_i U(t_l)``."""

    u: np.ndarray
    mu_t: np.ndarray

    @property
    def u_final(self):
        return self.u[-1]


# -- compiled kernels ---------------------------------------------------------


@njit(cache=True)
def _slice_propagator(h0, ops, sign, values, l, dt, hbuf, w, v, ul):
    n = h0.shape[0]
    for a in range(n):
        for b in range(n):
            acc = h0[a, b]
            for i in range(ops.shape[0]):
                acc += sign * values[i, l] * ops[i, a, b]
            hbuf[a, b] = acc
    if linalg._jacobi_eigh(hbuf, w, v, linalg.MAX_SWEEPS) < 0:
        return False
    linalg._expm_from_eig(w, v, -dt, ul)
    return True


@njit(cache=True)
def _matmul_into(a, b, out):
    n = a.shape[0]
    for j in range(n):
        for k in range(n):
            acc = 0j
            for m in range(n):
                acc += a[j, m] * b[m, k]
            out[j, k] = acc


@njit(cache=True)
def _propagate_kernel(h0, ops, sign, values, dt, u, mu_t):
    n = h0.shape[0]
    nl = values.shape[1]
    hbuf = np.empty((n, n), dtype=np.complex128)
    ul = np.empty((n, n), dtype=np.complex128)
    tmp = np.empty((n, n), dtype=np.complex128)
    w = np.empty(n)
    v = np.empty((n, n), dtype=np.complex128)
    for a in range(n):
        for b in range(n):
            u[0, a, b] = 0.0
        u[0, a, a] = 1.0
    for l in range(nl):
        if not _slice_propagator(h0, ops, sign, values, l, dt, hbuf, w, v, ul):
            return False
        _matmul_into(ul, u[l], u[l + 1])
        # mu_t[i, l] = U^dag H_i U with U = u[l + 1]
        for i in range(ops.shape[0]):
            _matmul_into(ops[i], u[l + 1], tmp)
            for a in range(n):
                for b in range(n):
                    acc = 0j
                    for m in range(n):
                        acc += u[l + 1, m, a].conjugate() * tmp[m, b]
                    mu_t[i, l, a, b] = acc
    return True


@njit(cache=True)
def _final_kernel(h0, ops, sign, values, dt, out):
    n = h0.shape[0]
    hbuf = np.empty((n, n), dtype=np.complex128)
    ul = np.empty((n, n), dtype=np.complex128)
    cur = np.empty((n, n), dtype=np.complex128)
    w = np.empty(n)
    v = np.empty((n, n), dtype=np.complex128)
    for a in range(n):
        for b in range(n):
            cur[a, b] = 0.0
        cur[a, a] = 1.0
    for l in range(values.shape[1]):
        if not _slice_propagator(h0, ops, sign, values, l, dt, hbuf, w, v, ul):
            return False
        _matmul_into(ul, cur, out)
        cur[:, :] = out
    out[:, :] = cur
    return True


@njit(cache=True)
def _final_batch_kernel(h0, ops, sign, batch, dt, out):
    for b in range(batch.shape[0]):
        if not _final_kernel(h0, ops, sign, batch[b], dt, out[b]):
            return False
    return True


# -- public API ---------------------------------------------------------------


def _check(sys, fld):
    if fld.k != sys.k:
        raise DimensionMismatch(f"field has {fld.k} channels, system has {sys.k}")


def propagate(sys, fld):
    """Propagators at every slice endpoint plus the Heisenberg-picture couplings."""
    _check(sys, fld)
    n, nl = sys.n, fld.l
    u = np.empty((nl + 1, n, n), dtype=np.complex128)
    mu_t = np.empty((sys.k, nl, n, n), dtype=np.complex128)
    if not _propagate_kernel(sys.h0, sys.couplings, float(sys.sign), fld.values, fld.dt, u, mu_t):
        raise ConvergenceFailure("slice eigendecomposition did not converge")
    u.setflags(write=False)
    mu_t.setflags(write=False)
    return PropagationRecord(u=u, mu_t=mu_t)


def final_propagator(sys, fld):
    """``U(T)`` only, without keeping intermediate propagators."""
    _check(sys, fld)
    out = np.empty((sys.n, sys.n), dtype=np.complex128)
    if not _final_kernel(sys.h0, sys.couplings, float(sys.sign), fld.values, fld.dt, out):
        raise ConvergenceFailure("slice eigendecomposition did not converge")
    return out


def final_propagators(sys, batch, t_final):
    """``U(T)`` for a stack of fields ``batch`` of shape ``(B, K, L)``."""
    batch = np.ascontiguousarray(batch, dtype=np.float64)
    if batch.ndim != 3 or batch.shape[1] != sys.k:
        raise DimensionMismatch(f"batch must be B x {sys.k} x L, got {batch.shape}")
    if not np.all(np.isfinite(batch)):
        raise NonFiniteField("batch contains non-finite values")
    out = np.empty((batch.shape[0], sys.n, sys.n), dtype=np.complex128)
    dt = float(t_final) / batch.shape[2]
    if not _final_batch_kernel(sys.h0, sys.couplings, float(sys.sign), batch, dt, out):
        raise ConvergenceFailure("slice eigendecomposition did not converge")
    return out
