"""Finite-difference Hessian of J over the discretized field, with spectral classification."""

import csv
import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .dynamics import final_propagators, propagate
from .errors import StepTooSmall
from .objectives import evaluate, gradient

MAX_DENSE_VARIABLES = 1024
CLASSIFY_RTOL = 1e-6
NOISE_SAMPLES = 32
NOISE_PROBE = 1e-9
NOISE_SAFETY = 3.0
_BATCH = 2048


class Classification(str, Enum):
    NEGATIVE_SEMIDEFINITE = "NegativeSemidefinite"
    POSITIVE_SEMIDEFINITE = "PositiveSemidefinite"
    INDEFINITE = "Indefinite"
    ZERO = "Zero"


@dataclass
class HessianReport:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    classification: Classification
    tolerance: float
    step: float
    asymmetry: float
    noise_floor: float = 0.0

    def save(self, path):
        """``path`` gets the eigenvalue CSV, ``path.json`` the summary."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "eigenvalue"])
            for k, lam in enumerate(self.eigenvalues):
                w.writerow([k, repr(float(lam))])
        summary = {"classification": self.classification.value, "tolerance": self.tolerance,
                   "step": self.step, "noise_floor": self.noise_floor,
                   "min_eigenvalue": float(self.eigenvalues[0]),
                   "max_eigenvalue": float(self.eigenvalues[-1])}
        Path(str(path) + ".json").write_text(json.dumps(summary, indent=1) + "\n")


def classify(eigenvalues, rtol=CLASSIFY_RTOL, floor=0.0):
    """Sign pattern of a symmetric spectrum; returns ``(classification, tolerance)``.

    ``floor`` raises the tolerance to the eigenvalue noise level of a
    finite-difference matrix.
    """
    lam = np.asarray(eigenvalues)
    tol = max(rtol * max(1.0, float(np.abs(lam).max())), floor)
    if np.all(np.abs(lam) <= tol):
        return Classification.ZERO, tol
    if lam.min() < -tol and lam.max() > tol:
        return Classification.INDEFINITE, tol
    if lam.max() <= tol:
        return Classification.NEGATIVE_SEMIDEFINITE, tol
    return Classification.POSITIVE_SEMIDEFINITE, tol


def fd_hessian(fun_batch, x0, step):
    """Central second differences of a scalar function.

    ``fun_batch`` maps an ``(B, n)`` array of points to ``B`` values. Entry
    ``(a, b)`` is [f(+a+b) - f(+a-b) - f(-a+b) + f(-a-b)] / (4 step^2); on the
    diagonal this is the usual three-point stencil with spacing ``2*step``.
    The stencil is symmetric in ``(a, b)``, so only the upper triangle is
    evaluated and mirrored.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    pairs = [(a, b) for a in range(n) for b in range(n) if a <= b]
    signs = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
    weights = np.array([1.0, -1.0, -1.0, 1.0])
    h = np.zeros((n, n))
    for start in range(0, len(pairs), _BATCH // 4):
        chunk = pairs[start:start + _BATCH // 4]
        pts = np.repeat(x0[None], 4 * len(chunk), axis=0)
        for m, (a, b) in enumerate(chunk):
            for s in range(4):
                pts[4 * m + s, a] += signs[s, 0] * step
                pts[4 * m + s, b] += signs[s, 1] * step
        vals = np.asarray(fun_batch(pts)).reshape(len(chunk), 4)
        est = vals @ weights / (4 * step * step)
        for m, (a, b) in enumerate(chunk):
            h[a, b] = est[m]
    iu = np.triu_indices(n, 1)
    h[(iu[1], iu[0])] = h[iu]
    return h


def rounding_floor(fun_batch, x0, step, samples=NOISE_SAMPLES):
    """Eigenvalue noise level of the stencil caused by rounding in f.

    The second difference f(x+d) + f(x-d) - 2 f(x) with a tiny ``d`` has
    a true value of order d^2 and is otherwise pure rounding; its spread gives
    the per-evaluation error, which is propagated through the four-point
    stencil and a random-matrix bound sqrt(n) on the spectrum.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    idx = np.unique(np.linspace(0, n - 1, min(n, samples)).astype(int))
    d = NOISE_PROBE * max(1.0, float(np.abs(x0).max()))
    pts = np.repeat(x0[None], 2 * idx.size + 1, axis=0)
    pts[np.arange(idx.size), idx] += d
    pts[idx.size + np.arange(idx.size), idx] -= d
    v = np.asarray(fun_batch(pts))
    r = v[:idx.size] + v[idx.size:2 * idx.size] - 2 * v[-1]
    eps_f = max(float(np.sqrt(np.mean(r**2) / 6)), np.finfo(float).eps * abs(float(v[-1])))
    entry = eps_f / (2 * step * step)
    return NOISE_SAFETY * 2 * entry * np.sqrt(n)


def report_from_matrix(raw, step, floor=0.0):
    scale = max(np.abs(raw).max(), 1e-300)
    asym = float(np.abs(raw - raw.T).max() / scale)
    sym = 0.5 * (raw + raw.T)
    lam = np.linalg.eigvalsh(sym)
    cls, tol = classify(lam, floor=floor)
    return HessianReport(sym, lam, cls, tol, step, asym, floor)


def hessian_at(problem, fld, step=1e-4, force=False, objective_fn=None):
    """Dense finite-difference Hessian of J at ``fld``.

    The classification tolerance is 1e-6 * max(1, |lambda|_max), raised when
    necessary to the measured rounding-noise floor of the stencil (see
    :func:`rounding_floor`); the value used is reported.

    ``objective_fn`` (batch of ``(B, K, L)`` fields -> ``B`` values) replaces
    the problem objective; it is a hook for checking the stencil on known
    quadratics.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    if 4 * step * step == 0.0:
        raise StepTooSmall(f"step {step} underflows the 1/(4 step^2) stencil weight")
    shape = fld.values.shape
    n = fld.values.size
    if n > MAX_DENSE_VARIABLES and not force:
        raise ValueError(f"{n} variables exceed {MAX_DENSE_VARIABLES}; pass force=True")
    sys, obj = problem.system, problem.objective

    if objective_fn is None:
        def objective_fn(batch):
            us = final_propagators(sys, batch, fld.t_final)
            return np.array([evaluate(obj, u) for u in us])

    def fun_batch(pts):
        return objective_fn(pts.reshape((-1,) + shape))

    x0 = fld.values.ravel()
    raw = fd_hessian(fun_batch, x0, step)
    if not np.any(raw):
        g = gradient(obj, sys, propagate(sys, fld), fld.dt)
        if np.any(g):
            raise StepTooSmall(f"all second differences vanished at step {step}")
    return report_from_matrix(raw, step, rounding_floor(fun_batch, x0, step))
