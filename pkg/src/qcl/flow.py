"""Gradient flow d eps / ds = gamma * dJ/d eps, integrated with Dormand-Prince 5(4).

One accepted Runge-Kutta step is one search iteration. After every accepted
step the stopping rules are applied in this order: convergence to within
``eta`` of the relevant kinematic bound, monotonicity of J, the iteration cap,
and step-size underflow.

Monotonicity is strict by default: any decrease of J (increase when
minimizing), however small, ends the search as a failure. Near a zero-field
trap the per-step change of J sinks to rounding level, and this is exactly
where such searches stall.
"""

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .dynamics import ControlField, propagate
from .errors import DimensionMismatch, NoValidTransitions
from .fields import rfs
from .objectives import Direction, value_and_gradient

# Dormand & Prince (1980) tableau, 5th-order solution propagated (FSAL)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = np.array(_A[6] + (0.0,))
_B_LOW = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B - _B_LOW

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
ORDER = 5
STEP_CEILING = 1e300


class Status(str, Enum):
    CONVERGED = "Converged"
    FAILED_NON_MONOTONE = "FailedNonMonotone"
    MAX_ITERATIONS = "MaxIterations"
    STEP_UNDERFLOW = "StepUnderflow"


@dataclass(frozen=True)
class FlowOptions:
    tau: float = 1e-8
    gamma: float = None
    eta_override: float = None
    max_iterations: int = 100_000
    initial_step: float = 0.1
    min_step: float = 1e-14
    rtol: float = 0.0
    monotone_atol: float = 0.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.min_step < self.initial_step:
            raise ValueError("need 0 < min_step < initial_step")
        if self.rtol < 0:
            raise ValueError("rtol must be non-negative")
        if self.monotone_atol < 0:
            raise ValueError("monotone_atol must be non-negative")
        if self.gamma is not None and self.gamma == 0:
            raise ValueError("gamma must be nonzero")


@dataclass
class OptimizationResult:
    status: Status
    iterations: int
    j_trace: np.ndarray
    final_field: ControlField
    sigma_opt: float
    j_final: float
    j_initial: float
    eta: float
    rejected: int = 0
    s_final: float = 0.0
    step_sizes: np.ndarray = None
    grad_norms: np.ndarray = None
    s_trace: np.ndarray = None
    max_unitarity_error: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def converged(self):
        return self.status == Status.CONVERGED

    def write_trace(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "s", "J", "step_size", "grad_norm"])
            for n in range(self.iterations):
                w.writerow([n + 1, repr(float(self.s_trace[n])), repr(float(self.j_trace[n])),
                            repr(float(self.step_sizes[n])), repr(float(self.grad_norms[n]))])


def _gamma(opts, objective):
    sign = 1.0 if objective.direction == Direction.MAXIMIZE else -1.0
    if opts.gamma is None:
        return sign
    if math.copysign(1.0, opts.gamma) != sign:
        raise ValueError("gamma sign contradicts the objective direction")
    return float(opts.gamma)


def integrate(fun, y0, s_final, tau, initial_step=0.1, rtol=0.0):
    """Plain Dormand-Prince integration of y' = fun(y) to ``s_final`` (self-test helper)."""
    y = np.asarray(y0, dtype=float).copy()
    k1 = fun(y)
    s, h = 0.0, initial_step
    while s < s_final:
        h = min(h, s_final - s)
        y_new, k7, err = _dp_step(fun, y, k1, h, tau, rtol)
        if err <= 1.0:
            s += h
            y, k1 = y_new, k7
        h *= _factor(err)
    return y


def _factor(err):
    if err == 0.0:
        return MAX_FACTOR
    return min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * err ** (-1.0 / ORDER)))


def _dp_step(fun, y, k1, h, tau, rtol, out=None):
    """One trial step. Returns ``(y_new, k7, scaled_error)``; ``out`` receives fun's extras."""
    ks = [k1]
    for stage in range(1, 6):
        yi = y + h * sum(a * k for a, k in zip(_A[stage], ks) if a != 0.0)
        ks.append(fun(yi))
    y_new = y + h * sum(b * k for b, k in zip(_B[:6], ks) if b != 0.0)
    if out is None:
        k7 = fun(y_new)
    else:
        k7 = fun(y_new, out)
    ks.append(k7)
    err_vec = h * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
    scale = tau if rtol == 0.0 else np.maximum(tau, rtol * np.maximum(np.abs(y), np.abs(y_new)))
    return y_new, k7, float(np.max(np.abs(err_vec) / scale))


def optimize(problem, field0, opts=FlowOptions()):
    """Run the gradient flow from ``field0`` until a terminal condition."""
    sys, obj = problem.system, problem.objective
    if field0.k != sys.k or field0.l != problem.l_slices:
        raise DimensionMismatch(
            f"field is {field0.k}x{field0.l}, problem expects {sys.k}x{problem.l_slices}")
    bounds = problem.bounds(opts.eta_override)
    gamma = _gamma(opts, obj)
    maximize = obj.direction == Direction.MAXIMIZE
    shape = field0.values.shape
    t_final = field0.t_final
    dt = field0.dt

    def evaluate_at(y, out=None):
        fld = ControlField(y.reshape(shape), t_final)
        rec = propagate(sys, fld)
        j, g = value_and_gradient(obj, sys, rec, dt)
        if out is not None:
            u = rec.u_final
            out["j"] = j
            out["gnorm"] = float(np.linalg.norm(g))
            out["unitarity"] = float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))
        return gamma * g.ravel()

    y = field0.values.ravel().copy()
    info = {}
    k1 = evaluate_at(y, info)
    j_prev = j_initial = info["j"]
    worst_unitarity = info["unitarity"]
    h = opts.initial_step
    s = 0.0
    j_trace, steps, gnorms, s_trace = [], [], [], []
    rejected = 0
    status = None

    if bounds.converged(j_initial, obj.direction):
        status = Status.CONVERGED
    while status is None:
        trial = {}
        y_new, k7, err = _dp_step(evaluate_at, y, k1, h, opts.tau, opts.rtol, trial)
        factor = _factor(err)
        if err <= 1.0 and np.all(np.isfinite(y_new)):
            s += h
            j_new = trial["j"]
            j_trace.append(j_new)
            steps.append(h)
            gnorms.append(trial["gnorm"])
            s_trace.append(s)
            worst_unitarity = max(worst_unitarity, trial["unitarity"])
            y, k1 = y_new, k7
            slack = opts.monotone_atol
            decreased = (j_new < j_prev - slack) if maximize else (j_new > j_prev + slack)
            j_prev = j_new
            h = min(h * factor, STEP_CEILING)
            if bounds.converged(j_new, obj.direction):
                status = Status.CONVERGED
            elif decreased:
                status = Status.FAILED_NON_MONOTONE
            elif len(j_trace) >= opts.max_iterations:
                status = Status.MAX_ITERATIONS
            elif h < opts.min_step:
                status = Status.STEP_UNDERFLOW
        else:
            rejected += 1
            h *= factor if np.isfinite(err) else MIN_FACTOR
            if h < opts.min_step:
                status = Status.STEP_UNDERFLOW

    final = ControlField(y.reshape(shape), t_final)
    try:
        sigma = rfs(final, sys)
    except NoValidTransitions:
        sigma = float("nan")
    return OptimizationResult(
        status=status,
        iterations=len(j_trace),
        j_trace=np.array(j_trace),
        final_field=final,
        sigma_opt=sigma,
        j_final=j_prev,
        j_initial=j_initial,
        eta=bounds.eta,
        rejected=rejected,
        s_final=s,
        step_sizes=np.array(steps),
        grad_norms=np.array(gnorms),
        s_trace=np.array(s_trace),
        max_unitarity_error=worst_unitarity,
        meta={"iteration_unit": "accepted Dormand-Prince step", "tau": opts.tau,
              "rtol": opts.rtol, "gamma": gamma, "j_min": bounds.j_min, "j_max": bounds.j_max},
    )
