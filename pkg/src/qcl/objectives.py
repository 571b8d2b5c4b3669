"""Control objectives, their field gradients, and kinematic landscape bounds.

All gradients share one shape: for channel ``i`` and slice ``l``

    dJ/d eps_{i,l} = dt * c * Im Tr[M mu_i(t_l)]

with a kind-specific prefactor ``c`` and matrix ``M`` built from ``U(T)``.
``mu_i(t_l)`` is the Heisenberg-picture coupling at the slice right endpoint,
which makes the result first-order accurate in ``dt`` rather than the exact
derivative of the piecewise-constant propagator.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import linalg
from .errors import DimensionMismatch, InvalidObjective, PhaseIndepSingularity

PHASE_SINGULAR_TOL = 1e-12
ETA_FRACTION = 1e-3


class Kind(str, Enum):
    STATE_TRANSITION = "StateTransition"
    OBSERVABLE = "Observable"
    GATE_PHASE_DEP = "GatePhaseDep"
    GATE_PHASE_INDEP = "GatePhaseIndep"


class Direction(str, Enum):
    MAXIMIZE = "Maximize"
    MINIMIZE = "Minimize"


@dataclass(frozen=True, eq=False)
class Objective:
    """A control objective J(U_T).

    ``scale`` multiplies both value and gradient; it exists so that, e.g.,
    maximizing ``-J_W`` can be compared against minimizing ``J_W``.
    """

    kind: Kind
    direction: Direction
    initial: np.ndarray = None
    final: np.ndarray = None
    rho0: np.ndarray = None
    theta: np.ndarray = None
    target: np.ndarray = None
    scale: float = 1.0

    @property
    def n(self):
        for a in (self.initial, self.rho0, self.target):
            if a is not None:
                return a.shape[0]
        raise InvalidObjective("objective carries no data")

    @property
    def gamma(self):
        return 1.0 if self.direction == Direction.MAXIMIZE else -1.0

    @classmethod
    def state_transition(cls, initial, final, direction=Direction.MAXIMIZE):
        i = _state(initial, "initial state")
        f = _state(final, "final state")
        if i.shape != f.shape:
            raise InvalidObjective("initial and final states differ in dimension")
        return cls(Kind.STATE_TRANSITION, Direction(direction), initial=i, final=f)

    @classmethod
    def observable(cls, rho0, theta, direction=Direction.MAXIMIZE):
        try:
            rho0 = linalg.symmetrize(rho0, "rho0")
            theta = linalg.symmetrize(theta, "theta")
        except (ValueError, DimensionMismatch) as exc:
            raise InvalidObjective(str(exc)) from exc
        if rho0.shape != theta.shape:
            raise InvalidObjective("rho0 and theta differ in dimension")
        if abs(np.trace(rho0) - 1.0) > 1e-10:
            raise InvalidObjective("rho0 must have unit trace")
        if np.linalg.eigvalsh(rho0).min() < -1e-10:
            raise InvalidObjective("rho0 must be positive semidefinite")
        for a in (rho0, theta):
            a.setflags(write=False)
        return cls(Kind.OBSERVABLE, Direction(direction), rho0=rho0, theta=theta)

    @classmethod
    def gate(cls, target, phase_independent=False, direction=Direction.MINIMIZE):
        w = np.array(target, dtype=np.complex128)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise InvalidObjective(f"target gate must be square, got {w.shape}")
        if not linalg.is_unitary(w, 1e-10):
            raise InvalidObjective("target gate is not unitary")
        w.setflags(write=False)
        kind = Kind.GATE_PHASE_INDEP if phase_independent else Kind.GATE_PHASE_DEP
        return cls(kind, Direction(direction), target=w)

    def scaled(self, factor, direction=None):
        """Same objective multiplied by ``factor`` (optionally with a new direction)."""
        return Objective(self.kind, Direction(direction or self.direction), self.initial,
                         self.final, self.rho0, self.theta, self.target,
                         self.scale * float(factor))


def _state(v, name):
    v = np.array(v, dtype=np.complex128).reshape(-1)
    if abs(np.linalg.norm(v) - 1.0) > 1e-10:
        raise InvalidObjective(f"{name} is not normalized")
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class LandscapeBounds:
    j_min: float
    j_max: float
    eta: float

    def converged(self, j, direction):
        if direction == Direction.MAXIMIZE:
            return j >= self.j_max - self.eta
        return j <= self.j_min + self.eta


def _check_dim(obj, n):
    if obj.n != n:
        raise DimensionMismatch(f"objective is {obj.n}-dimensional, propagator is {n}")


def _gate_trace(obj, u_t):
    return complex(np.vdot(obj.target, u_t))


def evaluate(obj, u_t):
    """Objective value for the final propagator ``u_t``."""
    u_t = np.asarray(u_t)
    _check_dim(obj, u_t.shape[0])
    n = u_t.shape[0]
    if obj.kind == Kind.STATE_TRANSITION:
        val = abs(np.vdot(obj.final, u_t @ obj.initial)) ** 2
    elif obj.kind == Kind.OBSERVABLE:
        z = np.trace(u_t.conj().T @ obj.theta @ u_t @ obj.rho0)
        if abs(z.imag) > 1e-10 * max(1.0, np.abs(obj.theta).max()):
            raise ArithmeticError(f"observable expectation has imaginary part {z.imag:.3e}")
        val = z.real
    elif obj.kind == Kind.GATE_PHASE_DEP:
        val = 0.5 - _gate_trace(obj, u_t).real / (2 * n)
    else:
        val = 1.0 - abs(_gate_trace(obj, u_t)) / n
    return obj.scale * float(val)


def _gradient_kernel(obj, u_t):
    """Matrix ``M`` and prefactor ``c`` with dJ/deps(t) = c Im Tr[M mu(t)]."""
    n = u_t.shape[0]
    if obj.kind == Kind.STATE_TRANSITION:
        amp = np.vdot(obj.final, u_t @ obj.initial)
        m = amp * np.outer(u_t.conj().T @ obj.final, obj.initial.conj())
        return m, 2.0
    if obj.kind == Kind.OBSERVABLE:
        return u_t.conj().T @ obj.theta @ u_t @ obj.rho0, 2.0
    wu = obj.target.conj().T @ u_t
    if obj.kind == Kind.GATE_PHASE_DEP:
        return wu, 1.0 / (2 * n)
    z = np.trace(wu)
    if abs(z) < PHASE_SINGULAR_TOL:
        raise PhaseIndepSingularity(f"|Tr(W^dag U)| = {abs(z):.3e}")
    return (np.conj(z) / abs(z)) * wu, 1.0 / n


def gradient(obj, sys, rec, dt):
    """``K x L`` matrix of dJ/d eps_{i,l} = dt * dJ/d eps_i(t_l)."""
    u_t = rec.u_final
    _check_dim(obj, sys.n)
    if rec.mu_t.shape[0] != sys.k or u_t.shape[0] != sys.n:
        raise DimensionMismatch("propagation record does not match the system")
    m, c = _gradient_kernel(obj, u_t)
    # the formulas assume H = H0 - mu eps; a +H_i coupling flips the sign
    pref = -sys.sign * c * dt * obj.scale
    tr = np.einsum("jk,ilkj->il", m, rec.mu_t)
    return pref * tr.imag


def value_and_gradient(obj, sys, rec, dt):
    return evaluate(obj, rec.u_final), gradient(obj, sys, rec, dt)


def kinematic_bounds(obj, eta=None):
    """Global extrema of J over the unitary group and the convergence threshold."""
    if obj.kind == Kind.OBSERVABLE:
        p = np.sort(np.linalg.eigvalsh(obj.rho0))[::-1]
        q = np.sort(np.linalg.eigvalsh(obj.theta))
        lo = float(np.dot(p, q))
        hi = float(np.dot(p, q[::-1]))
    elif obj.kind in (Kind.STATE_TRANSITION, Kind.GATE_PHASE_DEP, Kind.GATE_PHASE_INDEP):
        lo, hi = 0.0, 1.0
    else:
        raise InvalidObjective(f"unknown objective kind {obj.kind!r}")
    lo, hi = sorted((obj.scale * lo, obj.scale * hi))
    if not lo < hi:
        raise InvalidObjective(f"degenerate landscape bounds ({lo}, {hi})")
    if eta is None:
        eta = ETA_FRACTION * (hi - lo)
    return LandscapeBounds(lo, hi, float(eta))
