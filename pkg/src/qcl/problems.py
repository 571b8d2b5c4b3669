"""Catalog of control problems with a known (or suspected) singular critical point at zero field.

Labels A-E carry a second-order trap at eps = 0, F a zero-field saddle that
is re-randomized per seed, and G is three Ising-coupled qubits steered to a
QFT gate. Level indices in docstrings are 1-based; arrays are 0-based.
"""

from dataclasses import dataclass, field

import numpy as np

from .dynamics import ControlField, QuantumSystem, final_propagator
from .errors import InvalidT
from .fields import FieldInitSpec
from .objectives import Direction, Objective, evaluate, kinematic_bounds

LABELS = ("A", "B", "C", "D", "E", "F", "G")
TRAP_ATOL = 1e-10
# substream id for problem (F) instance draws, disjoint from field channel streams
PROBLEM_F_STREAM = 1_000_003


@dataclass(frozen=True, eq=False)
class ControlProblem:
    label: str
    system: QuantumSystem
    objective: Objective
    t_final: float
    l_slices: int
    trap_value: float = None
    notes: tuple = ()
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.t_final > 0 and self.l_slices > 0):
            raise ValueError("T and L must be positive")
        if self.trap_value is not None:
            j0 = self.zero_field_value()
            if abs(j0 - self.trap_value) > TRAP_ATOL:
                raise AssertionError(
                    f"problem {self.label}: zero-field value {j0!r} != trap value {self.trap_value!r}")

    @property
    def uses_rfs(self):
        """Whether initial fields are scaled by relative field strength."""
        return self.label != "G"

    def zero_field(self):
        return ControlField.zeros(self.system.k, self.l_slices, self.t_final)

    def zero_field_value(self):
        return evaluate(self.objective, final_propagator(self.system, self.zero_field()))

    def bounds(self, eta=None):
        return kinematic_bounds(self.objective, eta)

    def init_spec(self, seed, sigma0=None):
        """Initial-field recipe for this problem."""
        if self.uses_rfs:
            return FieldInitSpec(seed=seed, target_sigma0=sigma0)
        # RFS undefined for G's degenerate spectrum: unit peak per channel, omega in [0, 2]
        return FieldInitSpec(seed=seed, peak_amplitude=1.0, omega_range=(0.0, 2.0))

    def describe(self):
        d = {
            "label": self.label,
            "N": self.system.n,
            "K": self.system.k,
            "T": self.t_final,
            "L": self.l_slices,
            "objective": self.objective.kind.value,
            "direction": self.objective.direction.value,
        }
        if self.trap_value is not None:
            d["trap_value"] = self.trap_value
        d["notes"] = list(self.notes)
        return d


def _lambda_system(energies, mu13, mu23):
    mu = np.zeros((3, 3))
    mu[0, 2] = mu[2, 0] = mu13
    mu[1, 2] = mu[2, 1] = mu23
    return QuantumSystem(np.diag(energies), mu, sign=-1)


def _ladder(offdiag, diag=None):
    n = len(offdiag) + 1
    mu = np.zeros((n, n))
    for j, v in enumerate(offdiag):
        mu[j, j + 1] = mu[j + 1, j] = v
    if diag is not None:
        mu[np.diag_indices(n)] = diag
    return mu


def _pure(n, j):
    rho = np.zeros((n, n))
    rho[j, j] = 1.0
    return rho


def problem_a(t_final=8.0, l_slices=255):
    """Three-level Lambda system, maximize <theta> from |1><1|; trap at J = theta_1."""
    sys = _lambda_system([0.0, 10.0, 30.0], 0.5, 1.0)
    obj = Objective.observable(_pure(3, 0), np.diag([0.3, 0.5, 0.2]))
    return ControlProblem("A", sys, obj, t_final, l_slices, trap_value=0.3)


def problem_b(t_final=10.0, l_slices=200):
    """Problem A with the alternative parameter set; trap at J = theta_1 = 0."""
    sys = _lambda_system([0.0, 1.0, 2.5], -1.0, -1.7)
    obj = Objective.observable(_pure(3, 0), np.diag([0.0, 1.0, -5.0]))
    return ControlProblem("B", sys, obj, t_final, l_slices, trap_value=0.0)


def problem_c(t_final=50.0, l_slices=255, vartheta=1.58, varphi=3.08):
    """Four-level ladder, maximize a state transition; trap at cos^2(vartheta - varphi)."""
    sys = QuantumSystem(np.diag([2.0, 4.0, 5.0, 9.0]), _ladder([-1.0, -1.0, -1.0]))
    T = t_final
    init = np.array([np.cos(varphi), 0, 0, np.sin(varphi)])
    final = np.array([np.exp(-2j * T) * np.cos(vartheta), 0, 0, np.exp(-9j * T) * np.sin(vartheta)])
    obj = Objective.state_transition(init, final)
    return ControlProblem("C", sys, obj, t_final, l_slices,
                          trap_value=np.cos(vartheta - varphi) ** 2,
                          params={"vartheta": vartheta, "varphi": varphi})


def problem_d(l_slices=127, alpha=np.pi / 100, b=3.0, vartheta=np.pi / 3):
    """Four-level ladder with near-degenerate |1>,|2>; T locked to pi/alpha."""
    lhs = b**2 * np.cos(vartheta) ** 2
    mid = (2 / np.pi) * np.sin(2 * vartheta)
    if not lhs > mid > 0:
        raise ValueError(f"trap condition violated: {lhs} > {mid} > 0 is false")
    T = np.pi / alpha
    sys = QuantumSystem(np.diag([1 + alpha, 1.0, 2.0, 2.0]), _ladder([-1.0, -1.0, -b]))
    init = np.array([np.exp(1j * vartheta), 0, 0, np.exp(-1j * vartheta)]) / np.sqrt(2)
    final = np.array([np.exp(-1j * (1 + alpha) * T), 0, 0, np.exp(-2j * T)]) / np.sqrt(2)
    obj = Objective.state_transition(init, final)
    return ControlProblem("D", sys, obj, T, l_slices, trap_value=np.cos(vartheta) ** 2,
                          notes=("T = pi/alpha locks the final time to the near-degenerate transition",),
                          params={"alpha": alpha, "b": b, "vartheta": vartheta,
                                  "trap_inequality": (lhs, mid)})


def problem_e(l_slices=511, alpha=np.pi / 1000, vartheta=2 * np.pi / 3, varphi=-3 * np.pi / 4):
    """Three-level ladder with Stark shifts, minimize the phase-dependent gate distance.

    The zero field is critical whenever a*sin(vartheta) = -(b + c)*cos(varphi);
    with the defaults it sits at J_W = 1/2 - cos(vartheta)/6 = 7/12.
    ``vartheta = pi/3`` is also critical and gives J_W = 5/12.
    """
    a, b, c = 5 * np.sqrt(2 / 3), 4.0, 1.0
    T = np.pi / alpha
    h0 = np.diag([1 + alpha, 1.0, 2.0])
    mu = _ladder([-1.0, -1.0], diag=[-a, -b, -c])
    free = np.diag(np.exp(-1j * np.diag(h0) * T))
    w = np.diag([np.exp(-1j * vartheta), -1j * np.exp(-1j * varphi), -1j * np.exp(1j * varphi)]) @ free
    obj = Objective.gate(w, direction=Direction.MINIMIZE)
    trap = 0.5 - np.cos(vartheta) / 6
    return ControlProblem("E", QuantumSystem(h0, mu), obj, T, l_slices, trap_value=trap,
                          notes=("T = pi/alpha locks the final time to the near-degenerate transition",),
                          params={"alpha": alpha, "a": a, "b": b, "c": c,
                                  "vartheta": vartheta, "varphi": varphi})


def problem_f_draws(seed):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(PROBLEM_F_STREAM,))))
    i, j = (int(x) for x in rng.choice(3, size=2, replace=False))
    chi = rng.uniform(0.0, 2 * np.pi)
    chi_p = rng.uniform(0.0, 2 * np.pi)
    while chi_p == chi:
        chi_p = rng.uniform(0.0, 2 * np.pi)
    q = rng.uniform(0.0, 1.0)
    return {"i": i, "j": j, "chi": chi, "chi_prime": chi_p, "q": q}


def problem_f(seed, t_final=8.0, l_slices=255):
    """Random instance of the zero-field saddle problem (no trap predicted)."""
    p = problem_f_draws(seed)
    i, j = p["i"], p["j"]
    (m,) = {0, 1, 2} - {i, j}
    h0 = np.diag([0.0, 10.0, 30.0])
    mu = np.array([[0.0, 1.0, 0.5], [1.0, 0.0, 1.0], [0.5, 1.0, 0.0]])
    e = np.eye(3)

    def psi(chi, sgn):
        return (e[i] + sgn * np.exp(1j * chi) * e[j]) / np.sqrt(2)

    plus, minus, plus_p = psi(p["chi"], 1), psi(p["chi"], -1), psi(p["chi_prime"], 1)
    q_op = p["q"] * np.outer(e[m], e[m]) + np.outer(minus, minus.conj())
    free = np.diag(np.exp(-1j * np.diag(h0) * t_final))
    theta = free @ (np.outer(plus_p, plus_p.conj()) + q_op) @ free.conj().T
    obj = Objective.observable(np.outer(plus, plus.conj()), theta)
    sys = QuantumSystem(h0, mu)
    j0 = evaluate(obj, final_propagator(sys, ControlField.zeros(1, l_slices, t_final)))
    return ControlProblem("F", sys, obj, t_final, l_slices, trap_value=j0,
                          params={**p, "seed": seed})


PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def pauli_string(s):
    out = np.ones((1, 1), dtype=complex)
    for ch in s:
        out = np.kron(out, PAULI[ch])
    return out


def qft_gate(n=8, m=0, one_based=False):
    """W_jk = exp(2 pi i (m + 1/4)/n) xi^(jk) / sqrt(n), xi = exp(-2 pi i / n)."""
    idx = np.arange(1, n + 1) if one_based else np.arange(n)
    xi = np.exp(-2j * np.pi / n)
    phase = np.exp(2j * np.pi * (m + 0.25) / n)
    return phase * xi ** np.outer(idx, idx) / np.sqrt(n)


def problem_g(t_final=8.0, l_slices=140, one_based_qft=False):
    """Three Ising-coupled qubits with X/Y drives on each qubit; minimize phase-free QFT distance."""
    if not (np.isfinite(t_final) and t_final > 0):
        raise InvalidT(f"T must be positive, got {t_final}")
    h0 = 0.5 * (pauli_string("ZZI") + pauli_string("IZZ"))
    drives = ["XII", "YII", "IXI", "IYI", "IIX", "IIY"]
    ops = np.stack([0.5 * pauli_string(s) for s in drives])
    sys = QuantumSystem(h0, ops, sign=+1)
    obj = Objective.gate(qft_gate(one_based=one_based_qft), phase_independent=True)
    return ControlProblem("G", sys, obj, float(t_final), l_slices,
                          notes=("initial fields: unit peak amplitude, omega in [0, 2]",),
                          params={"qft_index_base": 1 if one_based_qft else 0})


def get_problem(label, seed=0, t_final=None, l_slices=None):
    """Construct a catalog problem by label; ``seed`` only matters for F."""
    label = label.upper()
    kw = {}
    if l_slices is not None:
        kw["l_slices"] = l_slices
    if label in ("D", "E"):
        if t_final is not None:
            raise InvalidT(f"problem {label} has T locked to pi/alpha")
    elif t_final is not None:
        kw["t_final"] = t_final
    if label == "A":
        return problem_a(**kw)
    if label == "B":
        return problem_b(**kw)
    if label == "C":
        return problem_c(**kw)
    if label == "D":
        return problem_d(**kw)
    if label == "E":
        return problem_e(**kw)
    if label == "F":
        return problem_f(seed, **kw)
    if label == "G":
        return problem_g(**kw)
    raise ValueError(f"unknown problem label {label!r}")


def catalog():
    """JSON-ready listing of all problems (F shown for seed 0)."""
    return [get_problem(lab).describe() for lab in LABELS]
