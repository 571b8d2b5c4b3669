"""Gradient-flow quantum optimal control on closed N-level systems.

Modules: ``linalg`` (Hermitian eigensolver, exp(-iHt)), ``dynamics``
(piecewise-constant propagation), ``objectives`` (J_P, J_theta, J_W and their
gradients), ``fields`` (initial fields, RFS), ``flow`` (adaptive gradient
flow), ``problems`` (catalog A to G), ``hessian`` and ``harness`` (seeded
campaigns and the ``qcl`` CLI).
"""

from .dynamics import ControlField, QuantumSystem, final_propagator, propagate
from .flow import FlowOptions, OptimizationResult, Status, optimize
from .objectives import Objective, evaluate, gradient, kinematic_bounds
from .problems import ControlProblem, get_problem

__all__ = [
    "ControlField", "ControlProblem", "FlowOptions", "Objective", "OptimizationResult",
    "QuantumSystem", "Status", "evaluate", "final_propagator", "get_problem", "gradient",
    "kinematic_bounds", "optimize", "propagate",
]
