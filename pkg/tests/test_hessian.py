import json

import numpy as np
import pytest

from qcl.dynamics import ControlField, final_propagator
from qcl.errors import StepTooSmall
from qcl.fields import synthesize
from qcl.hessian import Classification, classify, fd_hessian, hessian_at
from qcl.objectives import evaluate
from qcl.problems import problem_a, problem_f

C = Classification


@pytest.mark.parametrize("eigs, expected", [
    ([-3.0, -1.0, 0.0], C.NEGATIVE_SEMIDEFINITE),
    ([0.0, 1e-9, 2.0], C.POSITIVE_SEMIDEFINITE),
    ([-1.0, 0.5], C.INDEFINITE),
    ([0.0, 0.0], C.ZERO),
    ([-1e-8, 1e-8], C.ZERO),
    ([-5.0, 1e-7], C.NEGATIVE_SEMIDEFINITE),
])
def test_classify(eigs, expected):
    assert classify(np.array(eigs))[0] == expected


def test_classify_tolerance_scales():
    assert classify(np.array([-100.0, 0.0]))[1] == pytest.approx(1e-4)
    assert classify(np.array([-0.5, 0.0]))[1] == pytest.approx(1e-6)


def test_fd_hessian_quadratic_exact(rng):
    a = rng.normal(size=(6, 6))
    q = a + a.T
    h = fd_hessian(lambda pts: 0.5 * np.einsum("bi,ij,bj->b", pts, q, pts), rng.normal(size=6), 1e-3)
    np.testing.assert_allclose(h, q, atol=1e-8)


def test_synthetic_hook_negative_definite():
    p = problem_a(l_slices=16)
    fld = p.zero_field()
    dt = fld.dt
    rep = hessian_at(p, fld, objective_fn=lambda b: -(b ** 2).sum(axis=(1, 2)) * dt)
    np.testing.assert_allclose(rep.matrix, -2 * dt * np.eye(16), atol=1e-9)
    assert rep.classification == C.NEGATIVE_SEMIDEFINITE
    assert rep.eigenvalues.max() < -rep.tolerance


@pytest.mark.parametrize("step", [1e-3, 1e-4, 1e-5])
def test_problem_a_zero_field_step_robust(step):
    p = problem_a(l_slices=32)
    rep = hessian_at(p, p.zero_field(), step=step)
    assert rep.classification == C.NEGATIVE_SEMIDEFINITE
    assert rep.asymmetry <= 1e-6


def test_problem_f_zero_field_indefinite():
    p = problem_f(0, l_slices=32)
    rep = hessian_at(p, p.zero_field())
    assert rep.classification == C.INDEFINITE


def test_negative_direction_decreases_j():
    p = problem_a(l_slices=32)
    rep = hessian_at(p, p.zero_field())
    w, v = np.linalg.eigh(rep.matrix)
    direction = v[:, 0].reshape(1, -1)
    j = evaluate(p.objective, final_propagator(p.system, ControlField(1e-2 * direction, p.t_final)))
    assert j < p.trap_value


def test_dense_limit_and_force():
    p = problem_a(l_slices=1025)
    with pytest.raises(ValueError):
        hessian_at(p, p.zero_field())
    small = problem_a(l_slices=4)
    assert hessian_at(small, small.zero_field(), force=True).matrix.shape == (4, 4)


def test_step_too_small():
    p = problem_a(l_slices=8)
    fld = synthesize(p.init_spec(0, 1.0), p.system, p.t_final, p.l_slices)
    with pytest.raises(StepTooSmall):
        hessian_at(p, fld, step=1e-30)
    with pytest.raises(StepTooSmall):
        hessian_at(p, fld, step=1e-200)
    with pytest.raises(ValueError):
        hessian_at(p, fld, step=0.0)


def test_report_save(tmp_path):
    p = problem_a(l_slices=8)
    rep = hessian_at(p, p.zero_field())
    rep.save(tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "index,eigenvalue" and len(lines) == 9
    doc = json.loads((tmp_path / "h.csv.json").read_text())
    assert doc["classification"] == "NegativeSemidefinite"
    assert doc["step"] == 1e-4
