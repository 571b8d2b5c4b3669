import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from qcl.dynamics import ControlField, QuantumSystem, final_propagator, final_propagators, propagate
from qcl.errors import DimensionMismatch, NonFiniteField, NotHermitian
from qcl.problems import problem_a, problem_g

from conftest import random_hermitian

A_UT_ZERO = np.diag(np.exp(-1j * np.array([0.0, 80.0, 240.0])))


def brute_force(sys, fld):
    """Slice-by-slice scipy expm, the independent propagation oracle."""
    u = np.eye(sys.n, dtype=complex)
    out = [u]
    for l in range(fld.l):
        h = sys.hamiltonian(fld.values[:, l])
        u = scipy.linalg.expm(-1j * fld.dt * h) @ u
        out.append(u)
    return np.array(out)


def small_system(rng, n=3, k=2, sign=-1):
    h0 = np.diag(np.sort(rng.uniform(0, 5, n)))
    return QuantumSystem(h0, np.stack([random_hermitian(rng, n) for _ in range(k)]), sign=sign)


def test_zero_field_problem_a():
    p = problem_a()
    u = final_propagator(p.system, p.zero_field())
    np.testing.assert_allclose(u, A_UT_ZERO, atol=1e-12)


def test_zero_field_mu_diagonal_vanishes():
    p = problem_a()
    rec = propagate(p.system, p.zero_field())
    diag = np.einsum("ilkk->ilk", rec.mu_t)
    assert np.abs(diag).max() == 0.0


@pytest.mark.parametrize("sign", [-1, 1])
def test_propagate_matches_expm_oracle(rng, sign):
    sys = small_system(rng, sign=sign)
    fld = ControlField(rng.normal(size=(2, 17)), 2.5)
    rec = propagate(sys, fld)
    ref = brute_force(sys, fld)
    np.testing.assert_allclose(rec.u, ref, atol=1e-12)
    for i in range(2):
        for l in range(fld.l):
            u = ref[l + 1]
            np.testing.assert_allclose(rec.mu_t[i, l], u.conj().T @ sys.couplings[i] @ u, atol=1e-12)


def test_final_propagator_bit_identical_to_propagate(rng):
    sys = small_system(rng)
    fld = ControlField(rng.normal(size=(2, 40)), 3.0)
    assert np.array_equal(final_propagator(sys, fld), propagate(sys, fld).u_final)
    assert np.array_equal(final_propagator(sys, fld), final_propagator(sys, fld))


def test_batch_matches_single(rng):
    sys = small_system(rng)
    batch = rng.normal(size=(5, 2, 12))
    us = final_propagators(sys, batch, 1.5)
    for b in range(5):
        assert np.array_equal(us[b], final_propagator(sys, ControlField(batch[b], 1.5)))


def test_composition(rng):
    sys = small_system(rng)
    vals = rng.normal(size=(2, 20))
    whole = final_propagator(sys, ControlField(vals, 4.0))
    first = final_propagator(sys, ControlField(vals[:, :10], 2.0))
    second = final_propagator(sys, ControlField(vals[:, 10:], 2.0))
    assert np.abs(second @ first - whole).max() < 1e-10


def test_unitarity_and_hermitian_mu(rng):
    p = problem_g()
    fld = ControlField(rng.normal(size=(6, p.l_slices)), p.t_final)
    rec = propagate(p.system, fld)
    eye = np.eye(8)
    assert max(np.abs(u.conj().T @ u - eye).max() for u in rec.u) < 1e-10
    assert np.abs(rec.mu_t - rec.mu_t.conj().transpose(0, 1, 3, 2)).max() < 1e-10


def test_norm_conservation(rng):
    sys = small_system(rng, n=4, k=1)
    fld = ControlField(rng.normal(size=(1, 64)), 5.0)
    rec = propagate(sys, fld)
    psi0 = np.ones(4) / 2
    norms = np.linalg.norm(rec.u @ psi0, axis=1)
    assert np.abs(norms - 1).max() < 1e-12


def test_trotter_convergence():
    """Refining L for a smooth field: U_T differences shrink at least like dt.

    The envelope vanishes at both ends, so the first-order endpoint term
    cancels and the observed rate is close to dt**2.
    """
    p = problem_a()

    def field(l):
        t = (np.arange(l) + 1) * p.t_final / l
        return ControlField(0.5 * np.sin(10 * t) * np.exp(-((t - 4) ** 2)), p.t_final)

    us = [final_propagator(p.system, field(l)) for l in (128, 256, 512, 1024)]
    diffs = [np.linalg.norm(us[k] - us[k + 1]) for k in range(3)]
    assert diffs[0] > diffs[1] > diffs[2]
    assert diffs[0] / diffs[1] > 1.6 and diffs[1] / diffs[2] > 1.6


def test_zero_field_observable_time_independent():
    p = problem_a()
    rec = propagate(p.system, p.zero_field())
    theta, rho = p.objective.theta, p.objective.rho0
    vals = [np.trace(u.conj().T @ theta @ u @ rho).real for u in rec.u]
    np.testing.assert_allclose(vals, 0.3, atol=1e-14)


def test_transition_table_problem_a():
    sys = problem_a().system
    table = {(t.j, t.k): (t.gap, t.couplings) for t in sys.transition_table}
    assert table[(0, 2)] == (30.0, (0.5,))
    assert table[(1, 2)] == (20.0, (1.0,))
    assert table[(0, 1)] == (10.0, (0.0,))


def test_validation():
    with pytest.raises(NotHermitian):
        QuantumSystem(np.array([[0, 1], [0, 0]]), np.eye(2))
    with pytest.raises(DimensionMismatch):
        QuantumSystem(np.eye(2), np.eye(3))
    with pytest.raises(NonFiniteField):
        ControlField([[0.0, np.nan]], 1.0)
    with pytest.raises(DimensionMismatch):
        propagate(problem_a().system, ControlField(np.zeros((2, 5)), 1.0))
    with pytest.raises(ValueError):
        QuantumSystem(np.eye(2), np.eye(2), sign=2)


def test_field_save_load_roundtrip(tmp_path, rng):
    fld = ControlField(rng.normal(size=(3, 9)) * 1e-7, 10.0 / 3)
    path = tmp_path / "f.csv"
    fld.save(path)
    back = ControlField.load(path)
    assert back == fld
    assert path.read_text().splitlines()[0] == "t_index,channel,epsilon"


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 5), st.integers(1, 3), st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_unitarity_property(n, k, l, seed):
    rng = np.random.default_rng(seed)
    sys = small_system(rng, n=n, k=k)
    fld = ControlField(rng.normal(scale=3.0, size=(k, l)), rng.uniform(0.1, 20))
    u = final_propagator(sys, fld)
    assert np.abs(u.conj().T @ u - np.eye(n)).max() < 1e-10
