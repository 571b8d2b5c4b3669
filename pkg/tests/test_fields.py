import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcl.dynamics import ControlField
from qcl.errors import NoValidTransitions, ZeroField
from qcl.fields import (FieldInitSpec, channel_rng, envelope, mean_amplitude, rescale_to_rfs, rfs,
                        rfs_weights, spectral_range, synthesize, synthesize_with_log, write_draw_log)
from qcl.problems import problem_a, problem_c, problem_d, problem_g
from qcl.dynamics import QuantumSystem


def test_rfs_problem_a_constant_field():
    # transitions 1-3 (0.5 / 30) and 2-3 (1 / 20); the 1-2 pair is uncoupled
    sys = problem_a().system
    fld = ControlField(np.ones((1, 255)), 8.0)
    assert rfs(fld, sys) == pytest.approx((0.5 / 30 + 1 / 20) / 2, rel=1e-14)


def test_rfs_skips_degenerate_pair():
    sys = problem_d().system
    w, count = rfs_weights(sys)
    alpha = np.pi / 100
    assert count == 2
    assert w[0] == pytest.approx(1 / alpha + 1.0)


def test_rfs_problem_g_counts_only_nondegenerate_pairs():
    sys = problem_g().system
    _, count = rfs_weights(sys)
    coupled = sum(1 for t in sys.transition_table for c in t.couplings if c > 0)
    assert 0 < count < coupled


def test_rfs_without_valid_pairs():
    with pytest.raises(NoValidTransitions):
        rfs_weights(QuantumSystem(np.eye(2), np.array([[0, 1], [1, 0]])))


def test_spectral_range():
    assert spectral_range(problem_a().system) == (10.0, 30.0)
    assert spectral_range(problem_c().system) == (1.0, 7.0)
    with pytest.raises(NoValidTransitions):
        spectral_range(QuantumSystem(np.eye(2), np.array([[0, 1], [1, 0]])))


def test_envelope_peak_and_width():
    t = np.array([4.0, 4.8])
    e = envelope(t, 8.0, 0.8)
    assert e[0] == 1.0
    assert e[1] == pytest.approx(np.exp(-0.5))


@pytest.mark.parametrize("sigma0", [1.0, 5e-4, 5e-7])
def test_synthesize_hits_target_rfs(sigma0):
    p = problem_a()
    fld = synthesize(p.init_spec(3, sigma0), p.system, p.t_final, p.l_slices)
    assert rfs(fld, p.system) == pytest.approx(sigma0, rel=1e-12)
    assert fld.values.shape == (1, 255)


def test_synthesize_is_deterministic_and_seed_sensitive():
    p = problem_c()
    a = synthesize(p.init_spec(5, 1.0), p.system, p.t_final, p.l_slices)
    b = synthesize(p.init_spec(5, 1.0), p.system, p.t_final, p.l_slices)
    c = synthesize(p.init_spec(6, 1.0), p.system, p.t_final, p.l_slices)
    assert a == b
    assert not np.array_equal(a.values, c.values)


def test_draws_within_ranges():
    p = problem_a()
    fld, draws = synthesize_with_log(p.init_spec(1, 1.0), p.system, p.t_final, p.l_slices)
    d = draws[0]
    assert d.omegas.size == 20 and d.amplitudes.size == 20
    assert np.all((d.omegas >= 10) & (d.omegas <= 30))
    assert np.all((d.amplitudes >= 0) & (d.amplitudes < 1))


def test_channels_are_independent_substreams():
    p = problem_g()
    _, draws = synthesize_with_log(p.init_spec(9), p.system, p.t_final, p.l_slices)
    for c, d in enumerate(draws):
        ref = channel_rng(9, c)
        np.testing.assert_array_equal(d.omegas, ref.uniform(0.0, 2.0, 20))


def test_problem_g_unit_peak():
    p = problem_g()
    fld = synthesize(p.init_spec(2), p.system, p.t_final, p.l_slices)
    np.testing.assert_allclose(np.abs(fld.values).max(axis=1), 1.0, rtol=1e-15)


def test_rescale_and_zero_field():
    p = problem_a()
    fld = ControlField(np.linspace(-1, 1, 255), 8.0)
    assert rfs(rescale_to_rfs(fld, p.system, 0.25), p.system) == pytest.approx(0.25)
    with pytest.raises(ZeroField):
        rescale_to_rfs(p.zero_field(), p.system, 1.0)


def test_mean_amplitude():
    fld = ControlField([[1.0, -3.0], [0.0, 2.0]], 1.0)
    np.testing.assert_array_equal(mean_amplitude(fld), [2.0, 1.0])


def test_spec_validation():
    with pytest.raises(ValueError):
        FieldInitSpec(seed=0)
    with pytest.raises(ValueError):
        FieldInitSpec(seed=0, target_sigma0=1.0, peak_amplitude=1.0)
    with pytest.raises(ValueError):
        FieldInitSpec(seed=0, target_sigma0=-1.0)


def test_draw_log(tmp_path):
    p = problem_a()
    _, draws = synthesize_with_log(p.init_spec(1, 1.0), p.system, p.t_final, p.l_slices)
    write_draw_log(tmp_path / "d.csv", draws)
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "channel,mode,omega,amplitude"
    assert len(lines) == 21


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**63 - 1), st.floats(1e-8, 10.0))
def test_rfs_scaling_property(seed, sigma0):
    p = problem_a()
    fld = synthesize(p.init_spec(seed, sigma0), p.system, p.t_final, 64)
    assert rfs(fld, p.system) == pytest.approx(sigma0, rel=1e-12)
    assert rfs(fld.with_values(3 * fld.values), p.system) == pytest.approx(3 * sigma0, rel=1e-12)
