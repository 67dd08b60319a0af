import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpinn.ansatz import AnsatzSpec, build, cnot_ring, param_count, random_parameters
from qpinn.errors import ConfigurationError
from qpinn.simulator import simulate


@pytest.mark.parametrize("layout,n,d,count", [("RC", 8, 8, 192), ("RC", 3, 7, 63), ("AEC", 3, 7, 63)])
def test_param_count(layout, n, d, count):
    assert param_count(AnsatzSpec(layout, n, d)) == count


def test_rc_gate_order():
    spec = AnsatzSpec("RC", 2, 1)
    gates = build(spec, np.arange(6) * 0.1)
    desc = [(g.kind, g.target, g.control) for g in gates]
    assert desc == [
        ("RZ", 0, None), ("RZ", 1, None),
        ("RX", 0, None), ("RX", 1, None),
        ("RZ", 0, None), ("RZ", 1, None),
        ("CNOT", 1, 0), ("CNOT", 0, 1),
    ]
    assert [g.angle for g in gates[:6]] == list(np.arange(6) * 0.1)


def test_aec_gate_counts_and_order():
    gates = build(AnsatzSpec("AEC", 2, 1), np.zeros(6))
    kinds = [g.kind for g in gates]
    assert kinds.count("CNOT") == 6 and len(gates) == 12
    assert kinds == ["RZ", "RZ", "CNOT", "CNOT", "RX", "RX", "CNOT", "CNOT", "RZ", "RZ", "CNOT", "CNOT"]


def test_parameter_layout_block_major():
    spec = AnsatzSpec("RC", 3, 2)
    theta = np.arange(param_count(spec), dtype=float)
    gates = [g for g in build(spec, theta) if g.kind != "CNOT"]
    for g in gates:
        assert g.angle == g.param
    # block 1, RX layer, qubit 2
    g = [g for g in gates if g.param == (3 * 1 + 1) * 3 + 2][0]
    assert (g.kind, g.target) == ("RX", 2)


def test_zero_angles_leave_zero_state():
    for layout in ("RC", "AEC"):
        spec = AnsatzSpec(layout, 4, 3)
        s = simulate(4, build(spec, np.zeros(param_count(spec))))
        assert np.allclose(s.amplitudes, np.eye(16)[0], atol=1e-15)


def test_single_qubit_layouts_coincide():
    theta = np.array([0.3, 1.1, -0.7])
    assert cnot_ring(1) == []
    assert build(AnsatzSpec("RC", 1, 1), theta) == build(AnsatzSpec("AEC", 1, 1), theta)


def test_two_qubit_ring_is_cyclic():
    ring = cnot_ring(2)
    assert [(g.control, g.target) for g in ring] == [(0, 1), (1, 0)]


def test_build_validates_theta():
    spec = AnsatzSpec("RC", 2, 1)
    with pytest.raises(ValueError):
        build(spec, np.zeros(5))
    with pytest.raises(ValueError):
        build(spec, np.array([0, 0, 0, 0, 0, np.nan]))


def test_spec_validation():
    with pytest.raises(ConfigurationError):
        AnsatzSpec("XYZ", 2, 1)
    with pytest.raises(ConfigurationError):
        AnsatzSpec("RC", 0, 1)
    with pytest.raises(ConfigurationError):
        AnsatzSpec("RC", 2, -1)
    with pytest.raises(ConfigurationError):
        AnsatzSpec("RC", 2, 1, entanglement="linear")


def test_build_deterministic():
    spec = AnsatzSpec("AEC", 3, 2)
    theta = random_parameters(spec, np.random.default_rng(0))
    assert build(spec, theta) == build(spec, theta.copy())


def test_random_parameters_range_and_seed():
    spec = AnsatzSpec("RC", 4, 5)
    a = random_parameters(spec, np.random.default_rng(7))
    b = random_parameters(spec, np.random.default_rng(7))
    assert np.array_equal(a, b)
    assert a.shape == (60,) and np.all((a >= 0) & (a < 2 * np.pi))


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(["RC", "AEC"]), st.integers(1, 5), st.integers(0, 3), st.integers(0, 2**32 - 1))
def test_built_circuits_are_unitary(layout, n, d, seed):
    spec = AnsatzSpec(layout, n, d)
    s = simulate(n, build(spec, random_parameters(spec, np.random.default_rng(seed))))
    assert abs(s.norm_squared() - 1) < 1e-10
