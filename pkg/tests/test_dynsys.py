import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from koopgram.dynsys import (
    example1_system,
    example3_system,
    input_from_config,
    linear_observability_gramian,
    linear_system,
    linearize,
    simulate,
    sin_ramp,
    step,
    system_from_config,
    trajectory_from_csv,
    trajectory_to_csv,
    Trajectory,
    LinearizedSystem,
)
from koopgram.errors import DimensionError, DivergenceError, NonFiniteError, UnstableOperatorError

unit = st.floats(-1.0, 1.0, allow_nan=False)


def test_origin_is_fixed_point():
    np.testing.assert_array_equal(step(example1_system(), [0.0, 0.0]), [0.0, 0.0])


def test_step_by_hand():
    # 0.75 + 0.02 - 1 and 0.9 + 0.12 + 0.1
    np.testing.assert_allclose(step(example1_system(), [1.0, 1.0]), [-0.23, 1.12], atol=1e-15)


def test_input_enters_first_channel_only():
    np.testing.assert_array_equal(step(example3_system(), [0.0, 0.0], [1.0]), [1.0, 0.0])


def test_step_dimension_errors():
    sys = example1_system()
    with pytest.raises(DimensionError):
        step(sys, [1.0, 2.0, 3.0])
    with pytest.raises(DimensionError):
        step(sys, [1.0, 2.0], [1.0])
    with pytest.raises(DimensionError):
        step(example3_system(), [1.0, 2.0])
    with pytest.raises(NonFiniteError):
        step(sys, [np.nan, 0.0])


def test_step_overflow_is_an_error():
    with pytest.raises(NonFiniteError):
        step(example1_system(), [1e200, 1e200])


def test_simulate_fixed_point():
    tr = simulate(example1_system(), [0.0, 0.0], horizon=10)
    assert tr.states.shape == (11, 2)
    assert not tr.states.any()


def test_simulate_one_step():
    sys = example3_system()
    tr = simulate(sys, [0.3, -0.1], sin_ramp(0.01), horizon=1)
    assert tr.states.shape[0] == 2
    np.testing.assert_array_equal(tr.states[1], step(sys, tr.states[0], tr.inputs[0]))


def test_simulate_forced_example_shape():
    tr = simulate(example3_system(), [0.0, 0.0], sin_ramp(0.01), horizon=50)
    assert np.all(np.isfinite(tr.states))
    assert np.ptp(tr.states[:, 0]) > 2 * np.ptp(tr.states[:, 1])
    np.testing.assert_allclose(tr.inputs[:, 0], np.sin(np.arange(50)) + 0.01 * np.arange(50))


def test_trajectory_invariants_hold_exactly():
    sys = example3_system()
    tr = simulate(sys, [0.2, 0.1], sin_ramp(0.01), horizon=30)
    for t in range(tr.horizon):
        np.testing.assert_array_equal(tr.states[t + 1], step(sys, tr.states[t], tr.inputs[t]))
    np.testing.assert_array_equal(tr.outputs, tr.states**2)


def test_divergence_reports_step():
    with pytest.raises(DivergenceError) as info:
        simulate(example1_system(), [5.0, 5.0], horizon=100, cap=1e6)
    assert 1 <= info.value.step <= 100
    assert "step" in str(info.value)


def test_simulate_rejects_zero_horizon():
    with pytest.raises(ValueError):
        simulate(example1_system(), [0.0, 0.0], horizon=0)


def test_simulate_is_reproducible():
    a = simulate(example3_system(), [0.3, 0.3], sin_ramp(0.01), horizon=40)
    b = simulate(example3_system(), [0.3, 0.3], sin_ramp(0.01), horizon=40)
    assert a.states.tobytes() == b.states.tobytes()


@given(st.tuples(unit, unit))
def test_fixed_point_invariance_linear(x):
    sys = linear_system(np.eye(2))
    tr = simulate(sys, x, horizon=5)
    np.testing.assert_array_equal(tr.states, np.tile(x, (6, 1)))


def test_linearize_origin():
    lin = linearize(example1_system(), [0.0, 0.0])
    np.testing.assert_allclose(lin.A, [[0.75, 0.0], [0.12, 0.9]], atol=1e-15)
    np.testing.assert_array_equal(lin.C, np.zeros((2, 2)))


def test_linearize_at_one_one():
    lin = linearize(example1_system(), [1.0, 1.0])
    np.testing.assert_allclose(lin.A, [[0.79, -2.0], [0.12, 1.1]], atol=1e-14)
    np.testing.assert_allclose(lin.C, [[2.0, 0.0], [0.0, 2.0]])


def test_linearize_linear_system():
    A = np.array([[0.5, 0.2], [-0.1, 0.3]])
    lin = linearize(linear_system(A), [3.0, -7.0])
    np.testing.assert_allclose(lin.A, A, atol=1e-15)


@pytest.mark.parametrize("make", [example1_system, example3_system])
def test_analytic_and_fd_jacobians_agree(make):
    rng = np.random.default_rng(0)
    sys = make()
    for x in rng.uniform(-1, 1, size=(100, 2)):
        a = linearize(sys, x, "analytic")
        f = linearize(sys, x, "fd")
        np.testing.assert_allclose(a.A, f.A, atol=1e-6)
        np.testing.assert_allclose(a.C, f.C, atol=1e-6)
        if a.B is not None:
            np.testing.assert_allclose(a.B, f.B, atol=1e-6)


def test_linear_gramian_geometric_series():
    lin = LinearizedSystem(np.diag([0.9, 0.5]), np.array([[1.0, 0.0]]), np.zeros(2))
    X = linear_observability_gramian(lin)
    np.testing.assert_allclose(X, [[1 / 0.19, 0.0], [0.0, 0.0]], atol=1e-12)


def test_linear_gramian_trivial_cases():
    A = np.array([[0.5, 0.1], [0.0, 0.4]])
    C = np.array([[1.0, 2.0]])
    zero = LinearizedSystem(A, np.zeros((1, 2)), np.zeros(2))
    assert not linear_observability_gramian(zero, math.inf).any()
    X0 = linear_observability_gramian(LinearizedSystem(A, C, np.zeros(2)), 0)
    np.testing.assert_array_equal(X0, C.T @ C)


def test_linear_gramian_unstable():
    lin = LinearizedSystem(np.diag([1.2, 0.5]), np.eye(2), np.zeros(2))
    with pytest.raises(UnstableOperatorError) as info:
        linear_observability_gramian(lin)
    assert "1.2" in str(info.value)


def test_linear_gramian_symmetric_and_monotone(rng):
    A = rng.standard_normal((4, 4))
    A *= 0.95 / np.max(np.abs(np.linalg.eigvals(A)))
    lin = LinearizedSystem(A, rng.standard_normal((2, 4)), np.zeros(4))
    prev = linear_observability_gramian(lin, 0)
    for T in range(1, 15):
        X = linear_observability_gramian(lin, T)
        assert np.max(np.abs(X - X.T)) == 0.0
        assert np.linalg.eigvalsh(X - prev).min() >= -1e-10
        prev = X


def test_csv_round_trip_is_exact():
    tr = simulate(example3_system(), [0.3, 0.3], sin_ramp(0.01), horizon=20)
    text = trajectory_to_csv(tr)
    assert text.splitlines()[0] == "t,x1,x2,u1,y1,y2"
    assert text.endswith("\n")
    back = trajectory_from_csv(text)
    for name in ("states", "inputs", "outputs"):
        np.testing.assert_array_equal(getattr(back, name), getattr(tr, name))


def test_csv_errors_carry_line_numbers():
    text = "t,x1,y1\n0,1.0,1.0\n1,abc,2.0\n"
    with pytest.raises(ValueError, match="line 3"):
        trajectory_from_csv(text)
    with pytest.raises(ValueError, match="line 1"):
        trajectory_from_csv("x1,y1\n")


def test_trajectory_length_invariant():
    with pytest.raises(DimensionError):
        Trajectory(np.zeros((3, 2)), np.zeros((3, 1)), np.zeros((3, 2)))


def test_system_config():
    sys = system_from_config({"system": "example1", "params": {"alpha": 0.0}})
    np.testing.assert_allclose(step(sys, [1.0, 1.0]), [-0.25, 1.12])
    with pytest.raises(KeyError):
        system_from_config({"system": "lorenz"})
    with pytest.raises(KeyError):
        example1_system(omega=1.0)
    U = input_from_config({"kind": "samples", "values": [[1.0], [2.0]]}, 1)
    assert U.shape == (2, 1)


@settings(max_examples=50)
@given(st.tuples(unit, unit), st.floats(-2, 2))
def test_output_dimension(x, u):
    sys = example3_system()
    y = sys.output_map(np.array(x))
    assert np.shape(y) == (2,)
    assert np.all(np.isfinite(step(sys, x, [u])))
