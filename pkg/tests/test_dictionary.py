import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from koopgram.dictionary import (
    Dictionary,
    Selector,
    dictionary_from_spec,
    evaluate,
    evaluate_input,
    example1_dictionary,
    identity_dictionary,
    input_dictionary,
    monomial_dictionary,
    output_selector,
    state_projector,
)
from koopgram.dynsys import example1_system, example3_system, step
from koopgram.errors import DimensionError, KoopgramError, NonFiniteError

states2 = arrays(np.float64, 2, elements=st.floats(-2, 2))


def test_example1_dictionary_at_origin():
    d, _, _ = example1_dictionary()
    psi = evaluate(d, [0.0, 0.0])
    assert psi.shape == (12,)
    np.testing.assert_array_equal(psi, [0] * 11 + [1])


def test_example1_dictionary_layout():
    d, W, P = example1_dictionary()
    assert d.lifted_dim == 12
    assert d.labels[:7] == ["x1", "x2", "x1^2", "x2^2", "x1*x2^2", "x1^2*x2", "x1^2*x2^2"]
    assert d.labels[-1] == "1"
    np.testing.assert_array_equal(np.nonzero(W.matrix)[1], [2, 3])
    np.testing.assert_array_equal(np.nonzero(P.matrix)[1], [0, 1])
    assert W.kind == "output-selector" and P.kind == "state-projector"


@given(states2)
def test_example1_selectors_are_exact(x):
    sys = example1_system()
    d, W, P = example1_dictionary(sys)
    psi = d.lift(x)
    np.testing.assert_array_equal(W @ psi, sys.output_map(x))
    np.testing.assert_array_equal(P @ psi, x)


def test_composed_entries_are_output_after_steps():
    sys = example1_system()
    d, _, _ = example1_dictionary(sys)
    x = np.array([0.3, -0.2])
    psi = d.lift(x)
    x1 = step(sys, x)
    x2 = step(sys, x1)
    np.testing.assert_allclose(psi[7:9], x1**2, rtol=1e-15)
    np.testing.assert_allclose(psi[9:11], x2**2, rtol=1e-15)


def test_controlled_system_uses_unforced_map():
    d3, _, _ = example1_dictionary(example3_system())
    d1, _, _ = example1_dictionary(example1_system())
    x = np.array([0.4, 0.1])
    np.testing.assert_array_equal(d3.lift(x), d1.lift(x))


def test_monomial_small_cases():
    np.testing.assert_array_equal(evaluate(monomial_dictionary(1, 2), [2.0]), [2.0, 4.0])
    assert monomial_dictionary(2, 1).labels == ["x1", "x2"]
    assert monomial_dictionary(2, 2).labels == ["x1", "x2", "x1^2", "x1*x2", "x2^2"]
    assert monomial_dictionary(1, 3, include_constant=True).labels == ["x1", "x1^2", "x1^3", "1"]


def test_monomial_size_limit():
    with pytest.raises(KoopgramError, match="limit"):
        monomial_dictionary(10, 5)
    assert monomial_dictionary(10, 5, size_limit=5000).lifted_dim == math.comb(15, 5) - 1
    with pytest.raises(ValueError):
        monomial_dictionary(2, 0)


@given(arrays(np.float64, 3, elements=st.floats(-5, 5)))
def test_identity_dictionary(x):
    np.testing.assert_array_equal(evaluate(identity_dictionary(3), x), x)


@given(st.integers(1, 4), st.integers(1, 4), st.booleans(), st.integers(0, 2**31))
def test_state_inclusive(n, deg, const, seed):
    d = monomial_dictionary(n, deg, const)
    X = np.random.default_rng(seed).uniform(-3, 3, size=(n, 100))
    np.testing.assert_array_equal(d.lift(X)[:n], X)


def test_lift_is_columnwise():
    d, _, _ = example1_dictionary()
    X = np.random.default_rng(1).uniform(-1, 1, size=(2, 7))
    batch = d.lift(X)
    for j in range(7):
        np.testing.assert_array_equal(batch[:, j], d.lift(X[:, j]))


def test_lift_errors():
    d = monomial_dictionary(2, 3)
    with pytest.raises(DimensionError):
        d.lift(np.zeros(3))
    with pytest.raises(NonFiniteError):
        evaluate(d, [np.inf, 0.0])
    with pytest.raises(NonFiniteError):
        d.lift([1e200, 1.0])


def test_dictionary_invariants_enforced():
    with pytest.raises(ValueError, match="coordinate"):
        Dictionary(2, (("mono", (0, 1)), ("mono", (1, 0))), (None, None), {})
    with pytest.raises(ValueError, match="duplicate"):
        Dictionary(1, (("mono", (1,)), ("mono", (1,))), (None, None), {})


def test_input_dictionaries():
    idict = input_dictionary("sin_augmented", 1)
    np.testing.assert_array_equal(evaluate_input(idict, [0.0]), [0.0, 0.0])
    np.testing.assert_allclose(evaluate_input(idict, [math.pi / 2]), [1.5707963267948966, 1.0])
    np.testing.assert_array_equal(evaluate_input(input_dictionary("identity", 2), [3.0, -1.0]),
                                  [3.0, -1.0])
    with pytest.raises(KeyError):
        input_dictionary("cubic", 1)


def test_selector_kinds():
    with pytest.raises(ValueError):
        Selector(np.array([[0.5, 0.5]]), "state-projector")
    assert Selector(np.array([[0.5, 0.5]])).kind == "general"


def test_output_selector_needs_terms():
    with pytest.raises(KoopgramError, match="not in the dictionary"):
        output_selector(identity_dictionary(2), example1_system())
    W = output_selector(monomial_dictionary(2, 2), example1_system())
    np.testing.assert_array_equal(W.matrix, [[0, 0, 1, 0, 0], [0, 0, 0, 0, 1]])


def test_state_projector_general():
    d = monomial_dictionary(3, 2, True)
    x = np.array([1.0, 2.0, 3.0])
    np.testing.assert_array_equal(state_projector(d) @ d.lift(x), x)


def test_spec_round_trip():
    for d in (example1_dictionary()[0], monomial_dictionary(2, 3, True), identity_dictionary(4)):
        again = dictionary_from_spec(d.spec)
        assert again.descriptors == d.descriptors
        x = np.linspace(-0.5, 0.5, d.state_dim)
        np.testing.assert_array_equal(again.lift(x), d.lift(x))
    with pytest.raises(KeyError):
        dictionary_from_spec({"kind": "rbf"})
