import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pathgreeks import InvalidArgumentError, Path, PayoffSpec, evaluate_payoff, make_grid
from pathgreeks.payoffs import payoff_values

G4 = make_grid(1.0, 4)


def terminal(v):
    return Path(G4, [100.0, 100.0, 100.0, 100.0, v])


def test_digital_is_strict():
    d = PayoffSpec("digital_call", 100)
    assert evaluate_payoff(d, terminal(101)) == 1.0
    assert evaluate_payoff(d, terminal(100)) == 0.0


def test_vanilla_and_qv():
    assert evaluate_payoff(PayoffSpec("vanilla_call", 100), terminal(100)) == 0.0
    assert evaluate_payoff(PayoffSpec("vanilla_call", 100), terminal(103.5)) == 3.5
    assert evaluate_payoff(PayoffSpec("qv_contract"), Path(make_grid(1, 3), [0, 1, 0, 1])) == 3.0


def test_asian_trapezoid():
    p = Path(G4, [0.0, 1.0, 2.0, 3.0, 4.0])
    # trapezoid average of a linear ramp is exact: 2
    assert evaluate_payoff(PayoffSpec("asian_arith_call", 1.5), p) == pytest.approx(0.5)
    assert evaluate_payoff(PayoffSpec("asian_arith_call", 2.5), p) == 0.0


def test_spec_validation():
    with pytest.raises(InvalidArgumentError):
        PayoffSpec("digital_call")
    with pytest.raises(InvalidArgumentError):
        PayoffSpec("digital_call", -1.0)
    with pytest.raises(InvalidArgumentError):
        PayoffSpec("barrier", 100)
    assert PayoffSpec("qv_contract").strike is None
    assert PayoffSpec("digital_call", 100).label == "digital_call(K=100)"
    assert PayoffSpec("digital_call", 100).bounded
    assert not PayoffSpec("vanilla_call", 100).bounded


def test_vectorized_matches_scalar():
    rng = np.random.default_rng(0)
    vals = 100 + rng.standard_normal((7, 5)).cumsum(axis=1)
    for kind in ("digital_call", "vanilla_call", "asian_arith_call", "qv_contract"):
        spec = PayoffSpec(kind, None if kind == "qv_contract" else 100.0)
        vec = payoff_values(spec, vals, G4)
        assert np.array_equal(vec, [evaluate_payoff(spec, Path(G4, v)) for v in vals])


@given(arrays(float, 5, elements=st.floats(50, 150)), st.floats(0, 20), st.floats(80, 120))
def test_monotone_in_upward_shift(v, shift, K):
    for kind in ("digital_call", "vanilla_call"):
        spec = PayoffSpec(kind, K)
        assert evaluate_payoff(spec, Path(G4, v + shift)) >= evaluate_payoff(spec, Path(G4, v))
    assert evaluate_payoff(PayoffSpec("digital_call", K), Path(G4, v)) in (0.0, 1.0)
