import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dispersive_modes.equation import LinearOperator, OperatorError, parse_operator
from dispersive_modes.expressions import ExpressionError


def test_standard_wave_coefficients():
    op = parse_operator("u_xx - (1/c^2)*u_tt = 0", {"c": 2.0})
    assert op.coeffs == {(2, 0): 1, (0, 2): -0.25}
    assert op.max_t_order == 2 and op.max_x_order == 2 and op.n_modes == 2


def test_schrodinger_normalization():
    op = parse_operator("u_t = i*g*u_xx", {"g": 0.5})
    assert op.coeffs == {(0, 1): -1, (2, 0): 0.5j}
    assert op.max_t_order == 1


def test_overall_sign_is_canonical():
    # both sides swapped give the same operator
    a = parse_operator("u_tt = u_xx")
    b = parse_operator("u_xx = u_tt")
    assert a == b
    assert a.coeffs[(0, 2)] == -1


def test_mixed_derivative_term():
    op = parse_operator("u_tt - c^2*u_xx - beta^2*u_xxtt = 0", {"c": 2.0, "beta": 1.0})
    assert op.coeffs == {(0, 2): -1, (2, 0): 4, (2, 2): 1}
    assert op.pure_form() is None


def test_pure_form():
    b, a = parse_operator("u_xx - u_tt/4 = 0").pure_form()
    assert b == {2: 1} and a == {2: 0.25}


def test_no_time_derivative_is_rejected():
    with pytest.raises(OperatorError):
        parse_operator("u = 0")
    with pytest.raises(OperatorError):
        LinearOperator({(2, 0): 1.0})


def test_nonlinear_and_constant_terms_are_rejected():
    with pytest.raises(ExpressionError) as err:
        parse_operator("u_t = u*u_x")
    assert err.value.column is not None
    with pytest.raises(ExpressionError):
        parse_operator("u_t = u_xx + 1")


def test_unbound_parameter():
    with pytest.raises(ExpressionError) as err:
        parse_operator("u_xx - u_tt/c^2 = 0")
    assert "c" in str(err.value)


def test_zero_coefficients_dropped():
    op = LinearOperator({(0, 1): -1.0, (2, 0): 0.0, (1, 0): 0.5})
    assert (2, 0) not in op.coeffs


def test_time_coefficients():
    op = parse_operator("u_tt - c^2*u_xx - beta^2*u_xxtt = 0", {"c": 2.0, "beta": 1.0})
    a = op.time_coefficients(np.array([0.0, 1.0]))
    # A_2 = -1 + (ik)^2 = -1 - k^2, A_0 = 4 (ik)^2 = -4 k^2
    np.testing.assert_allclose(a[2], [-1, -2])
    np.testing.assert_allclose(a[0], [0, -4])


coef = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False).filter(lambda z: abs(z) > 1e-3)


@settings(max_examples=60, deadline=None)
@given(st.dictionaries(st.tuples(st.integers(0, 4), st.integers(0, 3)), coef, min_size=1, max_size=6), coef, st.integers(1, 3))
def test_render_round_trip(terms, lead, nt):
    terms = dict(terms)
    terms[(0, nt)] = lead
    op = LinearOperator(terms)
    again = parse_operator(op.render())
    assert again == op
