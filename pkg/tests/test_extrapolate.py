import numpy as np
import pytest

from cusplab.extrapolate import (fornberg_weights, limit_at_zero,
                                 richardson_derivative_at_zero)


def test_fornberg_weights_reproduce_polynomial_derivatives():
    nodes = np.array([0.0, 0.1, 0.35, 0.6, 1.0])
    rng = np.random.default_rng(0)
    coeffs = rng.standard_normal(5)
    poly = np.polynomial.Polynomial(coeffs)
    for order in (1, 2, 3, 4):
        w = fornberg_weights(order, 0.2, nodes)
        exact = poly.deriv(order)(0.2)
        assert abs(w @ poly(nodes) - exact) < 1e-10


def test_fornberg_needs_enough_nodes():
    with pytest.raises(ValueError):
        fornberg_weights(3, 0.0, [0.0, 1.0, 2.0])


@pytest.mark.parametrize("order,exact", [(1, -1.0), (2, 1.0), (3, -1.0)])
def test_richardson_exponential(order, exact):
    val, err = richardson_derivative_at_zero(lambda r: np.exp(-r), order)
    assert abs(val - exact) < 1e-5
    assert 0.0 <= err < 1e-3


def test_richardson_rejects_bad_order():
    with pytest.raises(ValueError):
        richardson_derivative_at_zero(lambda r: r, 5)


def test_limit_at_zero():
    val, err = limit_at_zero(lambda r: np.cos(r) + r**2)
    assert abs(val - 1.0) < 1e-10
    val2, _ = limit_at_zero(lambda r: np.exp(-2 * r) * (1 + r))
    assert abs(val2 - 1.0) < 1e-9
