import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from exochemo.errors import NonFiniteError
from exochemo.grid import (Field, Grid, antiderivative, derivative, integrate, norms,
                           trapezoid_weights)


def test_grid_rejects_small_or_noninteger():
    for bad in (2, 0, -5, 3.5, "4"):
        with pytest.raises(ValueError):
            Grid(bad)


def test_grid_geometry():
    g = Grid(5)
    assert g.h == 0.25
    np.testing.assert_array_equal(g.x, [0, 0.25, 0.5, 0.75, 1.0])
    assert g.refine().n == 9
    assert g.refine().x[::2].tolist() == g.x.tolist()


def test_field_is_immutable_copy():
    g = Grid(5)
    a = np.ones(5)
    f = g.field(a)
    a[0] = 7.0
    assert f.values[0] == 1.0
    with pytest.raises(ValueError):
        f.values[0] = 2.0


def test_field_validation():
    g = Grid(5)
    with pytest.raises(ValueError):
        Field(g, np.ones(4))
    with pytest.raises(NonFiniteError):
        Field(g, [0, 1, np.nan, 0, 0])
    with pytest.raises(NonFiniteError):
        g.field([0, 1, np.inf, 0, 0])


def test_field_arithmetic_and_grid_mismatch():
    g = Grid(5)
    f = g.field(lambda x: x)
    assert np.allclose((2 * f + 1 - f / 2).values, 1.5 * g.x + 1)
    assert np.allclose((-f).values, -g.x)
    assert np.allclose((1 - f).values, 1 - g.x)
    with pytest.raises(ValueError):
        f + Grid(7).zeros()


def test_trapezoid_weights_sum_to_one():
    w = trapezoid_weights(Grid(11))
    assert w[0] == w[-1] == 0.05
    assert abs(w.sum() - 1.0) < 1e-15


def test_integrate_exact_for_linear():
    g = Grid(7)
    assert abs(integrate(g.field(lambda x: 3 * x + 2)) - 3.5) < 1e-14


def test_integrate_second_order():
    errs = [abs(integrate(Grid(n).field(np.exp)) - (np.e - 1)) for n in (51, 101, 201)]
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(np.abs(orders - 2) < 0.01)


def test_antiderivative_endpoint_matches_integrate_bitwise():
    g = Grid(401)
    f = g.field(lambda x: np.cos(3 * x) + x ** 2)
    F = antiderivative(f)
    assert F.values[0] == 0.0
    assert F.values[-1] == integrate(f)


def test_antiderivative_of_cosine():
    g = Grid(401)
    F = antiderivative(g.field(lambda x: np.pi * np.cos(np.pi * x)))
    assert np.max(np.abs(F.values - np.sin(np.pi * g.x))) < 1e-5


def test_derivative_exact_for_quadratic():
    g = Grid(9)
    d = derivative(g.field(lambda x: x ** 2 - 3 * x))
    assert np.allclose(d.values, 2 * g.x - 3, atol=1e-12)


def test_derivative_second_order_at_ends():
    errs = []
    for n in (51, 101, 201):
        g = Grid(n)
        errs.append(np.max(np.abs(derivative(g.field(np.sin)).values - np.cos(g.x))))
    orders = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(orders > 1.9)


def test_norms():
    g = Grid(2001)
    nm = norms(g.field(lambda x: np.sin(np.pi * x)))
    assert abs(nm.l2 - np.sqrt(0.5)) < 1e-6
    assert abs(nm.linf - 1.0) < 1e-12
    assert abs(nm.h1_semi - np.pi * np.sqrt(0.5)) < 1e-5


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 300), st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3))
def test_integral_linear_in_integrand(n, coef):
    g = Grid(n)
    a, b, c = coef
    f1 = g.field(np.sin)
    f2 = g.field(lambda x: x ** 3)
    lhs = integrate(f1 * a + f2 * b + c)
    rhs = a * integrate(f1) + b * integrate(f2) + c
    assert abs(lhs - rhs) <= 1e-10 * (1 + abs(a) + abs(b) + abs(c))
