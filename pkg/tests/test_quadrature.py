import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from symmbem.quadrature import (QuadratureError, adaptive_integrate, composite,
                                gauss_legendre, geometric_breaks)


def test_small_rules():
    r1 = gauss_legendre(1)
    assert np.allclose(r1.nodes, [0]) and np.allclose(r1.weights, [2])
    r2 = gauss_legendre(2)
    assert np.allclose(r2.nodes, [-1 / math.sqrt(3), 1 / math.sqrt(3)], atol=1e-15)
    assert np.allclose(r2.weights, [1, 1], atol=1e-15)
    r3 = gauss_legendre(3)
    assert np.dot(r3.weights, r3.nodes ** 4) == pytest.approx(0.4, abs=1e-15)


def test_rejects_zero_points():
    with pytest.raises(ValueError):
        gauss_legendre(0)


@pytest.mark.parametrize("n", range(1, 33))
def test_exactness(n):
    r = gauss_legendre(n)
    assert r.weights.sum() == pytest.approx(2, abs=1e-13)
    assert np.all(r.weights > 0)
    assert np.allclose(r.nodes, -r.nodes[::-1], atol=0)
    for k in range(2 * n):
        exact = 2 / (k + 1) if k % 2 == 0 else 0.0
        assert abs(np.dot(r.weights, r.nodes ** k) - exact) <= 1e-12


@pytest.mark.parametrize("f, exact", [
    (np.log, -1.0),
    (lambda x: x ** (-2 / 3), 3.0),
    (np.ones_like, 1.0),
])
def test_adaptive_examples(f, exact):
    assert adaptive_integrate(f, 0.0, 1.0, 1e-12) == pytest.approx(exact, rel=1e-11)


def test_adaptive_without_transform_is_loud():
    with pytest.raises(QuadratureError):
        adaptive_integrate(lambda x: 1 / x, 0.0, 1.0, 1e-10)


def test_adaptive_interior_point():
    val = adaptive_integrate(lambda x: np.log(np.abs(x - 0.3)), 0.0, 1.0, 1e-12, points=[0.3])
    exact = 0.7 * math.log(0.7) - 0.7 + 0.3 * math.log(0.3) - 0.3
    assert val == pytest.approx(exact, rel=1e-11)


def test_adaptive_reversed_interval():
    assert adaptive_integrate(np.sin, 1.0, 0.0) == pytest.approx(math.cos(1) - 1, rel=1e-12)


def test_geometric_breaks():
    b = geometric_breaks(0.0, 1.0, "a", 0.5, 5)
    assert np.allclose(b, [0, 1 / 32, 1 / 16, 1 / 8, 1 / 4, 1 / 2, 1])
    both = geometric_breaks(0.0, 1.0, "both", 0.5, 3)
    assert both[0] == 0 and both[-1] == 1 and np.all(np.diff(both) > 0)
    # next to a point far from the origin the depth is capped by float resolution
    capped = geometric_breaks(100.0, 101.0, "a", 0.5, 60)
    assert np.all(np.diff(capped) > 0) and capped[1] - capped[0] >= 1e-9


@settings(max_examples=40, deadline=None)
@given(st.floats(-5, 5), st.floats(0.1, 5), st.integers(0, 9))
def test_composite_integrates_polynomials(a, L, k):
    x, w = composite(np.linspace(a, a + L, 4), 6)
    b = a + L
    assert np.dot(w, x ** k) == pytest.approx((b ** (k + 1) - a ** (k + 1)) / (k + 1), rel=1e-11, abs=1e-11)


@pytest.mark.parametrize("a, b, toward", [(0.0, 1.0, "a"), (5.0, 6.0, "b"), (2.0, 3.0, "both")])
def test_graded_rule_cube_root_singularities(a, b, toward):
    from symmbem.quadrature import graded_rule

    def f(x):
        r = (x - a) if toward == "a" else (b - x) if toward == "b" else np.minimum(x - a, b - x)
        return r ** (-2 / 3) + 2 * r ** (-1 / 3) + 1

    x, w = graded_rule(a, b, toward, 0.5, 20, 16)
    assert np.all((x > a) & (x < b))
    exact = 3 + 3 + 1 if toward != "both" else 2 * (3 * 0.5 ** (1 / 3) + 3 * 0.5 ** (2 / 3) + 0.5)
    # the test integrand itself rounds b - x near b, so ~1e-10 is the floor there
    assert np.dot(w, f(x)) == pytest.approx(exact, rel=1e-12 if toward == "a" else 1e-9)
