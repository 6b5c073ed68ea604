import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import double_layer_oracle, log_double_integral
from symmbem import operators
from symmbem.galerkin import CoercivityError, solve
from symmbem.geometry import make_l_shape, uniform_mesh
from symmbem.operators import (assemble_matrix, assemble_rhs, classify_pair, coincident_entry,
                               double_layer_apply, log_line_integral, single_layer_entry)
from symmbem.quadrature import adaptive_integrate


def test_coincident_value():
    assert coincident_entry(0.25) == pytest.approx(0.0574210, abs=5e-8)
    ref = adaptive_integrate(lambda s: np.array([
        adaptive_integrate(lambda r: np.log(np.abs(r)), -si, 0.25 - si, 1e-13, points=[0.0])
        for si in s]), 0, 0.25, 1e-12)
    assert coincident_entry(0.25) == pytest.approx(-ref / math.pi, rel=1e-10)


def test_log_line_integral_matches_quadrature():
    x = np.array([0.3, 0.2])
    start, tau = np.array([-0.5, 0.0]), np.array([1.0, 0.0])
    ref = adaptive_integrate(lambda t: np.log(np.hypot(0.3 - (-0.5 + t), 0.2)), 0, 2.0, 1e-13)
    assert log_line_integral(x, start, tau, 2.0) == pytest.approx(ref, rel=1e-13)


def test_pair_classes(scaled_l):
    m = uniform_mesh(scaled_l, 16)
    assert classify_pair(m, 3, 3) == "coincident"
    assert classify_pair(m, 3, 4) == "adjacent"
    assert classify_pair(m, 0, 15) == "adjacent"  # wraps around the closed loop
    assert classify_pair(m, 0, 5) == "separated"
    with pytest.raises(IndexError):
        classify_pair(m, 0, 16)


@pytest.mark.parametrize("i, j", [(0, 0), (1, 2), (0, 7), (1, 4), (2, 5)])
def test_entries_match_oracle(scaled_l, i, j):
    m = uniform_mesh(scaled_l, 8)
    a, b = m.element_endpoints()
    ref = -log_double_integral(a[i], b[i], a[j], b[j]) / math.pi
    assert single_layer_entry(m, i, j) == pytest.approx(ref, rel=1e-9)


def test_separated_perpendicular_pair(scaled_l):
    # element 1 lies on x = 1, element 4 on x = -1: perpendicular to element 2 (on y = 1)
    m = uniform_mesh(scaled_l, 8)
    a, b = m.element_endpoints()
    assert abs(np.dot(b[0] - a[0], b[4] - a[4])) < 1e-15
    ref = -log_double_integral(a[0], b[0], a[4], b[4]) / math.pi
    assert single_layer_entry(m, 0, 4) == pytest.approx(ref, rel=1e-8)


def test_matrix_symmetric_and_diagonal(scaled_l):
    m = uniform_mesh(scaled_l, 8)
    V = assemble_matrix(m)
    assert np.array_equal(V, V.T)
    assert np.allclose(np.diag(V), coincident_entry(m.lengths[0]), rtol=1e-13)
    for i in range(8):
        for j in range(8):
            assert V[i, j] == pytest.approx(single_layer_entry(m, i, j), rel=1e-12)


@pytest.mark.parametrize("N", [8, 16, 64, 256])
def test_positive_definite_after_scaling(scaled_l, N):
    assert np.linalg.eigvalsh(assemble_matrix(uniform_mesh(scaled_l, N))).min() > 0


def test_large_polygon_detected_by_solver():
    big = make_l_shape().scaled(10.0)
    m = uniform_mesh(big, 8)
    V = assemble_matrix(m)
    assert np.linalg.eigvalsh(V).min() < 0
    with pytest.raises(CoercivityError, match="coercivity violated"):
        solve(m, lambda seg, s: np.ones_like(s), matrix=V)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.1, 3.0))
def test_scale_law(sigma):
    p = make_l_shape()
    V1 = assemble_matrix(uniform_mesh(p, 8))
    m = uniform_mesh(p.scaled(sigma), 8)
    Vs = assemble_matrix(m)
    L1 = uniform_mesh(p, 8).lengths
    expect = sigma ** 2 * V1 - sigma ** 2 * np.outer(L1, L1) * math.log(sigma) / math.pi
    assert np.allclose(Vs, expect, rtol=1e-11, atol=1e-13)


def test_double_layer_of_constant(scaled_l):
    one = lambda y: np.ones(y.shape[:-1])
    for seg in range(6):
        L = scaled_l.segments[seg].length
        vals = double_layer_apply(scaled_l, one, seg, L * np.array([0.01, 0.3, 0.5, 0.9]))
        assert np.allclose(vals, -1.0, atol=1e-10)


def test_double_layer_host_segment_is_silent(scaled_l):
    sg = scaled_l.segments[2]

    def on_host(y):
        return (np.abs((y - sg.start) @ sg.outward_normal) < 1e-12).astype(float)

    assert double_layer_apply(scaled_l, on_host, 2, np.array([0.2, 0.4])) == pytest.approx(0.0, abs=1e-14)


def test_double_layer_rejects_vertices(scaled_l):
    with pytest.raises(ValueError):
        double_layer_apply(scaled_l, lambda y: y[..., 0], 1, np.array([0.0]))
    with pytest.raises(ValueError):
        double_layer_apply(scaled_l, lambda y: y[..., 0], 1, np.array([scaled_l.segments[1].length]))


def test_double_layer_matches_oracle(corner_problem):
    poly = corner_problem.polygon
    g = corner_problem.dirichlet_data
    for seg in (2, 3):
        s = 0.5 * poly.segments[seg].length
        ref = double_layer_oracle(poly, g, seg, s)
        assert double_layer_apply(poly, g, seg, np.array([s]))[0] == pytest.approx(ref, rel=1e-8)


def test_double_layer_linear(corner_problem):
    poly = corner_problem.polygon
    g = corner_problem.dirichlet_data
    s = np.array([0.05, 0.1])
    one = double_layer_apply(poly, g, 1, s)
    assert np.allclose(double_layer_apply(poly, lambda y: 2 * g(y), 1, s), 2 * one, rtol=1e-14)


def test_rhs_of_constant_is_lengths(scaled_l):
    m = uniform_mesh(scaled_l, 16)
    assert np.allclose(assemble_rhs(m, lambda seg, s: np.ones_like(s)), m.lengths, rtol=1e-13)


def test_rhs_linear(scaled_l):
    m = uniform_mesh(scaled_l, 16)
    f = lambda seg, s: np.cos(3 * s + seg)
    assert np.allclose(assemble_rhs(m, lambda j, s: -2.5 * f(j, s)), -2.5 * assemble_rhs(m, f), rtol=1e-14)


def test_rhs_matches_oracle(corner_problem):
    m = uniform_mesh(corner_problem.polygon, 8)
    b = assemble_rhs(m, corner_problem.rhs)
    loc = m.local_starts()
    for e in range(8):
        j = int(m.segment_of[e])
        ref = adaptive_integrate(lambda s: corner_problem.rhs(j, s), loc[e], loc[e] + m.lengths[e], 1e-11)
        assert b[e] == pytest.approx(ref, rel=1e-8)


def test_rhs_reports_bad_element(scaled_l):
    m = uniform_mesh(scaled_l, 8)
    with pytest.raises(FloatingPointError, match="element"):
        assemble_rhs(m, lambda seg, s: np.where(seg == 3, np.nan, 1.0) * np.ones_like(s))


def test_factor_is_module_constant():
    assert operators.DOUBLE_LAYER_FACTOR == pytest.approx(-1 / math.pi)
