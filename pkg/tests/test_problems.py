import math

import numpy as np
import pytest

from oracles import double_layer_oracle
from symmbem.geometry import make_l_shape
from symmbem.problems import HarmonicProblem, single_layer_of_density


@pytest.fixture(scope="module")
def raw_problem():
    return HarmonicProblem.corner(make_l_shape())


def test_corner_detection(raw_problem):
    assert raw_problem.singular_corner == 0
    assert raw_problem.exponent == pytest.approx(2 / 3, abs=1e-15)
    assert raw_problem.center == 0j
    assert raw_problem.cut == pytest.approx(1.75 * math.pi)


def test_dirichlet_examples(raw_problem):
    g = raw_problem.dirichlet_data
    assert g(np.array([0.0, 0.0])) == 0.0
    # edge leaving the corner along the positive x-axis: rotated argument 0
    assert np.allclose(g(np.array([[0.5, 0.0], [1.0, 0.0]])), 0.0, atol=1e-15)
    # incoming edge along the negative y-axis: argument 3 pi / 2
    assert np.allclose(g(np.array([[0.0, -1.0], [0.0, -0.3]])), 0.0, atol=1e-15)
    # argument 3 pi / 4 at distance r: r**(2/3) * sin(pi/2)
    r = 0.8
    pt = r * np.array([math.cos(0.75 * math.pi), math.sin(0.75 * math.pi)])
    assert g(pt) == pytest.approx(r ** (2 / 3), rel=1e-14)


def test_density_finite_difference(raw_problem):
    poly = raw_problem.polygon
    eps = 1e-6
    for seg in range(1, 5):
        sg = poly.segments[seg]
        for frac in (0.2, 0.5, 0.8):
            x = sg.point(frac * sg.length)
            n = sg.outward_normal
            fd = (raw_problem.dirichlet_data(x + eps * n) - raw_problem.dirichlet_data(x - eps * n)) / (2 * eps)
            assert raw_problem.density(seg, frac * sg.length) == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_density_singular_profile(raw_problem):
    r = np.array([1e-2, 1e-4, 1e-6, 1e-8])
    ratio = raw_problem.density(0, r) / r ** (-1 / 3)
    assert np.allclose(ratio, ratio[-1], rtol=1e-12)
    with pytest.raises(ValueError):
        raw_problem.gradient(np.array([0.0, 0.0]))


def test_density_bounded_far_from_corner(raw_problem):
    for seg in (2, 3):
        s = np.linspace(0, raw_problem.polygon.segments[seg].length, 201)
        assert np.all(np.isfinite(raw_problem.density(seg, s)))
        assert np.max(np.abs(raw_problem.density(seg, s))) < 2


def test_mean_value_property(raw_problem):
    theta = np.linspace(0, 2 * np.pi, 400, endpoint=False)
    for c in ([0.5, 0.5], [-0.5, 0.5], [-0.5, -0.5], [0.3, 0.2]):
        c = np.array(c)
        circle = c + 0.1 * np.stack([np.cos(theta), np.sin(theta)], axis=1)
        assert raw_problem.dirichlet_data(circle).mean() == pytest.approx(raw_problem.dirichlet_data(c), abs=1e-8)


def test_branch_safety(raw_problem):
    poly = raw_problem.polygon
    t = np.linspace(0, poly.perimeter, 10_001)
    g = raw_problem.dirichlet_data(poly.point_at(t))
    dt = t[1] - t[0]
    # g is Hoelder-2/3 at the corner and Lipschitz elsewhere; a branch jump would be O(1)
    assert np.max(np.abs(np.diff(g))) < 2 * dt ** (2 / 3)


def test_rhs_random_points_match_oracle(corner_problem):
    poly = corner_problem.polygon
    rng = np.random.default_rng(7)
    for _ in range(10):
        seg = int(rng.integers(6))
        s = float(rng.uniform(0.02, 0.98) * poly.segments[seg].length)
        ref = corner_problem.dirichlet(seg, s) + double_layer_oracle(poly, corner_problem.dirichlet_data, seg, s)
        assert corner_problem.rhs(seg, s)[0] == pytest.approx(float(np.squeeze(ref)), rel=1e-8, abs=1e-12)


def test_compatibility_two_points(corner_problem):
    for seg, frac in [(1, 0.3), (3, 0.2)]:
        s = frac * corner_problem.polygon.segments[seg].length
        assert single_layer_of_density(corner_problem, seg, s) == pytest.approx(
            corner_problem.rhs(seg, s)[0], rel=1e-4)


def test_smooth_problem(scaled_l):
    p = HarmonicProblem.smooth(scaled_l)
    x = np.array([[0.05, 0.02], [-0.1, 0.2]])
    z = x[:, 0] + 1j * x[:, 1] - p.center
    assert np.allclose(p.dirichlet_data(x), (z ** 2).imag, atol=1e-15)
    with pytest.raises(ValueError):
        HarmonicProblem.smooth(scaled_l, exponent=1.5)


def test_load_density_product_finite(corner_problem):
    assert math.isfinite(corner_problem.load_density_product)
    assert corner_problem.load_density_product > 0
