"""K-operator post-processing of piecewise constant Galerkin solutions.

The smoothing kernel is ``K_h(x) = K(x/h)/h`` with
``K(x) = sum_{|j|<q} k_j B_l(x - j)``, ``B_l`` the centred B-spline of order ``l``
(support ``[-l/2, l/2]``). The coefficients make ``K`` reproduce polynomials of
degree ``< 2q`` under convolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .error_analysis import region_l2_error, region_pieces
from .galerkin import GalerkinSolution
from .geometry import ObservationRegion
from .quadrature import gauss_legendre


def bspline(l: int, x) -> np.ndarray:
    """Centred B-spline of order ``l`` (``l - 1`` convolutions of the box on (-1/2, 1/2))."""
    if l < 1:
        raise ValueError("B-spline order must be >= 1")
    x = np.asarray(x, dtype=float)
    if l == 1:
        ax = np.abs(x)
        return np.where(ax < 0.5, 1.0, np.where(ax == 0.5, 0.5, 0.0))
    out = np.zeros_like(x)
    for k in range(l + 1):
        y = x + 0.5 * l - k
        out += (-1) ** k * math.comb(l, k) * np.where(y > 0, y, 0.0) ** (l - 1)
    out /= math.factorial(l - 1)
    return np.where(np.abs(x) < 0.5 * l, np.maximum(out, 0.0), 0.0)


def bspline_integral(l: int, x) -> np.ndarray:
    """``int_{-inf}^x B_l``."""
    if l < 1:
        raise ValueError("B-spline order must be >= 1")
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for k in range(l + 1):
        y = x + 0.5 * l - k
        out += (-1) ** k * math.comb(l, k) * np.where(y > 0, y, 0.0) ** l
    out /= math.factorial(l)
    return np.where(x <= -0.5 * l, 0.0, np.where(x >= 0.5 * l, 1.0, out))


@lru_cache(maxsize=None)
def bspline_moments(l: int, imax: int) -> tuple:
    """Exact moments ``int x^i B_l(x) dx`` for ``i <= imax``.

    ``B_l`` is the density of a sum of ``l`` independent uniforms on (-1/2, 1/2),
    so its moments follow by binomial convolution of the uniform moments.
    """
    unif = [Fraction(1, (i + 1) * 2 ** i) if i % 2 == 0 else Fraction(0) for i in range(imax + 1)]
    m = list(unif)
    for _ in range(l - 1):
        m = [sum(math.comb(n, k) * m[k] * unif[n - k] for k in range(n + 1))
             for n in range(imax + 1)]
    return tuple(m)


def _shifted_moment(l, i, j):
    """``int x^i B_l(x - j) dx`` exactly."""
    m = bspline_moments(l, i)
    return sum(math.comb(i, k) * Fraction(j) ** (i - k) * m[k] for k in range(i + 1))


@lru_cache(maxsize=None)
def kernel_coefficients_exact(l: int, q: int) -> tuple:
    """Rational ``k_{-(q-1)}, ..., k_{q-1}`` from the even moment conditions."""
    if l < 1 or q < 1:
        raise ValueError("need l >= 1 and q >= 1")
    # unknowns k_0..k_{q-1}; k_{-j} = k_j so odd moments vanish automatically
    A = [[(_shifted_moment(l, 2 * r, 0) if j == 0 else
           _shifted_moment(l, 2 * r, j) + _shifted_moment(l, 2 * r, -j))
          for j in range(q)] for r in range(q)]
    rhs = [Fraction(1)] + [Fraction(0)] * (q - 1)
    k = _solve_exact(A, rhs)
    return tuple(k[:0:-1]) + tuple(k)


def _solve_exact(A, b):
    n = len(b)
    M = [row[:] + [b[i]] for i, row in enumerate(A)]
    for c in range(n):
        p = next((r for r in range(c, n) if M[r][c] != 0), None)
        if p is None:
            raise ArithmeticError("singular moment system")
        M[c], M[p] = M[p], M[c]
        for r in range(n):
            if r != c and M[r][c] != 0:
                f = M[r][c] / M[c][c]
                M[r] = [x - f * y for x, y in zip(M[r], M[c])]
    return [M[i][n] / M[i][i] for i in range(n)]


def kernel_coefficients(l: int, q: int) -> np.ndarray:
    return np.array([float(v) for v in kernel_coefficients_exact(l, q)])


@dataclass(frozen=True, eq=False)
class SmoothingKernel:
    l: int
    q: int
    k: np.ndarray
    h: float

    @classmethod
    def build(cls, l: int, q: int, h: float) -> "SmoothingKernel":
        if h <= 0:
            raise ValueError("kernel width h must be positive")
        return cls(l, q, kernel_coefficients(l, q), float(h))

    @property
    def shifts(self) -> np.ndarray:
        return np.arange(-(self.q - 1), self.q)

    @property
    def half_width(self) -> float:
        """Half-width of the support of ``K`` (unscaled)."""
        return (self.q - 1) + 0.5 * self.l

    @property
    def knots(self) -> np.ndarray:
        """Breakpoints of the piecewise polynomial ``K`` (unscaled)."""
        w = self.half_width
        return np.arange(-w, w + 0.5, 1.0)

    def unscaled(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return sum(kj * bspline(self.l, x - j) for kj, j in zip(self.k, self.shifts))

    def unscaled_integral(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return sum(kj * bspline_integral(self.l, x - j) for kj, j in zip(self.k, self.shifts))

    def __call__(self, x) -> np.ndarray:
        return kernel_eval(self, x)

    def coefficients_text(self) -> str:
        exact = kernel_coefficients_exact(self.l, self.q)
        return "".join(f"k[{j}] = {v} ({float(v)!r})\n" for j, v in zip(self.shifts, exact))


def kernel_eval(ker: SmoothingKernel, x) -> np.ndarray:
    """``K_h(x) = K(x / h) / h``."""
    return ker.unscaled(np.asarray(x, dtype=float) / ker.h) / ker.h


def kernel_moments(ker: SmoothingKernel, imax: int, scaled: bool = False) -> np.ndarray:
    """``int K(x) x^i dx`` for ``i <= imax`` by Gauss rules exact on each polynomial piece."""
    rule = gauss_legendre(max(ker.l, 1) + imax // 2 + 2)
    kn = ker.knots
    out = np.zeros(imax + 1)
    for a, b in zip(kn[:-1], kn[1:]):
        x, w = rule.on(a, b)
        # stay inside the open piece so the order-1 box takes its interior value
        vals = ker.unscaled(x)
        out += np.array([np.dot(w, vals * x ** i) for i in range(imax + 1)])
    if scaled:
        out *= ker.h ** np.arange(imax + 1)
    return out


def convolve_polynomial(ker: SmoothingKernel, coeffs, x) -> np.ndarray:
    """``(K_h * p)(x)`` for ``p(t) = sum coeffs[i] t**i``, integrated exactly piecewise."""
    coeffs = np.asarray(coeffs, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    rule = gauss_legendre(ker.l + len(coeffs) + 1)
    kn = ker.knots * ker.h
    out = np.zeros_like(x)
    for a, b in zip(kn[:-1], kn[1:]):
        y, w = rule.on(a, b)
        kv = kernel_eval(ker, y)
        pv = np.polynomial.polynomial.polyval(x[:, None] - y[None, :], coeffs)
        out += pv @ (w * kv)
    return out


class UniformityError(ValueError):
    """The K-operator window leaves the uniform part of the mesh."""

    def __init__(self, msg, required_trim=None):
        super().__init__(msg)
        self.required_trim = required_trim


@dataclass(frozen=True, eq=False)
class PostProcessed:
    """``x -> int K_h(x - t) psi_h(t) dt`` restricted to an observation region."""

    kernel: SmoothingKernel
    solution: GalerkinSolution
    region: ObservationRegion

    def __call__(self, seg: int, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        mesh = self.solution.mesh
        idx = np.nonzero(mesh.segment_of == seg)[0]
        lo = mesh.local_starts()[idx]
        hi = lo + mesh.lengths[idx]
        h = self.kernel.h
        c = self.solution.coefficients[idx]
        # int over [lo, hi] of K_h(s - t) dt = F((s - lo)/h) - F((s - hi)/h)
        F = self.kernel.unscaled_integral
        weights = F((s[:, None] - lo[None, :]) / h) - F((s[:, None] - hi[None, :]) / h)
        return weights @ c


def _uniform_run(mesh, seg, h, rtol=1e-9):
    """Local extent of the longest run of elements of length ``h`` on ``seg``."""
    idx = np.nonzero(mesh.segment_of == seg)[0]
    lo = mesh.local_starts()[idx]
    L = mesh.lengths[idx]
    ok = np.abs(L - h) <= rtol * h
    best, start = (0.0, 0.0), None
    for k in range(len(idx) + 1):
        if k < len(idx) and ok[k]:
            if start is None:
                start = k
        elif start is not None:
            run = (lo[start], lo[k - 1] + L[k - 1])
            if run[1] - run[0] > best[1] - best[0]:
                best = run
            start = None
    return best


def apply(ker: SmoothingKernel, sol: GalerkinSolution, region: ObservationRegion) -> PostProcessed:
    """K-operator applied to ``sol`` for evaluation on ``region``.

    The region expanded by the kernel half-width must lie in a part of the
    mesh that is uniform with spacing ``ker.h``. On such a window the cut-off
    function is identically one, so no explicit cut-off is built.
    """
    mesh = sol.mesh
    poly = mesh.polygon
    w = ker.half_width * ker.h
    for j, iv in enumerate(region.intervals):
        if iv is None:
            continue
        sg = poly.segments[j]
        r0, r1 = iv[0] - sg.arc_offset, iv[1] - sg.arc_offset
        u0, u1 = _uniform_run(mesh, j, ker.h)
        tol = 1e-9 * ker.h
        if r0 - w < u0 - tol or r1 + w > u1 + tol:
            need = max(u0, sg.length - u1) + w
            raise UniformityError(
                f"segment {j}: kernel window [{r0 - w:.4g}, {r1 + w:.4g}] leaves the uniform "
                f"zone [{u0:.4g}, {u1:.4g}]; trim must be at least {need:.4g}",
                required_trim=need)
    return PostProcessed(ker, sol, region)


def postprocessed_error(ker: SmoothingKernel, sol: GalerkinSolution, prob,
                        region: ObservationRegion, order: int = 16) -> float:
    """``||K_h(psi_h) - psi||_{L2(region)}``."""
    pp = apply(ker, sol, region)
    return region_l2_error(sol.mesh, region, lambda j, e, s: pp(j, s), prob.density, order=order)


__all__ = ["bspline", "bspline_integral", "bspline_moments", "kernel_coefficients",
           "kernel_coefficients_exact", "SmoothingKernel", "kernel_eval", "kernel_moments",
           "convolve_polynomial", "apply", "postprocessed_error", "PostProcessed",
           "UniformityError", "region_pieces"]
