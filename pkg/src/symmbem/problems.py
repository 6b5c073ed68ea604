"""Manufactured harmonic problems with a corner singularity.

The Dirichlet data is ``g = Im(w**mu)`` with ``w = exp(-i*theta0) * (z - z_c)``.
The argument of ``w`` is taken in ``[cut - 2*pi, cut)``, where ``cut`` points
into the exterior wedge of the singular corner, so ``g`` is continuous on the
closed polygon. The exact density of ``V psi = (I + K) g`` is ``psi = dg/dn``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .geometry import Polygon
from .operators import SINGLE_LAYER_FACTOR, double_layer_apply
from .quadrature import adaptive_integrate, composite, geometric_breaks


@dataclass(frozen=True, eq=False)
class HarmonicProblem:
    polygon: Polygon
    exponent: float = 2.0 / 3.0
    center: complex = 0j
    branch_rotation: float = 0.0
    cut: float = 1.75 * np.pi
    singular_corner: Optional[int] = None

    @classmethod
    def corner(cls, polygon: Polygon, corner: Optional[int] = None,
               exponent: Optional[float] = None) -> "HarmonicProblem":
        """Problem singular at ``corner`` (default: the largest interior angle).

        The default exponent ``pi / beta`` makes ``g`` vanish on both edges of the
        corner. For the L-shape this is ``Im(z**(2/3))`` with the re-entrant
        corner at the origin.
        """
        if corner is None:
            corner = int(np.argmax(polygon.interior_angles))
        beta = float(polygon.interior_angles[corner])
        v = polygon.vertices[corner]
        tau = polygon.segments[corner].tangent
        return cls(polygon,
                   exponent=np.pi / beta if exponent is None else exponent,
                   center=complex(v[0], v[1]),
                   branch_rotation=float(np.arctan2(tau[1], tau[0])),
                   cut=np.pi + 0.5 * beta,
                   singular_corner=corner)

    @classmethod
    def smooth(cls, polygon: Polygon, exponent: float = 2.0,
               center: complex = 0.1 + 0.05j) -> "HarmonicProblem":
        """Integer exponent: ``g`` is a harmonic polynomial, no singularity."""
        if exponent != int(exponent) or exponent < 1:
            raise ValueError("smooth problems need a positive integer exponent")
        return cls(polygon, exponent=float(exponent), center=center)

    # -- the complex potential -------------------------------------------------

    def _w(self, x):
        x = np.asarray(x, dtype=float)
        z = x[..., 0] + 1j * x[..., 1] - self.center
        w = np.exp(-1j * self.branch_rotation) * z
        r = np.abs(w)
        phi = np.angle(w)
        theta = np.mod(phi - self.cut, 2 * np.pi) + self.cut - 2 * np.pi
        return r, theta

    def dirichlet_data(self, x) -> np.ndarray:
        """``g`` at points ``x`` of shape ``(..., 2)`` (any point of the plane)."""
        r, theta = self._w(x)
        return r ** self.exponent * np.sin(self.exponent * theta)

    def gradient(self, x) -> np.ndarray:
        """``grad g`` from ``F'(z)``: ``g_x = Im F'``, ``g_y = Re F'``."""
        r, theta = self._w(x)
        mu = self.exponent
        if mu < 1 and np.any(r == 0):
            raise ValueError("gradient is unbounded at the singular corner")
        with np.errstate(divide="ignore", invalid="ignore"):
            mag = np.where(r > 0, mu * r ** (mu - 1), 0.0 if mu > 1 else mu)
        dF = mag * np.exp(1j * ((mu - 1) * theta - self.branch_rotation))
        return np.stack([dF.imag, dF.real], axis=-1)

    def exact_density(self, x, normal) -> np.ndarray:
        """``psi = n . grad g`` at boundary points ``x`` with outward ``normal``."""
        gr = self.gradient(x)
        return gr[..., 0] * normal[0] + gr[..., 1] * normal[1]

    # -- boundary functions of (segment, local arclength) ----------------------

    def density(self, seg: int, s) -> np.ndarray:
        sg = self.polygon.segments[seg]
        return self.exact_density(sg.point(s), sg.outward_normal)

    def dirichlet(self, seg: int, s) -> np.ndarray:
        return self.dirichlet_data(self.polygon.segments[seg].point(s))

    def rhs(self, seg: int, s) -> np.ndarray:
        """``f = g + K g`` at local arclengths ``s`` (no vertices)."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return self.dirichlet(seg, s) + double_layer_apply(self.polygon, self.dirichlet_data, seg, s)

    @cached_property
    def load_density_product(self) -> float:
        """``<f, psi>`` over the whole boundary, needed for energy errors."""
        total = 0.0
        for j, sg in enumerate(self.polygon.segments):
            s, w = composite(geometric_breaks(0.0, sg.length, "both", 0.25, 18), 16)
            total += float(np.dot(w, self.rhs(j, s) * self.density(j, s)))
        return total


def single_layer_of_density(prob: HarmonicProblem, seg: int, s: float, tol: float = 1e-11) -> float:
    """``(V psi)(x)`` at one boundary point by adaptive quadrature.

    Independent of the Galerkin machinery; comparing it with ``prob.rhs`` checks
    signs and normalizations of the whole manufactured problem.
    """
    poly = prob.polygon
    x = poly.segments[seg].point(s)
    total = 0.0
    for j, sg in enumerate(poly.segments):
        u = float(np.dot(x - sg.start, sg.tangent))
        perp = x - sg.start - u * sg.tangent
        # log|x - y| with y - x = (t - u) * tangent - perp
        def integrand(t, sg=sg, u=u, perp=perp, j=j):
            d = (t - u)[:, None] * sg.tangent - perp
            return np.log(np.hypot(d[:, 0], d[:, 1])) * prob.density(j, t)

        pts = [u] if j == seg else []
        total += adaptive_integrate(integrand, 0.0, sg.length, tol, points=pts)
    return SINGLE_LAYER_FACTOR * total
