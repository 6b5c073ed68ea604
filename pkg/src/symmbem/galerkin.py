"""Galerkin solution of ``V psi = f`` with piecewise constant trial and test functions."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .geometry import Mesh
from .operators import assemble_matrix, assemble_rhs

RESIDUAL_WARN = 1e-8


class CoercivityError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class GalerkinSolution:
    mesh: Mesh
    coefficients: np.ndarray
    load: np.ndarray
    residual: float
    r: int = 1
    warnings: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if len(self.coefficients) != self.mesh.n_elements:
            raise ValueError("one coefficient per element expected")

    def to_text(self) -> str:
        """``breakpoint coefficient`` rows; the last breakpoint repeats the final value."""
        bp = self.mesh.breakpoints
        c = np.append(self.coefficients, self.coefficients[-1])
        return "".join(f"{float(t)!r} {float(v)!r}\n" for t, v in zip(bp, c))


def solve_system(V: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Cholesky solve with symmetric diagonal scaling.

    The scaling keeps graded meshes (entries spanning many orders of
    magnitude) well conditioned; it does not change the solution.
    """
    diag = np.diag(V)
    if np.any(~(diag > 0)):
        raise CoercivityError("coercivity violated: check capacity scaling (non-positive diagonal)")
    d = np.sqrt(diag)
    A = V / d[:, None] / d[None, :]
    try:
        fac = linalg.cho_factor(A, lower=False, check_finite=True)
    except linalg.LinAlgError as exc:
        raise CoercivityError("coercivity violated: check capacity scaling") from exc
    return linalg.cho_solve(fac, b / d) / d


def relative_residual(V, c, b) -> float:
    nb = np.linalg.norm(b)
    res = np.linalg.norm(V @ c - b)
    return float(res / nb) if nb > 0 else float(res)


def solve(mesh: Mesh, problem, *, r: int = 1, matrix=None) -> GalerkinSolution:
    """Assemble and solve the Galerkin system for ``problem``.

    ``problem`` is a :class:`~symmbem.problems.HarmonicProblem`, any object with
    an ``rhs(seg, s)`` method, a plain callable ``f(seg, s)``, or a precomputed
    load vector.
    """
    if r != 1:
        raise NotImplementedError("only piecewise constants (r=1) are implemented")
    V = assemble_matrix(mesh) if matrix is None else matrix
    if isinstance(problem, np.ndarray):
        b = problem.astype(float)
    else:
        f = problem.rhs if hasattr(problem, "rhs") else problem
        b = assemble_rhs(mesh, f)
    c = solve_system(V, b)
    res = relative_residual(V, c, b)
    notes = ()
    if res > RESIDUAL_WARN:
        msg = f"Galerkin residual {res:.2e} exceeds {RESIDUAL_WARN:.0e}"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes = (msg,)
    return GalerkinSolution(mesh, c, b, res, r, notes)


def evaluate(sol: GalerkinSolution, t) -> np.ndarray:
    """Value of ``psi_h`` at global arclength ``t`` (elements are left-closed)."""
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t >= sol.mesh.polygon.perimeter)):
        raise ValueError("arclength outside [0, perimeter)")
    return sol.coefficients[sol.mesh.locate(t)]


def energy_error(sol: GalerkinSolution, problem) -> float:
    """``<V(psi - psi_h), psi - psi_h>**0.5`` via Galerkin orthogonality.

    Equals ``sqrt(<f, psi> - <f, psi_h>)``; the first term comes from
    ``problem.load_density_product``, the second from the load vector.
    """
    sq = problem.load_density_product - float(np.dot(sol.load, sol.coefficients))
    if sq < -1e-12 * max(1.0, abs(problem.load_density_product)):
        raise ArithmeticError(f"negative squared energy error {sq:.3e}: quadrature inconsistent")
    return float(np.sqrt(max(sq, 0.0)))
