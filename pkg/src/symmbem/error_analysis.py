"""L2 errors on corner-trimmed regions, EOCs and convergence tables."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .galerkin import GalerkinSolution, energy_error, solve
from .geometry import (Mesh, ObservationRegion, combined_mesh, graded_mesh, trim_region,
                       uniform_mesh)
from .quadrature import composite, graded_rule


def region_pieces(mesh: Mesh, region: ObservationRegion):
    """Yield ``(seg, element, lo, hi, touches)`` for every element/region overlap.

    ``lo, hi`` are local arclengths on segment ``seg``; ``touches`` is ``"a"``,
    ``"b"``, ``"both"`` or ``""`` depending on which ends of the piece are vertices.
    """
    poly = mesh.polygon
    loc0 = mesh.local_starts()
    L = mesh.lengths
    for j, iv in enumerate(region.intervals):
        if iv is None:
            continue
        sg = poly.segments[j]
        r0, r1 = iv[0] - sg.arc_offset, iv[1] - sg.arc_offset
        for e in np.nonzero(mesh.segment_of == j)[0]:
            lo, hi = max(loc0[e], r0), min(loc0[e] + L[e], r1)
            if hi <= lo:
                continue
            at_a = lo <= 1e-14 * sg.length
            at_b = hi >= sg.length * (1 - 1e-14)
            touches = "both" if at_a and at_b else "a" if at_a else "b" if at_b else ""
            yield j, int(e), lo, hi, touches


def region_l2_error(mesh: Mesh, region: ObservationRegion, approx, exact, *, order: int = 16,
                    corner_levels: int = 20, corner_ratio: float = 0.5) -> float:
    """``||approx - exact||`` on ``region``; both are functions ``(seg, element, s)``.

    Pieces ending at a vertex are split geometrically toward it, because the
    squared error may blow up like ``r**(-2/3)`` there; see :func:`graded_rule`.
    """
    total = 0.0
    for j, e, lo, hi, touches in region_pieces(mesh, region):
        if touches:
            s, w = graded_rule(lo, hi, touches, corner_ratio, corner_levels, order)
        else:
            s, w = composite([lo, hi], order)
        diff = approx(j, e, s) - exact(j, s)
        total += float(np.dot(w, diff * diff))
    return math.sqrt(total)


def local_l2_error(sol: GalerkinSolution, prob, region: ObservationRegion, **quad) -> float:
    """``||psi - psi_h||_{L2(region)}`` for the piecewise constant Galerkin solution."""
    c = sol.coefficients
    return region_l2_error(sol.mesh, region, lambda j, e, s: np.full(len(s), c[e]),
                           prob.density, **quad)


def eoc(e_coarse: float, e_fine: float, ratio: float = 2.0) -> float:
    if e_coarse <= 0 or e_fine <= 0:
        raise ValueError("errors must be positive")
    if ratio <= 1:
        raise ValueError("mesh ratio must exceed 1")
    return math.log(e_coarse / e_fine) / math.log(ratio)


@dataclass(frozen=True)
class MeshSpec:
    """How to build the mesh for a given ``N``; ``zone`` in unscaled units."""

    kind: str = "uniform"
    beta_g: float = 5.0
    zone: float = 0.25

    def build(self, polygon, N: int) -> Mesh:
        if self.kind == "uniform":
            return uniform_mesh(polygon, N)
        zone = self.zone * polygon.scale
        if self.kind == "graded":
            return graded_mesh(polygon, N, self.beta_g, zone)
        if self.kind == "combined":
            return combined_mesh(polygon, N, self.beta_g, zone)
        raise ValueError(f"unknown mesh kind {self.kind!r}")

    def describe(self) -> str:
        if self.kind == "uniform":
            return "uniform"
        return f"{self.kind}(beta_g={self.beta_g:g}, zone={self.zone:g})"


@dataclass
class ConvergenceTable:
    Ns: list
    trims: list
    errors: dict  # (N, a) -> error
    metadata: dict = field(default_factory=dict)

    def eoc(self, N: int, a: float) -> Optional[float]:
        """EOC from ``N`` to the next entry of ``Ns`` (``None`` on the last row)."""
        k = self.Ns.index(N)
        if k + 1 >= len(self.Ns):
            return None
        e0, e1 = self.errors[(N, a)], self.errors[(self.Ns[k + 1], a)]
        if not (e0 > 0 and e1 > 0):
            return None
        return eoc(e0, e1, self.Ns[k + 1] / N)

    def eocs(self, a: float) -> list:
        return [self.eoc(N, a) for N in self.Ns[:-1]]

    def column(self, a: float) -> list:
        return [self.errors[(N, a)] for N in self.Ns]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["N", "a", "error", "eoc"])
        for N in self.Ns:
            for a in self.trims:
                r = self.eoc(N, a)
                w.writerow([N, repr(float(a)), f"{self.errors[(N, a)]:.12e}",
                            "" if r is None else f"{r:.6f}"])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, **metadata) -> "ConvergenceTable":
        rows = list(csv.DictReader(io.StringIO(text)))
        Ns = sorted({int(r["N"]) for r in rows})
        trims = list(dict.fromkeys(float(r["a"]) for r in rows))
        errors = {(int(r["N"]), float(r["a"])): float(r["error"]) for r in rows}
        return cls(Ns, trims, errors, dict(metadata))

    def to_markdown(self) -> str:
        """Pivot into one error and one EOC column per trim, EOCs between rows."""
        head = ["N"]
        for a in self.trims:
            head += [f"a={a:g}", "EOC"]
        lines = []
        title = self.metadata.get("title")
        if title:
            lines += [f"**{title}**", ""]
        lines.append("| " + " | ".join(head) + " |")
        lines.append("|" + "|".join(["---:"] * len(head)) + "|")
        for k, N in enumerate(self.Ns):
            cells = [str(N)]
            for a in self.trims:
                cells += [f"{self.errors[(N, a)]:.2e}", ""]
            lines.append("| " + " | ".join(cells) + " |")
            if k + 1 < len(self.Ns):
                cells = [""]
                for a in self.trims:
                    r = self.eoc(N, a)
                    cells += ["", "" if r is None else f"{r:.2f}"]
                lines.append("| " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"


def _cell(args):
    prob, spec, N, trims, kernel, norm, quad = args
    from .postprocess import SmoothingKernel, postprocessed_error

    poly = prob.polygon
    mesh = spec.build(poly, N)
    sol = solve(mesh, prob)
    out = {}
    if norm == "energy":
        return {a: energy_error(sol, prob) for a in trims}, sol
    for a in trims:
        region = trim_region(poly, a * poly.scale)
        if kernel is None:
            out[a] = local_l2_error(sol, prob, region, **quad)
        else:
            ker = SmoothingKernel.build(kernel[0], kernel[1], mesh.uniform_spacing)
            out[a] = postprocessed_error(ker, sol, prob, region, order=quad.get("order", 16))
    return out, sol


def convergence_table(prob, mesh_spec: MeshSpec, Ns: Sequence[int], trims: Sequence[float],
                      postprocess: Optional[tuple] = None, *, norm: str = "l2",
                      jobs: int = 1, keep_solutions: bool = False,
                      quad: Optional[dict] = None) -> ConvergenceTable:
    """Solve for every ``N`` and tabulate errors for every trim ``a``.

    Trims are given on the unscaled geometry and multiplied by the polygon scale.
    ``postprocess`` is an optional ``(l, q)`` pair; the errors are then those of
    the K-operator output. ``norm="energy"`` tabulates energy errors instead.
    ``quad`` overrides ``order``/``corner_levels`` of the error quadrature.
    """
    Ns = [int(n) for n in Ns]
    if any(b != 2 * a for a, b in zip(Ns[:-1], Ns[1:])):
        raise ValueError("Ns must double from one entry to the next")
    trims = [float(a) for a in trims]
    tasks = [(prob, mesh_spec, N, trims, postprocess, norm, dict(quad or {})) for N in Ns]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_cell, tasks))
    else:
        results = [_cell(t) for t in tasks]
    errors = {(N, a): res[0][a] for N, res in zip(Ns, results) for a in trims}
    meta = {"mesh": mesh_spec.describe(), "norm": norm,
            "kernel": None if postprocess is None else tuple(postprocess),
            "problem": f"Im(w^{prob.exponent:.6g})"}
    if keep_solutions:
        meta["solutions"] = {N: res[1] for N, res in zip(Ns, results)}
    return ConvergenceTable(Ns, trims, errors, meta)
