"""Polygonal boundaries, boundary meshes and corner-trimmed observation regions.

Everything is parametrized by global arclength ``t`` running counter-clockwise
from the first vertex. A segment ``j`` occupies ``[arc_offset_j, arc_offset_j + L_j)``
and its local coordinate is ``t - arc_offset_j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

# breakpoints closer than this (relative to the perimeter) are the same point
_TOL = 1e-12


@dataclass(frozen=True)
class Segment:
    start: np.ndarray
    end: np.ndarray
    length: float
    tangent: np.ndarray
    outward_normal: np.ndarray
    arc_offset: float

    def point(self, s):
        """Points at local arclength ``s`` (scalar or array)."""
        s = np.asarray(s, dtype=float)
        return self.start + s[..., None] * self.tangent


def _cross(a, b):
    return a[0] * b[1] - a[1] * b[0]


def _segments_intersect(p1, p2, q1, q2):
    d1 = _cross(q2 - q1, p1 - q1)
    d2 = _cross(q2 - q1, p2 - q1)
    d3 = _cross(p2 - p1, q1 - p1)
    d4 = _cross(p2 - p1, q2 - p1)
    if d1 * d2 < 0 and d3 * d4 < 0:
        return True

    def on(a, b, c, d):
        # c collinear with ab and inside its bounding box
        lo, hi = np.minimum(a, b) - 1e-14, np.maximum(a, b) + 1e-14
        return abs(d) < 1e-14 and bool(np.all((lo <= c) & (c <= hi)))

    return on(q1, q2, p1, d1) or on(q1, q2, p2, d2) or on(p1, p2, q1, d3) or on(p1, p2, q2, d4)


@dataclass(frozen=True, eq=False)
class Polygon:
    """A simple closed polygon traversed counter-clockwise.

    ``scale`` records the accumulated scaling relative to the raw coordinates
    the polygon was created from.
    """

    vertices: np.ndarray
    scale: float = 1.0
    segments: list = field(init=False, repr=False)
    interior_angles: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ValueError("need at least three 2D vertices")
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

        n = len(v)
        area = 0.5 * sum(_cross(v[k], v[(k + 1) % n]) for k in range(n))
        if area <= 0:
            raise ValueError("vertices must be ordered counter-clockwise")

        segs = []
        offset = 0.0
        for k in range(n):
            a, b = v[k], v[(k + 1) % n]
            length = float(np.hypot(*(b - a)))
            if length <= 0:
                raise ValueError(f"repeated vertex at index {k}")
            tau = (b - a) / length
            nrm = np.array([tau[1], -tau[0]])
            segs.append(Segment(a, b, length, tau, nrm, offset))
            offset += length
        for k in range(n):
            for m in range(k + 2, n):
                if k == 0 and m == n - 1:
                    continue
                if _segments_intersect(segs[k].start, segs[k].end, segs[m].start, segs[m].end):
                    raise ValueError(f"segments {k} and {m} intersect")
        object.__setattr__(self, "segments", segs)

        angles = np.empty(n)
        for k in range(n):
            t_in = segs[k - 1].tangent
            t_out = segs[k].tangent
            turn = np.arctan2(_cross(t_in, t_out), np.dot(t_in, t_out))
            angles[k] = np.pi - turn
        angles.setflags(write=False)
        object.__setattr__(self, "interior_angles", angles)

    @property
    def n_segments(self) -> int:
        return len(self.segments)

    @property
    def perimeter(self) -> float:
        return float(sum(s.length for s in self.segments))

    @property
    def vertex_arclengths(self) -> np.ndarray:
        return np.array([s.arc_offset for s in self.segments])

    @property
    def centroid(self) -> np.ndarray:
        """Vertex average; used as the centre for rescaling."""
        return self.vertices.mean(axis=0)

    def enclosing_radius(self, center=None) -> float:
        c = self.centroid if center is None else np.asarray(center, dtype=float)
        return float(np.max(np.hypot(*(self.vertices - c).T)))

    def singularity_index(self) -> float:
        """min over corners of pi/beta and pi/(2 pi - beta)."""
        b = self.interior_angles
        return float(min(np.min(np.pi / b), np.min(np.pi / (2 * np.pi - b))))

    def scaled(self, factor: float, center=None) -> "Polygon":
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        c = self.centroid if center is None else np.asarray(center, dtype=float)
        return Polygon(c + factor * (self.vertices - c), scale=self.scale * factor)

    def segment_index(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.vertex_arclengths, t, side="right") - 1
        return np.clip(idx, 0, self.n_segments - 1)

    def point_at(self, t) -> np.ndarray:
        """Boundary points at global arclength ``t``."""
        t = np.mod(np.asarray(t, dtype=float), self.perimeter)
        idx = self.segment_index(t)
        starts = np.array([s.start for s in self.segments])
        tangents = np.array([s.tangent for s in self.segments])
        offsets = self.vertex_arclengths
        return starts[idx] + (t - offsets[idx])[..., None] * tangents[idx]

    def to_text(self) -> str:
        return "".join(f"{float(x)!r} {float(y)!r}\n" for x, y in self.vertices)

    @classmethod
    def from_text(cls, text: str, scale: float = 1.0) -> "Polygon":
        rows = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        return cls(np.array([[float(a), float(b)] for a, b in rows]), scale=scale)


def make_l_shape() -> Polygon:
    """The L-shaped polygon with sides 1 and 2, re-entrant corner at the origin."""
    return Polygon(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0],
                             [-1.0, 1.0], [-1.0, -1.0], [0.0, -1.0]]))


def scale_for_capacity(p: Polygon, radius_bound: float = 0.4) -> Polygon:
    """Shrink ``p`` about its centroid until it fits a disk of ``radius_bound``.

    A disk of radius below one has logarithmic capacity below one, which keeps
    the single layer operator with kernel ``-log|x-y|/pi`` positive definite.
    Polygons that already fit are returned unchanged.
    """
    if not 0 < radius_bound < 1:
        raise ValueError(f"radius_bound must lie in (0, 1), got {radius_bound}")
    r = p.enclosing_radius()
    if r <= radius_bound:
        return p
    return p.scaled(radius_bound / r)


@dataclass(frozen=True)
class MeshKind:
    name: str  # "uniform" | "graded" | "combined"
    N: int
    beta_g: Optional[float] = None
    zone: Optional[float] = None


@dataclass(frozen=True, eq=False)
class Mesh:
    """A partition of the boundary into straight elements.

    ``breakpoints`` holds ``n + 1`` increasing global arclengths from 0 to the
    perimeter. Element ``i`` is ``[breakpoints[i], breakpoints[i+1])``, the last
    one closed.
    """

    polygon: Polygon
    breakpoints: np.ndarray
    kind: MeshKind
    segment_of: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        bp = np.array(self.breakpoints, dtype=float)
        P = self.polygon.perimeter
        if bp[0] != 0.0 or abs(bp[-1] - P) > _TOL * P:
            raise ValueError("breakpoints must run from 0 to the perimeter")
        bp[-1] = P
        if np.any(np.diff(bp) <= 0):
            raise ValueError("element lengths must be positive")
        bp.setflags(write=False)
        object.__setattr__(self, "breakpoints", bp)

        va = self.polygon.vertex_arclengths
        for t in va:
            if np.min(np.abs(bp - t)) > _TOL * P:
                raise ValueError(f"vertex at arclength {t} is not a breakpoint")
        mids = 0.5 * (bp[:-1] + bp[1:])
        seg = self.polygon.segment_index(mids)
        seg.setflags(write=False)
        object.__setattr__(self, "segment_of", seg)

    @property
    def n_elements(self) -> int:
        return len(self.breakpoints) - 1

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def h_max(self) -> float:
        return float(self.lengths.max())

    @property
    def starts(self) -> np.ndarray:
        return self.breakpoints[:-1]

    @property
    def ends(self) -> np.ndarray:
        return self.breakpoints[1:]

    @property
    def uniform_spacing(self) -> float:
        """Nominal spacing ``perimeter / N`` of the uniform part of the mesh."""
        return self.polygon.perimeter / self.kind.N

    def local_starts(self) -> np.ndarray:
        return self.starts - self.polygon.vertex_arclengths[self.segment_of]

    def element_endpoints(self):
        """Cartesian start and end points of every element, shape (n, 2) each."""
        segs = self.polygon.segments
        a = np.array([segs[s].start for s in self.segment_of])
        tau = np.array([segs[s].tangent for s in self.segment_of])
        loc = self.local_starts()
        return a + loc[:, None] * tau, a + (loc + self.lengths)[:, None] * tau

    def locate(self, t) -> np.ndarray:
        """Element index containing global arclength ``t`` (half-open elements)."""
        t = np.asarray(t, dtype=float)
        P = self.polygon.perimeter
        if np.any((t < 0) | (t > P)):
            raise ValueError("arclength outside [0, perimeter]")
        idx = np.searchsorted(self.breakpoints, t, side="right") - 1
        return np.clip(idx, 0, self.n_elements - 1)

    def to_text(self) -> str:
        return "".join(f"{float(t)!r}\n" for t in self.breakpoints)


def uniform_mesh(p: Polygon, N: int) -> Mesh:
    """``N`` elements of equal length ``perimeter / N``."""
    if N < p.n_segments:
        raise ValueError(f"N={N} is smaller than the number of segments")
    h = p.perimeter / N
    pts = [0.0]
    for s in p.segments:
        k = s.length / h
        n = int(round(k))
        if n < 1 or abs(k - n) > 1e-9 * max(k, 1):
            raise ValueError(
                f"N={N} gives element length {h:g} which does not divide segment length {s.length:g}")
        pts.extend(s.arc_offset + s.length * np.arange(1, n + 1) / n)
    return Mesh(p, np.array(pts), MeshKind("uniform", N))


def _graded_breakpoints(p: Polygon, N: int, beta_g: float, zone: float, exact: bool):
    if beta_g < 1:
        raise ValueError("grading exponent must be >= 1")
    if zone <= 0:
        raise ValueError("zone must be positive")
    h = p.perimeter / N
    m = int(round(zone / h))
    if m < 1:
        raise ValueError(f"zone {zone:g} holds fewer than one element of size {h:g}")
    k = np.arange(m + 1) / m
    grade = zone * k ** beta_g
    pts = [0.0]
    for j, s in enumerate(p.segments):
        mid = s.length - 2 * zone
        if mid < -_TOL * s.length:
            raise ValueError(f"graded zones overlap on segment {j} (length {s.length:g})")
        loc = list(grade[1:])
        if mid > _TOL * s.length:
            ratio = mid / h
            n_mid = max(1, int(round(ratio)))
            if exact and abs(ratio - n_mid) > 1e-9 * max(ratio, 1):
                raise ValueError(
                    f"uniform part of segment {j} (length {mid:g}) is not a multiple of h={h:g}")
            loc.extend(zone + mid * np.arange(1, n_mid + 1) / n_mid)
        loc.extend((s.length - grade[::-1])[1:])
        loc[-1] = s.length
        pts.extend(s.arc_offset + np.array(loc))
    pts[-1] = p.perimeter
    return np.array(pts)


def graded_mesh(p: Polygon, N: int, beta_g: float, zone: float) -> Mesh:
    """Power-law grading toward every vertex, near-uniform elsewhere.

    Within ``zone`` of a vertex the breakpoints sit at ``zone * (k/m)**beta_g``
    with ``m = round(zone / h)`` and ``h = perimeter / N``.
    """
    return Mesh(p, _graded_breakpoints(p, N, beta_g, zone, exact=False),
                MeshKind("graded", N, beta_g, zone))


def combined_mesh(p: Polygon, N: int, beta_g: float, zone: float) -> Mesh:
    """Like :func:`graded_mesh`, but the middle of every segment is exactly
    uniform with spacing ``perimeter / N`` so the K-operator can be applied there."""
    return Mesh(p, _graded_breakpoints(p, N, beta_g, zone, exact=True),
                MeshKind("combined", N, beta_g, zone))


@dataclass(frozen=True)
class ObservationRegion:
    """Per-segment subintervals ``[a, L - a]`` in global arclength.

    ``intervals[j]`` is ``None`` when segment ``j`` is too short for the trim.
    """

    intervals: tuple
    trim: float

    @property
    def empty(self) -> list:
        return [iv is None for iv in self.intervals]

    @property
    def measure(self) -> float:
        return float(sum(b - a for iv in self.intervals if iv is not None for a, b in [iv]))

    def contains(self, other: "ObservationRegion") -> bool:
        for mine, theirs in zip(self.intervals, other.intervals):
            if theirs is None:
                continue
            if mine is None or theirs[0] < mine[0] - _TOL or theirs[1] > mine[1] + _TOL:
                return False
        return True


def trim_region(p: Polygon, a: float) -> ObservationRegion:
    """Remove arclength ``a`` (polygon units) next to every corner."""
    if a < 0:
        raise ValueError("trim must be non-negative")
    ivs = []
    for s in p.segments:
        if 2 * a >= s.length:
            ivs.append(None)
        else:
            ivs.append((s.arc_offset + a, s.arc_offset + s.length - a))
    return ObservationRegion(tuple(ivs), float(a))
