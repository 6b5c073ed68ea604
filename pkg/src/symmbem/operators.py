"""Single layer Galerkin matrix and double layer potential on polygonal boundaries.

Kernels, with the normalization used throughout the package::

    V psi(x) = -1/pi  int log|x - y| psi(y) ds_y
    K g(x)   = -1/pi  int d/dn_y log|x - y| g(y) ds_y
             = -1/pi  int ((y - x) . n_y) / |x - y|^2 g(y) ds_y

With this scaling ``K 1 = -1`` at every non-vertex boundary point and the
interior Dirichlet problem with data ``g`` satisfies ``V dg/dn = (I + K) g``.
"""

from __future__ import annotations

import numpy as np

from .geometry import Mesh, Polygon
from .quadrature import composite, gauss_legendre, geometric_breaks

SINGLE_LAYER_FACTOR = -1.0 / np.pi
DOUBLE_LAYER_FACTOR = -1.0 / np.pi

# pairs farther apart than this multiple of the larger element length are
# integrated with a plain tensor Gauss rule
FAR_RATIO = 2.0
FAR_ORDER = 8
NEAR_ORDER = 16
NEAR_RATIO = 0.2
NEAR_MAX_LEVELS = 16
_ROW_CHUNK = 8_000_000


def log_line_integral(x, start, tangent, length):
    """``int_0^length log|x - (start + t*tangent)| dt`` in closed form.

    Broadcasts over leading dimensions of ``x`` (shape ``(..., 2)``) and of the
    element data.
    """
    d = x - start
    u = d[..., 0] * tangent[..., 0] + d[..., 1] * tangent[..., 1]
    v = np.abs(d[..., 0] * tangent[..., 1] - d[..., 1] * tangent[..., 0])
    return _log_antideriv(u, v) - _log_antideriv(u - length, v)


def _log_antideriv(s, v):
    # d/ds of the result is log(sqrt(s^2 + v^2))
    r2 = s * s + v * v
    with np.errstate(divide="ignore", invalid="ignore"):
        slog = np.where(s == 0.0, 0.0, 0.5 * s * np.log(np.where(r2 > 0, r2, 1.0)))
        ang = np.where(v > 0.0, v * np.arctan(s / np.where(v > 0, v, 1.0)), 0.0)
    return slog - s + ang


def coincident_entry(h: float) -> float:
    """``-1/pi`` times the double integral of ``log|s - t|`` over ``[0, h]^2``."""
    return SINGLE_LAYER_FACTOR * h * h * (np.log(h) - 1.5)


def _element_data(mesh: Mesh):
    a, b = mesh.element_endpoints()
    L = mesh.lengths
    tau = (b - a) / L[:, None]
    return a, b, tau, L


def _point_segment_distance(p, a, b):
    ab = b - a
    t = np.clip(np.einsum("...k,...k->...", p - a, ab) / np.einsum("...k,...k->...", ab, ab), 0, 1)
    q = a + t[..., None] * ab
    return np.hypot(*np.moveaxis(p - q, -1, 0))


def element_distances(mesh: Mesh) -> np.ndarray:
    """Euclidean distance between every pair of elements."""
    a, b, _, _ = _element_data(mesh)
    A, B = a[:, None, :], b[:, None, :]
    C, D = a[None, :, :], b[None, :, :]
    d = np.minimum.reduce([
        _point_segment_distance(A, C, D), _point_segment_distance(B, C, D),
        _point_segment_distance(C, A, B), _point_segment_distance(D, A, B)])
    np.fill_diagonal(d, 0.0)
    return d


def classify_pair(mesh: Mesh, i: int, j: int) -> str:
    """``"coincident"``, ``"adjacent"`` (shared breakpoint) or ``"separated"``."""
    n = mesh.n_elements
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"element index out of range for {n} elements")
    if i == j:
        return "coincident"
    if abs(i - j) == 1 or {i, j} == {0, n - 1}:
        return "adjacent"
    return "separated"


def _near_entry(a_o, tau_o, L_o, a_i, b_i, tau_i, L_i, dist):
    """Outer Gauss on a geometrically graded outer element, closed-form inner integral."""
    # point of the outer element closest to the inner one
    cands = [0.0, L_o]
    for p in (a_i, b_i):
        cands.append(float(np.clip(np.dot(p - a_o, tau_o), 0.0, L_o)))
    cands = np.array(cands)
    pts = a_o + cands[:, None] * tau_o
    dd = _point_segment_distance(pts, a_i, b_i)
    s_star = cands[np.argmin(dd)]

    target = max(dist, 1e-10 * L_o)
    levels = int(np.clip(np.ceil(np.log(target / L_o) / np.log(NEAR_RATIO)) + 1, 1, NEAR_MAX_LEVELS))
    tol = 1e-12 * L_o
    if s_star <= tol:
        breaks = geometric_breaks(0.0, L_o, "a", NEAR_RATIO, levels)
    elif s_star >= L_o - tol:
        breaks = geometric_breaks(0.0, L_o, "b", NEAR_RATIO, levels)
    else:
        breaks = np.concatenate([geometric_breaks(0.0, s_star, "b", NEAR_RATIO, levels),
                                 geometric_breaks(s_star, L_o, "a", NEAR_RATIO, levels)[1:]])
    s, w = composite(breaks, NEAR_ORDER)
    x = a_o + s[:, None] * tau_o
    return SINGLE_LAYER_FACTOR * float(np.dot(w, log_line_integral(x, a_i, tau_i, L_i)))


def _pair_entry(a, b, tau, L, dist, i, j):
    if i == j:
        return coincident_entry(L[i])
    # the longer element takes the closed-form inner integral
    o, k = (i, j) if L[i] <= L[j] else (j, i)
    return _near_entry(a[o], tau[o], L[o], a[k], b[k], tau[k], L[k], dist)


def _far_block(a, tau, L, rows, cols):
    rule = gauss_legendre(FAR_ORDER)
    s = 0.5 * (rule.nodes + 1.0)
    w = 0.5 * rule.weights
    xr = a[rows, None, :] + (L[rows, None] * s)[..., None] * tau[rows, None, :]
    xc = a[cols, None, :] + (L[cols, None] * s)[..., None] * tau[cols, None, :]
    diff = xr[:, None, :, None, :] - xc[None, :, None, :, :]
    r2 = np.einsum("...k,...k->...", diff, diff)
    with np.errstate(divide="ignore"):
        lg = 0.5 * np.log(r2)
    val = np.einsum("p,q,ijpq->ij", w, w, np.where(np.isfinite(lg), lg, 0.0))
    return SINGLE_LAYER_FACTOR * val * L[rows, None] * L[None, cols]


def single_layer_entry(mesh: Mesh, i: int, j: int) -> float:
    """``-1/pi`` times the double integral of ``log|x - y|`` over elements ``i`` and ``j``."""
    classify_pair(mesh, i, j)
    a, b, tau, L = _element_data(mesh)
    dist = float(np.min([
        _point_segment_distance(a[i], a[j], b[j]), _point_segment_distance(b[i], a[j], b[j]),
        _point_segment_distance(a[j], a[i], b[i]), _point_segment_distance(b[j], a[i], b[i])]))
    if i != j and dist >= FAR_RATIO * max(L[i], L[j]):
        return float(_far_block(a, tau, L, np.array([i]), np.array([j]))[0, 0])
    return _pair_entry(a, b, tau, L, dist, i, j)


def assemble_matrix(mesh: Mesh) -> np.ndarray:
    """Dense Galerkin matrix of the single layer operator for piecewise constants.

    The upper triangle is computed and mirrored, so the result is exactly symmetric.
    """
    a, b, tau, L = _element_data(mesh)
    n = mesh.n_elements
    dist = element_distances(mesh)
    V = np.empty((n, n))
    step = max(1, _ROW_CHUNK // (n * FAR_ORDER * FAR_ORDER))
    cols = np.arange(n)
    for r0 in range(0, n, step):
        rows = np.arange(r0, min(n, r0 + step))
        V[rows] = _far_block(a, tau, L, rows, cols)
    near = dist < FAR_RATIO * np.maximum(L[:, None], L[None, :])
    for i, j in zip(*np.nonzero(np.triu(near))):
        V[i, j] = _pair_entry(a, b, tau, L, dist[i, j], i, j)
    return np.triu(V) + np.triu(V, 1).T


# ---------------------------------------------------------------------------
# double layer
# ---------------------------------------------------------------------------

def _source_rule(L, levels, ratio=0.25, order=16):
    return composite(geometric_breaks(0.0, L, "both", ratio, levels), order)


def double_layer_apply(polygon: Polygon, g, seg: int, s, *, min_levels: int = 12,
                       max_levels: int = 45, ratio: float = 0.25) -> np.ndarray:
    """``(K g)(x)`` at points ``x`` with local coordinates ``s`` on segment ``seg``.

    ``g`` maps an array of points of shape ``(..., 2)`` to values. The host
    segment contributes nothing because ``(y - x) . n_y`` vanishes along it.
    Every other segment is integrated with Gauss panels shrinking by ``ratio``
    toward both of its ends, deep enough that the smallest panel is far below
    the distance of the closest evaluation point to a vertex.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    host = polygon.segments[seg]
    if np.any((s <= 0) | (s >= host.length)):
        raise ValueError("double layer evaluation at a vertex is not defined")
    x = host.point(s)
    d_min = float(np.min(np.minimum(s, host.length - s)))
    out = np.zeros(len(s))
    for k, src in enumerate(polygon.segments):
        if k == seg:
            continue
        need = np.log(1e-8 * d_min / src.length) / np.log(ratio)
        levels = int(np.clip(np.ceil(need), min_levels, max_levels))
        t, w = _source_rule(src.length, levels, ratio)
        y = src.point(t)
        gw = w * g(y)
        n = src.outward_normal
        chunk = max(1, 4_000_000 // len(t))
        for c0 in range(0, len(s), chunk):
            xx = x[c0:c0 + chunk, None, :]
            diff = y[None, :, :] - xx
            r2 = diff[..., 0] ** 2 + diff[..., 1] ** 2
            num = diff[..., 0] * n[0] + diff[..., 1] * n[1]
            with np.errstate(divide="ignore", invalid="ignore"):
                ker = np.where(r2 > 0, num / r2, 0.0)
            out[c0:c0 + chunk] += ker @ gw
    return DOUBLE_LAYER_FACTOR * out


def assemble_rhs(mesh: Mesh, f, *, order: int = 16, corner_levels: int = 14,
                 corner_ratio: float = 0.25) -> np.ndarray:
    """Load vector ``b_i = int_{e_i} f ds`` for a boundary function ``f(seg, s)``.

    ``f`` receives a segment index and local arclengths on that segment. Elements
    touching a vertex are integrated on panels shrinking geometrically toward it.
    """
    poly = mesh.polygon
    b = np.zeros(mesh.n_elements)
    loc0 = mesh.local_starts()
    L = mesh.lengths
    for j in range(poly.n_segments):
        idx = np.nonzero(mesh.segment_of == j)[0]
        nodes, weights, owner = [], [], []
        for pos, e in enumerate(idx):
            lo, hi = loc0[e], loc0[e] + L[e]
            if pos == 0 and pos == len(idx) - 1:
                s, w = composite(geometric_breaks(lo, hi, "both", corner_ratio, corner_levels), order)
            elif pos == 0:
                s, w = composite(geometric_breaks(lo, hi, "a", corner_ratio, corner_levels), order)
            elif pos == len(idx) - 1:
                s, w = composite(geometric_breaks(lo, hi, "b", corner_ratio, corner_levels), order)
            else:
                s, w = composite([lo, hi], order)
            nodes.append(s)
            weights.append(w)
            owner.append(np.full(len(s), e))
        s = np.concatenate(nodes)
        vals = np.asarray(f(j, s), dtype=float)
        if not np.all(np.isfinite(vals)):
            bad = np.concatenate(owner)[~np.isfinite(vals)][0]
            raise FloatingPointError(f"right-hand side not finite on element {bad}")
        b += np.bincount(np.concatenate(owner), weights=np.concatenate(weights) * vals,
                         minlength=mesh.n_elements)
    return b
