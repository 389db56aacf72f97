"""Planar convex-set algebra: zonotopes, zonogons, polygons.

Everything a relay characteristic needs lives in the complex plane, which we
identify with R^2 via ``w -> (Re w, Im w)``.  Zonotopes are kept in
G-representation (center + generators, coefficients in [-1, 1]); zonogons are
2-D zonotopes whose generators have been normalized so that a linear-time
vertex walk applies.  Polygons are CCW vertex lists and may degenerate to a
segment or a single point.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

# Absolute tolerance for collinearity / containment decisions.
GEOM_TOL = 1e-9


def as_xy(w: complex) -> np.ndarray:
    """Complex number as an (x, y) point."""
    return np.array([w.real, w.imag], dtype=float)


def as_complex(p: np.ndarray) -> complex:
    return complex(p[0], p[1])


# ---------------------------------------------------------------------------
# Zonotopes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Zonotope:
    """Centrally symmetric polytope {c + sum_i b_i g_i : b in [-1,1]^p}."""

    center: np.ndarray
    generators: np.ndarray  # shape (p, d); p may be 0

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        g = np.asarray(self.generators, dtype=float)
        if g.size == 0:
            g = g.reshape(0, c.shape[0])
        if g.ndim != 2 or g.shape[1] != c.shape[0]:
            raise ValueError("generator/center dimension mismatch")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(g))):
            raise ValueError("non-finite zonotope data")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "generators", g)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        """Random members, one per row."""
        beta = rng.uniform(-1.0, 1.0, size=(count, self.generators.shape[0]))
        return self.center + beta @ self.generators


def minkowski_sum(a: Zonotope, b: Zonotope) -> Zonotope:
    """G-representation Minkowski sum: add centers, concatenate generators."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return Zonotope(a.center + b.center,
                    np.vstack([a.generators, b.generators]))


# ---------------------------------------------------------------------------
# Zonogons
# ---------------------------------------------------------------------------


def _normalize_generators(gens: np.ndarray) -> np.ndarray:
    """Canonical generator set for the vertex walk.

    Down-pointing generators are negated (a zonotope is unchanged under
    g -> -g), exact-zero generators are dropped, coincident directions are
    merged by summation, and the result is sorted by angle ascending in
    [0, pi) so the walk traces a CCW boundary.
    """
    gens = np.asarray(gens, dtype=float).reshape(-1, 2)
    kept = []
    for g in gens:
        if g[1] < 0.0 or (g[1] == 0.0 and g[0] < 0.0):
            g = -g
        if g[0] == 0.0 and g[1] == 0.0:
            continue
        kept.append(g)
    if not kept:
        return np.zeros((0, 2))
    arr = np.array(kept)
    angles = np.arctan2(arr[:, 1], arr[:, 0])  # in [0, pi)
    order = np.argsort(angles, kind="stable")
    arr, angles = arr[order], angles[order]
    merged = [arr[0]]
    last_angle = angles[0]
    for g, ang in zip(arr[1:], angles[1:]):
        if abs(ang - last_angle) <= 1e-12:
            merged[-1] = merged[-1] + g
        else:
            merged.append(g)
            last_angle = ang
    return np.array(merged)


@dataclass(frozen=True)
class Zonogon:
    """Normalized 2-D zonotope, identified with a region of C."""

    center: np.ndarray
    generators: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(2)
        g = _normalize_generators(np.asarray(self.generators, dtype=float))
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(g))):
            raise ValueError("non-finite zonogon data")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "generators", g)

    @classmethod
    def from_complex(cls, center: complex, generators: Iterable[complex]) -> "Zonogon":
        gens = [as_xy(w) for w in generators]
        return cls(as_xy(center), np.array(gens).reshape(-1, 2))

    def as_zonotope(self) -> Zonotope:
        return Zonotope(self.center, self.generators)


def zonogon_vertices(z: Zonogon) -> "Polygon":
    """Vertices of a zonogon by the linear-time boundary walk.

    A zonogon with p generators has 2p vertices.  Starting from the
    bottommost vertex (all coefficients -1) the walk flips one coefficient
    to +1 per step in angle order, tracing the right boundary up, then flips
    them back down the left boundary.  Each vertex is evaluated as
    ``c + s @ G`` from its sign pattern so the result is bit-identical to
    enumerating sign patterns directly.
    """
    g = z.generators
    p = g.shape[0]
    if p == 0:
        return Polygon(z.center.reshape(1, 2))
    signs = np.empty((2 * p, p))
    s = -np.ones(p)
    signs[0] = s
    for i in range(p):
        s = s.copy()
        s[i] = 1.0
        signs[i + 1] = s
    for i in range(p - 1):
        s = s.copy()
        s[i] = -1.0
        signs[p + 1 + i] = s
    verts = z.center + signs @ g
    return Polygon(verts)


# ---------------------------------------------------------------------------
# Polygons
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Polygon:
    """Convex polygon as a CCW vertex array; may be a segment or a point."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float).reshape(-1, 2)
        object.__setattr__(self, "vertices", v)

    @property
    def is_empty(self) -> bool:
        return self.vertices.shape[0] == 0

    def area(self) -> float:
        v = self.vertices
        if v.shape[0] < 3:
            return 0.0
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def to_csv(self) -> str:
        """One ``re,im`` row per vertex, CCW order."""
        lines = ["re,im"]
        for p in self.vertices:
            lines.append(f"{p[0]!r},{p[1]!r}")
        return "\n".join(lines) + "\n"

    def svg_path(self) -> str:
        if self.is_empty:
            return ""
        parts = [f"M {self.vertices[0][0]:.6g} {self.vertices[0][1]:.6g}"]
        for p in self.vertices[1:]:
            parts.append(f"L {p[0]:.6g} {p[1]:.6g}")
        parts.append("Z")
        return " ".join(parts)


EMPTY_POLYGON = Polygon(np.zeros((0, 2)))


def _cross(o: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


_COLLINEAR_REL = 1e-12  # sine of the smallest angle treated as a turn


def convex_hull(points: Sequence[np.ndarray] | np.ndarray) -> Polygon:
    """Gift-wrapping convex hull, CCW, collinear interior points dropped.

    O(nh) for h hull vertices.  Turn decisions use a tolerance relative to
    the edge lengths so that shallow but genuine turns between close
    vertices are never misread as collinear.  Degenerate inputs yield a
    point or segment.
    """
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    n = pts.shape[0]
    if n == 0:
        raise ValueError("need at least one point")
    if n == 1:
        return Polygon(pts)
    # Bottommost point (ties broken by x) is certainly on the hull.
    start = min(range(n), key=lambda i: (pts[i][1], pts[i][0]))
    # Detect full collinearity: hull is then the two extreme points.
    d = pts - pts[start]
    lens = np.linalg.norm(d, axis=1)
    ref = d[int(np.argmax(lens))]
    cr = d[:, 0] * ref[1] - d[:, 1] * ref[0]
    if np.all(np.abs(cr) <= _COLLINEAR_REL * lens * np.linalg.norm(ref) + 1e-300):
        t = d @ ref
        lo, hi = int(np.argmin(t)), int(np.argmax(t))
        if np.linalg.norm(pts[hi] - pts[lo]) == 0.0:
            return Polygon(pts[lo].reshape(1, 2))
        return Polygon(pts[[lo, hi]])
    hull = [start]
    current = start
    while True:
        cand = (current + 1) % n
        r_cand = np.linalg.norm(pts[cand] - pts[current])
        for i in range(n):
            if i == current or i == cand:
                continue
            c = _cross(pts[current], pts[cand], pts[i])
            r_i = np.linalg.norm(pts[i] - pts[current])
            band = _COLLINEAR_REL * r_cand * r_i
            if c < -band:
                cand = i
                r_cand = r_i
            elif c <= band and r_i > r_cand:
                # Farthest collinear point wins; interior ones drop out.
                cand = i
                r_cand = r_i
        if cand == start:
            break
        hull.append(cand)
        current = cand
        if len(hull) > n:
            raise RuntimeError("gift wrapping failed to close")
    return Polygon(pts[hull])


def hull_with_origin(p: Polygon) -> Polygon:
    """Convex hull of the polygon's vertices and the origin."""
    return convex_hull(np.vstack([p.vertices, np.zeros((1, 2))]))


def clip_halfplane(p: Polygon, normal: np.ndarray, offset: float) -> Polygon:
    """Intersection with the half-plane {x : normal . x >= offset}."""
    a = np.asarray(normal, dtype=float)
    v = p.vertices
    n = v.shape[0]
    if n == 0:
        return EMPTY_POLYGON
    s = v @ a - offset
    if n == 1:
        return p if s[0] >= -GEOM_TOL else EMPTY_POLYGON
    out: list[np.ndarray] = []
    closed = n >= 3
    edges = range(n) if closed else range(n - 1)
    for i in edges:
        j = (i + 1) % n
        si, sj = s[i], s[j]
        if si >= -GEOM_TOL:
            out.append(v[i])
        if (si > GEOM_TOL and sj < -GEOM_TOL) or (si < -GEOM_TOL and sj > GEOM_TOL):
            t = si / (si - sj)
            out.append(v[i] + t * (v[j] - v[i]))
    if not closed and s[-1] >= -GEOM_TOL:
        out.append(v[-1])
    if not out:
        return EMPTY_POLYGON
    arr = np.array(out)
    # Drop consecutive duplicates introduced by boundary intersections.
    keep = [0]
    for i in range(1, arr.shape[0]):
        if np.linalg.norm(arr[i] - arr[keep[-1]]) > GEOM_TOL:
            keep.append(i)
    if len(keep) > 1 and np.linalg.norm(arr[keep[-1]] - arr[keep[0]]) <= GEOM_TOL:
        keep.pop()
    return Polygon(arr[keep])


def contains(p: Polygon, x: np.ndarray | complex, tol: float = GEOM_TOL) -> bool:
    """Closed membership test with tolerance ``tol``.

    Full polygons use the signed distance to every edge; degenerate ones use
    the distance to the segment or point.
    """
    if isinstance(x, complex):
        x = as_xy(x)
    x = np.asarray(x, dtype=float).reshape(2)
    v = p.vertices
    n = v.shape[0]
    if n == 0:
        return False
    if n == 1:
        return bool(np.linalg.norm(x - v[0]) <= tol)
    if n == 2:
        return _dist_to_segment(x, v[0], v[1]) <= tol
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        e = b - a
        le = np.linalg.norm(e)
        if le <= GEOM_TOL:
            continue
        signed = (e[0] * (x[1] - a[1]) - e[1] * (x[0] - a[0])) / le
        if signed < -tol:
            return False
    return True


def _dist_to_segment(x: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    e = b - a
    le2 = float(e @ e)
    if le2 == 0.0:
        return float(np.linalg.norm(x - a))
    t = float(np.clip((x - a) @ e / le2, 0.0, 1.0))
    return float(np.linalg.norm(x - (a + t * e)))


# ---------------------------------------------------------------------------
# Regular-polygon noise sets
# ---------------------------------------------------------------------------


def regular_polygon_noise(n_sides: int) -> tuple[Zonogon, np.ndarray]:
    """Regular 2-D noise polygon with inradius 1 around the origin.

    Returns the G-representation (n_sides/2 generators
    ``tan(pi/n) [sin phi_l, cos phi_l]``) together with the matching
    H-representation rows ``[cos phi_l, sin phi_l] . x <= 1`` for
    ``phi_l = 2 pi l / n``, ``l = 1..n``.  ``n_sides`` must be even and at
    least 4; the polygon approaches the unit circle as it grows.
    """
    if n_sides % 2 != 0 or n_sides < 4:
        raise ValueError("n_sides must be an even integer >= 4")
    scale = np.tan(np.pi / n_sides)
    ls = np.arange(1, n_sides // 2 + 1)
    phis = 2.0 * np.pi * ls / n_sides
    gens = scale * np.column_stack([np.sin(phis), np.cos(phis)])
    ls_all = np.arange(1, n_sides + 1)
    phis_all = 2.0 * np.pi * ls_all / n_sides
    h_rows = np.column_stack([np.cos(phis_all), np.sin(phis_all)])
    return Zonogon(np.zeros(2), gens), h_rows


def polygon_h_rep(p: Polygon) -> np.ndarray:
    """Rows ``a`` with ``a . x <= 1`` describing a polygon containing 0.

    Requires the origin strictly inside (true for noise sets, which are
    symmetric about 0 with nonempty interior).
    """
    v = p.vertices
    n = v.shape[0]
    if n < 3:
        raise ValueError("H-representation needs a full-dimensional polygon")
    rows = []
    for i in range(n):
        a, b = v[i], v[(i + 1) % n]
        e = b - a
        normal = np.array([e[1], -e[0]])  # outward for CCW
        c = float(normal @ a)
        if c <= GEOM_TOL:
            raise ValueError("origin not strictly inside polygon")
        rows.append(normal / c)
    return np.array(rows)


def polygons_equal(p: Polygon, q: Polygon, tol: float = 0.0) -> bool:
    """Vertex-for-vertex equality up to cyclic rotation of the CCW order."""
    a, b = p.vertices, q.vertices
    if a.shape != b.shape:
        return False
    n = a.shape[0]
    if n == 0:
        return True
    for shift in range(n):
        rolled = np.roll(b, shift, axis=0)
        if tol == 0.0:
            if np.array_equal(a, rolled):
                return True
        elif np.max(np.abs(a - rolled)) <= tol:
            return True
    return False
