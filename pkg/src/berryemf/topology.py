"""Closed polygonal loops, winding census and loop/surface integrals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AmbiguousEnclosure, InvalidConfig, SingularLoop
from .field_core import VectorField2D, VortexConfig, berry_connection_field, chi_gradient
from .quadrature import polyline_integral, triangles_integral

DEFAULT_TOL = 1e-10


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


def _segments_intersect(p1, p2, q1, q2) -> bool:
    """Closed-segment intersection (touching counts)."""
    def orient(a, b, c):
        v = _cross(b[0] - a[0], b[1] - a[1], c[0] - a[0], c[1] - a[1])
        return int(v > 0) - int(v < 0)

    def on_seg(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and on_seg(p1, p2, q1)) or (o2 == 0 and on_seg(p1, p2, q2))
            or (o3 == 0 and on_seg(q1, q2, p1)) or (o4 == 0 and on_seg(q1, q2, p2)))


class PolyLoop:
    """Simple closed polygon; vertex order sets the orientation (CCW positive)."""

    def __init__(self, vertices, validate: bool = True):
        v = np.array(vertices, dtype=float).reshape(-1, 2)
        v.setflags(write=False)
        self.vertices = v
        if validate:
            self._validate()

    def _validate(self):
        v = self.vertices
        n = v.shape[0]
        if n < 3:
            raise InvalidConfig("a loop needs at least 3 vertices")
        if not np.all(np.isfinite(v)):
            raise InvalidConfig("loop vertices must be finite")
        if np.unique(v, axis=0).shape[0] != n:
            raise InvalidConfig("loop vertices must be distinct")
        if self.signed_area == 0:
            raise InvalidConfig("loop has zero signed area")
        for i in range(n):
            a, b = v[i], v[(i + 1) % n]
            for j in range(i + 1, n):
                c, d = v[j], v[(j + 1) % n]
                if j == i + 1 or (i == 0 and j == n - 1):
                    # adjacent edges share one vertex; they must not fold back
                    shared = b if j == i + 1 else a
                    e1 = (a if j == i + 1 else b) - shared
                    e2 = d - shared if j == i + 1 else c - shared
                    if _cross(*e1, *e2) == 0 and np.dot(e1, e2) > 0:
                        raise InvalidConfig("loop folds back on itself")
                    continue
                if _segments_intersect(a, b, c, d):
                    raise InvalidConfig("loop is self-intersecting")

    @classmethod
    def rectangle(cls, x0, y0, x1, y1) -> "PolyLoop":
        return cls([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])

    @classmethod
    def square(cls, center, side) -> "PolyLoop":
        cx, cy = center
        h = 0.5 * side
        return cls.rectangle(cx - h, cy - h, cx + h, cy + h)

    def __len__(self):
        return self.vertices.shape[0]

    def __repr__(self):
        return f"PolyLoop({self.vertices.tolist()!r})"

    @property
    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices, np.roll(self.vertices, -1, axis=0)

    @property
    def signed_area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    @property
    def orientation(self) -> int:
        return 1 if self.signed_area > 0 else -1

    @property
    def perimeter(self) -> float:
        a, b = self.edges
        return float(np.hypot(*(b - a).T).sum())

    def reversed(self) -> "PolyLoop":
        return PolyLoop(self.vertices[::-1], validate=False)

    def translated(self, shift) -> "PolyLoop":
        return PolyLoop(self.vertices + np.asarray(shift, float).reshape(1, 2), validate=False)

    def boundary_distance(self, points) -> np.ndarray:
        """Distance of each point to the nearest loop edge."""
        pts = np.asarray(points, float).reshape(-1, 2)
        a, b = self.edges
        e = b - a
        rel = pts[:, None, :] - a[None, :, :]
        t = np.clip((rel * e[None]).sum(-1) / (e * e).sum(-1)[None], 0.0, 1.0)
        diff = rel - t[..., None] * e[None]
        return np.sqrt((diff * diff).sum(-1).min(1)) if pts.size else np.empty(0)

    def contains(self, points, eps: float = 0.0) -> np.ndarray:
        """Even-odd ray-casting inside test.

        Points within ``eps`` of an edge raise ``AmbiguousEnclosure``.
        """
        pts = np.asarray(points, float).reshape(-1, 2)
        if pts.shape[0] == 0:
            return np.zeros(0, bool)
        if eps > 0:
            dist = self.boundary_distance(pts)
            if np.any(dist <= eps):
                k = int(np.argmin(dist))
                raise AmbiguousEnclosure(
                    f"point {tuple(pts[k].tolist())} lies within {eps:g} of the loop boundary")
        a, b = self.edges
        px, py = pts[:, 0, None], pts[:, 1, None]
        straddle = (a[None, :, 1] > py) != (b[None, :, 1] > py)
        dy = b[:, 1] - a[:, 1]
        safe_dy = np.where(dy == 0, 1.0, dy)
        x_cross = a[None, :, 0] + (py - a[None, :, 1]) * (b[:, 0] - a[:, 0])[None] / safe_dy[None]
        hits = straddle & (px < x_cross)
        return (hits.sum(1) % 2) == 1

    def triangulate(self) -> np.ndarray:
        """Ear-clipping triangulation, returns ``(n - 2, 3, 2)`` CCW triangles."""
        v = self.vertices if self.orientation > 0 else self.vertices[::-1]
        idx = list(range(v.shape[0]))
        tris = []
        guard = 0
        while len(idx) > 3:
            m = len(idx)
            for k in range(m):
                i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % m]
                p0, p1, p2 = v[i0], v[i1], v[i2]
                if _cross(*(p1 - p0), *(p2 - p0)) <= 0:
                    continue
                others = [v[j] for j in idx if j not in (i0, i1, i2)]
                if others and _any_in_triangle(np.array(others), p0, p1, p2):
                    continue
                tris.append((p0, p1, p2))
                del idx[k]
                break
            guard += 1
            if guard > 10 * v.shape[0]:
                raise InvalidConfig("triangulation failed; loop is not simple")
        tris.append(tuple(v[j] for j in idx))
        return np.array(tris, dtype=float)


def _any_in_triangle(pts, a, b, c) -> bool:
    d1 = _cross(*(b - a), *(pts - a).T)
    d2 = _cross(*(c - b), *(pts - b).T)
    d3 = _cross(*(a - c), *(pts - c).T)
    return bool(np.any((d1 >= 0) & (d2 >= 0) & (d3 >= 0)))


@dataclass(frozen=True)
class QuantizationReport:
    numeric_integral: float
    nearest_quantum: int
    deviation: float
    quantum_unit: float
    census_quantum: int

    @property
    def consistent(self) -> bool:
        return self.nearest_quantum == self.census_quantum

    def as_dict(self) -> dict:
        return {"numeric_integral": self.numeric_integral,
                "nearest_quantum": self.nearest_quantum,
                "deviation": self.deviation,
                "quantum_unit": self.quantum_unit,
                "census_quantum": self.census_quantum}


def line_integral(field: VectorField2D, loop: PolyLoop, tol: float = DEFAULT_TOL) -> float:
    """Adaptive quadrature of the circulation of ``field`` around ``loop``."""
    a, b = loop.edges
    sp = field.singular_points
    if sp.shape[0]:
        dist = loop.boundary_distance(sp)
        if np.any(dist <= field.eps_core):
            k = int(np.argmin(dist))
            raise SingularLoop(f"loop passes within eps_core={field.eps_core:g} "
                               f"of singular point {tuple(sp[k].tolist())}")
    # the whole loop is clear of the exclusion disks, so nodes need no recheck
    return polyline_integral(field.evaluate_unchecked, a, b, tol, singular_points=sp)


def enclosed_winding(positions, windings, loop: PolyLoop, eps: float) -> int:
    """Signed sum of windings strictly inside ``loop`` (orientation-aware)."""
    positions = np.asarray(positions, float).reshape(-1, 2)
    if positions.shape[0] == 0:
        return 0
    inside = loop.contains(positions, eps)
    return loop.orientation * int(np.asarray(windings)[inside].sum())


def winding_number(config: VortexConfig, loop: PolyLoop) -> int:
    """Exact winding of the vortex angle field around ``loop`` by census."""
    return enclosed_winding(config.positions, config.windings, loop, config.eps_core)


def quadrature_winding(config: VortexConfig, loop: PolyLoop, tol: float = DEFAULT_TOL) -> float:
    """Winding by quadrature, ``(1 / 2 pi) * circulation of grad chi``."""
    return line_integral(chi_gradient(config), loop, tol) / (2.0 * math.pi)


def verify_quantization(config: VortexConfig, loop: PolyLoop,
                        tol: float = DEFAULT_TOL) -> QuantizationReport:
    """Compare the circulation of the vortex Berry connection with ``-pi * winding``."""
    numeric = line_integral(berry_connection_field(config), loop, tol)
    unit = math.pi
    nearest = int(round(numeric / unit))
    return QuantizationReport(numeric_integral=numeric, nearest_quantum=nearest,
                              deviation=abs(numeric - nearest * unit), quantum_unit=unit,
                              census_quantum=-winding_number(config, loop))


def area_integral(func, loop: PolyLoop, tol: float = DEFAULT_TOL) -> float:
    """Integral of a scalar ``func`` over the loop interior (orientation-independent)."""
    return triangles_integral(func, loop.triangulate(), tol)
