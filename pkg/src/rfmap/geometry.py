"""2-D polygon primitives, grid rasterization, and conservative line traversal.

Coordinate conventions used across the toolkit:

* The environment frame is a ``side_length`` x ``side_length`` square with the
  origin at the lower-left corner, x to the right, y up, units in meters.
* Grids are ``GRID_SIZE`` x ``GRID_SIZE`` numpy arrays indexed ``grid[row, col]``
  where ``row`` spans y and ``col`` spans x.  Cell ``(row, col)`` covers
  ``[col*mpp, (col+1)*mpp] x [row*mpp, (row+1)*mpp]`` and its center sits at
  ``((col+0.5)*mpp, (row+0.5)*mpp)`` with ``mpp = meters_per_pixel``.

All functions here are pure; none mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GRID_SIZE = 224


class GeometryError(ValueError):
    """Invalid geometric input."""


class DegenerateHullError(GeometryError):
    """Convex hull of the input collapses to a segment or point."""


def polygon_area(vertices: np.ndarray) -> float:
    """Signed shoelace area; positive for counter-clockwise vertex order."""
    v = np.asarray(vertices, dtype=float)
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True, eq=False)
class Polygon:
    """Simple polygon in the environment frame, stored counter-clockwise.

    The constructor normalizes clockwise input to counter-clockwise and
    rejects fewer than 3 vertices, non-finite coordinates, and zero area.
    Self-intersection is only checked by :meth:`is_simple` (it is O(n^2) and
    callers on hot paths translate already-validated polygons).
    """

    vertices: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise GeometryError(f"polygon needs >=3 2-D vertices, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise GeometryError("polygon has non-finite coordinates")
        area = polygon_area(v)
        if area == 0.0:
            raise GeometryError("polygon has zero area")
        if area < 0.0:
            v = v[::-1]
        v = np.ascontiguousarray(v)
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Polygon):
            return NotImplemented
        return self.vertices.shape == other.vertices.shape and bool(
            np.array_equal(self.vertices, other.vertices)
        )

    @property
    def area(self) -> float:
        return polygon_area(self.vertices)

    def translated(self, dx: float, dy: float) -> "Polygon":
        return Polygon(self.vertices + np.array([dx, dy]))

    def edges(self) -> np.ndarray:
        """Edge array of shape (n, 2, 2): edges[i] = (start, end)."""
        v = self.vertices
        return np.stack([v, np.roll(v, -1, axis=0)], axis=1)

    def is_simple(self) -> bool:
        """True when no two non-adjacent edges intersect."""
        e = self.edges()
        n = len(e)
        for i in range(n):
            for j in range(i + 2, n):
                if i == 0 and j == n - 1:
                    continue
                if _segments_intersect(e[i, 0], e[i, 1], e[j, 0], e[j, 1]):
                    return False
        return True


@dataclass
class BinaryMap:
    """Fixed 224x224 binary occupancy grid with a metric scale."""

    grid: np.ndarray
    meters_per_pixel: float

    def __post_init__(self) -> None:
        g = np.asarray(self.grid)
        if g.shape != (GRID_SIZE, GRID_SIZE):
            raise GeometryError(f"grid must be {GRID_SIZE}x{GRID_SIZE}, got {g.shape}")
        if not np.isin(g, (0, 1)).all():
            raise GeometryError("grid cells must be 0 or 1")
        if not self.meters_per_pixel > 0:
            raise GeometryError("meters_per_pixel must be positive")
        self.grid = g.astype(np.uint8)

    @property
    def side_length(self) -> float:
        return self.meters_per_pixel * GRID_SIZE

    def copy(self) -> "BinaryMap":
        return BinaryMap(self.grid.copy(), self.meters_per_pixel)


def _cross(o: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float((a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]))


def _eps_for(*points: np.ndarray) -> float:
    scale = max(1.0, max(float(np.max(np.abs(p))) for p in points))
    return 1e-9 * scale * scale


def _segments_intersect(a, b, c, d) -> bool:
    eps = _eps_for(a, b, c, d)
    o1 = _cross(a, b, c)
    o2 = _cross(a, b, d)
    o3 = _cross(c, d, a)
    o4 = _cross(c, d, b)
    if ((o1 > eps and o2 < -eps) or (o1 < -eps and o2 > eps)) and (
        (o3 > eps and o4 < -eps) or (o3 < -eps and o4 > eps)
    ):
        return True
    for o, p, q, r in ((o1, a, b, c), (o2, a, b, d), (o3, c, d, a), (o4, c, d, b)):
        if abs(o) <= eps and _on_segment(p, q, r, eps):
            return True
    return False


def _on_segment(a, b, p, eps: float) -> bool:
    return (
        min(a[0], b[0]) - eps <= p[0] <= max(a[0], b[0]) + eps
        and min(a[1], b[1]) - eps <= p[1] <= max(a[1], b[1]) + eps
    )


def convex_hull(poly: Polygon) -> Polygon:
    """Convex hull of a polygon's vertices (monotone chain, strict turns).

    The returned polygon is convex, counter-clockwise, and its vertices are a
    subset of the input vertices.  Raises :class:`DegenerateHullError` when
    all vertices are collinear.
    """
    pts = sorted({(float(x), float(y)) for x, y in poly.vertices})
    if len(pts) < 3:
        raise DegenerateHullError("hull needs at least 3 distinct points")

    def chain(points):
        out: list[tuple[float, float]] = []
        for p in points:
            while len(out) >= 2 and _cross(np.array(out[-2]), np.array(out[-1]), np.array(p)) <= 0:
                out.pop()
            out.append(p)
        return out

    lower = chain(pts)
    upper = chain(reversed(pts))
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateHullError("input vertices are collinear")
    return Polygon(np.array(hull))


def points_in_polygon(xs: np.ndarray, ys: np.ndarray, poly: Polygon) -> np.ndarray:
    """Vectorized inside-or-on-boundary test for arrays of query points."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    v = poly.vertices
    eps = _eps_for(v, np.stack([xs, ys]))
    inside = np.zeros(xs.shape, dtype=bool)
    boundary = np.zeros(xs.shape, dtype=bool)
    n = len(v)
    for i in range(n):
        x1, y1 = v[i]
        x2, y2 = v[(i + 1) % n]
        # Even-odd ray cast (half-open in y so shared vertices count once).
        cond = (y1 > ys) != (y2 > ys)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_at = (x2 - x1) * (ys - y1) / (y2 - y1) + x1
        inside ^= cond & (xs < x_at)
        # Point exactly on the edge counts as inside.
        cross = (x2 - x1) * (ys - y1) - (y2 - y1) * (xs - x1)
        on = (
            (np.abs(cross) <= eps)
            & (xs >= min(x1, x2) - eps)
            & (xs <= max(x1, x2) + eps)
            & (ys >= min(y1, y2) - eps)
            & (ys <= max(y1, y2) + eps)
        )
        boundary |= on
    return inside | boundary


def point_strictly_inside(point: np.ndarray, poly: Polygon) -> bool:
    """Strict interior test: boundary points are NOT inside."""
    x, y = float(point[0]), float(point[1])
    v = poly.vertices
    eps = _eps_for(v, np.asarray(point, dtype=float))
    n = len(v)
    inside = False
    for i in range(n):
        x1, y1 = v[i]
        x2, y2 = v[(i + 1) % n]
        cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
        if (
            abs(cross) <= eps
            and min(x1, x2) - eps <= x <= max(x1, x2) + eps
            and min(y1, y2) - eps <= y <= max(y1, y2) + eps
        ):
            return False
        if (y1 > y) != (y2 > y) and x < (x2 - x1) * (y - y1) / (y2 - y1) + x1:
            inside = not inside
    return inside


def rasterize(buildings: list[Polygon], side_length: float) -> BinaryMap:
    """Rasterize the union of building footprints onto the fixed grid.

    A cell is set iff its center lies inside or on the boundary of any
    polygon.  Polygons extending past the frame are clipped implicitly (out
    of range cells simply do not exist); an empty list yields an all-zero map.
    """
    if not side_length > 0:
        raise GeometryError("side_length must be positive")
    mpp = side_length / GRID_SIZE
    grid = np.zeros((GRID_SIZE, GRID_SIZE), dtype=np.uint8)
    for poly in buildings:
        v = poly.vertices
        c0 = max(0, int(np.floor(v[:, 0].min() / mpp - 0.5)))
        c1 = min(GRID_SIZE - 1, int(np.ceil(v[:, 0].max() / mpp - 0.5)))
        r0 = max(0, int(np.floor(v[:, 1].min() / mpp - 0.5)))
        r1 = min(GRID_SIZE - 1, int(np.ceil(v[:, 1].max() / mpp - 0.5)))
        if c0 > c1 or r0 > r1:
            continue
        cols = np.arange(c0, c1 + 1)
        rows = np.arange(r0, r1 + 1)
        cx, cy = np.meshgrid((cols + 0.5) * mpp, (rows + 0.5) * mpp)
        mask = points_in_polygon(cx, cy, poly)
        grid[r0 : r1 + 1, c0 : c1 + 1] |= mask.astype(np.uint8)
    return BinaryMap(grid, mpp)


def point_to_cell(point: np.ndarray, meters_per_pixel: float) -> tuple[int, int]:
    """(row, col) of the cell containing a point, clamped to the grid."""
    col = int(np.clip(np.floor(point[0] / meters_per_pixel), 0, GRID_SIZE - 1))
    row = int(np.clip(np.floor(point[1] / meters_per_pixel), 0, GRID_SIZE - 1))
    return row, col


def segment_pixels(
    a: np.ndarray, b: np.ndarray, bmap: BinaryMap
) -> tuple[bool, np.ndarray]:
    """Supercover traversal of segment a->b over the map's grid.

    Returns ``(intersects, cells)`` where ``cells`` is an (N, 2) int array of
    (row, col) pairs ordered along the segment, containing every cell whose
    closed square the segment touches, and ``intersects`` is True iff any
    traversed cell is foreground.  Conservative by construction: grazing a
    cell corner still counts the cell, so the traversal cannot tunnel through
    one-pixel walls.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mpp = bmap.meters_per_pixel
    side = bmap.side_length
    slack = 1e-9 * max(1.0, side)
    for p in (a, b):
        if not (-slack <= p[0] <= side + slack and -slack <= p[1] <= side + slack):
            raise GeometryError(f"segment endpoint {p} outside the environment frame")
    if np.array_equal(a, b):
        cells = np.array([point_to_cell(a, mpp)], dtype=np.int64)
        hit = bool(bmap.grid[cells[0, 0], cells[0, 1]])
        return hit, cells

    c0 = max(0, int(np.floor(min(a[0], b[0]) / mpp)) - 1)
    c1 = min(GRID_SIZE - 1, int(np.floor(max(a[0], b[0]) / mpp)) + 1)
    r0 = max(0, int(np.floor(min(a[1], b[1]) / mpp)) - 1)
    r1 = min(GRID_SIZE - 1, int(np.floor(max(a[1], b[1]) / mpp)) + 1)
    cols = np.arange(c0, c1 + 1)
    rows = np.arange(r0, r1 + 1)
    cgrid, rgrid = np.meshgrid(cols, rows)

    # Closed-box slab clipping of the segment against every candidate cell.
    d = b - a
    lo_x, hi_x = cgrid * mpp, (cgrid + 1) * mpp
    lo_y, hi_y = rgrid * mpp, (rgrid + 1) * mpp
    tmin = np.zeros(cgrid.shape)
    tmax = np.ones(cgrid.shape)
    ok = np.ones(cgrid.shape, dtype=bool)
    for lo, hi, start, delta in ((lo_x, hi_x, a[0], d[0]), (lo_y, hi_y, a[1], d[1])):
        if delta == 0.0:
            ok &= (start >= lo) & (start <= hi)
        else:
            t1 = (lo - start) / delta
            t2 = (hi - start) / delta
            tmin = np.maximum(tmin, np.minimum(t1, t2))
            tmax = np.minimum(tmax, np.maximum(t1, t2))
    ok &= tmin <= tmax
    if not ok.any():  # degenerate: endpoints on the frame edge
        cells = np.array([point_to_cell(a, mpp)], dtype=np.int64)
    else:
        order = np.argsort(tmin[ok], kind="stable")
        cells = np.stack([rgrid[ok][order], cgrid[ok][order]], axis=1).astype(np.int64)
    hit = bool(bmap.grid[cells[:, 0], cells[:, 1]].any())
    return hit, cells


def segment_crosses_interior(a: np.ndarray, b: np.ndarray, poly: Polygon) -> bool:
    """Exact test: does the open segment a->b pass through the polygon interior?

    Touching the boundary (running along a wall, ending on a wall) does not
    count.  Used for propagation-path occlusion where a reflected leg ends on
    the reflecting wall itself.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = b - a
    dd = float(d @ d)
    if dd == 0.0:
        return point_strictly_inside(a, poly)
    v = poly.vertices
    eps = _eps_for(v, a, b)
    ts = {0.0, 1.0}
    n = len(v)
    for i in range(n):
        p = v[i]
        q = v[(i + 1) % n]
        e = q - p
        denom = d[0] * e[1] - d[1] * e[0]
        w = p - a
        if abs(denom) > eps:
            t = (w[0] * e[1] - w[1] * e[0]) / denom
            u = (w[0] * d[1] - w[1] * d[0]) / denom
            if -1e-12 <= u <= 1 + 1e-12 and 0.0 <= t <= 1.0:
                ts.add(float(t))
        elif abs(w[0] * d[1] - w[1] * d[0]) <= eps:
            # Collinear edge: both endpoints partition the segment.
            for r in (p, q):
                t = float((r - a) @ d / dd)
                if 0.0 <= t <= 1.0:
                    ts.add(t)
    knots = sorted(ts)
    for t0, t1 in zip(knots, knots[1:]):
        if t1 - t0 <= 1e-12:
            continue
        mid = a + d * ((t0 + t1) / 2.0)
        if point_strictly_inside(mid, poly):
            return True
    return False


def segment_blocked(a: np.ndarray, b: np.ndarray, buildings: list[Polygon]) -> bool:
    """True when the segment passes through any building interior."""
    return any(segment_crosses_interior(a, b, poly) for poly in buildings)
