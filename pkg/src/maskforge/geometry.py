"""Integer rectilinear geometry: rectangles, polygons, placement transforms,
winding-number fill and boundary tracing on pixel or compressed grids.

Coordinates are integer nanometres. Images are indexed ``[row, col]`` with
row = y and col = x, so pixel ``(i, j)`` covers ``[j, j+1] x [i, i+1]``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

COORD_LIMIT = 2**31


@dataclass(frozen=True, order=True)
class Rect:
    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        for v in (self.x0, self.y0, self.x1, self.y1):
            if abs(v) >= COORD_LIMIT:
                raise DataError(f"coordinate {v} outside +-2^31 nm")
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise DataError(f"degenerate rect {self.as_tuple()}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    @property
    def area(self) -> int:
        return self.width * self.height

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x0, self.y0, self.x1, self.y1)

    def contains(self, other: "Rect") -> bool:
        return (self.x0 <= other.x0 and self.y0 <= other.y0
                and other.x1 <= self.x1 and other.y1 <= self.y1)

    def overlaps(self, other: "Rect") -> bool:
        """True when the intersection has positive area."""
        return (self.x0 < other.x1 and other.x0 < self.x1
                and self.y0 < other.y1 and other.y0 < self.y1)

    def translate(self, dx: int, dy: int) -> "Rect":
        return Rect(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)

    def to_polygon(self) -> "Polygon":
        return Polygon(((self.x0, self.y0), (self.x1, self.y0),
                        (self.x1, self.y1), (self.x0, self.y1)))


@dataclass(frozen=True)
class Polygon:
    """Closed rectilinear polygon; the closing edge is implicit."""

    vertices: tuple[tuple[int, int], ...]

    def __post_init__(self):
        verts = tuple((int(x), int(y)) for x, y in self.vertices)
        if len(verts) > 1 and verts[0] == verts[-1]:
            verts = verts[:-1]
        object.__setattr__(self, "vertices", verts)
        if len(verts) < 4:
            raise DataError(f"polygon needs >= 4 vertices, got {len(verts)}")
        n = len(verts)
        for k in range(n):
            (xa, ya), (xb, yb) = verts[k], verts[(k + 1) % n]
            if abs(xa) >= COORD_LIMIT or abs(ya) >= COORD_LIMIT:
                raise DataError(f"coordinate outside +-2^31 nm at {verts[k]}")
            if (xa != xb) == (ya != yb):
                raise DataError(f"non-rectilinear or zero-length edge {verts[k]} -> {verts[(k + 1) % n]}")

    @classmethod
    def from_coords(cls, coords: Sequence[int]) -> "Polygon":
        if len(coords) % 2:
            raise DataError("odd number of coordinates")
        return cls(tuple(zip(coords[0::2], coords[1::2])))

    def coords(self) -> list[int]:
        return [c for v in self.vertices for c in v]

    @property
    def signed_area2(self) -> int:
        """Twice the signed area; positive for counter-clockwise (y up)."""
        v = np.asarray(self.vertices, dtype=np.int64)
        x, y = v[:, 0], v[:, 1]
        return int(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    @property
    def area(self) -> int:
        return abs(self.signed_area2) // 2

    def bbox(self) -> Rect:
        v = np.asarray(self.vertices)
        return Rect(int(v[:, 0].min()), int(v[:, 1].min()), int(v[:, 0].max()), int(v[:, 1].max()))

    def translate(self, dx: int, dy: int) -> "Polygon":
        return Polygon(tuple((x + dx, y + dy) for x, y in self.vertices))

    def reversed(self) -> "Polygon":
        return Polygon(self.vertices[::-1])

    def ccw(self) -> "Polygon":
        return self if self.signed_area2 > 0 else self.reversed()

    def simplified(self) -> "Polygon":
        return Polygon(tuple(simplify_loop(self.vertices)))

    def edges(self) -> list[tuple[tuple[int, int], tuple[int, int]]]:
        n = len(self.vertices)
        return [(self.vertices[k], self.vertices[(k + 1) % n]) for k in range(n)]


class Orientation(enum.Enum):
    R0 = ((1, 0), (0, 1))
    R90 = ((0, -1), (1, 0))
    R180 = ((-1, 0), (0, -1))
    R270 = ((0, 1), (-1, 0))
    MX = ((1, 0), (0, -1))
    MY = ((-1, 0), (0, 1))
    MXR90 = ((0, 1), (1, 0))
    MYR90 = ((0, -1), (-1, 0))

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.value, dtype=np.int64)

    def apply(self, x: int, y: int) -> tuple[int, int]:
        (a, b), (c, d) = self.value
        return (a * x + b * y, c * x + d * y)

    def compose(self, other: "Orientation") -> "Orientation":
        """Orientation equivalent to applying ``other`` first, then ``self``."""
        m = self.matrix @ other.matrix
        return _ORIENT_BY_MATRIX[tuple(map(tuple, m.tolist()))]

    def inverse(self) -> "Orientation":
        return _ORIENT_BY_MATRIX[tuple(map(tuple, self.matrix.T.tolist()))]


_ORIENT_BY_MATRIX = {o.value: o for o in Orientation}


def transform_polygon(poly: Polygon, orient: Orientation, origin: tuple[int, int]) -> Polygon:
    ox, oy = origin
    pts = []
    for x, y in poly.vertices:
        tx, ty = orient.apply(x, y)
        pts.append((tx + ox, ty + oy))
    return Polygon(tuple(pts))


def simplify_loop(verts: Sequence[tuple[int, int]]) -> list[tuple[int, int]]:
    """Drop duplicate and redundant collinear vertices from a closed loop."""
    pts = list(verts)
    changed = True
    while changed and len(pts) >= 3:
        changed = False
        out = []
        n = len(pts)
        for k in range(n):
            p, c, q = pts[k - 1], pts[k], pts[(k + 1) % n]
            if c == p:
                changed = True
                continue
            # same-direction collinear only; reversals are kept so callers can reject them
            if (p[0] == c[0] == q[0] and (c[1] - p[1]) * (q[1] - c[1]) > 0) or \
                    (p[1] == c[1] == q[1] and (c[0] - p[0]) * (q[0] - c[0]) > 0):
                changed = True
                continue
            out.append(c)
        pts = out
    return pts


def is_simple(poly: Polygon) -> bool:
    """True when the loop has no self-touching, crossing or backtracking edges."""
    verts = simplify_loop(poly.vertices)
    n = len(verts)
    if n < 4 or n % 2:
        return False
    v = np.asarray(verts, dtype=np.int64)
    w = np.roll(v, -1, axis=0)
    d = w - v
    # backtracking spike: consecutive edges collinear but opposite
    nd = np.roll(d, -1, axis=0)
    if np.any((d[:, 0] * nd[:, 1] - d[:, 1] * nd[:, 0] == 0)):
        return False
    horiz = d[:, 1] == 0
    idx = np.arange(n)
    lo = np.minimum(v, w)
    hi = np.maximum(v, w)
    hi_, vi_ = idx[horiz], idx[~horiz]
    # H x V: closed intersection, excluding adjacent pairs
    hy = v[hi_, 1][:, None]
    hx0, hx1 = lo[hi_, 0][:, None], hi[hi_, 0][:, None]
    vx = v[vi_, 0][None, :]
    vy0, vy1 = lo[vi_, 1][None, :], hi[vi_, 1][None, :]
    hit = (hx0 <= vx) & (vx <= hx1) & (vy0 <= hy) & (hy <= vy1)
    gap = np.abs(hi_[:, None] - vi_[None, :])
    adjacent = (gap == 1) | (gap == n - 1)
    if np.any(hit & ~adjacent):
        return False
    for sel, axis in ((hi_, 1), (vi_, 0)):
        if len(sel) < 2:
            continue
        c = v[sel, axis]
        a0, a1 = lo[sel, 1 - axis], hi[sel, 1 - axis]
        same = c[:, None] == c[None, :]
        ov = (a0[:, None] <= a1[None, :]) & (a0[None, :] <= a1[:, None])
        np.fill_diagonal(ov, False)
        if np.any(same & ov):
            return False
    return True


def _vertical_edges(loops: Iterable[Sequence[tuple[int, int]]], signs=None):
    xs, ya, yb, ss = [], [], [], []
    for k, loop in enumerate(loops):
        v = np.asarray(loop, dtype=np.int64)
        w = np.roll(v, -1, axis=0)
        vert = v[:, 0] == w[:, 0]
        s = 1 if signs is None else signs[k]
        xs.append(v[vert, 0])
        ya.append(v[vert, 1])
        yb.append(w[vert, 1])
        ss.append(np.full(int(vert.sum()), s, dtype=np.int64))
    if not xs:
        z = np.zeros(0, dtype=np.int64)
        return z, z, z, z
    return np.concatenate(xs), np.concatenate(ya), np.concatenate(yb), np.concatenate(ss)


def winding_grid(loops, nrows: int, ncols: int, col_of, row_of, signs=None) -> np.ndarray:
    """Winding number of every grid cell for a set of rectilinear loops.

    ``col_of``/``row_of`` map coordinates to boundary indices; results must be
    clamped to ``[0, ncols]`` / ``[0, nrows]`` by the caller's mapping. A
    counter-clockwise loop contributes +1 (times its sign) to interior cells.
    """
    x, ya, yb, s = _vertical_edges(loops, signs)
    diff = np.zeros((nrows + 1, ncols + 1), dtype=np.int64)
    if len(x):
        c = np.clip(col_of(x), 0, ncols)
        ra = np.clip(row_of(ya), 0, nrows)
        rb = np.clip(row_of(yb), 0, nrows)
        # downward edge (ya > yb) adds +1 to cells to its right
        sign = np.sign(ya - yb) * s
        r0, r1 = np.minimum(ra, rb), np.maximum(ra, rb)
        np.add.at(diff, (r0, c), sign)
        np.add.at(diff, (r1, c), -sign)
    return np.cumsum(np.cumsum(diff, axis=0), axis=1)[:nrows, :ncols]


def pixel_winding(loops, width: int, height: int, signs=None) -> np.ndarray:
    ident = lambda a: a  # noqa: E731
    return winding_grid(loops, height, width, ident, ident, signs)


def fills_cleanly(verts: Sequence[tuple[int, int]]) -> bool:
    """True when a rectilinear loop winds at most once around every point.

    Loops may touch themselves at isolated vertices (as traced pixel regions
    with pinches do) but must not cross or fold over themselves; zero-area
    spikes are ignored since they do not change the fill.
    """
    v = np.asarray(verts, dtype=np.int64)
    if len(v) < 4:
        return False
    xs = np.unique(v[:, 0])
    ys = np.unique(v[:, 1])
    if len(xs) < 2 or len(ys) < 2:
        return False
    col_of = lambda a: np.searchsorted(xs, a)  # noqa: E731
    row_of = lambda a: np.searchsorted(ys, a)  # noqa: E731
    w = winding_grid([v], len(ys) - 1, len(xs) - 1, col_of, row_of)
    lo, hi = int(w.min()), int(w.max())
    return (lo >= 0 and hi == 1) or (lo == -1 and hi <= 0)


def trace_loops(grid: np.ndarray) -> list[list[tuple[int, int]]]:
    """Boundary loops of the set cells of a boolean grid, in lattice indices.

    Loops keep the interior on their left (outer boundaries counter-clockwise,
    holes clockwise). Diagonal pinch points are resolved by turning left, so
    4-connected components are traced separately. Loops are returned in
    order of their lowest-then-leftmost starting edge and are simplified.
    """
    g = np.asarray(grid, dtype=bool)
    if not g.any():
        return []
    p = np.pad(g, 1)
    core = p[1:-1, 1:-1]
    out: dict[tuple[int, int], list[tuple[int, int, int, int]]] = {}

    def add(mask, sx, sy, dx, dy):
        rows, cols = np.nonzero(mask)
        for r, c in zip(rows.tolist(), cols.tolist()):
            out.setdefault((c + sx, r + sy), []).append((dx, dy, c, r))

    add(core & ~p[:-2, 1:-1], 0, 0, 1, 0)     # bottom edge, +x
    add(core & ~p[1:-1, 2:], 1, 0, 0, 1)      # right edge, +y
    add(core & ~p[2:, 1:-1], 1, 1, -1, 0)     # top edge, -x
    add(core & ~p[1:-1, :-2], 0, 1, 0, -1)    # left edge, -y

    used: set[tuple[int, int, int, int]] = set()
    loops = []
    starts = sorted(out.keys(), key=lambda q: (q[1], q[0]))
    for start in starts:
        for first in out[start]:
            key = (start[0], start[1], first[0], first[1])
            if key in used:
                continue
            loop = []
            pos, (dx, dy) = start, (first[0], first[1])
            while True:
                used.add((pos[0], pos[1], dx, dy))
                loop.append(pos)
                pos = (pos[0] + dx, pos[1] + dy)
                cands = [(e[0], e[1]) for e in out[pos]]
                if len(cands) > 1:
                    left = (-dy, dx)
                    cands = [left] if left in cands else cands
                dx, dy = cands[0]
                if (pos[0], pos[1], dx, dy) in used:
                    break
            loops.append(simplify_loop(loop))
    return loops
