"""Pixel grids at 1 px/nm: polygon rasterization, core masks, contour
segments and 8-bit PGM serialization.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError, DimensionError, ResourceError
from .geometry import Polygon, Rect, pixel_winding

DEFAULT_PIXEL_BUDGET = 4096 * 4096


def rasterize(shapes: Iterable[Polygon], window: Rect, resolution: int = 1,
              pixel_budget: int = DEFAULT_PIXEL_BUDGET) -> np.ndarray:
    """Binary image of ``shapes`` (window-local coordinates).

    A pixel is set when its centre lies inside any shape; overlapping shapes
    merge. The image is ``window.height`` rows by ``window.width`` columns.
    """
    if resolution != 1:
        raise ValueError("only 1 px/nm is supported")
    if window.width * window.height > pixel_budget:
        raise ResourceError(f"{window.width}x{window.height} window exceeds pixel budget {pixel_budget}")
    shapes = list(shapes)
    if not shapes:
        return np.zeros((window.height, window.width), dtype=bool)
    signs = [1 if p.signed_area2 > 0 else -1 for p in shapes]
    w = pixel_winding([p.vertices for p in shapes], window.width, window.height, signs)
    return w > 0


def fill_loops(loops: Sequence[Sequence[tuple[int, int]]], width: int, height: int) -> np.ndarray:
    """Nonzero-winding fill of oriented loops (holes wound clockwise)."""
    if not loops:
        return np.zeros((height, width), dtype=bool)
    return pixel_winding(loops, width, height) > 0


def core_mask(window: Rect, core: Rect) -> np.ndarray:
    """Window-sized binary image that is 1 exactly inside ``core``."""
    if not window.contains(core):
        raise DataError(f"core {core.as_tuple()} is not contained in window {window.as_tuple()}")
    m = np.zeros((window.height, window.width), dtype=bool)
    m[core.y0 - window.y0:core.y1 - window.y0, core.x0 - window.x0:core.x1 - window.x0] = True
    return m


@dataclass(frozen=True)
class Segment:
    """Axis-aligned contour run on the pixel lattice.

    ``inside`` is the unit normal pointing into the set region.
    """

    x0: int
    y0: int
    x1: int
    y1: int
    inside: tuple[int, int]

    @property
    def length(self) -> int:
        return abs(self.x1 - self.x0) + abs(self.y1 - self.y0)


def _runs(flags: np.ndarray) -> list[tuple[int, int]]:
    d = np.diff(np.concatenate([[0], flags.astype(np.int8), [0]]))
    starts = np.nonzero(d == 1)[0]
    ends = np.nonzero(d == -1)[0]
    return list(zip(starts.tolist(), ends.tolist()))


def extract_contour(z: np.ndarray) -> list[Segment]:
    """Boundaries between set and unset pixels (the image border counts as unset),
    merged into maximal collinear runs that share the same inside side.
    """
    z = np.asarray(z, dtype=bool)
    p = np.pad(z, 1)
    segs: list[Segment] = []
    # horizontal lattice lines y = 0..H
    below, above = p[:-1, 1:-1], p[1:, 1:-1]
    for y in range(below.shape[0]):
        for a, b in _runs(above[y] & ~below[y]):
            segs.append(Segment(a, y, b, y, (0, 1)))
        for a, b in _runs(below[y] & ~above[y]):
            segs.append(Segment(a, y, b, y, (0, -1)))
    left, right = p[1:-1, :-1], p[1:-1, 1:]
    for x in range(left.shape[1]):
        for a, b in _runs(right[:, x] & ~left[:, x]):
            segs.append(Segment(x, a, x, b, (1, 0)))
        for a, b in _runs(left[:, x] & ~right[:, x]):
            segs.append(Segment(x, a, x, b, (-1, 0)))
    return segs


def binarize(img: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    return np.asarray(img) > threshold


# --------------------------------------------------------------------------- PGM

def write_pgm(path: str | os.PathLike, img: np.ndarray) -> None:
    """8-bit binary PGM; values in [0, 1] are scaled by 255. Row 0 is written first."""
    a = np.asarray(img)
    if a.ndim != 2:
        raise DimensionError("PGM images must be 2-D")
    if a.dtype == bool:
        data = a.astype(np.uint8) * 255
    else:
        if not np.all(np.isfinite(a)) or a.min() < 0 or a.max() > 1:
            raise DataError("PGM values must lie in [0, 1]")
        data = np.rint(a * 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path: str | os.PathLike) -> np.ndarray:
    """Read an 8-bit P5 PGM as float values in [0, 1]."""
    with open(path, "rb") as fh:
        raw = fh.read()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while pos < len(raw) and raw[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DataError(f"{path}: truncated PGM header")
        fields.append(raw[start:pos])
    pos += 1
    if fields[0] != b"P5":
        raise DataError(f"{path}: not a binary PGM (P5)")
    try:
        w, h, maxval = (int(f) for f in fields[1:])
    except ValueError:
        raise DataError(f"{path}: malformed PGM header") from None
    if maxval != 255:
        raise DataError(f"{path}: only 8-bit PGM is supported")
    body = raw[pos:pos + w * h]
    if len(body) != w * h:
        raise DataError(f"{path}: expected {w * h} pixel bytes, found {len(body)}")
    return np.frombuffer(body, dtype=np.uint8).reshape(h, w).astype(np.float64) / 255.0


def pgm_size(path: str | os.PathLike) -> tuple[int, int]:
    """(width, height) from a PGM header."""
    img = read_pgm(path)
    return img.shape[1], img.shape[0]


def probe_contour(z: np.ndarray, horizontal: np.ndarray, along: np.ndarray,
                  edge: np.ndarray, normal: np.ndarray, cap: int = 64) -> np.ndarray:
    """Signed distance from lattice edges to the print contour along their normals.

    Each probe sits on pixel ``along`` of an edge lying on lattice line
    ``edge``; ``horizontal`` marks edges parallel to x and ``normal`` (+1/-1)
    the outward side. Positive results mean the print extends outside the
    edge. Searches stop at ``cap``; with no crossing the result is ``+cap``
    or ``-cap`` depending on the print state next to the edge. Pixels beyond
    the image count as unset.
    """
    z = np.asarray(z, dtype=bool)
    horizontal = np.asarray(horizontal, dtype=bool)
    along = np.asarray(along, dtype=np.int64)
    edge = np.asarray(edge, dtype=np.int64)
    normal = np.asarray(normal, dtype=np.int64)
    n = len(along)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    t = np.arange(-cap + 1, cap + 1)[None, :]
    pos = np.where(normal[:, None] > 0, edge[:, None] + t - 1, edge[:, None] - t)
    h, w = z.shape
    rows = np.where(horizontal[:, None], pos, along[:, None])
    cols = np.where(horizontal[:, None], along[:, None], pos)
    ok = (rows >= 0) & (rows < h) & (cols >= 0) & (cols < w)
    vals = np.zeros(rows.shape, dtype=bool)
    vals[ok] = z[rows[ok], cols[ok]]
    outside = vals[:, cap:]            # t = 1 .. cap
    inside = vals[:, cap - 1::-1]      # t = 0, -1, .. -cap+1

    def leading(a, value):
        hit = a != value
        first = np.argmax(hit, axis=1)
        return np.where(hit.any(axis=1), first, a.shape[1])

    out_run = leading(outside, True)
    in_run = leading(inside, False)
    return np.where(outside[:, 0], out_run, np.where(~inside[:, 0], -in_run, 0)).astype(np.int64)
