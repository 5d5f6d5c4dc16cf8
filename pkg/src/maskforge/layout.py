"""Hierarchical layouts (cells + placed instances) and the geometric steps
of standard-cell tile clipping: bounding boxes, core sweeping, context
expansion and window clipping.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

import numpy as np

from .errors import DataError, LayoutError
from .geometry import (Orientation, Polygon, Rect, is_simple, trace_loops,
                       transform_polygon, winding_grid)

__all__ = [
    "Layer", "Rect", "Polygon", "Orientation", "Cell", "Instance", "Layout",
    "ClipConfig", "parse_layout", "format_layout", "instances", "bbox",
    "sweep_core", "expand", "clip",
]


class Layer(str, enum.Enum):
    METAL = "metal"
    VIA = "via"


@dataclass(frozen=True)
class Cell:
    name: str
    shapes: tuple[tuple[Layer, Polygon], ...] = ()

    def __post_init__(self):
        if not self.name:
            raise DataError("cell name must be nonempty")


@dataclass(frozen=True)
class Instance:
    cell_name: str
    origin: tuple[int, int]
    orientation: Orientation = Orientation.R0


@dataclass(frozen=True)
class Layout:
    cells: Mapping[str, Cell] = field(default_factory=dict)
    instances: tuple[Instance, ...] = ()
    flat_shapes: tuple[tuple[Layer, Polygon], ...] = ()

    def __post_init__(self):
        for inst in self.instances:
            if inst.cell_name not in self.cells:
                raise LayoutError(f"unresolved cell reference {inst.cell_name!r}")

    def instance_shapes(self, inst: Instance) -> list[tuple[Layer, Polygon]]:
        cell = self.cells[inst.cell_name]
        return [(layer, transform_polygon(p, inst.orientation, inst.origin))
                for layer, p in cell.shapes]

    @cached_property
    def _flat(self) -> dict[Layer, tuple[list[Polygon], np.ndarray]]:
        by_layer: dict[Layer, list[Polygon]] = {l: [] for l in Layer}
        for inst in self.instances:
            for layer, p in self.instance_shapes(inst):
                by_layer[layer].append(p)
        for layer, p in self.flat_shapes:
            by_layer[layer].append(p)
        out = {}
        for layer, polys in by_layer.items():
            boxes = np.array([p.bbox().as_tuple() for p in polys], dtype=np.int64).reshape(-1, 4)
            out[layer] = (polys, boxes)
        return out

    def flattened(self, layer: Layer) -> list[Polygon]:
        return list(self._flat[Layer(layer)][0])

    def shape_count(self) -> int:
        return sum(len(v[0]) for v in self._flat.values())

    def shapes_touching(self, window: Rect, layer: Layer) -> list[Polygon]:
        polys, boxes = self._flat[Layer(layer)]
        if not polys:
            return []
        hit = ((boxes[:, 0] < window.x1) & (window.x0 < boxes[:, 2])
               & (boxes[:, 1] < window.y1) & (window.y0 < boxes[:, 3]))
        return [polys[k] for k in np.nonzero(hit)[0]]


@dataclass(frozen=True)
class ClipConfig:
    core_size: int = 512
    contexts: tuple[int, ...] = (0, 16, 32, 64, 128)
    layers: tuple[Layer, ...] = (Layer.METAL, Layer.VIA)

    def __post_init__(self):
        if self.core_size <= 0:
            raise ValueError("core_size must be > 0")
        if not self.contexts or any(c < 0 for c in self.contexts):
            raise ValueError("contexts must be a nonempty list of values >= 0")
        object.__setattr__(self, "layers", tuple(Layer(l) for l in self.layers))


# --------------------------------------------------------------------------- parsing

def _parse_polygon(tokens: list[str], lineno: int) -> tuple[Layer, Polygon]:
    if not tokens:
        raise LayoutError("missing layer", lineno)
    try:
        layer = Layer(tokens[0])
    except ValueError:
        raise LayoutError(f"unknown layer {tokens[0]!r}", lineno) from None
    try:
        coords = [int(t) for t in tokens[1:]]
    except ValueError:
        raise LayoutError("coordinates must be integers", lineno) from None
    if len(coords) == 4:
        x0, y0, x1, y1 = coords
        coords = [x0, y0, x1, y0, x1, y1, x0, y1]
    if len(coords) < 8 or len(coords) % 2:
        raise LayoutError(f"expected an even vertex list of >= 8 coords, got {len(coords)}", lineno)
    try:
        poly = Polygon.from_coords(coords)
    except DataError as exc:
        raise LayoutError(f"non-rectilinear polygon: {exc}", lineno) from None
    if not is_simple(poly):
        raise LayoutError("self-intersecting polygon", lineno)
    return layer, poly


def parse_layout(text: str) -> Layout:
    """Parse the line-oriented text layout format.

    ``SHAPE``/``FLAT`` accept a rectilinear vertex list or, as a shorthand,
    exactly four numbers ``x0 y0 x1 y1`` describing a rectangle.
    """
    cells: dict[str, Cell] = {}
    insts: list[tuple[Instance, int]] = []
    flat: list[tuple[Layer, Polygon]] = []
    current: str | None = None
    current_shapes: list[tuple[Layer, Polygon]] = []
    cell_line = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        key = tok[0].upper()
        if current is not None:
            if key == "SHAPE":
                current_shapes.append(_parse_polygon(tok[1:], lineno))
            elif key == "END":
                cells[current] = Cell(current, tuple(current_shapes))
                current = None
            else:
                raise LayoutError(f"unexpected {tok[0]!r} inside CELL {current}", lineno)
            continue
        if key == "CELL":
            if len(tok) != 2:
                raise LayoutError("CELL takes exactly one name", lineno)
            if tok[1] in cells:
                raise LayoutError(f"duplicate cell {tok[1]!r}", lineno)
            current, current_shapes, cell_line = tok[1], [], lineno
        elif key == "INSTANCE":
            if len(tok) != 5:
                raise LayoutError("INSTANCE <cell> <x> <y> <orientation>", lineno)
            try:
                origin = (int(tok[2]), int(tok[3]))
            except ValueError:
                raise LayoutError("instance origin must be integers", lineno) from None
            try:
                orient = Orientation[tok[4].upper()]
            except KeyError:
                raise LayoutError(f"unknown orientation {tok[4]!r}", lineno) from None
            insts.append((Instance(tok[1], origin, orient), lineno))
        elif key == "FLAT":
            flat.append(_parse_polygon(tok[1:], lineno))
        else:
            raise LayoutError(f"unknown keyword {tok[0]!r}", lineno)
    if current is not None:
        raise LayoutError(f"CELL {current} is missing END", cell_line)
    for inst, lineno in insts:
        if inst.cell_name not in cells:
            raise LayoutError(f"unresolved cell reference {inst.cell_name!r}", lineno)
    return Layout(cells, tuple(i for i, _ in insts), tuple(flat))


def format_layout(layout: Layout) -> str:
    lines = []
    for cell in layout.cells.values():
        lines.append(f"CELL {cell.name}")
        for layer, p in cell.shapes:
            lines.append(f"  SHAPE {layer.value} " + " ".join(map(str, p.coords())))
        lines.append("END")
    for inst in layout.instances:
        lines.append(f"INSTANCE {inst.cell_name} {inst.origin[0]} {inst.origin[1]} {inst.orientation.name}")
    for layer, p in layout.flat_shapes:
        lines.append(f"FLAT {layer.value} " + " ".join(map(str, p.coords())))
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------- clipping steps

def instances(layout: Layout, cell_name: str) -> list[Instance]:
    return [i for i in layout.instances if i.cell_name == cell_name]


def bbox(instance: Instance, layout: Layout) -> Rect:
    shapes = layout.instance_shapes(instance)
    if not shapes:
        raise DataError(f"cell {instance.cell_name!r} has no shapes; bounding box is degenerate")
    pts = np.array([v for _, p in shapes for v in p.vertices], dtype=np.int64)
    return Rect(int(pts[:, 0].min()), int(pts[:, 1].min()), int(pts[:, 0].max()), int(pts[:, 1].max()))


def _sweep_starts(lo: int, hi: int, size: int) -> list[int]:
    span = hi - lo
    if span < size:
        return [lo + (span - size) // 2]
    starts = list(range(lo, hi - size + 1, size))
    if starts[-1] + size < hi:
        starts.append(hi - size)
    return starts


def sweep_core(box: Rect, core_size: int) -> list[Rect]:
    """Core boxes of side ``core_size`` covering ``box``, row by row (x fastest).

    Stride equals the core size; a clamped last row/column ends on the far
    edge, and a dimension shorter than the core gets one centred core.
    """
    if core_size <= 0:
        raise ValueError("core_size must be > 0")
    xs = _sweep_starts(box.x0, box.x1, core_size)
    ys = _sweep_starts(box.y0, box.y1, core_size)
    return [Rect(x, y, x + core_size, y + core_size) for y in ys for x in xs]


def expand(core: Rect, context: int) -> Rect:
    if context < 0:
        raise ValueError("context must be >= 0")
    return Rect(core.x0 - context, core.y0 - context, core.x1 + context, core.y1 + context)


def clip_polygon(poly: Polygon, window: Rect) -> list[Polygon]:
    """Intersection of one simple polygon with ``window``, in window-local coordinates."""
    b = poly.bbox()
    if not b.overlaps(window):
        return []
    if window.contains(b):
        return [poly.translate(-window.x0, -window.y0)]
    v = np.asarray(poly.vertices, dtype=np.int64)
    xs = np.unique(np.concatenate([[window.x0, window.x1], v[:, 0]]))
    ys = np.unique(np.concatenate([[window.y0, window.y1], v[:, 1]]))
    xs = xs[(xs >= window.x0) & (xs <= window.x1)]
    ys = ys[(ys >= window.y0) & (ys <= window.y1)]
    col_of = lambda a: np.searchsorted(xs, a, side="left")  # noqa: E731
    row_of = lambda a: np.searchsorted(ys, a, side="left")  # noqa: E731
    sign = 1 if poly.signed_area2 > 0 else -1
    w = winding_grid([poly.vertices], len(ys) - 1, len(xs) - 1, col_of, row_of, signs=[sign])
    out = []
    for loop in trace_loops(w > 0):
        out.append(Polygon(tuple((int(xs[c]) - window.x0, int(ys[r]) - window.y0) for c, r in loop)))
    return out


def _scan_key(p: Polygon):
    b = p.bbox()
    return (b.y0, b.x0, p.vertices)


def clip(layout: Layout, window: Rect, layer: Layer) -> list[Polygon]:
    """All flattened shapes on ``layer`` intersected with ``window``.

    Results are window-local, zero-area contacts are dropped, and polygons are
    ordered by (min y, min x).
    """
    out: list[Polygon] = []
    for poly in layout.shapes_touching(window, layer):
        out.extend(clip_polygon(poly, window))
    out.sort(key=_scan_key)
    return out


def clip_shapes(shapes: Iterable[Polygon], window: Rect) -> list[Polygon]:
    out: list[Polygon] = []
    for poly in shapes:
        out.extend(clip_polygon(poly, window))
    out.sort(key=_scan_key)
    return out
