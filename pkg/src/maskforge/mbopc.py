"""Model-based OPC: edge fragmentation, per-fragment EPE measurement and a
proportional edge-movement loop driven by lithography simulation."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionError, OpcError
from .geometry import Polygon, Rect, fills_cleanly, simplify_loop, trace_loops
from .litho import KernelSet, ResistConfig, print_image
from .raster import fill_loops, probe_contour, rasterize


@dataclass(frozen=True)
class OpcConfig:
    fragment_len: int = 40
    max_iters: int = 20
    gain: float = 0.5
    max_offset: int = 40
    epe_cap: int = 64
    converge_tol: float = 1.0

    def __post_init__(self):
        if self.fragment_len <= 0:
            raise ValueError("fragment_len must be > 0")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if not 0 < self.gain <= 1:
            raise ValueError("gain must be in (0, 1]")
        if self.max_offset < 0:
            raise ValueError("max_offset must be >= 0")


@dataclass(frozen=True)
class Fragment:
    polygon_id: int
    edge_index: int
    start: tuple[int, int]
    end: tuple[int, int]
    normal: tuple[int, int]
    corner: bool = False
    offset: float = 0.0

    @property
    def length(self) -> int:
        return abs(self.end[0] - self.start[0]) + abs(self.end[1] - self.start[1])

    @property
    def control_point(self) -> tuple[float, float]:
        return ((self.start[0] + self.end[0]) / 2, (self.start[1] + self.end[1]) / 2)


def _loop_vertices(poly: Polygon, oriented: bool) -> list[tuple[int, int]]:
    if not oriented:
        poly = poly.ccw()
    return simplify_loop(poly.vertices)


def split_lengths(length: int, fragment_len: int) -> list[int]:
    """Near-equal split into ceil(length / fragment_len) parts, longer parts first."""
    n = max(1, math.ceil(length / fragment_len))
    base, rem = divmod(length, n)
    return [base + 1] * rem + [base] * (n - rem)


def fragment_edges(shapes: list[Polygon], cfg: OpcConfig = OpcConfig(), oriented: bool = False) -> list[Fragment]:
    """Split every polygon edge into fragments with outward normals.

    With ``oriented=False`` each polygon is treated as a filled shape and
    re-wound counter-clockwise; with ``oriented=True`` the vertex order is
    trusted to keep the interior on the left (as produced by boundary tracing,
    where holes run clockwise).
    """
    frags: list[Fragment] = []
    for pid, poly in enumerate(shapes):
        verts = _loop_vertices(poly, oriented)
        m = len(verts)
        for e in range(m):
            (xa, ya), (xb, yb) = verts[e], verts[(e + 1) % m]
            dx, dy = int(np.sign(xb - xa)), int(np.sign(yb - ya))
            normal = (dy, -dx)
            pos = 0
            parts = split_lengths(abs(xb - xa) + abs(yb - ya), cfg.fragment_len)
            for k, ln in enumerate(parts):
                s = (xa + dx * pos, ya + dy * pos)
                pos += ln
                t = (xa + dx * pos, ya + dy * pos)
                frags.append(Fragment(pid, e, s, t, normal, corner=(k == 0 or k == len(parts) - 1)))
    return frags


def _probe_args(starts: np.ndarray, ends: np.ndarray, normals: np.ndarray):
    horizontal = normals[:, 1] != 0
    lo = np.minimum(starts, ends)
    hi = np.maximum(starts, ends)
    mid = (starts + ends) / 2.0
    axis = np.where(horizontal, 0, 1)
    idx = np.arange(len(starts))
    along = np.floor(mid[idx, axis]).astype(np.int64)
    along = np.clip(along, lo[idx, axis], hi[idx, axis] - 1)
    edge = starts[idx, 1 - axis]
    sign = np.where(horizontal, normals[:, 1], normals[:, 0])
    return horizontal, along, edge, sign


def measure_epe(fragments: list[Fragment], z: np.ndarray, cap: int = 64) -> np.ndarray:
    """Signed EPE (nm) at each fragment's control point; positive = print outside target."""
    if not fragments:
        return np.zeros(0, dtype=np.int64)
    starts = np.array([f.start for f in fragments], dtype=np.int64)
    ends = np.array([f.end for f in fragments], dtype=np.int64)
    normals = np.array([f.normal for f in fragments], dtype=np.int64)
    return probe_contour(z, *_probe_args(starts, ends, normals), cap=cap)


class _MaskBuilder:
    """Rebuilds corrected loops from per-fragment offsets (jogs between fragments)."""

    def __init__(self, loops: list[list[tuple[int, int]]], fragments: list[Fragment], width: int, height: int):
        self.loops = loops
        self.width, self.height = width, height
        self.by_edge: list[list[list[int]]] = [[[] for _ in loop] for loop in loops]
        for k, f in enumerate(fragments):
            self.by_edge[f.polygon_id][f.edge_index].append(k)
        self.fragments = fragments

    def loop_geometry(self, lid: int, off: np.ndarray) -> list[tuple[int, int]]:
        verts = self.loops[lid]
        edges = self.by_edge[lid]
        m = len(verts)
        normals = [self.fragments[edges[e][0]].normal for e in range(m)]
        out = []
        for e in range(m):
            fs = edges[e]
            prev = edges[e - 1][-1]
            (vx, vy), (nx, ny), (px, py) = verts[e], normals[e], normals[e - 1]
            out.append((vx + off[prev] * px + off[fs[0]] * nx, vy + off[prev] * py + off[fs[0]] * ny))
            for a, b in zip(fs, fs[1:]):
                bx, by = self.fragments[a].end
                out.append((bx + off[a] * nx, by + off[a] * ny))
                out.append((bx + off[b] * nx, by + off[b] * ny))
        return simplify_loop([(int(x), int(y)) for x, y in out])

    def build(self, offsets: np.ndarray) -> np.ndarray:
        """Mask for the given offsets; offsets of loops that would cross themselves are halved in place."""
        geoms = []
        for lid in range(len(self.loops)):
            ids = [k for e in self.by_edge[lid] for k in e]
            for attempt in range(12):
                snapped = np.trunc(offsets).astype(np.int64)
                if not snapped[ids].any():
                    geoms.append(self.loops[lid])
                    break
                g = self.loop_geometry(lid, snapped)
                if len(g) >= 4 and fills_cleanly(g):
                    geoms.append(g)
                    break
                offsets[ids] *= 0.5
                if attempt == 10:
                    offsets[ids] = 0.0
            else:
                raise OpcError(f"loop {lid} cannot be made simple")
        return fill_loops(geoms, self.width, self.height)


def correct_fragments(target_shapes: list[Polygon], kernels: KernelSet, resist_cfg: ResistConfig,
                      cfg: OpcConfig, canvas: Rect, init_offsets=None):
    """Run the OPC loop; returns (mask, mean-|EPE| trace, fragments with final offsets)."""
    return correct_image(rasterize(target_shapes, canvas), kernels, resist_cfg, cfg, init_offsets)


def correct_image(target: np.ndarray, kernels: KernelSet, resist_cfg: ResistConfig = ResistConfig(),
                  cfg: OpcConfig = OpcConfig(), init_offsets=None):
    """OPC loop for a binary target image; same returns as :func:`correct_fragments`."""
    target = np.asarray(target) > 0.5
    if target.ndim != 2:
        raise DimensionError("target must be a 2-D image")
    height, width = target.shape
    loops = trace_loops(target)
    polys = [Polygon(tuple(l)) for l in loops]
    frags = fragment_edges(polys, cfg, oriented=True)
    builder = _MaskBuilder(loops, frags, width, height)
    offsets = np.zeros(len(frags)) if init_offsets is None else np.array(init_offsets, dtype=np.float64)
    if offsets.shape != (len(frags),):
        raise DimensionError(f"expected {len(frags)} initial offsets, got {offsets.shape}")
    offsets = np.clip(offsets, -cfg.max_offset, cfg.max_offset)
    trace: list[float] = []
    mask = builder.build(offsets) if cfg.max_iters == 0 or not frags else None
    for _ in range(cfg.max_iters if frags else 0):
        mask = builder.build(offsets)
        z = print_image(mask, kernels, resist_cfg)
        epe = measure_epe(frags, z, cfg.epe_cap)
        trace.append(float(np.mean(np.abs(epe))))
        if np.max(np.abs(epe)) <= cfg.converge_tol:
            break
        offsets = np.clip(offsets - cfg.gain * epe, -cfg.max_offset, cfg.max_offset)
    else:
        if frags and cfg.max_iters:
            mask = builder.build(offsets)
    out = [replace(f, offset=float(o)) for f, o in zip(frags, offsets)]
    return mask, trace, out


def correct(target_shapes: list[Polygon], kernels: KernelSet, resist_cfg: ResistConfig = ResistConfig(),
            cfg: OpcConfig = OpcConfig(), canvas: Rect | None = None, init_offsets=None):
    """Corrected binary mask and per-iteration mean |EPE|.

    Each iteration prints the current mask at nominal dose, measures EPE at
    every fragment and moves fragments by ``-gain * epe`` (clamped to
    ``max_offset``). Stops early once every |EPE| is within ``converge_tol``.
    Mask geometry snaps offsets toward zero onto the nm grid.
    """
    if canvas is None:
        if not target_shapes:
            raise DimensionError("canvas is required when there are no shapes")
        xs = [p.bbox() for p in target_shapes]
        canvas = Rect(0, 0, max(b.x1 for b in xs), max(b.y1 for b in xs))
    mask, trace, _ = correct_fragments(target_shapes, kernels, resist_cfg, cfg, canvas, init_offsets)
    return mask, trace


def opc_ground_truth(shapes: list[Polygon], core: Rect, kernels: KernelSet, resist_cfg: ResistConfig = ResistConfig(),
                     cfg: OpcConfig = OpcConfig(), canvas: Rect = Rect(0, 0, 2048, 2048)) -> np.ndarray:
    """OPC mask on the simulation canvas, cropped to ``core`` (canvas-local coordinates)."""
    if not canvas.contains(core):
        raise DimensionError("core must lie inside the simulation canvas")
    if not shapes:
        return np.zeros((core.height, core.width), dtype=bool)
    mask, _ = correct(shapes, kernels, resist_cfg, cfg, canvas)
    return mask[core.y0 - canvas.y0:core.y1 - canvas.y0, core.x0 - canvas.x0:core.x1 - canvas.x0].copy()
