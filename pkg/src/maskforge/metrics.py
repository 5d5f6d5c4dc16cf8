"""Mask quality metrics: squared L2 inside the core, EPE violation count,
dose process-variation band and rectangular shot count."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DimensionError
from .geometry import Polygon, Rect, trace_loops
from .litho import DoseSpec, KernelSet, ResistConfig, aerial_image, resist
from .raster import core_mask, probe_contour, rasterize


@dataclass(frozen=True)
class MetricConfig:
    epe_constraint: int = 15
    epe_spacing: int = 40
    dose: DoseSpec = field(default_factory=DoseSpec)
    min_edge_for_epe: int | None = None
    epe_cap: int = 64

    def __post_init__(self):
        if self.epe_constraint <= 0 or self.epe_spacing <= 0:
            raise ValueError("epe_constraint and epe_spacing must be > 0")
        if self.min_edge_for_epe is None:
            object.__setattr__(self, "min_edge_for_epe", 2 * self.epe_spacing)


@dataclass(frozen=True)
class MetricReport:
    l2: int
    epe: int
    pvb: int
    shots: int

    def as_dict(self) -> dict:
        return asdict(self)


def _check_same(*imgs):
    shapes = {np.shape(i) for i in imgs}
    if len(shapes) != 1:
        raise DimensionError(f"image dimensions differ: {sorted(shapes)}")


def l2_error(z: np.ndarray, target: np.ndarray, core: np.ndarray) -> int:
    """Pixels where the print differs from the core-restricted target."""
    _check_same(z, target, core)
    ref = np.asarray(target, dtype=bool) & np.asarray(core, dtype=bool)
    return int(np.count_nonzero(np.asarray(z, dtype=bool) != ref))


def sample_positions(length: int, spacing: int, min_edge: int) -> list[float]:
    """Distances along an edge at which EPE is probed.

    Points start ``spacing / 2`` from the first corner and repeat every
    ``spacing``; edges of at least ``min_edge`` also get the point mirrored
    ``spacing / 2`` from the far corner. Edges shorter than ``spacing`` are
    probed once at their midpoint.
    """
    half = spacing / 2
    if length < spacing:
        return [length / 2]
    pts = []
    p = half
    while p <= length - half:
        pts.append(p)
        p += spacing
    if length >= min_edge and pts[-1] < length - half:
        pts.append(length - half)
    return pts


def epe_samples(z: np.ndarray, target_shapes: list[Polygon], core: Rect,
                cfg: MetricConfig = MetricConfig()) -> np.ndarray:
    """Signed print-to-target distance at every EPE sample point.

    Edges are taken from the core-restricted target; edges created by the
    core cut itself (the target continues beyond the core) are not sampled.
    """
    z = np.asarray(z, dtype=bool)
    h, w = z.shape
    window = Rect(0, 0, w, h)
    full = rasterize(target_shapes, window)
    tgt = full & core_mask(window, core)
    probes = []
    for loop in trace_loops(tgt):
        m = len(loop)
        for e in range(m):
            (xa, ya), (xb, yb) = loop[e], loop[(e + 1) % m]
            dx, dy = int(np.sign(xb - xa)), int(np.sign(yb - ya))
            nx, ny = dy, -dx
            length = abs(xb - xa) + abs(yb - ya)
            for p in sample_positions(length, cfg.epe_spacing, cfg.min_edge_for_epe):
                if dy == 0:
                    a = int(np.clip(np.floor(xa + dx * p), min(xa, xb), max(xa, xb) - 1))
                    probe = (True, a, ya, ny)
                    beyond = (ya if ny > 0 else ya - 1, a)
                else:
                    a = int(np.clip(np.floor(ya + dy * p), min(ya, yb), max(ya, yb) - 1))
                    probe = (False, a, xa, nx)
                    beyond = (a, xa if nx > 0 else xa - 1)
                r, c = beyond
                if 0 <= r < h and 0 <= c < w and full[r, c]:
                    continue   # edge produced by the core cut
                probes.append(probe)
    if not probes:
        return np.zeros(0, dtype=np.int64)
    horiz, along, edge, sign = (np.array(col) for col in zip(*probes))
    return probe_contour(z, horiz, along, edge, sign, cap=cfg.epe_cap)


def epe_violations(z: np.ndarray, target_shapes: list[Polygon], core: Rect,
                   cfg: MetricConfig = MetricConfig()) -> int:
    d = epe_samples(z, target_shapes, core, cfg)
    return int(np.count_nonzero(np.abs(d) > cfg.epe_constraint))


def pvb(mask: np.ndarray, kernels: KernelSet, resist_cfg: ResistConfig = ResistConfig(),
        cfg: MetricConfig = MetricConfig()) -> int:
    """Area printed at max dose but not at min dose (their symmetric difference)."""
    i = aerial_image(np.asarray(mask, dtype=np.float64), kernels)
    hi = resist(cfg.dose.max_dose * i, resist_cfg) > resist_cfg.print_threshold
    lo = resist(cfg.dose.min_dose * i, resist_cfg) > resist_cfg.print_threshold
    return int(np.count_nonzero(hi ^ lo))


def _run_merge(comp: np.ndarray) -> list[tuple[int, int, int, int]]:
    """Rectangles (c0, r0, c1, r1) from stacking identical horizontal runs."""
    rects = []
    active: dict[tuple[int, int], int] = {}
    padded = np.pad(comp.astype(np.int8), ((0, 1), (1, 1)))
    for r in range(padded.shape[0]):
        d = np.diff(padded[r])
        runs = set(zip(np.nonzero(d == 1)[0].tolist(), np.nonzero(d == -1)[0].tolist()))
        for key in list(active):
            if key not in runs:
                rects.append((key[0], active.pop(key), key[1], r))
        for key in runs:
            active.setdefault(key, r)
    rects.sort(key=lambda t: (t[1], t[0]))
    return rects


def fracture(mask: np.ndarray) -> list[Rect]:
    """Non-overlapping rectangles whose union is exactly the set pixels.

    Each 4-connected component is decomposed by horizontal sweep cuts and by
    vertical sweep cuts; the decomposition with fewer rectangles is kept
    (horizontal on ties).
    """
    m = np.asarray(mask, dtype=bool)
    labels, n = ndimage.label(m)
    out: list[Rect] = []
    for k, sl in enumerate(ndimage.find_objects(labels), start=1):
        comp = labels[sl] == k
        r0, c0 = sl[0].start, sl[1].start
        hz = _run_merge(comp)
        vt = _run_merge(comp.T)
        if len(vt) < len(hz):
            rects = [Rect(c0 + a, r0 + b, c0 + d, r0 + e) for b, a, e, d in vt]
        else:
            rects = [Rect(c0 + a, r0 + b, c0 + c, r0 + d) for a, b, c, d in hz]
        out.extend(rects)
    return out


def shot_count(mask: np.ndarray) -> int:
    return len(fracture(mask))


def evaluate(mask: np.ndarray, target_shapes: list[Polygon], core: Rect, kernels: KernelSet,
             resist_cfg: ResistConfig = ResistConfig(), cfg: MetricConfig = MetricConfig()) -> MetricReport:
    """All four metrics for a mask image; shapes and core share the image frame."""
    mask = np.asarray(mask, dtype=np.float64)
    h, w = mask.shape
    window = Rect(0, 0, w, h)
    if not window.contains(core):
        raise DimensionError(f"core {core.as_tuple()} does not fit the {w}x{h} mask")
    i = aerial_image(mask, kernels)
    th = resist_cfg.print_threshold
    z_nom = resist(cfg.dose.nominal * i, resist_cfg) > th
    z_max = resist(cfg.dose.max_dose * i, resist_cfg) > th
    z_min = resist(cfg.dose.min_dose * i, resist_cfg) > th
    target = rasterize(target_shapes, window)
    return MetricReport(
        l2=l2_error(z_nom, target, core_mask(window, core)),
        epe=epe_violations(z_nom, target_shapes, core, cfg),
        pvb=int(np.count_nonzero(z_max ^ z_min)),
        shots=shot_count(mask > 0.5),
    )
