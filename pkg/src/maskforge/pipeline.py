"""Dataset generation at standard-cell placements.

For every selected cell, instance and swept core, each layer with a
nonempty clip is emitted once per context size as a window-sized target
image. OPC and ILT masks are computed once per (core, layer) on a larger
simulation canvas centred on the core, cropped to the core and shared by all
context variants. ``manifest.jsonl`` (a header object followed by one record
per tile) is written last and atomically.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import os
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from . import __version__
from .errors import DataError, DivergenceError, OpcError
from .geometry import Polygon, Rect
from .ilt import IltConfig, ilt_ground_truth
from .layout import ClipConfig, Layer, Layout, bbox, clip, expand, sweep_core
from .litho import KernelSet, ResistConfig, file_digest
from .mbopc import OpcConfig, opc_ground_truth
from .metrics import MetricConfig, MetricReport, evaluate, shot_count
from .raster import rasterize, read_pgm, write_pgm

log = logging.getLogger(__name__)

MANIFEST = "manifest.jsonl"
KERNEL_COPY = "kernels.lkrn"
PARTIAL_MARKER = "INCOMPLETE"


@dataclass(frozen=True)
class PipelineConfig:
    clip: ClipConfig = field(default_factory=ClipConfig)
    canvas_size: int = 2048
    resist: ResistConfig = field(default_factory=ResistConfig)
    ilt: IltConfig = field(default_factory=IltConfig)
    opc: OpcConfig = field(default_factory=OpcConfig)
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        margin = self.canvas_size - self.clip.core_size
        if margin < 0 or margin % 2:
            raise ValueError("canvas_size must exceed core_size by an even margin")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class Tile:
    id: str
    unit: str
    cell_tag: str
    instance: int
    layer: Layer
    core: Rect
    window: Rect
    context: int
    shapes: tuple[Polygon, ...]
    design_name: str


@dataclass(frozen=True)
class TileRecord:
    tile: Tile
    target_path: str
    opc_mask_path: str
    ilt_mask_path: str

    def to_json(self) -> dict:
        t = self.tile
        return {
            "type": "tile", "id": t.id, "unit": t.unit, "design": t.design_name,
            "cell_tag": t.cell_tag, "instance": t.instance, "layer": t.layer.value,
            "context": t.context, "core": list(t.core.as_tuple()), "window": list(t.window.as_tuple()),
            "shapes": [p.coords() for p in t.shapes],
            "target_path": self.target_path, "opc_mask_path": self.opc_mask_path,
            "ilt_mask_path": self.ilt_mask_path,
        }

    @classmethod
    def from_json(cls, d: dict) -> "TileRecord":
        tile = Tile(d["id"], d["unit"], d["cell_tag"], d["instance"], Layer(d["layer"]),
                    Rect(*d["core"]), Rect(*d["window"]), d["context"],
                    tuple(Polygon.from_coords(c) for c in d["shapes"]), d["design"])
        return cls(tile, d["target_path"], d["opc_mask_path"], d["ilt_mask_path"])


@dataclass
class DatasetManifest:
    header: dict
    records: list[TileRecord]
    root: Path

    @property
    def counts(self) -> dict[str, int]:
        return dict(self.header.get("counts", {}))


@dataclass(frozen=True)
class MaskUnit:
    unit: str
    layer: Layer
    core: Rect
    seed: int


# --------------------------------------------------------------------------- enumeration

def enumerate_tiles(layout: Layout, cells: Iterable[str], clip_cfg: ClipConfig,
                    design_name: str = "design") -> tuple[list[Tile], list[MaskUnit]]:
    """Tiles and mask units in the nested cell/instance/core/layer/context order."""
    wanted = set(cells)
    tiles: list[Tile] = []
    units: list[MaskUnit] = []
    for cell_name in layout.cells:
        if cell_name not in wanted:
            continue
        for idx, inst in enumerate(layout.instances):
            if inst.cell_name != cell_name:
                continue
            try:
                box = bbox(inst, layout)
            except DataError:
                log.warning("cell %s has no shapes; instance %d skipped", cell_name, idx)
                continue
            for k, core in enumerate(sweep_core(box, clip_cfg.core_size)):
                for layer in clip_cfg.layers:
                    unit = f"{design_name}_{cell_name}_i{idx}_k{k}_{layer.value}"
                    emitted = False
                    for ctx in clip_cfg.contexts:
                        window = expand(core, ctx)
                        shapes = clip(layout, window, layer)
                        if not shapes:
                            continue
                        tiles.append(Tile(f"{unit}_c{ctx}", unit, cell_name, idx, layer, core, window,
                                          ctx, tuple(shapes), design_name))
                        emitted = True
                    if emitted:
                        units.append(MaskUnit(unit, layer, core, len(units)))
    return tiles, units


# --------------------------------------------------------------------------- mask generation

_WORKER_STATE: dict = {}


def _init_worker(layout, kernels, cfg):
    _WORKER_STATE.update(layout=layout, kernels=kernels, cfg=cfg)


def _compute_unit(unit: MaskUnit):
    layout, kernels, cfg = _WORKER_STATE["layout"], _WORKER_STATE["kernels"], _WORKER_STATE["cfg"]
    return unit.unit, compute_masks(layout, unit, kernels, cfg)


def compute_masks(layout: Layout, unit: MaskUnit, kernels: KernelSet, cfg: PipelineConfig):
    """(opc_mask, ilt_mask) for one core, or the divergence message."""
    margin = (cfg.canvas_size - cfg.clip.core_size) // 2
    canvas = expand(unit.core, margin)
    shapes = clip(layout, canvas, unit.layer)
    local_canvas = Rect(0, 0, canvas.width, canvas.height)
    core = unit.core.translate(-canvas.x0, -canvas.y0)
    try:
        opc = opc_ground_truth(shapes, core, kernels, cfg.resist, cfg.opc, local_canvas)
        ilt_cfg = replace(cfg.ilt, resist=cfg.resist)
        ilt = ilt_ground_truth(shapes, core, kernels, ilt_cfg, local_canvas, seed=cfg.seed + unit.seed)
    except (DivergenceError, OpcError) as exc:
        return f"{type(exc).__name__}: {exc}"
    return opc, ilt


def _config_echo(cfg: PipelineConfig) -> dict:
    def clean(d):
        if isinstance(d, dict):
            return {k: clean(v) for k, v in d.items()}
        if isinstance(d, (list, tuple)):
            return [clean(v) for v in d]
        if isinstance(d, Layer):
            return d.value
        return d
    return {
        "core_size": cfg.clip.core_size,
        "contexts": list(cfg.clip.contexts),
        "layers": [l.value for l in cfg.clip.layers],
        "canvas_size": cfg.canvas_size,
        "resist": asdict(cfg.resist),
        "ilt": clean(asdict(cfg.ilt)),
        "opc": asdict(cfg.opc),
        "seed": cfg.seed,
    }


def _write_manifest(root: Path, header: dict, records: list[TileRecord]) -> Path:
    path = root / MANIFEST
    tmp = root / (MANIFEST + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for r in records:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")
    os.replace(tmp, path)
    return path


def generate_dataset(layout: Layout, cells: Iterable[str], cfg: PipelineConfig, out_dir: str | os.PathLike,
                     kernels: KernelSet, design_name: str = "design",
                     kernel_source: str = "in-memory") -> DatasetManifest:
    root = Path(out_dir)
    marker = root / PARTIAL_MARKER
    try:
        for sub in ("targets", "masks/opc", "masks/ilt"):
            (root / sub).mkdir(parents=True, exist_ok=True)
        if marker.exists():
            marker.unlink()
        tiles, units = enumerate_tiles(layout, cells, cfg.clip, design_name)
        if cfg.workers > 1 and len(units) > 1:
            with ProcessPoolExecutor(cfg.workers, initializer=_init_worker,
                                     initargs=(layout, kernels, cfg)) as pool:
                results = dict(pool.map(_compute_unit, units))
        else:
            results = {u.unit: compute_masks(layout, u, kernels, cfg) for u in units}

        skipped = []
        for u in units:
            res = results[u.unit]
            if isinstance(res, str):
                log.warning("unit %s skipped: %s", u.unit, res)
                skipped.append({"unit": u.unit, "error": res})
                continue
            opc, ilt = res
            write_pgm(root / "masks/opc" / f"{u.unit}.pgm", opc)
            write_pgm(root / "masks/ilt" / f"{u.unit}.pgm", ilt)
        bad = {s["unit"] for s in skipped}

        records = []
        for t in tiles:
            if t.unit in bad:
                continue
            target = rasterize(t.shapes, t.window)
            rel = f"targets/{t.id}.pgm"
            write_pgm(root / rel, target)
            records.append(TileRecord(t, rel, f"masks/opc/{t.unit}.pgm", f"masks/ilt/{t.unit}.pgm"))

        kbytes = kernels.to_bytes()
        with open(root / KERNEL_COPY, "wb") as fh:
            fh.write(kbytes)
        counts = {l.value: 0 for l in cfg.clip.layers}
        for r in records:
            counts[r.tile.layer.value] += 1
        header = {
            "type": "header", "version": __version__, "designs": [design_name],
            "cells": sorted(set(cells)), "counts": counts, "tile_count": len(records),
            "kernel_file": KERNEL_COPY, "kernel_digest": file_digest(root / KERNEL_COPY),
            "kernel_source": kernel_source, "config": _config_echo(cfg), "skipped": skipped,
        }
        _write_manifest(root, header, records)
    except OSError as exc:
        try:
            marker.write_text(f"generation aborted: {exc}\n")
        except OSError:
            pass
        raise
    return DatasetManifest(header, records, root)


# --------------------------------------------------------------------------- reading & verification

def load_manifest(path: str | os.PathLike) -> DatasetManifest:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"{path}: cannot read manifest ({exc.strerror})") from None
    if not lines:
        raise DataError(f"{path}: empty manifest")
    try:
        header = json.loads(lines[0])
        rows = [json.loads(l) for l in lines[1:] if l.strip()]
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: malformed JSON ({exc})") from None
    if header.get("type") != "header":
        raise DataError(f"{path}: first line is not a header object")
    try:
        records = [TileRecord.from_json(r) for r in rows]
    except (KeyError, TypeError, DataError) as exc:
        raise DataError(f"{path}: malformed tile record ({exc})") from None
    return DatasetManifest(header, records, path.parent)


@dataclass(frozen=True)
class Violation:
    path: str
    message: str

    def __str__(self):
        return f"{self.path}: {self.message}"


def verify_dataset(manifest_path: str | os.PathLike) -> list[Violation]:
    """Check every file, dimension, window and digest invariant of a dataset."""
    man = load_manifest(manifest_path)
    root, hdr = man.root, man.header
    core_size = hdr["config"]["core_size"]
    out: list[Violation] = []
    expected_counts: dict[str, int] = defaultdict(int)
    for r in man.records:
        expected_counts[r.tile.layer.value] += 1
    for layer, n in hdr.get("counts", {}).items():
        if expected_counts.get(layer, 0) != n:
            out.append(Violation(MANIFEST, f"header count for {layer} is {n}, manifest holds {expected_counts.get(layer, 0)}"))
    if hdr.get("tile_count") != len(man.records):
        out.append(Violation(MANIFEST, f"tile_count {hdr.get('tile_count')} != {len(man.records)} records"))
    kpath = root / hdr.get("kernel_file", KERNEL_COPY)
    if not kpath.exists():
        out.append(Violation(str(kpath.relative_to(root)), "kernel file missing"))
    elif file_digest(kpath) != hdr.get("kernel_digest"):
        out.append(Violation(str(kpath.relative_to(root)), "kernel digest mismatch"))

    checked: dict[str, bool] = {}

    def check_file(rel: str, side: int, what: str):
        if rel in checked:
            return
        checked[rel] = True
        p = root / rel
        if not p.exists():
            out.append(Violation(rel, f"missing {what}"))
            return
        try:
            img = read_pgm(p)
        except DataError as exc:
            out.append(Violation(rel, f"unreadable {what}: {exc}"))
            return
        if img.shape != (side, side):
            out.append(Violation(rel, f"{what} is {img.shape[1]}x{img.shape[0]}, expected {side}x{side}"))

    for r in man.records:
        t = r.tile
        side = core_size + 2 * t.context
        if t.core.width != core_size or t.core.height != core_size:
            out.append(Violation(t.id, f"core is {t.core.width}x{t.core.height}, expected {core_size}x{core_size}"))
        if t.window != expand(t.core, t.context):
            out.append(Violation(t.id, "window is not the core expanded by the context"))
        if not t.shapes:
            out.append(Violation(t.id, "tile has no shapes"))
        check_file(r.target_path, side, f"target (expected side {core_size}+2*{t.context}={side})")
        check_file(r.opc_mask_path, core_size, "OPC mask")
        check_file(r.ilt_mask_path, core_size, "ILT mask")
    return out


# --------------------------------------------------------------------------- context sweep

def evaluate_dataset(manifest_path: str | os.PathLike, kernels: KernelSet, family: str = "ilt",
                     resist_cfg: ResistConfig = ResistConfig(),
                     metric_cfg: MetricConfig = MetricConfig(),
                     context_fill: str = "target") -> dict[str, MetricReport]:
    """Metrics of every ground-truth mask, placed at its core inside the tile window.

    The context ring around the core holds the uncorrected target geometry
    (``context_fill="target"``) or nothing (``"zero"``); with the former the
    print near the core boundary reflects the neighbourhood each context
    size exposes. Shots are counted on the core mask alone.
    """
    if family not in ("opc", "ilt"):
        raise ValueError("family must be 'opc' or 'ilt'")
    if context_fill not in ("target", "zero"):
        raise ValueError("context_fill must be 'target' or 'zero'")
    man = load_manifest(manifest_path)
    out = {}
    for r in man.records:
        t = r.tile
        mask = read_pgm(man.root / (r.ilt_mask_path if family == "ilt" else r.opc_mask_path))
        if context_fill == "target":
            full = rasterize(t.shapes, t.window).astype(np.float64)
        else:
            full = np.zeros((t.window.height, t.window.width))
        core = t.core.translate(-t.window.x0, -t.window.y0)
        full[core.y0:core.y1, core.x0:core.x1] = mask
        rep = evaluate(full, list(t.shapes), core, kernels, resist_cfg, metric_cfg)
        out[t.id] = replace(rep, shots=shot_count(mask > 0.5))   # shots of the core mask only
    return out


def context_sweep_report(manifest: DatasetManifest | str | os.PathLike,
                         metrics: dict[str, MetricReport | dict]) -> str:
    """CSV of mean metrics per (context, layer)."""
    if not isinstance(manifest, DatasetManifest):
        manifest = load_manifest(manifest)
    groups: dict[tuple[int, str], list] = defaultdict(list)
    for r in manifest.records:
        m = metrics.get(r.tile.id)
        if m is None:
            continue
        if isinstance(m, MetricReport):
            m = m.as_dict()
        groups[(r.tile.context, r.tile.layer.value)].append(m)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["context", "layer", "mean_l2", "mean_epe", "mean_pvb", "mean_shots", "tiles"])
    for (ctx, layer) in sorted(groups):
        rows = groups[(ctx, layer)]
        means = [np.mean([row[k] for row in rows]) for k in ("l2", "epe", "pvb", "shots")]
        w.writerow([ctx, layer] + [f"{v:.4f}" for v in means] + [len(rows)])
    return buf.getvalue()
