"""A small constructed placement used by the experiments and the test suite.

Three cell types are placed seven times with mixed orientations. Geometry is
expressed in units of ``core_size / 64`` so the same layout can be run at the
full 512 nm core or scaled down to a 64 nm core for quick experiments. Every
swept core of every instance contains metal and via, so the tile count is
fixed by the instance bounding boxes alone.
"""
from __future__ import annotations

import math

from .layout import Layout, parse_layout

# name -> (width, height) in units; metal rails run along x every 16 units
CELL_DIMS = {"INV_X1": (40, 160), "NAND2_X1": (100, 64), "DFF_X1": (128, 128)}

PLACEMENTS = [
    ("INV_X1", (0, 0), "R0"),
    ("INV_X1", (100, 40), "MX"),
    ("INV_X1", (400, 0), "R90"),
    ("NAND2_X1", (0, 220), "R0"),
    ("NAND2_X1", (150, 300), "MY"),
    ("DFF_X1", (420, 300), "R180"),
    ("DFF_X1", (200, 420), "MXR90"),
]


def _cell_lines(name: str, w: int, h: int, u: int) -> list[str]:
    rails = list(range(0, h - 4, 16)) + [h - 4]   # outermost rails span the cell height
    lines = [f"CELL {name}"]
    for y in rails:
        lines.append(f"  SHAPE metal 0 {y * u} {w * u} {(y + 4) * u}")
    # a strap joining the first two rails, so the metal union is not just bars
    lines.append(f"  SHAPE metal {4 * u} 0 {10 * u} {20 * u}")
    for y in rails:
        for x in range(6, w - 4, 16):
            lines.append(f"  SHAPE via {x * u} {y * u} {(x + 4) * u} {(y + 4) * u}")
    lines.append("END")
    return lines


def demo_layout_text(core_size: int = 512) -> str:
    if core_size % 64:
        raise ValueError("core_size must be a multiple of 64")
    u = core_size // 64
    lines = ["# constructed placement: 3 cell types, 7 instances"]
    for name, (w, h) in CELL_DIMS.items():
        lines += _cell_lines(name, w, h, u)
    for name, (x, y), orient in PLACEMENTS:
        lines.append(f"INSTANCE {name} {x * u} {y * u} {orient}")
    return "\n".join(lines) + "\n"


def demo_layout(core_size: int = 512) -> Layout:
    return parse_layout(demo_layout_text(core_size))


def _cores_along(span: int, core: int) -> int:
    return 1 if span <= core else math.ceil(span / core)


def expected_cores(core_size: int = 512) -> int:
    """Analytic number of swept cores over all placements."""
    u = core_size // 64
    total = 0
    for name, _, orient in PLACEMENTS:
        w, h = CELL_DIMS[name]
        if orient in ("R90", "R270", "MXR90", "MYR90"):
            w, h = h, w
        total += _cores_along(w * u, core_size) * _cores_along(h * u, core_size)
    return total
