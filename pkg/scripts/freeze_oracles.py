"""Recompute the regression values frozen in the test suite.

Prints each value next to the constant the tests assert, so a change in the
optics or optimizers shows up as an explicit diff rather than a bare failure.
"""
import numpy as np

from maskforge.geometry import Rect
from maskforge.ilt import IltConfig, optimize
from maskforge.litho import default_kernels, print_image
from maskforge.mbopc import OpcConfig, correct_image
from maskforge.metrics import MetricConfig, evaluate, pvb
from maskforge.raster import rasterize


def main():
    m = np.zeros((160, 160))
    m[48:112, 48:112] = 1
    z = print_image(m, default_kernels(10))
    rows = np.nonzero(z[:, 80])[0]
    print(f"64 nm square print: rows {rows.min()}..{rows.max() + 1}, area {int(z.sum())}   (frozen 47..113, 3932)")

    sq = np.zeros((64, 64), dtype=bool)
    sq[20:44, 20:44] = True
    res = optimize(sq, default_kernels(5.0), IltConfig(max_iters=200))
    ratio = res.loss_history[-1][1] / res.initial[0]
    print(f"ILT 200 iterations: L2 ratio {ratio:.3f}   (bound 0.5)")

    _, trace, _ = correct_image(sq, default_kernels(10), cfg=OpcConfig())
    print(f"MB-OPC pinned trace: {trace}   (frozen [3.0, 1.0])")

    print(f"PVB of 24 nm square, sigma 5: {pvb(sq.astype(float), default_kernels(5.0))}   (frozen 4)")
    shapes = [Rect(20, 20, 44, 44).to_polygon()]
    r = evaluate(rasterize(shapes, Rect(0, 0, 64, 64)).astype(float), shapes, Rect(16, 16, 48, 48),
                 default_kernels(5.0), cfg=MetricConfig(epe_constraint=2, epe_spacing=5))
    print(f"evaluate: {r.as_dict()}   (frozen l2=64 epe=0 pvb=4 shots=1)")


if __name__ == "__main__":
    main()
