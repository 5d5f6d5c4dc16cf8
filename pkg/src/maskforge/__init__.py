"""maskforge: layout clipping, lithography simulation and mask synthesis
(model-based OPC and pixel ILT) for building mask-optimization datasets."""

__version__ = "0.1.0"

from .errors import (DataError, DimensionError, DivergenceError, KernelFormatError, LayoutError,
                     MaskforgeError, OpcError, ResourceError)
from .geometry import Orientation, Polygon, Rect
from .layout import ClipConfig, Layer, Layout, bbox, clip, expand, parse_layout, sweep_core
from .litho import (DoseSpec, Kernel, KernelSet, ResistConfig, aerial_image, default_kernels,
                    load_kernels, print_image, save_kernels)
from .raster import rasterize, read_pgm, write_pgm
