"""Forward lithography: sum-of-coherent-systems aerial image, sigmoid resist,
thresholded print and dose corners; plus the binary kernel file format.
"""
from __future__ import annotations

import hashlib
import math
import os
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.fft as sfft
from scipy.special import expit

from .errors import DimensionError, KernelFormatError

MAGIC = b"LKRN"


@dataclass(frozen=True)
class ResistConfig:
    alpha: float = 50.0
    i_th: float = 0.225
    print_threshold: float = 0.5

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if not self.i_th > 0:
            raise ValueError("i_th must be > 0")
        if not 0 < self.print_threshold < 1:
            raise ValueError("print_threshold must be in (0, 1)")


@dataclass(frozen=True)
class DoseSpec:
    nominal: float = 1.0
    min_dose: float = 0.98
    max_dose: float = 1.02

    def __post_init__(self):
        if not 0 < self.min_dose < self.nominal < self.max_dose:
            raise ValueError("need 0 < min_dose < nominal < max_dose")


class Kernel:
    def __init__(self, values, weight: float):
        values = np.asarray(values, dtype=np.complex128)
        if values.ndim != 2 or values.shape[0] != values.shape[1] or values.shape[0] % 2 == 0:
            raise KernelFormatError(f"kernel must be square with odd side, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise KernelFormatError("kernel values must be finite")
        if not (math.isfinite(weight) and weight >= 0):
            raise KernelFormatError(f"kernel weight must be finite and >= 0, got {weight}")
        self.values = values
        self.values.setflags(write=False)
        self.weight = float(weight)

    @property
    def side(self) -> int:
        return self.values.shape[0]


class KernelSet:
    """Ordered kernels sharing one side length. Treated as immutable."""

    def __init__(self, kernels: Sequence[Kernel]):
        kernels = tuple(kernels)
        if not kernels:
            raise KernelFormatError("a kernel set needs at least one kernel")
        if len({k.side for k in kernels}) != 1:
            raise KernelFormatError("all kernels must share the same side length")
        self.kernels = kernels
        self._imagers: dict[tuple[int, int], HopkinsImager] = {}

    def __len__(self):
        return len(self.kernels)

    def __getstate__(self):
        # spectra caches are large and cheap to rebuild; do not ship them to workers
        return {"kernels": self.kernels, "_imagers": {}}

    @property
    def side(self) -> int:
        return self.kernels[0].side

    @property
    def weights(self) -> np.ndarray:
        return np.array([k.weight for k in self.kernels])

    def imager(self, shape: tuple[int, int]) -> "HopkinsImager":
        key = tuple(shape)
        im = self._imagers.get(key)
        if im is None:
            im = self._imagers[key] = HopkinsImager(self, key)
        return im

    def to_bytes(self) -> bytes:
        parts = [MAGIC, struct.pack("<II", len(self.kernels), self.side)]
        for k in self.kernels:
            parts.append(struct.pack("<d", k.weight))
            pairs = np.empty(k.values.shape + (2,), dtype="<f8")
            pairs[..., 0] = k.values.real
            pairs[..., 1] = k.values.imag
            parts.append(pairs.tobytes())
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, raw: bytes, source: str = "<bytes>") -> "KernelSet":
        if len(raw) < 12 or raw[:4] != MAGIC:
            raise KernelFormatError(f"{source}: missing LKRN magic")
        n, side = struct.unpack_from("<II", raw, 4)
        if n < 1 or side < 1:
            raise KernelFormatError(f"{source}: invalid header N={n} side={side}")
        body = 8 + side * side * 16
        if len(raw) != 12 + n * body:
            got = (len(raw) - 12) / body
            raise KernelFormatError(f"{source}: header declares {n} kernels, file holds {got:g}")
        kernels = []
        pos = 12
        for _ in range(n):
            (w,) = struct.unpack_from("<d", raw, pos)
            pairs = np.frombuffer(raw, dtype="<f8", count=side * side * 2, offset=pos + 8)
            pairs = pairs.reshape(side, side, 2)
            kernels.append(Kernel(pairs[..., 0] + 1j * pairs[..., 1], w))
            pos += body
        return cls(kernels)

    def digest(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()


class HopkinsImager:
    """Precomputed kernel spectra for one image shape (zero-padded linear convolution)."""

    def __init__(self, kernels: KernelSet, shape: tuple[int, int]):
        h, w = shape
        side = kernels.side
        if side > h or side > w:
            raise DimensionError(f"kernel side {side} exceeds mask {h}x{w}")
        self.shape = (h, w)
        self.offset = side // 2
        self.padded = (sfft.next_fast_len(h + side - 1), sfft.next_fast_len(w + side - 1))
        self.weights = kernels.weights
        stack = np.stack([k.values for k in kernels.kernels])
        self._spec = sfft.fft2(stack, s=self.padded, axes=(-2, -1))
        self._spec_adj = sfft.fft2(np.conj(stack[:, ::-1, ::-1]), s=self.padded, axes=(-2, -1))

    def _crop(self, full: np.ndarray) -> np.ndarray:
        c = self.offset
        h, w = self.shape
        return full[..., c:c + h, c:c + w]

    def fields(self, mask: np.ndarray) -> np.ndarray:
        """Coherent fields ``mask (*) h_k`` stacked along axis 0."""
        m = sfft.fft2(np.asarray(mask, dtype=np.float64), s=self.padded)
        return self._crop(sfft.ifft2(m[None] * self._spec, axes=(-2, -1)))

    def intensity(self, fields: np.ndarray) -> np.ndarray:
        return np.einsum("k,kij->ij", self.weights, fields.real ** 2 + fields.imag ** 2)

    def aerial(self, mask: np.ndarray) -> np.ndarray:
        return self.intensity(self.fields(mask))

    def intensity_adjoint(self, grad_i: np.ndarray, fields: np.ndarray) -> np.ndarray:
        """Gradient w.r.t. the (real) mask given dLoss/dIntensity."""
        prod = grad_i[None] * fields
        freq = sfft.fft2(prod, s=self.padded, axes=(-2, -1)) * self._spec_adj
        corr = self._crop(sfft.ifft2(freq, axes=(-2, -1)))
        # conj(sum_y B(y) conj(h(y-x))) realised as correlation with the conjugate kernel
        return 2.0 * np.einsum("k,kij->ij", self.weights, corr.real)


def aerial_image(mask: np.ndarray, kernels: KernelSet) -> np.ndarray:
    mask = np.asarray(mask, dtype=np.float64)
    return np.maximum(kernels.imager(mask.shape).aerial(mask), 0.0)


def resist(intensity: np.ndarray, cfg: ResistConfig = ResistConfig()) -> np.ndarray:
    return expit(cfg.alpha * (np.asarray(intensity, dtype=np.float64) - cfg.i_th))


def print_image(mask: np.ndarray, kernels: KernelSet, cfg: ResistConfig = ResistConfig(),
                dose: float = 1.0) -> np.ndarray:
    """Binary printed image at the given dose (a multiplicative intensity factor)."""
    if not dose > 0:
        raise ValueError("dose must be > 0")
    return resist(dose * aerial_image(mask, kernels), cfg) > cfg.print_threshold


def print_corners(mask: np.ndarray, kernels: KernelSet, cfg: ResistConfig = ResistConfig(),
                  doses: DoseSpec = DoseSpec()) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(nominal, max-dose, min-dose) prints from a single aerial image."""
    i = aerial_image(mask, kernels)
    z = [resist(d * i, cfg) > cfg.print_threshold for d in (doses.nominal, doses.max_dose, doses.min_dose)]
    return z[0], z[1], z[2]


# --------------------------------------------------------------------------- kernel sets

def save_kernels(path: str | os.PathLike, kernels: KernelSet) -> None:
    with open(path, "wb") as fh:
        fh.write(kernels.to_bytes())


def load_kernels(path: str | os.PathLike) -> KernelSet:
    with open(path, "rb") as fh:
        return KernelSet.from_bytes(fh.read(), source=os.fspath(path))


def file_digest(path: str | os.PathLike) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _mode_orders(n: int) -> list[tuple[int, int]]:
    out = []
    total = 0
    while len(out) < n:
        for p in range(total, -1, -1):
            out.append((p, total - p))
        total += 1
    return out[:n]


def synthetic_kernels(n: int = 1, sigma_nm: float = 10.0, weights: Sequence[float] | None = None) -> KernelSet:
    """Real Hermite-Gaussian kernels, each with unit L2 norm.

    Kernel 0 is a plain Gaussian; later kernels are higher-order modes. The side
    is ``ceil(6 * sigma)`` bumped to the next odd integer. Default weights halve
    from one mode to the next.
    """
    if n < 1:
        raise ValueError("need at least one kernel")
    if not sigma_nm > 0:
        raise ValueError("sigma_nm must be > 0")
    if weights is None:
        weights = [0.5 ** k for k in range(n)]
    if len(weights) != n:
        raise ValueError(f"expected {n} weights, got {len(weights)}")
    side = math.ceil(6 * sigma_nm)
    side += 1 - side % 2
    r = np.arange(side) - side // 2
    u = r / sigma_nm
    g = np.exp(-0.5 * u ** 2)
    kernels = []
    for (p, q), w in zip(_mode_orders(n), weights):
        hx = np.polynomial.hermite_e.hermeval(u, [0] * p + [1]) * g
        hy = np.polynomial.hermite_e.hermeval(u, [0] * q + [1]) * g
        k = np.outer(hy, hx)
        k /= np.linalg.norm(k)
        kernels.append(Kernel(k, w))
    return KernelSet(kernels)


def identity_kernels() -> KernelSet:
    """1x1 unit kernel: intensity equals the squared mask, so binary masks print as themselves."""
    return KernelSet([Kernel(np.ones((1, 1)), 1.0)])


def clear_field_intensity(kernels: KernelSet) -> float:
    return float(sum(k.weight * abs(k.values.sum()) ** 2 for k in kernels.kernels))


def calibrate(kernels: KernelSet, target: float = 1.0) -> KernelSet:
    """Rescale weights so an all-open mask images to ``target`` intensity."""
    cf = clear_field_intensity(kernels)
    if cf <= 0:
        raise ValueError("kernel set has zero clear-field intensity")
    return KernelSet([Kernel(k.values, k.weight * target / cf) for k in kernels.kernels])


def default_kernels(sigma_nm: float = 10.0, n: int = 1) -> KernelSet:
    """Synthetic optics normalised to unit clear-field intensity."""
    return calibrate(synthetic_kernels(n, sigma_nm))
