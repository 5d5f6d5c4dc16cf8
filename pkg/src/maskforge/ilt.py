"""Pixel-based inverse lithography.

The mask is relaxed as ``sigmoid(beta * latent)`` and optimized by gradient
descent on ``w_l2 * ||Z_nom - Z_t||^2 + w_pvb * ||Z_max - Z_min||^2`` where
``Z_d`` is the (smooth) resist response at dose ``d``. Gradients are exact
adjoints through both sigmoids and the sum-of-coherent-systems imager.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit, logit

from .errors import DimensionError, DivergenceError
from .geometry import Polygon, Rect
from .litho import DoseSpec, KernelSet, ResistConfig
from .raster import rasterize


@dataclass(frozen=True)
class IltConfig:
    max_iters: int = 200
    step_size: float = 1.0
    weight_l2: float = 1.0
    weight_pvb: float = 0.025
    beta: float = 4.0
    dose: DoseSpec = field(default_factory=DoseSpec)
    resist: ResistConfig = field(default_factory=ResistConfig)
    stop_tol: float = 0.0
    init: str = "target"   # or "random"
    max_halvings: int = 20

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.step_size > 0:
            raise ValueError("step_size must be > 0")
        if self.weight_l2 < 0 or self.weight_pvb < 0:
            raise ValueError("loss weights must be >= 0")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")
        if self.stop_tol < 0:
            raise ValueError("stop_tol must be >= 0")
        if self.init not in ("target", "random"):
            raise ValueError("init must be 'target' or 'random'")


@dataclass
class LatentMask:
    values: np.ndarray
    beta: float = 4.0

    def relaxed(self) -> np.ndarray:
        return expit(self.beta * self.values)


@dataclass
class IltResult:
    mask: np.ndarray
    relaxed_mask: np.ndarray
    loss_history: list[tuple[int, float, float]]
    losses: list[float]
    initial: tuple[float, float] = (0.0, 0.0)   # (l2, pvb) before the first step


@dataclass
class LossTerms:
    loss: float
    l2: float
    pvb: float
    gradient: np.ndarray


def _evaluate(values: np.ndarray, target: np.ndarray, kernels: KernelSet, cfg: IltConfig,
              need_grad: bool = True) -> LossTerms:
    beta, rc, dose = cfg.beta, cfg.resist, cfg.dose
    m = expit(beta * values)
    imager = kernels.imager(values.shape)
    fields = imager.fields(m)
    inten = imager.intensity(fields)
    zt = target.astype(np.float64)

    def z_at(d):
        return expit(rc.alpha * (d * inten - rc.i_th))

    z_nom = z_at(dose.nominal)
    diff = z_nom - zt
    l2 = float(np.sum(diff * diff))
    pvb = 0.0
    grad_i = np.zeros_like(inten)
    if cfg.weight_l2:
        grad_i += 2 * cfg.weight_l2 * diff * rc.alpha * dose.nominal * z_nom * (1 - z_nom)
    if cfg.weight_pvb:
        z_max, z_min = z_at(dose.max_dose), z_at(dose.min_dose)
        band = z_max - z_min
        pvb = float(np.sum(band * band))
        g = 2 * cfg.weight_pvb * band
        grad_i += g * rc.alpha * dose.max_dose * z_max * (1 - z_max)
        grad_i -= g * rc.alpha * dose.min_dose * z_min * (1 - z_min)
    loss = cfg.weight_l2 * l2 + cfg.weight_pvb * pvb
    if not need_grad:
        return LossTerms(loss, l2, pvb, None)
    if not (cfg.weight_l2 or cfg.weight_pvb):
        return LossTerms(loss, l2, pvb, np.zeros_like(values))
    grad_m = imager.intensity_adjoint(grad_i, fields)
    return LossTerms(loss, l2, pvb, grad_m * beta * m * (1 - m))


def ilt_loss(latent: LatentMask, target: np.ndarray, kernels: KernelSet,
             cfg: IltConfig = IltConfig()) -> tuple[float, np.ndarray]:
    values = np.asarray(latent.values, dtype=np.float64)
    target = np.asarray(target)
    if values.shape != target.shape:
        raise DimensionError(f"latent {values.shape} and target {target.shape} differ")
    if latent.beta != cfg.beta:
        cfg = replace(cfg, beta=latent.beta)
    t = _evaluate(values, target, kernels, cfg)
    return t.loss, t.gradient


def initial_latent(target: np.ndarray, cfg: IltConfig, seed: int = 0) -> np.ndarray:
    if cfg.init == "random":
        rng = np.random.default_rng(seed)
        return rng.normal(0.0, 1.0, size=target.shape)
    m = 0.99 * target.astype(np.float64) + 0.005
    return logit(m) / cfg.beta


def optimize(target: np.ndarray, kernels: KernelSet, cfg: IltConfig = IltConfig(),
             seed: int = 0) -> IltResult:
    """Gradient descent with step halving whenever a trial step raises the loss.

    Every recorded iteration is an accepted step, so the weighted loss in
    ``losses`` never increases. Stops after ``max_iters`` steps, when no
    halved step decreases the loss, or when the loss improved by less than
    ``stop_tol`` over the last 10 iterations.
    """
    target = np.asarray(target) > 0.5
    if target.ndim != 2:
        raise DimensionError("target must be a 2-D image")
    values = initial_latent(target, cfg, seed)
    cur = _evaluate(values, target, kernels, cfg)
    if not np.isfinite(cur.loss):
        raise DivergenceError("non-finite ILT loss", 0)
    initial = (cur.l2, cur.pvb)
    history: list[tuple[int, float, float]] = []
    losses: list[float] = []
    for it in range(1, cfg.max_iters + 1):
        step = cfg.step_size
        accepted = None
        for _ in range(cfg.max_halvings + 1):
            trial = values - step * cur.gradient
            nxt = _evaluate(trial, target, kernels, cfg)
            if not (np.isfinite(nxt.loss) and np.all(np.isfinite(nxt.gradient))):
                raise DivergenceError("non-finite ILT loss", it)
            if nxt.loss <= cur.loss:
                accepted = (trial, nxt)
                break
            step *= 0.5
        if accepted is None:
            history.append((it, cur.l2, cur.pvb))
            losses.append(cur.loss)
            break
        values, cur = accepted
        history.append((it, cur.l2, cur.pvb))
        losses.append(cur.loss)
        if len(losses) > 10 and losses[-11] - losses[-1] < cfg.stop_tol:
            break
    relaxed = expit(cfg.beta * values)
    return IltResult(relaxed > 0.5, relaxed, history, losses, initial)


def ilt_ground_truth(shapes: list[Polygon], core: Rect, kernels: KernelSet, cfg: IltConfig = IltConfig(),
                     canvas: Rect = Rect(0, 0, 2048, 2048), seed: int = 0) -> np.ndarray:
    """ILT mask on the simulation canvas, cropped to ``core``.

    ``shapes`` and ``core`` are in canvas-local coordinates.
    """
    if not canvas.contains(core):
        raise DimensionError("core must lie inside the simulation canvas")
    target = rasterize(shapes, canvas)
    if not target.any():
        return np.zeros((core.height, core.width), dtype=bool)
    res = optimize(target, kernels, cfg, seed)
    return res.mask[core.y0 - canvas.y0:core.y1 - canvas.y0, core.x0 - canvas.x0:core.x1 - canvas.x0].copy()
