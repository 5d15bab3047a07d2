"""Fitting loop: initialization, Adam updates, region warm-up, L1 objective."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, metrics
from .core import (
    CHOL_DIAG_FLOOR,
    GaussianSet,
    GradientSet,
    LabelMap,
    TrainConfig,
)
from .errors import DimensionMismatch
from .io import model_bytes
from .rasterizer import backward, render

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

LOG_EVERY = 100


@dataclass
class AdamState:
    """First/second moment accumulators per learnable field, plus step count."""

    m_means: np.ndarray
    v_means: np.ndarray
    m_chol: np.ndarray
    v_chol: np.ndarray
    m_colors: np.ndarray
    v_colors: np.ndarray
    m_opacities: np.ndarray
    v_opacities: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(
            np.zeros((n, 2)), np.zeros((n, 2)),
            np.zeros((n, 3)), np.zeros((n, 3)),
            np.zeros((n, 3)), np.zeros((n, 3)),
            np.zeros(n), np.zeros(n),
        )


@dataclass
class TrainReport:
    """Loss/PSNR trace, final metrics, refresh log, and the config echo."""

    rows: list = field(default_factory=list)  # (iteration, loss, psnr)
    final_metrics: dict = field(default_factory=dict)
    wall_clock_sec: float = 0.0
    config: dict = field(default_factory=dict)
    refresh_iterations: list = field(default_factory=list)
    model_bytes: int = 0

    def to_dict(self) -> dict:
        return {
            "final_metrics": self.final_metrics,
            "wall_clock_sec": self.wall_clock_sec,
            "config": self.config,
            "refresh_iterations": list(self.refresh_iterations),
            "model_bytes": self.model_bytes,
            "logged_iterations": len(self.rows),
            "final_loss": self.rows[-1][1] if self.rows else None,
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    def write_loss_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("iteration,loss,psnr\n")
            for it, loss, p in self.rows:
                fh.write(f"{it},{loss!r},{p!r}\n")


def initialize(target: np.ndarray, lm: LabelMap | None,
               config: TrainConfig) -> GaussianSet:
    """Seeded uniform means, isotropic coverage-sized factors, sampled colors.

    The isotropic scale is sqrt(W*H/N)/2 so the truncation footprints of N
    Gaussians jointly cover the image a few times over at startup.
    """
    config.validate()
    height, width = target.shape[:2]
    n = config.num_gaussians
    rng = np.random.default_rng(config.rng_seed)
    means = rng.random((n, 2)) * np.array([float(width), float(height)])
    s = np.sqrt(width * height / n) / 2.0
    chol = np.tile(np.array([s, 0.0, s]), (n, 1))
    ix = np.clip(np.floor(means[:, 0]), 0, width - 1).astype(np.int64)
    iy = np.clip(np.floor(means[:, 1]), 0, height - 1).astype(np.int64)
    colors = np.array(target, dtype=np.float64)[iy, ix].copy()
    gs = GaussianSet(means, chol, colors, np.ones(n), np.zeros(n, np.int32))
    if config.contour_guidance:
        if lm is None:
            raise DimensionMismatch("contour guidance requires a label map")
        gs = assign_regions(gs, lm)
    return gs


def assign_regions(gs: GaussianSet, lm: LabelMap) -> GaussianSet:
    """Region ID of each Gaussian = label at its floored mean coordinate.

    The lookup coordinate is clamped into the map; the means themselves are
    never moved.
    """
    ix = np.clip(np.floor(gs.means[:, 0]), 0, lm.width - 1).astype(np.int64)
    iy = np.clip(np.floor(gs.means[:, 1]), 0, lm.height - 1).astype(np.int64)
    return gs.with_region_ids(lm.labels[iy, ix])


def warmup_due(iteration: int, config: TrainConfig) -> bool:
    """True when a region refresh fires: every refresh interval through T/2.

    The boundary is inclusive (a refresh fires at exactly half the total
    iterations); refreshes require both the warm-up and guidance toggles.
    """
    return (
        config.warm_up
        and config.contour_guidance
        and iteration % config.warmup_refresh_interval == 0
        and 2 * iteration <= config.total_iterations
    )


def _render_for_loss(gs: GaussianSet, target: np.ndarray,
                     lm: LabelMap | None, config: TrainConfig):
    height, width = target.shape[:2]
    lm_used = lm if config.contour_guidance else None
    if lm_used is not None and (lm_used.height != height or lm_used.width != width):
        raise DimensionMismatch(
            f"label map {lm_used.width}x{lm_used.height} vs target {width}x{height}"
        )
    raw = render(gs, lm_used, width, height, config)
    return raw, lm_used


def loss_and_grad(gs: GaussianSet, target: np.ndarray, lm: LabelMap | None,
                  config: TrainConfig):
    """Mean absolute error against the target and its analytic gradients.

    The render is clamped to [0, 1] before the loss unless remove_clamp is
    set; the returned gradients account for the clamp's true derivative.
    """
    target = np.ascontiguousarray(target, dtype=np.float64)
    raw, lm_used = _render_for_loss(gs, target, lm, config)
    clamp_active = not config.remove_clamp
    partials, grad_pix = _kernels.l1_loss_grad(raw, target, clamp_active)
    loss = float(np.sum(partials)) / target.size
    height, width = target.shape[:2]
    grads = backward(gs, lm_used, width, height, grad_pix, clamp_active, raw, config)
    return loss, grads


def step(gs: GaussianSet, state: AdamState, grads: GradientSet,
         config: TrainConfig) -> GaussianSet:
    """One Adam update with per-group learning rates; refloors l11/l22."""
    state.t += 1
    bc1 = 1.0 - ADAM_BETA1 ** state.t
    bc2 = 1.0 - ADAM_BETA2 ** state.t
    groups = (
        (gs.means, state.m_means, state.v_means, grads.means, config.lr_mean),
        (gs.chol, state.m_chol, state.v_chol, grads.chol, config.lr_chol),
        (gs.colors, state.m_colors, state.v_colors, grads.colors, config.lr_color),
        (gs.opacities, state.m_opacities, state.v_opacities, grads.opacities,
         config.lr_opacity),
    )
    for param, m, v, g, lr in groups:
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * (g * g)
        param -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
    np.maximum(gs.chol[:, 0], CHOL_DIAG_FLOOR, out=gs.chol[:, 0])
    np.maximum(gs.chol[:, 2], CHOL_DIAG_FLOOR, out=gs.chol[:, 2])
    return gs


def fit(target: np.ndarray, lm: LabelMap | None, config: TrainConfig,
        on_refresh=None):
    """Run the full training loop; returns (GaussianSet, TrainReport).

    Region IDs are assigned at initialization, refreshed whenever
    warmup_due fires, and frozen for the second half of training. The run
    is deterministic given the config (seed included) and independent of
    the worker thread count.
    """
    config.validate()
    target = np.ascontiguousarray(target, dtype=np.float64)
    if target.ndim != 3 or target.shape[2] != 3:
        raise DimensionMismatch(f"target must be (H, W, 3), got {target.shape}")
    height, width = target.shape[:2]
    if config.contour_guidance and lm is None:
        raise DimensionMismatch("contour guidance requires a label map")
    if lm is not None and (lm.height != height or lm.width != width):
        raise DimensionMismatch(
            f"label map {lm.width}x{lm.height} vs target {width}x{height}"
        )
    t_start = time.perf_counter()
    gs = initialize(target, lm, config)
    state = AdamState.zeros(gs.n)
    report = TrainReport(config=config.to_dict(), model_bytes=model_bytes(gs.n))
    clamp_active = not config.remove_clamp
    lm_used = lm if config.contour_guidance else None
    for it in range(1, config.total_iterations + 1):
        raw = render(gs, lm_used, width, height, config)
        partials, grad_pix = _kernels.l1_loss_grad(raw, target, clamp_active)
        loss = float(np.sum(partials)) / target.size
        grads = backward(gs, lm_used, width, height, grad_pix, clamp_active,
                         raw, config)
        step(gs, state, grads, config)
        if warmup_due(it, config):
            gs = assign_regions(gs, lm)
            report.refresh_iterations.append(it)
            if on_refresh is not None:
                on_refresh(it, gs)
        if it % LOG_EVERY == 0:
            report.rows.append((it, loss, metrics.psnr(raw, target)))
    final = render(gs, lm_used, width, height, config)
    report.final_metrics = metrics.evaluate_pair(target, final, lm)
    report.wall_clock_sec = time.perf_counter() - t_start
    return gs, report
