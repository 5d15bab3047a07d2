"""Forward rendering of Gaussian sets and the analytic backward pass.

Rendering is additive: pixel (x, y) receives alpha_i * w_i * color_i from
every Gaussian i whose region ID matches the pixel's label (or whose ID is
the unguided sentinel 0), where w_i = exp(-0.5 * d^T Sigma^-1 d) at the
pixel center. Contributions beyond the configured Mahalanobis truncation
radius are exactly zero. There is no depth ordering or alpha compositing.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numba
import numpy as np

from . import _kernels
from .core import GaussianSet, GradientSet, LabelMap, TrainConfig, validate_set
from .errors import DimensionMismatch, NonPositiveCholDiagonal, RegionIdOutOfRange

DEFAULT_TILE_SIZE = 16
DEFAULT_TRUNCATION_SIGMA = 3.0


def resolve_threads(config: TrainConfig | None = None) -> int:
    """Worker count: config.threads, then CGS_THREADS, then all cores (0 = auto)."""
    want = config.threads if config is not None else 0
    if want <= 0:
        try:
            want = int(os.environ.get("CGS_THREADS", "0") or "0")
        except ValueError:
            want = 0
    limit = numba.config.NUMBA_NUM_THREADS
    if want <= 0:
        want = limit
    return max(1, min(want, limit))


def _apply_threads(config: TrainConfig | None) -> None:
    numba.set_num_threads(resolve_threads(config))


def _truncation_radius(config: TrainConfig | None) -> float:
    if config is None:
        return DEFAULT_TRUNCATION_SIGMA
    return config.truncation_radius_sigma


def conic_from_chol(chol: np.ndarray) -> np.ndarray:
    """Inverse-covariance entries (a, b, c) per Gaussian, derived from L.

    Uses the triangular structure directly (Sigma^-1 = L^-T L^-1); the
    covariance matrix itself is never formed or inverted.
    """
    l11 = chol[:, 0]
    l21 = chol[:, 1]
    l22 = chol[:, 2]
    inv11 = 1.0 / l11
    inv22 = 1.0 / l22
    t = -l21 * inv11 * inv22
    out = np.empty((chol.shape[0], 3))
    out[:, 0] = inv11 * inv11 + t * t
    out[:, 1] = t * inv22
    out[:, 2] = inv22 * inv22
    return out


def kernel_weight(mean, chol, point) -> float:
    """Unnormalized Gaussian weight exp(-0.5 * d^T Sigma^-1 d) at a point.

    d^T Sigma^-1 d is evaluated by forward substitution on L u = d, never
    by inverting Sigma. The result lies in (0, 1].
    """
    l11, l21, l22 = (float(v) for v in chol)
    if l11 <= 0.0 or l22 <= 0.0:
        raise NonPositiveCholDiagonal(f"l11={l11}, l22={l22}")
    dx = float(point[0]) - float(mean[0])
    dy = float(point[1]) - float(mean[1])
    u1 = dx / l11
    u2 = (dy - l21 * u1) / l22
    return math.exp(-0.5 * (u1 * u1 + u2 * u2))


@dataclass
class TileIndex:
    """Conservative per-tile binning of Gaussians by truncation-ellipse bbox.

    starts/items form a CSR layout over tiles_x * tiles_y tiles in row-major
    tile order; indices within a tile ascend. px0/px1/py0/py1 are the
    per-Gaussian pixel-space bounding boxes (inclusive; empty boxes have
    px0 > px1).
    """

    tile_size: int
    tiles_x: int
    tiles_y: int
    starts: np.ndarray
    items: np.ndarray
    px0: np.ndarray
    px1: np.ndarray
    py0: np.ndarray
    py1: np.ndarray

    def gaussians_in_tile(self, tx: int, ty: int) -> np.ndarray:
        t = ty * self.tiles_x + tx
        return self.items[self.starts[t]:self.starts[t + 1]]


def _pixel_bboxes(gs: GaussianSet, width: int, height: int, radius: float):
    """Inclusive pixel bounding boxes of each truncation ellipse.

    Half-extents are radius * sqrt(Sigma_xx) and radius * sqrt(Sigma_yy);
    a non-finite radius selects the whole image.
    """
    n = gs.n
    if not math.isfinite(radius):
        px0 = np.zeros(n, np.int64)
        py0 = np.zeros(n, np.int64)
        px1 = np.full(n, width - 1, np.int64)
        py1 = np.full(n, height - 1, np.int64)
        return px0, px1, py0, py1
    mx = gs.means[:, 0]
    my = gs.means[:, 1]
    ex = radius * gs.chol[:, 0]
    ey = radius * np.hypot(gs.chol[:, 1], gs.chol[:, 2])
    x0f = np.floor(mx - ex - 0.5)
    x1f = np.ceil(mx + ex - 0.5)
    y0f = np.floor(my - ey - 0.5)
    y1f = np.ceil(my + ey - 0.5)
    empty = (x1f < 0) | (x0f > width - 1) | (y1f < 0) | (y0f > height - 1)
    px0 = np.clip(x0f, 0, width - 1).astype(np.int64)
    px1 = np.clip(x1f, 0, width - 1).astype(np.int64)
    py0 = np.clip(y0f, 0, height - 1).astype(np.int64)
    py1 = np.clip(y1f, 0, height - 1).astype(np.int64)
    px0[empty] = 1
    px1[empty] = 0
    py0[empty] = 1
    py1[empty] = 0
    return px0, px1, py0, py1


def build_tile_index(gs: GaussianSet, width: int, height: int,
                     config: TrainConfig | None = None,
                     tile_size: int = DEFAULT_TILE_SIZE) -> TileIndex:
    radius = _truncation_radius(config)
    px0, px1, py0, py1 = _pixel_bboxes(gs, width, height, radius)
    tiles_x = (width + tile_size - 1) // tile_size
    tiles_y = (height + tile_size - 1) // tile_size
    starts, items = _kernels.bin_tiles(
        px0 // tile_size, px1 // tile_size,
        py0 // tile_size, py1 // tile_size,
        tiles_x, tiles_y,
    )
    return TileIndex(tile_size, tiles_x, tiles_y, starts, items, px0, px1, py0, py1)


def _check_mode(gs: GaussianSet, lm: LabelMap | None, width: int, height: int):
    """Shared pre-checks; returns the label array fed to the kernels."""
    validate_set(gs, lm)
    if lm is None:
        if gs.n and np.any(gs.region_ids != 0):
            raise RegionIdOutOfRange(
                "set carries guided region IDs but no label map was given"
            )
        return np.zeros((height, width), np.int32)
    if lm.height != height or lm.width != width:
        raise DimensionMismatch(
            f"label map is {lm.width}x{lm.height}, render target is {width}x{height}"
        )
    return lm.labels


def render(gs: GaussianSet, lm: LabelMap | None, width: int, height: int,
           config: TrainConfig | None = None) -> np.ndarray:
    """Rasterize a Gaussian set to an (H, W, 3) float64 image."""
    labels = _check_mode(gs, lm, width, height)
    out = np.zeros((height, width, 3))
    if gs.n == 0:
        return out
    radius = _truncation_radius(config)
    index = build_tile_index(gs, width, height, config)
    _apply_threads(config)
    _kernels.forward_tiled(
        index.starts, index.items, index.tile_size,
        index.tiles_x, index.tiles_y, height, width,
        gs.means, conic_from_chol(gs.chol), gs.opacities, gs.colors,
        gs.region_ids, labels, radius * radius, out,
    )
    return out


def render_naive(gs: GaussianSet, lm: LabelMap | None,
                 width: int, height: int) -> np.ndarray:
    """Reference renderer: plain pixel-by-Gaussian double loop.

    No tiling and no truncation; the correctness oracle for render().
    """
    labels = _check_mode(gs, lm, width, height)
    out = np.zeros((height, width, 3))
    if gs.n == 0:
        return out
    _kernels.forward_naive(
        height, width, gs.means, conic_from_chol(gs.chol),
        gs.opacities, gs.colors, gs.region_ids, labels, out,
    )
    return out


def _region_boxes(lm: LabelMap | None, width: int, height: int) -> np.ndarray:
    """Per-region-ID pixel bounding boxes [x0, x1, y0, y1]; row 0 = full image.

    Cached on the label map: labels are immutable after construction.
    """
    full = np.array([[0, width - 1, 0, height - 1]], np.int64)
    if lm is None:
        return full
    cached = getattr(lm, "_region_boxes_cache", None)
    if cached is not None:
        return cached
    boxes = np.empty((lm.region_count + 1, 4), np.int64)
    boxes[0] = full[0]
    for r in range(1, lm.region_count + 1):
        hit = lm.labels == r
        rows = np.flatnonzero(hit.any(axis=1))
        cols = np.flatnonzero(hit.any(axis=0))
        boxes[r] = (cols[0], cols[-1], rows[0], rows[-1])
    lm._region_boxes_cache = boxes
    return boxes


def backward(gs: GaussianSet, lm: LabelMap | None, width: int, height: int,
             dl_dpixels: np.ndarray, clamp_active: bool, rendered: np.ndarray,
             config: TrainConfig | None = None) -> GradientSet:
    """Analytic gradients of the loss w.r.t. every learnable Gaussian field.

    dl_dpixels holds the loss gradient at each (clamped, when clamp_active)
    output channel; where clamp_active and the rendered value lies outside
    [0, 1] the incoming gradient is zeroed, which is the true derivative of
    the clamp. Truncation and region masking mirror the forward pass, and
    each Gaussian is reduced over its footprint in row-major order, so
    repeated calls are bit-identical.
    """
    labels = _check_mode(gs, lm, width, height)
    for name, arr in (("dl_dpixels", dl_dpixels), ("rendered", rendered)):
        if arr.shape != (height, width, 3):
            raise DimensionMismatch(
                f"{name} has shape {arr.shape}, expected {(height, width, 3)}"
            )
    grads = GradientSet.zeros(gs.n)
    if gs.n == 0:
        return grads
    radius = _truncation_radius(config)
    px0, px1, py0, py1 = _pixel_bboxes(gs, width, height, radius)
    # Clip each footprint to its region's bounding box: pixels outside it
    # cannot carry the Gaussian's label, so the sums are unchanged.
    boxes = _region_boxes(lm, width, height)[gs.region_ids]
    bx0 = np.maximum(px0, boxes[:, 0])
    bx1 = np.minimum(px1, boxes[:, 1])
    by0 = np.maximum(py0, boxes[:, 2])
    by1 = np.minimum(py1, boxes[:, 3])
    _apply_threads(config)
    _kernels.backward_per_gaussian(
        bx0, bx1, by0, by1, gs.means, gs.chol, conic_from_chol(gs.chol),
        gs.opacities, gs.colors, gs.region_ids, labels,
        np.ascontiguousarray(dl_dpixels), np.ascontiguousarray(rendered),
        clamp_active, radius * radius,
        grads.means, grads.chol, grads.colors, grads.opacities,
    )
    return grads
