"""Synthetic chart targets with exact ground-truth label maps."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .core import LabelMap
from .errors import BadSpec, RegionIdOutOfRange

# Fixed 8-bit palette, mostly intermediate colors (channels away from 0/255):
# dark green, orange, purple, dark cyan, slate blue, chocolate.
DEFAULT_PALETTE = (
    (0, 100, 0),
    (255, 165, 0),
    (128, 0, 128),
    (0, 139, 139),
    (106, 90, 205),
    (210, 105, 30),
)
ORANGE_INDEX = 1  # palette position of the orange block (0-based)

PIE_BACKGROUND = (240, 240, 240)
PIE_BLUR_SIGMA = 1.0  # 1-pixel anti-alias blur on the image, never the labels


def _to_unit(rgb8) -> np.ndarray:
    return np.asarray(rgb8, np.float64) / 255.0


@dataclass
class ChartSpec:
    """Geometry and palette of a synthetic chart.

    kind is "grid" (rows x cols solid blocks) or "pie" (angular sectors on
    a background). Pie sector fractions must sum to 1.
    """

    kind: str = "grid"
    width: int = 300
    height: int = 200
    colors: tuple = DEFAULT_PALETTE
    rows: int = 2
    cols: int = 3
    center: tuple = (150.0, 150.0)
    radius: float = 120.0
    fractions: tuple = (1 / 6,) * 6
    background: tuple = PIE_BACKGROUND
    blur_sigma: float = PIE_BLUR_SIGMA

    @classmethod
    def default_grid(cls) -> "ChartSpec":
        return cls(kind="grid")

    @classmethod
    def default_pie(cls) -> "ChartSpec":
        return cls(kind="pie", width=300, height=300)

    @classmethod
    def from_dict(cls, data: dict) -> "ChartSpec":
        base = cls.default_pie() if data.get("kind") == "pie" else cls.default_grid()
        known = set(base.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise BadSpec(f"unknown chart spec keys: {sorted(unknown)}")
        for key, value in data.items():
            setattr(base, key, tuple(value) if isinstance(value, list) else value)
        return base


def gen_grid_chart(spec: ChartSpec):
    """Solid color blocks on a rows x cols grid; labels 1..rows*cols block-wise."""
    if spec.kind != "grid":
        raise BadSpec(f"expected kind 'grid', got {spec.kind!r}")
    if spec.rows < 1 or spec.cols < 1:
        raise BadSpec("grid needs at least one row and column")
    if spec.height % spec.rows or spec.width % spec.cols:
        raise BadSpec(
            f"grid {spec.rows}x{spec.cols} does not divide image "
            f"{spec.height}x{spec.width}"
        )
    ncells = spec.rows * spec.cols
    if len(spec.colors) != ncells:
        raise BadSpec(f"need {ncells} colors, got {len(spec.colors)}")
    bh = spec.height // spec.rows
    bw = spec.width // spec.cols
    ys = np.arange(spec.height) // bh
    xs = np.arange(spec.width) // bw
    labels = (ys[:, None] * spec.cols + xs[None, :] + 1).astype(np.int32)
    palette = _to_unit(spec.colors)
    image = palette[labels - 1]
    return image, LabelMap(labels, ncells)


def gen_pie_chart(spec: ChartSpec):
    """Angular sectors on a disc plus a background region.

    Sector s covers angles [cum_{s-1}, cum_s) * 2*pi measured from the +x
    axis with y pointing down; the degenerate center pixel falls in the
    first sector. Labels are 1..S for sectors and S+1 for the background.
    """
    if spec.kind != "pie":
        raise BadSpec(f"expected kind 'pie', got {spec.kind!r}")
    nsect = len(spec.fractions)
    if nsect < 1 or len(spec.colors) != nsect:
        raise BadSpec(f"need one color per sector: {len(spec.colors)} vs {nsect}")
    fr = np.asarray(spec.fractions, np.float64)
    if np.any(fr <= 0) or abs(fr.sum() - 1.0) > 1e-9:
        raise BadSpec("sector fractions must be positive and sum to 1")
    cx, cy = (float(v) for v in spec.center)
    r = float(spec.radius)
    if r <= 0 or cx - r < 0 or cx + r > spec.width or cy - r < 0 or cy + r > spec.height:
        raise BadSpec("disc must fit inside the image")
    xs = np.arange(spec.width) + 0.5 - cx
    ys = np.arange(spec.height) + 0.5 - cy
    dx = np.broadcast_to(xs[None, :], (spec.height, spec.width))
    dy = np.broadcast_to(ys[:, None], (spec.height, spec.width))
    inside = dx * dx + dy * dy <= r * r
    theta = np.mod(np.arctan2(dy, dx), 2.0 * np.pi)
    bounds = np.cumsum(fr) * 2.0 * np.pi
    sector = np.searchsorted(bounds, theta, side="right")
    sector = np.minimum(sector, nsect - 1)  # guard rounding at exactly 2*pi
    labels = np.where(inside, sector + 1, nsect + 1).astype(np.int32)
    palette = _to_unit(tuple(spec.colors) + (tuple(spec.background),))
    image = palette[labels - 1]
    image = gaussian_filter(image, sigma=(spec.blur_sigma, spec.blur_sigma, 0.0),
                            mode="nearest")
    try:
        lm = LabelMap(labels, nsect + 1)
    except RegionIdOutOfRange as exc:
        raise BadSpec(f"a sector is too small to cover any pixel: {exc}") from exc
    return image, lm
