"""Quality metrics: PSNR, SSIM, MS-SSIM, and edge-band variants.

Both inputs are always clamped to [0, 1] before comparison, so metrics are
well defined for renders produced by clamping-free training. Masked
variants average exactly the same per-pixel quantities over the mask, so a
mask selecting every pixel reproduces the unmasked value bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d, distance_transform_edt

from .core import LabelMap
from .errors import DimensionMismatch, EmptyMask, ImageTooSmall, SingleRegion

PSNR_CAP_DB = 99.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
# 5 dyadic scales of an 11-tap window need at least 11 * 2^4 pixels per side.
MS_SSIM_MIN_SIDE = SSIM_WINDOW * 2 ** (len(MS_SSIM_WEIGHTS) - 1)

DEFAULT_BAND_RADIUS = 5


@dataclass
class EdgeBandMask:
    """Boolean pixel mask within band_radius of a segmentation boundary."""

    mask: np.ndarray
    band_radius: float

    @property
    def pixel_count(self) -> int:
        return int(np.count_nonzero(self.mask))


def _as_mask(mask, shape) -> np.ndarray | None:
    if mask is None:
        return None
    arr = mask.mask if isinstance(mask, EdgeBandMask) else np.asarray(mask, bool)
    if arr.shape != shape:
        raise DimensionMismatch(f"mask shape {arr.shape} vs image {shape}")
    if not arr.any():
        raise EmptyMask("mask selects no pixels")
    return arr


def _pair(a, b):
    a = np.asarray(a, np.float64)
    b = np.asarray(b, np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim != 3 or a.shape[2] != 3:
        raise DimensionMismatch(f"expected (H, W, 3) images, got {a.shape}")
    return np.clip(a, 0.0, 1.0), np.clip(b, 0.0, 1.0)


def psnr(a, b, mask=None) -> float:
    """10*log10(1/MSE) over all channels, capped at 99.0 dB."""
    a, b = _pair(a, b)
    m = _as_mask(mask, a.shape[:2])
    se = (a - b) ** 2
    mse = float(np.mean(se if m is None else se[m]))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * math.log10(1.0 / mse), PSNR_CAP_DB)


def _gaussian_taps(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    return g / g.sum()

_SSIM_TAPS = _gaussian_taps(SSIM_WINDOW, SSIM_SIGMA)


def _filt(x: np.ndarray) -> np.ndarray:
    y = correlate1d(x, _SSIM_TAPS, axis=0, mode="reflect")
    return correlate1d(y, _SSIM_TAPS, axis=1, mode="reflect")


def _ssim_cs_maps(a, b):
    """Channel-averaged SSIM and contrast-structure maps, full image size."""
    c1 = SSIM_K1 * SSIM_K1
    c2 = SSIM_K2 * SSIM_K2
    ssim_map = np.zeros(a.shape[:2])
    cs_map = np.zeros(a.shape[:2])
    for ch in range(3):
        x = a[:, :, ch]
        y = b[:, :, ch]
        mu_x = _filt(x)
        mu_y = _filt(y)
        var_x = _filt(x * x) - mu_x * mu_x
        var_y = _filt(y * y) - mu_y * mu_y
        cov = _filt(x * y) - mu_x * mu_y
        lum = (2.0 * mu_x * mu_y + c1) / (mu_x * mu_x + mu_y * mu_y + c1)
        cs = (2.0 * cov + c2) / (var_x + var_y + c2)
        ssim_map += lum * cs
        cs_map += cs
    return ssim_map / 3.0, cs_map / 3.0


def ssim(a, b, mask=None) -> float:
    """Mean SSIM with an 11x11 Gaussian window (sigma 1.5) at dynamic range 1.

    With a mask, the per-pixel SSIM map is averaged over masked pixels only.
    """
    a, b = _pair(a, b)
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise ImageTooSmall(f"SSIM needs >= {SSIM_WINDOW} px per side, got {a.shape[:2]}")
    m = _as_mask(mask, a.shape[:2])
    ssim_map, _ = _ssim_cs_maps(a, b)
    return float(np.mean(ssim_map if m is None else ssim_map[m]))


def _downsample2(img: np.ndarray) -> np.ndarray:
    h, w = img.shape[:2]
    img = img[: h - (h % 2), : w - (w % 2)]
    return 0.25 * (img[0::2, 0::2] + img[0::2, 1::2] + img[1::2, 0::2] + img[1::2, 1::2])


def ms_ssim(a, b) -> float:
    """5-scale MS-SSIM with the standard weights and 2x average pooling."""
    a, b = _pair(a, b)
    if min(a.shape[:2]) < MS_SSIM_MIN_SIDE:
        raise ImageTooSmall(
            f"MS-SSIM needs >= {MS_SSIM_MIN_SIDE} px per side, got {a.shape[:2]}"
        )
    value = 1.0
    for scale, weight in enumerate(MS_SSIM_WEIGHTS):
        ssim_map, cs_map = _ssim_cs_maps(a, b)
        if scale == len(MS_SSIM_WEIGHTS) - 1:
            value *= max(float(np.mean(ssim_map)), 0.0) ** weight
        else:
            value *= max(float(np.mean(cs_map)), 0.0) ** weight
            a = _downsample2(a)
            b = _downsample2(b)
    return value


def boundary_pixels(lm: LabelMap) -> np.ndarray:
    """Pixels with at least one 4-neighbor carrying a different label."""
    lab = lm.labels
    edge = np.zeros(lab.shape, bool)
    edge[:-1, :] |= lab[:-1, :] != lab[1:, :]
    edge[1:, :] |= lab[1:, :] != lab[:-1, :]
    edge[:, :-1] |= lab[:, :-1] != lab[:, 1:]
    edge[:, 1:] |= lab[:, 1:] != lab[:, :-1]
    return edge


def edge_band(lm: LabelMap, radius: float = DEFAULT_BAND_RADIUS) -> EdgeBandMask:
    """Pixels within Euclidean distance <= radius of any boundary pixel.

    Computed with an exact Euclidean distance transform; raises
    SingleRegion when the map has no label changes.
    """
    edge = boundary_pixels(lm)
    if not edge.any():
        raise SingleRegion("label map has a single region; no boundary exists")
    dist = distance_transform_edt(~edge)
    return EdgeBandMask(dist <= radius, float(radius))


def evaluate_pair(ref, test, lm: LabelMap | None = None,
                  band_radius: float = DEFAULT_BAND_RADIUS) -> dict:
    """Full metric bundle: psnr, ms_ssim, ef_psnr, ef_ssim, band_pixels.

    Entries that cannot be computed (image too small for MS-SSIM, no label
    map, or a single-region map) are None.
    """
    out = {
        "psnr": psnr(ref, test),
        "ms_ssim": None,
        "ef_psnr": None,
        "ef_ssim": None,
        "band_pixels": None,
    }
    try:
        out["ms_ssim"] = ms_ssim(ref, test)
    except ImageTooSmall:
        pass
    if lm is not None:
        try:
            band = edge_band(lm, band_radius)
        except SingleRegion:
            return out
        out["band_pixels"] = band.pixel_count
        out["ef_psnr"] = psnr(ref, test, band)
        try:
            out["ef_ssim"] = ssim(ref, test, band)
        except ImageTooSmall:
            pass
    return out
