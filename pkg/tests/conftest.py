"""Shared generators for random scenes and label maps."""

import numpy as np
import pytest

from cgs.core import GaussianSet, LabelMap, TrainConfig


def make_label_map(rng, width, height, regions):
    """Voronoi partition from random sites; every region occupied."""
    while True:
        sites = rng.uniform(0, [width, height], size=(regions, 2))
        xs = np.arange(width) + 0.5
        ys = np.arange(height) + 0.5
        d2 = (
            (xs[None, :, None] - sites[:, 0]) ** 2
            + (ys[:, None, None] - sites[:, 1]) ** 2
        )
        labels = np.argmin(d2, axis=2).astype(np.int32) + 1
        if np.unique(labels).size == regions:
            return LabelMap(labels, regions)


def make_scene(rng, width, height, n, lm=None, alpha_scale=1.0, color_scale=1.0):
    """Random Gaussian set roughly covering the image; guided iff lm given."""
    means = rng.uniform([-2.0, -2.0], [width + 2.0, height + 2.0], size=(n, 2))
    chol = np.column_stack(
        [
            rng.uniform(0.6, width / 4.0, n),
            rng.uniform(-width / 8.0, width / 8.0, n),
            rng.uniform(0.6, height / 4.0, n),
        ]
    )
    colors = rng.random((n, 3)) * color_scale
    alphas = rng.uniform(0.1, 1.2, n) * alpha_scale
    if lm is None:
        region_ids = np.zeros(n, np.int32)
    else:
        ix = np.clip(np.floor(means[:, 0]), 0, lm.width - 1).astype(np.int64)
        iy = np.clip(np.floor(means[:, 1]), 0, lm.height - 1).astype(np.int64)
        region_ids = lm.labels[iy, ix]
    return GaussianSet(means, chol, colors, alphas, region_ids)


def brute_force_band(lm, radius):
    """Direct within-radius scan over all (pixel, boundary-pixel) pairs.

    Chunked over boundary pixels to bound memory; still the plain
    nearest-boundary distance scan.
    """
    from cgs.metrics import boundary_pixels

    edge = boundary_pixels(lm)
    ey, ex = np.nonzero(edge)
    h, w = lm.labels.shape
    ys, xs = np.mgrid[0:h, 0:w]
    best = np.full((h, w), np.inf)
    for lo in range(0, ey.size, 256):
        cy = ey[lo:lo + 256]
        cx = ex[lo:lo + 256]
        d2 = (ys[:, :, None] - cy) ** 2 + (xs[:, :, None] - cx) ** 2
        np.minimum(best, d2.min(axis=2), out=best)
    return best <= radius * radius


def untruncated_config(**kwargs) -> TrainConfig:
    cfg = TrainConfig(**kwargs)
    cfg.truncation_radius_sigma = float("inf")
    return cfg


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
