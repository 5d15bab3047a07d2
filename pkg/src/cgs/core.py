"""Core domain types: Gaussian sets, label maps, gradients, training config.

Images are plain numpy arrays of shape (H, W, 3), float64, row-major,
channel-interleaved. Pixel (x, y) is sampled at its center (x+0.5, y+0.5);
x grows rightward, y downward, origin at the top-left pixel corner.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import (
    DimensionMismatch,
    NonPositiveCholDiagonal,
    RegionIdOutOfRange,
)

# Floor applied to l11/l22 after each optimizer step; keeps L invertible.
CHOL_DIAG_FLOOR = 1e-4

# Region ID 0 marks an unguided Gaussian; guided IDs live in 1..R.
UNGUIDED_REGION = 0


@dataclass
class GaussianSet:
    """Structure-of-arrays model of N anisotropic 2D Gaussians.

    means:      (N, 2) float64, (mu_x, mu_y) in continuous pixel coordinates
    chol:       (N, 3) float64, lower-triangular factor (l11, l21, l22);
                covariance is L @ L.T and is never stored directly
    colors:     (N, 3) float64 RGB, unbounded ([0, 1] is display range)
    opacities:  (N,)   float64, unbounded
    region_ids: (N,)   int32, all 0 (unguided) or all in 1..R
    """

    means: np.ndarray
    chol: np.ndarray
    colors: np.ndarray
    opacities: np.ndarray
    region_ids: np.ndarray

    def __post_init__(self):
        self.means = np.ascontiguousarray(self.means, dtype=np.float64)
        self.chol = np.ascontiguousarray(self.chol, dtype=np.float64)
        self.colors = np.ascontiguousarray(self.colors, dtype=np.float64)
        self.opacities = np.ascontiguousarray(self.opacities, dtype=np.float64)
        self.region_ids = np.ascontiguousarray(self.region_ids, dtype=np.int32)

    @property
    def n(self) -> int:
        return self.means.shape[0]

    def copy(self) -> "GaussianSet":
        return GaussianSet(
            self.means.copy(),
            self.chol.copy(),
            self.colors.copy(),
            self.opacities.copy(),
            self.region_ids.copy(),
        )

    def with_region_ids(self, region_ids: np.ndarray) -> "GaussianSet":
        return replace(self, region_ids=np.ascontiguousarray(region_ids, dtype=np.int32))


@dataclass
class GradientSet:
    """Per-Gaussian gradients mirroring GaussianSet's learnable fields."""

    means: np.ndarray
    chol: np.ndarray
    colors: np.ndarray
    opacities: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "GradientSet":
        return cls(
            np.zeros((n, 2)),
            np.zeros((n, 3)),
            np.zeros((n, 3)),
            np.zeros(n),
        )


@dataclass
class LabelMap:
    """Per-pixel integer region IDs in 1..R; the contour prior.

    labels: (H, W) int32. Every value in 1..region_count occurs at least once.
    source_values maps remapped ID i (1-based) back to the original file
    value source_values[i-1] for round-tripping loaded masks.
    """

    labels: np.ndarray
    region_count: int
    source_values: tuple[int, ...] | None = None

    def __post_init__(self):
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int32)
        if self.labels.ndim != 2:
            raise DimensionMismatch("label map must be 2-D")
        present = np.unique(self.labels)
        if present.size == 0 or present[0] < 1 or present[-1] > self.region_count:
            raise RegionIdOutOfRange(
                f"labels must lie in 1..{self.region_count}, got range "
                f"[{present[0] if present.size else 'none'}, {present[-1] if present.size else 'none'}]"
            )
        if present.size != self.region_count:
            raise RegionIdOutOfRange(
                f"expected every ID in 1..{self.region_count} to occur; found {present.size}"
            )

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass
class TrainConfig:
    """Iteration budget, learning rates, and feature toggles for fitting."""

    num_gaussians: int = 20
    total_iterations: int = 50_000
    lr_mean: float = 5e-1
    lr_chol: float = 5e-1
    lr_color: float = 5e-3
    lr_opacity: float = 5e-3
    contour_guidance: bool = True
    warm_up: bool = True
    remove_clamp: bool = True
    warmup_refresh_interval: int = 1000
    rng_seed: int = 0
    truncation_radius_sigma: float = 3.0
    threads: int = 0  # 0 = auto (CGS_THREADS env, then all cores)

    def validate(self) -> None:
        if self.num_gaussians < 1:
            raise ValueError("num_gaussians must be >= 1")
        if self.total_iterations < 1:
            raise ValueError("total_iterations must be >= 1")
        for name in ("lr_mean", "lr_chol", "lr_color", "lr_opacity"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.warmup_refresh_interval < 1:
            raise ValueError("warmup_refresh_interval must be >= 1")
        if not self.truncation_radius_sigma > 0:
            raise ValueError("truncation_radius_sigma must be > 0")
        if self.threads < 0:
            raise ValueError("threads must be >= 0")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise KeyError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    @classmethod
    def from_json_file(cls, path) -> "TrainConfig":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise KeyError("config file must hold a flat JSON object")
        return cls.from_dict(data)


def covariance_of(chol_entries) -> np.ndarray:
    """Covariance L @ L.T from a packed lower-triangular factor (l11, l21, l22)."""
    l11, l21, l22 = (float(v) for v in chol_entries)
    if l11 <= 0.0 or l22 <= 0.0:
        raise NonPositiveCholDiagonal(f"l11={l11}, l22={l22}")
    return np.array(
        [
            [l11 * l11, l11 * l21],
            [l11 * l21, l21 * l21 + l22 * l22],
        ]
    )


def validate_set(gs: GaussianSet, lm: LabelMap | None = None) -> None:
    """Check GaussianSet invariants; raise on the first violation.

    Lengths of all arrays must agree, Cholesky diagonals must be positive,
    and region IDs must be all 0 (unguided) or all positive; with a label
    map they must additionally lie in 1..R.
    """
    n = gs.means.shape[0]
    shapes = {
        "means": (gs.means, (n, 2)),
        "chol": (gs.chol, (n, 3)),
        "colors": (gs.colors, (n, 3)),
        "opacities": (gs.opacities, (n,)),
        "region_ids": (gs.region_ids, (n,)),
    }
    for name, (arr, want) in shapes.items():
        if arr.shape != want:
            raise DimensionMismatch(f"{name}: expected shape {want}, got {arr.shape}")
    if n and (np.any(gs.chol[:, 0] <= 0.0) or np.any(gs.chol[:, 2] <= 0.0)):
        raise NonPositiveCholDiagonal("every Gaussian needs l11 > 0 and l22 > 0")
    if n:
        ids = gs.region_ids
        any_zero = bool(np.any(ids == UNGUIDED_REGION))
        all_zero = bool(np.all(ids == UNGUIDED_REGION))
        if any_zero and not all_zero:
            raise RegionIdOutOfRange("region IDs mix the unguided sentinel 0 with guided IDs")
        if np.any(ids < 0):
            raise RegionIdOutOfRange("region IDs must be >= 0")
        if lm is not None:
            if all_zero or np.any(ids > lm.region_count):
                raise RegionIdOutOfRange(
                    f"region IDs must lie in 1..{lm.region_count} when a label map is attached"
                )
