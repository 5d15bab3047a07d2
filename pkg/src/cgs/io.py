"""PNG image/label-map loading and CGS1 model persistence."""

from __future__ import annotations

import json
import struct

import numpy as np
from PIL import Image

from .core import GaussianSet, LabelMap
from .errors import (
    BadMagic,
    IoFailure,
    TooManyRegions,
    TruncatedFile,
    UnsupportedFormat,
)

MODEL_MAGIC = b"CGS1"
_RECORD_FLOATS = 10  # mu_x, mu_y, l11, l21, l22, r, g, b, alpha, region_id


def model_bytes(n: int) -> int:
    """On-disk size of an N-Gaussian model: magic + counts + records."""
    return 4 + 8 + 4 * _RECORD_FLOATS * n


def load_image(path) -> np.ndarray:
    """Read an RGB(A) image as (H, W, 3) float64 in [0, 1]; alpha is dropped."""
    with Image.open(path) as img:
        mode = img.mode
        if mode in ("RGB", "RGBA"):
            arr = np.asarray(img, np.float64)[:, :, :3] / 255.0
        elif mode in ("I;16", "I"):
            gray = np.asarray(img, np.float64) / 65535.0
            arr = np.repeat(gray[:, :, None], 3, axis=2)
        else:
            raise UnsupportedFormat(f"unsupported image mode {mode!r} in {path}")
    return np.ascontiguousarray(arr)


def save_image(image: np.ndarray, path) -> None:
    """Clamp to [0, 1], quantize round-half-up to 8 bits, write a PNG."""
    arr = np.clip(np.asarray(image, np.float64), 0.0, 1.0)
    q = np.floor(arr * 255.0 + 0.5).astype(np.uint8)
    try:
        Image.fromarray(q, mode="RGB").save(path, format="PNG")
    except (OSError, ValueError) as exc:
        raise IoFailure(f"cannot write image {path}: {exc}") from exc


def load_label_map(path) -> LabelMap:
    """Read a single-channel or palette-indexed PNG as a label map.

    Raw values (intensity or palette index) are remapped to contiguous
    1..R in first-occurrence raster order; the original values are kept in
    LabelMap.source_values for round-tripping.
    """
    with Image.open(path) as img:
        mode = img.mode
        if mode not in ("L", "P"):
            raise UnsupportedFormat(
                f"label maps must be 8-bit single-channel or indexed PNG, got mode {mode!r}"
            )
        raw = np.asarray(img, np.int64)
    values, first = np.unique(raw, return_index=True)
    order = values[np.argsort(first)]
    if order.size > 255:
        raise TooManyRegions(f"{order.size} distinct labels (max 255)")
    lut = np.zeros(int(raw.max()) + 1, np.int32)
    for new_id, value in enumerate(order, start=1):
        lut[value] = new_id
    return LabelMap(lut[raw], int(order.size),
                    source_values=tuple(int(v) for v in order))


def save_label_map(lm: LabelMap, path) -> None:
    """Write region IDs as an 8-bit grayscale PNG (intensity = ID)."""
    if lm.region_count > 255:
        raise TooManyRegions(f"{lm.region_count} regions do not fit 8 bits")
    try:
        Image.fromarray(lm.labels.astype(np.uint8), mode="L").save(path, format="PNG")
    except (OSError, ValueError) as exc:
        raise IoFailure(f"cannot write label map {path}: {exc}") from exc


def save_model(gs: GaussianSet, path) -> None:
    """Write the CGS1 binary: magic, u32 N, u32 R, then N x 10 float32 records."""
    n = gs.n
    region_count = int(gs.region_ids.max()) if n else 0
    records = np.empty((n, _RECORD_FLOATS), dtype="<f4")
    records[:, 0:2] = gs.means
    records[:, 2:5] = gs.chol
    records[:, 5:8] = gs.colors
    records[:, 8] = gs.opacities
    records[:, 9] = gs.region_ids
    try:
        with open(path, "wb") as fh:
            fh.write(MODEL_MAGIC)
            fh.write(struct.pack("<II", n, region_count))
            fh.write(records.tobytes())
    except OSError as exc:
        raise IoFailure(f"cannot write model {path}: {exc}") from exc


def load_model(path) -> GaussianSet:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 or blob[:4] != MODEL_MAGIC:
        raise BadMagic(f"{path} does not start with {MODEL_MAGIC!r}")
    if len(blob) < 12:
        raise TruncatedFile(f"{path} is too short for a header")
    n, _region_count = struct.unpack("<II", blob[4:12])
    payload = blob[12:]
    if len(payload) != 4 * _RECORD_FLOATS * n:
        raise TruncatedFile(
            f"{path}: header says {n} records, payload holds {len(payload)} bytes"
        )
    records = np.frombuffer(payload, dtype="<f4").reshape(n, _RECORD_FLOATS)
    return GaussianSet(
        means=records[:, 0:2].astype(np.float64),
        chol=records[:, 2:5].astype(np.float64),
        colors=records[:, 5:8].astype(np.float64),
        opacities=records[:, 8].astype(np.float64),
        region_ids=np.rint(records[:, 9]).astype(np.int32),
    )


def save_model_json(gs: GaussianSet, path) -> None:
    """Debug export of the same content as the binary model file."""
    data = {
        "n": gs.n,
        "region_count": int(gs.region_ids.max()) if gs.n else 0,
        "gaussians": [
            {
                "mean": gs.means[i].tolist(),
                "chol": gs.chol[i].tolist(),
                "color": gs.colors[i].tolist(),
                "opacity": float(gs.opacities[i]),
                "region_id": int(gs.region_ids[i]),
            }
            for i in range(gs.n)
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")
