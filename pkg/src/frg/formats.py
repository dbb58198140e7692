"""File formats: annotation JSON, PNG rasters and FRGR float rasters.

FRGR layout: ``b"FRGR"``, little-endian uint32 height and width, then
``height * width`` little-endian float32 values in row-major order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .raster import (
    AnnotationSet,
    Contour,
    Instance,
    annotations_to_label_map,
    as_label_map,
    as_raster,
)

FRGR_MAGIC = b"FRGR"
_HEADER = struct.Struct("<4sII")


class FormatError(ValueError):
    def __init__(self, msg: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            msg = f"{msg} (at byte offset {offset})"
        super().__init__(msg)


class LabelOverflowError(OverflowError):
    pass


# -- annotation JSON ---------------------------------------------------------


def annotations_to_dict(a: AnnotationSet) -> dict:
    return {
        "height": a.height,
        "width": a.width,
        "instances": [
            {"id": inst.id, "polygon": inst.contour.vertices.tolist()} for inst in a.instances
        ],
    }


def annotations_from_dict(d: dict) -> AnnotationSet:
    try:
        instances = [
            Instance(int(item["id"]), Contour(np.asarray(item["polygon"], dtype=np.float64)))
            for item in d["instances"]
        ]
        return AnnotationSet(int(d["height"]), int(d["width"]), instances)
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed annotation document: {exc!r}") from exc


def save_annotations(path, a: AnnotationSet):
    Path(path).write_text(json.dumps(annotations_to_dict(a)) + "\n")


def load_annotations(path) -> AnnotationSet:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc.msg}", exc.pos) from exc
    return annotations_from_dict(d)


# -- PNG ---------------------------------------------------------------------


def save_label_png(path, lm):
    lm = as_label_map(lm)
    if lm.size and lm.max() > 65535:
        raise LabelOverflowError(f"label {int(lm.max())} does not fit in 16 bits")
    Image.fromarray(lm.astype(np.uint16)).save(path, format="PNG")


def load_label_png(path) -> np.ndarray:
    with Image.open(path) as im:
        a = np.asarray(im)
    if a.ndim == 3:
        raise FormatError(f"{path}: expected a single-channel label image, got {a.shape}")
    return a.astype(np.int32)


def save_guide_png(path, g):
    g = as_raster(g, "guide")
    if g.min() < 0 or g.max() > 1:
        raise ValueError("guide values must lie in [0, 1]")
    Image.fromarray(np.round(g * 65535).astype(np.uint16)).save(path, format="PNG")


def load_guide_png(path) -> np.ndarray:
    with Image.open(path) as im:
        a = np.asarray(im)
    if a.ndim != 2:
        raise FormatError(f"{path}: expected a single-channel guide image, got {a.shape}")
    return a.astype(np.float64) / 65535.0


def save_rgb_png(path, image):
    a = np.asarray(image, dtype=np.float64)
    a = np.round(np.clip(a, 0, 1) * 255).astype(np.uint8)
    Image.fromarray(a).save(path, format="PNG")


def load_image(path) -> np.ndarray:
    """Load an 8-bit image as float64 in [0, 1]; RGB as (H, W, 3), gray as (H, W)."""
    with Image.open(path) as im:
        if im.mode in ("I;16", "I;16B", "I"):
            return np.asarray(im).astype(np.float64) / 65535.0
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        return np.asarray(im).astype(np.float64) / 255.0


# -- FRGR --------------------------------------------------------------------


def encode_frgr(r) -> bytes:
    r = as_raster(r)
    h, w = r.shape
    return _HEADER.pack(FRGR_MAGIC, h, w) + r.astype("<f4").tobytes()


def decode_frgr(buf: bytes) -> np.ndarray:
    if len(buf) < 4:
        raise FormatError("truncated FRGR magic", len(buf))
    if buf[:4] != FRGR_MAGIC:
        raise FormatError(f"bad FRGR magic {buf[:4]!r}", 0)
    if len(buf) < _HEADER.size:
        raise FormatError("truncated FRGR header", len(buf))
    _, h, w = _HEADER.unpack_from(buf)
    if h < 1 or w < 1:
        raise FormatError(f"invalid FRGR shape {h}x{w}", 4 if h < 1 else 8)
    expected = _HEADER.size + 4 * h * w
    if len(buf) != expected:
        raise FormatError(
            f"FRGR payload should be {expected} bytes, file has {len(buf)}", min(len(buf), expected)
        )
    data = np.frombuffer(buf, dtype="<f4", offset=_HEADER.size)
    return data.reshape(h, w).astype(np.float64)


def save_frgr(path, r):
    Path(path).write_bytes(encode_frgr(r))


def load_frgr(path) -> np.ndarray:
    return decode_frgr(Path(path).read_bytes())


def load_label_map(path) -> np.ndarray:
    """Label map from a 16-bit PNG or an annotation JSON."""
    if str(path).lower().endswith(".json"):
        return annotations_to_label_map(load_annotations(path))
    return load_label_png(path)


def load_guide(path) -> np.ndarray:
    if str(path).lower().endswith(".frgr"):
        return load_frgr(path)
    return load_guide_png(path)


def save_guide(path, g):
    if str(path).lower().endswith(".frgr"):
        save_frgr(path, g)
    else:
        save_guide_png(path, g)
