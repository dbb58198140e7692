"""Patch cropping with instance-truncation rules and weak-annotation subsampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .coarse import trace_contours
from .raster import AnnotationSet, Instance, rasterize_contour

KEEP_FRACTIONS = (0.2, 0.3, 0.4, 0.6, 0.8, 1.0)


@dataclass(frozen=True)
class CropConfig:
    patch_size: int = 256
    stride: int | None = None
    min_instance_fraction: float = 0.10
    min_area: int = 20

    def __post_init__(self):
        if self.patch_size < 1:
            raise ValueError("patch_size must be >= 1")
        if self.stride is None:
            object.__setattr__(self, "stride", self.patch_size)
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if not 0 < self.min_instance_fraction < 1:
            raise ValueError("min_instance_fraction must lie in (0, 1)")
        if self.min_area < 0:
            raise ValueError("min_area must be >= 0")


@dataclass(frozen=True)
class WeakenConfig:
    keep_fraction: float
    seed: int

    def __post_init__(self):
        if not 0 < self.keep_fraction <= 1:
            raise ValueError("keep_fraction must lie in (0, 1]")


@dataclass
class Patch:
    row: int
    col: int
    y0: int
    x0: int
    image: np.ndarray
    annotations: AnnotationSet

    def name(self, stem: str) -> str:
        return f"{stem}_r{self.row}_c{self.col}"


def window_offsets(length: int, size: int, stride: int) -> list[int]:
    """Start offsets along one axis; the last window is pushed flush to the edge."""
    if size > length:
        raise ValueError(f"patch size {size} exceeds image extent {length}")
    offs = list(range(0, length - size + 1, stride))
    if offs[-1] != length - size:
        offs.append(length - size)
    return offs


def patch_count(height: int, width: int, size: int, stride: int) -> int:
    def n(length):
        return math.ceil((length - size) / stride) + 1

    return n(height) * n(width)


def _largest_component(mask: np.ndarray) -> np.ndarray:
    lab, n = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    if n <= 1:
        return mask
    sizes = np.bincount(lab.ravel())[1:]
    return lab == (int(np.argmax(sizes)) + 1)


def crop_patches(image, ann: AnnotationSet, c: CropConfig = CropConfig()) -> list[Patch]:
    """Tile ``image`` and re-express each instance in patch coordinates.

    A clipped instance survives only if it keeps at least
    ``min_instance_fraction`` of its full area and at least ``min_area`` pixels.
    Fragments split into pieces by the window are traced by their largest piece.
    """
    image = np.asarray(image)
    h, w = image.shape[:2]
    if (h, w) != ann.shape:
        raise ValueError(f"image shape {(h, w)} does not match annotations {ann.shape}")
    size = c.patch_size
    masks = [rasterize_contour(inst.contour, h, w).astype(bool) for inst in ann.instances]
    areas = [int(m.sum()) for m in masks]

    patches = []
    for i, y0 in enumerate(window_offsets(h, size, c.stride)):
        for j, x0 in enumerate(window_offsets(w, size, c.stride)):
            kept = []
            for inst, mask, area in zip(ann.instances, masks, areas):
                clip = mask[y0 : y0 + size, x0 : x0 + size]
                clipped = int(clip.sum())
                if clipped == 0 or clipped < c.min_instance_fraction * area or clipped < c.min_area:
                    continue
                contour = inst.contour.translated(-x0, -y0)
                v = contour.vertices
                if clipped < area or v.min() < 0 or v.max() > size:
                    traced = trace_contours(_largest_component(clip).astype(np.int32))
                    contour = traced[0][1]
                kept.append(Instance(inst.id, contour))
            patches.append(
                Patch(
                    i,
                    j,
                    y0,
                    x0,
                    image[y0 : y0 + size, x0 : x0 + size].copy(),
                    AnnotationSet(size, size, kept),
                )
            )
    return patches


def keep_count(k: int, keep_fraction: float) -> int:
    # round half up, never below one instance
    return max(1, math.floor(keep_fraction * k + 0.5))


def weaken_annotations(ann: AnnotationSet, w: WeakenConfig) -> AnnotationSet:
    """Randomly keep a fraction of the instances; order, ids and geometry are preserved."""
    k = len(ann.instances)
    if k == 0:
        raise ValueError("cannot weaken an empty annotation set")
    n = min(k, keep_count(k, w.keep_fraction))
    rng = np.random.default_rng(w.seed)
    chosen = np.sort(rng.choice(k, n, replace=False))
    return AnnotationSet(ann.height, ann.width, [ann.instances[i] for i in chosen])
