"""Training-free coarse nuclear instance segmentation from a soft guide mask."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .fourier import SpectralFilterSpec, generate_soft_guide, guide_values
from .raster import AnnotationSet, Contour, Instance, as_label_map, compact_labels

# (dx, dy) in image coordinates, y pointing down
_RIGHT, _DOWN, _LEFT, _UP = (1, 0), (0, 1), (-1, 0), (0, -1)


@dataclass(frozen=True)
class CoarseSegParams:
    binarize_threshold: float = 0.5
    opening_kernel: int = 3
    opening_iterations: int = 1
    connectivity: int = 8
    min_area: int = 20

    def __post_init__(self):
        if not 0 < self.binarize_threshold < 1:
            raise ValueError("binarize_threshold must lie in (0, 1)")
        if self.opening_kernel < 1 or self.opening_kernel % 2 == 0:
            raise ValueError("opening_kernel must be an odd count >= 1")
        if self.opening_iterations < 0:
            raise ValueError("opening_iterations must be >= 0")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")
        if self.min_area < 0:
            raise ValueError("min_area must be >= 0")


def binarize(g, t: float = 0.5) -> np.ndarray:
    if not 0 < t < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {t}")
    return (guide_values(g) >= t).astype(np.uint8)


def morph_open(b, k: int = 3, iters: int = 1) -> np.ndarray:
    if k < 1 or k % 2 == 0:
        raise ValueError(f"structuring element size must be odd, got {k}")
    b = as_label_map(b, "binary mask") > 0
    if iters == 0:
        return b.astype(np.uint8)
    se = np.ones((k, k), dtype=bool)
    eroded = ndimage.binary_erosion(b, se, iterations=iters, border_value=0)
    return ndimage.binary_dilation(eroded, se, iterations=iters).astype(np.uint8)


def _structure(connectivity: int) -> np.ndarray:
    if connectivity == 8:
        return np.ones((3, 3), dtype=bool)
    if connectivity == 4:
        return ndimage.generate_binary_structure(2, 1)
    raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")


def connected_components(b, connectivity: int = 8) -> np.ndarray:
    """Label foreground regions 1..K in row-major first-encounter order."""
    b = as_label_map(b, "binary mask") > 0
    labels, _ = ndimage.label(b, structure=_structure(connectivity))
    return compact_labels(labels)


def remove_small(lm, min_area: int = 20) -> np.ndarray:
    """Zero components with fewer than ``min_area`` pixels, then compact labels."""
    lm = as_label_map(lm)
    counts = np.bincount(lm.ravel())
    small = counts < min_area
    small[0] = False
    out = np.where(small[lm], 0, lm)
    return compact_labels(out)


def _trace_mask(mask: np.ndarray) -> Contour | None:
    """Follow the outer pixel-edge boundary of the component holding the
    row-major first foreground pixel, clockwise, with 8-neighbor adjacency.

    Vertices sit on pixel corners, so the polygon encloses whole pixels and
    only direction changes are emitted.
    """
    rows, cols = np.nonzero(mask)
    if len(rows) == 0:
        return None
    h, w = mask.shape

    def fg(col, row):
        return 0 <= row < h and 0 <= col < w and bool(mask[row, col])

    def ahead(x, y, d):
        # pixels (col, row) ahead-left and ahead-right of corner (x, y)
        if d == _RIGHT:
            return (x, y - 1), (x, y)
        if d == _DOWN:
            return (x, y), (x - 1, y)
        if d == _LEFT:
            return (x - 1, y), (x - 1, y - 1)
        return (x - 1, y - 1), (x, y - 1)

    start = (int(cols[0]), int(rows[0]))
    x, y = start
    d = _RIGHT
    verts = [start]
    while True:
        x, y = x + d[0], y + d[1]
        left, right = ahead(x, y, d)
        if fg(*left):
            nd = (d[1], -d[0])
        elif fg(*right):
            nd = d
        else:
            nd = (-d[1], d[0])
        if (x, y) == start and nd == _RIGHT:
            break
        if nd != d:
            verts.append((x, y))
            d = nd
    return Contour(np.array(verts, dtype=np.float64))


def trace_contours(lm) -> list[tuple[int, Contour]]:
    """Outer boundary contour of every label, in ascending label order."""
    lm = as_label_map(lm)
    out = []
    labels = np.unique(lm)
    objects = ndimage.find_objects(lm)
    for lab in labels[labels > 0]:
        sl = objects[lab - 1]
        sub = lm[sl] == lab
        c = _trace_mask(sub)
        if c is not None:
            out.append((int(lab), c.translated(sl[1].start, sl[0].start)))
    return out


def coarse_segment(
    image,
    f: SpectralFilterSpec = SpectralFilterSpec(),
    p: CoarseSegParams = CoarseSegParams(),
) -> tuple[np.ndarray, AnnotationSet]:
    guide = generate_soft_guide(image, f)
    b = binarize(guide, p.binarize_threshold)
    b = morph_open(b, p.opening_kernel, p.opening_iterations)
    lm = connected_components(b, p.connectivity)
    lm = remove_small(lm, p.min_area)
    h, w = lm.shape
    ann = AnnotationSet(h, w, [Instance(lab, c) for lab, c in trace_contours(lm)])
    return lm, ann
