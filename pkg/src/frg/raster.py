"""Raster, label-map and contour primitives shared by the rest of the package.

Rasters are 2-D float64 numpy arrays, label maps are 2-D integer arrays with
0 as background. Contours live in pixel coordinates where pixel ``(row, col)``
covers ``[col, col+1) x [row, row+1)`` and its center sits at
``(col + 0.5, row + 0.5)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


class DegenerateContourWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Contour:
    """Closed polygon, vertices as an ``(N, 2)`` array of ``(x, y)``."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ValueError(f"contour vertices must have shape (N, 2), got {v.shape}")
        if len(v) < 3:
            raise ValueError(f"contour needs at least 3 vertices, got {len(v)}")
        if not np.all(np.isfinite(v)):
            raise ValueError("contour vertices must be finite")
        if np.any(np.all(v == np.roll(v, -1, axis=0), axis=1)):
            raise ValueError("contour has consecutive identical vertices")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def __len__(self):
        return len(self.vertices)

    def reversed(self) -> "Contour":
        return Contour(self.vertices[::-1].copy())

    def translated(self, dx: float, dy: float) -> "Contour":
        return Contour(self.vertices + np.array([dx, dy]))

    @property
    def signed_area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    def __eq__(self, other):
        if not isinstance(other, Contour):
            return NotImplemented
        return self.vertices.shape == other.vertices.shape and bool(
            np.array_equal(self.vertices, other.vertices)
        )

    __hash__ = None


@dataclass(frozen=True)
class Instance:
    id: int
    contour: Contour


@dataclass
class AnnotationSet:
    """Per-image collection of instance contours."""

    height: int
    width: int
    instances: list[Instance] = field(default_factory=list)

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValueError(f"bad image shape {self.height}x{self.width}")
        ids = [inst.id for inst in self.instances]
        if any(i < 1 for i in ids):
            raise ValueError("instance ids must be positive")
        if len(set(ids)) != len(ids):
            raise ValueError("instance ids must be unique")
        for inst in self.instances:
            v = inst.contour.vertices
            if (
                v[:, 0].min() < 0
                or v[:, 1].min() < 0
                or v[:, 0].max() > self.width
                or v[:, 1].max() > self.height
            ):
                raise ValueError(f"instance {inst.id} has vertices outside the image")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def ids(self) -> list[int]:
        return [inst.id for inst in self.instances]

    def __len__(self):
        return len(self.instances)


def as_raster(x, name="raster") -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def as_label_map(x, name="label map") -> np.ndarray:
    a = np.asarray(x)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if a.dtype.kind == "b":
        a = a.astype(np.int64)
    elif a.dtype.kind not in "iu":
        if not np.all(a == np.round(a)):
            raise ValueError(f"{name} must hold integers")
        a = a.astype(np.int64)
    if a.size and a.min() < 0:
        raise ValueError(f"{name} has negative labels")
    return a


def check_same_shape(a: np.ndarray, b: np.ndarray, what="inputs"):
    if a.shape != b.shape:
        raise ValueError(f"{what} shape mismatch: {a.shape} vs {b.shape}")


def rgb_to_gray(r, g, b) -> np.ndarray:
    r, g, b = as_raster(r, "r"), as_raster(g, "g"), as_raster(b, "b")
    check_same_shape(r, g, "channel")
    check_same_shape(r, b, "channel")
    wr, wg, wb = LUMA_WEIGHTS
    return wr * r + wg * g + wb * b


def to_gray(image) -> np.ndarray:
    """Accept a 2-D gray image or an ``(H, W, 3)`` RGB array."""
    a = np.asarray(image, dtype=np.float64)
    if a.ndim == 2:
        return as_raster(a, "image")
    if a.ndim == 3 and a.shape[2] == 3:
        return rgb_to_gray(a[..., 0], a[..., 1], a[..., 2])
    if a.ndim == 3 and a.shape[2] == 1:
        return as_raster(a[..., 0], "image")
    raise ValueError(f"image must be (H, W) or (H, W, 3), got {a.shape}")


def resize_bilinear(m, out_h: int, out_w: int) -> np.ndarray:
    """Corner-aligned bilinear resize (first and last samples map onto each other)."""
    m = as_raster(m)
    if out_h < 1 or out_w < 1:
        raise ValueError(f"target shape must be positive, got {out_h}x{out_w}")
    h, w = m.shape
    if (h, w) == (out_h, out_w):
        return m.copy()

    def grid(n_in, n_out):
        if n_out == 1 or n_in == 1:
            pos = np.zeros(n_out)
        else:
            pos = np.arange(n_out) * ((n_in - 1) / (n_out - 1))
        lo = np.clip(np.floor(pos).astype(np.int64), 0, n_in - 1)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, pos - lo

    r0, r1, fr = grid(h, out_h)
    c0, c1, fc = grid(w, out_w)
    fr = fr[:, None]
    fc = fc[None, :]
    top = m[r0][:, c0] * (1 - fc) + m[r0][:, c1] * fc
    bot = m[r1][:, c0] * (1 - fc) + m[r1][:, c1] * fc
    out = top * (1 - fr) + bot * fr
    # guard against rounding drift outside the input range
    return np.clip(out, m.min(), m.max())


def rasterize_contour(c: Contour, h: int, w: int) -> np.ndarray:
    """Even-odd fill sampled at pixel centers; centers on an edge count as inside."""
    out = np.zeros((h, w), dtype=np.uint8)
    v = c.vertices
    if c.signed_area == 0.0:
        warnings.warn("zero-area contour rasterizes to an empty mask", DegenerateContourWarning)
        return out

    r_lo = max(0, int(np.floor(v[:, 1].min() - 0.5)))
    r_hi = min(h - 1, int(np.ceil(v[:, 1].max() - 0.5)))
    c_lo = max(0, int(np.floor(v[:, 0].min() - 0.5)))
    c_hi = min(w - 1, int(np.ceil(v[:, 0].max() - 0.5)))
    if r_lo > r_hi or c_lo > c_hi:
        return out

    x1, y1 = v[:, 0], v[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    yc = np.arange(r_lo, r_hi + 1) + 0.5
    xc = np.arange(c_lo, c_hi + 1) + 0.5

    # crossing number with the half-open rule on y
    Y = yc[:, None]
    crosses = ((y1 <= Y) & (Y < y2)) | ((y2 <= Y) & (Y < y1))
    with np.errstate(divide="ignore", invalid="ignore"):
        xi = x1 + (Y - y1) * (x2 - x1) / (y2 - y1)
    xi = np.where(crosses, xi, -np.inf)
    xi.sort(axis=1)
    n_right = xi.shape[1] - np.stack(
        [np.searchsorted(row, xc, side="right") for row in xi]
    )
    inside = (n_right % 2) == 1

    # pixel centers lying exactly on a segment
    X = xc[None, :, None]
    Yb = yc[:, None, None]
    cross = (x2 - x1) * (Yb - y1) - (y2 - y1) * (X - x1)
    on_line = cross == 0
    within = (
        (X >= np.minimum(x1, x2))
        & (X <= np.maximum(x1, x2))
        & (Yb >= np.minimum(y1, y2))
        & (Yb <= np.maximum(y1, y2))
    )
    inside |= np.any(on_line & within, axis=2)

    out[r_lo : r_hi + 1, c_lo : c_hi + 1] = inside
    return out


def annotations_to_label_map(a: AnnotationSet) -> np.ndarray:
    """Later instances overwrite earlier ones; labels are 1..K in sequence order."""
    lm = np.zeros(a.shape, dtype=np.int32)
    for k, inst in enumerate(a.instances, start=1):
        lm[rasterize_contour(inst.contour, a.height, a.width).astype(bool)] = k
    return lm


def mask_iou(a, b) -> float:
    a = as_label_map(a, "a") > 0
    b = as_label_map(b, "b") > 0
    check_same_shape(a, b, "mask")
    union = np.count_nonzero(a | b)
    if union == 0:
        return 0.0
    return np.count_nonzero(a & b) / union


def compact_labels(lm) -> np.ndarray:
    """Renumber positive labels to 1..K by first row-major appearance."""
    lm = as_label_map(lm)
    flat = lm.ravel()
    labels, first = np.unique(flat, return_index=True)
    keep = labels > 0
    labels, first = labels[keep], first[keep]
    order = labels[np.argsort(first, kind="stable")]
    lut = np.zeros(int(lm.max(initial=0)) + 1, dtype=np.int32)
    lut[order] = np.arange(1, len(order) + 1)
    return lut[lm]
