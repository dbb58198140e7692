"""Fourier guide masks: FFT, low-frequency notch, inverse magnitude, normalization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .raster import as_label_map, as_raster, check_same_shape, to_gray

DEFAULT_RADIUS = 1.0


@dataclass(frozen=True)
class SpectralFilterSpec:
    radius: float = DEFAULT_RADIUS
    mode: Literal["notch-disk"] = "notch-disk"

    def __post_init__(self):
        if not np.isfinite(self.radius) or self.radius < 0:
            raise ValueError(f"radius must be a non-negative real, got {self.radius}")
        if self.mode != "notch-disk":
            raise ValueError(f"unsupported filter mode {self.mode!r}")


@dataclass(frozen=True)
class GuideMask:
    values: np.ndarray
    kind: Literal["soft", "hard"] = "soft"

    def __post_init__(self):
        v = as_raster(self.values, "guide mask")
        if v.min() < 0 or v.max() > 1:
            raise ValueError("guide mask values must lie in [0, 1]")
        if self.kind == "hard":
            if not np.all((v == 0) | (v == 1)):
                raise ValueError("hard guide mask must be binary")
        elif self.kind != "soft":
            raise ValueError(f"unknown guide kind {self.kind!r}")
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape


def guide_values(g) -> np.ndarray:
    return g.values if isinstance(g, GuideMask) else as_raster(g, "guide mask")


def fft2_centered(gray) -> np.ndarray:
    """Unnormalized forward DFT with DC moved to ``(h // 2, w // 2)``."""
    return np.fft.fftshift(np.fft.fft2(as_raster(gray, "image")))


def notch_mask(h: int, w: int, radius: float) -> np.ndarray:
    """Boolean mask of centered-spectrum bins within ``radius`` of DC."""
    dr = np.arange(h) - h // 2
    dc = np.arange(w) - w // 2
    return dr[:, None] ** 2 + dc[None, :] ** 2 <= radius**2


def apply_notch(spec, f: SpectralFilterSpec) -> np.ndarray:
    spec = np.asarray(spec, dtype=np.complex128)
    out = spec.copy()
    out[notch_mask(*spec.shape, f.radius)] = 0
    return out


def ifft2_magnitude(spec) -> np.ndarray:
    spec = np.asarray(spec, dtype=np.complex128)
    return np.abs(np.fft.ifft2(np.fft.ifftshift(spec)))


def normalize_minmax(m) -> np.ndarray:
    m = as_raster(m)
    lo, hi = m.min(), m.max()
    if hi == lo:
        return np.zeros_like(m)
    return (m - lo) / (hi - lo)


def highpass_magnitude(image, f: SpectralFilterSpec = SpectralFilterSpec()) -> np.ndarray:
    """The guide pipeline up to, but not including, normalization."""
    return ifft2_magnitude(apply_notch(fft2_centered(to_gray(image)), f))


def generate_soft_guide(image, f: SpectralFilterSpec = SpectralFilterSpec()) -> GuideMask:
    """Soft guide mask of a gray ``(H, W)`` or RGB ``(H, W, 3)`` image in [0, 1]."""
    return GuideMask(normalize_minmax(highpass_magnitude(image, f)), "soft")


def fuse_with_gt(soft: GuideMask, gt) -> GuideMask:
    s = guide_values(soft)
    gt = as_label_map(gt, "ground truth")
    check_same_shape(s, gt, "guide/ground truth")
    if gt.size and gt.max() > 1:
        raise ValueError("ground truth must be binary; use (labels > 0)")
    return GuideMask(np.clip(s + gt, 0.0, 1.0), "soft")


def harden(soft: GuideMask, t: float = 0.5) -> GuideMask:
    if not 0 < t < 1:
        raise ValueError(f"threshold must lie in (0, 1), got {t}")
    return GuideMask((guide_values(soft) >= t).astype(np.float64), "hard")
