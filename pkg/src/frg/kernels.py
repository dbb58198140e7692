"""Loss kernels with analytic gradients, guide-based sampling and the GARU rule.

Everything here is plain float64 numpy; no autograd.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fourier import guide_values
from .raster import as_raster, check_same_shape, resize_bilinear

BCE_EPS = 1e-7
DEFAULT_TEMPERATURE = 0.1


@dataclass(frozen=True)
class EmbeddingSet:
    """Rows ``0..n_anchors-1`` of ``vectors`` are anchors, the rest are pure negatives.

    ``positive_index[i]`` names the positive row of anchor ``i``. When every row
    is an anchor this is exactly the set of samples the contrastive loss sums over.
    """

    vectors: np.ndarray
    positive_index: np.ndarray
    n_anchors: int | None = None

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"vectors must be (n, P), got shape {v.shape}")
        pos = np.asarray(self.positive_index, dtype=np.int64)
        m = len(pos) if self.n_anchors is None else self.n_anchors
        if len(pos) != m or m > len(v):
            raise ValueError("positive_index needs one entry per anchor")
        if np.any(pos < 0) or np.any(pos >= len(v)) or np.any(pos == np.arange(m)):
            raise ValueError("each positive must be a different, valid row")
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "positive_index", pos)
        object.__setattr__(self, "n_anchors", m)

    @property
    def n(self) -> int:
        return len(self.vectors)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class GilcConfig:
    nucleus_threshold: float = 0.5
    temperature: float = DEFAULT_TEMPERATURE
    max_anchors: int = 256
    max_negatives: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.nucleus_threshold < 1:
            raise ValueError("nucleus_threshold must lie in (0, 1)")
        if not self.temperature > 0:
            raise ValueError("temperature must be > 0")
        if self.max_anchors < 2:
            raise ValueError("max_anchors must be >= 2")


def _clamped(pred, target):
    pred = as_raster(pred, "pred")
    target = as_raster(target, "target")
    check_same_shape(pred, target, "pred/target")
    return np.clip(pred, BCE_EPS, 1 - BCE_EPS), target


def bce_loss(pred, target) -> float:
    p, y = _clamped(pred, target)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log1p(-p)))


def bce_grad(pred, target) -> np.ndarray:
    raw = as_raster(pred, "pred")
    p, y = _clamped(raw, target)
    g = (p - y) / (p * (1 - p)) / p.size
    g[(raw < BCE_EPS) | (raw > 1 - BCE_EPS)] = 0.0
    return g


def _logits(e: EmbeddingSet, tau: float, include_self: bool):
    if e.n < 2:
        raise ValueError(f"info_nce needs at least 2 samples, got {e.n}")
    if not tau > 0:
        raise ValueError("temperature must be > 0")
    m = e.n_anchors
    s = e.vectors[:m] @ e.vectors.T / tau
    if not include_self:
        s[np.arange(m), np.arange(m)] = -np.inf
    return s


def info_nce_loss(e: EmbeddingSet, tau: float = DEFAULT_TEMPERATURE, include_self: bool = True) -> float:
    """Mean over anchors of ``logsumexp_j(z_i.z_j / tau) - z_i.z_i+ / tau``.

    The pool runs over all rows, the anchor itself included unless
    ``include_self`` is off.
    """
    s = _logits(e, tau, include_self)
    m = e.n_anchors
    smax = s.max(axis=1, keepdims=True)
    lse = smax[:, 0] + np.log(np.exp(s - smax).sum(axis=1))
    return float(np.mean(lse - s[np.arange(m), e.positive_index]))


def info_nce_grad(e: EmbeddingSet, tau: float = DEFAULT_TEMPERATURE, include_self: bool = True) -> np.ndarray:
    s = _logits(e, tau, include_self)
    m = e.n_anchors
    w = np.exp(s - s.max(axis=1, keepdims=True))
    w /= w.sum(axis=1, keepdims=True)
    w[np.arange(m), e.positive_index] -= 1.0
    coef = w / (tau * m)
    z = e.vectors
    grad = coef.T @ z[:m]
    grad[:m] += coef @ z
    return grad


def total_loss(l_instance: float, l_guide: float, l_contrastive: float) -> float:
    return l_instance + l_guide + l_contrastive


def garu(fm, g) -> np.ndarray:
    """Guide attention residual: ``out = fm * (1 + g)`` with ``g`` resized to the map."""
    fm = np.asarray(fm, dtype=np.float64)
    if fm.ndim != 3:
        raise ValueError(f"feature map must be (D, h, w), got {fm.shape}")
    gr = resize_bilinear(guide_values(g), fm.shape[1], fm.shape[2])
    return fm * (1.0 + gr)


def gilc_sample(fm, g, cfg: GilcConfig = GilcConfig()) -> EmbeddingSet:
    """Turn every guided position of ``fm`` into an anchor with a random positive.

    Positions whose resized guide value is below the threshold join the pool
    as negatives.
    """
    fm = np.asarray(fm, dtype=np.float64)
    if fm.ndim != 3:
        raise ValueError(f"feature map must be (D, h, w), got {fm.shape}")
    _, h, w = fm.shape
    gr = resize_bilinear(guide_values(g), h, w).ravel()
    rng = np.random.default_rng(cfg.seed)

    anchors = np.flatnonzero(gr >= cfg.nucleus_threshold)
    if len(anchors) < 2:
        raise ValueError("insufficient nucleus evidence")
    if len(anchors) > cfg.max_anchors:
        anchors = np.sort(rng.choice(anchors, cfg.max_anchors, replace=False))
    negatives = np.flatnonzero(gr < cfg.nucleus_threshold)
    if cfg.max_negatives is not None and len(negatives) > cfg.max_negatives:
        negatives = np.sort(rng.choice(negatives, cfg.max_negatives, replace=False))

    m = len(anchors)
    pos = rng.integers(0, m - 1, size=m)
    pos[pos >= np.arange(m)] += 1

    cols = fm.reshape(fm.shape[0], -1).T
    vectors = np.concatenate([cols[anchors], cols[negatives]])
    return EmbeddingSet(vectors, pos, m)


@dataclass
class GradCheckReport:
    max_rel_err: float
    passed: bool
    analytic: np.ndarray
    numeric: np.ndarray


def numeric_gradient(f: Callable[[np.ndarray], float], x0, h: float = 1e-4) -> np.ndarray:
    x = np.array(x0, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        old = x.flat[i]
        x.flat[i] = old + h
        fp = f(x)
        x.flat[i] = old - h
        fm = f(x)
        x.flat[i] = old
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise ValueError(f"function is not finite near coordinate {i}")
        grad.flat[i] = (fp - fm) / (2 * h)
    return grad


def check_gradient(
    f: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    x0,
    h: float = 1e-4,
    tol: float = 1e-4,
    floor: float = 1e-8,
) -> GradCheckReport:
    """Compare ``grad(x0)`` against central differences of ``f``.

    Relative error per coordinate is ``|a - n| / max(|a|, |n|, floor)``.
    """
    x0 = np.array(x0, dtype=np.float64)
    if not np.isfinite(f(x0)):
        raise ValueError("function is not finite at x0")
    a = np.asarray(grad(x0), dtype=np.float64).reshape(x0.shape)
    n = numeric_gradient(f, x0, h)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    err = float(np.max(np.abs(a - n) / denom)) if a.size else 0.0
    return GradCheckReport(err, err < tol, a, n)
