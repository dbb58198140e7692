"""Instance-level segmentation metrics: AJI and DQ/SQ/PQ."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .raster import as_label_map, check_same_shape


@dataclass
class PQStats:
    tp: int = 0
    fp: int = 0
    fn_: int = 0
    matched_ious: list[float] = field(default_factory=list)


@dataclass
class MetricReport:
    aji: float
    dq: float
    sq: float
    pq: float
    tp: int
    fp: int
    fn_: int
    per_image: bool = True

    def as_row(self) -> dict:
        return {
            "aji": self.aji,
            "dq": self.dq,
            "sq": self.sq,
            "pq": self.pq,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn_,
        }


def _overlap_table(gt: np.ndarray, pred: np.ndarray):
    """Return (gt ids, pred ids, intersections, gt areas, pred areas)."""
    g_ids, g_inv = np.unique(gt.ravel(), return_inverse=True)
    p_ids, p_inv = np.unique(pred.ravel(), return_inverse=True)
    inter = np.zeros((len(g_ids), len(p_ids)), dtype=np.int64)
    np.add.at(inter, (g_inv, p_inv), 1)
    g_fg, p_fg = g_ids > 0, p_ids > 0
    inter = inter[np.ix_(g_fg, p_fg)]
    g_area = np.bincount(g_inv, minlength=len(g_ids))[g_fg]
    p_area = np.bincount(p_inv, minlength=len(p_ids))[p_fg]
    return g_ids[g_fg], p_ids[p_fg], inter, g_area, p_area


def _pair(gt, pred):
    gt = as_label_map(gt, "gt")
    pred = as_label_map(pred, "pred")
    check_same_shape(gt, pred, "label map")
    return gt, pred


def aji(gt, pred) -> float:
    """Aggregated Jaccard Index.

    GT instances are visited in ascending label order and each grabs the
    unused prediction with the highest IoU (ties go to the lowest predicted
    label). Predictions never used add their area to the denominator.
    """
    gt, pred = _pair(gt, pred)
    _, _, inter, g_area, p_area = _overlap_table(gt, pred)
    if len(g_area) == 0 and len(p_area) == 0:
        return 1.0
    if len(g_area) == 0 or len(p_area) == 0:
        return 0.0

    union = g_area[:, None] + p_area[None, :] - inter
    iou = inter / union
    used = np.zeros(len(p_area), dtype=bool)
    num = 0
    den = 0
    for i in range(len(g_area)):
        cand = np.where(used, -1.0, iou[i])
        j = int(np.argmax(cand))
        if cand[j] <= 0:
            den += int(g_area[i])
            continue
        used[j] = True
        num += int(inter[i, j])
        den += int(union[i, j])
    den += int(p_area[~used].sum())
    return num / den


def pq_match(gt, pred) -> PQStats:
    gt, pred = _pair(gt, pred)
    _, _, inter, g_area, p_area = _overlap_table(gt, pred)
    union = g_area[:, None] + p_area[None, :] - inter
    iou = np.divide(inter, union, out=np.zeros(inter.shape), where=union > 0)
    gi, pj = np.nonzero(iou > 0.5)
    tp = len(gi)
    return PQStats(
        tp=tp,
        fp=len(p_area) - tp,
        fn_=len(g_area) - tp,
        matched_ious=[float(x) for x in iou[gi, pj]],
    )


def dq_sq_pq(s: PQStats) -> tuple[float, float, float]:
    if s.tp + s.fp + s.fn_ == 0:
        dq = 1.0
    else:
        dq = s.tp / (s.tp + 0.5 * s.fp + 0.5 * s.fn_)
    sq = float(np.mean(s.matched_ious)) if s.tp else 0.0
    return dq, sq, dq * sq


def evaluate(gt, pred) -> MetricReport:
    stats = pq_match(gt, pred)
    dq, sq, pq = dq_sq_pq(stats)
    return MetricReport(aji(gt, pred), dq, sq, pq, stats.tp, stats.fp, stats.fn_, True)


def evaluate_batch(pairs) -> MetricReport:
    """Pool TP/FP/FN and matched IoUs over all pairs; AJI is the per-image mean."""
    stats, ajis = [], []
    for gt, pred in pairs:
        stats.append(pq_match(gt, pred))
        ajis.append(aji(gt, pred))
    return aggregate(ajis, stats)


def aggregate(ajis: list[float], stats: list[PQStats]) -> MetricReport:
    if not ajis:
        raise ValueError("nothing to aggregate")
    pooled = PQStats()
    for s in stats:
        pooled.tp += s.tp
        pooled.fp += s.fp
        pooled.fn_ += s.fn_
        pooled.matched_ious.extend(s.matched_ious)
    dq, sq, pq = dq_sq_pq(pooled)
    return MetricReport(
        float(np.mean(ajis)), dq, sq, pq, pooled.tp, pooled.fp, pooled.fn_, False
    )
