"""Inference-time post-process: drop predicted instances the guide mask does not support."""

from __future__ import annotations

import csv
from dataclasses import dataclass

from .fourier import guide_values
from .raster import AnnotationSet, Contour, rasterize_contour

DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class FilterDecision:
    instance_id: int
    region_max: float
    kept: bool


def instance_guide_score(inst: Contour, g, shape: tuple[int, int] | None = None) -> float:
    """Max guide value over the filled instance; 0 for an empty region."""
    values = guide_values(g)
    if shape is not None and tuple(shape) != values.shape:
        raise ValueError(f"guide shape {values.shape} does not match image shape {tuple(shape)}")
    mask = rasterize_contour(inst, *values.shape).astype(bool)
    if not mask.any():
        return 0.0
    return float(values[mask].max())


def filter_instances(
    preds: AnnotationSet, g, threshold: float = DEFAULT_THRESHOLD
) -> tuple[AnnotationSet, list[FilterDecision]]:
    if not 0 <= threshold <= 1:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    kept, decisions = [], []
    for inst in preds.instances:
        score = instance_guide_score(inst.contour, g, preds.shape)
        keep = score >= threshold
        decisions.append(FilterDecision(inst.id, score, keep))
        if keep:
            kept.append(inst)
    return AnnotationSet(preds.height, preds.width, kept), decisions


def write_decisions_csv(path, decisions: list[FilterDecision]):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["instance_id", "region_max", "kept"])
        for d in decisions:
            wr.writerow([d.instance_id, repr(d.region_max), str(d.kept).lower()])


def read_decisions_csv(path) -> list[FilterDecision]:
    with open(path, newline="") as fh:
        return [
            FilterDecision(int(r["instance_id"]), float(r["region_max"]), r["kept"] == "true")
            for r in csv.DictReader(fh)
        ]
