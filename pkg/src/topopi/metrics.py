"""Segmentation and topological evaluation metrics.

Pixel metrics compare raw foreground masks. Topological metrics run on the
contour masks after predicted components failing the majority-overlap test
against the ground truth are removed: Betti number errors compare feature
counts, Betti matching errors count features left unmatched by a maximum
pixel-overlap assignment between spatial features.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ContractError
from .persistence import betti_numbers
from .segmap import SegMap, extract_contours, filter_majority_overlap, label_components

DEFAULT_OVERLAP_THRESHOLD = 0.5

METRIC_FIELDS = (
    "precision",
    "recall",
    "fscore",
    "betti_err_0",
    "betti_err_1",
    "betti_err",
    "match_err_0",
    "match_err_1",
    "match_err",
)


@dataclass(frozen=True)
class ImageMetrics:
    source_id: str
    precision: float
    recall: float
    fscore: float
    betti_err_0: float
    betti_err_1: float
    betti_err: float
    match_err_0: float
    match_err_1: float
    match_err: float


@dataclass(frozen=True)
class MetricReport:
    """Aggregate means over images, with per-image rows and std deviations."""

    precision: float
    recall: float
    fscore: float
    betti_err_0: float
    betti_err_1: float
    betti_err: float
    match_err_0: float
    match_err_1: float
    match_err: float
    stds: dict[str, float]
    per_image: tuple[ImageMetrics, ...]


def _check_dims(pred: SegMap, gt: SegMap) -> None:
    if (pred.width, pred.height) != (gt.width, gt.height):
        raise ContractError(
            f"dimension mismatch: pred {pred.width}x{pred.height} vs gt {gt.width}x{gt.height}"
        )


def pixel_metrics(pred: SegMap, gt: SegMap) -> tuple[float, float, float]:
    """Foreground-vs-background (precision, recall, fscore).

    Degenerate 0/0 ratios resolve to 1 only when both maps are empty,
    otherwise to 0.
    """
    _check_dims(pred, gt)
    p = pred.foreground
    g = gt.foreground
    tp = float(np.logical_and(p, g).sum())
    fp = float(np.logical_and(p, ~g).sum())
    fn = float(np.logical_and(~p, g).sum())
    both_empty = not p.any() and not g.any()
    precision = tp / (tp + fp) if tp + fp > 0 else (1.0 if both_empty else 0.0)
    recall = tp / (tp + fn) if tp + fn > 0 else (1.0 if both_empty else 0.0)
    fscore = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, fscore


def betti_error(
    pred: SegMap, gt: SegMap, threshold: float = DEFAULT_OVERLAP_THRESHOLD
) -> tuple[int, int]:
    """|b_k(pred contours) - b_k(gt contours)| after majority-overlap filtering."""
    _check_dims(pred, gt)
    filtered = filter_majority_overlap(pred, gt, threshold)
    bp = betti_numbers(extract_contours(filtered))
    bg = betti_numbers(extract_contours(gt))
    return abs(bp.b0 - bg.b0), abs(bp.b1 - bg.b1)


def _component_regions(mask: np.ndarray) -> list[np.ndarray]:
    """Filled region of each 8-connected component of a contour mask.

    The region is the component plus every pixel whose 4-connected background
    flood (treating only this component as wall) cannot reach the border.
    """
    labeled, count = label_components(mask, connectivity=8)
    regions = []
    for i in range(1, count + 1):
        comp = labeled == i
        bg_labels, n_bg = label_components(~comp, connectivity=4)
        enclosed = np.zeros_like(comp)
        if n_bg:
            border = np.unique(
                np.concatenate(
                    [bg_labels[0, :], bg_labels[-1, :], bg_labels[:, 0], bg_labels[:, -1]]
                )
            )
            outside = set(border[border > 0].tolist())
            for j in range(1, n_bg + 1):
                if j not in outside:
                    enclosed |= bg_labels == j
        regions.append(comp | enclosed)
    return regions


def _hole_regions(mask: np.ndarray) -> list[np.ndarray]:
    """Enclosed background holes of a contour mask (4-connected, off-border)."""
    bg_labels, n_bg = label_components(~mask, connectivity=4)
    if n_bg == 0:
        return []
    border = np.unique(
        np.concatenate([bg_labels[0, :], bg_labels[-1, :], bg_labels[:, 0], bg_labels[:, -1]])
    )
    outside = set(border[border > 0].tolist())
    return [bg_labels == j for j in range(1, n_bg + 1) if j not in outside]


def _unmatched_count(gt_regions: list[np.ndarray], pred_regions: list[np.ndarray]) -> int:
    """Features left over by the maximum-overlap assignment (positive overlap only)."""
    ng, np_ = len(gt_regions), len(pred_regions)
    if ng == 0 or np_ == 0:
        return ng + np_
    overlap = np.zeros((ng, np_), dtype=np.float64)
    for i, rg in enumerate(gt_regions):
        for j, rp in enumerate(pred_regions):
            overlap[i, j] = np.logical_and(rg, rp).sum()
    rows, cols = linear_sum_assignment(overlap, maximize=True)
    matched = int(sum(1 for i, j in zip(rows, cols) if overlap[i, j] > 0))
    return (ng - matched) + (np_ - matched)


def betti_matching_error(
    pred: SegMap, gt: SegMap, threshold: float = DEFAULT_OVERLAP_THRESHOLD
) -> tuple[int, int]:
    """Unmatched contour components (dim 0) and holes (dim 1) between the maps."""
    _check_dims(pred, gt)
    filtered = filter_majority_overlap(pred, gt, threshold)
    cm_pred = extract_contours(filtered).mask
    cm_gt = extract_contours(gt).mask
    m0 = _unmatched_count(_component_regions(cm_gt), _component_regions(cm_pred))
    m1 = _unmatched_count(_hole_regions(cm_gt), _hole_regions(cm_pred))
    return m0, m1


def evaluate_pair(
    pred: SegMap, gt: SegMap, threshold: float = DEFAULT_OVERLAP_THRESHOLD
) -> ImageMetrics:
    precision, recall, fscore = pixel_metrics(pred, gt)
    e0, e1 = betti_error(pred, gt, threshold)
    m0, m1 = betti_matching_error(pred, gt, threshold)
    return ImageMetrics(
        source_id=gt.source_id or pred.source_id,
        precision=precision,
        recall=recall,
        fscore=fscore,
        betti_err_0=float(e0),
        betti_err_1=float(e1),
        betti_err=float(e0 + e1),
        match_err_0=float(m0),
        match_err_1=float(m1),
        match_err=float(m0 + m1),
    )


def aggregate(per_image: Sequence[ImageMetrics]) -> MetricReport:
    """Arithmetic means over images (each image weighted equally)."""
    if not per_image:
        raise ContractError("cannot aggregate an empty metric list")
    table = {f: np.array([getattr(row, f) for row in per_image]) for f in METRIC_FIELDS}
    means = {f: float(v.mean()) for f, v in table.items()}
    stds = {f: float(v.std()) for f, v in table.items()}
    return MetricReport(stds=stds, per_image=tuple(per_image), **means)


def evaluate_batch(
    pairs: Sequence[tuple[SegMap, SegMap]], threshold: float = DEFAULT_OVERLAP_THRESHOLD
) -> MetricReport:
    return aggregate([evaluate_pair(pred, gt, threshold) for gt, pred in pairs])


# ---------------------------------------------------------------------------
# Report export
# ---------------------------------------------------------------------------

def report_to_json(report: MetricReport) -> str:
    payload = {
        "aggregate": {f: getattr(report, f) for f in METRIC_FIELDS},
        "std": dict(report.stds),
        "per_image": [asdict(row) for row in report.per_image],
    }
    return json.dumps(payload, indent=2) + "\n"


def report_to_csv(report: MetricReport) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(("source_id",) + METRIC_FIELDS)
    for row in report.per_image:
        writer.writerow([row.source_id] + [f"{getattr(row, f):.17g}" for f in METRIC_FIELDS])
    return out.getvalue()


def write_report(report: MetricReport, json_path: str | Path, csv_path: str | Path) -> None:
    Path(json_path).write_text(report_to_json(report), encoding="ascii")
    Path(csv_path).write_text(report_to_csv(report), encoding="ascii")
