"""Evaluation metrics: IoU, nIoU, Pd, Fa, and the ROC threshold sweep.

All counting is exact integer arithmetic; the only floating point is the
final division. The pixel-level formulas are the primary mode; an optional
target-level mode (connected components, centroid distance <= 3 px counts
as a detection) is provided for comparison with detection-style reporting
and is clearly labeled as such.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DcgaError, ShapeError


class UsageError(DcgaError, ValueError):
    pass


@dataclass
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __add__(self, other):
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)

    @property
    def total(self):
        return self.tp + self.fp + self.fn + self.tn


@dataclass
class RocPoint:
    threshold: float
    pd: float
    fa: float


@dataclass
class MetricsReport:
    counts: ConfusionCounts
    iou: float
    niou: float
    pd: float
    fa: float
    n_images: int
    n_pd_undefined: int = 0
    roc: list = field(default_factory=list)

    def lines(self):
        out = [
            ("IoU", self.iou),
            ("nIoU", self.niou),
            ("Pd", self.pd),
            ("Fa_x1e6", self.fa * 1e6),
        ]
        return out

    def as_text(self) -> str:
        rows = [f"{name:<10s} {value:.6f}" for name, value in self.lines()]
        return "\n".join(rows)

    def as_csv(self) -> str:
        rows = ["metric,value"] + [f"{name},{value:.10g}" for name, value in self.lines()]
        return "\n".join(rows) + "\n"


def _check_binary(arr, label):
    u = np.unique(arr)
    if not np.all(np.isin(u, (0, 1))):
        raise UsageError(f"{label} must be binary 0/1 (threshold first), got values {u[:5]}")


def confusion(pred, gt) -> ConfusionCounts:
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeError(f"confusion: shapes {pred.shape} vs {gt.shape}")
    _check_binary(pred, "pred")
    _check_binary(gt, "gt")
    p = pred.astype(bool)
    g = gt.astype(bool)
    tp = int(np.count_nonzero(p & g))
    fp = int(np.count_nonzero(p & ~g))
    fn = int(np.count_nonzero(~p & g))
    tn = int(np.count_nonzero(~p & ~g))
    return ConfusionCounts(tp, fp, fn, tn)


def iou(counts: ConfusionCounts) -> float:
    """TP / (T + P - TP) on aggregate counts; both-empty is defined as 1."""
    union = counts.tp + counts.fp + counts.fn
    if union == 0:
        return 1.0
    return counts.tp / union


def niou(per_image_counts) -> float:
    """Mean per-image IoU over images whose ground truth has >= 1 positive."""
    vals = [iou(c) for c in per_image_counts if c.tp + c.fn > 0]
    if not vals:
        return float("nan")
    return float(np.mean(vals))


def pd(counts: ConfusionCounts) -> float:
    if counts.tp + counts.fn == 0:
        return float("nan")
    return counts.tp / (counts.tp + counts.fn)


def fa(counts: ConfusionCounts, total_pixels: int) -> float:
    return counts.fp / total_pixels


def roc_sweep(prob_maps, gt_masks, thresholds) -> list:
    """Binarize at each threshold (strictly descending), aggregate, emit points."""
    thresholds = list(thresholds)
    if not thresholds:
        raise UsageError("roc_sweep: empty threshold list")
    if any(b >= a for a, b in zip(thresholds, thresholds[1:])):
        raise UsageError("roc_sweep: thresholds must be strictly descending")
    probs = [np.asarray(p) for p in prob_maps]
    gts = [np.asarray(g).astype(np.uint8) for g in gt_masks]
    points = []
    for t in thresholds:
        agg = ConfusionCounts()
        for p, g in zip(probs, gts):
            agg = agg + confusion((p >= t).astype(np.uint8), g)
        points.append(RocPoint(t, pd(agg), fa(agg, agg.total)))
    return points


def roc_csv(points) -> str:
    rows = ["threshold,pd,fa"]
    rows += [f"{p.threshold:.10g},{p.pd:.10g},{p.fa:.10g}" for p in points]
    return "\n".join(rows) + "\n"


def compute_report(pred_masks, gt_masks, roc_probs=None, thresholds=None) -> MetricsReport:
    per_image = [confusion(p, g) for p, g in zip(pred_masks, gt_masks)]
    agg = ConfusionCounts()
    for c in per_image:
        agg = agg + c
    undef = sum(1 for c in per_image if c.tp + c.fn == 0)
    pds = [pd(c) for c in per_image if c.tp + c.fn > 0]
    report = MetricsReport(
        counts=agg,
        iou=iou(agg),
        niou=niou(per_image),
        pd=float(np.mean(pds)) if pds else float("nan"),
        fa=fa(agg, agg.total),
        n_images=len(per_image),
        n_pd_undefined=undef,
    )
    if roc_probs is not None and thresholds is not None:
        report.roc = roc_sweep(roc_probs, gt_masks, thresholds)
    return report


def evaluate_batch(net, samples, threshold=0.5, thresholds=None,
                   batch_size=8) -> MetricsReport:
    """Run the net over samples and score thresholded predictions."""
    preds, gts, probs = [], [], []
    for start in range(0, len(samples), batch_size):
        chunk = samples[start : start + batch_size]
        imgs = np.stack([s.image for s in chunk])[:, None]
        out, _ = net.predict(imgs)
        for s, prob in zip(chunk, out[:, 0]):
            preds.append((prob >= threshold).astype(np.uint8))
            gts.append(s.mask.astype(np.uint8))
            probs.append(prob)
    return compute_report(preds, gts,
                          roc_probs=probs if thresholds is not None else None,
                          thresholds=thresholds)


def target_level_counts(pred, gt, max_dist=3.0):
    """NON-PIXEL mode: detections matched by component centroid distance.

    Returns (detected targets, total targets, false-alarm components).
    Provided for comparison with detection-style reporting only.
    """
    from scipy import ndimage

    gt_lab, n_gt = ndimage.label(np.asarray(gt) > 0)
    pr_lab, n_pr = ndimage.label(np.asarray(pred) > 0)
    gt_cent = ndimage.center_of_mass(gt_lab > 0, gt_lab, range(1, n_gt + 1)) if n_gt else []
    pr_cent = ndimage.center_of_mass(pr_lab > 0, pr_lab, range(1, n_pr + 1)) if n_pr else []
    matched_pred = set()
    detected = 0
    for gc in gt_cent:
        best, best_d = None, None
        for j, pc in enumerate(pr_cent):
            if j in matched_pred:
                continue
            d = float(np.hypot(gc[0] - pc[0], gc[1] - pc[1]))
            if best_d is None or d < best_d:
                best, best_d = j, d
        if best is not None and best_d <= max_dist:
            matched_pred.add(best)
            detected += 1
    false_alarms = n_pr - len(matched_pred)
    return detected, n_gt, false_alarms
