"""Per-class IoU / mIoU with micro accumulation across frames.

Intersections and unions are summed over all frames before division, so a
class missing from one frame does not zero out its dataset score; classes
absent from the entire evaluation set are excluded from mIoU by default.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class IoUAccumulator:
    intersection: dict = field(default_factory=dict)  # class_id -> pixel count
    union: dict = field(default_factory=dict)
    frames: int = 0

    def merge(self, other):
        """Combine two partial accumulations (for parallel evaluation)."""
        out = IoUAccumulator(
            intersection=dict(self.intersection),
            union=dict(self.union),
            frames=self.frames + other.frames,
        )
        for c, v in other.intersection.items():
            out.intersection[c] = out.intersection.get(c, 0) + v
        for c, v in other.union.items():
            out.union[c] = out.union.get(c, 0) + v
        return out


@dataclass
class IoUReport:
    per_class: dict            # class_id -> (intersection, union, iou or None)
    miou: float
    frames: int


def accumulate(pred, gt, acc: IoUAccumulator | None = None):
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    if acc is None:
        acc = IoUAccumulator()
    for c in np.union1d(np.unique(pred), np.unique(gt)).tolist():
        c = int(c)
        p = pred == c
        g = gt == c
        acc.intersection[c] = acc.intersection.get(c, 0) + int((p & g).sum())
        acc.union[c] = acc.union.get(c, 0) + int((p | g).sum())
    acc.frames += 1
    return acc


def finalize(acc: IoUAccumulator, include_absent=False, class_ids=None):
    """IoU = I/U per class with U > 0. Classes never seen anywhere are
    excluded from mIoU unless include_absent (then scored 0.0 and the
    universe must be given via class_ids)."""
    if acc.frames < 1:
        raise ValueError("no frames accumulated")
    universe = sorted(set(acc.union) | set(class_ids or []))
    per_class = {}
    included = []
    for c in universe:
        i = acc.intersection.get(c, 0)
        u = acc.union.get(c, 0)
        if u > 0:
            iou = i / u
            per_class[c] = (i, u, iou)
            included.append(iou)
        else:
            per_class[c] = (i, u, None)
            if include_absent:
                included.append(0.0)
    miou = float(np.mean(included)) if included else 0.0
    return IoUReport(per_class=per_class, miou=miou, frames=acc.frames)


def render_report(report: IoUReport, names=None):
    """Aligned plain-text table plus machine-readable key=value lines."""
    names = names or {}
    lines = []
    header = f"{'class':>6}  {'name':<24} {'I':>10} {'U':>10} {'IoU':>8}"
    lines.append(header)
    lines.append("-" * len(header))
    for c, (i, u, iou) in sorted(report.per_class.items()):
        iou_s = f"{iou:8.4f}" if iou is not None else "       -"
        lines.append(f"{c:>6}  {names.get(c, ''):<24} {i:>10} {u:>10} {iou_s}")
    lines.append("-" * len(header))
    lines.append(f"mIoU = {report.miou:.4f} over {report.frames} frame(s)")
    lines.append("")
    for c, (_, _, iou) in sorted(report.per_class.items()):
        if iou is not None:
            lines.append(f"iou.{c}={iou:.6f}")
    lines.append(f"miou={report.miou:.6f}")
    return "\n".join(lines)
