"""Mask classification: top-k cosine template matching plus the 8-D
appearance-statistics baseline matcher."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_TOP_K = 7


def cosine_scores(descriptor, bank):
    """Per-class lists of dot products between a unit descriptor and every
    template (both unit-norm, so dot == cosine)."""
    h = np.asarray(descriptor, dtype=np.float64)
    if h.shape != (bank.dim,):
        raise ValueError(f"descriptor dim {h.shape} != bank dim ({bank.dim},)")
    out = {}
    for c in sorted(bank.classes):
        templates = bank.classes[c]
        if templates:
            out[c] = (np.stack(templates).astype(np.float64) @ h).tolist()
        else:
            out[c] = []
    return out


def topk_aggregate(sims, k):
    """Per class, sum of the min(k, L_c) largest similarities."""
    if k < 1:
        raise ValueError("k must be >= 1")
    out = {}
    for c, vals in sims.items():
        if not vals:
            out[c] = float("-inf")
            continue
        arr = np.sort(np.asarray(vals, dtype=np.float64))[::-1]
        out[c] = float(arr[: min(k, arr.size)].sum())
    return out


def classify(descriptor, bank, k=DEFAULT_TOP_K):
    """Argmax of the top-k aggregated class scores; ties go to the smallest
    class id."""
    if not bank.classes or bank.n_templates() == 0:
        raise ValueError("empty template bank")
    scores = topk_aggregate(cosine_scores(descriptor, bank), k)
    best_c, best_s = None, float("-inf")
    for c in sorted(scores):
        if scores[c] > best_s:
            best_c, best_s = c, scores[c]
    return best_c


# ---------------------------------------------------------------------------
# 8-D baseline descriptor

@dataclass
class BaselineDescriptor:
    values: np.ndarray  # mean RGB (3), std RGB (3), area ratio, aspect ratio

    def normalized(self):
        v = np.asarray(self.values, dtype=np.float64)
        n = np.linalg.norm(v)
        return v / n if n > 0 else v


def baseline_descriptor(rgb, mask):
    """Mean RGB, population-std RGB, mask/image area ratio, and bbox aspect
    ratio of a region; L2-normalized for cosine comparison."""
    rgb = np.asarray(rgb)
    mask = np.asarray(mask, dtype=bool)
    if rgb.shape[:2] != mask.shape:
        raise ValueError("rgb and mask spatial shapes differ")
    if not mask.any():
        raise ValueError("empty mask")
    px = rgb[mask].astype(np.float64)
    mean = px.mean(axis=0)
    std = px.std(axis=0)  # population std
    area_ratio = mask.sum() / mask.size
    ys, xs = np.nonzero(mask)
    bbox_w = xs.max() - xs.min() + 1
    bbox_h = ys.max() - ys.min() + 1
    aspect = bbox_w / bbox_h
    return BaselineDescriptor(
        np.concatenate([mean, std, [area_ratio, aspect]]).astype(np.float64)
    )


def baseline_prototypes(labeled):
    """Per-class mean of baseline descriptors, then L2-normalized.
    ``labeled``: iterable of (class_id, BaselineDescriptor)."""
    sums: dict[int, np.ndarray] = {}
    counts: dict[int, int] = {}
    for c, d in labeled:
        c = int(c)
        sums[c] = sums.get(c, 0) + np.asarray(d.values, dtype=np.float64)
        counts[c] = counts.get(c, 0) + 1
    out = {}
    for c in sorted(sums):
        mean = sums[c] / counts[c]
        n = np.linalg.norm(mean)
        out[c] = BaselineDescriptor(mean / n if n > 0 else mean)
    return out


def baseline_classify(descriptor, prototypes):
    """Nearest prototype by cosine; ties go to the smallest class id."""
    if not prototypes:
        raise ValueError("empty prototype set")
    h = descriptor.normalized()
    best_c, best_s = None, float("-inf")
    for c in sorted(prototypes):
        s = float(h @ prototypes[c].normalized())
        if s > best_s:
            best_c, best_s = c, s
    return best_c
