"""Score-map thresholding, mask refinement, and overlap-resolving merges.

Overlaps are resolved small-area-first: masks are sorted by ascending area
(ties by input index) and each pixel goes to the first mask that covers it,
which preserves small objects sitting on top of large ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import imgproc


@dataclass
class MaskPipelineConfig:
    score_threshold: float = 0.0   # logit convention: positive = foreground
    open_radius: int = 1
    min_mask_area: int = 64        # at 480x854; scaled by image size
    connectivity: int = 8

    def scaled_min_area(self, h, w):
        return max(1, int(round(self.min_mask_area * (h * w) / (480 * 854))))


@dataclass
class RefinedMaskSet:
    masks: list          # list of (bool H x W mask, area)
    provenance: list     # source merged-map label per mask


def score_to_mask(scores, cfg: MaskPipelineConfig):
    """Pixel true iff score > threshold."""
    scores = np.asarray(scores)
    if not np.isfinite(scores).all():
        raise ValueError("score map contains NaN/Inf")
    return scores > cfg.score_threshold


def refine_masks(raw, cfg: MaskPipelineConfig):
    """Open each mask, drop those below the minimum area; order preserved."""
    out = []
    for mask in raw:
        h, w = mask.shape
        opened = imgproc.morph_open(mask, cfg.open_radius)
        if opened.sum() >= cfg.scaled_min_area(h, w):
            out.append(opened)
    return out


def _area_order(masks):
    areas = [int(np.asarray(m).sum()) for m in masks]
    return sorted(range(len(masks)), key=lambda i: (areas[i], i)), areas


def priority_merge(masks):
    """Merge masks into a label map: ascending-area sort, each pixel takes
    the 1-based rank of the smallest covering mask; uncovered pixels 0."""
    if not masks:
        raise ValueError("need at least one mask")
    shape = masks[0].shape
    if any(m.shape != shape for m in masks):
        raise ValueError("all masks must share a shape")
    order, _ = _area_order(masks)
    out = np.zeros(shape, dtype=np.int32)
    for rank, i in enumerate(order, start=1):
        sel = masks[i] & (out == 0)
        out[sel] = rank
    return out


def decompose(labels, cfg: MaskPipelineConfig):
    """Split each positive label of a merged map into connected components;
    every component becomes one mask. Masks tile the positive support."""
    labels = np.asarray(labels)
    masks, provenance = [], []
    for lid in range(1, int(labels.max()) + 1):
        support = labels == lid
        if not support.any():
            continue
        comp = imgproc.connected_components(support, connectivity=cfg.connectivity)
        for cid in range(1, int(comp.max()) + 1):
            m = comp == cid
            masks.append((m, int(m.sum())))
            provenance.append(lid)
    return RefinedMaskSet(masks=masks, provenance=provenance)


def final_merge(labeled, shape=None):
    """Small-area-first class merge: iterate masks by ascending area (ties
    by input index); each mask writes its class only to still-unlabeled
    pixels. Untouched pixels stay background (0). Returns a u16 label map."""
    if not labeled and shape is None:
        raise ValueError("empty input needs an explicit shape")
    if shape is None:
        shape = labeled[0][0].shape
    masks = [m for m, _ in labeled]
    order, _ = _area_order(masks) if masks else ([], [])
    out = np.zeros(shape, dtype=np.uint16)
    claimed = np.zeros(shape, dtype=bool)
    for i in order:
        mask, class_id = labeled[i]
        sel = mask & ~claimed
        out[sel] = class_id
        claimed |= mask
    return out
