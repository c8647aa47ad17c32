"""Depth-guided region proposal and interior point-prompt extraction.

The proposal operator composes K-means depth strata, Canny depth edges,
an Otsu near/far split (used to order regions near-first), and a
marker-controlled watershed on the depth-gradient topography. Cleaned
regions then yield interior prompts via distance-transform local maxima.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields

import numpy as np

from . import imgproc

log = logging.getLogger("depseg.prompts")


@dataclass
class ProposalConfig:
    kmeans_k: int = 4
    canny_low: float = 40.0
    canny_high: float = 120.0
    open_radius: int = 2
    close_radius: int = 2
    min_region_area_frac: float = 0.002  # fraction of image pixels
    min_distance_frac: float = 0.05      # fraction of min(H, W)
    border_margin: int = 8
    max_points_per_region: int = 3
    marker_erosion: int = 2
    seed: int = 0

    def min_region_area(self, h, w):
        return max(1, int(round(self.min_region_area_frac * h * w)))

    def min_distance(self, h, w):
        return max(1, int(round(self.min_distance_frac * min(h, w))))


def load_config(path, cls=ProposalConfig):
    """Parse a key=value config file ('#' comments); unknown keys ignored
    with a log note, missing keys keep defaults."""
    kwargs = {}
    known = {f.name: f.type for f in fields(cls)}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {line!r}")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in known:
                log.info("ignoring unknown config key %s", key)
                continue
            default = getattr(cls(), key)
            kwargs[key] = type(default)(float(val)) if not isinstance(default, str) else val
    return cls(**kwargs)


def relative_depth(d):
    """Subtract the image-wide median (lower median for even counts).

    Keeps the input's float precision so shifted inputs cancel exactly.
    """
    d = np.asarray(d)
    if d.dtype not in (np.float32, np.float64):
        d = d.astype(np.float32)
    if not np.isfinite(d).all():
        raise ValueError("depth map contains NaN/Inf")
    flat = np.sort(d.ravel())
    median = flat[(flat.size - 1) // 2]
    return d - median


def _normalize_u8(values):
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        return np.zeros(values.shape, dtype=np.float64)
    return (values.astype(np.float64) - lo) / (hi - lo) * 255.0


def _absorb_by_depth(basins, d_rel):
    """Snap watershed-line pixels (and one-pixel boundary slivers) to the
    adjacent basin whose mean depth is closest to the pixel's own depth.

    One simultaneous pass over the original labels; the current label wins
    depth ties, then the smaller label id.
    """
    h, w = basins.shape
    ids = np.unique(basins[basins > 0])
    if ids.size == 0:
        return basins
    means = np.zeros(int(ids.max()) + 1)
    for rid in ids.tolist():
        means[rid] = d_rel[basins == rid].mean()

    def shifted(dy, dx):
        out = np.zeros_like(basins)
        ys = slice(max(dy, 0), h + min(dy, 0))
        xs = slice(max(dx, 0), w + min(dx, 0))
        ys_src = slice(max(-dy, 0), h + min(-dy, 0))
        xs_src = slice(max(-dx, 0), w + min(-dx, 0))
        out[ys, xs] = basins[ys_src, xs_src]
        return out

    d = np.asarray(d_rel, dtype=np.float64)
    candidates = [basins] + [shifted(dy, dx) for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1))]
    best_label = np.zeros_like(basins)
    best_diff = np.full((h, w), np.inf)
    for cand in candidates:
        diff = np.where(cand > 0, np.abs(d - means[cand]), np.inf)
        better = diff < best_diff
        better |= (diff == best_diff) & (best_label > 0) & (cand > 0) & (cand < best_label) \
            & (basins != best_label)
        best_diff = np.where(better, diff, best_diff)
        best_label = np.where(better, cand, best_label)
    return np.where(best_label > 0, best_label, basins)


def propose_regions(d_rel, rgb, cfg: ProposalConfig):
    """Depth-driven region proposals as an int32 label image.

    Strata interiors (eroded away from depth edges) seed a watershed over
    the depth-gradient magnitude; surviving basins are relabeled near-first
    using the Otsu near/far split of the normalized depth histogram.
    RGB is accepted for interface symmetry but not consulted.
    """
    d_rel = np.asarray(d_rel)
    if d_rel.dtype not in (np.float32, np.float64):
        d_rel = d_rel.astype(np.float32)
    h, w = d_rel.shape
    norm = _normalize_u8(d_rel)

    distinct = np.unique(d_rel.ravel()).size
    if distinct == 1:
        return np.ones((h, w), dtype=np.int32)
    k = min(cfg.kmeans_k, distinct)

    assign, _ = imgproc.kmeans_scalar(d_rel.ravel(), k, seed=cfg.seed)
    strata = assign.reshape(h, w)

    edges = imgproc.canny(norm, cfg.canny_low, cfg.canny_high)
    edge_zone = imgproc.morph_dilate(edges, 1)

    markers = np.zeros((h, w), dtype=np.int32)
    next_id = 1
    for s in range(k):
        stratum = strata == s
        core = imgproc.morph_erode(stratum & ~edge_zone, cfg.marker_erosion)
        if not core.any():
            core = stratum & ~edge_zone
        if not core.any():
            core = stratum
        comp = imgproc.connected_components(core, connectivity=4)
        ncomp = comp.max()
        markers[comp > 0] = comp[comp > 0] + (next_id - 1)
        next_id += int(ncomp)
    if next_id == 1:
        return np.ones((h, w), dtype=np.int32)

    topo = imgproc.gradient_magnitude(d_rel)
    basins = imgproc.watershed(topo, markers)
    basins = _absorb_by_depth(basins, d_rel)

    # drop small basins, then order survivors near-first
    min_area = cfg.min_region_area(h, w)
    ids, counts = np.unique(basins[basins > 0], return_counts=True)
    keep = ids[counts >= min_area]
    if keep.size == 0:
        return np.zeros((h, w), dtype=np.int32)

    hist = np.bincount(np.clip(norm.astype(np.int64), 0, 255).ravel(), minlength=256)
    near_thresh = imgproc.otsu_threshold(hist)
    order = []
    for rid in keep.tolist():
        mean_norm = float(norm[basins == rid].mean())
        order.append((0 if mean_norm <= near_thresh else 1, mean_norm, rid))
    order.sort()
    out = np.zeros((h, w), dtype=np.int32)
    for new_id, (_, _, rid) in enumerate(order, start=1):
        out[basins == rid] = new_id
    return out


def clean_region(mask, cfg: ProposalConfig):
    """Morphological open then close; empty result allowed."""
    opened = imgproc.morph_open(mask, cfg.open_radius)
    return imgproc.morph_close(opened, cfg.close_radius)


def propose_points(region, cfg: ProposalConfig):
    """Interior prompts: distance-transform local maxima of a region mask.
    Returns (x, y) tuples, strictly inside the region."""
    region = np.asarray(region, dtype=bool)
    if not region.any():
        return []
    h, w = region.shape
    dist = imgproc.distance_transform(region)
    return imgproc.local_maxima(
        dist,
        min_distance=cfg.min_distance(h, w),
        border_margin=cfg.border_margin,
        max_points=cfg.max_points_per_region,
    )


def propose_prompts(d_rel, rgb, cfg: ProposalConfig):
    """Full path: regions -> cleaned regions -> per-region prompt points.

    Returns a list of (region_id, points) pairs; regions yielding no points
    are dropped.
    """
    labels = propose_regions(d_rel, rgb, cfg)
    out = []
    for rid in range(1, int(labels.max()) + 1):
        cleaned = clean_region(labels == rid, cfg)
        pts = propose_points(cleaned, cfg)
        if pts:
            out.append((rid, pts))
    return out
