"""Independent brute-force reference implementations used to cross-check the
library kernels. Deliberately naive: plain loops, no shared code with the
package internals."""

import math
from fractions import Fraction

import numpy as np


def brute_distance_transform(mask):
    """All-pairs nearest-false distance, border treated as false."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    false_pts = [(-1, x) for x in range(-1, w + 1)] + [(h, x) for x in range(-1, w + 1)]
    false_pts += [(y, -1) for y in range(h)] + [(y, w) for y in range(h)]
    for y in range(h):
        for x in range(w):
            if not mask[y, x]:
                false_pts.append((y, x))
    fp = np.array(false_pts, dtype=np.float64)
    out = np.zeros((h, w), dtype=np.float64)
    ys, xs = np.nonzero(mask)
    for y, x in zip(ys.tolist(), xs.tolist()):
        d2 = (fp[:, 0] - y) ** 2 + (fp[:, 1] - x) ** 2
        out[y, x] = math.sqrt(d2.min())
    return out


def exhaustive_otsu(histogram):
    """Exact-arithmetic argmax of between-class variance over all 256
    split points (bins <= t vs > t); lower bin wins ties."""
    h = [int(v) for v in histogram]
    total = sum(h)
    m_total = sum(i * v for i, v in enumerate(h))
    best_t, best_v = None, Fraction(-1)
    w0 = 0
    m0 = 0
    for t in range(256):
        w0 += h[t]
        m0 += t * h[t]
        w1 = total - w0
        if w0 == 0 or w1 == 0:
            v = Fraction(0)
        else:
            # w0*w1*(mu0-mu1)^2 == (m0*w1 - (m_total-m0)*w0)^2 / (w0*w1)
            num = m0 * w1 - (m_total - m0) * w0
            v = Fraction(num * num, w0 * w1)
        if v > best_v:
            best_v, best_t = v, t
    if best_v == 0:
        return max(range(256), key=lambda i: h[i])
    return best_t


def flood_watershed(topo, markers):
    """Naive marker flood: repeatedly settle the frontier pixel with the
    smallest (height, y, x); a pixel seeing two basins becomes a line."""
    topo = np.asarray(topo, dtype=np.float64)
    labels = np.asarray(markers, dtype=np.int64).copy()
    h, w = topo.shape
    settled = labels > 0
    n4 = ((-1, 0), (1, 0), (0, -1), (0, 1))
    while True:
        best = None
        for y in range(h):
            for x in range(w):
                if settled[y, x]:
                    continue
                adjacent = False
                for dy, dx in n4:
                    ny, nx = y + dy, x + dx
                    if 0 <= ny < h and 0 <= nx < w and labels[ny, nx] > 0:
                        adjacent = True
                        break
                if adjacent:
                    key = (topo[y, x], y, x)
                    if best is None or key < best:
                        best = key
        if best is None:
            break
        _, y, x = best
        neigh = set()
        for dy, dx in n4:
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w and labels[ny, nx] > 0:
                neigh.add(int(labels[ny, nx]))
        settled[y, x] = True
        if len(neigh) == 1:
            labels[y, x] = neigh.pop()
        # >= 2 distinct basins: stays 0 as a watershed line
    return labels


def bfs_components(mask, connectivity=8):
    """Flood-fill labeling in row-major first-encounter order."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int64)
    if connectivity == 8:
        offsets = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1)
                   if (dy, dx) != (0, 0)]
    else:
        offsets = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    next_label = 0
    for y0 in range(h):
        for x0 in range(w):
            if mask[y0, x0] and labels[y0, x0] == 0:
                next_label += 1
                stack = [(y0, x0)]
                labels[y0, x0] = next_label
                while stack:
                    y, x = stack.pop()
                    for dy, dx in offsets:
                        ny, nx = y + dy, x + dx
                        if (0 <= ny < h and 0 <= nx < w and mask[ny, nx]
                                and labels[ny, nx] == 0):
                            labels[ny, nx] = next_label
                            stack.append((ny, nx))
    return labels


def greedy_peaks(dist, min_distance, border_margin=0, max_points=None):
    """Sort positive pixels by descending value (row-major ties), greedily
    keep those far enough from every kept point."""
    dist = np.asarray(dist, dtype=np.float64)
    h, w = dist.shape
    cands = []
    for y in range(h):
        for x in range(w):
            if dist[y, x] <= 0:
                continue
            if (y < border_margin or x < border_margin
                    or y >= h - border_margin or x >= w - border_margin):
                continue
            cands.append((-dist[y, x], y, x))
    cands.sort()
    kept = []
    for _, y, x in cands:
        if max_points is not None and len(kept) >= max_points:
            break
        if all(math.hypot(y - ky, x - kx) >= min_distance for kx, ky in kept):
            kept.append((x, y))
    return kept


def per_pixel_min_area_label(masks):
    """For each pixel, the 1-based ascending-area rank (ties by index) of
    the smallest covering mask; 0 when uncovered."""
    order = sorted(range(len(masks)),
                   key=lambda i: (int(np.sum(masks[i])), i))
    h, w = masks[0].shape
    out = np.zeros((h, w), dtype=np.int64)
    for y in range(h):
        for x in range(w):
            for rank, i in enumerate(order, start=1):
                if masks[i][y, x]:
                    out[y, x] = rank
                    break
    return out


def per_pixel_min_area_class(labeled, shape):
    """Class of the smallest covering mask per pixel (ties by index);
    background 0 when uncovered."""
    order = sorted(range(len(labeled)),
                   key=lambda i: (int(np.sum(labeled[i][0])), i))
    h, w = shape
    out = np.zeros((h, w), dtype=np.int64)
    for y in range(h):
        for x in range(w):
            for i in order:
                if labeled[i][0][y, x]:
                    out[y, x] = labeled[i][1]
                    break
    return out


def sort_and_sum_topk(values, k):
    return sum(sorted(values, reverse=True)[:k]) if values else float("-inf")


def brute_classify(descriptor, bank_classes, k):
    """Exhaustive top-k cosine scorer; smallest class id wins ties."""
    best_c, best_s = None, None
    for c in sorted(bank_classes):
        sims = [float(np.dot(descriptor, t)) for t in bank_classes[c]]
        s = sort_and_sum_topk(sims, k)
        if best_s is None or s > best_s:
            best_c, best_s = c, s
    return best_c


def count_iou(pred, gt):
    """Per-pixel IoU counting over both maps."""
    inter, union = {}, {}
    h, w = pred.shape
    classes = set(int(v) for v in np.unique(pred)) | set(int(v) for v in np.unique(gt))
    for c in classes:
        i = u = 0
        for y in range(h):
            for x in range(w):
                p = pred[y, x] == c
                g = gt[y, x] == c
                if p and g:
                    i += 1
                if p or g:
                    u += 1
        inter[c], union[c] = i, u
    return inter, union
