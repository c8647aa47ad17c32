"""Classical image-processing kernels for region proposal and mask refinement.

All kernels are pure functions over numpy arrays and deterministic given
identical inputs (and seeds where applicable). Masks are boolean H x W
arrays; label images are int32 H x W with 0 meaning unassigned / watershed
line.
"""

from __future__ import annotations

import heapq

import numpy as np
from scipy import ndimage


class DegenerateInputError(ValueError):
    """Input cannot support the requested operation (e.g. k > distinct values)."""


# ---------------------------------------------------------------------------
# scalar k-means

def kmeans_scalar(values, k, seed=0, max_iter=100):
    """Lloyd's k-means on 1-D data with k-means++ seeding.

    Returns (assignments, centers) with centers sorted ascending and
    assignments remapped to the sorted order. Deterministic given seed.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("values must be nonempty")
    if k < 1:
        raise ValueError("k must be >= 1")
    distinct = np.unique(values)
    if k > distinct.size:
        raise DegenerateInputError(
            f"k={k} exceeds {distinct.size} distinct values"
        )
    rng = np.random.default_rng(seed)

    # k-means++ over the distinct values (weighted by multiplicity) keeps the
    # seeding stable under duplicated samples.
    counts = np.array([(values == v).sum() for v in distinct], dtype=np.float64)
    centers = np.empty(k)
    i0 = rng.choice(distinct.size, p=counts / counts.sum())
    centers[0] = distinct[i0]
    closest = (distinct - centers[0]) ** 2
    for j in range(1, k):
        w = closest * counts
        if w.sum() == 0:
            # all remaining mass sits on chosen centers; pick any unused value
            unused = np.setdiff1d(distinct, centers[:j])
            centers[j] = unused[0]
        else:
            idx = rng.choice(distinct.size, p=w / w.sum())
            centers[j] = distinct[idx]
        closest = np.minimum(closest, (distinct - centers[j]) ** 2)

    for _ in range(max_iter):
        d2 = (values[:, None] - centers[None, :]) ** 2
        assign = np.argmin(d2, axis=1)
        new_centers = centers.copy()
        for j in range(k):
            sel = values[assign == j]
            if sel.size:
                new_centers[j] = sel.mean()
        if np.allclose(new_centers, centers, rtol=0, atol=1e-12):
            centers = new_centers
            break
        centers = new_centers

    order = np.argsort(centers, kind="stable")
    centers = centers[order]
    remap = np.empty(k, dtype=np.int64)
    remap[order] = np.arange(k)
    d2 = (values[:, None] - centers[None, :]) ** 2
    assign = np.argmin(d2, axis=1)
    return assign.astype(np.int32), centers.astype(np.float32)


# ---------------------------------------------------------------------------
# Otsu threshold

def otsu_threshold(histogram):
    """Threshold index maximizing between-class variance; split is bins <= t
    vs bins > t. Ties broken toward the lower bin."""
    h = np.asarray(histogram, dtype=np.float64)
    if h.size != 256:
        raise ValueError("histogram must have 256 bins")
    total = h.sum()
    if total <= 0:
        raise ValueError("histogram total must be > 0")
    bins = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(h)
    m0 = np.cumsum(h * bins)
    mean_all = m0[-1] / total
    best_t, best_v = 0, -1.0
    for t in range(256):
        n0 = w0[t]
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            v = 0.0
        else:
            mu0 = m0[t] / n0
            mu1 = (m0[-1] - m0[t]) / n1
            v = n0 * n1 * (mu0 - mu1) ** 2
        if v > best_v + 1e-12:
            best_v, best_t = v, t
    if best_v <= 0:
        # all mass in one bin: return that bin
        return int(np.argmax(h))
    return best_t


# ---------------------------------------------------------------------------
# Canny edge detection

_SOBEL_X = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], dtype=np.float64)
_SOBEL_Y = _SOBEL_X.T


def _sobel(gray):
    gx = ndimage.convolve(gray, _SOBEL_X, mode="nearest")
    gy = ndimage.convolve(gray, _SOBEL_Y, mode="nearest")
    return gx, gy


def gradient_magnitude(gray):
    """Sobel gradient magnitude, used as watershed topography."""
    gx, gy = _sobel(np.asarray(gray, dtype=np.float64))
    return np.hypot(gx, gy)


def canny(gray, low, high, sigma=1.4):
    """Canny edges: Gaussian smooth, Sobel, 8-direction non-max suppression,
    hysteresis. Returns a boolean edge mask."""
    if low < 0 or high < low:
        raise ValueError("need high >= low >= 0")
    gray = np.asarray(gray, dtype=np.float64)
    smoothed = ndimage.gaussian_filter(gray, sigma=sigma, mode="nearest")
    gx, gy = _sobel(smoothed)
    mag = np.hypot(gx, gy)
    if mag.max() == 0:
        return np.zeros(gray.shape, dtype=bool)

    # quantize gradient direction into 4 bins (0, 45, 90, 135 degrees)
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    dbin = np.zeros(gray.shape, dtype=np.int8)
    dbin[(angle >= 22.5) & (angle < 67.5)] = 1
    dbin[(angle >= 67.5) & (angle < 112.5)] = 2
    dbin[(angle >= 112.5) & (angle < 157.5)] = 3

    padded = np.pad(mag, 1, mode="constant")
    offsets = {0: ((0, 1), (0, -1)), 1: ((1, 1), (-1, -1)),
               2: ((1, 0), (-1, 0)), 3: ((1, -1), (-1, 1))}
    nms = np.zeros_like(mag)
    for b, ((dy1, dx1), (dy2, dx2)) in offsets.items():
        sel = dbin == b
        n1 = padded[1 + dy1 : 1 + dy1 + mag.shape[0], 1 + dx1 : 1 + dx1 + mag.shape[1]]
        n2 = padded[1 + dy2 : 1 + dy2 + mag.shape[0], 1 + dx2 : 1 + dx2 + mag.shape[1]]
        keep = sel & (mag >= n1) & (mag >= n2)
        nms[keep] = mag[keep]

    weak = nms >= low
    strong = nms >= high
    if not strong.any():
        return np.zeros(gray.shape, dtype=bool)
    lab, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=int))
    keep_ids = np.unique(lab[strong])
    keep_ids = keep_ids[keep_ids > 0]
    return np.isin(lab, keep_ids)


# ---------------------------------------------------------------------------
# marker-based watershed (priority flood)

_N4 = ((-1, 0), (1, 0), (0, -1), (0, 1))


def watershed(topography, markers):
    """Marker-controlled priority flood with 4-connectivity.

    Pixels are flooded in ascending topography order (ties broken row-major);
    a pixel adjacent to two different basins at assignment time becomes a
    watershed line (label 0). Marker pixels keep their labels.
    """
    topo = np.asarray(topography, dtype=np.float64)
    markers = np.asarray(markers, dtype=np.int32)
    if topo.shape != markers.shape:
        raise ValueError("topography and markers must share shape")
    if not (markers > 0).any():
        raise ValueError("need at least one positive marker")
    h, w = topo.shape
    labels = markers.copy()
    visited = labels > 0  # settled pixels (basin or line)
    heap = []
    ys, xs = np.nonzero(labels > 0)
    for y, x in zip(ys.tolist(), xs.tolist()):
        for dy, dx in _N4:
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w and not visited[ny, nx]:
                heapq.heappush(heap, (topo[ny, nx], ny, nx))
    while heap:
        _, y, x = heapq.heappop(heap)
        if visited[y, x]:
            continue
        neigh = set()
        for dy, dx in _N4:
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w and labels[ny, nx] > 0:
                neigh.add(int(labels[ny, nx]))
        visited[y, x] = True
        if len(neigh) == 1:
            labels[y, x] = neigh.pop()
            for dy, dx in _N4:
                ny, nx = y + dy, x + dx
                if 0 <= ny < h and 0 <= nx < w and not visited[ny, nx]:
                    heapq.heappush(heap, (topo[ny, nx], ny, nx))
        # len(neigh) != 1 leaves the pixel at 0: a watershed line. Its
        # unlabeled neighbors stay queued via other basin fronts.
        elif len(neigh) >= 2:
            labels[y, x] = 0
        else:
            # isolated pop with no labeled neighbor left (stale entry)
            visited[y, x] = False
    return labels


# ---------------------------------------------------------------------------
# morphology

def disk_element(radius):
    """Boolean disk footprint: center distance <= radius."""
    r = int(radius)
    if r < 0:
        raise ValueError("radius must be >= 0")
    yy, xx = np.mgrid[-r : r + 1, -r : r + 1]
    return (yy * yy + xx * xx) <= r * r


def morph_erode(mask, radius):
    if radius == 0:
        return np.asarray(mask, dtype=bool).copy()
    return ndimage.binary_erosion(mask, structure=disk_element(radius), border_value=0)


def morph_dilate(mask, radius):
    if radius == 0:
        return np.asarray(mask, dtype=bool).copy()
    return ndimage.binary_dilation(mask, structure=disk_element(radius), border_value=0)


def morph_open(mask, radius):
    """Opening: erosion then dilation with a disk. Radius 0 is identity."""
    return morph_dilate(morph_erode(mask, radius), radius)


def morph_close(mask, radius):
    """Closing: dilation then erosion with a disk. Radius 0 is identity."""
    return morph_erode(morph_dilate(mask, radius), radius)


# ---------------------------------------------------------------------------
# Euclidean distance transform

def distance_transform(mask):
    """Euclidean distance from each true pixel to the nearest false pixel,
    with the image border treated as false. False pixels map to 0."""
    mask = np.asarray(mask, dtype=bool)
    padded = np.pad(mask, 1, mode="constant", constant_values=False)
    dist = ndimage.distance_transform_edt(padded)
    return dist[1:-1, 1:-1].astype(np.float32)


# ---------------------------------------------------------------------------
# local maxima with greedy suppression

def local_maxima(dist, min_distance, border_margin=0, max_points=None):
    """Greedy peak picking on a distance map.

    Scans positive pixels in descending value (row-major on ties), keeping a
    pixel if it lies at Euclidean distance >= min_distance from every kept
    point and outside the border margin. Returns (x, y) tuples.
    """
    if min_distance < 1:
        raise ValueError("min_distance must be >= 1")
    dist = np.asarray(dist, dtype=np.float64)
    h, w = dist.shape
    m = int(border_margin)
    cand = dist > 0
    if m > 0:
        cand[:m, :] = False
        cand[h - m :, :] = False
        cand[:, :m] = False
        cand[:, w - m :] = False
    ys, xs = np.nonzero(cand)
    if ys.size == 0:
        return []
    vals = dist[ys, xs]
    # descending value, then row-major (y, x) ascending
    order = np.lexsort((xs, ys, -vals))
    ys, xs = ys[order], xs[order]
    kept_y: list[int] = []
    kept_x: list[int] = []
    min_d2 = float(min_distance) ** 2
    limit = max_points if max_points is not None else np.inf
    ka = np.empty((0, 2))
    for y, x in zip(ys.tolist(), xs.tolist()):
        if len(kept_y) >= limit:
            break
        if ka.size:
            d2 = (ka[:, 0] - y) ** 2 + (ka[:, 1] - x) ** 2
            if (d2 < min_d2).any():
                continue
        kept_y.append(y)
        kept_x.append(x)
        ka = np.column_stack([kept_y, kept_x]).astype(np.float64)
    return [(x, y) for y, x in zip(kept_y, kept_x)]


# ---------------------------------------------------------------------------
# connected components

def connected_components(mask, connectivity=8):
    """Label maximal connected regions 1..K in first-encounter row-major
    order. Returns an int32 label image."""
    if connectivity not in (4, 8):
        raise ValueError("connectivity must be 4 or 8")
    mask = np.asarray(mask, dtype=bool)
    structure = (np.ones((3, 3), dtype=int) if connectivity == 8
                 else np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]]))
    lab, n = ndimage.label(mask, structure=structure)
    if n == 0:
        return lab.astype(np.int32)
    # renumber by first row-major appearance
    flat = lab.ravel()
    first = np.full(n + 1, flat.size, dtype=np.int64)
    idx = np.nonzero(flat)[0]
    np.minimum.at(first, flat[idx], idx)
    order = np.argsort(first[1:], kind="stable")
    remap = np.zeros(n + 1, dtype=np.int32)
    remap[1 + order] = np.arange(1, n + 1)
    return remap[lab]
