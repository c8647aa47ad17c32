"""Sources of depth maps, score maps, and token grids.

Two interchangeable implementations: an oracle backend that replays tensors
exported offline by the model-exporter scripts, and a synthetic backend that
renders parametric scenes so the whole pipeline can run (and be tested)
without any external files or model runtimes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import imgproc, tensor_io

SYNTH_MAGIC = "DEPSEG-SYNTH"


class MissingFrameError(KeyError):
    pass


class ScoreCacheMissError(FileNotFoundError):
    """Score map not in the cache; carries the point hash so the exporter
    can be re-run for exactly this prompt set."""

    def __init__(self, frame_id, point_hash, path):
        super().__init__(f"frame {frame_id}: no score map for points {point_hash} ({path})")
        self.frame_id = frame_id
        self.point_hash = point_hash


def canonical_points(points):
    """Points sorted lexicographically as (x, y) integer tuples."""
    return sorted((int(x), int(y)) for x, y in points)


def point_hash(points):
    """First 16 hex chars of SHA-256 over "x1,y1;x2,y2;..." with the points
    in canonical order. Shared with the exporter's score-map filenames."""
    canon = canonical_points(points)
    key = ";".join(f"{x},{y}" for x, y in canon)
    return hashlib.sha256(key.encode("ascii")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# oracle backend: precomputed tensors on disk

@dataclass
class ManifestEntry:
    depth_path: Path
    tokens_path: Path
    scores_dir: Path


def parse_manifest(path):
    """Tab-separated lines: frame_id, depth_path, tokens_path, scores_dir.
    Relative paths resolve against the manifest's directory."""
    base = Path(path).parent
    entries: dict[str, ManifestEntry] = {}
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4:
                raise ValueError(f"{path}:{ln}: expected 4 tab-separated fields")
            fid, depth, tokens, scores = parts
            entries[fid] = ManifestEntry(
                base / depth, base / tokens, base / scores
            )
    return entries


class OracleBackend:
    """Replays tensors exported by the model-exporter scripts."""

    def __init__(self, manifest_path):
        self.entries = parse_manifest(manifest_path)

    @property
    def frame_ids(self):
        return list(self.entries)

    def _entry(self, frame_id):
        try:
            return self.entries[frame_id]
        except KeyError:
            raise MissingFrameError(f"frame {frame_id!r} not in manifest") from None

    def depth_of(self, frame_id):
        return tensor_io.read_tensor(self._entry(frame_id).depth_path).astype(np.float32)

    def token_grid_of(self, frame_id):
        t = tensor_io.read_tensor(self._entry(frame_id).tokens_path)
        if t.ndim != 3:
            raise ValueError(f"token grid for {frame_id} must be rank 3, got {t.ndim}")
        return t.astype(np.float32)

    def score_map_for(self, frame_id, points):
        if not points:
            raise ValueError("need at least one prompt point")
        h = point_hash(points)
        path = self._entry(frame_id).scores_dir / f"{h}.tns"
        if not path.exists():
            raise ScoreCacheMissError(frame_id, h, path)
        return tensor_io.read_tensor(path).astype(np.float32)

    def rgb_of(self, frame_id):
        return None


# ---------------------------------------------------------------------------
# synthetic backend: parametric scenes

@dataclass
class SceneSpec:
    frame_id: str
    seed: int
    n_objects: int = 3
    width: int = 128
    height: int = 96
    dim: int = 16
    patch: int = 8
    noise: float = 0.1


@dataclass
class SyntheticScene:
    spec: SceneSpec
    depth: np.ndarray
    rgb: np.ndarray
    gt: np.ndarray          # u16 label map, 0 = background
    tokens: np.ndarray      # H' x W' x D


def class_vector(class_id, dim, bank_seed=1234):
    """Fixed random unit vector per class id, shared across scenes."""
    rng = np.random.default_rng(bank_seed * 100003 + class_id)
    v = rng.standard_normal(dim)
    return (v / np.linalg.norm(v)).astype(np.float32)


def generate_scene(spec: SceneSpec) -> SyntheticScene:
    """Background plane plus n_objects disjoint disks/bars at distinct
    depths; object i carries class id i+1. Deterministic given the spec."""
    rng = np.random.default_rng(spec.seed)
    h, w = spec.height, spec.width
    gt = np.zeros((h, w), dtype=np.uint16)
    depth = np.full((h, w), rng.uniform(0.75, 0.9), dtype=np.float32)

    margin = 14
    placed = []  # (cy, cx, extent)
    yy, xx = np.mgrid[0:h, 0:w]
    for i in range(spec.n_objects):
        obj_depth = 0.12 + 0.13 * i + rng.uniform(0, 0.04)
        for _ in range(200):
            cy = rng.integers(margin + 12, h - margin - 12)
            cx = rng.integers(margin + 12, w - margin - 12)
            kind = rng.integers(0, 2)
            if kind == 0:
                r = int(rng.integers(9, 15))
                extent = r
                shape = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
            else:
                ry = int(rng.integers(6, 10))
                rx = int(rng.integers(11, 19))
                extent = max(ry, rx)
                shape = (np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)
            ok = all(
                np.hypot(cy - py, cx - px) > extent + pe + 7
                for py, px, pe in placed
            )
            if ok:
                placed.append((cy, cx, extent))
                gt[shape] = i + 1
                depth[shape] = obj_depth
                break

    gray = ((1.0 - depth) * 220).astype(np.uint8)
    rgb = np.stack([gray, gray, gray], axis=-1)

    ht, wt = h // spec.patch, w // spec.patch
    # class of a token cell: label with the largest pixel coverage in its block
    coverage = np.stack(
        [
            (gt == c).reshape(ht, spec.patch, wt, spec.patch).mean(axis=(1, 3))
            for c in range(spec.n_objects + 1)
        ]
    )
    # exact coverage ties go to the foreground object, matching the
    # >= 0.5 majority rule used when masks are pooled downstream
    cell_class = coverage.shape[0] - 1 - np.argmax(coverage[::-1], axis=0)
    vectors = np.stack([class_vector(c, spec.dim) for c in range(spec.n_objects + 1)])
    tokens = vectors[cell_class].astype(np.float32)
    noise = rng.standard_normal(tokens.shape).astype(np.float32)
    tokens = tokens + spec.noise * noise / np.sqrt(spec.dim)
    return SyntheticScene(spec, depth, rgb, gt, tokens)


class SyntheticBackend:
    """Deterministic in-memory backend over generated scenes."""

    def __init__(self, specs):
        self.specs = {s.frame_id: s for s in specs}
        self._cache: dict[str, SyntheticScene] = {}

    @property
    def frame_ids(self):
        return list(self.specs)

    def _scene(self, frame_id) -> SyntheticScene:
        if frame_id not in self._cache:
            if frame_id not in self.specs:
                raise MissingFrameError(f"frame {frame_id!r} not in synthetic manifest")
            self._cache[frame_id] = generate_scene(self.specs[frame_id])
        return self._cache[frame_id]

    def depth_of(self, frame_id):
        return self._scene(frame_id).depth.copy()

    def rgb_of(self, frame_id):
        return self._scene(frame_id).rgb.copy()

    def token_grid_of(self, frame_id):
        return self._scene(frame_id).tokens.copy()

    def ground_truth(self, frame_id):
        return self._scene(frame_id).gt.copy()

    def score_map_for(self, frame_id, points):
        """Smooth bump over the ground-truth object containing the first
        canonical point: > 0.5 exactly on that object's support."""
        if not points:
            raise ValueError("need at least one prompt point")
        scene = self._scene(frame_id)
        x0, y0 = canonical_points(points)[0]
        h, w = scene.gt.shape
        if not (0 <= x0 < w and 0 <= y0 < h):
            raise ValueError(f"point ({x0},{y0}) out of bounds")
        c = int(scene.gt[y0, x0])
        comp = imgproc.connected_components(scene.gt == c, connectivity=8)
        support = comp == comp[y0, x0]
        dist = imgproc.distance_transform(support)
        peak = dist.max()
        scores = np.full((h, w), -0.8, dtype=np.float32)
        if peak > 0:
            scores[support] = 0.6 + 0.4 * (dist[support] / peak)
        else:
            scores[support] = 0.6
        return scores


# ---------------------------------------------------------------------------
# synthetic manifest file

def parse_synthetic_manifest(path):
    """Synthetic scene list: first line DEPSEG-SYNTH, then optional
    `param <name> <value>` lines and `frame <id> <seed> <n_objects>` lines."""
    params = {}
    specs = []
    with open(path) as fh:
        first = fh.readline().strip()
        if first != SYNTH_MAGIC:
            raise ValueError(f"{path}: not a synthetic manifest (missing {SYNTH_MAGIC})")
        for ln, line in enumerate(fh, 2):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if parts[0] == "param" and len(parts) == 3:
                params[parts[1]] = parts[2]
            elif parts[0] == "frame" and len(parts) == 4:
                specs.append(
                    SceneSpec(
                        frame_id=parts[1],
                        seed=int(parts[2]),
                        n_objects=int(parts[3]),
                        width=int(params.get("width", 128)),
                        height=int(params.get("height", 96)),
                        dim=int(params.get("dim", 16)),
                        patch=int(params.get("patch", 8)),
                        noise=float(params.get("noise", 0.1)),
                    )
                )
            else:
                raise ValueError(f"{path}:{ln}: bad line {line!r}")
    return specs


def is_synthetic_manifest(path):
    with open(path) as fh:
        return fh.readline().strip() == SYNTH_MAGIC


def open_backend(manifest_path):
    """Oracle backend for tab-separated manifests, synthetic backend for
    DEPSEG-SYNTH scene lists."""
    if is_synthetic_manifest(manifest_path):
        return SyntheticBackend(parse_synthetic_manifest(manifest_path))
    return OracleBackend(manifest_path)
