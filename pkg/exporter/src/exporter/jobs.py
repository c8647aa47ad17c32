"""Export job plumbing: frame lists, prompt lists, manifest upkeep."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger("exporter")


@dataclass
class Frame:
    frame_id: str
    image_path: Path


@dataclass
class JobResult:
    done: list[str] = field(default_factory=list)
    failed: list[tuple[str, str]] = field(default_factory=list)  # (frame_id, reason)


def parse_frames(path):
    """Frame list: tab-separated `frame_id<TAB>image_path` lines, '#'
    comments; relative image paths resolve against the list's directory."""
    base = Path(path).parent
    frames = []
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{ln}: expected frame_id<TAB>image_path")
            frames.append(Frame(parts[0], base / parts[1]))
    return frames


def parse_prompts(path):
    """Prompt list written by the pipeline's dry-run mode: lines of
    `frame_id<TAB>region_id<TAB>x,y;x,y;...`. Returns
    [(frame_id, region_id, [(x, y), ...])]."""
    out = []
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{ln}: expected 3 tab-separated fields")
            pts = [tuple(int(v) for v in p.split(",")) for p in parts[2].split(";")]
            out.append((parts[0], int(parts[1]), pts))
    return out


def run_per_frame(frames, fn, result: JobResult):
    """Apply fn to each frame; failures are recorded and the job continues."""
    for frame in frames:
        try:
            fn(frame)
            result.done.append(frame.frame_id)
        except Exception as exc:
            log.warning("frame %s failed: %s", frame.frame_id, exc)
            result.failed.append((frame.frame_id, str(exc)))
    return result


# ---------------------------------------------------------------------------
# manifest: tab-separated frame_id/depth/tokens/scores_dir rows, '#' comments

def _read_manifest(path):
    comments, rows = [], {}
    if path.exists():
        for line in path.read_text().splitlines():
            if line.startswith("#"):
                comments.append(line)
            elif line.strip():
                fid = line.split("\t", 1)[0]
                rows[fid] = line
    return comments, rows


def update_manifest(out_dir, frame_ids, dim=None):
    """Merge rows for frame_ids into out_dir/manifest.tsv, keeping rows of
    other frames. Paths are relative to the manifest. dim, when given, is
    recorded as a comment line."""
    out_dir = Path(out_dir)
    path = out_dir / "manifest.tsv"
    comments, rows = _read_manifest(path)
    if dim is not None:
        comments = [c for c in comments if not c.startswith("# dim=")]
        comments.append(f"# dim={dim}")
    for fid in frame_ids:
        rows[fid] = f"{fid}\tdepth/{fid}.tns\ttokens/{fid}.tns\tscores"
    lines = comments + [rows[fid] for fid in sorted(rows)]
    tmp = path.with_suffix(".tsv.tmp")
    tmp.write_text("\n".join(lines) + "\n")
    tmp.replace(path)
    return path


def write_failures(out_dir, result: JobResult):
    if result.failed:
        path = Path(out_dir) / "errors.txt"
        with open(path, "a") as fh:
            for fid, reason in result.failed:
                fh.write(f"{fid}\t{reason}\n")
