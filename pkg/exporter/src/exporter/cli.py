"""Export CLI: run the frozen backbones over dataset frames and write
tensor files plus the manifest the segmentation pipeline replays.

Two-pass score workflow: the pipeline's `segment --emit-prompts` dry run
produces the prompt list, `export-scores` fills the score cache keyed by
point hash, then segmentation is rerun against the cache.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import jobs, models, pointhash, tensor_file

log = logging.getLogger("exporter")


def _load_rgb(path):
    from PIL import Image

    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"))


def _prepare(out, sub):
    d = Path(out) / sub
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_export_depth(args):
    frames = jobs.parse_frames(args.frames)
    run = models.load_depth_model(args.model) if args.model else models.load_depth_model()
    depth_dir = _prepare(args.out, "depth")
    result = jobs.JobResult()

    def one(frame):
        rgb = _load_rgb(frame.image_path)
        depth = np.asarray(run(rgb), dtype=np.float32)
        if depth.shape != rgb.shape[:2]:
            raise ValueError(f"depth shape {depth.shape} != frame {rgb.shape[:2]}")
        tensor_file.write(depth, depth_dir / f"{frame.frame_id}.tns")

    jobs.run_per_frame(frames, one, result)
    jobs.update_manifest(args.out, result.done)
    jobs.write_failures(args.out, result)
    print(f"exported depth for {len(result.done)}/{len(frames)} frame(s)")
    return 1 if result.failed else 0


def cmd_export_tokens(args):
    frames = jobs.parse_frames(args.frames)
    run = models.load_encoder_model(args.model) if args.model else models.load_encoder_model()
    tokens_dir = _prepare(args.out, "tokens")
    result = jobs.JobResult()
    dims = set()

    def one(frame):
        rgb = _load_rgb(frame.image_path)
        grid = np.asarray(run(rgb), dtype=np.float32)
        if grid.ndim != 3:
            raise ValueError(f"token grid must be rank 3, got {grid.ndim}")
        dims.add(grid.shape[2])
        tensor_file.write(grid, tokens_dir / f"{frame.frame_id}.tns")

    jobs.run_per_frame(frames, one, result)
    jobs.update_manifest(args.out, result.done,
                         dim=dims.pop() if len(dims) == 1 else None)
    jobs.write_failures(args.out, result)
    print(f"exported tokens for {len(result.done)}/{len(frames)} frame(s)")
    return 1 if result.failed else 0


def cmd_export_scores(args):
    frames = {f.frame_id: f for f in jobs.parse_frames(args.frames)}
    prompts = jobs.parse_prompts(args.prompts)
    run = models.load_segmenter_model(args.model) if args.model else models.load_segmenter_model()
    scores_dir = _prepare(args.out, "scores")
    n_done, failed = 0, []
    for fid, rid, pts in prompts:
        try:
            frame = frames[fid]
        except KeyError:
            failed.append((f"{fid}/{rid}", "frame not in frame list"))
            continue
        try:
            rgb = _load_rgb(frame.image_path)
            scores = np.asarray(run(rgb, pts), dtype=np.float32)
            if scores.shape != rgb.shape[:2]:
                raise ValueError(f"score shape {scores.shape} != frame {rgb.shape[:2]}")
            tensor_file.write(scores, scores_dir / f"{pointhash.point_hash(pts)}.tns")
            n_done += 1
        except Exception as exc:
            log.warning("prompts %s/%s failed: %s", fid, rid, exc)
            failed.append((f"{fid}/{rid}", str(exc)))
    if failed:
        with open(Path(args.out) / "errors.txt", "a") as fh:
            for key, reason in failed:
                fh.write(f"{key}\t{reason}\n")
    print(f"exported {n_done}/{len(prompts)} score map(s)")
    return 1 if failed else 0


def build_parser():
    p = argparse.ArgumentParser(prog="depseg-export",
                                description="Export model outputs as tensor files")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--frames", required=True,
                        help="tab-separated frame_id/image_path list")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--model", help="model identifier override")

    d = sub.add_parser("export-depth", parents=[common],
                       help="write one float32 HxW depth tensor per frame")
    d.set_defaults(fn=cmd_export_depth)

    t = sub.add_parser("export-tokens", parents=[common],
                       help="write one float32 H'xW'xD token grid per frame")
    t.set_defaults(fn=cmd_export_tokens)

    s = sub.add_parser("export-scores", parents=[common],
                       help="write score maps named by prompt point hash")
    s.add_argument("--prompts", required=True,
                   help="prompt list from the pipeline's --emit-prompts run")
    s.set_defaults(fn=cmd_export_scores)
    return p


def main(argv=None):
    logging.basicConfig(level=os.environ.get("DEPSEG_LOG", "WARNING"))
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
