"""Command-line entry point: register, segment, eval, bank-info, render.

Wires the full pipeline: depth -> relative depth -> region proposals ->
point prompts -> score maps -> refined masks -> template classification ->
small-area-first merge -> label map, plus the evaluation harness.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from . import (
    backends,
    evaluator,
    imgproc,
    mask_pipeline,
    matcher,
    prompt_proposal,
    template_bank,
    tensor_io,
)

log = logging.getLogger("depseg")

_LOG_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING,
               "info": logging.INFO, "debug": logging.DEBUG}


def _setup_logging():
    level = os.environ.get("DEPSEG_LOG", "warn").lower()
    logging.basicConfig(level=_LOG_LEVELS.get(level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


# ---------------------------------------------------------------------------
# palette

def load_palette(path=None):
    """class_id -> (name, (r, g, b)). Defaults to the 13-class laparoscopy
    palette shipped with the package."""
    if path is None:
        ref = resources.files("depseg") / "data" / "cholecseg8k_palette.txt"
        text = ref.read_text()
    else:
        text = Path(path).read_text()
    palette = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise ValueError(f"bad palette line: {line!r}")
        cid = int(parts[0])
        name = parts[1].strip()
        r, g, b = (int(v) for v in parts[2].split())
        palette[cid] = (name, (r, g, b))
    return palette


# ---------------------------------------------------------------------------
# core per-frame pipeline

def segment_frame(backend, frame_id, bank, pcfg, mcfg, k=matcher.DEFAULT_TOP_K,
                  emit_prompts_only=False):
    """Run the full pipeline on one frame.

    Returns (label_map u16, prompts) where prompts is the list of
    (region_id, points). With emit_prompts_only the label map is None.
    """
    depth = backend.depth_of(frame_id)
    d_rel = prompt_proposal.relative_depth(depth)
    rgb = backend.rgb_of(frame_id)
    prompts = prompt_proposal.propose_prompts(d_rel, rgb, pcfg)
    if emit_prompts_only:
        return None, prompts

    raw_masks = []
    for _, points in prompts:
        scores = backend.score_map_for(frame_id, points)
        raw_masks.append(mask_pipeline.score_to_mask(scores, mcfg))
    refined = mask_pipeline.refine_masks(raw_masks, mcfg)
    h, w = depth.shape
    if not refined:
        return np.zeros((h, w), dtype=np.uint16), prompts
    merged = mask_pipeline.priority_merge(refined)
    mask_set = mask_pipeline.decompose(merged, mcfg)

    tokens = backend.token_grid_of(frame_id)
    if tokens.shape[2] != bank.dim:
        raise ValueError(
            f"token dim {tokens.shape[2]} does not match bank dim {bank.dim}"
        )
    h_tok, w_tok = tokens.shape[:2]
    labeled = []
    for mask, area in mask_set.masks:
        dmask = template_bank.downsample_mask(mask, h_tok, w_tok)
        try:
            desc = template_bank.pooled_descriptor(tokens, dmask)
        except template_bank.EmptySupportError:
            continue
        labeled.append((mask, matcher.classify(desc, bank, k)))
    return mask_pipeline.final_merge(labeled, shape=(h, w)), prompts


def render_overlay(rgb, label_map, palette, alpha=0.5):
    """Alpha-blend class colors over the image; background (0) untouched."""
    rgb = np.asarray(rgb, dtype=np.float64)
    out = rgb.copy()
    for cid in np.unique(label_map).tolist():
        cid = int(cid)
        if cid == 0:
            continue
        if cid not in palette:
            raise KeyError(f"class {cid} missing from palette")
        color = np.array(palette[cid][1], dtype=np.float64)
        sel = label_map == cid
        out[sel] = (1 - alpha) * rgb[sel] + alpha * color
    return np.round(out).astype(np.uint8)


def _save_png(image, path):
    from PIL import Image

    Image.fromarray(image).save(path, format="PNG")


# ---------------------------------------------------------------------------
# subcommands

def cmd_register(args):
    backend = backends.open_backend(args.manifest)
    frame_ids = backend.frame_ids
    if not frame_ids:
        raise SystemExit("error: manifest lists no frames")

    def gt_of(fid):
        if args.gt_dir is not None:
            return tensor_io.read_tensor(Path(args.gt_dir) / f"{fid}.tns")
        if hasattr(backend, "ground_truth"):
            return backend.ground_truth(fid)
        raise SystemExit("error: --gt-dir required for oracle manifests")

    frames = ((fid, backend.token_grid_of(fid), gt_of(fid)) for fid in frame_ids)
    bank = template_bank.build_bank(frames)
    template_bank.save_bank(bank, args.out)
    print(f"bank written to {args.out} (dim={bank.dim})")
    for c, n in bank.counts().items():
        print(f"  class {c}: {n} template(s)")
    return 0


def _frame_worker(backend, fid, bank, pcfg, mcfg, args, out_dir, palette):
    label_map, prompts = segment_frame(
        backend, fid, bank, pcfg, mcfg, k=args.k,
        emit_prompts_only=args.emit_prompts,
    )
    if args.emit_prompts:
        lines = []
        for rid, points in prompts:
            pts = ";".join(f"{x},{y}" for x, y in backends.canonical_points(points))
            lines.append(f"{fid}\t{rid}\t{pts}")
        return fid, lines
    tensor_io.write_tensor(label_map, out_dir / f"{fid}.tns")
    if args.overlays:
        rgb = backend.rgb_of(fid)
        if rgb is not None:
            _save_png(render_overlay(rgb, label_map, palette), out_dir / f"{fid}.png")
    return fid, None


def cmd_segment(args):
    backend = backends.open_backend(args.manifest)
    bank = template_bank.load_bank(args.bank)
    if args.frac < 1.0:
        bank = template_bank.subsample_bank(bank, args.frac, seed=args.seed)
    pcfg = (prompt_proposal.load_config(args.config)
            if args.config else prompt_proposal.ProposalConfig())
    pcfg.seed = args.seed
    mcfg = (prompt_proposal.load_config(args.config, mask_pipeline.MaskPipelineConfig)
            if args.config else mask_pipeline.MaskPipelineConfig())
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    palette = load_palette(args.palette)

    failures = []
    prompt_lines = []
    frame_ids = backend.frame_ids

    def run(fid):
        return _frame_worker(backend, fid, bank, pcfg, mcfg, args, out_dir, palette)

    results = []
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            futures = {fid: pool.submit(run, fid) for fid in frame_ids}
            for fid in frame_ids:
                try:
                    results.append(futures[fid].result())
                except Exception as e:  # keep batch alive past one bad frame
                    log.error("frame %s failed: %s", fid, e)
                    failures.append((fid, str(e)))
    else:
        for fid in frame_ids:
            try:
                results.append(run(fid))
            except Exception as e:
                log.error("frame %s failed: %s", fid, e)
                failures.append((fid, str(e)))

    if args.emit_prompts:
        for _, lines in results:
            prompt_lines.extend(lines)
        prompts_path = out_dir / "prompts.txt"
        prompts_path.write_text("\n".join(prompt_lines) + "\n" if prompt_lines else "")
        print(f"prompts for {len(results)} frame(s) written to {prompts_path}")
    else:
        print(f"segmented {len(results)}/{len(frame_ids)} frame(s) into {out_dir}")

    if failures:
        fail_path = out_dir / "failures.txt"
        fail_path.write_text("".join(f"{fid}\t{msg}\n" for fid, msg in failures))
        print(f"{len(failures)} frame(s) failed; see {fail_path}", file=sys.stderr)
        return 1
    return 0


def cmd_eval(args):
    pred_dir, gt_dir = Path(args.pred_dir), Path(args.gt_dir)
    pred_ids = {p.stem for p in pred_dir.glob("*.tns")}
    gt_ids = {p.stem for p in gt_dir.glob("*.tns")}
    common = sorted(pred_ids & gt_ids)
    if not common:
        raise SystemExit("error: no common frame ids between pred and gt dirs")
    missing = sorted((pred_ids | gt_ids) - set(common))
    if missing:
        log.warning("skipping %d unmatched frame(s): %s", len(missing), missing[:5])
    acc = evaluator.IoUAccumulator()
    for fid in common:
        pred = tensor_io.read_tensor(pred_dir / f"{fid}.tns")
        gt = tensor_io.read_tensor(gt_dir / f"{fid}.tns")
        evaluator.accumulate(pred, gt, acc)
    report = evaluator.finalize(acc, include_absent=args.include_absent)
    names = {c: n for c, (n, _) in load_palette(args.palette).items()}
    text = evaluator.render_report(report, names)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return 0


def cmd_bank_info(args):
    bank = template_bank.load_bank(args.bank)
    print(f"dim: {bank.dim}")
    print(f"classes: {len(bank.classes)}")
    print(f"templates: {bank.n_templates()}")
    names = {c: n for c, (n, _) in load_palette(args.palette).items()}
    for c, n in bank.counts().items():
        print(f"  class {c:>3} {names.get(c, ''):<24} {n} template(s)")
    if bank.meta:
        print(f"source frames: {len(bank.meta)}")
    return 0


def cmd_render(args):
    from PIL import Image

    rgb = np.asarray(Image.open(args.image).convert("RGB"))
    label_map = tensor_io.read_tensor(args.labels)
    palette = load_palette(args.palette)
    overlay = render_overlay(rgb, label_map, palette, alpha=args.alpha)
    _save_png(overlay, args.out)
    print(f"overlay written to {args.out}")
    return 0


# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="depseg",
                                description="depth-guided training-free segmentation")
    sub = p.add_subparsers(dest="command", required=True)

    reg = sub.add_parser("register", help="build a template bank from annotated frames")
    reg.add_argument("--manifest", required=True)
    reg.add_argument("--gt-dir", default=None,
                     help="directory of <frame_id>.tns u16 label maps "
                          "(unneeded for synthetic manifests)")
    reg.add_argument("--out", required=True, help="output bank file")

    seg = sub.add_parser("segment", help="segment frames listed in a manifest")
    seg.add_argument("--manifest", required=True)
    seg.add_argument("--bank", required=True)
    seg.add_argument("--config", default=None, help="key=value config file")
    seg.add_argument("--k", type=int, default=matcher.DEFAULT_TOP_K)
    seg.add_argument("--frac", type=float, default=1.0,
                     help="fraction of templates kept per class")
    seg.add_argument("--seed", type=int, default=0)
    seg.add_argument("--out", required=True, help="output directory")
    seg.add_argument("--palette", default=None)
    seg.add_argument("--jobs", type=int, default=1)
    seg.add_argument("--overlays", action="store_true",
                     help="also write overlay PNGs when RGB is available")
    seg.add_argument("--emit-prompts", action="store_true",
                     help="dry run: write prompt points per region and stop")

    ev = sub.add_parser("eval", help="per-class IoU / mIoU of predictions vs gt")
    ev.add_argument("--pred-dir", required=True)
    ev.add_argument("--gt-dir", required=True)
    ev.add_argument("--palette", default=None)
    ev.add_argument("--out", default=None)
    ev.add_argument("--include-absent", action="store_true",
                    help="score never-seen classes as 0 instead of excluding them")

    bi = sub.add_parser("bank-info", help="summarize a bank file")
    bi.add_argument("--bank", required=True)
    bi.add_argument("--palette", default=None)

    rn = sub.add_parser("render", help="overlay a label map on an image")
    rn.add_argument("--image", required=True)
    rn.add_argument("--labels", required=True, help="label map .tns file")
    rn.add_argument("--palette", default=None)
    rn.add_argument("--alpha", type=float, default=0.5)
    rn.add_argument("--out", required=True)

    return p


def main(argv=None):
    _setup_logging()
    args = build_parser().parse_args(argv)
    handlers = {
        "register": cmd_register,
        "segment": cmd_segment,
        "eval": cmd_eval,
        "bank-info": cmd_bank_info,
        "render": cmd_render,
    }
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
