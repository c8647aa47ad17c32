"""Lazy wrappers around the frozen backbone models.

torch/transformers are imported only when a loader is actually called,
so the export CLI and its tests run without a neural runtime. Each
loader returns a plain callable over numpy arrays; tests substitute
deterministic stubs with the same signatures.
"""

from __future__ import annotations

import numpy as np

DEFAULT_DEPTH_MODEL = "depth-anything/Depth-Anything-V2-Small-hf"
DEFAULT_ENCODER_MODEL = "facebook/dinov3-vits16-pretrain-lvd1689m"
DEFAULT_SEGMENTER_MODEL = "facebook/sam2-hiera-small"


def load_depth_model(name=DEFAULT_DEPTH_MODEL):
    """Monocular depth: rgb (H, W, 3) uint8 -> float32 (H, W)."""
    import torch
    from transformers import pipeline

    pipe = pipeline("depth-estimation", model=name,
                    device=0 if torch.cuda.is_available() else -1)

    def run(rgb):
        from PIL import Image

        h, w = rgb.shape[:2]
        with torch.inference_mode():
            out = pipe(Image.fromarray(rgb))
        depth = out["predicted_depth"]
        depth = torch.nn.functional.interpolate(
            depth[None, None].float(), size=(h, w),
            mode="bilinear", align_corners=False,
        )[0, 0]
        return depth.cpu().numpy().astype(np.float32)

    return run


def load_encoder_model(name=DEFAULT_ENCODER_MODEL):
    """Patch encoder: rgb (H, W, 3) uint8 -> float32 (H', W', D)."""
    import torch
    from transformers import AutoImageProcessor, AutoModel

    processor = AutoImageProcessor.from_pretrained(name)
    model = AutoModel.from_pretrained(name).eval()

    def run(rgb):
        inputs = processor(images=rgb, return_tensors="pt")
        with torch.inference_mode():
            out = model(**inputs)
        tokens = out.last_hidden_state[0]
        n_special = tokens.shape[0] - _n_patches(inputs["pixel_values"], model)
        grid = tokens[n_special:]
        side = int(round(grid.shape[0] ** 0.5))
        return grid.reshape(side, side, -1).cpu().numpy().astype(np.float32)

    return run


def _n_patches(pixel_values, model):
    patch = model.config.patch_size
    return (pixel_values.shape[-2] // patch) * (pixel_values.shape[-1] // patch)


def load_segmenter_model(name=DEFAULT_SEGMENTER_MODEL):
    """Promptable segmenter: (rgb, points) -> float32 (H, W) score map of
    the highest-confidence candidate mask (multimask output enabled)."""
    import torch
    from transformers import Sam2Model, Sam2Processor

    processor = Sam2Processor.from_pretrained(name)
    model = Sam2Model.from_pretrained(name).eval()

    def run(rgb, points):
        pts = [[[float(x), float(y)] for x, y in points]]
        inputs = processor(images=rgb, input_points=[pts],
                           input_labels=[[[1] * len(points)]],
                           return_tensors="pt")
        with torch.inference_mode():
            out = model(**inputs, multimask_output=True)
        logits = processor.post_process_masks(
            out.pred_masks, inputs["original_sizes"], binarize=False
        )[0][0]
        best = int(out.iou_scores[0, 0].argmax())
        return logits[best].cpu().numpy().astype(np.float32)

    return run
