"""depseg: depth-guided, training-free scene segmentation.

Turns monocular depth maps into point prompts, converts promptable-segmenter
score maps into class-agnostic masks, and classifies each mask by top-k cosine
matching against a template bank built from a handful of annotated frames.
"""

__version__ = "0.1.0"
