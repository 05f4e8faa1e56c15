"""Per-frame semi-supervised video object segmentation with semantic guidance."""
from .core import ScoreMap, Scale, boundary_pixels, connected_components, gaussian_smooth, mask_iou
from .kernels import BACKEND
from .pipeline import PipelineConfig, run_multiobject, run_sequence

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "PipelineConfig",
    "Scale",
    "ScoreMap",
    "boundary_pixels",
    "connected_components",
    "gaussian_smooth",
    "mask_iou",
    "run_multiobject",
    "run_sequence",
]
