"""Deterministic image augmentation: ops, plan generation, plan execution."""

from .imageio import Image, ImageIOError, read_image, resize_bilinear, write_image, write_ppm
from .ops import (
    AugOp,
    apply_aug_op,
    channel_offsets,
    hsv_to_rgb,
    noise_field,
    op_from_descriptor,
    rgb_to_hsv,
)
from .plan import (
    COLOR_OPS,
    MULTIPLIERS,
    NOISE_OPS,
    TRANSFORM_OPS,
    AugmentationMode,
    AugPlan,
    PlanEntry,
    build_plan,
    ops_for_mode,
    stream_seed,
)
from .executor import DirectoryLoader, DirectorySink, append_fragment, execute_plan

__all__ = [
    "Image",
    "ImageIOError",
    "read_image",
    "write_image",
    "write_ppm",
    "resize_bilinear",
    "AugOp",
    "apply_aug_op",
    "rgb_to_hsv",
    "hsv_to_rgb",
    "op_from_descriptor",
    "channel_offsets",
    "noise_field",
    "AugmentationMode",
    "AugPlan",
    "PlanEntry",
    "MULTIPLIERS",
    "COLOR_OPS",
    "TRANSFORM_OPS",
    "NOISE_OPS",
    "build_plan",
    "ops_for_mode",
    "stream_seed",
    "DirectoryLoader",
    "DirectorySink",
    "execute_plan",
    "append_fragment",
]
