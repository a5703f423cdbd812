"""Ensemble fusion, post-processing and evaluation of 3D lesion segmentations.

Volumes are numpy arrays of shape (nx, ny, nz).
"""

from ._core import (
    GridMismatchError,
    NiftiError,
    average_maps,
    dice,
    evaluate_case,
    hausdorff95,
    label_components,
    lesion_f1,
    postprocess,
    read_volume,
    simple_lesion_count,
    size_balanced_split,
    threshold,
    volume_difference,
    write_volume,
)

__version__ = "0.1.0"

__all__ = [
    "GridMismatchError",
    "NiftiError",
    "average_maps",
    "dice",
    "evaluate_case",
    "hausdorff95",
    "label_components",
    "lesion_f1",
    "postprocess",
    "read_volume",
    "simple_lesion_count",
    "size_balanced_split",
    "threshold",
    "volume_difference",
    "write_volume",
]
