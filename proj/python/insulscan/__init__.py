"""Insulator segmentation and defect classification."""

from ._core import (
    ArchitectureMismatch,
    Error,
    IoError,
    ValueError,
    CLASS_NAMES,
    Pipeline,
    accuracy,
    classification_report,
    compose_mask,
    hflip,
    init_classifier,
    init_segmenter,
    iou,
    load_manifest,
    parse_grid,
    read_image,
    read_mask,
    render_scene,
    rot90,
    transpose,
    vflip,
    write_image,
    write_mask,
)

__all__ = [
    "ArchitectureMismatch",
    "Error",
    "IoError",
    "ValueError",
    "CLASS_NAMES",
    "Pipeline",
    "accuracy",
    "classification_report",
    "compose_mask",
    "hflip",
    "init_classifier",
    "init_segmenter",
    "iou",
    "load_manifest",
    "parse_grid",
    "read_image",
    "read_mask",
    "render_scene",
    "rot90",
    "transpose",
    "vflip",
    "write_image",
    "write_mask",
]
