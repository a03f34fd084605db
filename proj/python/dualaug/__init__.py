"""Dual-augmentor 2D-to-3D pose lifting."""

from ._core import (
    ArityError,
    BehindCameraError,
    Camera,
    CycleError,
    DegenerateError,
    EmptyBatchError,
    Error,
    IoError,
    LengthError,
    NonScalarError,
    ParseError,
    ShapeError,
    Skeleton,
    augment,
    auc,
    generate_domain,
    human16,
    mpjpe,
    pa_mpjpe,
    pck,
    predict,
    train,
)

__all__ = [
    "ArityError",
    "BehindCameraError",
    "Camera",
    "CycleError",
    "DegenerateError",
    "EmptyBatchError",
    "Error",
    "IoError",
    "LengthError",
    "NonScalarError",
    "ParseError",
    "ShapeError",
    "Skeleton",
    "augment",
    "auc",
    "generate_domain",
    "human16",
    "mpjpe",
    "pa_mpjpe",
    "pck",
    "predict",
    "train",
]
