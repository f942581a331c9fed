"""Echocardiography video classification pipeline."""

from ._core import (
    EchopipeError,
    Model,
    compute_metrics,
    generate_phantom,
    load_checkpoint,
    patient_vote,
    preprocess,
    read_video,
    selfcheck,
    stratified_folds,
    view_vote,
    write_video,
)

__all__ = [
    "EchopipeError",
    "Model",
    "compute_metrics",
    "generate_phantom",
    "load_checkpoint",
    "patient_vote",
    "preprocess",
    "read_video",
    "selfcheck",
    "stratified_folds",
    "view_vote",
    "write_video",
]
