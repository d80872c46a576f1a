"""Cascade classifier: GRU capture over engagement sequences plus an account score head."""

from .checkpoint import load_model, save_model
from .evaluation import (FoldReport, binary_metrics, cross_validate, infer_with_margins, margin_decisions,
                         select_threshold, stratified_folds)
from .features import PreparedCascade, featurize, prepare
from .model import Batch, DetectorModel, make_batch
from .training import DetectorConfig, TrainingDiverged, gradient_check, train
from .users import UserVectors, build_user_vectors

__all__ = [
    "Batch", "DetectorConfig", "DetectorModel", "FoldReport", "PreparedCascade", "TrainingDiverged",
    "UserVectors", "binary_metrics", "build_user_vectors", "cross_validate", "featurize", "gradient_check",
    "infer_with_margins", "load_model", "make_batch", "margin_decisions", "prepare", "save_model",
    "select_threshold", "stratified_folds", "train",
]
