"""Facemask detection engine.

A dependency-light pipeline that localizes faces with a Haar cascade,
classifies each face crop as correctly masked / incorrectly masked /
unmasked with a small from-scratch CNN, and annotates frames with
color-coded boxes. Ships with training, evaluation, and latency tooling,
a FastAPI service, and a thin CLI client.
"""

from .augment import AugmentConfig, Image, augment_sample, horizontal_flip, rescale_unit, \
    resize_bilinear, shear_transform, zoom_transform
from .bench import BenchResult, run_benchmark
from .dataio import LabeledDataset, decode_image, load_dataset, load_model, materialize, \
    save_model
from .haar import CascadeModel, DetectionBox, detect_multiscale, evaluate_window, \
    group_rectangles, integral_images, parse_cascade_xml
from .labels import CLASS_DIR_NAMES, MaskClass
from .layers import relu, softmax
from .metrics import ClassReport, ConfusionMatrix, classification_report, confusion_matrix, \
    evaluate_dataset, evaluate_samples, render_report
from .network import Network, build_mask_net
from .pipeline import DetectorParams, FrameResult, annotate_frame, classify_face, \
    process_frame, process_paths, to_grayscale
from .training import AdamState, TrainConfig, TrainHistory, adam_step, cross_entropy_loss, train

__version__ = "0.1.0"

__all__ = [
    "AdamState", "AugmentConfig", "BenchResult", "CLASS_DIR_NAMES", "CascadeModel",
    "ClassReport", "ConfusionMatrix", "DetectionBox", "DetectorParams", "FrameResult",
    "Image", "LabeledDataset", "MaskClass", "Network", "TrainConfig", "TrainHistory",
    "adam_step", "annotate_frame", "augment_sample", "build_mask_net",
    "classification_report", "classify_face", "confusion_matrix", "cross_entropy_loss",
    "decode_image", "detect_multiscale", "evaluate_dataset", "evaluate_samples",
    "evaluate_window", "group_rectangles", "horizontal_flip", "integral_images",
    "load_dataset", "load_model", "materialize", "parse_cascade_xml", "process_frame",
    "process_paths", "relu", "render_report", "rescale_unit", "resize_bilinear",
    "run_benchmark", "save_model", "shear_transform", "softmax", "to_grayscale", "train",
    "zoom_transform",
]
