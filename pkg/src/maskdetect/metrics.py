"""Confusion matrix, per-class precision/recall/F1, and evaluation drivers."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataio import LabeledDataset, decode_image, materialize, natural_key
from .haar import CascadeModel, DetectionBox, iou
from .labels import CLASS_DIR_NAMES, MaskClass
from .network import Network
from .pipeline import DetectorParams, parse_detections, process_frame
from .tensor import FLOAT


@dataclass
class ConfusionMatrix:
    counts: np.ndarray  # rows = true class, columns = predicted class
    labels: tuple[str, ...] = CLASS_DIR_NAMES

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts) / self.total)

    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)


def confusion_matrix(true_labels, predicted_labels, num_classes: int = 3) -> ConfusionMatrix:
    true_labels = np.asarray(true_labels, dtype=np.int64)
    predicted_labels = np.asarray(predicted_labels, dtype=np.int64)
    if true_labels.size == 0:
        raise ValueError("empty label sequences")
    if true_labels.shape != predicted_labels.shape:
        raise ValueError(
            f"length mismatch: {true_labels.shape} true vs {predicted_labels.shape} predicted"
        )
    if (true_labels < 0).any() or (true_labels >= num_classes).any() \
            or (predicted_labels < 0).any() or (predicted_labels >= num_classes).any():
        raise ValueError(f"labels must be in [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (true_labels, predicted_labels), 1)
    return ConfusionMatrix(counts)


@dataclass
class ClassReport:
    labels: tuple[str, ...]
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    accuracy: float
    macro: tuple[float, float, float]
    weighted: tuple[float, float, float]
    total_support: int
    zero_division: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        per_class = {
            name: {
                "precision": float(self.precision[i]),
                "recall": float(self.recall[i]),
                "f1": float(self.f1[i]),
                "support": int(self.support[i]),
            }
            for i, name in enumerate(self.labels)
        }
        return {
            "classes": per_class,
            "accuracy": self.accuracy,
            "macro_avg": dict(zip(("precision", "recall", "f1"), self.macro)),
            "weighted_avg": dict(zip(("precision", "recall", "f1"), self.weighted)),
            "total_support": self.total_support,
            "zero_division": list(self.zero_division),
        }


def classification_report(cm: ConfusionMatrix) -> ClassReport:
    """Per-class precision/recall/F1 with the report-tool zero conventions.

    Undefined ratios (empty row or column, or p + r = 0) are reported as 0
    and flagged in ``zero_division``.
    """
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    diag = np.diag(cm.counts).astype(FLOAT)
    rows = cm.row_sums().astype(FLOAT)
    cols = cm.col_sums().astype(FLOAT)
    flags = []
    n = len(cm.labels)
    precision = np.zeros(n)
    recall = np.zeros(n)
    f1 = np.zeros(n)
    for i, name in enumerate(cm.labels):
        if cols[i] > 0:
            precision[i] = diag[i] / cols[i]
        else:
            flags.append(f"precision[{name}]")
        if rows[i] > 0:
            recall[i] = diag[i] / rows[i]
        else:
            flags.append(f"recall[{name}]")
        if precision[i] + recall[i] > 0:
            f1[i] = 2 * precision[i] * recall[i] / (precision[i] + recall[i])
        else:
            flags.append(f"f1[{name}]")
    support = cm.row_sums()
    total = cm.total
    weights = support / total
    return ClassReport(
        labels=cm.labels,
        precision=precision,
        recall=recall,
        f1=f1,
        support=support,
        accuracy=cm.accuracy,
        macro=(float(precision.mean()), float(recall.mean()), float(f1.mean())),
        weighted=(
            float((precision * weights).sum()),
            float((recall * weights).sum()),
            float((f1 * weights).sum()),
        ),
        total_support=total,
        zero_division=flags,
    )


def render_report(report: ClassReport, digits: int = 2) -> str:
    """Text layout: class rows, accuracy row, macro avg, weighted avg."""
    width = max(max(len(n) for n in report.labels), len("weighted avg"))
    head = "{:>{w}} ".format("", w=width) + "".join(
        " {:>9}".format(h) for h in ("precision", "recall", "f1-score", "support")
    )
    lines = [head, ""]
    row = "{:>{w}}  {:>9.{d}f} {:>9.{d}f} {:>9.{d}f} {:>9}"
    for i, name in enumerate(report.labels):
        lines.append(row.format(name, report.precision[i], report.recall[i],
                                report.f1[i], int(report.support[i]), w=width, d=digits))
    lines.append("")
    lines.append("{:>{w}}  {:>9} {:>9} {:>9.{d}f} {:>9}".format(
        "accuracy", "", "", report.accuracy, report.total_support, w=width, d=digits))
    for name, (p, r, f) in (("macro avg", report.macro), ("weighted avg", report.weighted)):
        lines.append(row.format(name, p, r, f, report.total_support, w=width, d=digits))
    return "\n".join(lines) + "\n"


def evaluate_samples(net: Network, samples: list[tuple[np.ndarray, int]],
                     batch_size: int = 32) -> tuple[ConfusionMatrix, ClassReport]:
    """Classify every sample with rescale-only preprocessing."""
    if not samples:
        raise ValueError("empty dataset")
    preds = []
    for start in range(0, len(samples), batch_size):
        chunk = samples[start:start + batch_size]
        x = np.stack([px for px, _ in chunk]).astype(net.dtype) / 255.0
        preds.extend(net.forward(x).argmax(axis=1).tolist())
    cm = confusion_matrix([label for _, label in samples], preds)
    return cm, classification_report(cm)


def evaluate_dataset(net: Network, dataset: LabeledDataset) -> tuple[ConfusionMatrix, ClassReport]:
    return evaluate_samples(net, materialize(dataset))


# ---------------------------------------------------------------------------
# per-condition accuracy over annotated frame directories
#
# Layout: <root>/<condition>/ holds frames plus an annotations.csv whose
# rows are `frame_id,x,y,w,h,label` (detection wire format, confidence
# optional). Because "image correct" is ambiguous for multi-face frames,
# both readings are reported: per-face and all-faces-per-image.

@dataclass
class ConditionStats:
    condition: str
    faces: int = 0
    correct_faces: int = 0
    frames: int = 0
    correct_frames: int = 0

    @property
    def per_face_accuracy(self) -> float:
        return self.correct_faces / self.faces if self.faces else 0.0

    @property
    def per_image_accuracy(self) -> float:
        return self.correct_frames / self.frames if self.frames else 0.0


def score_frame(detections: list[DetectionBox], annotations: list[DetectionBox],
                iou_threshold: float = 0.5) -> tuple[int, int]:
    """Count annotated faces whose best-overlap detection carries the right label."""
    correct = 0
    remaining = list(detections)
    for ann in annotations:
        best, best_iou = None, iou_threshold
        for det in remaining:
            overlap = iou(det, ann)
            if overlap >= best_iou:
                best, best_iou = det, overlap
        if best is not None:
            remaining.remove(best)
            if best.label == ann.label:
                correct += 1
    return correct, len(annotations)


def evaluate_conditions(
    net: Network,
    cascade: CascadeModel,
    root: str | Path,
    params: DetectorParams | None = None,
    iou_threshold: float = 0.5,
) -> list[ConditionStats]:
    root = Path(root)
    conditions = sorted((p for p in root.iterdir() if p.is_dir()), key=lambda p: p.name)
    if not conditions:
        raise ValueError(f"{root} has no condition subdirectories")
    out = []
    for cond in conditions:
        ann_path = cond / "annotations.csv"
        if not ann_path.is_file():
            raise ValueError(f"{cond} is missing annotations.csv")
        annotations = parse_detections(ann_path.read_text())
        stats = ConditionStats(condition=cond.name)
        frames = sorted((p for p in cond.iterdir() if p.stem in annotations),
                        key=lambda p: natural_key(p.name))
        for frame_path in frames:
            result = process_frame(decode_image(frame_path), cascade, net, params,
                                   frame_id=frame_path.stem)
            correct, total = score_frame(result.detections, annotations[frame_path.stem],
                                         iou_threshold)
            stats.faces += total
            stats.correct_faces += correct
            stats.frames += 1
            stats.correct_frames += int(correct == total)
        out.append(stats)
    return out


def render_condition_table(stats: list[ConditionStats]) -> str:
    width = max(len("condition"), max(len(s.condition) for s in stats))
    lines = [
        "{:<{w}}  {:>6} {:>14} {:>7} {:>15}".format(
            "condition", "faces", "per-face acc", "frames", "per-image acc", w=width)
    ]
    for s in stats:
        lines.append("{:<{w}}  {:>6} {:>14.2f} {:>7} {:>15.2f}".format(
            s.condition, s.faces, s.per_face_accuracy, s.frames, s.per_image_accuracy, w=width))
    return "\n".join(lines) + "\n"
