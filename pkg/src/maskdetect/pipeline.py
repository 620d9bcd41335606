"""End-to-end frame processing: locate faces, classify, annotate, time it."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .augment import Image, rescale_unit, resize_bilinear
from .haar import CascadeModel, DetectionBox, detect_multiscale
from .labels import MaskClass
from .network import Network

OUTLINE_PX = 2


@dataclass
class DetectorParams:
    scale_factor: float = 1.1
    min_neighbors: int = 3
    min_size: int = 30
    margin: int = 0


@dataclass
class FrameLatency:
    detect_ms: float
    classify_ms: list[float]
    total_ms: float


@dataclass
class FrameResult:
    frame_id: str
    detections: list[DetectionBox]
    annotated: Image
    latency: FrameLatency


@dataclass
class FrameError:
    frame_id: str
    message: str


@dataclass
class LatencySummary:
    frames: int = 0
    faces: int = 0
    median_total_ms: float | None = None
    p95_total_ms: float | None = None
    median_classify_ms: float | None = None
    p95_classify_ms: float | None = None


def to_grayscale(img: Image) -> np.ndarray:
    """Luminance y = 0.299 R + 0.587 G + 0.114 B, rounded half-up, as uint8."""
    if img.domain != "raw":
        raise ValueError("grayscale conversion expects a raw-domain image")
    p = img.pixels
    y = 0.299 * p[:, :, 0] + 0.587 * p[:, :, 1] + 0.114 * p[:, :, 2]
    return np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8)


def classify_face(crop: Image, net: Network) -> tuple[MaskClass, float]:
    """Resize the crop to the network input, rescale, and take the argmax class.

    Ties break toward the lowest ordinal (numpy argmax picks the first max).
    """
    if crop.domain != "raw":
        raise ValueError("classification expects a raw-domain crop")
    h, w = crop.pixels.shape[:2]
    if h < 1 or w < 1:
        raise ValueError("degenerate zero-area crop")
    in_h, in_w, _ = net.input_shape or (150, 150, 3)
    resized = resize_bilinear(crop, in_h, in_w)
    unit = rescale_unit(resized)
    probs = net.forward(unit.pixels[None].astype(net.dtype))[0]
    ordinal = int(probs.argmax())
    return MaskClass(ordinal), float(probs[ordinal])


def clamp_box(box: DetectionBox, width: int, height: int, margin: int = 0) -> DetectionBox:
    x0 = max(0, box.x - margin)
    y0 = max(0, box.y - margin)
    x1 = min(width, box.x + box.w + margin)
    y1 = min(height, box.y + box.h + margin)
    return DetectionBox(x0, y0, max(0, x1 - x0), max(0, y1 - y0), box.label, box.confidence)


def annotate_frame(frame: Image, detections: list[DetectionBox]) -> Image:
    """Draw 2px color-coded outlines inward from each box edge; no other pixel changes."""
    if frame.domain != "raw":
        raise ValueError("annotation expects a raw-domain frame")
    out = frame.pixels.copy()
    h, w = out.shape[:2]
    for det in detections:
        box = clamp_box(det, w, h)
        if box.w == 0 or box.h == 0:
            continue
        label = box.label if box.label is not None else MaskClass.CORRECT_MASK
        color = label.color
        t = min(OUTLINE_PX, box.w, box.h)
        x0, y0, x1, y1 = box.x, box.y, box.x + box.w, box.y + box.h
        out[y0:y0 + t, x0:x1] = color
        out[y1 - t:y1, x0:x1] = color
        out[y0:y1, x0:x0 + t] = color
        out[y0:y1, x1 - t:x1] = color
    return Image(out, frame.domain)


def process_frame(
    frame: Image,
    cascade: CascadeModel,
    net: Network,
    params: DetectorParams | None = None,
    frame_id: str = "frame",
) -> FrameResult:
    """Detect faces, classify each crop, annotate, and record stage latencies."""
    params = params or DetectorParams()
    t_start = time.perf_counter()
    gray = to_grayscale(frame)
    boxes = detect_multiscale(
        cascade, gray,
        scale_factor=params.scale_factor,
        min_neighbors=params.min_neighbors,
        min_size=params.min_size,
    )
    t_detect = time.perf_counter()

    h, w = frame.pixels.shape[:2]
    detections: list[DetectionBox] = []
    classify_ms: list[float] = []
    for box in boxes:
        roi = clamp_box(box, w, h, params.margin)
        if roi.w == 0 or roi.h == 0:
            continue
        crop = Image(frame.pixels[roi.y:roi.y + roi.h, roi.x:roi.x + roi.w], "raw")
        t0 = time.perf_counter()
        label, confidence = classify_face(crop, net)
        classify_ms.append((time.perf_counter() - t0) * 1e3)
        detections.append(DetectionBox(roi.x, roi.y, roi.w, roi.h, label, confidence))
    detections.sort(key=lambda b: (b.y, b.x, b.w))
    annotated = annotate_frame(frame, detections)
    t_end = time.perf_counter()
    latency = FrameLatency(
        detect_ms=(t_detect - t_start) * 1e3,
        classify_ms=classify_ms,
        total_ms=(t_end - t_start) * 1e3,
    )
    return FrameResult(frame_id, detections, annotated, latency)


def summarize_latency(results: list[FrameResult | FrameError]) -> LatencySummary:
    totals = [r.latency.total_ms for r in results if isinstance(r, FrameResult)]
    per_face = [ms for r in results if isinstance(r, FrameResult) for ms in r.latency.classify_ms]
    summary = LatencySummary(frames=len(totals), faces=len(per_face))
    if totals:
        summary.median_total_ms = float(np.median(totals))
        summary.p95_total_ms = float(np.percentile(totals, 95))
    if per_face:
        summary.median_classify_ms = float(np.median(per_face))
        summary.p95_classify_ms = float(np.percentile(per_face, 95))
    return summary


def process_paths(
    paths: list[Path],
    cascade: CascadeModel,
    net: Network,
    params: DetectorParams | None = None,
    threads: int | None = None,
) -> tuple[list[FrameResult | FrameError], LatencySummary]:
    """Process frames in order; unreadable frames become error records.

    Frames are independent, so a small thread pool may process them
    concurrently; results keep input order.
    """
    from .dataio import decode_image
    from .errors import DecodeError

    def work(path: Path):
        frame_id = path.stem
        try:
            frame = decode_image(path)
        except (DecodeError, OSError) as exc:
            return FrameError(frame_id, str(exc))
        return process_frame(frame, cascade, net, params, frame_id=frame_id)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, paths))
    else:
        results = [work(p) for p in paths]
    return results, summarize_latency(results)


# ---------------------------------------------------------------------------
# per-frame detection wire format: frame_id,x,y,w,h,label,confidence

def format_detections(results: list[FrameResult | FrameError]) -> str:
    lines = []
    for r in results:
        if isinstance(r, FrameError):
            continue
        for d in r.detections:
            label = d.label.dir_name if d.label is not None else ""
            conf = f"{d.confidence:.6f}" if d.confidence is not None else ""
            lines.append(f"{r.frame_id},{d.x},{d.y},{d.w},{d.h},{label},{conf}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_detections(text: str) -> dict[str, list[DetectionBox]]:
    frames: dict[str, list[DetectionBox]] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) == 6:  # annotation rows may omit the confidence column
            parts.append("")
        frame_id, x, y, w, h, label, conf = parts
        frames.setdefault(frame_id, []).append(DetectionBox(
            int(x), int(y), int(w), int(h),
            MaskClass.from_name(label) if label else None,
            float(conf) if conf else None,
        ))
    return frames
