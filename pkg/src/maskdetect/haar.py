"""Haar-cascade face localization: parsing, integral images, window scanning.

Fixed evaluation conventions (all goldens are generated against these):

* Pixel rounding is round-half-up, ``floor(v + 0.5)``.
* A window at scale ``s`` has size ``round(w0*s) x round(h0*s)``.
* Feature rectangles scale by their corners: ``x0 = round(x*s)``,
  ``x1 = round((x+w)*s)``; corner rounding keeps every scaled rect inside
  the scaled window, so no clamping or weight recompensation happens.
* A stump evaluates ``f = sum_i weight_i * RectSum_i / windowArea`` and
  contributes its left leaf when ``f < threshold * sigma``, else the right
  leaf, where ``sigma`` is the window standard deviation (1 when the
  variance is not positive).
* A stage passes when its leaf sum is >= the stage threshold; a window is
  accepted when all stages pass. Short-circuiting on the first failed
  stage never changes the decision.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass

import numpy as np

from .errors import CascadeParseError, UnsupportedFeatureError
from .labels import MaskClass


def round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


@dataclass(frozen=True)
class HaarRect:
    x: int
    y: int
    w: int
    h: int
    weight: float


@dataclass(frozen=True)
class HaarFeature:
    rects: tuple[HaarRect, ...]


@dataclass(frozen=True)
class WeakStump:
    feature: int
    threshold: float
    left: float
    right: float


@dataclass(frozen=True)
class CascadeStage:
    threshold: float
    stumps: tuple[WeakStump, ...]


@dataclass(frozen=True)
class CascadeModel:
    width: int
    height: int
    stages: tuple[CascadeStage, ...]
    features: tuple[HaarFeature, ...]


@dataclass
class DetectionBox:
    x: int
    y: int
    w: int
    h: int
    label: MaskClass | None = None
    confidence: float | None = None

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x, self.y, self.w, self.h)


def iou(a: DetectionBox, b: DetectionBox) -> float:
    ix = max(0, min(a.x + a.w, b.x + b.w) - max(a.x, b.x))
    iy = max(0, min(a.y + a.h, b.y + b.h) - max(a.y, b.y))
    inter = ix * iy
    union = a.w * a.h + b.w * b.h - inter
    return inter / union if union > 0 else 0.0


# ---------------------------------------------------------------------------
# cascade parsing (OpenCV interchange XML, new style, HAAR stumps only)

def _required(parent: ET.Element, tag: str, context: str) -> ET.Element:
    el = parent.find(tag)
    if el is None:
        raise CascadeParseError(f"missing required element <{tag}> in {context}")
    return el


def _required_text(parent: ET.Element, tag: str, context: str) -> str:
    el = _required(parent, tag, context)
    if el.text is None or not el.text.strip():
        raise CascadeParseError(f"empty element <{tag}> in {context}")
    return el.text.strip()


def parse_cascade_xml(text: str) -> CascadeModel:
    """Parse a BOOST/HAAR stump cascade; tilted features are rejected."""
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise CascadeParseError(f"not well-formed XML: {exc}") from exc
    cascade = root if root.tag == "cascade" else root.find("cascade")
    if cascade is None:
        raise CascadeParseError("missing required element <cascade>")

    stage_type = _required_text(cascade, "stageType", "cascade")
    if stage_type != "BOOST":
        raise CascadeParseError(f"unsupported stageType {stage_type!r}")
    feature_type = _required_text(cascade, "featureType", "cascade")
    if feature_type != "HAAR":
        raise UnsupportedFeatureError(f"unsupported featureType {feature_type!r}")
    width = int(_required_text(cascade, "width", "cascade"))
    height = int(_required_text(cascade, "height", "cascade"))
    stage_num = int(_required_text(cascade, "stageNum", "cascade"))

    features = _parse_features(_required(cascade, "features", "cascade"), width, height)
    stages = _parse_stages(_required(cascade, "stages", "cascade"), len(features))
    if not stages:
        raise CascadeParseError("cascade has no stages")
    if len(stages) != stage_num:
        raise CascadeParseError(f"stageNum {stage_num} != {len(stages)} parsed stages")
    return CascadeModel(width=width, height=height, stages=tuple(stages), features=tuple(features))


def _parse_features(features_el: ET.Element, width: int, height: int) -> list[HaarFeature]:
    features = []
    for i, feat_el in enumerate(features_el.findall("_")):
        tilted_el = feat_el.find("tilted")
        if tilted_el is not None and tilted_el.text and int(tilted_el.text.strip()) != 0:
            raise UnsupportedFeatureError(f"feature {i}: tilted features are not supported")
        rects = []
        for rect_el in _required(feat_el, "rects", f"feature {i}").findall("_"):
            tokens = (rect_el.text or "").split()
            if len(tokens) != 5:
                raise CascadeParseError(f"feature {i}: rect needs 5 values, got {tokens}")
            x, y, w, h = (int(t) for t in tokens[:4])
            weight = float(tokens[4])
            if x < 0 or y < 0 or w <= 0 or h <= 0 or x + w > width or y + h > height:
                raise CascadeParseError(
                    f"feature {i}: rect ({x},{y},{w},{h}) outside {width}x{height} window"
                )
            rects.append(HaarRect(x, y, w, h, weight))
        if not 2 <= len(rects) <= 3:
            raise CascadeParseError(f"feature {i}: expected 2-3 rects, got {len(rects)}")
        weights = [r.weight for r in rects]
        if not (any(w > 0 for w in weights) and any(w < 0 for w in weights)):
            raise CascadeParseError(f"feature {i}: needs one positive and one negative weight")
        features.append(HaarFeature(tuple(rects)))
    if not features:
        raise CascadeParseError("cascade has no features")
    return features


def _parse_stages(stages_el: ET.Element, n_features: int) -> list[CascadeStage]:
    stages = []
    for si, stage_el in enumerate(stages_el.findall("_")):
        ctx = f"stage {si}"
        _required_text(stage_el, "maxWeakCount", ctx)
        threshold = float(_required_text(stage_el, "stageThreshold", ctx))
        stumps = []
        for wi, weak_el in enumerate(_required(stage_el, "weakClassifiers", ctx).findall("_")):
            nodes = _required_text(weak_el, "internalNodes", f"{ctx} weak {wi}").split()
            leaves = _required_text(weak_el, "leafValues", f"{ctx} weak {wi}").split()
            if len(nodes) != 4:
                raise UnsupportedFeatureError(
                    f"{ctx} weak {wi}: only single-node stumps are supported"
                )
            if nodes[0] != "0" or nodes[1] != "-1":
                raise UnsupportedFeatureError(
                    f"{ctx} weak {wi}: unexpected child markers {nodes[:2]}"
                )
            if len(leaves) != 2:
                raise CascadeParseError(f"{ctx} weak {wi}: expected 2 leaf values")
            feature = int(nodes[2])
            if not 0 <= feature < n_features:
                raise CascadeParseError(f"{ctx} weak {wi}: feature index {feature} out of range")
            stumps.append(WeakStump(feature, float(nodes[3]), float(leaves[0]), float(leaves[1])))
        if not stumps:
            raise CascadeParseError(f"{ctx} has no weak classifiers")
        stages.append(CascadeStage(threshold, tuple(stumps)))
    return stages


# ---------------------------------------------------------------------------
# integral images and window evaluation

def integral_images(gray: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Summed-area tables of values and squared values, zero-padded to (H+1, W+1).

    Integer inputs accumulate in int64, so rectangle sums are exact.
    """
    if gray.ndim != 2:
        raise ValueError(f"expected a 2-d luminance array, got shape {gray.shape}")
    acc = np.int64 if np.issubdtype(gray.dtype, np.integer) else np.float64
    g = gray.astype(acc)
    ii = np.zeros((g.shape[0] + 1, g.shape[1] + 1), dtype=acc)
    ii_sq = np.zeros_like(ii)
    np.cumsum(np.cumsum(g, axis=0), axis=1, out=ii[1:, 1:])
    np.cumsum(np.cumsum(g * g, axis=0), axis=1, out=ii_sq[1:, 1:])
    return ii, ii_sq


def rect_sum(ii: np.ndarray, x: int, y: int, w: int, h: int):
    """Sum of the source over [x, x+w) x [y, y+h) via 4 lookups."""
    return ii[y + h, x + w] - ii[y, x + w] - ii[y + h, x] + ii[y, x]


def _scaled_window(model: CascadeModel, scale: float) -> tuple[int, int]:
    return round_half_up(model.width * scale), round_half_up(model.height * scale)


def _scale_feature(feature: HaarFeature, scale: float) -> list[tuple[int, int, int, int, float]]:
    out = []
    for r in feature.rects:
        x0 = round_half_up(r.x * scale)
        y0 = round_half_up(r.y * scale)
        x1 = round_half_up((r.x + r.w) * scale)
        y1 = round_half_up((r.y + r.h) * scale)
        out.append((x0, y0, x1, y1, r.weight))
    return out


def window_sigma(ii, ii_sq, x: int, y: int, ww: int, wh: int) -> float:
    area = ww * wh
    mean = rect_sum(ii, x, y, ww, wh) / area
    var = rect_sum(ii_sq, x, y, ww, wh) / area - mean * mean
    return math.sqrt(var) if var > 0 else 1.0


def evaluate_window(model: CascadeModel, ii, ii_sq, x: int, y: int, scale: float,
                    short_circuit: bool = True) -> bool:
    """Run the cascade on one window; see the module docstring for conventions."""
    ww, wh = _scaled_window(model, scale)
    img_h, img_w = ii.shape[0] - 1, ii.shape[1] - 1
    if x < 0 or y < 0 or x + ww > img_w or y + wh > img_h:
        raise ValueError(f"window ({x},{y},{ww},{wh}) outside {img_w}x{img_h} image")
    area = ww * wh
    sigma = window_sigma(ii, ii_sq, x, y, ww, wh)
    scaled = [_scale_feature(f, scale) for f in model.features]
    accepted = True
    for stage in model.stages:
        total = 0.0
        for stump in stage.stumps:
            f = 0.0
            for rx0, ry0, rx1, ry1, weight in scaled[stump.feature]:
                f += weight * rect_sum(ii, x + rx0, y + ry0, rx1 - rx0, ry1 - ry0)
            f /= area
            total += stump.left if f < stump.threshold * sigma else stump.right
        if total < stage.threshold:
            if short_circuit:
                return False
            accepted = False
    return accepted


def _evaluate_grid(model: CascadeModel, ii, ii_sq, xs, ys, scale: float) -> np.ndarray:
    """Vectorized cascade over window origins (xs, ys); returns an accept mask."""
    ww, wh = _scaled_window(model, scale)
    area = ww * wh
    s1 = ii[ys + wh, xs + ww] - ii[ys, xs + ww] - ii[ys + wh, xs] + ii[ys, xs]
    s2 = ii_sq[ys + wh, xs + ww] - ii_sq[ys, xs + ww] - ii_sq[ys + wh, xs] + ii_sq[ys, xs]
    mean = s1 / area
    var = s2 / area - mean * mean
    sigma = np.where(var > 0, np.sqrt(np.maximum(var, 0)), 1.0)

    scaled = [_scale_feature(f, scale) for f in model.features]
    accept = np.ones(xs.shape, dtype=bool)
    idx = np.arange(xs.size)
    ax, ay, asig = xs, ys, sigma
    for stage in model.stages:
        total = np.zeros(idx.size)
        for stump in stage.stumps:
            f = np.zeros(idx.size)
            for rx0, ry0, rx1, ry1, weight in scaled[stump.feature]:
                f += weight * (
                    ii[ay + ry1, ax + rx1] - ii[ay + ry0, ax + rx1]
                    - ii[ay + ry1, ax + rx0] + ii[ay + ry0, ax + rx0]
                )
            f /= area
            total += np.where(f < stump.threshold * asig, stump.left, stump.right)
        alive = total >= stage.threshold
        if not alive.all():
            drop = idx[~alive]
            accept[drop] = False
            idx, ax, ay, asig = idx[alive], ax[alive], ay[alive], asig[alive]
            if idx.size == 0:
                break
    return accept


def scan_scales(model: CascadeModel, img_w: int, img_h: int, scale_factor: float,
                min_size: int):
    """Yield (scale, ww, wh) from the base window up, skipping sizes below min_size."""
    k = 0
    while True:
        scale = scale_factor ** k
        ww, wh = _scaled_window(model, scale)
        if ww > img_w or wh > img_h:
            return
        if min(ww, wh) >= min_size:
            yield scale, ww, wh
        k += 1


def detect_multiscale(
    model: CascadeModel,
    gray: np.ndarray,
    scale_factor: float = 1.1,
    min_neighbors: int = 3,
    min_size: int = 30,
    step: int | None = None,
) -> list[DetectionBox]:
    """Multi-scale sliding-window scan followed by rectangle grouping.

    The scan step defaults to max(1, floor(scale)). Output is sorted by
    (y, x, w) so it is independent of internal scan order.
    """
    if scale_factor <= 1:
        raise ValueError(f"scale_factor must be > 1, got {scale_factor}")
    if gray.ndim != 2:
        raise ValueError(f"expected a 2-d luminance array, got shape {gray.shape}")
    img_h, img_w = gray.shape
    ii, ii_sq = integral_images(gray)
    raw: list[DetectionBox] = []
    for scale, ww, wh in scan_scales(model, img_w, img_h, scale_factor, min_size):
        stride = step if step is not None else max(1, int(math.floor(scale)))
        xs = np.arange(0, img_w - ww + 1, stride)
        ys = np.arange(0, img_h - wh + 1, stride)
        gx, gy = np.meshgrid(xs, ys)
        gx, gy = gx.ravel(), gy.ravel()
        accept = _evaluate_grid(model, ii, ii_sq, gx, gy, scale)
        for x, y in zip(gx[accept], gy[accept]):
            raw.append(DetectionBox(int(x), int(y), ww, wh))
    grouped = group_rectangles(raw, min_neighbors)
    grouped.sort(key=lambda b: (b.y, b.x, b.w))
    return grouped


# ---------------------------------------------------------------------------
# rectangle grouping

def _similar(a: DetectionBox, b: DetectionBox, eps: float) -> bool:
    delta = eps * (a.w + a.h + b.w + b.h) / 4.0
    return (
        abs(a.x - b.x) <= delta
        and abs(a.y - b.y) <= delta
        and abs(a.w - b.w) <= delta
        and abs(a.h - b.h) <= delta
    )


def group_rectangles(boxes: list[DetectionBox], min_neighbors: int,
                     eps: float = 0.2) -> list[DetectionBox]:
    """Cluster near-duplicate windows; keep clusters with > min_neighbors members.

    Clustering is the transitive closure of pairwise similarity (side
    deltas within eps times the mean side). Survivors are replaced by the
    arithmetic-mean rectangle, rounded half-up to integer pixels.
    """
    if min_neighbors < 0:
        raise ValueError("min_neighbors must be >= 0")
    n = len(boxes)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if _similar(boxes[i], boxes[j], eps):
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[rj] = ri

    clusters: dict[int, list[DetectionBox]] = {}
    for i in range(n):
        clusters.setdefault(find(i), []).append(boxes[i])

    out = []
    for members in clusters.values():
        if len(members) < min_neighbors + 1:
            continue
        k = len(members)
        out.append(DetectionBox(
            round_half_up(sum(b.x for b in members) / k),
            round_half_up(sum(b.y for b in members) / k),
            round_half_up(sum(b.w for b in members) / k),
            round_half_up(sum(b.h for b in members) / k),
        ))
    out.sort(key=lambda b: (b.y, b.x, b.w))
    return out
