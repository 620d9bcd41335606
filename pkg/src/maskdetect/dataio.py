"""Dataset loading, image decode/encode, and the model checkpoint format.

Checkpoint layout: magic ``MFD1``, a 4-byte little-endian header length,
a UTF-8 JSON header (format version, architecture, parameter manifest,
metadata), then the raw little-endian parameter blobs in manifest order.
Round trips are bitwise lossless.
"""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .augment import Image
from .errors import (
    CheckpointCorruptionError,
    CheckpointFormatError,
    CheckpointVersionError,
    DatasetLayoutError,
    DecodeError,
)
from .labels import CLASS_DIR_NAMES, MaskClass
from .network import Network, describe_architecture, network_from_description
from .tensor import FLOAT

log = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"MFD1"
CHECKPOINT_VERSION = 1


# ---------------------------------------------------------------------------
# image decode / encode

def _decode_ppm(data: bytes, path: str) -> np.ndarray:
    # binary PPM (P6), maxval <= 255; comments allowed in the header
    tokens = []
    pos = 2  # past "P6"
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DecodeError(f"{path}: truncated PPM header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace byte after maxval
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise DecodeError(f"{path}: non-numeric PPM header") from None
    if maxval != 255:
        raise DecodeError(f"{path}: unsupported PPM maxval {maxval}")
    expected = width * height * 3
    raster = data[pos:pos + expected]
    if len(raster) != expected:
        raise DecodeError(f"{path}: PPM raster truncated")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)


def decode_image_bytes(data: bytes, name: str = "<bytes>") -> Image:
    """Decode an in-memory PPM/PNG/JPEG; gray replicated to RGB, alpha dropped."""
    if data[:2] == b"P6":
        pixels = _decode_ppm(data, name)
    elif data[:8] == b"\x89PNG\r\n\x1a\n" or data[:2] == b"\xff\xd8":
        import io

        from PIL import Image as PILImage, UnidentifiedImageError

        try:
            with PILImage.open(io.BytesIO(data)) as im:
                im = im.convert("RGB")
                pixels = np.asarray(im, dtype=np.uint8)
        except (UnidentifiedImageError, OSError) as exc:
            raise DecodeError(f"{name}: {exc}") from exc
    else:
        raise DecodeError(f"{name}: unrecognized image format")
    return Image(pixels.astype(FLOAT), "raw")


def decode_image(path: str | Path) -> Image:
    """Decode an image file into a raw-domain image."""
    path = Path(path)
    return decode_image_bytes(path.read_bytes(), str(path))


def encode_ppm(img: Image) -> bytes:
    if img.domain != "raw":
        raise ValueError("PPM encoding expects a raw-domain image")
    pixels = np.clip(np.floor(img.pixels + 0.5), 0, 255).astype(np.uint8)
    h, w = pixels.shape[:2]
    return b"P6\n%d %d\n255\n" % (w, h) + pixels.tobytes()


def write_image(path: str | Path, img: Image) -> None:
    """Write raw-domain pixels; format chosen by extension (.ppm, .png, .jpg)."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".ppm":
        path.write_bytes(encode_ppm(img))
        return
    from PIL import Image as PILImage

    pixels = np.clip(np.floor(img.pixels + 0.5), 0, 255).astype(np.uint8)
    PILImage.fromarray(pixels, "RGB").save(path)


# ---------------------------------------------------------------------------
# dataset layout

@dataclass
class LabeledDataset:
    root: Path
    items: list[tuple[Path, MaskClass]]
    class_counts: dict[MaskClass, int]
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.items)


def load_dataset(root: str | Path) -> LabeledDataset:
    """Scan the three-category layout; order is lexicographic by path.

    Undecodable files are skipped with a warning and counted; any missing
    or extra subdirectory is a layout error.
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetLayoutError(f"{root} is not a directory")
    subdirs = sorted(p.name for p in root.iterdir() if p.is_dir())
    expected = sorted(CLASS_DIR_NAMES)
    if subdirs != expected:
        raise DatasetLayoutError(
            f"{root} must contain exactly {sorted(CLASS_DIR_NAMES)}, found {subdirs}"
        )
    items: list[tuple[Path, MaskClass]] = []
    counts = {m: 0 for m in MaskClass}
    skipped = 0
    for name in CLASS_DIR_NAMES:
        label = MaskClass.from_name(name)
        for path in sorted((root / name).iterdir()):
            if not path.is_file():
                continue
            try:
                decode_image(path)
            except DecodeError as exc:
                log.warning("skipping undecodable file: %s", exc)
                skipped += 1
                continue
            items.append((path, label))
            counts[label] += 1
    return LabeledDataset(root=root, items=items, class_counts=counts, skipped=skipped)


def materialize(dataset: LabeledDataset) -> list[tuple[np.ndarray, int]]:
    """Decode every item to (uint8 pixels, ordinal) pairs for training/eval."""
    return [
        (decode_image(path).pixels.astype(np.uint8), int(label))
        for path, label in dataset.items
    ]


_NUM_RE = re.compile(r"(\d+)")


def natural_key(name: str):
    """Sort key treating digit runs numerically, so frame2 < frame10."""
    return [int(part) if part.isdigit() else part for part in _NUM_RE.split(name)]


# ---------------------------------------------------------------------------
# checkpoints

def save_model(net: Network, path: str | Path, metadata: dict | None = None) -> None:
    """Write the checkpoint atomically (temp file + rename)."""
    path = Path(path)
    manifest = [
        {"layer": i, "name": name, "shape": list(p.shape)}
        for i, name, p in net.parameters()
    ]
    header = {
        "format_version": CHECKPOINT_VERSION,
        "dtype": "float64",
        "architecture": describe_architecture(net),
        "params": manifest,
        "total_params": net.param_count(),
        "class_order": list(CLASS_DIR_NAMES),
        "metadata": metadata or {},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(len(header_bytes).to_bytes(4, "little"))
        fh.write(header_bytes)
        for _, _, p in net.parameters():
            fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())
    os.replace(tmp, path)


def _read_header(data: bytes, path) -> tuple[dict, int]:
    if data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"{path}: bad magic {data[:4]!r}")
    if len(data) < 8:
        raise CheckpointCorruptionError(f"{path}: truncated header")
    header_len = int.from_bytes(data[4:8], "little")
    header_bytes = data[8:8 + header_len]
    if len(header_bytes) != header_len:
        raise CheckpointCorruptionError(f"{path}: truncated header")
    try:
        header = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointCorruptionError(f"{path}: unreadable header: {exc}") from exc
    if header.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"{path}: format version {header.get('format_version')} not supported"
        )
    return header, 8 + header_len


def read_checkpoint_header(path: str | Path) -> dict:
    return _read_header(Path(path).read_bytes(), path)[0]


def load_model(path: str | Path) -> Network:
    """Validate magic/version/shapes and reconstruct the network bitwise."""
    path = Path(path)
    data = path.read_bytes()
    header, offset = _read_header(data, path)
    net = network_from_description(header["architecture"])
    params = {(i, name): p for i, name, p in net.parameters()}
    blob = data[offset:]
    pos = 0
    for entry in header["params"]:
        key = (entry["layer"], entry["name"])
        if key not in params:
            raise CheckpointCorruptionError(f"{path}: unknown parameter {key}")
        p = params[key]
        if list(p.shape) != entry["shape"]:
            raise CheckpointCorruptionError(
                f"{path}: parameter {key} shape {entry['shape']} does not match architecture"
            )
        nbytes = p.size * 8
        chunk = blob[pos:pos + nbytes]
        if len(chunk) != nbytes:
            raise CheckpointCorruptionError(f"{path}: parameter blob truncated at {key}")
        p[...] = np.frombuffer(chunk, dtype="<f8").reshape(p.shape)
        pos += nbytes
    if pos != len(blob):
        raise CheckpointCorruptionError(f"{path}: {len(blob) - pos} trailing bytes")
    return net
