"""Segmentation maps: loading, contour extraction, and overlap filtering.

A segmentation map is a labeled 2D pixel grid. Label 0 is background; any
positive label is a foreground class. Contours are the foreground pixels
whose 4-neighborhood crosses a label change (or the image border).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ContractError, FormatError

RAW_MAGIC = b"TPI1"

# 8-connectivity for foreground, 4-connectivity for background: the standard
# complementary pairing that avoids digital-topology paradoxes.
STRUCT_8 = np.ones((3, 3), dtype=bool)
STRUCT_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass(frozen=True)
class SegMap:
    """A labeled pixel grid with an opaque source identifier for reporting."""

    width: int
    height: int
    labels: np.ndarray  # (height, width) uint8, read-only
    source_id: str = ""

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ContractError(f"map dimensions must be >= 1, got {self.width}x{self.height}")
        labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        if labels.shape != (self.height, self.width):
            raise ContractError(
                f"labels shape {labels.shape} != (height, width) = ({self.height}, {self.width})"
            )
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_array(cls, labels: np.ndarray, source_id: str = "") -> "SegMap":
        labels = np.asarray(labels)
        if labels.ndim != 2:
            raise ContractError(f"expected a 2D label array, got ndim={labels.ndim}")
        h, w = labels.shape
        return cls(width=w, height=h, labels=labels.astype(np.uint8), source_id=source_id)

    @property
    def foreground(self) -> np.ndarray:
        return self.labels > 0

    def is_empty(self) -> bool:
        return not bool(self.labels.any())


@dataclass(frozen=True)
class ContourSet:
    """Boolean mask of contour pixels of a segmentation map."""

    width: int
    height: int
    mask: np.ndarray  # (height, width) bool, read-only
    count: int = field(default=-1)

    def __post_init__(self):
        mask = np.ascontiguousarray(self.mask, dtype=bool)
        if mask.shape != (self.height, self.width):
            raise ContractError(
                f"mask shape {mask.shape} != (height, width) = ({self.height}, {self.width})"
            )
        mask.flags.writeable = False
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "count", int(mask.sum()))

    def points(self) -> np.ndarray:
        """Contour pixel coordinates as an (n, 2) array of (row, col), scan order."""
        return np.argwhere(self.mask)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def _infer_format(path: Path) -> str:
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        return "pgm"
    if suffix == ".png":
        return "png"
    if suffix in (".tpi1", ".raw"):
        return "raw-u8"
    raise FormatError(f"cannot infer format from suffix {suffix!r} of {path}")


def _parse_pgm(data: bytes, source_id: str) -> SegMap:
    if len(data) < 2:
        raise FormatError("truncated PGM header", offset=len(data))
    magic = data[:2]
    if magic not in (b"P5", b"P2"):
        raise FormatError(f"not a PGM file: magic {magic!r}", offset=0)

    # Header tokenizer: whitespace-separated tokens, '#' comments to end of line.
    pos = 2
    tokens: list[tuple[int, bytes]] = []
    while len(tokens) < 3 and pos < len(data):
        ch = data[pos : pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            start = pos
            while pos < len(data) and not data[pos : pos + 1].isspace():
                pos += 1
            tokens.append((start, data[start:pos]))
    if len(tokens) < 3:
        raise FormatError("PGM header ended before width/height/maxval", offset=len(data))

    values = []
    for start, tok in tokens:
        try:
            values.append(int(tok))
        except ValueError:
            raise FormatError(f"non-numeric PGM header token {tok!r}", offset=start) from None
    width, height, maxval = values
    if width < 1 or height < 1:
        raise FormatError(f"invalid PGM dimensions {width}x{height}", offset=tokens[0][0])
    if not 0 < maxval <= 255:
        raise FormatError(f"unsupported PGM bit depth: maxval {maxval}", offset=tokens[2][0])

    n = width * height
    if magic == b"P5":
        pos += 1  # exactly one whitespace byte after maxval
        if len(data) - pos < n:
            raise FormatError(
                f"PGM pixel data truncated: expected {n} bytes, got {len(data) - pos}",
                offset=len(data),
            )
        pixels = np.frombuffer(data, dtype=np.uint8, count=n, offset=pos)
    else:
        body = data[pos:]
        # strip comments from the ASCII body as well
        lines = [ln.split(b"#", 1)[0] for ln in body.splitlines()]
        try:
            flat = np.array(b" ".join(lines).split(), dtype=np.int64)
        except ValueError:
            raise FormatError("non-numeric P2 pixel token", offset=pos) from None
        if flat.size != n:
            raise FormatError(
                f"P2 pixel count mismatch: expected {n}, got {flat.size}", offset=len(data)
            )
        if flat.min(initial=0) < 0 or flat.max(initial=0) > maxval:
            raise FormatError("P2 pixel value out of range", offset=pos)
        pixels = flat.astype(np.uint8)
    return SegMap(width=width, height=height, labels=pixels.reshape(height, width),
                  source_id=source_id)


def _parse_raw_u8(data: bytes, source_id: str) -> SegMap:
    header = struct.calcsize("<4sII")
    if len(data) < header:
        raise FormatError("truncated raw-u8 header", offset=len(data))
    magic, width, height = struct.unpack_from("<4sII", data, 0)
    if magic != RAW_MAGIC:
        raise FormatError(f"bad raw-u8 magic {magic!r}", offset=0)
    if width < 1 or height < 1:
        raise FormatError(f"invalid raw-u8 dimensions {width}x{height}", offset=4)
    n = width * height
    if len(data) - header != n:
        raise FormatError(
            f"raw-u8 payload mismatch: expected {n} bytes, got {len(data) - header}",
            offset=header,
        )
    pixels = np.frombuffer(data, dtype=np.uint8, count=n, offset=header)
    return SegMap(width=width, height=height, labels=pixels.reshape(height, width),
                  source_id=source_id)


def _parse_png(path: Path, source_id: str) -> SegMap:
    try:
        from PIL import Image
    except ImportError as exc:  # optional feature: install topopi[png]
        raise FormatError("PNG support requires the optional pillow dependency") from exc
    with Image.open(path) as img:
        if img.mode != "L":
            raise FormatError(f"PNG must be 8-bit grayscale (mode L), got mode {img.mode!r}")
        arr = np.asarray(img, dtype=np.uint8)
    return SegMap.from_array(arr, source_id=source_id)


def load_segmap(path: str | Path, format: str | None = None) -> SegMap:
    """Load a segmentation map; label values are the stored pixel values.

    ``format`` is one of ``pgm``, ``png``, ``raw-u8``; inferred from the file
    suffix when omitted.
    """
    path = Path(path)
    fmt = format or _infer_format(path)
    source_id = path.name
    if fmt == "png":
        return _parse_png(path, source_id)
    data = path.read_bytes()
    if fmt == "pgm":
        return _parse_pgm(data, source_id)
    if fmt == "raw-u8":
        return _parse_raw_u8(data, source_id)
    raise FormatError(f"unknown format {fmt!r}")


def write_segmap(m: SegMap, path: str | Path, format: str | None = None) -> None:
    """Write a map as binary PGM (P5), raw-u8, or 8-bit grayscale PNG."""
    path = Path(path)
    fmt = format or _infer_format(path)
    if fmt == "pgm":
        header = f"P5\n{m.width} {m.height}\n255\n".encode("ascii")
        path.write_bytes(header + m.labels.tobytes())
    elif fmt == "raw-u8":
        path.write_bytes(struct.pack("<4sII", RAW_MAGIC, m.width, m.height) + m.labels.tobytes())
    elif fmt == "png":
        try:
            from PIL import Image
        except ImportError as exc:
            raise FormatError("PNG support requires the optional pillow dependency") from exc
        Image.fromarray(np.asarray(m.labels), mode="L").save(path)
    else:
        raise FormatError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------

def extract_contours(m: SegMap) -> ContourSet:
    """Contour pixels of a map.

    A pixel is a contour pixel iff it is foreground and at least one of its
    4-neighbors carries a different label, or it lies on the image border.
    Taking the test per label and unioning over labels is equivalent: an
    internal boundary between two positive classes is a label change too.
    """
    lab = m.labels.astype(np.int16)
    padded = np.pad(lab, 1, constant_values=-1)  # border sentinel differs from every label
    center = padded[1:-1, 1:-1]
    differs = (
        (padded[:-2, 1:-1] != center)
        | (padded[2:, 1:-1] != center)
        | (padded[1:-1, :-2] != center)
        | (padded[1:-1, 2:] != center)
    )
    mask = (m.labels > 0) & differs
    return ContourSet(width=m.width, height=m.height, mask=mask)


def label_components(mask: np.ndarray, connectivity: int = 8) -> tuple[np.ndarray, int]:
    """Label connected components of a boolean mask. Returns (labels, count)."""
    if connectivity not in (4, 8):
        raise ContractError(f"connectivity must be 4 or 8, got {connectivity}")
    structure = STRUCT_8 if connectivity == 8 else STRUCT_4
    labeled, count = ndimage.label(mask, structure=structure)
    return labeled, int(count)


def filter_majority_overlap(pred: SegMap, gt: SegMap, threshold: float = 0.5) -> SegMap:
    """Drop predicted components whose ground-truth overlap is below threshold.

    Each 8-connected foreground component of ``pred`` is kept iff at least
    ``threshold`` of its pixels lie on ``gt`` foreground (inclusive >=).
    """
    if (pred.width, pred.height) != (gt.width, gt.height):
        raise ContractError(
            f"dimension mismatch: pred {pred.width}x{pred.height} vs gt {gt.width}x{gt.height}"
        )
    if not 0.0 < threshold <= 1.0:
        raise ContractError(f"threshold must be in (0, 1], got {threshold}")
    comp, count = label_components(pred.foreground, connectivity=8)
    if count == 0:
        return SegMap(pred.width, pred.height, pred.labels, pred.source_id)
    flat = comp.ravel()
    sizes = np.bincount(flat, minlength=count + 1)
    overlaps = np.bincount(flat, weights=gt.foreground.ravel().astype(np.float64),
                           minlength=count + 1)
    keep = overlaps >= threshold * sizes
    keep[0] = False
    new_labels = np.where(keep[comp], pred.labels, 0).astype(np.uint8)
    return SegMap(pred.width, pred.height, new_labels, pred.source_id)
