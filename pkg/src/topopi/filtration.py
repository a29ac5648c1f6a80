"""Density-based filtration fields on the pixel grid.

Contour pixels seed a Gaussian kernel density estimate; its negative log
(clamped to a finite cap) is the sublevel filtration the persistence module
consumes. Densities are peak-normalized so the most contour-dense pixel sits
at filtration value 0 and fields stay comparable across images.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, EmptyContoursError, FormatError
from .segmap import ContourSet

FIELD_MAGIC = b"TPF1"

DEFAULT_BANDWIDTH = 1.0
DEFAULT_CAP = 20.0

# Gaussian contributions below exp(-18) are dropped: support radius 6B.
CUTOFF_SIGMAS = 6.0


@dataclass(frozen=True)
class FiltrationField:
    """Per-pixel filtration values in [0, cap], finite everywhere."""

    width: int
    height: int
    values: np.ndarray  # (height, width) float64, read-only
    bandwidth: float
    cap: float

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.shape != (self.height, self.width):
            raise ContractError(
                f"values shape {values.shape} != ({self.height}, {self.width})"
            )
        if self.cap <= 0:
            raise ContractError(f"cap must be > 0, got {self.cap}")
        if not np.all(np.isfinite(values)):
            raise ContractError("filtration values must be finite")
        if values.size and (values.min() < 0.0 or values.max() > self.cap):
            raise ContractError("filtration values must lie in [0, cap]")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


def _gaussian_patch(bandwidth: float) -> tuple[int, np.ndarray]:
    """Kernel patch on integer offsets, zero outside the cutoff disc."""
    radius = int(np.floor(CUTOFF_SIGMAS * bandwidth))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    d2 = offsets[:, None] ** 2 + offsets[None, :] ** 2
    patch = np.exp(-d2 / (2.0 * bandwidth * bandwidth))
    patch[d2 > (CUTOFF_SIGMAS * bandwidth) ** 2] = 0.0
    return radius, patch


def _raw_kde(contours: ContourSet, bandwidth: float) -> np.ndarray:
    """Unnormalized Gaussian KDE on the pixel grid, fixed summation order."""
    h, w = contours.height, contours.width
    radius, patch = _gaussian_patch(bandwidth)
    raw = np.zeros((h, w), dtype=np.float64)
    for r, c in contours.points():
        r0, r1 = max(r - radius, 0), min(r + radius + 1, h)
        c0, c1 = max(c - radius, 0), min(c + radius + 1, w)
        raw[r0:r1, c0:c1] += patch[
            r0 - r + radius : r1 - r + radius, c0 - c + radius : c1 - c + radius
        ]
    return raw


def kde_density(contours: ContourSet, bandwidth: float = DEFAULT_BANDWIDTH) -> np.ndarray:
    """Peak-normalized Gaussian kernel density of the contour points.

    Pixel coordinates are cell centers on the integer lattice. The returned
    grid has maximum exactly 1; values are 0 only where every contour point
    is beyond the kernel cutoff radius.
    """
    if bandwidth <= 0:
        raise ContractError(f"bandwidth must be > 0, got {bandwidth}")
    if contours.count < 1:
        raise EmptyContoursError("cannot estimate density of an empty contour set")
    raw = _raw_kde(contours, bandwidth)
    return raw / raw.max()


def neglog_filtration(
    density: np.ndarray, cap: float = DEFAULT_CAP, bandwidth: float = DEFAULT_BANDWIDTH
) -> FiltrationField:
    """Negative-log filtration of a density grid, clamped to a finite cap.

    Pixels whose density underflowed to 0 get the cap, so every pixel enters
    the filtration at a finite time. ``bandwidth`` is recorded for provenance.
    """
    if cap <= 0:
        raise ContractError(f"cap must be > 0, got {cap}")
    density = np.asarray(density, dtype=np.float64)
    with np.errstate(divide="ignore"):
        values = np.where(density > 0.0, -np.log(np.maximum(density, 1e-300)), cap)
    values = np.minimum(values, cap)
    values = np.maximum(values, 0.0)  # folds -0.0 at the density peak to 0.0
    h, w = density.shape
    return FiltrationField(width=w, height=h, values=values, bandwidth=bandwidth, cap=cap)


def field_from_contours(
    contours: ContourSet, bandwidth: float = DEFAULT_BANDWIDTH, cap: float = DEFAULT_CAP
) -> FiltrationField:
    """Compose the KDE and negative-log steps."""
    return neglog_filtration(kde_density(contours, bandwidth), cap, bandwidth)


def total_variation(values: np.ndarray) -> float:
    """Sum of absolute horizontal and vertical first differences."""
    values = np.asarray(values, dtype=np.float64)
    return float(np.abs(np.diff(values, axis=0)).sum() + np.abs(np.diff(values, axis=1)).sum())


# ---------------------------------------------------------------------------
# Raw float32 raster export (debugging and sweep fixtures)
# ---------------------------------------------------------------------------

def write_field(field: FiltrationField, path: str | Path) -> None:
    header = struct.pack("<4sII", FIELD_MAGIC, field.width, field.height)
    Path(path).write_bytes(header + field.values.astype("<f4").tobytes())


def read_field(path: str | Path, bandwidth: float = DEFAULT_BANDWIDTH,
               cap: float = DEFAULT_CAP) -> FiltrationField:
    data = Path(path).read_bytes()
    header = struct.calcsize("<4sII")
    if len(data) < header:
        raise FormatError("truncated field header", offset=len(data))
    magic, width, height = struct.unpack_from("<4sII", data, 0)
    if magic != FIELD_MAGIC:
        raise FormatError(f"bad field magic {magic!r}", offset=0)
    n = width * height
    payload = np.frombuffer(data, dtype="<f4", offset=header)
    if payload.size != n:
        raise FormatError(
            f"field payload mismatch: expected {n} floats, got {payload.size}", offset=header
        )
    values = payload.astype(np.float64).reshape(height, width)
    return FiltrationField(width=width, height=height, values=values,
                           bandwidth=bandwidth, cap=cap)
