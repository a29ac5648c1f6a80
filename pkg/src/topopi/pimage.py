"""Persistence images: weighted Gaussian rasterization of a diagram.

Diagram points move to (birth, lifetime) coordinates, each contributes an
isotropic Gaussian scaled by the lifetime weighting, and cell values are the
exact integral of that mixture over each cell rectangle (per-axis normal CDF
differences). The raster is finally z-normalized.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from .errors import ContractError, EmptyContoursError, FormatError
from .filtration import DEFAULT_BANDWIDTH, DEFAULT_CAP, field_from_contours
from .persistence import PersistenceDiagram, compute_persistence
from .segmap import SegMap, extract_contours

PI_MAGIC = b"TPP1"

DEFAULT_RESOLUTION = (64, 64)
DEFAULT_SIGMA2 = 1.0
DEFAULT_GAMMA = 2.0


@dataclass(frozen=True)
class PersistenceImageConfig:
    """Raster geometry plus the Gaussian variance and weighting exponent."""

    resolution: tuple[int, int] = DEFAULT_RESOLUTION  # (rows, cols)
    extent: tuple[float, float] = (DEFAULT_CAP, DEFAULT_CAP)  # (birth_max, lifetime_max)
    sigma2: float = DEFAULT_SIGMA2
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        rows, cols = self.resolution
        if rows < 1 or cols < 1:
            raise ContractError(f"resolution components must be >= 1, got {self.resolution}")
        bmax, lmax = self.extent
        if bmax <= 0 or lmax <= 0:
            raise ContractError(f"extent components must be > 0, got {self.extent}")
        if self.sigma2 <= 0:
            raise ContractError(f"sigma2 must be > 0, got {self.sigma2}")
        if self.gamma < 0:
            raise ContractError(f"gamma must be >= 0, got {self.gamma}")
        object.__setattr__(self, "resolution", (int(rows), int(cols)))
        object.__setattr__(self, "extent", (float(bmax), float(lmax)))


@dataclass(frozen=True)
class PersistenceImage:
    """Fixed-resolution raster of a diagram, optionally z-normalized.

    ``degenerate`` marks images produced from maps without contours.
    """

    values: np.ndarray  # (rows, cols) float64, read-only
    normalized: bool
    config: PersistenceImageConfig
    degenerate: bool = False

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.shape != self.config.resolution:
            raise ContractError(
                f"raster shape {values.shape} != configured resolution {self.config.resolution}"
            )
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def resolution(self) -> tuple[int, int]:
        return self.config.resolution


def linear_transform(diagram: PersistenceDiagram, dims: tuple[int, ...] = (1,)) -> np.ndarray:
    """(birth, lifetime) points of the selected homology dimensions, (n, 2).

    The loss uses 1-dimensional homology only; pass ``dims=(0, 1)`` to also
    include connected-component bars.
    """
    points = [(b, d - b) for b, d, k in diagram.bars if k in dims]
    return np.array(points, dtype=np.float64).reshape(-1, 2)


def weight(y, gamma: float):
    """Lifetime weighting: y**gamma when gamma >= 1, identity otherwise."""
    if gamma < 0:
        raise ContractError(f"gamma must be >= 0, got {gamma}")
    y = np.asarray(y, dtype=np.float64)
    out = y ** gamma if gamma >= 1.0 else y
    return float(out) if out.ndim == 0 else out


def rasterize(points: np.ndarray, config: PersistenceImageConfig) -> PersistenceImage:
    """Unnormalized raster: sum of weighted Gaussian cell masses.

    Cell (r, c) covers birth in [c, c+1) * birth_max/cols and lifetime in
    [r, r+1) * lifetime_max/rows. Points outside the extent still contribute
    their tail mass. An empty point set yields an all-zero raster.
    """
    rows, cols = config.resolution
    bmax, lmax = config.extent
    sigma = math.sqrt(config.sigma2)
    x_edges = np.linspace(0.0, bmax, cols + 1)
    y_edges = np.linspace(0.0, lmax, rows + 1)
    raster = np.zeros((rows, cols), dtype=np.float64)
    points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    for x, y in points:
        cdf_x = ndtr((x_edges - x) / sigma)
        cdf_y = ndtr((y_edges - y) / sigma)
        mass_x = np.diff(cdf_x)
        mass_y = np.diff(cdf_y)
        raster += weight(y, config.gamma) * np.outer(mass_y, mass_x)
    return PersistenceImage(values=raster, normalized=False, config=config)


def z_normalize(image: PersistenceImage) -> PersistenceImage:
    """Standardize to zero mean and unit population std; constant input -> zeros."""
    if image.normalized:
        raise ContractError("image is already normalized")
    values = image.values
    if values.size == 0 or np.ptp(values) == 0.0:
        out = np.zeros_like(values)
    else:
        out = (values - values.mean()) / values.std()
    return PersistenceImage(values=out, normalized=True, config=image.config,
                            degenerate=image.degenerate)


def pi_from_diagram(
    diagram: PersistenceDiagram,
    config: PersistenceImageConfig,
    dims: tuple[int, ...] = (1,),
    degenerate: bool = False,
) -> PersistenceImage:
    """Rasterize a precomputed diagram and z-normalize.

    This is the re-rasterization affordance: cached diagrams can be rendered
    under a new gamma without recomputing homology.
    """
    raw = rasterize(linear_transform(diagram, dims), config)
    if degenerate:
        raw = PersistenceImage(values=raw.values, normalized=False, config=config,
                               degenerate=True)
    return z_normalize(raw)


def compute_diagram(
    m: SegMap, bandwidth: float = DEFAULT_BANDWIDTH, cap: float = DEFAULT_CAP
) -> tuple[PersistenceDiagram, bool]:
    """Contours -> density filtration -> persistence. Returns (diagram, degenerate).

    A map without foreground has no contours; its diagram is defined as empty
    and the degenerate flag is set.
    """
    try:
        field = field_from_contours(extract_contours(m), bandwidth, cap)
    except EmptyContoursError:
        return PersistenceDiagram(bars=(), field_cap=cap), True
    return compute_persistence(field), False


def persistence_image(
    m: SegMap,
    bandwidth: float = DEFAULT_BANDWIDTH,
    sigma2: float = DEFAULT_SIGMA2,
    gamma: float = DEFAULT_GAMMA,
    config: PersistenceImageConfig | None = None,
    *,
    cap: float = DEFAULT_CAP,
    dims: tuple[int, ...] = (1,),
) -> PersistenceImage:
    """Full pipeline from a segmentation map to a normalized persistence image.

    ``config`` supplies raster geometry (resolution and extent, the latter
    defaulting to the filtration cap on both axes); the explicit ``sigma2``
    and ``gamma`` arguments take precedence over the config fields.
    """
    if config is None:
        config = PersistenceImageConfig(extent=(cap, cap), sigma2=sigma2, gamma=gamma)
    else:
        config = replace(config, sigma2=sigma2, gamma=gamma)
    diagram, degenerate = compute_diagram(m, bandwidth, cap)
    return pi_from_diagram(diagram, config, dims, degenerate=degenerate)


# ---------------------------------------------------------------------------
# Raster export
# ---------------------------------------------------------------------------

def write_pi(image: PersistenceImage, path: str | Path) -> None:
    rows, cols = image.resolution
    bmax, lmax = image.config.extent
    header = struct.pack(
        "<4sIIdddd", PI_MAGIC, rows, cols, image.config.gamma, image.config.sigma2, bmax, lmax
    )
    Path(path).write_bytes(header + image.values.astype("<f4").tobytes())


def read_pi(path: str | Path, normalized: bool = True) -> PersistenceImage:
    data = Path(path).read_bytes()
    header = struct.calcsize("<4sIIdddd")
    if len(data) < header:
        raise FormatError("truncated persistence-image header", offset=len(data))
    magic, rows, cols, gamma, sigma2, bmax, lmax = struct.unpack_from("<4sIIdddd", data, 0)
    if magic != PI_MAGIC:
        raise FormatError(f"bad persistence-image magic {magic!r}", offset=0)
    payload = np.frombuffer(data, dtype="<f4", offset=header)
    if payload.size != rows * cols:
        raise FormatError(
            f"persistence-image payload mismatch: expected {rows * cols}, got {payload.size}",
            offset=header,
        )
    config = PersistenceImageConfig(
        resolution=(rows, cols), extent=(bmax, lmax), sigma2=sigma2, gamma=gamma
    )
    values = payload.astype(np.float64).reshape(rows, cols)
    return PersistenceImage(values=values, normalized=normalized, config=config)


def write_preview_pgm(image: PersistenceImage, path: str | Path) -> None:
    """8-bit min-max scaled preview, lifetime axis pointing up."""
    values = image.values
    lo, hi = float(values.min()), float(values.max())
    if hi > lo:
        scaled = np.round((values - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(values)
    pixels = scaled.astype(np.uint8)[::-1, :]  # row 0 at the top = highest lifetime
    header = f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n255\n".encode("ascii")
    Path(path).write_bytes(header + pixels.tobytes())
