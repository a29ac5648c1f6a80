"""Deterministic synthetic segmentation maps with controlled corruptions.

Fixture generator for the corruption-sensitivity checks: multi-object maps
plus variants that delete, split, or merge objects, punch holes, or apply
topology-preserving one-pixel boundary jitter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .segmap import SegMap

CORRUPTIONS = ("none", "delete", "split", "merge", "hole", "jitter")

MARGIN = 4        # free pixels kept between objects and the border
SEPARATION = 4    # minimum gap between object supports


@dataclass(frozen=True)
class _Obj:
    row: int
    col: int
    radius: int
    shape: str  # "disk" or "square"


def _object_mask(obj: _Obj, size: int) -> np.ndarray:
    rr, cc = np.mgrid[0:size, 0:size]
    if obj.shape == "disk":
        return (rr - obj.row) ** 2 + (cc - obj.col) ** 2 <= obj.radius**2
    return (np.abs(rr - obj.row) <= obj.radius) & (np.abs(cc - obj.col) <= obj.radius)


def _place_objects(rng: np.random.Generator, n_objects: int, size: int) -> list[_Obj]:
    rmin = 4
    rmax = max(rmin, min(12, size // 10))
    objs: list[_Obj] = []
    for _ in range(n_objects):
        placed = False
        hi = rmax
        for attempt in range(400):
            if attempt and attempt % 80 == 0 and hi > rmin:
                hi -= 1  # shrink to guarantee placement on crowded grids
            radius = int(rng.integers(rmin, hi + 1))
            shape = "disk" if rng.random() < 0.7 else "square"
            # squares are checked by circumradius so the clearance test stays radial
            clearance = radius if shape == "disk" else int(np.ceil(radius * np.sqrt(2)))
            lo = MARGIN + radius
            if size - MARGIN - radius <= lo:
                continue
            row = int(rng.integers(lo, size - MARGIN - radius))
            col = int(rng.integers(lo, size - MARGIN - radius))
            ok = True
            for other in objs:
                oc = other.radius if other.shape == "disk" else int(np.ceil(other.radius * np.sqrt(2)))
                if np.hypot(row - other.row, col - other.col) < clearance + oc + SEPARATION:
                    ok = False
                    break
            if ok:
                objs.append(_Obj(row=row, col=col, radius=radius, shape=shape))
                placed = True
                break
        if not placed:
            raise ContractError(
                f"could not place {n_objects} objects on a {size}x{size} grid"
            )
    return objs


def _render(objs: list[_Obj], size: int, classes: int) -> np.ndarray:
    labels = np.zeros((size, size), dtype=np.uint8)
    for i, obj in enumerate(objs):
        labels[_object_mask(obj, size)] = 1 + i % classes
    return labels


def _thick_line(labels: np.ndarray, a: _Obj, b: _Obj, value: int) -> None:
    n = max(abs(a.row - b.row), abs(a.col - b.col)) * 2 + 1
    rows = np.linspace(a.row, b.row, n)
    cols = np.linspace(a.col, b.col, n)
    size = labels.shape[0]
    for r, c in zip(rows, cols):
        r0, c0 = int(round(r)), int(round(c))
        labels[max(r0 - 1, 0) : min(r0 + 2, size), max(c0 - 1, 0) : min(c0 + 2, size)] = value


def _jitter(labels: np.ndarray, objs: list[_Obj], size: int,
            rng: np.random.Generator) -> np.ndarray:
    """Add a few isolated single pixels along one object's outer boundary.

    Pixels are kept mutually non-adjacent and clear of other objects, so the
    topology of the map is untouched while its contour geometry is not.
    """
    idx = int(rng.integers(0, len(objs)))
    target = _object_mask(objs[idx], size)
    others = (labels > 0) & ~target
    fg_pad = np.pad(target, 1)
    neighbor = (
        fg_pad[:-2, 1:-1] | fg_pad[2:, 1:-1] | fg_pad[1:-1, :-2] | fg_pad[1:-1, 2:]
    )
    candidates = np.argwhere(neighbor & ~target)
    # keep 2 px clear of the border and of every other object
    others_pad = np.pad(others, 2)
    keep = []
    for r, c in candidates:
        if not 1 <= r < size - 1 or not 1 <= c < size - 1:
            continue
        if others_pad[r : r + 5, c : c + 5].any():
            continue
        keep.append((int(r), int(c)))
    out = labels.copy()
    chosen: list[tuple[int, int]] = []
    value = int(labels[objs[idx].row, objs[idx].col])
    for k in rng.permutation(len(keep)):
        r, c = keep[int(k)]
        if any(abs(r - pr) <= 1 and abs(c - pc) <= 1 for pr, pc in chosen):
            continue
        chosen.append((r, c))
        out[r, c] = value
        if len(chosen) >= max(2, len(keep) // 10):
            break
    return out


def synth_pair(
    seed: int,
    n_objects: int = 4,
    size: int = 128,
    corruption: str = "delete",
    classes: int = 1,
) -> tuple[SegMap, SegMap]:
    """A ground-truth map and its corrupted variant, fully seed-determined."""
    if corruption not in CORRUPTIONS:
        raise ContractError(f"unknown corruption {corruption!r}; pick one of {CORRUPTIONS}")
    if n_objects < 1:
        raise ContractError(f"n_objects must be >= 1, got {n_objects}")
    if corruption == "merge" and n_objects < 2:
        raise ContractError("merge corruption needs at least two objects")
    if size < 32:
        raise ContractError(f"size must be >= 32, got {size}")
    rng = np.random.default_rng(seed)
    objs = _place_objects(rng, n_objects, size)
    labels = _render(objs, size, classes)
    gt = SegMap.from_array(labels, source_id=f"synth_s{seed}")

    corrupted = labels.copy()
    if corruption == "none":
        pass
    elif corruption == "delete":
        idx = int(rng.integers(0, len(objs)))
        corrupted[_object_mask(objs[idx], size)] = 0
    elif corruption == "split":
        idx = int(rng.integers(0, len(objs)))
        obj = objs[idx]
        if rng.random() < 0.5:
            corrupted[obj.row : obj.row + 2, :] = np.where(
                _object_mask(obj, size)[obj.row : obj.row + 2, :],
                0,
                corrupted[obj.row : obj.row + 2, :],
            )
        else:
            corrupted[:, obj.col : obj.col + 2] = np.where(
                _object_mask(obj, size)[:, obj.col : obj.col + 2],
                0,
                corrupted[:, obj.col : obj.col + 2],
            )
    elif corruption == "merge":
        i, j = rng.permutation(len(objs))[:2]
        _thick_line(corrupted, objs[int(i)], objs[int(j)],
                    value=int(labels[objs[int(i)].row, objs[int(i)].col]))
    elif corruption == "hole":
        idx = int(rng.integers(0, len(objs)))
        obj = objs[idx]
        hole = _Obj(row=obj.row, col=obj.col, radius=max(1, obj.radius // 3), shape=obj.shape)
        corrupted[_object_mask(hole, size)] = 0
    elif corruption == "jitter":
        corrupted = _jitter(labels, objs, size, rng)

    pred = SegMap.from_array(corrupted, source_id=f"synth_s{seed}_{corruption}")
    return gt, pred
