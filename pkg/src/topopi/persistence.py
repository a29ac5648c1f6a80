"""Persistent homology of sublevel filtrations on cubical complexes.

The complex follows the T-construction: pixels are the top-dimensional cells
and every edge/vertex inherits the minimum filtration value of the pixels it
bounds. Sublevel sets are then exactly unions of closed pixel squares, which
gives foreground 8-connectivity and hole 4-connectivity.

``compute_persistence`` runs column reduction over Z/2 with the clearing
optimization: the square/edge boundary block is reduced first (dim-1 pairs),
and every edge paired there is cleared from the edge/vertex block before the
dim-0 reduction. Columns are Python integers used as bit masks; pivot lookup
is the highest set bit. ``persistence_dim0_unionfind`` is an independent
elder-rule union-find used to cross-validate the dim-0 bars.

Filtration ties are broken by lexicographic cell index so the reduction order
is deterministic; the resulting diagram is tie-independent either way.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Union

import numpy as np

from .errors import ContractError, FormatError
from .filtration import FiltrationField
from .segmap import STRUCT_4, STRUCT_8, ContourSet, SegMap, label_components

Bar = tuple[float, float, int]  # (birth, death, homology dimension)


class BettiPair(NamedTuple):
    b0: int
    b1: int


@dataclass(frozen=True)
class PersistenceDiagram:
    """Finite multiset of (birth, death, dim) bars, canonically ordered.

    Essential classes are reported with death equal to ``field_cap``; bars
    with birth == death are excluded.
    """

    bars: tuple[Bar, ...]
    field_cap: float

    def __post_init__(self):
        bars = tuple(sorted((float(b), float(d), int(dim)) for b, d, dim in self.bars))
        ordered = tuple(sorted(bars, key=lambda bar: (bar[2], bar[0], bar[1])))
        for b, d, dim in ordered:
            if not 0.0 <= b < d <= self.field_cap:
                raise ContractError(f"bar ({b}, {d}) violates 0 <= birth < death <= cap")
            if dim not in (0, 1):
                raise ContractError(f"unsupported homology dimension {dim}")
        object.__setattr__(self, "bars", ordered)

    def __len__(self) -> int:
        return len(self.bars)

    def dim_bars(self, dim: int) -> np.ndarray:
        """(n, 2) array of (birth, death) for one homology dimension."""
        rows = [(b, d) for b, d, k in self.bars if k == dim]
        return np.array(rows, dtype=np.float64).reshape(-1, 2)


# ---------------------------------------------------------------------------
# Cell enumeration (T-construction)
# ---------------------------------------------------------------------------

def _cell_values(values: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vertex, horizontal-edge, and vertical-edge values: min over pixel cofaces.

    Horizontal edges separate vertically adjacent pixels and form an
    (h+1, w) grid; vertical edges an (h, w+1) grid; vertices (h+1, w+1).
    """
    h, w = values.shape
    padded = np.pad(values, 1, constant_values=np.inf)
    hedge = np.minimum(padded[0 : h + 1, 1 : w + 1], padded[1 : h + 2, 1 : w + 1])
    vedge = np.minimum(padded[1 : h + 1, 0 : w + 1], padded[1 : h + 1, 1 : w + 2])
    vertex = np.minimum.reduce(
        [
            padded[0 : h + 1, 0 : w + 1],
            padded[0 : h + 1, 1 : w + 2],
            padded[1 : h + 2, 0 : w + 1],
            padded[1 : h + 2, 1 : w + 2],
        ]
    )
    return vertex, hedge, vedge


def compute_persistence(field: FiltrationField) -> PersistenceDiagram:
    """Dim-0 and dim-1 bars of the sublevel filtration of ``field``."""
    h, w = field.height, field.width
    pix = field.values.ravel()
    cap = field.cap

    vertex, hedge, vedge = _cell_values(field.values)
    n_he = (h + 1) * w
    n_ve = h * (w + 1)
    edge_vals = np.concatenate([hedge.ravel(), vedge.ravel()])
    n_e = n_he + n_ve
    n_v = (h + 1) * (w + 1)
    vert_vals = vertex.ravel()

    edge_order = np.lexsort((np.arange(n_e), edge_vals))
    edge_rank = np.empty(n_e, dtype=np.int64)
    edge_rank[edge_order] = np.arange(n_e)
    vert_order = np.lexsort((np.arange(n_v), vert_vals))
    vert_rank = np.empty(n_v, dtype=np.int64)
    vert_rank[vert_order] = np.arange(n_v)

    # boundary edges of each square, by rank
    sq = np.arange(h * w)
    r_idx, c_idx = np.divmod(sq, w)
    square_rows = np.stack(
        [
            edge_rank[r_idx * w + c_idx],               # top h-edge
            edge_rank[(r_idx + 1) * w + c_idx],         # bottom h-edge
            edge_rank[n_he + r_idx * (w + 1) + c_idx],      # left v-edge
            edge_rank[n_he + r_idx * (w + 1) + c_idx + 1],  # right v-edge
        ],
        axis=1,
    )

    bars: list[Bar] = []

    # --- dim-1: reduce the square/edge boundary block -----------------------
    square_order = np.lexsort((sq, pix)).tolist()
    pivot_cols: dict[int, int] = {}
    edge_paired = np.zeros(n_e, dtype=bool)  # edges killed here get cleared below
    for s in square_order:
        col = 0
        for rank in square_rows[s]:
            col |= 1 << int(rank)
        while col:
            low = col.bit_length() - 1
            claimed = pivot_cols.get(low)
            if claimed is None:
                pivot_cols[low] = col
                edge_paired[edge_order[low]] = True
                birth = edge_vals[edge_order[low]]
                death = pix[s]
                if birth < death:
                    bars.append((float(birth), float(death), 1))
                break
            col ^= claimed

    # --- dim-0: reduce the cleared edge/vertex block -------------------------
    # endpoints of each edge, as vertex ids on the (h+1, w+1) lattice
    he = np.arange(n_he)
    he_r, he_c = np.divmod(he, w)
    he_u = he_r * (w + 1) + he_c
    ve = np.arange(n_ve)
    ve_r, ve_c = np.divmod(ve, w + 1)
    ve_u = ve_r * (w + 1) + ve_c
    end_a = np.concatenate([he_u, ve_u])
    end_b = np.concatenate([he_u + 1, ve_u + (w + 1)])

    pivot_cols0: dict[int, int] = {}
    vertex_paired = np.zeros(n_v, dtype=bool)
    for e in edge_order.tolist():
        if edge_paired[e]:
            continue
        col = (1 << int(vert_rank[end_a[e]])) | (1 << int(vert_rank[end_b[e]]))
        while col:
            low = col.bit_length() - 1
            claimed = pivot_cols0.get(low)
            if claimed is None:
                pivot_cols0[low] = col
                vertex_paired[vert_order[low]] = True
                birth = vert_vals[vert_order[low]]
                death = edge_vals[e]
                if birth < death:
                    bars.append((float(birth), float(death), 0))
                break
            col ^= claimed
        else:
            # positive edge never killed by a square: essential dim-1 class
            if edge_vals[e] < cap:
                bars.append((float(edge_vals[e]), float(cap), 1))

    # unpaired vertices carry the essential dim-0 classes
    for v in np.flatnonzero(~vertex_paired):
        if vert_vals[v] < cap:
            bars.append((float(vert_vals[v]), float(cap), 0))

    return PersistenceDiagram(bars=tuple(bars), field_cap=cap)


def persistence_dim0_unionfind(field: FiltrationField) -> PersistenceDiagram:
    """Dim-0 bars only, via elder-rule union-find on 8-connected pixels.

    Independent fast path: must produce the same dim-0 multiset as
    ``compute_persistence``.
    """
    h, w = field.height, field.width
    n = h * w
    vals = field.values.ravel()
    order = np.lexsort((np.arange(n), vals)).tolist()
    parent = list(range(n))
    birth = vals.tolist()
    entered = bytearray(n)
    vals_list = vals.tolist()

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    bars: list[Bar] = []
    for p in order:
        r, c = divmod(p, w)
        entered[p] = 1
        current = vals_list[p]
        for dr in (-1, 0, 1):
            rr = r + dr
            if rr < 0 or rr >= h:
                continue
            base = rr * w
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                cc = c + dc
                if cc < 0 or cc >= w:
                    continue
                q = base + cc
                if not entered[q]:
                    continue
                root_p, root_q = find(p), find(q)
                if root_p == root_q:
                    continue
                # elder rule: the younger root (higher birth, index tie-break) dies
                if (birth[root_p], root_p) > (birth[root_q], root_q):
                    root_p, root_q = root_q, root_p
                if birth[root_q] < current:
                    bars.append((birth[root_q], current, 0))
                parent[root_q] = root_p
    survivors = {find(i) for i in range(n)}
    for root in survivors:
        if birth[root] < field.cap:
            bars.append((birth[root], field.cap, 0))
    return PersistenceDiagram(bars=tuple(bars), field_cap=field.cap)


# ---------------------------------------------------------------------------
# Betti numbers of binary masks
# ---------------------------------------------------------------------------

MaskLike = Union[ContourSet, SegMap, np.ndarray]


def _as_mask(mask: MaskLike) -> np.ndarray:
    if isinstance(mask, ContourSet):
        return mask.mask
    if isinstance(mask, SegMap):
        return mask.foreground
    return np.asarray(mask, dtype=bool)


def betti_numbers(mask: MaskLike) -> BettiPair:
    """(b0, b1) of a binary mask.

    b0 counts 8-connected foreground components; b1 counts 4-connected
    background components that do not touch the image border (enclosed holes).
    """
    fg = _as_mask(mask)
    _, b0 = label_components(fg, connectivity=8)
    bg_labels, n_bg = label_components(~fg, connectivity=4)
    if n_bg == 0:
        return BettiPair(b0=b0, b1=0)
    border = np.unique(
        np.concatenate(
            [bg_labels[0, :], bg_labels[-1, :], bg_labels[:, 0], bg_labels[:, -1]]
        )
    )
    touching = len(border[border > 0])
    return BettiPair(b0=b0, b1=n_bg - touching)


def euler_characteristic_cellcount(mask: MaskLike) -> int:
    """V - E + F of the closed-square complex of a mask (consistency check)."""
    fg = _as_mask(mask).astype(np.float64)
    fg = np.where(fg > 0, 1.0, np.inf)
    vertex, hedge, vedge = _cell_values(fg)
    v = int(np.isfinite(vertex).sum())
    e = int(np.isfinite(hedge).sum() + np.isfinite(vedge).sum())
    f = int(np.isfinite(fg).sum())
    return v - e + f


# ---------------------------------------------------------------------------
# Diagram CSV export
# ---------------------------------------------------------------------------

def diagram_to_csv(diagram: PersistenceDiagram) -> str:
    lines = ["dim,birth,death"]
    for b, d, dim in diagram.bars:
        lines.append(f"{dim},{b:.17g},{d:.17g}")
    return "\n".join(lines) + "\n"


def write_diagram_csv(diagram: PersistenceDiagram, path: str | Path) -> None:
    Path(path).write_text(diagram_to_csv(diagram), encoding="ascii")


def read_diagram_csv(path: str | Path, field_cap: float | None = None) -> PersistenceDiagram:
    text = Path(path).read_text(encoding="ascii")
    reader = io.StringIO(text)
    header = reader.readline().strip()
    if header != "dim,birth,death":
        raise FormatError(f"bad diagram CSV header {header!r}", offset=0)
    bars = []
    for line in reader:
        line = line.strip()
        if not line:
            continue
        dim_s, b_s, d_s = line.split(",")
        bars.append((float(b_s), float(d_s), int(dim_s)))
    if field_cap is None:
        field_cap = max((d for _, d, _ in bars), default=1.0)
    return PersistenceDiagram(bars=tuple(bars), field_cap=field_cap)
