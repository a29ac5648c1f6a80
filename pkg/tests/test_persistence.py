import numpy as np
import pytest

from topopi import (
    BettiPair,
    ContractError,
    ContourSet,
    FiltrationField,
    PersistenceDiagram,
    betti_numbers,
    compute_persistence,
    persistence_dim0_unionfind,
    read_diagram_csv,
    write_diagram_csv,
)
from topopi.persistence import euler_characteristic_cellcount

from oracles import dense_reduction_diagram, flood_betti


def field(values, cap=None, bandwidth=1.0):
    values = np.asarray(values, dtype=np.float64)
    cap = cap if cap is not None else float(values.max())
    h, w = values.shape
    return FiltrationField(width=w, height=h, values=values, bandwidth=bandwidth, cap=cap)


def random_field(rng, max_side=12, quantized=False):
    h = int(rng.integers(1, max_side + 1))
    w = int(rng.integers(1, max_side + 1))
    if quantized:
        values = rng.integers(0, 5, size=(h, w)).astype(np.float64)
    else:
        values = rng.random((h, w)) * 10.0
    cap = float(values.max()) + float(rng.random()) + 0.5
    return field(values, cap=cap)


# ---------------------------------------------------------------------------
# compute_persistence
# ---------------------------------------------------------------------------

class TestComputePersistence:
    def test_constant_field(self):
        diagram = compute_persistence(field(np.full((4, 5), 3.0), cap=10.0))
        assert diagram.bars == ((3.0, 10.0, 0),)

    def test_ring_field(self):
        # ring of value 1 around a center of 5, background 5, cap 10:
        # one component born at 1 (essential), one hole born at 1 filled at 5
        values = np.full((5, 5), 5.0)
        ring = np.zeros((5, 5), dtype=bool)
        ring[1:4, 1:4] = True
        ring[2, 2] = False
        values[ring] = 1.0
        diagram = compute_persistence(field(values, cap=10.0))
        assert diagram.bars == ((1.0, 10.0, 0), (1.0, 5.0, 1))
        assert diagram.bars == tuple(dense_reduction_diagram(values, 10.0))

    def test_matches_dense_reduction_oracle(self):
        rng = np.random.default_rng(42)
        for case in range(120):
            f = random_field(rng, quantized=case % 3 == 0)
            ours = compute_persistence(f).bars
            reference = tuple(dense_reduction_diagram(np.asarray(f.values), f.cap))
            assert ours == reference, f"mismatch on case {case}"

    def test_zero_length_bars_dropped(self):
        diagram = compute_persistence(field(np.full((3, 3), 2.0), cap=2.0))
        assert diagram.bars == ()
        for b, d, _ in diagram.bars:
            assert b < d

    def test_monotone_shift(self):
        rng = np.random.default_rng(8)
        values = rng.random((6, 6)) * 5.0
        cap = 7.0
        shift = 0.5
        base = compute_persistence(field(values, cap=cap))
        shifted = compute_persistence(field(values + shift, cap=cap + shift))
        expected = [(b + shift, d + shift, k) for b, d, k in base.bars]
        assert len(shifted.bars) == len(expected)
        for got, want in zip(shifted.bars, expected):
            assert got[2] == want[2]
            assert got[0] == pytest.approx(want[0], abs=1e-12)
            assert got[1] == pytest.approx(want[1], abs=1e-12)

    def test_canonical_ordering(self):
        rng = np.random.default_rng(13)
        diagram = compute_persistence(field(rng.random((8, 8)) * 4, cap=5.0))
        assert list(diagram.bars) == sorted(diagram.bars, key=lambda b: (b[2], b[0], b[1]))

    def test_at_least_one_dim0_bar(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            f = random_field(rng, max_side=6)
            diagram = compute_persistence(f)
            if np.asarray(f.values).min() < f.cap:
                assert len(diagram.dim_bars(0)) >= 1


# ---------------------------------------------------------------------------
# Union-find fast path
# ---------------------------------------------------------------------------

class TestUnionFindDim0:
    def test_strip_basins(self):
        # two basins at 1 and 2 separated by a 9: younger dies when they meet
        diagram = persistence_dim0_unionfind(field(np.array([[1.0, 9.0, 2.0]]), cap=10.0))
        assert diagram.bars == ((1.0, 10.0, 0), (2.0, 9.0, 0))

    def test_constant_field_single_bar(self):
        diagram = persistence_dim0_unionfind(field(np.full((3, 4), 2.0), cap=6.0))
        assert diagram.bars == ((2.0, 6.0, 0),)

    def test_matches_compute_persistence(self):
        rng = np.random.default_rng(77)
        for case in range(60):
            f = random_field(rng, max_side=8, quantized=case % 4 == 0)
            fast = persistence_dim0_unionfind(f).bars
            full = tuple(bar for bar in compute_persistence(f).bars if bar[2] == 0)
            assert fast == full


# ---------------------------------------------------------------------------
# Betti numbers
# ---------------------------------------------------------------------------

class TestBettiNumbers:
    def test_empty_mask(self):
        assert betti_numbers(np.zeros((5, 5), dtype=bool)) == BettiPair(0, 0)

    def test_filled_block(self):
        mask = np.zeros((6, 6), dtype=bool)
        mask[1:4, 1:4] = True
        assert betti_numbers(mask) == BettiPair(1, 0)

    def test_square_ring(self):
        mask = np.zeros((7, 7), dtype=bool)
        mask[1:6, 1:6] = True
        mask[2:5, 2:5] = False
        assert betti_numbers(mask) == flood_betti(mask) == (1, 1)

    def test_accepts_contour_set(self):
        mask = np.zeros((4, 4), dtype=bool)
        mask[1, 1] = True
        contours = ContourSet(width=4, height=4, mask=mask)
        assert betti_numbers(contours) == BettiPair(1, 0)

    def test_matches_flood_fill_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(60):
            mask = rng.random((rng.integers(1, 24), rng.integers(1, 24))) < rng.uniform(0.2, 0.7)
            assert tuple(betti_numbers(mask)) == flood_betti(mask)

    def test_euler_consistency(self):
        rng = np.random.default_rng(4)
        for _ in range(40):
            mask = rng.random((12, 12)) < 0.45
            b0, b1 = betti_numbers(mask)
            assert b0 - b1 == euler_characteristic_cellcount(mask)


# ---------------------------------------------------------------------------
# Diagram type and CSV
# ---------------------------------------------------------------------------

class TestPersistenceDiagram:
    def test_validation(self):
        with pytest.raises(ContractError):
            PersistenceDiagram(bars=((2.0, 1.0, 0),), field_cap=5.0)
        with pytest.raises(ContractError):
            PersistenceDiagram(bars=((1.0, 1.0, 0),), field_cap=5.0)
        with pytest.raises(ContractError):
            PersistenceDiagram(bars=((0.0, 6.0, 0),), field_cap=5.0)
        with pytest.raises(ContractError):
            PersistenceDiagram(bars=((0.0, 1.0, 2),), field_cap=5.0)

    def test_csv_roundtrip(self, tmp_path):
        diagram = PersistenceDiagram(bars=((0.25, 5.0, 0), (1.0 / 3.0, 2.0, 1)), field_cap=5.0)
        path = tmp_path / "diagram.csv"
        write_diagram_csv(diagram, path)
        text = path.read_text()
        assert text.splitlines()[0] == "dim,birth,death"
        back = read_diagram_csv(path, field_cap=5.0)
        assert back.bars == diagram.bars  # 17 significant digits round-trip floats

    def test_dim_bars_shape(self):
        diagram = PersistenceDiagram(bars=((0.5, 2.0, 1),), field_cap=3.0)
        assert diagram.dim_bars(0).shape == (0, 2)
        assert diagram.dim_bars(1).shape == (1, 2)
