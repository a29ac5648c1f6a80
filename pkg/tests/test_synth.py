import numpy as np
import pytest

from topopi import ContractError, betti_numbers, extract_contours, synth_pair
from topopi.segmap import label_components


class TestSynthPair:
    def test_deterministic(self):
        a_gt, a_pred = synth_pair(11, n_objects=4, size=96, corruption="delete")
        b_gt, b_pred = synth_pair(11, n_objects=4, size=96, corruption="delete")
        assert np.array_equal(a_gt.labels, b_gt.labels)
        assert np.array_equal(a_pred.labels, b_pred.labels)

    def test_none_corruption_identical(self):
        gt, pred = synth_pair(5, corruption="none")
        assert np.array_equal(gt.labels, pred.labels)

    def test_delete_removes_one_object(self):
        gt, pred = synth_pair(7, n_objects=3, size=96, corruption="delete")
        _, n_gt = label_components(gt.foreground, 8)
        _, n_pred = label_components(pred.foreground, 8)
        assert (n_gt, n_pred) == (3, 2)

    def test_object_count_matches_request(self):
        for seed in range(6):
            gt, _ = synth_pair(seed, n_objects=5, size=128, corruption="none")
            _, n = label_components(gt.foreground, 8)
            assert n == 5

    def test_split_increases_components(self):
        gt, pred = synth_pair(3, n_objects=3, size=96, corruption="split")
        _, n_gt = label_components(gt.foreground, 8)
        _, n_pred = label_components(pred.foreground, 8)
        assert n_pred == n_gt + 1

    def test_merge_decreases_components(self):
        gt, pred = synth_pair(4, n_objects=3, size=96, corruption="merge")
        _, n_gt = label_components(gt.foreground, 8)
        _, n_pred = label_components(pred.foreground, 8)
        assert n_pred == n_gt - 1

    def test_hole_adds_contour_loop(self):
        gt, pred = synth_pair(6, n_objects=3, size=96, corruption="hole")
        b_gt = betti_numbers(extract_contours(gt))
        b_pred = betti_numbers(extract_contours(pred))
        assert b_pred.b0 == b_gt.b0 + 1  # the carved hole has its own contour ring
        assert b_pred.b1 == b_gt.b1 + 1

    def test_jitter_preserves_topology_changes_geometry(self):
        for seed in range(10):
            gt, pred = synth_pair(seed, n_objects=3, size=96, corruption="jitter")
            assert betti_numbers(gt.foreground) == betti_numbers(pred.foreground)
            assert betti_numbers(extract_contours(gt)) == betti_numbers(extract_contours(pred))
            assert not np.array_equal(gt.labels, pred.labels)

    def test_bad_arguments(self):
        with pytest.raises(ContractError):
            synth_pair(0, corruption="scramble")
        with pytest.raises(ContractError):
            synth_pair(0, n_objects=0)
        with pytest.raises(ContractError):
            synth_pair(0, n_objects=1, corruption="merge")
        with pytest.raises(ContractError):
            synth_pair(0, size=8)
