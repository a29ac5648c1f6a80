"""Acceptance suite: one test per criterion, each printing a pass line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines as they complete.
"""

import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.special import ndtr

from topopi import (
    FiltrationField,
    LossConfig,
    PersistenceImage,
    PersistenceImageConfig,
    SchedulerState,
    betti_error,
    betti_matching_error,
    betti_numbers,
    compute_persistence,
    evaluate_pair,
    persistence_dim0_unionfind,
    persistence_image,
    pixel_metrics,
    rasterize,
    scheduler_update,
    synth_pair,
    topological_dissimilarity,
    weight,
    write_segmap,
    z_normalize,
)
from topopi.cli import main

from oracles import dense_reduction_diagram, flood_betti


def report(line: str) -> None:
    print(f"PASS  {line}", flush=True)


def random_field(rng, max_side=12):
    h = int(rng.integers(1, max_side + 1))
    w = int(rng.integers(1, max_side + 1))
    if rng.random() < 0.3:  # quantized fields exercise tie handling
        values = rng.integers(0, 5, size=(h, w)).astype(np.float64)
    else:
        values = rng.random((h, w)) * 10.0
    cap = float(values.max()) + 1.0
    return FiltrationField(width=w, height=h, values=values, bandwidth=1.0, cap=cap)


def test_homology_oracle_equivalence():
    """compute_persistence == dense reduction oracle, bar for bar, 1000 fields."""
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    for case in range(1000):
        field = random_field(rng)
        ours = compute_persistence(field).bars
        reference = tuple(dense_reduction_diagram(np.asarray(field.values), field.cap))
        assert ours == reference, f"diagram mismatch on case {case}"
        fast = persistence_dim0_unionfind(field).bars
        assert fast == tuple(b for b in ours if b[2] == 0), f"dim-0 mismatch on case {case}"
    elapsed = time.perf_counter() - start
    assert elapsed <= 60.0, f"oracle corpus took {elapsed:.1f}s (budget 60s)"
    report(f"homology oracle equivalence: 1000 fields exact, {elapsed:.1f}s")


def test_betti_oracle():
    """betti_numbers == flood-fill counting on 1000 random masks up to 64x64."""
    rng = np.random.default_rng(7)
    start = time.perf_counter()
    for case in range(1000):
        h = int(rng.integers(1, 65))
        w = int(rng.integers(1, 65))
        mask = rng.random((h, w)) < rng.uniform(0.15, 0.85)
        assert tuple(betti_numbers(mask)) == flood_betti(mask), f"mismatch on case {case}"
    elapsed = time.perf_counter() - start
    assert elapsed <= 30.0, f"betti corpus took {elapsed:.1f}s (budget 30s)"
    report(f"betti oracle: 1000 masks exact, {elapsed:.1f}s")


def test_pi_mass_conservation():
    """Raster totals equal the closed-form CDF window masses within 1e-8."""
    rng = np.random.default_rng(12)
    for case in range(200):
        rows = int(rng.integers(4, 48))
        cols = int(rng.integers(4, 48))
        config = PersistenceImageConfig(
            resolution=(rows, cols),
            extent=(float(rng.uniform(2, 25)), float(rng.uniform(2, 25))),
            sigma2=float(rng.uniform(0.3, 4.0)),
            gamma=float(rng.choice([0.5, 1.0, 2.0, 3.0])),
        )
        n = int(rng.integers(0, 15))
        points = np.column_stack(
            [rng.uniform(-2, config.extent[0] + 4, n), rng.uniform(1e-3, config.extent[1] + 4, n)]
        )
        raster = rasterize(points, config)
        sigma = math.sqrt(config.sigma2)
        expected = 0.0
        for x, y in points:
            mx = ndtr((config.extent[0] - x) / sigma) - ndtr((0.0 - x) / sigma)
            my = ndtr((config.extent[1] - y) / sigma) - ndtr((0.0 - y) / sigma)
            expected += weight(y, config.gamma) * mx * my
        assert abs(raster.values.sum() - expected) <= 1e-8, f"mass mismatch on case {case}"
    report("persistence-image mass conservation: 200 random diagrams within 1e-8")


def test_z_normalization_scale_invariance():
    """Scaling the raw raster by 0.01, 1, or 100 moves no cell by 1e-9."""
    rng = np.random.default_rng(3)
    config = PersistenceImageConfig(resolution=(16, 16), extent=(10.0, 10.0))
    for _ in range(50):
        values = rng.random((16, 16)) * rng.uniform(0.1, 10)
        base = z_normalize(PersistenceImage(values=values, normalized=False, config=config))
        for c in (0.01, 1.0, 100.0):
            scaled = z_normalize(
                PersistenceImage(values=c * values, normalized=False, config=config)
            )
            assert np.max(np.abs(scaled.values - base.values)) < 1e-9
    report("z-normalization scale invariance: c in {0.01, 1, 100} within 1e-9")


def test_weighting_branches_and_gamma_ratio():
    """Exact weighting branch values; mass ratio monotone in gamma on [1, 4]."""
    assert weight(2.0, 3.0) == 8.0
    assert weight(2.0, 0.5) == 2.0
    for gamma in (0.0, 0.5, 1.0, 2.0, 3.7):
        assert weight(1.0, gamma) == 1.0
    y1, y2 = 5.0, 2.0
    config = PersistenceImageConfig(resolution=(32, 32), extent=(12.0, 12.0), sigma2=1.0)
    ratios = []
    for gamma in np.linspace(1.0, 4.0, 13):
        cfg = replace(config, gamma=float(gamma))
        m1 = rasterize(np.array([[3.0, y1]]), cfg).values.sum()
        m2 = rasterize(np.array([[3.0, y2]]), cfg).values.sum()
        ratios.append(m1 / m2)
    assert all(b > a for a, b in zip(ratios, ratios[1:]))
    report("weighting: branch values exact, gamma ratio strictly increasing on [1, 4]")


def test_scheduler_closed_form_trajectory():
    """100 constant updates land on 2 * 0.9995**100 within 1e-12."""
    config = LossConfig(warmup_steps=0)
    state = SchedulerState.initial(config)
    for _ in range(100):
        state = scheduler_update(state, 1.0, 1.0, config)
    target = 2.0 * 0.9995**100
    assert abs(state.gamma - target) < 1e-12
    assert all(b.gamma <= a.gamma for a, b in zip(state.history, state.history[1:]))
    report(f"scheduler trajectory: gamma_100 = {state.gamma:.10f} matches closed form")


def test_td_pseudometric():
    """Identity, symmetry within 1e-15, triangle inequality on 500 triples."""
    rng = np.random.default_rng(99)
    config = PersistenceImageConfig(resolution=(8, 8), extent=(5.0, 5.0))

    def random_pi():
        return z_normalize(
            PersistenceImage(values=rng.random((8, 8)), normalized=False, config=config)
        )

    for _ in range(500):
        a, b, c = random_pi(), random_pi(), random_pi()
        assert topological_dissimilarity(a, a) == 0.0
        ab = topological_dissimilarity(a, b)
        ba = topological_dissimilarity(b, a)
        assert abs(ab - ba) <= 1e-15
        ac = topological_dissimilarity(a, c)
        bc = topological_dissimilarity(b, c)
        assert ac <= ab + bc + 1e-12
    report("topological dissimilarity: pseudometric on 500 random triples")


def test_corruption_sensitivity():
    """Deleting an object costs more TD than one-pixel jitter, which costs > 0."""
    start = time.perf_counter()
    td_deleted = []
    td_jittered = []
    for seed in range(200):
        gt, deleted = synth_pair(seed, n_objects=4, size=128, corruption="delete")
        gt2, jittered = synth_pair(seed, n_objects=4, size=128, corruption="jitter")
        assert np.array_equal(gt.labels, gt2.labels)  # same seed, same ground truth
        pi_gt = persistence_image(gt)
        td_deleted.append(topological_dissimilarity(pi_gt, persistence_image(deleted)))
        td_jittered.append(topological_dissimilarity(pi_gt, persistence_image(jittered)))
        e0, _ = betti_error(deleted, gt)
        assert e0 >= 1, f"deletion not detected by betti error on seed {seed}"
    elapsed = time.perf_counter() - start
    med_del = float(np.median(td_deleted))
    med_jit = float(np.median(td_jittered))
    assert med_del > med_jit > 0.0, f"medians: delete {med_del}, jitter {med_jit}"
    assert elapsed <= 300.0, f"corruption corpus took {elapsed:.1f}s (budget 300s)"
    report(
        f"corruption sensitivity: median TD delete {med_del:.4f} > jitter {med_jit:.4f} > 0, "
        f"betti detects all deletions, {elapsed:.0f}s"
    )


def test_metric_self_consistency():
    """Matching error dominates count error; perfect predictions score clean."""
    checked = 0
    for seed in range(10):
        for corruption in ("none", "delete", "split", "merge", "hole", "jitter"):
            gt, pred = synth_pair(seed, n_objects=3, size=64, corruption=corruption)
            e0, e1 = betti_error(pred, gt)
            m0, m1 = betti_matching_error(pred, gt)
            assert m0 >= e0 and m1 >= e1, f"matching below count on seed {seed}/{corruption}"
            checked += 1
    gt, same = synth_pair(123, n_objects=4, size=64, corruption="none")
    row = evaluate_pair(same, gt)
    assert row.fscore == 1.0
    assert row.betti_err == 0.0 and row.match_err == 0.0
    assert pixel_metrics(same, gt) == (1.0, 1.0, 1.0)
    report(f"metric self-consistency: matching >= count on {checked} images, perfect pred clean")


def test_end_to_end_determinism(tmp_path):
    """cmd_pi output bytes identical across reruns and across --jobs 1 vs 8."""
    fixture = tmp_path / "fixture.pgm"
    gt, _ = synth_pair(42, n_objects=4, size=96, corruption="none")
    write_segmap(gt, fixture)
    digests = []
    for name, jobs in (("r1", "1"), ("r2", "1"), ("r8", "8")):
        out = tmp_path / name
        assert main(["pi", str(fixture), "--out", str(out), "--jobs", jobs,
                     "--preview"]) == 0
        blob = b"".join(
            (out / f).read_bytes()
            for f in ("fixture.tpp1", "fixture.diagram.csv", "fixture.preview.pgm")
        )
        manifest = json.loads((out / "manifest.json").read_text())
        blob += json.dumps({k: manifest[k] for k in ("command", "parameters")},
                           sort_keys=True).encode()
        digests.append(blob)
    assert digests[0] == digests[1], "rerun changed output bytes"
    assert digests[0] == digests[2], "--jobs changed output bytes"
    report("end-to-end determinism: byte-identical across reruns and --jobs 1 vs 8")
