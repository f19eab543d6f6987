"""Metric tests: every quantity checked against brute-force enumeration."""

import math

import numpy as np
import pytest

from rfmap.corruption import CorruptionRecord, assign_group
from rfmap.metrics import (
    SampleRow,
    aggregate,
    boundary_points,
    chamfer,
    dice_loss,
    directed_chamfer,
    directed_hausdorff,
    format_group_table,
    format_method_table,
    hausdorff,
    iou,
    score_pair,
)

# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def brute_boundary(grid: np.ndarray, mpp: float) -> list[tuple[float, float]]:
    """Boundary cells by dumb nested loops; outside the grid is background."""
    h, w = grid.shape
    pts = []
    for r in range(h):
        for c in range(w):
            if not grid[r, c]:
                continue
            neighbors = []
            for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                rr, cc = r + dr, c + dc
                neighbors.append(grid[rr, cc] if 0 <= rr < h and 0 <= cc < w else 0)
            if not all(neighbors):
                pts.append(((c + 0.5) * mpp, (r + 0.5) * mpp))
    return pts


def brute_directed(pa, pb, reduce_fn):
    if not pa or not pb:
        return float("nan")
    dists = [min(math.dist(p, q) for q in pb) for p in pa]
    return reduce_fn(dists)


def brute_counts(a, b):
    inter = int(np.count_nonzero(a & b))
    union = int(np.count_nonzero(a | b))
    return inter, union


# ---------------------------------------------------------------------------
# Pinned examples
# ---------------------------------------------------------------------------


def test_iou_identical_and_disjoint():
    a = np.zeros((4, 4), dtype=np.uint8)
    a[0] = 1
    assert iou(a, a) == 1.0
    b = np.zeros((4, 4), dtype=np.uint8)
    b[3] = 1
    assert iou(a, b) == 0.0


def test_iou_rows_example():
    a = np.zeros((4, 4), dtype=np.uint8)
    a[0:2] = 1
    b = np.zeros((4, 4), dtype=np.uint8)
    b[1:3] = 1
    inter, union = brute_counts(a.astype(bool), b.astype(bool))
    assert (inter, union) == (4, 12)
    assert iou(a, b) == pytest.approx(1 / 3)
    assert dice_loss(a, b) == pytest.approx(0.5)


def test_both_empty_conventions():
    z = np.zeros((4, 4), dtype=np.uint8)
    assert iou(z, z) == 1.0
    assert dice_loss(z, z) == 0.0


def test_dice_identical_and_disjoint():
    a = np.zeros((4, 4), dtype=np.uint8)
    a[0] = 1
    assert dice_loss(a, a) == 0.0
    b = np.zeros((4, 4), dtype=np.uint8)
    b[3] = 1
    assert dice_loss(a, b) == 1.0


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        iou(np.zeros((3, 3)), np.zeros((4, 4)))


def test_hausdorff_chamfer_single_cells():
    a = np.zeros((20, 20), dtype=np.uint8)
    b = np.zeros((20, 20), dtype=np.uint8)
    a[0, 0] = 1
    b[4, 3] = 1  # centers 5 apart with 1 m/px (3-4-5 triangle)
    assert hausdorff(a, b) == pytest.approx(5.0)
    assert chamfer(a, b) == pytest.approx(5.0)


def test_hausdorff_chamfer_5_13_configuration():
    a = np.zeros((20, 20), dtype=np.uint8)
    b = np.zeros((20, 20), dtype=np.uint8)
    a[0, 0] = 1
    b[4, 3] = 1  # distance 5 from a's cell
    b[12, 5] = 1  # distance 13 from a's cell
    assert directed_hausdorff(a, b) == pytest.approx(5.0)
    assert directed_hausdorff(b, a) == pytest.approx(13.0)
    assert hausdorff(a, b) == pytest.approx(13.0)
    assert directed_chamfer(a, b) == pytest.approx(5.0)
    assert directed_chamfer(b, a) == pytest.approx((5 + 13) / 2)
    assert chamfer(a, b) == pytest.approx((5.0 + 9.0) / 2) == pytest.approx(7.0)


def test_translation_invariance():
    rng = np.random.default_rng(0)
    a = np.zeros((30, 30), dtype=np.uint8)
    b = np.zeros((30, 30), dtype=np.uint8)
    a[5:10, 5:12] = 1
    b[8:15, 7:11] = 1
    base_h, base_c = hausdorff(a, b), chamfer(a, b)
    shifted_a = np.roll(a, (7, 9), axis=(0, 1))
    shifted_b = np.roll(b, (7, 9), axis=(0, 1))
    assert hausdorff(shifted_a, shifted_b) == pytest.approx(base_h)
    assert chamfer(shifted_a, shifted_b) == pytest.approx(base_c)


def test_empty_foreground_gives_sentinel():
    a = np.zeros((8, 8), dtype=np.uint8)
    b = np.zeros((8, 8), dtype=np.uint8)
    b[2, 2] = 1
    assert math.isnan(hausdorff(a, b))
    assert math.isnan(chamfer(a, b))


def test_metric_scale_in_meters():
    a = np.zeros((10, 10), dtype=np.uint8)
    b = np.zeros((10, 10), dtype=np.uint8)
    a[0, 0] = 1
    b[0, 5] = 1
    assert hausdorff(a, b, meters_per_pixel=2.0) == pytest.approx(10.0)


# ---------------------------------------------------------------------------
# Randomized brute-force agreement
# ---------------------------------------------------------------------------


def test_random_maps_match_brute_force_exactly():
    rng = np.random.default_rng(1234)
    for _ in range(60):
        h, w = rng.integers(2, 33, size=2)
        a = (rng.random((h, w)) < rng.uniform(0.1, 0.7)).astype(np.uint8)
        b = (rng.random((h, w)) < rng.uniform(0.1, 0.7)).astype(np.uint8)
        mpp = float(rng.uniform(0.3, 3.0))

        inter, union = brute_counts(a.astype(bool), b.astype(bool))
        expected_iou = 1.0 if union == 0 else inter / union
        assert iou(a, b, mpp) == expected_iou

        total = int(a.sum() + b.sum())
        expected_dice = 0.0 if total == 0 else 1 - 2 * inter / total
        assert dice_loss(a, b, mpp) == expected_dice

        # IoU-Dice identity: IoU = (1 - L) / (1 + L).
        L = dice_loss(a, b, mpp)
        assert abs(iou(a, b, mpp) - (1 - L) / (1 + L)) < 1e-12

        pa = brute_boundary(a, mpp)
        pb = brute_boundary(b, mpp)
        got_pa = boundary_points(a, mpp)
        assert sorted(map(tuple, got_pa)) == sorted(pa)

        for fn, brut, red in (
            (directed_hausdorff, brute_directed, max),
            (directed_chamfer, brute_directed, lambda d: sum(d) / len(d)),
        ):
            got = fn(a, b, mpp)
            want = brut(pa, pb, red)
            if math.isnan(want):
                assert math.isnan(got)
            else:
                assert abs(got - want) < 1e-9

        # Symmetry of the symmetric forms.
        if a.any() and b.any():
            assert hausdorff(a, b, mpp) == hausdorff(b, a, mpp)
            assert chamfer(a, b, mpp) == chamfer(b, a, mpp)
        assert iou(a, b, mpp) == iou(b, a, mpp)


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------


def row(sid, inter, union, h=1.0, c=1.0, group=None):
    return SampleRow(
        sample_id=sid,
        iou=1.0 if union == 0 else inter / union,
        intersection=inter,
        union=union,
        hausdorff=h,
        chamfer=c,
        group=group,
    )


def test_aggregate_single_sample():
    rep = aggregate([row("a", 3, 4)])
    assert rep.macro_iou == rep.micro_iou == 0.75


def test_aggregate_two_samples_macro_micro():
    rep = aggregate([row("a", 1, 2), row("b", 3, 4)])
    assert rep.macro_iou == pytest.approx((0.5 + 0.75) / 2) == pytest.approx(0.625)
    assert rep.micro_iou == pytest.approx(4 / 6)


def test_aggregate_identical_samples_macro_equals_micro():
    rep = aggregate([row("a", 2, 5)] * 7)
    assert rep.macro_iou == pytest.approx(rep.micro_iou)


def test_aggregate_excludes_nan_distances():
    rep = aggregate([row("a", 1, 2, h=4.0, c=2.0), row("b", 1, 2, h=float("nan"), c=float("nan"))])
    assert rep.mean_hausdorff == 4.0
    assert rep.mean_chamfer == 2.0
    assert rep.hausdorff_excluded == 1
    assert rep.chamfer_excluded == 1


def test_aggregate_rejects_empty():
    with pytest.raises(ValueError):
        aggregate([])


def test_group_table_covers_all_bins():
    g = assign_group(CorruptionRecord(0.5, 0.5, False))
    rep = aggregate([row("a", 1, 2, group=g), row("b", 1, 4, group=g), row("c", 1, 2)])
    assert len(rep.group_macro_iou) == 24
    count, value = rep.group_macro_iou[g.key()]
    assert count == 2
    assert value == pytest.approx((0.5 + 0.25) / 2)
    # Tables render without error.
    assert "Macro IoU" in format_group_table(rep)
    assert "| Method |" in format_method_table([("copy", "yes", "-", rep)])


def test_score_pair_matches_functions():
    rng = np.random.default_rng(5)
    a = (rng.random((16, 16)) < 0.4).astype(np.uint8)
    b = (rng.random((16, 16)) < 0.4).astype(np.uint8)
    r = score_pair("x", a, b, meters_per_pixel=1.5)
    assert r.iou == iou(a, b, 1.5)
    assert r.hausdorff == hausdorff(a, b, 1.5)
    assert r.chamfer == chamfer(a, b, 1.5)
