"""Refinement tests: curve fitting, majority-vote classifier, violation repair."""

import math

import numpy as np
import pytest

from rfmap.environment import GeneratorConfig, generate_environment
from rfmap.geometry import GRID_SIZE, BinaryMap, rasterize
from rfmap.refine import (
    CurveFitError,
    LosCurve,
    PairSequence,
    RefinementConfig,
    analyze_violations,
    build_pair_sequences,
    classify_pair,
    create_random_building,
    fit_curve,
    refine_map,
)
from rfmap.rfsim import BANDS_GHZ, LOS, NLOS, PathLossTable, los_label


def empty_map(side=224.0) -> BinaryMap:
    return BinaryMap(np.zeros((GRID_SIZE, GRID_SIZE), dtype=np.uint8), side / GRID_SIZE)


# ---------------------------------------------------------------------------
# fit_curve
# ---------------------------------------------------------------------------


def test_fit_noiseless_recovery():
    samples = [(x, 5.0 + math.log(x)) for x in (1.0, 2.0, 7.5, 100.0)]
    curve = fit_curve(samples, 28.0)
    assert curve.intercept == pytest.approx(5.0)
    assert curve.slope == 1.0


def test_fit_literal_two_points():
    curve = fit_curve([(1.0, 2.0), (math.e, 4.0)], 6.0)
    assert curve.intercept == pytest.approx(2.5)  # mean(2 - 0, 4 - 1)


def test_fit_constant_shift_moves_intercept():
    samples = [(x, 40.0 + math.log(x)) for x in (2.0, 5.0, 11.0)]
    shifted = [(x, y + 3.0) for x, y in samples]
    assert fit_curve(shifted, 2.6).intercept == pytest.approx(
        fit_curve(samples, 2.6).intercept + 3.0
    )


def test_fit_ignores_infinite_and_requires_two():
    curve = fit_curve([(1.0, 2.0), (math.e, 4.0), (5.0, math.inf)], 6.0)
    assert curve.intercept == pytest.approx(2.5)
    with pytest.raises(CurveFitError):
        fit_curve([(1.0, math.inf), (2.0, math.inf)], 6.0)
    with pytest.raises(CurveFitError):
        fit_curve([(1.0, 3.0)], 6.0)


def test_fit_ols_recovers_slope():
    samples = [(x, 30.0 + 8.7 * math.log(x)) for x in (1.0, 3.0, 10.0, 50.0)]
    curve = fit_curve(samples, 60.0, mode="ols")
    assert curve.slope == pytest.approx(8.7)
    assert curve.intercept == pytest.approx(30.0)
    assert curve.predict(20.0) == pytest.approx(30.0 + 8.7 * math.log(20.0))


def test_fit_log10_option():
    samples = [(x, 7.0 + math.log10(x)) for x in (1.0, 10.0, 100.0)]
    curve = fit_curve(samples, 100.0, log_base=10.0)
    assert curve.intercept == pytest.approx(7.0)
    assert curve.predict(1000.0) == pytest.approx(10.0)


# ---------------------------------------------------------------------------
# classify_pair
# ---------------------------------------------------------------------------


def flat_curves(intercept=100.0):
    return {band: LosCurve(band, intercept=intercept) for band in BANDS_GHZ}


def table_with(values):
    return PathLossTable(dict(zip(BANDS_GHZ, values)))


def test_classify_clear_cases():
    curves = flat_curves()
    x = 10.0
    below = table_with([curves[b].predict(x) - 1.0 for b in BANDS_GHZ])
    above = table_with([curves[b].predict(x) + 100.0 for b in BANDS_GHZ])
    assert classify_pair(below, curves, x) == LOS
    assert classify_pair(above, curves, x) == NLOS


def test_classify_majority_three_of_five():
    curves = flat_curves()
    x = math.e
    threshold = 100.0 + 1.0 + 0.005 * x
    votes = [threshold - 0.5] * 3 + [threshold + 0.5] * 2
    assert classify_pair(table_with(votes), curves, x) == LOS
    votes = [threshold - 0.5] * 2 + [threshold + 0.5] * 3
    assert classify_pair(table_with(votes), curves, x) == NLOS


def test_classify_infinite_votes_nlos():
    curves = flat_curves()
    x = 5.0
    values = [curves[b].predict(x) - 1.0 for b in BANDS_GHZ[:2]] + [math.inf] * 3
    assert classify_pair(table_with(values), curves, x) == NLOS


def test_classify_margin_scales_with_distance():
    curves = flat_curves()
    for x in (10.0, 400.0):
        just_below = table_with([curves[b].predict(x) + 0.005 * x - 1e-9 for b in BANDS_GHZ])
        just_above = table_with([curves[b].predict(x) + 0.005 * x + 1e-9 for b in BANDS_GHZ])
        assert classify_pair(just_below, curves, x) == LOS
        assert classify_pair(just_above, curves, x) == NLOS


def test_classify_intercept_shift_cancels():
    x = 30.0
    base = [95.0, 99.0, 103.0, 101.0, 97.0]
    shifted_curves = flat_curves(intercept=100.0 + 7.5)
    assert classify_pair(table_with(base), flat_curves(100.0), x) == classify_pair(
        table_with([v + 7.5 for v in base]), shifted_curves, x
    )


def test_classify_requires_all_bands():
    with pytest.raises(ValueError):
        classify_pair(table_with([100.0] * 5), {2.6: LosCurve(2.6, 1.0)}, 5.0)


# ---------------------------------------------------------------------------
# analyze_violations
# ---------------------------------------------------------------------------


def seq(ue, bs, label, bmap):
    return build_pair_sequences(
        np.array([ue], dtype=float), np.array([bs], dtype=float), [label], bmap
    )[0]


def test_analyze_all_clear():
    bmap = empty_map()
    pairs = [seq([10.0, 10.0], [200.0, 10.0], LOS, bmap)]
    v_nlos, v_los, pool = analyze_violations(bmap, pairs)
    assert v_nlos == [] and v_los == [] and len(pool) == 0


def test_analyze_nlos_violation_pool_is_segment():
    bmap = empty_map()
    pair = seq([10.5, 50.5], [200.5, 50.5], NLOS, bmap)
    v_nlos, v_los, pool = analyze_violations(bmap, [pair])
    assert v_nlos == [pair] and v_los == []
    assert set(map(tuple, pool)) == set(map(tuple, pair.cells))


def test_analyze_los_violation_on_solid_map():
    bmap = empty_map()
    bmap.grid[:] = 1
    pair = seq([10.0, 10.0], [100.0, 100.0], LOS, bmap)
    v_nlos, v_los, pool = analyze_violations(bmap, [pair])
    assert v_los == [pair] and v_nlos == [] and len(pool) == 0


# ---------------------------------------------------------------------------
# create_random_building
# ---------------------------------------------------------------------------


def test_stamp_fixed_size():
    cfg = RefinementConfig(building_size_range=(3, 3))
    stamp = create_random_building((100, 100), cfg, np.random.default_rng(0))
    rows, cols = np.nonzero(stamp.grid)
    assert len(rows) == 9
    assert rows.min() == 99 and rows.max() == 101
    assert cols.min() == 99 and cols.max() == 101


def test_stamp_clipped_at_corner_nonempty():
    cfg = RefinementConfig(building_size_range=(9, 15))
    stamp = create_random_building((0, 0), cfg, np.random.default_rng(1))
    assert stamp.grid.any()
    assert stamp.grid[0, 0] == 1


def test_stamp_deterministic_per_rng_state():
    cfg = RefinementConfig(building_size_range=(3, 15))
    a = create_random_building((50, 60), cfg, np.random.default_rng(42))
    b = create_random_building((50, 60), cfg, np.random.default_rng(42))
    assert np.array_equal(a.grid, b.grid)


def test_stamp_rejects_out_of_bounds_center():
    cfg = RefinementConfig()
    with pytest.raises(ValueError):
        create_random_building((300, 10), cfg, np.random.default_rng(0))


# ---------------------------------------------------------------------------
# refine_map
# ---------------------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        RefinementConfig(max_iterations=0)
    with pytest.raises(ValueError):
        RefinementConfig(max_candidates=41)


def test_no_violations_returns_input_unchanged():
    bmap = empty_map()
    pairs = [seq([10.0, 10.0], [200.0, 10.0], LOS, bmap)]
    refined = refine_map(bmap, pairs, RefinementConfig(seed=0))
    assert np.array_equal(refined.grid, bmap.grid)


def test_single_nlos_pair_gets_repaired():
    bmap = empty_map()
    pair = seq([10.5, 50.5], [200.5, 50.5], NLOS, bmap)
    before = analyze_violations(bmap, [pair])
    refined = refine_map(bmap, [pair], RefinementConfig(seed=0, building_size_range=(5, 9)))
    after = analyze_violations(refined, [pair])
    assert len(before[0]) == 1 and len(after[0]) == 0
    # The merged stamp intersects the pair's segment.
    assert refined.grid[pair.cells[:, 0], pair.cells[:, 1]].any()
    assert refined.grid.sum() > 0


def test_one_iteration_at_most_one_merge():
    bmap = empty_map()
    pairs = [
        seq([10.5, 50.5], [200.5, 50.5], NLOS, bmap),
        seq([10.5, 150.5], [200.5, 150.5], NLOS, bmap),
    ]
    refined = refine_map(bmap, pairs, RefinementConfig(max_iterations=1, seed=0))
    # One rectangular stamp only: foreground is a single filled box.
    rows, cols = np.nonzero(refined.grid)
    assert len(rows) > 0
    assert len(rows) == (rows.max() - rows.min() + 1) * (cols.max() - cols.min() + 1)


def test_refinement_invariants_on_synthetic_environments():
    for env_seed in range(6):
        env = generate_environment(GeneratorConfig(seed=env_seed, building_count_range=(4, 9)))
        truth = rasterize(env.buildings, env.side_length)
        labels = [
            los_label(env, env.ue[i], env.bs[j], truth) for i, j in env.pairs()
        ]
        pairs = build_pair_sequences(env.ue, env.bs, labels, truth)

        # With oracle labels the true map has zero violations.
        v_nlos, v_los, _ = analyze_violations(truth, pairs)
        assert v_nlos == [] and v_los == []

        # Refine a heavily corrupted map (half the buildings dropped).
        corrupted = rasterize(env.buildings[::2], env.side_length)
        cfg = RefinementConfig(seed=env_seed)
        refined = refine_map(corrupted, pairs, cfg)

        # Never removes foreground.
        assert np.all(refined.grid >= corrupted.grid)
        # Total violations never increase.
        before = analyze_violations(corrupted, pairs)
        after = analyze_violations(refined, pairs)
        assert len(after[0]) + len(after[1]) <= len(before[0]) + len(before[1])


def test_refine_deterministic_per_seed():
    env = generate_environment(GeneratorConfig(seed=3))
    truth = rasterize(env.buildings, env.side_length)
    labels = [los_label(env, env.ue[i], env.bs[j], truth) for i, j in env.pairs()]
    corrupted = rasterize(env.buildings[1::2], env.side_length)
    pairs = build_pair_sequences(env.ue, env.bs, labels, corrupted)
    a = refine_map(corrupted, pairs, RefinementConfig(seed=11))
    b = refine_map(corrupted, pairs, RefinementConfig(seed=11))
    assert np.array_equal(a.grid, b.grid)


def test_pair_sequence_label_validated():
    bmap = empty_map()
    with pytest.raises(ValueError):
        PairSequence(np.zeros(2), np.ones(2), np.zeros((1, 2), dtype=int), "MAYBE")
