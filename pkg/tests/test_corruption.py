"""Corruption model tests: shift CDF, removal rates, severity, binning."""

import numpy as np
import pytest

from rfmap.corruption import (
    DEFAULT_SHIFT_DISTRIBUTION,
    SHIFT_CDF_ANCHORS,
    CorruptionParams,
    CorruptionRecord,
    ShiftDistribution,
    TestGroupLabel,
    all_group_labels,
    assign_group,
    corrupt,
    sample_shift,
    severity_params,
)
from rfmap.environment import GeneratorConfig, generate_environment
from rfmap.geometry import Polygon, polygon_area


def test_sample_shift_anchor_values():
    assert sample_shift(0.40) == pytest.approx(0.863)
    assert sample_shift(0.0) == 0.0
    assert sample_shift(1.0) == pytest.approx(6.000)


def test_sample_shift_midpoint_interpolation():
    # Halfway between the (0.40, 0.863) and (0.60, 1.555) anchors.
    assert sample_shift(0.50) == pytest.approx((0.863 + 1.555) / 2)
    assert sample_shift(0.50) == pytest.approx(1.209)


def test_sample_shift_scale_multiplies():
    assert sample_shift(0.40, scale=2.0) == pytest.approx(2 * 0.863)


def test_sample_shift_rejects_bad_u():
    with pytest.raises(ValueError):
        sample_shift(1.5)


def test_shift_distribution_validation():
    with pytest.raises(ValueError):
        ShiftDistribution(anchors=((0.0, 0.0), (0.5, 2.0), (0.4, 3.0), (1.0, 6.0)))
    with pytest.raises(ValueError):
        ShiftDistribution(anchors=((0.0, 1.0), (0.5, 0.5), (1.0, 6.0)))


def test_empirical_quantiles_match_anchors():
    rng = np.random.default_rng(0)
    draws = np.array([sample_shift(u) for u in rng.random(100_000)])
    for p, m in SHIFT_CDF_ANCHORS[1:]:
        assert abs(np.quantile(draws, p) - m) < 0.05, (p, m)
    assert abs(draws.mean() - 1.460) < 0.05


def make_env(n_buildings=10, seed=0):
    return generate_environment(
        GeneratorConfig(
            building_count_range=(n_buildings, n_buildings),
            footprint_size_range=(8.0, 20.0),
            side_length_range=(200.0, 200.0),
            seed=seed,
        )
    )


def test_identity_corruption():
    env = make_env()
    params = CorruptionParams(keep_probability=1.0, shift_scale=0.0, simplify_probability=0.0)
    out, record = corrupt(env, params, seed=3)
    assert out == env.buildings
    assert record.removal_fraction == 0.0


def test_remove_everything():
    env = make_env()
    params = CorruptionParams(keep_probability=0.0)
    out, record = corrupt(env, params, seed=3)
    assert out == []
    assert record.removal_fraction == 1.0


def test_empty_environment_defines_r_zero():
    env = make_env(n_buildings=0)
    out, record = corrupt(env, CorruptionParams(), seed=0)
    assert out == []
    assert record.removal_fraction == 0.0


def test_corrupt_deterministic_per_seed():
    env = make_env()
    params = severity_params(1, mode="test")
    a = corrupt(env, params, seed=17)
    b = corrupt(env, params, seed=17)
    assert a[0] == b[0]
    assert a[1] == b[1]
    c = corrupt(env, params, seed=18)
    assert a[0] != c[0] or a[1] != c[1]


def test_corrupt_never_adds_buildings():
    env = make_env()
    for seed in range(30):
        out, _ = corrupt(env, severity_params(2), seed=seed)
        assert len(out) <= len(env.buildings)


def test_test_mode_shift_is_shared_translation():
    env = make_env()
    params = CorruptionParams(keep_probability=1.0, mode="test", simplify_probability=0.0)
    out, record = corrupt(env, params, seed=5)
    assert len(out) == len(env.buildings)
    for before, after in zip(env.buildings, out):
        delta = after.vertices - before.vertices
        # One constant translation vector per building...
        assert np.allclose(delta, delta[0])
        # ...whose magnitude is the shared recorded s.
        assert np.linalg.norm(delta[0]) == pytest.approx(record.shift_s)


def test_train_mode_shift_magnitudes_vary():
    env = make_env()
    params = CorruptionParams(keep_probability=1.0, mode="train", simplify_probability=0.0)
    out, _ = corrupt(env, params, seed=1)
    mags = [
        np.linalg.norm((after.vertices - before.vertices)[0])
        for before, after in zip(env.buildings, out)
    ]
    assert len(set(np.round(mags, 6))) > 1


def test_test_mode_simplification_all_or_none():
    env = make_env()
    params = CorruptionParams(keep_probability=1.0, shift_scale=0.0, simplify_probability=1.0, mode="test")
    out, record = corrupt(env, params, seed=2)
    assert record.simplified
    for poly in out:
        # Convex-hulled: hull area equals polygon area.
        assert polygon_area(poly.vertices) == pytest.approx(abs(polygon_area(poly.vertices)))


def test_mean_removal_rate_at_level_1():
    env = make_env(n_buildings=10)
    fractions = [corrupt(env, severity_params(1), seed=s)[1].removal_fraction for s in range(10_000)]
    assert abs(np.mean(fractions) - 0.57) < 0.01


def test_severity_params_exact():
    p1 = severity_params(1)
    assert (p1.keep_probability, p1.shift_scale, p1.simplify_probability) == (0.43, 1.0, 0.25)
    p15 = severity_params(1.5)
    assert (p15.keep_probability, p15.shift_scale, p15.simplify_probability) == (
        0.43 / 1.5,
        1.5,
        0.375,
    )
    p2 = severity_params(2)
    assert (p2.keep_probability, p2.shift_scale, p2.simplify_probability) == (0.215, 2.0, 0.50)
    with pytest.raises(ValueError):
        severity_params(3)


def test_assign_group_boundaries():
    assert assign_group(CorruptionRecord(1.46, 0.50, False)) == TestGroupLabel(1, 1, False)
    assert assign_group(CorruptionRecord(0.0, 0.0, False)) == TestGroupLabel(0, 0, False)
    assert assign_group(CorruptionRecord(6.0, 1.0, True)) == TestGroupLabel(2, 3, True)
    # Removal bins are right-closed.
    assert assign_group(CorruptionRecord(0.0, 0.4615, False)).removal_bin == 0
    assert assign_group(CorruptionRecord(0.0, 0.4616, False)).removal_bin == 1
    # Shift bins are left-closed.
    assert assign_group(CorruptionRecord(4.20, 0.0, False)).shift_bin == 2
    assert assign_group(CorruptionRecord(4.1999, 0.0, False)).shift_bin == 1


def test_all_group_labels_cover_24_bins():
    labels = all_group_labels()
    assert len(labels) == 24
    assert len({l.key() for l in labels}) == 24
