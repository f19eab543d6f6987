"""Learning-rate schedule endpoint and shape tests."""

import math

import pytest

from rftrain.schedule import warmup_cosine_lr


def test_reference_endpoints():
    # 200 epochs, 20 warmup, peak 2e-4: 0 at start, peak at warmup end, ~0 at the end.
    peak = 2e-4
    assert warmup_cosine_lr(0, 200, 20, peak) == 0.0
    assert warmup_cosine_lr(20, 200, 20, peak) == peak
    assert warmup_cosine_lr(199, 200, 20, peak) < 1e-7
    assert warmup_cosine_lr(200, 200, 20, peak) == pytest.approx(0.0, abs=1e-20)


def test_linear_warmup():
    peak = 1e-3
    values = [warmup_cosine_lr(e, 100, 10, peak) for e in range(11)]
    for e, v in enumerate(values):
        assert v == pytest.approx(peak * e / 10)


def test_cosine_monotone_decay():
    values = [warmup_cosine_lr(e, 100, 10, 1e-3) for e in range(10, 101)]
    assert all(b <= a + 1e-15 for a, b in zip(values, values[1:]))
    assert values[0] == 1e-3


def test_midpoint_is_half_peak():
    # Halfway through the decay the cosine sits at half of peak.
    assert warmup_cosine_lr(60, 100, 20, 2e-4) == pytest.approx(1e-4)


def test_invalid_warmup_rejected():
    with pytest.raises(ValueError):
        warmup_cosine_lr(0, 100, 100, 1e-3)
