"""Simulated map-error modes: positional shift, building removal, simplification.

The shift magnitude distribution follows an empirically derived CDF given as
(percentile, meters) anchor pairs with linear interpolation in between; a
(0, 0) lower anchor closes the CDF so distances stay nonnegative.  Severity
levels scale all three error modes together.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environment import Environment
from .geometry import Polygon, convex_hull

# (percentile, meters) anchors of the building-shift CDF.  The (0, 0) anchor
# is implied by nonnegative distances; the rest are measured values.
SHIFT_CDF_ANCHORS: tuple[tuple[float, float], ...] = (
    (0.00, 0.000),
    (0.20, 0.020),
    (0.40, 0.863),
    (0.60, 1.555),
    (0.80, 2.500),
    (0.85, 2.867),
    (0.90, 3.377),
    (0.95, 4.197),
    (1.00, 6.000),
)

# Test-set grouping edges: shift bins split at the distribution mean (1.46 m)
# and 95th percentile (4.20 m); removal bins at the quartiles of realized
# removal fractions.
DEFAULT_SHIFT_EDGES: tuple[float, float] = (1.46, 4.20)
DEFAULT_REMOVAL_EDGES: tuple[float, float, float] = (0.4615, 0.5714, 0.6931)

SHIFT_BIN_NAMES = ("s<1.46m", "1.46m<=s<4.20m", "s>=4.20m")
REMOVAL_BIN_NAMES = ("r<=46.15%", "46.15%<r<=57.14%", "57.14%<r<=69.31%", "r>69.31%")


@dataclass(frozen=True)
class ShiftDistribution:
    """Piecewise-linear inverse CDF over (percentile, meters) anchors."""

    anchors: tuple[tuple[float, float], ...] = SHIFT_CDF_ANCHORS

    def __post_init__(self) -> None:
        ps = [p for p, _ in self.anchors]
        ms = [m for _, m in self.anchors]
        if sorted(set(ps)) != ps:
            raise ValueError("anchor percentiles must be strictly increasing")
        if any(b < a for a, b in zip(ms, ms[1:])):
            raise ValueError("anchor meters must be nondecreasing")
        if ps[0] != 0.0 or ps[-1] != 1.0:
            raise ValueError("anchors must span percentiles 0 to 1")

    def sample(self, u: float, scale: float = 1.0) -> float:
        ps = np.array([p for p, _ in self.anchors])
        ms = np.array([m for _, m in self.anchors])
        return float(np.interp(u, ps, ms)) * scale


DEFAULT_SHIFT_DISTRIBUTION = ShiftDistribution()


def sample_shift(
    u: float,
    dist: ShiftDistribution = DEFAULT_SHIFT_DISTRIBUTION,
    scale: float = 1.0,
) -> float:
    """Inverse-CDF sample of a shift distance for a uniform draw u in [0, 1]."""
    if not 0.0 <= u <= 1.0:
        raise ValueError("u must be in [0, 1]")
    return dist.sample(u, scale)


@dataclass(frozen=True)
class CorruptionParams:
    """Error-mode intensities plus the train/test sampling mode."""

    keep_probability: float = 0.43
    shift_scale: float = 1.0
    simplify_probability: float = 0.25
    mode: str = "train"

    def __post_init__(self) -> None:
        for name in ("keep_probability", "simplify_probability"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if not self.shift_scale >= 0.0:
            raise ValueError("shift_scale must be nonnegative")
        if self.mode not in ("train", "test"):
            raise ValueError("mode must be 'train' or 'test'")


SEVERITY_LEVELS = (1, 1.5, 2)


def severity_params(level: float, mode: str = "train") -> CorruptionParams:
    """Corruption parameters for a named severity level (1, 1.5, or 2)."""
    if level == 1:
        keep, scale, simplify = 0.43, 1.0, 0.25
    elif level == 1.5:
        keep, scale, simplify = 0.43 / 1.5, 1.5, 0.375
    elif level == 2:
        keep, scale, simplify = 0.215, 2.0, 0.50
    else:
        raise ValueError(f"unknown severity level {level!r}; expected one of {SEVERITY_LEVELS}")
    return CorruptionParams(
        keep_probability=keep, shift_scale=scale, simplify_probability=simplify, mode=mode
    )


@dataclass
class CorruptionRecord:
    """Realized corruption of one environment, recorded for test binning.

    ``shift_s`` is the shared per-environment magnitude in test mode; in
    train mode (per-building magnitudes) it records the mean applied shift.
    ``simplified`` is the environment-level flag in test mode; in train mode
    it is True when at least one building was simplified.
    """

    shift_s: float
    removal_fraction: float
    simplified: bool

    def __post_init__(self) -> None:
        if not 0.0 <= self.removal_fraction <= 1.0:
            raise ValueError("removal_fraction must be in [0, 1]")


@dataclass(frozen=True)
class TestGroupLabel:
    """One of the 3 x 4 x 2 evaluation bins (shift, removal, simplification)."""

    __test__ = False  # not a pytest class despite the name

    shift_bin: int
    removal_bin: int
    simplified: bool

    def __post_init__(self) -> None:
        if self.shift_bin not in (0, 1, 2):
            raise ValueError("shift_bin must be 0, 1, or 2")
        if self.removal_bin not in (0, 1, 2, 3):
            raise ValueError("removal_bin must be 0..3")

    def key(self) -> str:
        simp = "simplified" if self.simplified else "plain"
        return f"{SHIFT_BIN_NAMES[self.shift_bin]}|{REMOVAL_BIN_NAMES[self.removal_bin]}|{simp}"


def all_group_labels() -> list[TestGroupLabel]:
    """The 24 bins in deterministic (shift, removal, simplified) order."""
    return [
        TestGroupLabel(s, r, simp)
        for s in range(3)
        for r in range(4)
        for simp in (False, True)
    ]


def assign_group(
    record: CorruptionRecord,
    shift_edges: tuple[float, float] = DEFAULT_SHIFT_EDGES,
    removal_edges: tuple[float, float, float] = DEFAULT_REMOVAL_EDGES,
) -> TestGroupLabel:
    """Bin a test-mode corruption record (shift bins left-closed, removal right-closed)."""
    s, r = record.shift_s, record.removal_fraction
    if s < shift_edges[0]:
        shift_bin = 0
    elif s < shift_edges[1]:
        shift_bin = 1
    else:
        shift_bin = 2
    if r <= removal_edges[0]:
        removal_bin = 0
    elif r <= removal_edges[1]:
        removal_bin = 1
    elif r <= removal_edges[2]:
        removal_bin = 2
    else:
        removal_bin = 3
    return TestGroupLabel(shift_bin, removal_bin, record.simplified)


def corrupt(
    env: Environment,
    params: CorruptionParams,
    seed: int,
    dist: ShiftDistribution = DEFAULT_SHIFT_DISTRIBUTION,
) -> tuple[list[Polygon], CorruptionRecord]:
    """Corrupt an environment's buildings; BS/UE positions are untouched.

    Every building is independently removed with probability
    ``1 - keep_probability``; survivors are translated by a sampled shift
    (train: per-building magnitude; test: one shared magnitude, independent
    directions) and optionally replaced by their convex hull (train: each
    survivor independently; test: all-or-none per environment).  No false
    buildings are ever added.  Deterministic for a fixed seed; draw order is
    keep decisions, magnitudes, directions, simplification flags.
    """
    rng = np.random.default_rng(seed)
    n = len(env.buildings)
    keep = rng.random(n) < params.keep_probability
    survivors = [poly for poly, k in zip(env.buildings, keep) if k]
    removal_fraction = (n - len(survivors)) / n if n else 0.0

    if params.mode == "test":
        shared = sample_shift(float(rng.random()), dist, params.shift_scale)
        magnitudes = np.full(len(survivors), shared)
        record_shift = shared
    else:
        magnitudes = np.array(
            [sample_shift(float(rng.random()), dist, params.shift_scale) for _ in survivors]
        )
        record_shift = float(magnitudes.mean()) if len(survivors) else 0.0

    directions = rng.uniform(0.0, 2.0 * np.pi, size=len(survivors))
    shifted = [
        poly.translated(m * np.cos(theta), m * np.sin(theta))
        for poly, m, theta in zip(survivors, magnitudes, directions)
    ]

    if params.mode == "test":
        simplify_env = bool(rng.random() < params.simplify_probability)
        out = [convex_hull(p) for p in shifted] if simplify_env else shifted
        simplified = simplify_env
    else:
        flags = rng.random(len(shifted)) < params.simplify_probability
        out = [convex_hull(p) if f else p for p, f in zip(shifted, flags)]
        simplified = bool(flags.any())

    return out, CorruptionRecord(
        shift_s=record_shift, removal_fraction=removal_fraction, simplified=simplified
    )
