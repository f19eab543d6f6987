"""Non-learning map refinement: LOS/NLOS classification plus violation repair.

The classifier fits one log-distance loss curve per band on training pairs
and labels a pair LOS in a band when its measured loss falls below the curve
plus a distance-proportional margin; the final label is a majority vote over
the five bands.  Refinement then stamps random rectangular buildings onto
cells of NLOS-labeled segments that cross no building, keeping only stamps
that reduce the total violation count without breaking LOS pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import GRID_SIZE, BinaryMap, segment_pixels
from .rfsim import BANDS_GHZ, LOS, NLOS, PathLossTable

#: Margin slope: a pair is LOS in a band when measured < predicted + DELTA_SLOPE * x.
DELTA_SLOPE = 0.005


class CurveFitError(ValueError):
    """Not enough finite samples to fit a loss curve."""


@dataclass(frozen=True)
class LosCurve:
    """Fitted expected-loss curve: predicted = intercept + slope * log(x)."""

    band_ghz: float
    intercept: float
    slope: float = 1.0
    log_base: float = math.e

    def predict(self, distance: float) -> float:
        return self.intercept + self.slope * math.log(distance, self.log_base)


def fit_curve(
    samples: list[tuple[float, float]],
    band_ghz: float,
    mode: str = "literal",
    log_base: float = math.e,
) -> LosCurve:
    """Fit the expected path-loss curve for one band.

    ``literal`` mode pins the slope at 1 and sets the intercept to
    ``mean(loss - log(distance))``; ``ols`` mode fits intercept and slope by
    ordinary least squares on (log distance, loss).  Samples with infinite
    loss are ignored; fewer than two finite samples is an error.
    """
    finite = [(x, y) for x, y in samples if math.isfinite(y)]
    if len(finite) < 2:
        raise CurveFitError(f"need >=2 finite samples for {band_ghz} GHz, got {len(finite)}")
    if any(x <= 0 for x, _ in finite):
        raise CurveFitError("distances must be positive")
    logs = np.array([math.log(x, log_base) for x, _ in finite])
    ys = np.array([y for _, y in finite])
    if mode == "literal":
        return LosCurve(band_ghz, intercept=float(np.mean(ys - logs)), log_base=log_base)
    if mode == "ols":
        slope, intercept = np.polyfit(logs, ys, 1)
        return LosCurve(band_ghz, intercept=float(intercept), slope=float(slope), log_base=log_base)
    raise ValueError("mode must be 'literal' or 'ols'")


def classify_pair(table: PathLossTable, curves: dict[float, LosCurve], distance: float) -> str:
    """Majority vote over the five bands; infinite measured loss votes NLOS."""
    if set(curves) != set(BANDS_GHZ):
        raise ValueError(f"need one curve per band {BANDS_GHZ}")
    los_votes = 0
    for band in BANDS_GHZ:
        measured = table.loss_db[band]
        if math.isfinite(measured) and measured < curves[band].predict(distance) + DELTA_SLOPE * distance:
            los_votes += 1
    return LOS if los_votes >= 3 else NLOS


# ---------------------------------------------------------------------------
# Violation analysis and refinement
# ---------------------------------------------------------------------------


@dataclass
class PairSequence:
    """One labeled UE-BS pair with its precomputed traversal cells."""

    ue: np.ndarray
    bs: np.ndarray
    cells: np.ndarray  # (N, 2) int (row, col), supercover of the segment
    label: str

    def __post_init__(self) -> None:
        if self.label not in (LOS, NLOS):
            raise ValueError("label must be LOS or NLOS")


def build_pair_sequences(
    ue_points: np.ndarray,
    bs_points: np.ndarray,
    labels: list[str],
    bmap: BinaryMap,
) -> list[PairSequence]:
    """PairSequences for every (ue, bs) combination in pair-index order."""
    pairs = [(i, j) for i in range(len(ue_points)) for j in range(len(bs_points))]
    if len(labels) != len(pairs):
        raise ValueError(f"expected {len(pairs)} labels, got {len(labels)}")
    out = []
    for (i, j), label in zip(pairs, labels):
        _, cells = segment_pixels(ue_points[i], bs_points[j], bmap)
        out.append(PairSequence(ue=ue_points[i], bs=bs_points[j], cells=cells, label=label))
    return out


def analyze_violations(
    bmap: BinaryMap, pairs: list[PairSequence]
) -> tuple[list[PairSequence], list[PairSequence], np.ndarray]:
    """Label/geometry consistency check against the current map.

    Returns ``(v_nlos, v_los, p)``: NLOS pairs whose segment crosses no
    foreground cell, LOS pairs whose segment crosses at least one, and the
    deduplicated (row, col) cells of all violating NLOS segments - the only
    places a missing building could sit.
    """
    grid = bmap.grid
    v_nlos, v_los = [], []
    for pair in pairs:
        hit = bool(grid[pair.cells[:, 0], pair.cells[:, 1]].any())
        if pair.label == NLOS and not hit:
            v_nlos.append(pair)
        elif pair.label == LOS and hit:
            v_los.append(pair)
    if v_nlos:
        p = np.unique(np.concatenate([pair.cells for pair in v_nlos]), axis=0)
    else:
        p = np.zeros((0, 2), dtype=np.int64)
    return v_nlos, v_los, p


@dataclass(frozen=True)
class RefinementConfig:
    max_iterations: int = 100
    max_candidates: int = 40
    building_size_range: tuple[int, int] = (3, 15)  # pixels
    seed: int = 0

    def __post_init__(self) -> None:
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 1 <= self.max_candidates <= 40:
            raise ValueError("max_candidates must be in [1, 40]")
        lo, hi = self.building_size_range
        if not (1 <= lo <= hi):
            raise ValueError("building_size_range must be a positive interval")


def _random_box(
    center: tuple[int, int], cfg: RefinementConfig, rng: np.random.Generator
) -> tuple[int, int, int, int]:
    """Half-open (r0, r1, c0, c1) stamp box clipped to the grid, never empty."""
    lo, hi = cfg.building_size_range
    w = int(rng.integers(lo, hi + 1))
    h = int(rng.integers(lo, hi + 1))
    row, col = center
    r0 = max(0, row - h // 2)
    r1 = min(GRID_SIZE, r0 + h)
    c0 = max(0, col - w // 2)
    c1 = min(GRID_SIZE, c0 + w)
    return r0, r1, c0, c1


def create_random_building(
    center: tuple[int, int], cfg: RefinementConfig, rng: np.random.Generator
) -> BinaryMap:
    """Axis-aligned rectangular stamp centered at a pixel, as its own map."""
    if not (0 <= center[0] < GRID_SIZE and 0 <= center[1] < GRID_SIZE):
        raise ValueError(f"center {center} out of bounds")
    r0, r1, c0, c1 = _random_box(center, cfg, rng)
    grid = np.zeros((GRID_SIZE, GRID_SIZE), dtype=np.uint8)
    grid[r0:r1, c0:c1] = 1
    return BinaryMap(grid, 1.0)


def refine_map(
    corrupted: BinaryMap, pairs: list[PairSequence], cfg: RefinementConfig
) -> BinaryMap:
    """Iteratively merge random buildings that repair NLOS violations.

    Loop up to ``max_iterations`` times: stop once no NLOS violation remains
    or no candidate improves.  Each iteration samples up to
    ``max_candidates`` centers from the initial violation-cell pool, stamps
    a random rectangle at each (pixelwise max merge), keeps candidates that
    strictly reduce total violations while increasing LOS violations by less
    than 2, and applies the best by (total violations, LOS violations) with
    stable tie-breaking.  Never removes foreground.
    """
    rng = np.random.default_rng(cfg.seed)
    refined = corrupted.copy()
    v_nlos, v_los, pool = analyze_violations(refined, pairs)
    n_nlos, n_los = len(v_nlos), len(v_los)

    # Per-pair traversal cells never change; only the hit flags do.  Cells of
    # all not-yet-hit pairs are kept concatenated so one candidate stamp is a
    # single vectorized box test.
    hit = np.array(
        [bool(refined.grid[p.cells[:, 0], p.cells[:, 1]].any()) for p in pairs]
    )
    is_nlos = np.array([p.label == NLOS for p in pairs])

    def open_cells() -> tuple[np.ndarray, np.ndarray]:
        idx = np.nonzero(~hit)[0]
        if len(idx) == 0:
            return np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int64)
        cells = np.concatenate([pairs[i].cells for i in idx])
        owners = np.concatenate([np.full(len(pairs[i].cells), i) for i in idx])
        return cells, owners

    cells_cat, owners_cat = open_cells()

    def count_after(box: tuple[int, int, int, int]) -> tuple[int, int, np.ndarray]:
        r0, r1, c0, c1 = box
        inside = (
            (cells_cat[:, 0] >= r0)
            & (cells_cat[:, 0] < r1)
            & (cells_cat[:, 1] >= c0)
            & (cells_cat[:, 1] < c1)
        )
        newly = np.zeros(len(pairs), dtype=bool)
        newly[np.unique(owners_cat[inside])] = True
        d_nlos = int(np.count_nonzero(newly & is_nlos))
        d_los = int(np.count_nonzero(newly & ~is_nlos))
        return n_nlos - d_nlos, n_los + d_los, newly

    for _ in range(cfg.max_iterations):
        if n_nlos == 0:
            break
        k = min(len(pool), cfg.max_candidates)
        if k == 0:
            break
        chosen = rng.choice(len(pool), size=k, replace=False)
        improvements = []
        for rank, pool_idx in enumerate(chosen):
            center = (int(pool[pool_idx, 0]), int(pool[pool_idx, 1]))
            box = _random_box(center, cfg, rng)
            cand_nlos, cand_los, newly = count_after(box)
            if (cand_nlos + cand_los < n_nlos + n_los) and (cand_los - n_los < 2):
                improvements.append((cand_nlos + cand_los, cand_los, rank, box, newly))
        if not improvements:
            break
        improvements.sort(key=lambda item: (item[0], item[1], item[2]))
        _, best_los, _, box, newly = improvements[0]
        r0, r1, c0, c1 = box
        refined.grid[r0:r1, c0:c1] = 1
        hit |= newly
        cells_cat, owners_cat = open_cells()
        n_nlos = int(np.count_nonzero(is_nlos & ~hit))
        n_los = best_los
    return refined
