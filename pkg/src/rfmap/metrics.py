"""Binary-mask evaluation: IoU, Dice loss, Hausdorff/Chamfer, and aggregation.

Distance metrics operate on boundary point sets: foreground cells with at
least one background 4-neighbor (cells beyond the grid count as background),
converted to metric cell-center coordinates.  All functions accept either a
:class:`~rfmap.geometry.BinaryMap` or a plain 2-D 0/1 array (pass
``meters_per_pixel`` for arrays; defaults to 1.0).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .corruption import TestGroupLabel, all_group_labels
from .geometry import BinaryMap

#: Sentinel for distances that are undefined because a map has no foreground.
UNDEFINED_DISTANCE = float("nan")


def _as_grid(m, meters_per_pixel: float | None) -> tuple[np.ndarray, float]:
    if isinstance(m, BinaryMap):
        return m.grid.astype(bool), m.meters_per_pixel
    g = np.asarray(m)
    if g.ndim != 2:
        raise ValueError(f"expected a 2-D grid, got shape {g.shape}")
    return g.astype(bool), 1.0 if meters_per_pixel is None else meters_per_pixel


def _pair(a, b, meters_per_pixel):
    ga, mpp_a = _as_grid(a, meters_per_pixel)
    gb, mpp_b = _as_grid(b, meters_per_pixel)
    if ga.shape != gb.shape:
        raise ValueError(f"grid dimensions differ: {ga.shape} vs {gb.shape}")
    if mpp_a != mpp_b:
        raise ValueError("grids have different metric scales")
    return ga, gb, mpp_a


def iou(a, b, meters_per_pixel: float | None = None) -> float:
    """Intersection over union in [0, 1]; two empty maps compare as 1.0."""
    ga, gb, _ = _pair(a, b, meters_per_pixel)
    union = int(np.count_nonzero(ga | gb))
    if union == 0:
        return 1.0
    return int(np.count_nonzero(ga & gb)) / union


def dice_loss(a, b, meters_per_pixel: float | None = None) -> float:
    """1 - 2|a&b| / (|a| + |b|); two empty maps compare as 0.0."""
    ga, gb, _ = _pair(a, b, meters_per_pixel)
    total = int(np.count_nonzero(ga)) + int(np.count_nonzero(gb))
    if total == 0:
        return 0.0
    return 1.0 - 2.0 * int(np.count_nonzero(ga & gb)) / total


def boundary_points(m, meters_per_pixel: float | None = None) -> np.ndarray:
    """(N, 2) array of boundary-cell centers in meters (x, y), possibly empty."""
    g, mpp = _as_grid(m, meters_per_pixel)
    padded = np.pad(g, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    boundary = g & ~interior
    rows, cols = np.nonzero(boundary)
    return np.stack([(cols + 0.5) * mpp, (rows + 0.5) * mpp], axis=1)


def _directed(points_a: np.ndarray, points_b: np.ndarray, reduce_fn) -> float:
    if len(points_a) == 0 or len(points_b) == 0:
        return UNDEFINED_DISTANCE
    dists, _ = cKDTree(points_b).query(points_a)
    return float(reduce_fn(dists))


def directed_hausdorff(a, b, meters_per_pixel: float | None = None) -> float:
    """max over boundary points of a of the distance to b's nearest boundary point."""
    ga, gb, mpp = _pair(a, b, meters_per_pixel)
    return _directed(boundary_points(ga, mpp), boundary_points(gb, mpp), np.max)


def directed_chamfer(a, b, meters_per_pixel: float | None = None) -> float:
    """mean over boundary points of a of the distance to b's nearest boundary point."""
    ga, gb, mpp = _pair(a, b, meters_per_pixel)
    return _directed(boundary_points(ga, mpp), boundary_points(gb, mpp), np.mean)


def hausdorff(a, b, meters_per_pixel: float | None = None) -> float:
    """Symmetric Hausdorff distance: max of the two directed distances (meters).

    Undefined (NaN sentinel) when either map has no foreground; aggregation
    excludes such rows and reports the exclusion count.
    """
    d_ab = directed_hausdorff(a, b, meters_per_pixel)
    d_ba = directed_hausdorff(b, a, meters_per_pixel)
    if math.isnan(d_ab) or math.isnan(d_ba):
        return UNDEFINED_DISTANCE
    return max(d_ab, d_ba)


def chamfer(a, b, meters_per_pixel: float | None = None) -> float:
    """Symmetric Chamfer distance: mean of the two directed distances (meters)."""
    d_ab = directed_chamfer(a, b, meters_per_pixel)
    d_ba = directed_chamfer(b, a, meters_per_pixel)
    if math.isnan(d_ab) or math.isnan(d_ba):
        return UNDEFINED_DISTANCE
    return 0.5 * (d_ab + d_ba)


# ---------------------------------------------------------------------------
# Aggregation and reporting
# ---------------------------------------------------------------------------


@dataclass
class SampleRow:
    """Per-sample metric row feeding macro/micro aggregation."""

    sample_id: str
    iou: float
    intersection: int
    union: int
    hausdorff: float
    chamfer: float
    group: TestGroupLabel | None = None


@dataclass
class EvalReport:
    rows: list[SampleRow]
    macro_iou: float
    micro_iou: float
    mean_hausdorff: float
    mean_chamfer: float
    hausdorff_excluded: int
    chamfer_excluded: int
    # key -> (sample count, macro IoU over the bin; NaN when the bin is empty)
    group_macro_iou: dict[str, tuple[int, float]] = field(default_factory=dict)


def score_pair(sample_id: str, pred, truth, meters_per_pixel=None, group=None) -> SampleRow:
    """All per-sample metrics for one (prediction, truth) map pair."""
    gp, gt, mpp = _pair(pred, truth, meters_per_pixel)
    return SampleRow(
        sample_id=sample_id,
        iou=iou(gp, gt, mpp),
        intersection=int(np.count_nonzero(gp & gt)),
        union=int(np.count_nonzero(gp | gt)),
        hausdorff=hausdorff(gp, gt, mpp),
        chamfer=chamfer(gp, gt, mpp),
        group=group,
    )


def aggregate(rows: list[SampleRow]) -> EvalReport:
    """Macro (unweighted mean), micro (pooled counts), and per-group tables."""
    if not rows:
        raise ValueError("aggregate needs at least one row")
    ious = np.array([r.iou for r in rows])
    total_union = sum(r.union for r in rows)
    micro = (
        sum(r.intersection for r in rows) / total_union if total_union > 0 else 1.0
    )
    h = np.array([r.hausdorff for r in rows])
    c = np.array([r.chamfer for r in rows])
    h_ok, c_ok = ~np.isnan(h), ~np.isnan(c)

    groups: dict[str, tuple[int, float]] = {}
    for label in all_group_labels():
        member = [r.iou for r in rows if r.group == label]
        groups[label.key()] = (
            len(member),
            float(np.mean(member)) if member else float("nan"),
        )

    return EvalReport(
        rows=rows,
        macro_iou=float(ious.mean()),
        micro_iou=float(micro),
        mean_hausdorff=float(h[h_ok].mean()) if h_ok.any() else float("nan"),
        mean_chamfer=float(c[c_ok].mean()) if c_ok.any() else float("nan"),
        hausdorff_excluded=int((~h_ok).sum()),
        chamfer_excluded=int((~c_ok).sum()),
        group_macro_iou=groups,
    )


def write_csv(report: EvalReport, path: Path | str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["sample_id", "iou", "intersection", "union", "hausdorff_m", "chamfer_m", "group"]
        )
        for r in report.rows:
            writer.writerow(
                [
                    r.sample_id,
                    f"{r.iou:.6f}",
                    r.intersection,
                    r.union,
                    "" if math.isnan(r.hausdorff) else f"{r.hausdorff:.6f}",
                    "" if math.isnan(r.chamfer) else f"{r.chamfer:.6f}",
                    r.group.key() if r.group else "",
                ]
            )


def format_method_table(entries: list[tuple[str, str, str, EvalReport]]) -> str:
    """Markdown comparison table: Method, Map, RF, Macro/Micro IoU, distances."""
    lines = [
        "| Method | Map | RF | Macro IoU | Micro IoU | Hausdorff | Chamfer |",
        "|---|---|---|---|---|---|---|",
    ]
    for method, map_used, rf_used, rep in entries:
        lines.append(
            f"| {method} | {map_used} | {rf_used} "
            f"| {rep.macro_iou * 100:.1f}% | {rep.micro_iou * 100:.1f}% "
            f"| {rep.mean_hausdorff:.1f}m | {rep.mean_chamfer:.1f}m |"
        )
    return "\n".join(lines) + "\n"


def format_group_table(report: EvalReport) -> str:
    """Markdown per-bin macro IoU table (24 rows, empty bins blank)."""
    lines = ["| Group | Samples | Macro IoU |", "|---|---|---|"]
    for key, (count, value) in report.group_macro_iou.items():
        val = "" if math.isnan(value) else f"{value * 100:.1f}%"
        lines.append(f"| {key} | {count} | {val} |")
    return "\n".join(lines) + "\n"
