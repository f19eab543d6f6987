"""JSON-lines dataset loading and augmentation for the fusion trainer.

The wire format is the upstream toolkit's export: one record per
(environment, corruption instance) with run-length encoded 224x224 truth and
corrupted bitmaps, the 150 per-pair feature vectors, and split/group
metadata.  Feature layouts:

* r1 (19): five path triples (aoa/pi, aod/pi, path_length/side) then
  (ue.x, ue.y, bs.x, bs.y)/side; unused path slots are zero-padded and a
  real path always has a positive length slot.
* r2 (9): five standardized band losses then the same four coordinates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch.utils.data import Dataset

GRID = 224
PAIR_COUNT = 150
FEATURE_DIMS = {"r1": 19, "r2": 9}

# r1 slot indices.
R1_AOA_SLOTS = (0, 3, 6, 9, 12)
R1_AOD_SLOTS = (1, 4, 7, 10, 13)
R1_LEN_SLOTS = (2, 5, 8, 11, 14)
R1_COORD_X = (15, 17)
R1_COORD_Y = (16, 18)
R2_COORD_X = (5, 7)
R2_COORD_Y = (6, 8)


def rle_decode(runs: list[int], shape=(GRID, GRID)) -> np.ndarray:
    """Alternating run lengths starting with the zero run, row-major."""
    total = shape[0] * shape[1]
    if sum(runs) != total:
        raise ValueError(f"run lengths sum to {sum(runs)}, expected {total}")
    flat = np.zeros(total, dtype=np.uint8)
    pos, value = 0, 0
    for run in runs:
        if value:
            flat[pos : pos + run] = 1
        pos += run
        value ^= 1
    return flat.reshape(shape)


def rle_encode(grid: np.ndarray) -> list[int]:
    flat = np.asarray(grid).astype(np.uint8).ravel()
    change = np.nonzero(np.diff(flat))[0] + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat[0] == 1:
        runs = [0] + runs
    return [int(r) for r in runs]


@dataclass
class ExportRecord:
    env_id: str
    split: str
    variant: int
    truth: np.ndarray
    corrupted: np.ndarray
    features: np.ndarray  # (150, D)
    granularity: str
    min_radio_tokens: int
    meters_per_pixel: float


def load_records(path: Path | str) -> list[ExportRecord]:
    records = []
    for line in Path(path).read_text().splitlines():
        doc = json.loads(line)
        features = np.asarray(doc["features"], dtype=np.float32)
        expected = FEATURE_DIMS[doc["granularity"]]
        if features.shape != (PAIR_COUNT, expected):
            raise ValueError(
                f"{doc['env_id']}: features shape {features.shape}, "
                f"expected ({PAIR_COUNT}, {expected})"
            )
        records.append(
            ExportRecord(
                env_id=doc["env_id"],
                split=doc["split"],
                variant=int(doc.get("variant", 0)),
                truth=rle_decode(doc["truth_rle"]),
                corrupted=rle_decode(doc["corrupted_rle"]),
                features=features,
                granularity=doc["granularity"],
                min_radio_tokens=int(doc.get("min_radio_tokens", 10)),
                meters_per_pixel=float(doc["meters_per_pixel"]),
            )
        )
    if not records:
        raise ValueError(f"no records in {path}")
    granularities = {r.granularity for r in records}
    if len(granularities) > 1:
        raise ValueError(f"mixed granularities in one dataset: {granularities}")
    return records


# ---------------------------------------------------------------------------
# Augmentations
# ---------------------------------------------------------------------------


def _wrap_slot(values: np.ndarray) -> np.ndarray:
    """Wrap angle slots into [-1, 1] (slot units of pi)."""
    return (values + 1.0) % 2.0 - 1.0


def flip_features_horizontal(features: np.ndarray, granularity: str) -> np.ndarray:
    """Feature transform matching a world mirror across the vertical axis.

    x coordinates map to 1 - x; r1 angles theta map to pi - theta.  Padded
    path slots (zero length) stay zero.
    """
    out = features.copy()
    if granularity == "r1":
        real = out[:, R1_LEN_SLOTS] > 0
        for k, (aoa, aod) in enumerate(zip(R1_AOA_SLOTS, R1_AOD_SLOTS)):
            mask = real[:, k]
            out[mask, aoa] = _wrap_slot(1.0 - out[mask, aoa])
            out[mask, aod] = _wrap_slot(1.0 - out[mask, aod])
        xs = R1_COORD_X
    else:
        xs = R2_COORD_X
    out[:, xs] = 1.0 - out[:, xs]
    return out


def flip_features_vertical(features: np.ndarray, granularity: str) -> np.ndarray:
    """Feature transform matching a world mirror across the horizontal axis."""
    out = features.copy()
    if granularity == "r1":
        real = out[:, R1_LEN_SLOTS] > 0
        for k, (aoa, aod) in enumerate(zip(R1_AOA_SLOTS, R1_AOD_SLOTS)):
            mask = real[:, k]
            out[mask, aoa] = _wrap_slot(-out[mask, aoa])
            out[mask, aod] = _wrap_slot(-out[mask, aod])
        ys = R1_COORD_Y
    else:
        ys = R2_COORD_Y
    out[:, ys] = 1.0 - out[:, ys]
    return out


def flip_maps_horizontal(*grids: np.ndarray) -> tuple[np.ndarray, ...]:
    return tuple(np.ascontiguousarray(g[:, ::-1]) for g in grids)


def flip_maps_vertical(*grids: np.ndarray) -> tuple[np.ndarray, ...]:
    return tuple(np.ascontiguousarray(g[::-1, :]) for g in grids)


FEATURE_MASKS = {"none": (), "aoa": R1_AOA_SLOTS, "aod": R1_AOD_SLOTS}


def mask_feature_slots(features: np.ndarray, mask: str) -> np.ndarray:
    """Zero out one angular feature family (ablation switch); r1 only."""
    slots = FEATURE_MASKS[mask]
    if not slots:
        return features
    out = features.copy()
    out[:, list(slots)] = 0.0
    return out


# ---------------------------------------------------------------------------
# Torch dataset
# ---------------------------------------------------------------------------


class FusionDataset(Dataset):
    """(corrupted map, radio features) -> truth map samples with augmentation.

    One logical item per environment; corruption variants of the same
    environment are sampled per access, which stands in for on-the-fly
    corruption.  Flips transform maps and feature slots consistently;
    subsampling draws N_R uniform in [min_radio_tokens, 150].
    """

    def __init__(
        self,
        records: list[ExportRecord],
        *,
        augment: bool = False,
        subsample: bool = True,
        flips: bool = True,
        variants: bool = True,
        feature_mask: str = "none",
        fixed_radio_tokens: int | None = None,
        seed: int = 0,
    ):
        if not records:
            raise ValueError("empty record list")
        self.by_env: dict[str, list[ExportRecord]] = {}
        for rec in records:
            self.by_env.setdefault(rec.env_id, []).append(rec)
        self.env_ids = sorted(self.by_env)
        self.granularity = records[0].granularity
        self.min_radio_tokens = records[0].min_radio_tokens
        self.augment = augment
        self.subsample = subsample
        self.flips = flips
        self.variants = variants
        self.feature_mask = feature_mask
        self.fixed_radio_tokens = fixed_radio_tokens
        self.rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return len(self.env_ids)

    def __getitem__(self, idx: int) -> dict:
        group = self.by_env[self.env_ids[idx]]
        if self.augment and self.variants and len(group) > 1:
            rec = group[int(self.rng.integers(len(group)))]
        else:
            rec = group[0]
        corrupted, truth = rec.corrupted.copy(), rec.truth.copy()
        features = mask_feature_slots(rec.features, self.feature_mask)

        if self.augment and self.flips:
            if self.rng.random() < 0.5:
                corrupted, truth = flip_maps_horizontal(corrupted, truth)
                features = flip_features_horizontal(features, self.granularity)
            if self.rng.random() < 0.5:
                corrupted, truth = flip_maps_vertical(corrupted, truth)
                features = flip_features_vertical(features, self.granularity)

        if self.fixed_radio_tokens is not None:
            n = self.fixed_radio_tokens
            chosen = np.arange(n)
        elif self.augment and self.subsample:
            n = int(self.rng.integers(self.min_radio_tokens, PAIR_COUNT + 1))
            chosen = self.rng.choice(PAIR_COUNT, size=n, replace=False)
        else:
            chosen = np.arange(PAIR_COUNT)
        return {
            "env_id": rec.env_id,
            "map": torch.from_numpy(corrupted).float(),
            "target": torch.from_numpy(truth).float(),
            "features": torch.from_numpy(features[chosen]).float(),
            "meters_per_pixel": rec.meters_per_pixel,
        }


def collate(batch: list[dict]) -> dict:
    """Pad variable-length radio token sets and build a validity mask."""
    max_n = max(item["features"].shape[0] for item in batch)
    dim = batch[0]["features"].shape[1]
    feats = torch.zeros(len(batch), max_n, dim)
    mask = torch.zeros(len(batch), max_n, dtype=torch.bool)
    for i, item in enumerate(batch):
        n = item["features"].shape[0]
        feats[i, :n] = item["features"]
        mask[i, :n] = True
    return {
        "env_id": [item["env_id"] for item in batch],
        "map": torch.stack([item["map"] for item in batch]),
        "target": torch.stack([item["target"] for item in batch]),
        "features": feats,
        "mask": mask,
        "meters_per_pixel": [item["meters_per_pixel"] for item in batch],
    }
