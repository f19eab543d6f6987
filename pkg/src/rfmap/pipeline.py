"""Dataset pipeline: generate, synthesize RF, corrupt, refine, evaluate, export.

On-disk layout under the dataset root:

    <root>/config.json            echo of the pipeline config
    <root>/index.json             {"train": [ids], "val": [ids], "test": [ids]}
    <root>/<env_id>/environment.json
    <root>/<env_id>/rf.json
    <root>/<env_id>/corrupted.json
    <root>/<env_id>/refined.json
    <root>/<env_id>/render.svg

Every stochastic stage derives its seed from (global seed, env id, stage
name) by hashing, so stages are reproducible and per-environment work is
order-independent.  All writes are idempotent: rerunning a stage with the
same config rewrites identical bytes.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import corruption, metrics, refine, rfsim
from .corruption import (
    CorruptionParams,
    CorruptionRecord,
    TestGroupLabel,
    assign_group,
    corrupt,
    severity_params,
)
from .environment import (
    Environment,
    EnvironmentFormatError,
    GeneratorConfig,
    dumps_canonical,
    environment_from_dict,
    environment_to_dict,
    generate_environment,
)
from .geometry import GRID_SIZE, BinaryMap, Polygon, rasterize
from .refine import LosCurve, RefinementConfig, build_pair_sequences, fit_curve, refine_map
from .rfsim import BANDS_GHZ, PathLossTable, synthesize_environment_rf

logger = logging.getLogger(__name__)

#: Reference split sizes; configs scale these ratios to the desired size.
SPLIT_BASE = {"train": 8403, "val": 596, "test": 1000}


class PipelineError(RuntimeError):
    """Missing upstream artifact or inconsistent dataset state."""


class ConfigError(ValueError):
    """Bad pipeline config; the message names the offending field."""


def derive_seed(global_seed: int, env_id: str, stage: str) -> int:
    """Stable per-(environment, stage) seed from the global seed."""
    digest = hashlib.sha256(f"{global_seed}:{env_id}:{stage}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


# ---------------------------------------------------------------------------
# Config
# ---------------------------------------------------------------------------


@dataclass
class SplitSizes:
    train: int = 84
    val: int = 6
    test: int = 10

    @classmethod
    def from_scale(cls, scale: float) -> "SplitSizes":
        return cls(*(max(1, round(base * scale)) for base in SPLIT_BASE.values()))


@dataclass
class PipelineConfig:
    root: Path = Path("dataset")
    seed: int = 0
    splits: SplitSizes = field(default_factory=SplitSizes)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    severity: float = 1.0
    noise: str = "none"  # none | 28ghz | 73ghz
    granularity: str = "r1"  # r1 | r2
    refinement: RefinementConfig = field(default_factory=RefinementConfig)
    labels_source: str = "classified"  # classified | oracle
    fit_mode: str = "literal"  # literal | ols
    export_variants: int = 1
    min_radio_tokens: int = 10

    def __post_init__(self) -> None:
        self.root = Path(self.root)
        if self.noise not in ("none", "28ghz", "73ghz"):
            raise ConfigError("field 'noise' must be one of none|28ghz|73ghz")
        if self.granularity not in ("r1", "r2"):
            raise ConfigError("field 'granularity' must be r1 or r2")
        if self.labels_source not in ("classified", "oracle"):
            raise ConfigError("field 'labels_source' must be classified or oracle")
        if self.fit_mode not in ("literal", "ols"):
            raise ConfigError("field 'fit_mode' must be literal or ols")
        if self.severity not in corruption.SEVERITY_LEVELS:
            raise ConfigError(f"field 'severity' must be one of {corruption.SEVERITY_LEVELS}")
        if self.export_variants < 1:
            raise ConfigError("field 'export_variants' must be >= 1")
        if not 1 <= self.min_radio_tokens <= 150:
            raise ConfigError("field 'min_radio_tokens' must be in [1, 150]")

    def to_dict(self) -> dict:
        return {
            "root": str(self.root),
            "seed": self.seed,
            "splits": dataclasses.asdict(self.splits),
            "generator": {
                "building_count_range": list(self.generator.building_count_range),
                "footprint_size_range": list(self.generator.footprint_size_range),
                "side_length_range": list(self.generator.side_length_range),
                "vertex_jitter": self.generator.vertex_jitter,
            },
            "severity": self.severity,
            "noise": self.noise,
            "granularity": self.granularity,
            "refinement": {
                "max_iterations": self.refinement.max_iterations,
                "max_candidates": self.refinement.max_candidates,
                "building_size_range": list(self.refinement.building_size_range),
            },
            "labels_source": self.labels_source,
            "fit_mode": self.fit_mode,
            "export_variants": self.export_variants,
            "min_radio_tokens": self.min_radio_tokens,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config root must be an object")
        kwargs: dict = {}
        try:
            if "root" in doc:
                kwargs["root"] = Path(doc["root"])
            if "seed" in doc:
                kwargs["seed"] = int(doc["seed"])
            if "splits" in doc:
                s = doc["splits"]
                if "scale" in s:
                    kwargs["splits"] = SplitSizes.from_scale(float(s["scale"]))
                else:
                    kwargs["splits"] = SplitSizes(
                        train=int(s["train"]), val=int(s["val"]), test=int(s["test"])
                    )
            if "generator" in doc:
                g = doc["generator"]
                kwargs["generator"] = GeneratorConfig(
                    building_count_range=tuple(g.get("building_count_range", (4, 14))),
                    footprint_size_range=tuple(g.get("footprint_size_range", (8.0, 60.0))),
                    side_length_range=tuple(g.get("side_length_range", (120.0, 400.0))),
                    vertex_jitter=float(g.get("vertex_jitter", 0.0)),
                )
            if "refinement" in doc:
                r = doc["refinement"]
                kwargs["refinement"] = RefinementConfig(
                    max_iterations=int(r.get("max_iterations", 100)),
                    max_candidates=int(r.get("max_candidates", 40)),
                    building_size_range=tuple(r.get("building_size_range", (3, 15))),
                )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc
        for key in (
            "severity",
            "noise",
            "granularity",
            "labels_source",
            "fit_mode",
            "export_variants",
            "min_radio_tokens",
        ):
            if key in doc:
                kwargs[key] = doc[key]
        unknown = set(doc) - {
            "root",
            "seed",
            "splits",
            "generator",
            "severity",
            "noise",
            "granularity",
            "refinement",
            "labels_source",
            "fit_mode",
            "export_variants",
            "min_radio_tokens",
        }
        if unknown:
            raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
        return cls(**kwargs)


def load_config(path: Path | str) -> PipelineConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return PipelineConfig.from_dict(doc)


# ---------------------------------------------------------------------------
# Small codecs
# ---------------------------------------------------------------------------


def rle_encode(grid: np.ndarray) -> list[int]:
    """Row-major run lengths of alternating values starting with zeros.

    The first entry is the length of the leading zero run (possibly 0), so
    decode always starts from value 0; run lengths sum to the cell count.
    """
    flat = np.asarray(grid).astype(np.uint8).ravel()
    if flat.size == 0:
        return []
    change = np.nonzero(np.diff(flat))[0] + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat[0] == 1:
        runs = [0] + runs
    return [int(r) for r in runs]


def rle_decode(runs: list[int], shape: tuple[int, int] = (GRID_SIZE, GRID_SIZE)) -> np.ndarray:
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


def _loss_to_json(loss: float) -> float | None:
    return None if math.isinf(loss) else loss


def _loss_from_json(value: float | None) -> float:
    return math.inf if value is None else float(value)


# ---------------------------------------------------------------------------
# Per-file readers/writers
# ---------------------------------------------------------------------------


def env_dir(root: Path, env_id: str) -> Path:
    return Path(root) / env_id


def _require(path: Path, produced_by: str) -> Path:
    if not path.exists():
        raise PipelineError(f"missing artifact {path}; run '{produced_by}' first")
    return path


def read_index(root: Path) -> dict[str, list[str]]:
    path = _require(Path(root) / "index.json", "gen")
    return json.loads(path.read_text())


def read_environment(root: Path, env_id: str) -> Environment:
    path = _require(env_dir(root, env_id) / "environment.json", "gen")
    try:
        return environment_from_dict(json.loads(path.read_text()))
    except (json.JSONDecodeError, EnvironmentFormatError) as exc:
        raise PipelineError(f"cannot parse {path}: {exc}") from exc


def write_rf(root: Path, env: Environment, observations: list[rfsim.PairObservation]) -> None:
    doc = {
        "env_id": env.id,
        "side_length": env.side_length,
        "pairs": [
            {
                "pair_index": obs.pair_index,
                "ue_index": obs.ue_index,
                "bs_index": obs.bs_index,
                "paths": [
                    {"aoa": r.aoa, "aod": r.aod, "toa": r.toa, "kind": r.kind}
                    for r in obs.records
                ],
                "loss_db": {str(band): _loss_to_json(obs.table.loss_db[band]) for band in BANDS_GHZ},
                "label": obs.label,
                "r1": obs.r1.values.tolist(),
                "r1_noisy_28": obs.r1_noisy_28.values.tolist(),
                "r1_noisy_73": obs.r1_noisy_73.values.tolist(),
                "r2": obs.r2.values.tolist(),
            }
            for obs in observations
        ],
    }
    (env_dir(root, env.id) / "rf.json").write_text(dumps_canonical(doc))


def read_rf(root: Path, env_id: str) -> dict:
    path = _require(env_dir(root, env_id) / "rf.json", "synth-rf")
    return json.loads(path.read_text())


def write_corrupted(
    root: Path,
    env_id: str,
    buildings: list[Polygon],
    record: CorruptionRecord,
    group: TestGroupLabel | None,
    severity: float,
    mode: str,
) -> None:
    doc = {
        "env_id": env_id,
        "severity": severity,
        "mode": mode,
        "buildings": [p.vertices.tolist() for p in buildings],
        "record": {
            "shift_s": record.shift_s,
            "removal_fraction": record.removal_fraction,
            "simplified": record.simplified,
        },
        "group": None
        if group is None
        else {
            "shift_bin": group.shift_bin,
            "removal_bin": group.removal_bin,
            "simplified": group.simplified,
        },
    }
    (env_dir(root, env_id) / "corrupted.json").write_text(dumps_canonical(doc))


def read_corrupted(root: Path, env_id: str) -> dict:
    path = _require(env_dir(root, env_id) / "corrupted.json", "corrupt")
    return json.loads(path.read_text())


def corrupted_polygons(doc: dict) -> list[Polygon]:
    return [Polygon(np.array(v, dtype=float)) for v in doc["buildings"]]


def corrupted_group(doc: dict) -> TestGroupLabel | None:
    g = doc.get("group")
    if g is None:
        return None
    return TestGroupLabel(g["shift_bin"], g["removal_bin"], g["simplified"])


def write_prediction(path: Path, env_id: str, bmap: BinaryMap, source: str) -> None:
    doc = {
        "env_id": env_id,
        "meters_per_pixel": bmap.meters_per_pixel,
        "grid_rle": rle_encode(bmap.grid),
        "source": source,
    }
    path.write_text(dumps_canonical(doc))


def read_prediction(path: Path) -> BinaryMap:
    doc = json.loads(Path(path).read_text())
    return BinaryMap(rle_decode(doc["grid_rle"]), doc["meters_per_pixel"])


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------


def stage_gen(cfg: PipelineConfig) -> dict[str, list[str]]:
    """Generate all environments and the split index."""
    root = cfg.root
    root.mkdir(parents=True, exist_ok=True)
    counts = [("train", cfg.splits.train), ("val", cfg.splits.val), ("test", cfg.splits.test)]
    index: dict[str, list[str]] = {name: [] for name, _ in counts}
    serial = 0
    for split, count in counts:
        for _ in range(count):
            env_id = f"env{serial:05d}"
            serial += 1
            gen_cfg = dataclasses.replace(
                cfg.generator, seed=derive_seed(cfg.seed, env_id, "gen")
            )
            env = generate_environment(gen_cfg, env_id=env_id)
            env_dir(root, env_id).mkdir(exist_ok=True)
            (env_dir(root, env_id) / "environment.json").write_text(
                dumps_canonical(environment_to_dict(env))
            )
            index[split].append(env_id)
    (root / "index.json").write_text(dumps_canonical(index))
    (root / "config.json").write_text(dumps_canonical(cfg.to_dict()))
    logger.info("generated %d environments under %s", serial, root)
    return index


def stage_synth_rf(cfg: PipelineConfig) -> None:
    """Synthesize rf.json for every environment."""
    index = read_index(cfg.root)
    for env_id in [e for split in index.values() for e in split]:
        env = read_environment(cfg.root, env_id)
        observations = synthesize_environment_rf(
            env, derive_seed(cfg.seed, env_id, "rf-noise")
        )
        write_rf(cfg.root, env, observations)
    logger.info("synthesized RF observations")


def _corrupt_one(
    cfg: PipelineConfig, env: Environment, mode: str, stage: str
) -> tuple[list[Polygon], CorruptionRecord]:
    params = severity_params(cfg.severity, mode=mode)
    return corrupt(env, params, derive_seed(cfg.seed, env.id, stage))


def stage_corrupt(cfg: PipelineConfig) -> None:
    """Corrupt maps: train/val in train mode, test in test mode with binning."""
    index = read_index(cfg.root)
    for split, env_ids in index.items():
        mode = "test" if split == "test" else "train"
        for env_id in env_ids:
            env = read_environment(cfg.root, env_id)
            buildings, record = _corrupt_one(cfg, env, mode, "corrupt")
            group = assign_group(record) if mode == "test" else None
            write_corrupted(cfg.root, env_id, buildings, record, group, cfg.severity, mode)
    logger.info("corrupted all splits")


def fit_band_curves(cfg: PipelineConfig, env_ids: list[str]) -> dict[float, LosCurve]:
    """Per-band loss curves fitted on LOS-labeled training pairs."""
    samples: dict[float, list[tuple[float, float]]] = {band: [] for band in BANDS_GHZ}
    for env_id in env_ids:
        env = read_environment(cfg.root, env_id)
        doc = read_rf(cfg.root, env_id)
        for pair in doc["pairs"]:
            if pair["label"] != rfsim.LOS:
                continue
            ue = env.ue[pair["ue_index"]]
            bs = env.bs[pair["bs_index"]]
            distance = float(np.linalg.norm(bs - ue))
            for band in BANDS_GHZ:
                loss = _loss_from_json(pair["loss_db"][str(band)])
                samples[band].append((distance, loss))
    return {
        band: fit_curve(samples[band], band, mode=cfg.fit_mode) for band in BANDS_GHZ
    }


def pair_labels(
    cfg: PipelineConfig,
    env: Environment,
    rf_doc: dict,
    curves: dict[float, LosCurve] | None,
) -> list[str]:
    """Per-pair labels, oracle (ground truth) or classified from path loss."""
    labels = []
    for pair in rf_doc["pairs"]:
        if cfg.labels_source == "oracle":
            labels.append(pair["label"])
        else:
            assert curves is not None
            table = PathLossTable(
                {band: _loss_from_json(pair["loss_db"][str(band)]) for band in BANDS_GHZ}
            )
            ue = env.ue[pair["ue_index"]]
            bs = env.bs[pair["bs_index"]]
            labels.append(
                refine.classify_pair(table, curves, float(np.linalg.norm(bs - ue)))
            )
    return labels


def stage_refine(cfg: PipelineConfig, split: str = "test") -> None:
    """Refine corrupted maps for one split (default: the test split)."""
    index = read_index(cfg.root)
    curves = None
    if cfg.labels_source == "classified":
        curves = fit_band_curves(cfg, index["train"])
    for env_id in index[split]:
        env = read_environment(cfg.root, env_id)
        rf_doc = read_rf(cfg.root, env_id)
        corrupted_doc = read_corrupted(cfg.root, env_id)
        corrupted_map = rasterize(corrupted_polygons(corrupted_doc), env.side_length)
        labels = pair_labels(cfg, env, rf_doc, curves)
        pairs = build_pair_sequences(env.ue, env.bs, labels, corrupted_map)
        ref_cfg = dataclasses.replace(
            cfg.refinement, seed=derive_seed(cfg.seed, env_id, "refine")
        )
        refined = refine_map(corrupted_map, pairs, ref_cfg)
        write_prediction(
            env_dir(cfg.root, env_id) / "refined.json", env_id, refined, cfg.labels_source
        )
    logger.info("refined split '%s'", split)


def _prediction_map(cfg: PipelineConfig, env: Environment, source: str) -> BinaryMap:
    if source == "corrupted":
        doc = read_corrupted(cfg.root, env.id)
        return rasterize(corrupted_polygons(doc), env.side_length)
    if source == "refined":
        path = _require(env_dir(cfg.root, env.id) / "refined.json", "refine")
        return read_prediction(path)
    # External prediction directory with <env_id>.json files.
    path = Path(source) / f"{env.id}.json"
    if not path.exists():
        raise PipelineError(f"missing prediction file {path}")
    return read_prediction(path)


def stage_eval(
    cfg: PipelineConfig, pred: str = "corrupted", split: str = "test"
) -> metrics.EvalReport:
    """Score one prediction source against ground truth over a split."""
    index = read_index(cfg.root)
    rows = []
    for env_id in index[split]:
        env = read_environment(cfg.root, env_id)
        truth = rasterize(env.buildings, env.side_length)
        pred_map = _prediction_map(cfg, env, pred)
        corrupted_doc = read_corrupted(cfg.root, env_id)
        rows.append(
            metrics.score_pair(
                env_id, pred_map, truth, group=corrupted_group(corrupted_doc)
            )
        )
    report = metrics.aggregate(rows)
    tag = pred if pred in ("corrupted", "refined") else "external"
    metrics.write_csv(report, cfg.root / f"eval_{tag}_{split}.csv")
    summary = {
        "pred": pred,
        "split": split,
        "macro_iou": report.macro_iou,
        "micro_iou": report.micro_iou,
        "mean_hausdorff_m": report.mean_hausdorff,
        "mean_chamfer_m": report.mean_chamfer,
        "hausdorff_excluded": report.hausdorff_excluded,
        "chamfer_excluded": report.chamfer_excluded,
    }
    (cfg.root / f"eval_{tag}_{split}.json").write_text(dumps_canonical(summary))
    (cfg.root / f"eval_{tag}_{split}.md").write_text(
        metrics.format_method_table(
            [(tag, "yes", cfg.granularity.upper() if tag != "corrupted" else "-", report)]
        )
        + "\n"
        + metrics.format_group_table(report)
    )
    logger.info(
        "eval %s/%s: macro IoU %.3f, micro IoU %.3f",
        pred,
        split,
        report.macro_iou,
        report.micro_iou,
    )
    return report


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

_COLORS = {"input": "#d62728", "prediction": "#1f77b4", "truth": "#2ca02c"}


def render_svg(
    truth: list[Polygon],
    corrupted: list[Polygon],
    prediction: BinaryMap | None,
    side_length: float,
) -> str:
    """Contour overlay of truth/input polygons and the predicted raster."""
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {side_length:g} {side_length:g}" '
        f'width="512" height="512">',
        f'<g transform="translate(0,{side_length:g}) scale(1,-1)">',
        f'<rect x="0" y="0" width="{side_length:g}" height="{side_length:g}" fill="#111111"/>',
    ]
    stroke = side_length / 256.0
    if prediction is not None:
        mpp = prediction.meters_per_pixel
        pts = metrics.boundary_points(prediction)
        for x, y in pts:
            parts.append(
                f'<rect x="{x - mpp / 2:.3f}" y="{y - mpp / 2:.3f}" width="{mpp:.3f}" '
                f'height="{mpp:.3f}" fill="{_COLORS["prediction"]}" fill-opacity="0.9"/>'
            )
    for polys, color in ((corrupted, _COLORS["input"]), (truth, _COLORS["truth"])):
        for poly in polys:
            coords = " ".join(f"{x:.3f},{y:.3f}" for x, y in poly.vertices)
            parts.append(
                f'<polygon points="{coords}" fill="none" stroke="{color}" '
                f'stroke-width="{stroke:.3f}"/>'
            )
    parts.append("</g></svg>")
    return "\n".join(parts) + "\n"


def stage_render(cfg: PipelineConfig, split: str = "test") -> None:
    """Write render.svg per environment (prediction layer only if refined)."""
    index = read_index(cfg.root)
    for env_id in index[split]:
        env = read_environment(cfg.root, env_id)
        corrupted_doc = read_corrupted(cfg.root, env_id)
        refined_path = env_dir(cfg.root, env_id) / "refined.json"
        prediction = read_prediction(refined_path) if refined_path.exists() else None
        svg = render_svg(
            env.buildings, corrupted_polygons(corrupted_doc), prediction, env.side_length
        )
        (env_dir(cfg.root, env_id) / "render.svg").write_text(svg)
    logger.info("rendered split '%s'", split)


# ---------------------------------------------------------------------------
# Export for the trainer
# ---------------------------------------------------------------------------


def _select_features(rf_doc: dict, granularity: str, noise: str) -> list[list[float]]:
    key = {
        ("r1", "none"): "r1",
        ("r1", "28ghz"): "r1_noisy_28",
        ("r1", "73ghz"): "r1_noisy_73",
        ("r2", "none"): "r2",
        ("r2", "28ghz"): "r2",
        ("r2", "73ghz"): "r2",
    }[(granularity, noise)]
    return [pair[key] for pair in rf_doc["pairs"]]


def stage_export(
    cfg: PipelineConfig,
    out_path: Path | str,
    splits: tuple[str, ...] = ("train", "val", "test"),
) -> int:
    """Pack (environment, corruption instance) records into one JSON-lines file.

    Train/val environments get ``export_variants`` independently corrupted
    instances (the trainer samples among them per epoch); test environments
    keep their single fixed corruption and its group label.  Returns the
    record count.
    """
    index = read_index(cfg.root)
    out_path = Path(out_path)
    count = 0
    with open(out_path, "w") as fh:
        for split in splits:
            for env_id in index[split]:
                env = read_environment(cfg.root, env_id)
                rf_doc = read_rf(cfg.root, env_id)
                features = _select_features(rf_doc, cfg.granularity, cfg.noise)
                truth_rle = rle_encode(rasterize(env.buildings, env.side_length).grid)
                if split == "test":
                    variants = [None]
                else:
                    variants = list(range(cfg.export_variants))
                for variant in variants:
                    if variant is None:
                        doc = read_corrupted(cfg.root, env_id)
                        polys = corrupted_polygons(doc)
                        group = doc["group"]
                        rec = doc["record"]
                        variant_idx = 0
                    else:
                        polys, record = _corrupt_one(
                            cfg, env, "train", f"corrupt:var{variant}"
                        )
                        group = None
                        rec = {
                            "shift_s": record.shift_s,
                            "removal_fraction": record.removal_fraction,
                            "simplified": record.simplified,
                        }
                        variant_idx = variant
                    corrupted_rle = rle_encode(rasterize(polys, env.side_length).grid)
                    record_doc = {
                        "env_id": env_id,
                        "split": split,
                        "variant": variant_idx,
                        "side_length": env.side_length,
                        "meters_per_pixel": env.meters_per_pixel,
                        "granularity": cfg.granularity,
                        "noise": cfg.noise,
                        "min_radio_tokens": cfg.min_radio_tokens,
                        "truth_rle": truth_rle,
                        "corrupted_rle": corrupted_rle,
                        "features": features,
                        "group": group,
                        "record": rec,
                    }
                    fh.write(json.dumps(record_doc, sort_keys=True) + "\n")
                    count += 1
    logger.info("exported %d records to %s", count, out_path)
    return count
