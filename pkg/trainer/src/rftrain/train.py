"""Training loop: Dice objective, warmup+cosine schedule, best-val checkpoint."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch.utils.data import DataLoader

from .data import FusionDataset, collate, load_records, rle_encode
from .model import FusionModel, ModelConfig, binary_iou, dice_loss
from .schedule import warmup_cosine_lr

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 200
    warmup_epochs: int = 20
    hold_epochs: int = 0  # keep the peak rate this long before the decay
    peak_lr: float = 2e-4
    weight_decay: float = 0.0
    grad_clip: float = 1.0
    batch_size: int = 15
    seed: int = 0
    device: str = "cpu"
    subsample: bool = True
    flips: bool = True
    variants: bool = True
    feature_mask: str = "none"  # none | aoa | aod (ablation switch)
    fixed_radio_tokens: int | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.warmup_epochs < self.epochs:
            raise ValueError("warmup_epochs must be < epochs")
        if self.feature_mask not in ("none", "aoa", "aod"):
            raise ValueError("feature_mask must be none, aoa, or aod")


@dataclass
class EpochStats:
    epoch: int
    lr: float
    train_loss: float
    val_loss: float
    val_macro_iou: float


def _loader(dataset: FusionDataset, batch_size: int, shuffle: bool, seed: int) -> DataLoader:
    generator = torch.Generator()
    generator.manual_seed(seed)
    return DataLoader(
        dataset,
        batch_size=batch_size,
        shuffle=shuffle,
        collate_fn=collate,
        generator=generator,
        num_workers=0,
    )


@torch.no_grad()
def refresh_batch_norm(model: FusionModel, loader: DataLoader, device: str) -> None:
    """Recompute BN running stats with the current weights (precise BN).

    The running estimates otherwise trail the weight updates by a step,
    which misaligns train-mode and eval-mode outputs on small datasets.
    """
    model.train()
    for batch in loader:
        model(batch["map"].to(device), batch["features"].to(device), batch["mask"].to(device))


@torch.no_grad()
def evaluate(model: FusionModel, loader: DataLoader, device: str) -> tuple[float, float]:
    model.eval()
    losses, ious = [], []
    for batch in loader:
        probs = model(
            batch["map"].to(device), batch["features"].to(device), batch["mask"].to(device)
        )
        target = batch["target"].to(device)
        losses.append(float(dice_loss(probs, target)))
        for i in range(probs.shape[0]):
            ious.append(binary_iou(probs[i] >= 0.5, target[i]))
    return float(np.mean(losses)), float(np.mean(ious))


def train(
    data_path: Path | str,
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    out_dir: Path | str,
) -> tuple[list[EpochStats], FusionModel]:
    """Train on the export's train split, select the lowest-val-loss epoch.

    Writes ``checkpoint.pt`` (best weights + configs) and ``metrics.csv``
    (per-epoch lr, train loss, validation loss and macro IoU) into
    ``out_dir`` and returns the epoch history plus the final-state model.
    Deterministic per seed on a single device.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    torch.manual_seed(train_cfg.seed)

    records = load_records(data_path)
    train_records = [r for r in records if r.split == "train"]
    val_records = [r for r in records if r.split == "val"] or train_records
    if not train_records:
        raise ValueError("dataset has no train-split records")
    feature_dim = train_records[0].features.shape[1]
    if feature_dim != model_cfg.feature_dim:
        raise ValueError(
            f"dataset feature dim {feature_dim} != model feature_dim {model_cfg.feature_dim}"
        )

    train_set = FusionDataset(
        train_records,
        augment=True,
        subsample=train_cfg.subsample,
        flips=train_cfg.flips,
        variants=train_cfg.variants,
        feature_mask=train_cfg.feature_mask,
        fixed_radio_tokens=train_cfg.fixed_radio_tokens,
        seed=train_cfg.seed,
    )
    val_set = FusionDataset(
        val_records, augment=False, feature_mask=train_cfg.feature_mask
    )
    train_loader = _loader(train_set, train_cfg.batch_size, True, train_cfg.seed)
    val_loader = _loader(val_set, train_cfg.batch_size, False, train_cfg.seed)

    device = train_cfg.device
    model = FusionModel(model_cfg).to(device)
    optimizer = torch.optim.AdamW(
        model.parameters(), lr=train_cfg.peak_lr, weight_decay=train_cfg.weight_decay
    )

    history: list[EpochStats] = []
    best_val = float("inf")
    for epoch in range(train_cfg.epochs):
        lr = warmup_cosine_lr(
            epoch,
            train_cfg.epochs,
            train_cfg.warmup_epochs,
            train_cfg.peak_lr,
            hold_epochs=train_cfg.hold_epochs,
        )
        for group in optimizer.param_groups:
            group["lr"] = lr
        model.train()
        epoch_losses = []
        for batch in train_loader:
            optimizer.zero_grad()
            probs = model(
                batch["map"].to(device), batch["features"].to(device), batch["mask"].to(device)
            )
            loss = dice_loss(probs, batch["target"].to(device))
            loss.backward()
            if train_cfg.grad_clip > 0:
                torch.nn.utils.clip_grad_norm_(model.parameters(), train_cfg.grad_clip)
            optimizer.step()
            epoch_losses.append(float(loss.detach()))
        refresh_batch_norm(model, train_loader, device)
        val_loss, val_iou = evaluate(model, val_loader, device)
        history.append(
            EpochStats(epoch, lr, float(np.mean(epoch_losses)), val_loss, val_iou)
        )
        if val_loss < best_val:
            best_val = val_loss
            torch.save(
                {
                    "model_state": model.state_dict(),
                    "model_config": dataclasses.asdict(model_cfg),
                    "train_config": dataclasses.asdict(train_cfg),
                    "epoch": epoch,
                    "val_loss": val_loss,
                },
                out_dir / "checkpoint.pt",
            )
        if epoch % 25 == 0 or epoch == train_cfg.epochs - 1:
            logger.info(
                "epoch %d lr %.2e train %.4f val %.4f iou %.4f",
                epoch,
                lr,
                history[-1].train_loss,
                val_loss,
                val_iou,
            )

    with open(out_dir / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "lr", "train_loss", "val_loss", "val_macro_iou"])
        for s in history:
            writer.writerow([s.epoch, f"{s.lr:.8f}", f"{s.train_loss:.6f}", f"{s.val_loss:.6f}", f"{s.val_macro_iou:.6f}"])
    return history, model


def load_checkpoint(path: Path | str, device: str = "cpu") -> FusionModel:
    payload = torch.load(Path(path), map_location=device, weights_only=False)
    cfg_doc = dict(payload["model_config"])
    cfg_doc["radio_hidden"] = tuple(cfg_doc["radio_hidden"])
    if cfg_doc.get("average_layers") is not None:
        cfg_doc["average_layers"] = tuple(cfg_doc["average_layers"])
    model = FusionModel(ModelConfig(**cfg_doc))
    model.load_state_dict(payload["model_state"])
    model.eval()
    return model


@torch.no_grad()
def predict(
    checkpoint_path: Path | str,
    data_path: Path | str,
    out_dir: Path | str,
    split: str = "test",
    device: str = "cpu",
) -> list[str]:
    """Write thresholded predictions as <env_id>.json files.

    The output schema matches the upstream eval command's prediction format
    (run-length encoded grid plus metric scale), so learned predictions are
    scored by the same metrics pipeline as the non-learning baselines.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = load_checkpoint(checkpoint_path, device)
    records = [r for r in load_records(data_path) if r.split == split]
    if not records:
        raise ValueError(f"no '{split}' records in {data_path}")
    dataset = FusionDataset(records, augment=False)
    written = []
    for i in range(len(dataset)):
        item = dataset[i]
        pred = model.predict_binary(
            item["map"].unsqueeze(0).to(device),
            item["features"].unsqueeze(0).to(device),
        )[0].cpu().numpy()
        doc = {
            "env_id": item["env_id"],
            "meters_per_pixel": item["meters_per_pixel"],
            "grid_rle": rle_encode(pred),
            "source": "learned",
        }
        path = out_dir / f"{item['env_id']}.json"
        path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
        written.append(item["env_id"])
    return written
