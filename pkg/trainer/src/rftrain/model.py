"""Map+radio fusion transformer and the token/image reshaping utilities.

The corrupted map becomes three channels via a 3x3 conv, is patch-embedded
into image tokens (with positional embeddings), and is concatenated with
radio tokens produced by a shared MLP from the per-pair feature vectors.
Radio tokens get no positional embeddings, so the network is invariant to
pair ordering.  After the encoder, only the image-token positions are kept:
each layer's output goes through a shared per-token linear reduction and
batch norm, layers are averaged, and a linear head emits per-patch pixels
that are reassembled into an image, convolved to one channel, and squashed
to probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
from torch import nn


def unpatch(tensor: torch.Tensor, h: int, w: int, channels: int, patch_size: int) -> torch.Tensor:
    """Reassemble per-patch pixel vectors into a full image grid.

    Args:
        tensor: tokens of shape (batch, token_size, h, w) with
            token_size = channels * patch_size**2.
        h: image height / patch size.
        w: image width / patch size.
        channels: image channel count.
        patch_size: patch edge length.

    Returns:
        Image of shape (batch, channels, patch_size * h, patch_size * w).
    """
    if tensor.shape[1] != channels * patch_size * patch_size:
        raise ValueError(
            f"token size {tensor.shape[1]} != channels*patch^2 = {channels * patch_size ** 2}"
        )
    if tensor.shape[2] != h or tensor.shape[3] != w:
        raise ValueError(f"token grid {tensor.shape[2:]} does not match (h, w) = ({h}, {w})")
    return (
        tensor.permute(0, 2, 3, 1)
        .reshape(-1, h, w, channels, patch_size, patch_size)
        .permute(0, 3, 1, 4, 2, 5)
        .reshape(-1, channels, patch_size * h, patch_size * w)
    )


def patchify(image: torch.Tensor, patch_size: int) -> torch.Tensor:
    """Inverse of :func:`unpatch`: (B, C, H, W) -> (B, C*p*p, H/p, W/p)."""
    b, c, height, width = image.shape
    h, w = height // patch_size, width // patch_size
    return (
        image.reshape(b, c, h, patch_size, w, patch_size)
        .permute(0, 2, 4, 1, 3, 5)
        .reshape(b, h, w, c * patch_size * patch_size)
        .permute(0, 3, 1, 2)
    )


@dataclass
class ModelConfig:
    """Toy-scale fusion model hyperparameters (paper scale in parentheses)."""

    image_size: int = 224
    patch_size: int = 16  # paper: 14
    hidden_dim: int = 256  # paper: 1024
    depth: int = 4
    heads: int = 4
    mlp_ratio: float = 4.0
    # Radio-encoder hidden widths; (d//4, d) mirrors the paper's (256, 1024).
    radio_hidden: tuple[int, int] | None = None
    feature_dim: int = 19  # 19 for r1, 9 for r2
    min_radio_tokens: int = 10
    out_channels: int = 3  # channels of the pre-output reconstructed image
    # Indices of encoder layers averaged by the head; None = all layers.
    average_layers: tuple[int, ...] | None = None
    # Running-stat EMA weight of the token batch norms.  1.0 makes running
    # stats equal the last batch's, exact when training on one fixed batch.
    bn_momentum: float = 0.1
    # Extra gain on the radio encoder's output layer at init; >1 makes radio
    # keys distinguishable to attention from the first steps.
    radio_init_gain: float = 1.0

    def __post_init__(self) -> None:
        if self.image_size % self.patch_size != 0:
            raise ValueError("image_size must be divisible by patch_size")
        if self.radio_hidden is None:
            self.radio_hidden = (max(1, self.hidden_dim // 4), self.hidden_dim)

    @property
    def tokens_per_side(self) -> int:
        return self.image_size // self.patch_size

    @property
    def num_image_tokens(self) -> int:
        return self.tokens_per_side**2


class EncoderBlock(nn.Module):
    """Pre-norm transformer block with key-padding-aware attention."""

    def __init__(self, dim: int, heads: int, mlp_ratio: float):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = nn.MultiheadAttention(dim, heads, batch_first=True)
        self.norm2 = nn.LayerNorm(dim)
        hidden = int(dim * mlp_ratio)
        self.mlp = nn.Sequential(nn.Linear(dim, hidden), nn.GELU(), nn.Linear(hidden, dim))

    def forward(self, x: torch.Tensor, key_padding_mask: torch.Tensor | None) -> torch.Tensor:
        y = self.norm1(x)
        attn_out, _ = self.attn(y, y, y, key_padding_mask=key_padding_mask, need_weights=False)
        x = x + attn_out
        return x + self.mlp(self.norm2(x))


class FusionModel(nn.Module):
    """Binary-map refinement network fusing image patches with radio tokens."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        d = cfg.hidden_dim
        self.conv_in = nn.Conv2d(1, 3, kernel_size=3, padding=1)
        self.patch_embed = nn.Conv2d(3, d, kernel_size=cfg.patch_size, stride=cfg.patch_size)
        self.pos_embed = nn.Parameter(torch.zeros(1, cfg.num_image_tokens, d))
        nn.init.trunc_normal_(self.pos_embed, std=0.02)
        h1, h2 = cfg.radio_hidden
        self.radio_mlp = nn.Sequential(
            nn.Linear(cfg.feature_dim, h1),
            nn.ReLU(),
            nn.Linear(h1, h2),
            nn.ReLU(),
            nn.Linear(h2, d),
        )
        self.blocks = nn.ModuleList(
            EncoderBlock(d, cfg.heads, cfg.mlp_ratio) for _ in range(cfg.depth)
        )
        self.reduce = nn.Linear(d, d)
        # One norm per encoder layer: running statistics differ per depth, so
        # sharing one BatchNorm corrupts eval-mode outputs.
        self.norm_tokens = nn.ModuleList(
            nn.BatchNorm1d(d, momentum=cfg.bn_momentum) for _ in range(cfg.depth)
        )
        self.head = nn.Linear(d, cfg.out_channels * cfg.patch_size**2)
        self.conv_out = nn.Conv2d(cfg.out_channels, 1, kernel_size=3, padding=1)
        # Start the output path near zero so sigmoids begin unsaturated and
        # Dice gradients stay alive.
        with torch.no_grad():
            self.head.weight.mul_(0.05)
            nn.init.zeros_(self.head.bias)
            self.conv_out.weight.mul_(0.05)
            nn.init.zeros_(self.conv_out.bias)
            if cfg.radio_init_gain != 1.0:
                self.radio_mlp[-1].weight.mul_(cfg.radio_init_gain)

    def forward(
        self,
        bmap: torch.Tensor,
        features: torch.Tensor,
        mask: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """Probability map in [0, 1] of shape (batch, image_size, image_size).

        Args:
            bmap: (batch, H, W) or (batch, 1, H, W) binary map.
            features: (batch, N, feature_dim) radio feature vectors.
            mask: optional (batch, N) bool, True where the token is real.
        """
        cfg = self.cfg
        if bmap.dim() == 3:
            bmap = bmap.unsqueeze(1)
        if features.shape[-1] != cfg.feature_dim:
            raise ValueError(
                f"feature dim {features.shape[-1]} does not match configured "
                f"{cfg.feature_dim} (granularity mismatch)"
            )
        valid_counts = (
            mask.sum(dim=1) if mask is not None else torch.full(
                (features.shape[0],), features.shape[1], device=features.device
            )
        )
        if int(valid_counts.min()) < cfg.min_radio_tokens:
            raise ValueError(
                f"need at least {cfg.min_radio_tokens} radio tokens, got {int(valid_counts.min())}"
            )

        x = self.conv_in(bmap.to(self.conv_in.weight.dtype))
        tokens = self.patch_embed(x).flatten(2).transpose(1, 2)  # (B, 256, d)
        tokens = tokens + self.pos_embed
        radio = self.radio_mlp(features)  # no positional embedding on purpose
        seq = torch.cat([tokens, radio], dim=1)

        key_padding_mask = None
        if mask is not None:
            image_part = torch.zeros(
                mask.shape[0], cfg.num_image_tokens, dtype=torch.bool, device=mask.device
            )
            key_padding_mask = torch.cat([image_part, ~mask], dim=1)

        layer_ids = (
            range(len(self.blocks)) if cfg.average_layers is None else cfg.average_layers
        )
        wanted = set(layer_ids)
        collected = []
        for i, block in enumerate(self.blocks):
            seq = block(seq, key_padding_mask)
            if i in wanted:
                img_tokens = seq[:, : cfg.num_image_tokens]
                reduced = self.reduce(img_tokens)
                b, n, d = reduced.shape
                reduced = self.norm_tokens[i](reduced.reshape(b * n, d)).reshape(b, n, d)
                collected.append(reduced)
        merged = torch.stack(collected).mean(dim=0)

        pixels = self.head(merged)  # (B, 256, C*p*p)
        side = cfg.tokens_per_side
        grid = pixels.transpose(1, 2).reshape(-1, pixels.shape[-1], side, side)
        image = unpatch(grid, side, side, cfg.out_channels, cfg.patch_size)
        return torch.sigmoid(self.conv_out(image)).squeeze(1)

    def predict_binary(self, bmap, features, mask=None) -> torch.Tensor:
        """Thresholded prediction at 0.5."""
        return (self.forward(bmap, features, mask) >= 0.5).to(torch.uint8)


def dice_loss(probs: torch.Tensor, targets: torch.Tensor, eps: float = 1e-7) -> torch.Tensor:
    """Soft Dice loss, averaged over the batch; 0 for a perfect match."""
    p = probs.reshape(probs.shape[0], -1)
    t = targets.reshape(targets.shape[0], -1)
    inter = (p * t).sum(dim=1)
    denom = p.sum(dim=1) + t.sum(dim=1)
    return (1.0 - 2.0 * inter / (denom + eps)).mean()


def binary_iou(pred: torch.Tensor, target: torch.Tensor) -> float:
    """IoU of two binary maps (1.0 when both are empty)."""
    pred = pred.bool()
    target = target.bool()
    union = (pred | target).sum().item()
    if union == 0:
        return 1.0
    return (pred & target).sum().item() / union
