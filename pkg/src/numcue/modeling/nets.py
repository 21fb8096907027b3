"""Model family: fusion MLP baseline, cross-modal transformer, cue ensemble.

The transformer routes each target modality through cross-modal attention
over the other two modalities' projected sequences, then through
self-attention; the final real positions of the three target streams are
concatenated into one fused representation. Padded positions never act as
attention keys, and a modality with no real rows (common for text) is
replaced by a learned null token.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn

from ..features import AUDIO_DIM, TEXT_DIM, VIDEO_DIM
from .data import Batch

INPUT_DIMS = {"video": VIDEO_DIM, "audio": AUDIO_DIM, "text": TEXT_DIM}
MODALITIES = ("video", "audio", "text")

# Cues the two-stage ensemble predicts before classifying uncertainty.
ENSEMBLE_CUES = ("delay", "eyebrow_raise", "eyebrow_scrunch", "look_to_adult", "hand_on_face")


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class MulTConfig:
    layers: int = 5
    heads: int = 5
    model_dim: int = 40
    dropout: float = 0.1
    n_classes: int = 3
    ff_mult: int = 2

    def __post_init__(self) -> None:
        if self.layers < 1:
            raise ModelError("layers must be >= 1")
        if self.model_dim % self.heads:
            raise ModelError(
                f"model_dim {self.model_dim} not divisible by heads {self.heads}"
            )
        if not 0 <= self.dropout < 1:
            raise ModelError("dropout must lie in [0, 1)")


def _sinusoidal_positions(length: int, dim: int, device, dtype) -> torch.Tensor:
    position = torch.arange(length, device=device, dtype=dtype)[:, None]
    half = torch.arange(0, dim, 2, device=device, dtype=dtype)
    freq = torch.exp(-math.log(10000.0) * half / dim)
    enc = torch.zeros(length, dim, device=device, dtype=dtype)
    enc[:, 0::2] = torch.sin(position * freq)
    enc[:, 1::2] = torch.cos(position * freq[: dim // 2])
    return enc


class AttentionBlock(nn.Module):
    """Pre-norm residual attention + feedforward; cross when source differs."""

    def __init__(self, dim: int, heads: int, dropout: float, ff_mult: int):
        super().__init__()
        self.norm_q = nn.LayerNorm(dim)
        self.norm_kv = nn.LayerNorm(dim)
        self.attn = nn.MultiheadAttention(dim, heads, dropout=dropout, batch_first=True)
        self.norm_ff = nn.LayerNorm(dim)
        self.ff = nn.Sequential(
            nn.Linear(dim, ff_mult * dim),
            nn.ReLU(),
            nn.Dropout(dropout),
            nn.Linear(ff_mult * dim, dim),
        )
        self.drop = nn.Dropout(dropout)

    def forward(self, target, source, source_mask):
        q = self.norm_q(target)
        kv = self.norm_kv(source)
        attended, _ = self.attn(
            q, kv, kv, key_padding_mask=~source_mask, need_weights=False
        )
        target = target + self.drop(attended)
        return target + self.drop(self.ff(self.norm_ff(target)))


class CrossModalStack(nn.Module):
    def __init__(self, cfg: MulTConfig, dim: int):
        super().__init__()
        self.blocks = nn.ModuleList(
            AttentionBlock(dim, cfg.heads, cfg.dropout, cfg.ff_mult)
            for _ in range(cfg.layers)
        )

    def forward(self, target, source, source_mask):
        for block in self.blocks:
            target = block(target, source, source_mask)
        return target


class SelfStack(nn.Module):
    def __init__(self, cfg: MulTConfig, dim: int):
        super().__init__()
        self.blocks = nn.ModuleList(
            AttentionBlock(dim, cfg.heads, cfg.dropout, cfg.ff_mult)
            for _ in range(cfg.layers)
        )

    def forward(self, x, mask):
        for block in self.blocks:
            x = block(x, x, mask)
        return x


def _inject_null_token(
    projected: torch.Tensor, mask: torch.Tensor, null_token: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor]:
    """Give empty sequences one real position holding the learned null token."""
    empty = ~mask.any(dim=1)
    if not bool(empty.any()):
        return projected, mask
    projected = projected.clone()
    mask = mask.clone()
    projected[empty, 0] = null_token.to(projected.dtype)
    mask[empty, 0] = True
    return projected, mask


class CrossModalTransformer(nn.Module):
    """Three-stream cross-modal transformer with a linear classification head."""

    def __init__(self, cfg: MulTConfig = MulTConfig()):
        super().__init__()
        self.cfg = cfg
        d = cfg.model_dim
        self.proj = nn.ModuleDict(
            {m: nn.Linear(INPUT_DIMS[m], d) for m in MODALITIES}
        )
        self.null_token = nn.ParameterDict(
            {m: nn.Parameter(torch.zeros(d)) for m in MODALITIES}
        )
        self.cross = nn.ModuleDict()
        for target in MODALITIES:
            for source in MODALITIES:
                if source != target:
                    self.cross[f"{source}->{target}"] = CrossModalStack(cfg, d)
        # the two cross-modal streams are concatenated before self-attention
        heads2 = cfg.heads if (2 * d) % cfg.heads == 0 else 2
        self_cfg = MulTConfig(
            layers=cfg.layers, heads=heads2, model_dim=2 * d,
            dropout=cfg.dropout, n_classes=cfg.n_classes, ff_mult=cfg.ff_mult,
        )
        self.self_attn = nn.ModuleDict(
            {m: SelfStack(self_cfg, 2 * d) for m in MODALITIES}
        )
        self.fused_dim = 6 * d
        self.head = nn.Linear(self.fused_dim, cfg.n_classes)

    def _streams(self, batch: Batch):
        streams = {}
        masks = {}
        for m in MODALITIES:
            x = self.proj[m](getattr(batch, m))
            x = x + _sinusoidal_positions(
                x.shape[1], x.shape[2], x.device, x.dtype
            )
            x, mask = _inject_null_token(x, getattr(batch, f"{m}_mask"), self.null_token[m])
            streams[m] = x
            masks[m] = mask
        return streams, masks

    def fuse_parts(self, batch: Batch) -> dict[str, torch.Tensor]:
        """Final real state of each target stream after cross- and self-attention."""
        streams, masks = self._streams(batch)
        pieces = {}
        for target in MODALITIES:
            others = [m for m in MODALITIES if m != target]
            crossed = [
                self.cross[f"{source}->{target}"](
                    streams[target], streams[source], masks[source]
                )
                for source in others
            ]
            merged = torch.cat(crossed, dim=2)
            merged = self.self_attn[target](merged, masks[target])
            last = masks[target].float().cumsum(dim=1).argmax(dim=1)
            pieces[target] = merged[torch.arange(len(last)), last]
        return pieces

    def fuse(self, batch: Batch) -> torch.Tensor:
        """Fused representation: concatenated final real states of all targets."""
        return torch.cat(list(self.fuse_parts(batch).values()), dim=1)

    def forward(self, batch: Batch) -> tuple[torch.Tensor, torch.Tensor]:
        fused = self.fuse(batch)
        return self.head(fused), fused


class BaselineMLP(nn.Module):
    """Masked mean-pool per modality, per-modality MLPs, then a fusion MLP."""

    def __init__(self, hidden: int = 64, n_classes: int = 3):
        super().__init__()
        self.hidden = hidden
        self.encoders = nn.ModuleDict(
            {
                m: nn.Sequential(
                    nn.Linear(INPUT_DIMS[m], hidden), nn.ReLU(), nn.Linear(hidden, hidden)
                )
                for m in MODALITIES
            }
        )
        self.fusion = nn.Sequential(
            nn.Linear(3 * hidden, hidden), nn.ReLU(), nn.Linear(hidden, n_classes)
        )
        self.fused_dim = 3 * hidden

    def fuse(self, batch: Batch) -> torch.Tensor:
        pooled = []
        for m in MODALITIES:
            x = getattr(batch, m)
            mask = getattr(batch, f"{m}_mask").to(x.dtype)
            count = mask.sum(dim=1, keepdim=True).clamp(min=1.0)
            mean = (x * mask[:, :, None]).sum(dim=1) / count
            pooled.append(self.encoders[m](mean))
        return torch.cat(pooled, dim=1)

    def forward(self, batch: Batch) -> tuple[torch.Tensor, torch.Tensor]:
        fused = self.fuse(batch)
        return self.fusion(fused), fused


class CueHeads(nn.Module):
    """Sigmoid heads over a fused representation, one per ensemble cue."""

    def __init__(self, fused_dim: int):
        super().__init__()
        self.linear = nn.Linear(fused_dim, len(ENSEMBLE_CUES))

    def forward(self, fused: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.linear(fused))


class CueEnsemble(nn.Module):
    """Two-stage model: backbone predicts cue probabilities, MLP predicts the label.

    The final scores depend on the input sample only through the five cue
    probabilities.
    """

    def __init__(self, backbone: CrossModalTransformer, hidden: int = 32, n_classes: int = 3):
        super().__init__()
        self.backbone = backbone
        self.cue_heads = CueHeads(backbone.fused_dim)
        self.classifier = nn.Sequential(
            nn.Linear(len(ENSEMBLE_CUES), hidden), nn.ReLU(), nn.Linear(hidden, n_classes)
        )
        self.stage1_trained = False

    def cue_probs(self, batch: Batch) -> torch.Tensor:
        return self.cue_heads(self.backbone.fuse(batch))

    def forward(self, batch: Batch) -> tuple[torch.Tensor, torch.Tensor]:
        if not self.stage1_trained:
            raise ModelError("ensemble stage 2 invoked before stage-1 cue training")
        probs = self.cue_probs(batch)
        return self.classifier(probs), probs


def build_model(kind: str, cfg: MulTConfig = MulTConfig(), seed: int = 0) -> nn.Module:
    """Seeded model construction so runs are reproducible end to end."""
    torch.manual_seed(seed)
    if kind == "basic":
        return BaselineMLP(n_classes=cfg.n_classes)
    if kind in ("mult", "mult_cl"):
        return CrossModalTransformer(cfg)
    if kind == "ensemble":
        return CueEnsemble(CrossModalTransformer(cfg), n_classes=cfg.n_classes)
    raise ModelError(f"unknown model kind {kind!r}")
