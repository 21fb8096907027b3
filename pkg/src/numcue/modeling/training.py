"""Training loops: optional contrastive pre-training, SGD with plateau decay."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .data import Batch, TensorData
from .losses import (
    class_weight_tensor,
    classification_loss,
    contrastive_loss,
    sample_weights,
    weighted_sampler,
)
from .metrics import EvalReport, evaluate
from .nets import ENSEMBLE_CUES, CueEnsemble

EVAL_BATCH = 256


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class ContrastiveConfig:
    margin: float = 0.5
    scale: float = 1.0
    pretrain_epochs: int = 10
    conventional: bool = False
    target: str = "fused"  # "fused" | "per_modality"

    def __post_init__(self) -> None:
        if self.pretrain_epochs < 0:
            raise TrainingError("pretrain_epochs must be >= 0")
        if self.target not in ("fused", "per_modality"):
            raise TrainingError(f"unknown contrastive target {self.target!r}")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 8
    learning_rate: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 1e-3
    plateau_factor: float = 0.1
    plateau_patience: int = 5
    class_weighting: str = "none"  # none | inverse | inverse_sqrt
    weighted_sampling: bool = False
    seeds: tuple[int, ...] = (1, 2, 3)
    early_stop_f1: float | None = None
    # fraction of training inputs replaced by fully-padded samples, so a
    # no-evidence input learns to predict the training prior (also covers
    # missing-modality robustness at ablation time)
    blank_input_prob: float = 0.03

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise TrainingError("learning rate must be positive")
        if not 0 < self.plateau_factor < 1:
            raise TrainingError("plateau factor must lie in (0, 1)")
        if self.plateau_patience < 1:
            raise TrainingError("plateau patience must be >= 1")
        if self.epochs < 1 or self.batch_size < 1:
            raise TrainingError("epochs and batch size must be positive")
        if not 0 <= self.blank_input_prob < 1:
            raise TrainingError("blank_input_prob must lie in [0, 1)")


# Named hyperparameter sets; the default trades batch size for desk-scale
# runtimes.
TRAIN_PRESETS = {
    "default": TrainConfig(),
    "epochs40-batch24": TrainConfig(epochs=40, batch_size=24),
    "epochs100-batch1": TrainConfig(epochs=100, batch_size=1),
}


class PlateauScheduler:
    """Multiply the learning rate by `factor` after `patience` stale evals.

    A strictly improving (decreasing) metric never triggers; a constant
    metric triggers every patience+1 evaluations once warm.
    """

    def __init__(self, optimizer, factor: float = 0.1, patience: int = 5):
        self.optimizer = optimizer
        self.factor = factor
        self.patience = patience
        self.best = math.inf
        self.stale = 0

    @property
    def lr(self) -> float:
        return self.optimizer.param_groups[0]["lr"]

    def step(self, value: float) -> float:
        if value < self.best:
            self.best = value
            self.stale = 0
        else:
            self.stale += 1
            if self.stale > self.patience:
                for group in self.optimizer.param_groups:
                    group["lr"] *= self.factor
                self.stale = 0
        return self.lr


@dataclass(frozen=True)
class HistoryEntry:
    epoch: int
    train_loss: float
    dev_loss: float
    lr: float
    dev_f1: float


@dataclass
class TrainResult:
    history: list[HistoryEntry] = field(default_factory=list)
    pretrain_losses: list[float] = field(default_factory=list)

    @property
    def best_dev_f1(self) -> float:
        return max((h.dev_f1 for h in self.history), default=0.0)

    @property
    def final_dev_loss(self) -> float:
        return self.history[-1].dev_loss if self.history else math.nan


def write_history_csv(result: TrainResult, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_loss", "dev_loss", "lr", "dev_f1"])
        for h in result.history:
            writer.writerow(
                [h.epoch, f"{h.train_loss:.8g}", f"{h.dev_loss:.8g}", f"{h.lr:.8g}", f"{h.dev_f1:.8g}"]
            )


def _check_finite(loss: torch.Tensor, what: str) -> None:
    if not torch.isfinite(loss):
        raise TrainingError(f"non-finite loss ({float(loss.detach())}) during {what}")


def _epoch_order(
    data: TensorData, cfg: TrainConfig, rng: np.random.Generator, force_weighted: bool
) -> np.ndarray:
    if cfg.weighted_sampling or force_weighted:
        labels = data.label_values
        counts = {v: int((labels == v).sum()) for v in np.unique(labels)}
        weights = sample_weights(counts)
        return weighted_sampler(
            labels, weights, draws=len(data), seed=int(rng.integers(2**31 - 1))
        )
    return rng.permutation(len(data))


def _blank_rows(batch: Batch, rows: np.ndarray) -> Batch:
    """Replace the given batch rows with fully-padded, zeroed samples."""
    idx = torch.as_tensor(rows, dtype=torch.long)
    for name in ("video", "audio", "text"):
        getattr(batch, name)[idx] = 0.0
        getattr(batch, f"{name}_mask")[idx] = False
    return batch


def predict_scores(model: nn.Module, data: TensorData) -> np.ndarray:
    """Forward a whole split in eval mode; returns [n, n_classes] scores."""
    model.eval()
    outputs = []
    with torch.no_grad():
        for start in range(0, len(data), EVAL_BATCH):
            batch = data.batch.select(np.arange(start, min(start + EVAL_BATCH, len(data))))
            scores, _ = model(batch)
            outputs.append(scores)
    return torch.cat(outputs).numpy()


def evaluate_model(model: nn.Module, data: TensorData) -> EvalReport:
    return evaluate(predict_scores(model, data), data.label_values)


def _dev_loss_and_f1(
    model: nn.Module, dev: TensorData, class_weights: torch.Tensor | None
) -> tuple[float, float]:
    scores = torch.from_numpy(predict_scores(model, dev))
    loss = classification_loss(scores, dev.batch.targets, class_weights)
    report = evaluate(scores.numpy(), dev.label_values)
    return float(loss), report.weighted_f1


def _pretrain_contrastive(
    model: nn.Module,
    train: TensorData,
    cfg: TrainConfig,
    contrastive: ContrastiveConfig,
    rng: np.random.Generator,
) -> list[float]:
    """Contrastive warm-up on fused (or per-modality) representations.

    Pairs come from splitting each weighted-sampling batch in half; batches
    with fewer than two items are skipped.
    """
    optimizer = torch.optim.SGD(
        model.parameters(), lr=cfg.learning_rate, momentum=cfg.momentum, weight_decay=cfg.weight_decay
    )
    losses = []
    labels = torch.from_numpy(train.label_values)
    per_modality = contrastive.target == "per_modality"
    for _ in range(contrastive.pretrain_epochs):
        model.train()
        order = _epoch_order(train, cfg, rng, force_weighted=True)
        epoch_losses = []
        pair_size = max(2, cfg.batch_size)
        for start in range(0, len(order) - 1, pair_size):
            idx = order[start : start + pair_size]
            if len(idx) < 2:
                continue
            half = len(idx) // 2
            batch = train.batch.select(idx)
            lab = labels[idx]
            if per_modality:
                parts = model.fuse_parts(batch)
                loss = sum(
                    contrastive_loss(
                        z[:half], z[half:], lab[:half], lab[half:],
                        margin=contrastive.margin, scale=contrastive.scale,
                        conventional=contrastive.conventional,
                    )
                    for z in parts.values()
                ) / len(parts)
            else:
                fused = model.fuse(batch)
                loss = contrastive_loss(
                    fused[:half], fused[half:], lab[:half], lab[half:],
                    margin=contrastive.margin, scale=contrastive.scale,
                    conventional=contrastive.conventional,
                )
            _check_finite(loss, "contrastive pre-training")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_losses.append(float(loss.detach()))
        losses.append(float(np.mean(epoch_losses)) if epoch_losses else math.nan)
    return losses


def train(
    model: nn.Module,
    train_data: TensorData,
    dev_data: TensorData,
    cfg: TrainConfig = TrainConfig(),
    contrastive: ContrastiveConfig | None = None,
    seed: int = 0,
) -> TrainResult:
    """Deterministic single-seed training run; the model is trained in place."""
    if len(train_data) == 0 or len(dev_data) == 0:
        raise TrainingError("empty train or dev split")
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    result = TrainResult()

    if contrastive is not None and contrastive.pretrain_epochs > 0:
        result.pretrain_losses = _pretrain_contrastive(
            model, train_data, cfg, contrastive, rng
        )

    class_weights = class_weight_tensor(train_data.labels, cfg.class_weighting)
    optimizer = torch.optim.SGD(
        model.parameters(), lr=cfg.learning_rate, momentum=cfg.momentum, weight_decay=cfg.weight_decay
    )
    scheduler = PlateauScheduler(optimizer, cfg.plateau_factor, cfg.plateau_patience)

    for epoch in range(1, cfg.epochs + 1):
        model.train()
        order = _epoch_order(train_data, cfg, rng, force_weighted=False)
        epoch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            batch = train_data.batch.select(idx)
            if cfg.blank_input_prob > 0:
                blank = np.where(rng.random(len(idx)) < cfg.blank_input_prob)[0]
                if len(blank):
                    batch = _blank_rows(batch, blank)
            scores, _ = model(batch)
            loss = classification_loss(scores, batch.targets, class_weights)
            _check_finite(loss, f"epoch {epoch}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_losses.append(float(loss.detach()))

        dev_loss, dev_f1 = _dev_loss_and_f1(model, dev_data, class_weights)
        lr = scheduler.step(dev_loss)
        result.history.append(
            HistoryEntry(
                epoch=epoch,
                train_loss=float(np.mean(epoch_losses)),
                dev_loss=dev_loss,
                lr=lr,
                dev_f1=dev_f1,
            )
        )
        if cfg.early_stop_f1 is not None and dev_f1 >= cfg.early_stop_f1:
            break
    return result


def train_cue_heads(
    ensemble: CueEnsemble,
    train_data: TensorData,
    dev_data: TensorData,
    cfg: TrainConfig = TrainConfig(),
    seed: int = 0,
) -> TrainResult:
    """Ensemble stage 1: backbone + sigmoid heads on ground-truth cue targets.

    The history's dev_f1 column holds the mean per-cue detection accuracy.
    """
    from ..annotation import CUE_NAMES

    cue_idx = torch.tensor([CUE_NAMES.index(c) for c in ENSEMBLE_CUES])
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    params = list(ensemble.backbone.parameters()) + list(ensemble.cue_heads.parameters())
    optimizer = torch.optim.SGD(params, lr=cfg.learning_rate, momentum=cfg.momentum)
    scheduler = PlateauScheduler(optimizer, cfg.plateau_factor, cfg.plateau_patience)
    bce = nn.BCELoss()
    result = TrainResult()

    def dev_metrics() -> tuple[float, float]:
        ensemble.eval()
        losses = []
        hits = []
        with torch.no_grad():
            for start in range(0, len(dev_data), EVAL_BATCH):
                sel = np.arange(start, min(start + EVAL_BATCH, len(dev_data)))
                batch = dev_data.batch.select(sel)
                probs = ensemble.cue_probs(batch)
                target = batch.cues[:, cue_idx]
                losses.append(float(bce(probs, target)) * len(sel))
                hits.append(((probs > 0.5) == (target > 0.5)).float().mean(dim=1).sum())
        return sum(losses) / len(dev_data), float(sum(hits)) / len(dev_data)

    for epoch in range(1, cfg.epochs + 1):
        ensemble.train()
        order = rng.permutation(len(train_data))
        epoch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            batch = train_data.batch.select(idx)
            probs = ensemble.cue_probs(batch)
            loss = bce(probs, batch.cues[:, cue_idx])
            _check_finite(loss, f"cue epoch {epoch}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_losses.append(float(loss.detach()))
        dev_loss, dev_acc = dev_metrics()
        lr = scheduler.step(dev_loss)
        result.history.append(
            HistoryEntry(epoch, float(np.mean(epoch_losses)), dev_loss, lr, dev_acc)
        )
        if cfg.early_stop_f1 is not None and dev_acc >= cfg.early_stop_f1:
            break
    ensemble.stage1_trained = True
    return result


def train_ensemble_classifier(
    ensemble: CueEnsemble,
    train_data: TensorData,
    dev_data: TensorData,
    cfg: TrainConfig = TrainConfig(),
    seed: int = 0,
) -> TrainResult:
    """Ensemble stage 2: MLP from predicted cue probabilities to the label."""
    if not ensemble.stage1_trained:
        raise TrainingError("stage-2 training requires trained cue heads")
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)

    def all_probs(data: TensorData) -> torch.Tensor:
        ensemble.eval()
        chunks = []
        with torch.no_grad():
            for start in range(0, len(data), EVAL_BATCH):
                sel = np.arange(start, min(start + EVAL_BATCH, len(data)))
                chunks.append(ensemble.cue_probs(data.batch.select(sel)))
        return torch.cat(chunks)

    train_probs = all_probs(train_data)
    dev_probs = all_probs(dev_data)
    class_weights = class_weight_tensor(train_data.labels, cfg.class_weighting)
    optimizer = torch.optim.SGD(
        ensemble.classifier.parameters(), lr=cfg.learning_rate, momentum=cfg.momentum, weight_decay=cfg.weight_decay
    )
    scheduler = PlateauScheduler(optimizer, cfg.plateau_factor, cfg.plateau_patience)
    result = TrainResult()
    for epoch in range(1, cfg.epochs + 1):
        ensemble.classifier.train()
        order = _epoch_order(train_data, cfg, rng, force_weighted=False)
        epoch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            idx = torch.as_tensor(order[start : start + cfg.batch_size], dtype=torch.long)
            scores = ensemble.classifier(train_probs[idx])
            loss = classification_loss(scores, train_data.batch.targets[idx], class_weights)
            _check_finite(loss, f"ensemble epoch {epoch}")
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_losses.append(float(loss.detach()))
        ensemble.classifier.eval()
        with torch.no_grad():
            dev_scores = ensemble.classifier(dev_probs)
        dev_loss = float(
            classification_loss(dev_scores, dev_data.batch.targets, class_weights)
        )
        report = evaluate(dev_scores.numpy(), dev_data.label_values)
        lr = scheduler.step(dev_loss)
        result.history.append(
            HistoryEntry(epoch, float(np.mean(epoch_losses)), dev_loss, lr, report.weighted_f1)
        )
        if cfg.early_stop_f1 is not None and report.weighted_f1 >= cfg.early_stop_f1:
            break
    return result
