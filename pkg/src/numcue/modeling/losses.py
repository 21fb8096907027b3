"""Training losses and class-imbalance sampling.

The contrastive loss is implemented literally as printed in its source:
a squared hinge max(0, margin - cosine)^2 applied to every pair, with
same-label pairs upweighted by exp(scale). A `conventional` flag switches
to the textbook form (pull positives toward similarity 1, hinge negatives
above the margin) for comparison runs.
"""

from __future__ import annotations

import math

import numpy as np
import torch
import torch.nn.functional as F

NORM_FLOOR = 1e-8


class LossError(ValueError):
    pass


def contrastive_loss(
    z1: torch.Tensor,
    z2: torch.Tensor,
    labels1: torch.Tensor,
    labels2: torch.Tensor,
    margin: float = 0.5,
    scale: float = 1.0,
    conventional: bool = False,
) -> torch.Tensor:
    """Pairwise cosine contrastive loss between two embedding batches."""
    if z1.ndim != 2 or z2.ndim != 2 or z1.shape[1] != z2.shape[1]:
        raise LossError(f"embedding shape mismatch: {tuple(z1.shape)} vs {tuple(z2.shape)}")
    if len(labels1) != len(z1) or len(labels2) != len(z2):
        raise LossError("labels must match embedding rows")
    n1 = torch.linalg.vector_norm(z1, dim=1)
    n2 = torch.linalg.vector_norm(z2, dim=1)
    if float(n1.detach().min()) < NORM_FLOOR or float(n2.detach().min()) < NORM_FLOOR:
        raise LossError("zero-norm embedding")
    sim = (z1 / n1[:, None]) @ (z2 / n2[:, None]).T
    same = labels1[:, None] == labels2[None, :]
    weights = torch.where(
        same, torch.full_like(sim, math.exp(scale)), torch.ones_like(sim)
    )
    if conventional:
        pos = (1.0 - sim) ** 2
        neg = torch.clamp(sim - margin, min=0.0) ** 2
        terms = torch.where(same, pos, neg)
    else:
        terms = torch.clamp(margin - sim, min=0.0) ** 2
    return (weights * terms).sum() / (z1.shape[0] * z2.shape[0])


def sample_weights(class_counts: dict[float, int]) -> dict[float, float]:
    """Inverse-square-root class weights: w = 1 / sqrt(count)."""
    out = {}
    for label, count in class_counts.items():
        if count < 1:
            raise LossError(f"class {label} has no samples; weight undefined")
        out[label] = 1.0 / math.sqrt(count)
    return out


def weighted_sampler(
    labels: list[float] | np.ndarray,
    weights: dict[float, float],
    draws: int,
    seed: int = 0,
) -> np.ndarray:
    """Draw indices with replacement, P(i) proportional to the label's weight."""
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise LossError("empty dataset")
    if draws < 1:
        raise LossError("draws must be positive")
    p = np.array([weights[float(lab)] for lab in labels], dtype=np.float64)
    p /= p.sum()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed])))
    return rng.choice(len(labels), size=draws, replace=True, p=p)


def class_weight_tensor(
    labels: np.ndarray, mode: str, n_classes: int = 3
) -> torch.Tensor | None:
    """Cross-entropy class weights from the train-label distribution.

    "inverse" follows 1/count, "inverse_sqrt" 1/sqrt(count); both normalized
    to mean 1 so the loss scale is comparable across modes.
    """
    if mode == "none":
        return None
    counts = np.bincount(labels.astype(np.int64), minlength=n_classes).astype(np.float64)
    if (counts == 0).any():
        raise LossError("cannot weight classes with zero train samples")
    if mode == "inverse":
        w = 1.0 / counts
    elif mode == "inverse_sqrt":
        w = 1.0 / np.sqrt(counts)
    else:
        raise LossError(f"unknown class weighting mode {mode!r}")
    w *= n_classes / w.sum()
    return torch.tensor(w, dtype=torch.float32)


def classification_loss(
    scores: torch.Tensor,
    targets: torch.Tensor,
    class_weights: torch.Tensor | None = None,
) -> torch.Tensor:
    return F.cross_entropy(scores, targets, weight=class_weights)
