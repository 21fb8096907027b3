"""Tensor packing, stratified splitting, and modality ablation."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import torch

from ..annotation import CUE_NAMES
from ..features import AlignedSample

CLASS_VALUES = (0.0, 0.5, 1.0)  # class index 0/1/2 -> label value


class DataError(ValueError):
    pass


def label_to_class(label: float) -> int:
    try:
        return CLASS_VALUES.index(label)
    except ValueError:
        raise DataError(f"label {label!r} is not one of {CLASS_VALUES}") from None


@dataclass
class Batch:
    video: torch.Tensor  # [B, L_v, 710]
    audio: torch.Tensor
    text: torch.Tensor
    video_mask: torch.Tensor  # [B, L_v] bool
    audio_mask: torch.Tensor
    text_mask: torch.Tensor
    targets: torch.Tensor  # [B] int64 class indices
    cues: torch.Tensor  # [B, 13] float

    def __len__(self) -> int:
        return self.video.shape[0]

    def select(self, indices) -> "Batch":
        idx = torch.as_tensor(np.asarray(indices), dtype=torch.long)
        return Batch(*(getattr(self, f.name)[idx] for f in self.__dataclass_fields__.values()))

    def to_double(self) -> "Batch":
        out = {}
        for name in ("video", "audio", "text"):
            out[name] = getattr(self, name).double()
        for name in ("video_mask", "audio_mask", "text_mask", "targets", "cues"):
            out[name] = getattr(self, name)
        out["cues"] = out["cues"].double()
        return Batch(**out)


@dataclass
class TensorData:
    """A whole split packed as tensors, plus per-sample identifiers."""

    batch: Batch
    trial_ids: list[str]
    participant_ids: list[str | None]

    def __len__(self) -> int:
        return len(self.batch)

    @property
    def labels(self) -> np.ndarray:
        return self.batch.targets.numpy()

    @property
    def label_values(self) -> np.ndarray:
        return np.asarray(CLASS_VALUES)[self.labels]


def pack(samples: list[AlignedSample]) -> TensorData:
    if not samples:
        raise DataError("empty sample list")
    def stack(attr, dtype):
        return torch.from_numpy(
            np.stack([getattr(s, attr) for s in samples]).astype(dtype)
        )

    cues = np.array(
        [[float(getattr(s.cue_set, c)) for c in CUE_NAMES] for s in samples],
        dtype=np.float32,
    )
    targets = torch.tensor([label_to_class(s.label) for s in samples], dtype=torch.long)
    batch = Batch(
        video=stack("video", np.float32),
        audio=stack("audio", np.float32),
        text=stack("text", np.float32),
        video_mask=stack("video_mask", bool),
        audio_mask=stack("audio_mask", bool),
        text_mask=stack("text_mask", bool),
        targets=targets,
        cues=torch.from_numpy(cues),
    )
    return TensorData(
        batch=batch,
        trial_ids=[s.trial_id for s in samples],
        participant_ids=[s.participant_id for s in samples],
    )


def _largest_remainder(total: int, fractions: tuple[float, ...]) -> list[int]:
    raw = [total * f for f in fractions]
    base = [math.floor(x) for x in raw]
    leftover = total - sum(base)
    order = sorted(range(len(raw)), key=lambda k: raw[k] - base[k], reverse=True)
    for k in order[:leftover]:
        base[k] += 1
    return base


def split_dataset(
    samples: list[AlignedSample],
    fractions: tuple[float, float, float] = (0.75, 0.10, 0.15),
    seed: int = 0,
    stratify_by_label: bool = True,
) -> tuple[list[AlignedSample], list[AlignedSample], list[AlignedSample]]:
    """Disjoint, exhaustive train/dev/test split, stratified by label.

    Split sizes follow the fractions exactly (largest remainder); per class
    the allocation stays within one sample of proportional.
    """
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise DataError(f"fractions must sum to 1, got {fractions}")
    n = len(samples)
    if n < len(fractions):
        raise DataError(f"cannot split {n} samples three ways")
    targets = _largest_remainder(n, fractions)
    rng = np.random.default_rng(seed)

    if not stratify_by_label:
        order = rng.permutation(n)
        bounds = np.cumsum([0] + targets)
        return tuple(
            [samples[i] for i in order[bounds[k] : bounds[k + 1]]] for k in range(3)
        )

    groups: dict[float, list[int]] = {}
    for i, s in enumerate(samples):
        if s.label is None:
            raise DataError(f"sample {s.trial_id} has no label; cannot stratify")
        groups.setdefault(s.label, []).append(i)
    for label, idx in groups.items():
        if len(idx) < len(fractions):
            raise DataError(
                f"class {label} has only {len(idx)} samples; need at least "
                f"{len(fractions)} to stratify"
            )

    capacity = list(targets)
    alloc: dict[float, list[int]] = {}
    fracs: list[tuple[float, float, int]] = []
    for label in sorted(groups):
        quota = [len(groups[label]) * f for f in fractions]
        base = [math.floor(q) for q in quota]
        alloc[label] = base
        for k in range(3):
            capacity[k] -= base[k]
            fracs.append((quota[k] - base[k], label, k))
    # hand out per-class leftovers to the splits with the largest fractional
    # claim that still have room; a final sweep covers capacity collisions
    leftovers = {label: len(groups[label]) - sum(alloc[label]) for label in groups}
    for frac, label, k in sorted(fracs, key=lambda t: (-t[0], t[1], t[2])):
        if leftovers[label] > 0 and capacity[k] > 0:
            alloc[label][k] += 1
            leftovers[label] -= 1
            capacity[k] -= 1
    for label in sorted(groups):
        for k in range(3):
            while leftovers[label] > 0 and capacity[k] > 0:
                alloc[label][k] += 1
                leftovers[label] -= 1
                capacity[k] -= 1

    out: tuple[list[AlignedSample], ...] = ([], [], [])
    for label in sorted(groups):
        idx = np.array(groups[label])
        rng.shuffle(idx)
        start = 0
        for k in range(3):
            take = alloc[label][k]
            out[k].extend(samples[i] for i in idx[start : start + take])
            start += take
    return out


def ablate_modality(samples: list[AlignedSample], modality: str) -> list[AlignedSample]:
    """Replace one modality with all-padding (zero data, all-false mask)."""
    if modality not in ("video", "audio", "text"):
        raise DataError(f"unknown modality {modality!r}")
    out = []
    for s in samples:
        data = np.zeros_like(getattr(s, modality))
        mask = np.zeros_like(getattr(s, f"{modality}_mask"))
        out.append(replace(s, **{modality: data, f"{modality}_mask": mask}))
    return out
