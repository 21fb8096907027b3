"""Single-file model checkpoints: JSON header + torch payload, versioned."""

from __future__ import annotations

import io
import json
import struct
from dataclasses import asdict
from pathlib import Path

import torch
from torch import nn

from ..features import Normalizer
from .nets import MulTConfig, build_model

MAGIC = b"NCKP"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(
    path: str | Path,
    kind: str,
    model: nn.Module,
    model_config: MulTConfig,
    normalizer: Normalizer | None = None,
    extra: dict | None = None,
) -> None:
    header = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "model_config": asdict(model_config),
        "extra": extra or {},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = {
        "state_dict": model.state_dict(),
        "normalizer": None
        if normalizer is None
        else {"mean": normalizer.mean, "std": normalizer.std},
    }
    buf = io.BytesIO()
    torch.save(payload, buf)
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack(">HI", FORMAT_VERSION, len(header_bytes)))
        fh.write(header_bytes)
        fh.write(buf.getvalue())


def load_checkpoint(path: str | Path) -> tuple[nn.Module, Normalizer | None, dict]:
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise CheckpointError(f"{path}: not a model checkpoint (bad magic)")
        version, header_len = struct.unpack(">HI", fh.read(6))
        if version != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        header = json.loads(fh.read(header_len).decode("utf-8"))
        payload = torch.load(fh, weights_only=False)
    cfg = MulTConfig(**header["model_config"])
    model = build_model(header["kind"], cfg, seed=0)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    if header["kind"] == "ensemble":
        model.stage1_trained = True
    normalizer = None
    if payload["normalizer"] is not None:
        normalizer = Normalizer(
            mean=payload["normalizer"]["mean"], std=payload["normalizer"]["std"]
        )
    return model, normalizer, header
