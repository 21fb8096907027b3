"""Multimodal feature contract and the calibrated synthetic dataset.

Real trials arrive as three per-trial CSV matrices: video frames x 710
columns, audio rows x 71, text tokens x 30 (usually empty). This module
ingests and validates them, pads/truncates to fixed lengths with masks,
z-scores with train-set statistics, and generates a synthetic cue-planted
substitute dataset whose label prior and cue rates are calibrated to the
published distribution of the child study data.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .annotation import CUE_NAMES, VERBAL_CUES, CueSet, Participant
from .stimuli import CONDITIONS

VIDEO_DIM = 710
AUDIO_DIM = 71
TEXT_DIM = 30

MODALITIES = ("video", "audio", "text")

# Published label shares: not uncertain / unclear / uncertain.
DEFAULT_LABEL_PRIOR = (0.809, 0.053, 0.138)
LABEL_VALUES = (0.0, 0.5, 1.0)

# Per-cue (all-trial rate, uncertain-trial rate) from the reference
# frequency table; head_tilt has no published statistics and defaults to 0.
REFERENCE_CUE_RATES: dict[str, tuple[float, float]] = {
    "delay": (0.03, 0.17),
    "eyebrow_raise": (0.05, 0.17),
    "eyebrow_scrunch": (0.06, 0.22),
    "filled_pause": (0.03, 0.06),
    "frustrated_noise": (0.01, 0.02),
    "funny_face": (0.02, 0.07),
    "hand_on_face": (0.17, 0.19),
    "head_tilt": (0.0, 0.0),
    "look_away": (0.03, 0.05),
    "look_to_adult": (0.04, 0.10),
    "shoulder_movement": (0.01, 0.02),
    "smile": (0.12, 0.17),
    "verbal_cues": (0.01, 0.02),
}

# Each cue marks one disjoint channel block in one modality.
DEFAULT_CUE_CHANNELS: dict[str, tuple[str, int, int]] = {
    "delay": ("video", 0, 16),
    "eyebrow_raise": ("video", 16, 32),
    "eyebrow_scrunch": ("video", 32, 48),
    "funny_face": ("video", 48, 64),
    "hand_on_face": ("video", 64, 80),
    "head_tilt": ("video", 80, 96),
    "look_away": ("video", 96, 112),
    "look_to_adult": ("video", 112, 128),
    "shoulder_movement": ("video", 128, 144),
    "smile": ("video", 144, 160),
    "filled_pause": ("audio", 0, 10),
    "frustrated_noise": ("audio", 10, 20),
    "verbal_cues": ("text", 0, 8),
}
# Verbal cues leave an additional token-embedding offset in these text blocks.
TEXT_OFFSET_CHANNELS: dict[str, tuple[int, int]] = {
    "filled_pause": (8, 16),
    "frustrated_noise": (16, 24),
    "verbal_cues": (0, 8),
}

_MODALITY_DIMS = {"video": VIDEO_DIM, "audio": AUDIO_DIM, "text": TEXT_DIM}

STD_FLOOR = 1e-6


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureBundle:
    trial_id: str
    video: np.ndarray  # [T_v, 710]
    audio: np.ndarray  # [T_a, 71]
    text: np.ndarray  # [T_t, 30]; T_t == 0 for the common no-speech trial

    def __post_init__(self) -> None:
        for name, dim in _MODALITY_DIMS.items():
            mat = getattr(self, name)
            if mat.ndim != 2 or mat.shape[1] != dim:
                raise FeatureError(
                    f"{self.trial_id}: {name} must have {dim} columns, "
                    f"got shape {mat.shape}"
                )
            if mat.size and not np.isfinite(mat).all():
                raise FeatureError(f"{self.trial_id}: non-finite value in {name}")
        if self.video.shape[0] == 0 or self.audio.shape[0] == 0:
            raise FeatureError(f"{self.trial_id}: video and audio must be non-empty")


@dataclass(frozen=True)
class AlignConfig:
    # 8 s trials: 240 frames at 30 fps, one audio row per second, few tokens
    video_len: int = 240
    audio_len: int = 8
    text_len: int = 8

    def __post_init__(self) -> None:
        if min(self.video_len, self.audio_len, self.text_len) < 1:
            raise FeatureError("aligned lengths must be positive")


@dataclass(frozen=True)
class AlignedSample:
    trial_id: str
    video: np.ndarray
    audio: np.ndarray
    text: np.ndarray
    video_mask: np.ndarray  # bool, True on real rows
    audio_mask: np.ndarray
    text_mask: np.ndarray
    label: float | None = None
    cue_set: CueSet = field(default_factory=CueSet)
    participant_id: str | None = None


def align(
    bundle: FeatureBundle,
    lengths: AlignConfig = AlignConfig(),
    pad_value: float = 0.0,
    label: float | None = None,
    cue_set: CueSet | None = None,
    participant_id: str | None = None,
) -> AlignedSample:
    """Truncate from the end or pad at the end to the fixed lengths."""

    def fit(mat: np.ndarray, length: int) -> tuple[np.ndarray, np.ndarray]:
        t = mat.shape[0]
        mask = np.zeros(length, dtype=bool)
        out = np.full((length, mat.shape[1]), pad_value, dtype=np.float32)
        keep = min(t, length)
        out[:keep] = mat[:keep]
        mask[:keep] = True
        return out, mask

    video, video_mask = fit(bundle.video, lengths.video_len)
    audio, audio_mask = fit(bundle.audio, lengths.audio_len)
    text, text_mask = fit(bundle.text, lengths.text_len)
    return AlignedSample(
        trial_id=bundle.trial_id,
        video=video,
        audio=audio,
        text=text,
        video_mask=video_mask,
        audio_mask=audio_mask,
        text_mask=text_mask,
        label=label,
        cue_set=cue_set if cue_set is not None else CueSet(),
        participant_id=participant_id,
    )


# --- CSV contract ------------------------------------------------------------


def _read_matrix(path: Path, dim: int, what: str) -> np.ndarray:
    rows: list[list[float]] = []
    with path.open("r", encoding="utf-8", newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if len(row) != dim:
                raise FeatureError(
                    f"{path}:{lineno}: expected {dim} columns for {what}, got {len(row)}"
                )
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                raise FeatureError(f"{path}:{lineno}: non-numeric cell") from None
    return np.asarray(rows, dtype=np.float32).reshape(len(rows), dim)


def load_feature_bundle(
    video_path: str | Path,
    audio_path: str | Path,
    text_path: str | Path | None = None,
    trial_id: str | None = None,
) -> FeatureBundle:
    """Load one trial's feature matrices; a missing text file means no speech."""
    video_path = Path(video_path)
    audio_path = Path(audio_path)
    if not video_path.exists():
        raise FeatureError(f"missing video feature file {video_path}")
    if not audio_path.exists():
        raise FeatureError(f"missing audio feature file {audio_path}")
    if trial_id is None:
        trial_id = video_path.name.split(".")[0]
    video = _read_matrix(video_path, VIDEO_DIM, "video")
    audio = _read_matrix(audio_path, AUDIO_DIM, "audio")
    if text_path is not None and Path(text_path).exists():
        text = _read_matrix(Path(text_path), TEXT_DIM, "text")
    else:
        text = np.zeros((0, TEXT_DIM), dtype=np.float32)
    return FeatureBundle(trial_id=trial_id, video=video, audio=audio, text=text)


def write_feature_bundle(bundle: FeatureBundle, out_dir: str | Path) -> dict[str, Path]:
    """Write {trial_id}.{modality}.csv files; empty text emits no file."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    for name in MODALITIES:
        mat = getattr(bundle, name)
        if name == "text" and mat.shape[0] == 0:
            continue
        path = out / f"{bundle.trial_id}.{name}.csv"
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            for row in mat:
                writer.writerow([format(float(v), ".9g") for v in row])
        paths[name] = path
    return paths


# --- Normalization -----------------------------------------------------------


@dataclass(frozen=True)
class Normalizer:
    mean: dict[str, np.ndarray]
    std: dict[str, np.ndarray]


def fit_normalizer(samples: Iterable[AlignedSample]) -> Normalizer:
    """Per-channel mean/std from real (unpadded) rows of the training set."""
    samples = list(samples)
    if len(samples) < 2:
        raise FeatureError("need at least 2 training samples to fit a normalizer")
    mean: dict[str, np.ndarray] = {}
    std: dict[str, np.ndarray] = {}
    for name in MODALITIES:
        stacked = [
            getattr(s, name)[getattr(s, f"{name}_mask")]
            for s in samples
            if getattr(s, f"{name}_mask").any()
        ]
        if stacked:
            rows = np.concatenate(stacked, axis=0).astype(np.float64)
            mean[name] = rows.mean(axis=0)
            std[name] = np.maximum(rows.std(axis=0), STD_FLOOR)
        else:
            dim = _MODALITY_DIMS[name]
            mean[name] = np.zeros(dim)
            std[name] = np.full(dim, 1.0)
    return Normalizer(mean=mean, std=std)


def apply_normalizer(norm: Normalizer, sample: AlignedSample) -> AlignedSample:
    """Z-score real rows with train statistics; padded rows stay zero."""
    updates = {}
    for name in MODALITIES:
        mat = getattr(sample, name).astype(np.float32).copy()
        mask = getattr(sample, f"{name}_mask")
        scaled = (mat[mask] - norm.mean[name]) / norm.std[name]
        # constant channels z-score to ~0 rather than exploding via the floor
        scaled[:, norm.std[name] <= STD_FLOOR] = 0.0
        mat[mask] = scaled.astype(np.float32)
        mat[~mask] = 0.0
        updates[name] = mat
    return replace(sample, **updates)


# --- Calibrated synthetic generation ------------------------------------------


def derive_cue_rates(
    rates: dict[str, tuple[float, float]] = REFERENCE_CUE_RATES,
    uncertain_prior: float = DEFAULT_LABEL_PRIOR[2],
    tolerance: float = 1e-6,
) -> dict[str, dict[float, float]]:
    """Solve per-cue conditional activation rates from (all, uncertain) rates.

    Treats non-uncertain trials as one complement class:
        all = prior * P(cue | uncertain) + (1 - prior) * P(cue | not)
    The unclear class activates at the midpoint of the two conditionals.
    Rates that force a clamp beyond `tolerance` are clamped with a warning.
    """
    out: dict[str, dict[float, float]] = {}
    for cue, (all_rate, uncertain_rate) in rates.items():
        p_not = (all_rate - uncertain_prior * uncertain_rate) / (1.0 - uncertain_prior)
        if p_not < -tolerance or p_not > 1.0 + tolerance:
            warnings.warn(
                f"cue {cue}: inconsistent rates (all={all_rate}, "
                f"uncertain={uncertain_rate}) give P(cue|not)={p_not:.4f}; clamping",
                stacklevel=2,
            )
        p_not = min(max(p_not, 0.0), 1.0)
        out[cue] = {
            1.0: uncertain_rate,
            0.0: p_not,
            0.5: (uncertain_rate + p_not) / 2.0,
        }
    return out


@dataclass(frozen=True)
class SynthConfig:
    trials: int = 1000
    label_prior: tuple[float, float, float] = DEFAULT_LABEL_PRIOR  # not/unclear/uncertain
    cue_rates: dict[str, dict[float, float]] | None = None  # None -> derived defaults
    cue_channels: dict[str, tuple[str, int, int]] = field(
        default_factory=lambda: dict(DEFAULT_CUE_CHANNELS)
    )
    amplitude: float = 1.0
    noise_sigma: float = 0.25
    speech_prob: float = 0.1
    seed: int = 0
    # synthetic trials use a coarser frame grid than real 30 fps recordings
    video_len: int = 24
    audio_len: int = 8
    text_len: int = 8
    trials_per_participant: int = 30

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise FeatureError("trials must be positive")
        if abs(sum(self.label_prior) - 1.0) > 1e-9:
            raise FeatureError(f"label prior must sum to 1, got {self.label_prior}")
        if self.noise_sigma <= 0:
            raise FeatureError("noise sigma must be positive")
        if not 0 <= self.speech_prob <= 1:
            raise FeatureError("speech probability must lie in [0, 1]")
        lengths = {"video": self.video_len, "audio": self.audio_len, "text": self.text_len}
        for cue, (modality, start, stop) in self.cue_channels.items():
            if cue not in CUE_NAMES:
                raise FeatureError(f"unknown cue {cue!r} in channel map")
            if modality not in _MODALITY_DIMS:
                raise FeatureError(f"cue {cue}: unknown modality {modality!r}")
            if not 0 <= start < stop <= _MODALITY_DIMS[modality]:
                raise FeatureError(
                    f"cue {cue}: block [{start}, {stop}) outside {modality} "
                    f"bounds 0..{_MODALITY_DIMS[modality]}"
                )
        if min(lengths.values()) < 1:
            raise FeatureError("sequence lengths must be positive")

    def resolved_cue_rates(self) -> dict[str, dict[float, float]]:
        if self.cue_rates is not None:
            return self.cue_rates
        return derive_cue_rates(uncertain_prior=self.label_prior[2])


@dataclass(frozen=True)
class SyntheticDataset:
    samples: list[AlignedSample]
    participants: list[Participant]
    config: SynthConfig


def _trial_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))


def _window(rng: np.random.Generator, length: int, shift: int) -> tuple[int, int]:
    """Cue window [onset, end of trial); the onset is random and `shift`-delayed.

    Cues persist once they appear: the child holds the expression or posture
    until responding, so every active cue is still visible in the final rows.
    """
    start = int(rng.integers(0, max(1, int(length * 0.7))))
    start = min(start + shift, length - 1)
    return start, length


def iter_synthetic_trials(config: SynthConfig) -> Iterator[AlignedSample]:
    """Yield cue-planted trials one at a time; trial i depends only on (seed, i)."""
    rates = config.resolved_cue_rates()
    lengths = {"video": config.video_len, "audio": config.audio_len, "text": config.text_len}
    prior = np.asarray(config.label_prior, dtype=np.float64)

    for index in range(config.trials):
        rng = _trial_rng(config.seed, index)
        label = float(LABEL_VALUES[rng.choice(3, p=prior)])
        active = {
            cue: bool(rng.random() < rates.get(cue, {}).get(label, 0.0))
            for cue in CUE_NAMES
        }
        cue_set = CueSet(**active)

        # a decision delay pushes every cue's onset later into the trial
        latency = (
            rng.uniform(0.1, 0.3) if active["delay"] else 0.0
        )

        video = rng.normal(0.0, config.noise_sigma, (config.video_len, VIDEO_DIM))
        audio = rng.normal(0.0, config.noise_sigma, (config.audio_len, AUDIO_DIM))

        n_tokens = 0
        if any(active[c] for c in VERBAL_CUES) or rng.random() < config.speech_prob:
            n_tokens = int(rng.integers(1, min(5, config.text_len) + 1))
        text = np.zeros((config.text_len, TEXT_DIM), dtype=np.float64)
        if n_tokens:
            text[:n_tokens] = rng.normal(0.0, config.noise_sigma, (n_tokens, TEXT_DIM))

        for cue in CUE_NAMES:
            if not active[cue]:
                continue
            modality, c0, c1 = config.cue_channels[cue]
            length = lengths[modality]
            shift = int(round(latency * length))
            if modality == "text":
                if n_tokens:
                    text[:n_tokens, c0:c1] += config.amplitude
                continue
            r0, r1 = _window(rng, length, shift)
            if modality == "video":
                video[r0:r1, c0:c1] += config.amplitude
            else:
                audio[r0:r1, c0:c1] += config.amplitude
        for cue, (c0, c1) in TEXT_OFFSET_CHANNELS.items():
            if active[cue] and n_tokens and cue != "verbal_cues":
                text[:n_tokens, c0:c1] += config.amplitude

        text_mask = np.zeros(config.text_len, dtype=bool)
        text_mask[:n_tokens] = True
        pid_index = index // config.trials_per_participant
        yield AlignedSample(
            trial_id=f"synth-{config.seed}-{index:06d}",
            video=video.astype(np.float32),
            audio=audio.astype(np.float32),
            text=text.astype(np.float32),
            video_mask=np.ones(config.video_len, dtype=bool),
            audio_mask=np.ones(config.audio_len, dtype=bool),
            text_mask=text_mask,
            label=label,
            cue_set=cue_set,
            participant_id=f"synth-p{pid_index:05d}",
        )


def synthetic_participants(config: SynthConfig) -> list[Participant]:
    """Deterministic participant table matching iter_synthetic_trials ids."""
    n = math.ceil(config.trials / config.trials_per_participant)
    out = []
    for i in range(n):
        rng = _trial_rng(config.seed, 10**9 + i)
        out.append(
            Participant(
                participant_id=f"synth-p{i:05d}",
                age_days=int(rng.integers(1500, 2350)),
                gender="female" if rng.random() < 0.5 else "male",
                condition=CONDITIONS[int(rng.integers(0, 2))],
            )
        )
    return out


def generate_synthetic_dataset(config: SynthConfig) -> SyntheticDataset:
    return SyntheticDataset(
        samples=list(iter_synthetic_trials(config)),
        participants=synthetic_participants(config),
        config=config,
    )


# Observed share of correct trials; independent of the uncertainty label.
DEFAULT_CORRECT_RATE = 0.793


def synthetic_annotation_records(config: SynthConfig):
    """Ground-truth labels/cues as annotation records tied to real schedules.

    Participants share one schedule per condition (trial ids only need to be
    unique within a participant); trial k of a participant maps onto schedule
    position k, so the records flow through the same analysis path as human
    annotations. Labels and cues replay the exact draws of
    iter_synthetic_trials, and features are never materialized, which keeps
    10k-trial calibration runs cheap.
    """
    from .annotation import AnnotationRecord
    from .stimuli import build_schedule

    if config.trials_per_participant > 30:
        raise FeatureError(
            "annotation export requires trials_per_participant <= the 30-trial schedule"
        )
    participants = synthetic_participants(config)
    schedules = {
        condition: build_schedule(condition, seed=config.seed + offset)
        for offset, condition in enumerate(CONDITIONS)
    }
    rates = config.resolved_cue_rates()
    prior = np.asarray(config.label_prior, dtype=np.float64)
    records = []
    for index in range(config.trials):
        rng = _trial_rng(config.seed, index)
        label = float(LABEL_VALUES[rng.choice(3, p=prior)])
        active = [
            cue
            for cue in CUE_NAMES
            if rng.random() < rates.get(cue, {}).get(label, 0.0)
        ]
        person = participants[index // config.trials_per_participant]
        slot = index % config.trials_per_participant
        correct_rng = _trial_rng(config.seed, 2_000_000_000 + index)
        records.append(
            AnnotationRecord(
                trial_id=schedules[person.condition].trials[slot].trial_id,
                participant_id=person.participant_id,
                annotator_id="synth",
                label=label,
                correct=bool(correct_rng.random() < DEFAULT_CORRECT_RATE),
                cue_set=CueSet.from_names(active),
            )
        )
    return records, participants, list(schedules.values())


# --- Dataset manifest ----------------------------------------------------------


def write_dataset(dataset: SyntheticDataset, out_dir: str | Path) -> Path:
    """Write per-trial feature CSVs plus a manifest JSON; returns manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for sample in dataset.samples:
        bundle = FeatureBundle(
            trial_id=sample.trial_id,
            video=sample.video[sample.video_mask],
            audio=sample.audio[sample.audio_mask],
            text=sample.text[sample.text_mask],
        )
        paths = write_feature_bundle(bundle, out)
        entries.append(
            {
                "trial_id": sample.trial_id,
                "participant_id": sample.participant_id,
                "label": sample.label,
                "cues": list(sample.cue_set.active()),
                "video": paths["video"].name,
                "audio": paths["audio"].name,
                "text": paths["text"].name if "text" in paths else None,
            }
        )
    manifest = {
        "trials": entries,
        "participants": [
            {
                "participant_id": p.participant_id,
                "age_days": p.age_days,
                "gender": p.gender,
                "condition": p.condition,
            }
            for p in dataset.participants
        ],
        "lengths": {
            "video_len": dataset.config.video_len,
            "audio_len": dataset.config.audio_len,
            "text_len": dataset.config.text_len,
        },
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return path


def load_dataset(manifest_path: str | Path) -> tuple[list[AlignedSample], list[Participant]]:
    """Load a manifest-described dataset back into aligned samples."""
    manifest_path = Path(manifest_path)
    obj = json.loads(manifest_path.read_text(encoding="utf-8"))
    base = manifest_path.parent
    lengths = AlignConfig(
        video_len=obj["lengths"]["video_len"],
        audio_len=obj["lengths"]["audio_len"],
        text_len=obj["lengths"]["text_len"],
    )
    samples = []
    for entry in obj["trials"]:
        bundle = load_feature_bundle(
            base / entry["video"],
            base / entry["audio"],
            base / entry["text"] if entry["text"] else None,
            trial_id=entry["trial_id"],
        )
        samples.append(
            align(
                bundle,
                lengths,
                label=entry["label"],
                cue_set=CueSet.from_names(entry["cues"]),
                participant_id=entry["participant_id"],
            )
        )
    participants = [
        Participant(p["participant_id"], p["age_days"], p["gender"], p["condition"])
        for p in obj["participants"]
    ]
    return samples, participants
