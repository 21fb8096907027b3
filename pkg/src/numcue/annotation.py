"""Cue annotation data model and CSV ingestion.

One annotation row = one trial watched by one annotator: an uncertainty
label in {0, 0.5, 1}, a correctness flag, an optional transcript, and the
thirteen boolean cue flags of the annotation protocol. Files follow the
two-pass procedure: physical cues are marked on a muted first watch, verbal
cues on the unmuted second watch.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

PHYSICAL_CUES = (
    "delay",
    "eyebrow_raise",
    "eyebrow_scrunch",
    "funny_face",
    "hand_on_face",
    "head_tilt",
    "look_away",
    "look_to_adult",
    "shoulder_movement",
    "smile",
)
VERBAL_CUES = ("filled_pause", "frustrated_noise", "verbal_cues")

# Column order of the protocol table; also the cue column order in CSV files.
CUE_NAMES = (
    "delay",
    "eyebrow_raise",
    "eyebrow_scrunch",
    "filled_pause",
    "frustrated_noise",
    "funny_face",
    "hand_on_face",
    "head_tilt",
    "look_away",
    "look_to_adult",
    "shoulder_movement",
    "smile",
    "verbal_cues",
)

VALID_LABELS = (0.0, 0.5, 1.0)

GENDERS = ("female", "male", "other")

_BASE_COLUMNS = ("trial_id", "participant_id", "annotator_id", "label", "correct", "transcript")
# Auxiliary columns the session-service export appends; tolerated on parse.
_AUX_COLUMNS = ("latency_ms", "timestamp")

AGE_GROUP_CUTOFF_DAYS = 2150  # older than this -> 5-year-old group


class AnnotationError(ValueError):
    """Malformed annotation data; message carries file/line context."""


@dataclass(frozen=True)
class CueSet:
    delay: bool = False
    eyebrow_raise: bool = False
    eyebrow_scrunch: bool = False
    filled_pause: bool = False
    frustrated_noise: bool = False
    funny_face: bool = False
    hand_on_face: bool = False
    head_tilt: bool = False
    look_away: bool = False
    look_to_adult: bool = False
    shoulder_movement: bool = False
    smile: bool = False
    verbal_cues: bool = False

    @classmethod
    def from_names(cls, names: Iterable[str]) -> "CueSet":
        names = list(names)
        unknown = [n for n in names if n not in CUE_NAMES]
        if unknown:
            raise AnnotationError(f"unknown cue name(s): {', '.join(unknown)}")
        return cls(**{n: True for n in names})

    def active(self) -> tuple[str, ...]:
        return tuple(n for n in CUE_NAMES if getattr(self, n))

    def has_verbal(self) -> bool:
        return any(getattr(self, n) for n in VERBAL_CUES)

    def has_physical(self) -> bool:
        return any(getattr(self, n) for n in PHYSICAL_CUES)


@dataclass(frozen=True)
class AnnotationRecord:
    trial_id: str
    participant_id: str
    annotator_id: str
    label: float | None  # 0 / 0.5 / 1; None when the row awaits annotation
    correct: bool
    cue_set: CueSet = field(default_factory=CueSet)
    transcript: str = ""

    def __post_init__(self) -> None:
        if self.label is not None and self.label not in VALID_LABELS:
            raise AnnotationError(
                f"invalid label {self.label!r}; expected one of 0, 0.5, 1"
            )


@dataclass(frozen=True)
class Participant:
    participant_id: str
    age_days: int
    gender: str
    condition: str

    def __post_init__(self) -> None:
        if self.age_days <= 0:
            raise AnnotationError(f"age_days must be positive, got {self.age_days}")
        if self.gender not in GENDERS:
            raise AnnotationError(f"unknown gender {self.gender!r}")

    @property
    def age_group(self) -> str:
        return "4yo" if self.age_days <= AGE_GROUP_CUTOFF_DAYS else "5yo"


def _parse_label(raw: str, where: str) -> float | None:
    raw = raw.strip()
    if raw == "":
        return None
    try:
        value = float(raw)
    except ValueError:
        raise AnnotationError(f"{where}: invalid label {raw!r}") from None
    if value not in VALID_LABELS:
        raise AnnotationError(f"{where}: invalid label {raw!r}; expected 0, 0.5 or 1")
    return value


def _parse_bool(raw: str, where: str, column: str) -> bool:
    raw = raw.strip().lower()
    if raw in ("1", "true"):
        return True
    if raw in ("0", "false", ""):
        return False
    raise AnnotationError(f"{where}: column {column} must be 0/1, got {raw!r}")


def parse_annotation_file(path: str | Path) -> list[AnnotationRecord]:
    """Parse an annotation CSV; empty cue cells mean the cue was not present."""
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        return parse_annotation_rows(fh, source=str(path))


def parse_annotation_rows(fh, source: str = "<stream>") -> list[AnnotationRecord]:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise AnnotationError(f"{source}: empty file") from None

    expected = list(_BASE_COLUMNS) + list(CUE_NAMES)
    known = set(expected) | set(_AUX_COLUMNS)
    unknown = [c for c in header if c not in known]
    if unknown:
        raise AnnotationError(f"{source}: unknown cue column(s): {', '.join(unknown)}")
    missing = [c for c in expected if c not in header]
    if missing:
        raise AnnotationError(f"{source}: missing column(s): {', '.join(missing)}")

    index = {name: header.index(name) for name in header}
    records: list[AnnotationRecord] = []
    seen: set[tuple[str, str, str]] = set()
    for lineno, row in enumerate(reader, start=2):
        where = f"{source}:{lineno}"
        if len(row) != len(header):
            raise AnnotationError(
                f"{where}: expected {len(header)} cells, got {len(row)}"
            )
        cues = {
            name: _parse_bool(row[index[name]], where, name) for name in CUE_NAMES
        }
        record = AnnotationRecord(
            trial_id=row[index["trial_id"]],
            participant_id=row[index["participant_id"]],
            annotator_id=row[index["annotator_id"]],
            label=_parse_label(row[index["label"]], where),
            correct=_parse_bool(row[index["correct"]], where, "correct"),
            cue_set=CueSet(**cues),
            transcript=row[index["transcript"]],
        )
        key = (record.participant_id, record.annotator_id, record.trial_id)
        if key in seen:
            raise AnnotationError(f"{where}: duplicate trial_id {record.trial_id!r}")
        seen.add(key)
        records.append(record)
    return records


def write_annotation_file(records: Iterable[AnnotationRecord], path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        fh.write(annotation_rows_to_csv(records))


def annotation_rows_to_csv(records: Iterable[AnnotationRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(_BASE_COLUMNS) + list(CUE_NAMES))
    for rec in records:
        label = "" if rec.label is None else format(rec.label, "g")
        row = [
            rec.trial_id,
            rec.participant_id,
            rec.annotator_id,
            label,
            "1" if rec.correct else "0",
            rec.transcript,
        ]
        row += ["1" if getattr(rec.cue_set, name) else "" for name in CUE_NAMES]
        writer.writerow(row)
    return buf.getvalue()


def merge_passes(
    visual_pass: AnnotationRecord, audio_pass: AnnotationRecord
) -> AnnotationRecord:
    """Combine the muted (physical-cue) pass with the unmuted (verbal-cue) pass.

    The label comes from the final, unmuted pass.
    """
    if visual_pass.trial_id != audio_pass.trial_id:
        raise AnnotationError(
            f"trial_id mismatch: {visual_pass.trial_id!r} vs {audio_pass.trial_id!r}"
        )
    if visual_pass.annotator_id != audio_pass.annotator_id:
        raise AnnotationError("annotator mismatch between passes")
    if visual_pass.cue_set.has_verbal():
        raise AnnotationError(
            f"trial {visual_pass.trial_id}: verbal cue marked in the muted pass"
        )
    if audio_pass.cue_set.has_physical():
        raise AnnotationError(
            f"trial {audio_pass.trial_id}: physical cue marked in the unmuted pass"
        )
    merged_cues = CueSet(
        **{n: getattr(visual_pass.cue_set, n) for n in PHYSICAL_CUES},
        **{n: getattr(audio_pass.cue_set, n) for n in VERBAL_CUES},
    )
    return replace(
        audio_pass,
        cue_set=merged_cues,
        transcript=audio_pass.transcript or visual_pass.transcript,
    )


def split_passes(record: AnnotationRecord) -> tuple[AnnotationRecord, AnnotationRecord]:
    """Inverse of merge_passes: project a merged record back onto its two passes."""
    visual = replace(
        record,
        cue_set=CueSet(**{n: getattr(record.cue_set, n) for n in PHYSICAL_CUES}),
        transcript="",
    )
    audio = replace(
        record,
        cue_set=CueSet(**{n: getattr(record.cue_set, n) for n in VERBAL_CUES}),
    )
    return visual, audio


def label_distribution(records: Iterable[AnnotationRecord]) -> dict[str, float]:
    """Shares of uncertain / unclear / not_uncertain among labeled records."""
    counts = {1.0: 0, 0.5: 0, 0.0: 0}
    for rec in records:
        if rec.label is not None:
            counts[rec.label] += 1
    total = sum(counts.values())
    if total == 0:
        raise AnnotationError("no labeled records")
    return {
        "uncertain": counts[1.0] / total,
        "unclear": counts[0.5] / total,
        "not_uncertain": counts[0.0] / total,
    }


def parse_participant_file(path: str | Path) -> list[Participant]:
    """Parse the participant metadata CSV: id, age in days, gender, condition."""
    path = Path(path)
    expected = ["participant_id", "age_days", "gender", "condition"]
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise AnnotationError(f"{path}: empty file") from None
        if header != expected:
            raise AnnotationError(f"{path}: expected header {expected}, got {header}")
        out = []
        seen: set[str] = set()
        for lineno, row in enumerate(reader, start=2):
            where = f"{path}:{lineno}"
            if len(row) != 4:
                raise AnnotationError(f"{where}: expected 4 cells, got {len(row)}")
            pid, age_raw, gender, condition = row
            if pid in seen:
                raise AnnotationError(f"{where}: duplicate participant_id {pid!r}")
            seen.add(pid)
            try:
                age = int(age_raw)
            except ValueError:
                raise AnnotationError(f"{where}: age_days must be an integer") from None
            try:
                out.append(Participant(pid, age, gender, condition))
            except AnnotationError as exc:
                raise AnnotationError(f"{where}: {exc}") from None
        return out


def write_participant_file(participants: Iterable[Participant], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["participant_id", "age_days", "gender", "condition"])
        for p in participants:
            writer.writerow([p.participant_id, p.age_days, p.gender, p.condition])
