"""Dot-comparison stimulus generation.

Builds the six canonical number pairs, non-overlapping dot arrays with
controlled cumulative area, and 30-trial Easy-First / Hard-First schedules.
All randomness is driven by explicit seeds; the same seed always yields the
same geometry.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

EASY_FIRST = "EasyFirst"
HARD_FIRST = "HardFirst"
CONDITIONS = (EASY_FIRST, HARD_FIRST)

# Pairs as printed in the study design: (left, right, nominal ratio).
# Two nominal ratios (8:7 -> 1.25, 10:8 -> 1.13) disagree with the
# arithmetic; we keep both values and order trials by the computed ratio.
_CANONICAL = (
    (10, 9, 1.11),
    (8, 7, 1.25),
    (14, 12, 1.17),
    (10, 8, 1.13),
    (9, 6, 1.5),
    (10, 5, 2.0),
)

HARD_RATIO_CUTOFF = 1.17  # computed ratio at or below this is a hard trial

DEFAULT_CANVAS = (800.0, 600.0)
DEFAULT_BASE_RADIUS = 18.0  # canvas units; per-dot area = pi * r^2
DEFAULT_INCONGRUENCY_FACTOR = 0.8
DEFAULT_DISPLAY_MS = 2500
MAX_AREA_FRACTION = 0.20  # dots may fill at most this fraction of the canvas

_PLACEMENT_RESTARTS = 60
_PLACEMENT_TRIES_PER_DOT = 2000
_MIN_GAP = 1e-6  # strict center distance > r_i + r_j


class StimulusError(ValueError):
    """Invalid stimulus request or infeasible dot placement."""


@dataclass(frozen=True)
class NumberPair:
    left_count: int
    right_count: int
    nominal_ratio: float

    @property
    def computed_ratio(self) -> float:
        return max(self.left_count, self.right_count) / min(
            self.left_count, self.right_count
        )

    def __post_init__(self) -> None:
        if self.left_count == self.right_count:
            raise StimulusError("pair counts must differ")
        if self.left_count <= 0 or self.right_count <= 0:
            raise StimulusError("pair counts must be positive")


@dataclass(frozen=True)
class Dot:
    x: float
    y: float
    radius: float


@dataclass(frozen=True)
class DotArray:
    dots: tuple[Dot, ...]
    canvas_width: float
    canvas_height: float

    @property
    def cumulative_area(self) -> float:
        return sum(math.pi * d.radius**2 for d in self.dots)

    @property
    def count(self) -> int:
        return len(self.dots)


@dataclass(frozen=True)
class TrialSpec:
    trial_id: str
    pair: NumberPair
    left_array: DotArray
    right_array: DotArray
    greater_side: str  # "left" | "right"
    area_congruent: bool
    display_ms: int = DEFAULT_DISPLAY_MS
    difficulty_rank: int = 0  # 1..30 position in the canonical Easy-First order

    @property
    def greater_array(self) -> DotArray:
        return self.left_array if self.greater_side == "left" else self.right_array

    @property
    def lesser_array(self) -> DotArray:
        return self.right_array if self.greater_side == "left" else self.left_array


@dataclass(frozen=True)
class Schedule:
    condition: str
    trials: tuple[TrialSpec, ...]
    seed: int


def canonical_pairs() -> list[NumberPair]:
    """The six number pairs of the comparison task, hardest to easiest as printed."""
    return [NumberPair(l, r, nom) for l, r, nom in _CANONICAL]


def _pair_key(pair: NumberPair) -> tuple[int, int]:
    return (max(pair.left_count, pair.right_count), min(pair.left_count, pair.right_count))


_CANONICAL_KEYS = {(max(l, r), min(l, r)) for l, r, _ in _CANONICAL}


def is_canonical(pair: NumberPair) -> bool:
    return _pair_key(pair) in _CANONICAL_KEYS


def hard_easy_class(pair: NumberPair) -> str:
    """Classify a canonical pair as "hard" or "easy" by its computed ratio."""
    if not is_canonical(pair):
        raise StimulusError(f"non-canonical pair {pair.left_count}:{pair.right_count}")
    return "hard" if pair.computed_ratio <= HARD_RATIO_CUTOFF else "easy"


def _rng(*entropy: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(entropy))))


def generate_dot_array(
    count: int,
    target_area: float,
    canvas: tuple[float, float] = DEFAULT_CANVAS,
    seed: int = 0,
) -> DotArray:
    """Place `count` equal-radius, non-overlapping dots summing to `target_area`.

    Placement is rejection sampling with a bounded number of restarts;
    failure to place means the requested density is infeasible.
    """
    if count < 1:
        raise StimulusError(f"count must be positive, got {count}")
    if target_area <= 0:
        raise StimulusError(f"target_area must be positive, got {target_area}")
    width, height = canvas
    if target_area > MAX_AREA_FRACTION * width * height:
        raise StimulusError(
            f"target_area {target_area:.1f} exceeds {MAX_AREA_FRACTION:.0%} "
            f"of the {width:.0f}x{height:.0f} canvas"
        )
    radius = math.sqrt(target_area / (count * math.pi))
    if 2 * radius > min(width, height):
        raise StimulusError("dot radius larger than canvas")

    rng = _rng(seed, count)
    for _ in range(_PLACEMENT_RESTARTS):
        placed: list[tuple[float, float]] = []
        for _ in range(count):
            ok = False
            for _ in range(_PLACEMENT_TRIES_PER_DOT):
                x = rng.uniform(radius, width - radius)
                y = rng.uniform(radius, height - radius)
                if all(
                    math.hypot(x - px, y - py) > 2 * radius + _MIN_GAP
                    for px, py in placed
                ):
                    placed.append((x, y))
                    ok = True
                    break
            if not ok:
                break
        if len(placed) == count:
            dots = tuple(Dot(x, y, radius) for x, y in placed)
            return DotArray(dots=dots, canvas_width=width, canvas_height=height)
    raise StimulusError(
        f"failed to place {count} dots of radius {radius:.1f} "
        f"on a {width:.0f}x{height:.0f} canvas"
    )


def generate_trial(
    pair: NumberPair,
    congruent: bool,
    seed: int,
    base_radius: float = DEFAULT_BASE_RADIUS,
    incongruency_factor: float = DEFAULT_INCONGRUENCY_FACTOR,
    canvas: tuple[float, float] = DEFAULT_CANVAS,
    trial_id: str | None = None,
    difficulty_rank: int = 0,
) -> TrialSpec:
    """Build one trial: two dot arrays with the congruency's area relation.

    Congruent: both sides share one dot radius, so the greater-count side's
    cumulative area exceeds the other's by exactly the count ratio.
    Incongruent: the greater-count side's cumulative area is scaled to
    `incongruency_factor` (< 1) times the smaller-count side's.
    """
    if not is_canonical(pair):
        raise StimulusError(f"non-canonical pair {pair.left_count}:{pair.right_count}")
    if not congruent and not 0 < incongruency_factor < 1:
        raise StimulusError("incongruency_factor must lie in (0, 1)")

    n_more = max(pair.left_count, pair.right_count)
    n_less = min(pair.left_count, pair.right_count)
    dot_area = math.pi * base_radius**2
    lesser_area = n_less * dot_area
    if congruent:
        greater_area = (n_more / n_less) * lesser_area
    else:
        greater_area = incongruency_factor * lesser_area

    rng = _rng(seed, 7)
    greater_side = "left" if rng.integers(0, 2) == 0 else "right"
    greater = generate_dot_array(n_more, greater_area, canvas, seed=seed * 2 + 1)
    lesser = generate_dot_array(n_less, lesser_area, canvas, seed=seed * 2 + 2)
    left, right = (greater, lesser) if greater_side == "left" else (lesser, greater)

    if trial_id is None:
        tag = "c" if congruent else "i"
        trial_id = f"{n_more}v{n_less}-{tag}-s{seed}"
    return TrialSpec(
        trial_id=trial_id,
        pair=pair,
        left_array=left,
        right_array=right,
        greater_side=greater_side,
        area_congruent=congruent,
        difficulty_rank=difficulty_rank,
    )


def _canonical_plan() -> list[tuple[NumberPair, bool, int]]:
    """Easy-First trial plan: (pair, congruent, repetition index) rows.

    Pairs descend by computed ratio; within a pair, congruent repetitions
    precede incongruent ones; congruent counts alternate 3/2 across the six
    pairs so the schedule totals 15 congruent and 15 incongruent trials.
    """
    by_ease = sorted(canonical_pairs(), key=lambda p: p.computed_ratio, reverse=True)
    plan: list[tuple[NumberPair, bool, int]] = []
    for slot, pair in enumerate(by_ease):
        n_congruent = 3 if slot % 2 == 0 else 2
        for rep in range(n_congruent):
            plan.append((pair, True, rep))
        for rep in range(5 - n_congruent):
            plan.append((pair, False, rep))
    return plan


def build_schedule(
    condition: str,
    seed: int,
    base_radius: float = DEFAULT_BASE_RADIUS,
    incongruency_factor: float = DEFAULT_INCONGRUENCY_FACTOR,
    canvas: tuple[float, float] = DEFAULT_CANVAS,
) -> Schedule:
    """Build the 30-trial schedule for one condition.

    Hard-First is the element-wise reverse of the Easy-First schedule built
    from the same seed; difficulty_rank is always the 1-based Easy-First
    position, so rank 1 is the easiest trial regardless of condition.
    """
    if condition not in CONDITIONS:
        raise StimulusError(f"unknown condition {condition!r}; expected one of {CONDITIONS}")
    trials = []
    for rank0, (pair, congruent, rep) in enumerate(_canonical_plan()):
        rank = rank0 + 1
        tag = "c" if congruent else "i"
        n_more = max(pair.left_count, pair.right_count)
        n_less = min(pair.left_count, pair.right_count)
        trial_seed = int(_rng(seed, rank).integers(0, 2**31 - 1))
        trials.append(
            generate_trial(
                pair,
                congruent,
                seed=trial_seed,
                base_radius=base_radius,
                incongruency_factor=incongruency_factor,
                canvas=canvas,
                trial_id=f"s{seed}-r{rank:02d}-{n_more}v{n_less}{tag}{rep}",
                difficulty_rank=rank,
            )
        )
    if condition == HARD_FIRST:
        trials.reverse()
    return Schedule(condition=condition, trials=tuple(trials), seed=seed)


# --- JSON contract -----------------------------------------------------------
# One schedule per UTF-8 JSON file; coordinates are plain decimal numbers in
# canvas units. This file format is what the session service and the task UI
# consume.


def _dot_array_to_json(arr: DotArray) -> dict:
    return {
        "dots": [{"x": d.x, "y": d.y, "radius": d.radius} for d in arr.dots],
        "canvas_width": arr.canvas_width,
        "canvas_height": arr.canvas_height,
        "cumulative_area": arr.cumulative_area,
    }


def _dot_array_from_json(obj: dict) -> DotArray:
    return DotArray(
        dots=tuple(Dot(d["x"], d["y"], d["radius"]) for d in obj["dots"]),
        canvas_width=obj["canvas_width"],
        canvas_height=obj["canvas_height"],
    )


def trial_to_json(trial: TrialSpec) -> dict:
    return {
        "trial_id": trial.trial_id,
        "pair": {
            "left_count": trial.pair.left_count,
            "right_count": trial.pair.right_count,
            "nominal_ratio": trial.pair.nominal_ratio,
            "computed_ratio": trial.pair.computed_ratio,
        },
        "left_array": _dot_array_to_json(trial.left_array),
        "right_array": _dot_array_to_json(trial.right_array),
        "greater_side": trial.greater_side,
        "area_congruent": trial.area_congruent,
        "display_ms": trial.display_ms,
        "difficulty_rank": trial.difficulty_rank,
    }


def trial_from_json(obj: dict) -> TrialSpec:
    pair = obj["pair"]
    return TrialSpec(
        trial_id=obj["trial_id"],
        pair=NumberPair(pair["left_count"], pair["right_count"], pair["nominal_ratio"]),
        left_array=_dot_array_from_json(obj["left_array"]),
        right_array=_dot_array_from_json(obj["right_array"]),
        greater_side=obj["greater_side"],
        area_congruent=obj["area_congruent"],
        display_ms=obj["display_ms"],
        difficulty_rank=obj["difficulty_rank"],
    )


def schedule_to_json(schedule: Schedule) -> dict:
    return {
        "condition": schedule.condition,
        "seed": schedule.seed,
        "trials": [trial_to_json(t) for t in schedule.trials],
    }


def schedule_from_json(obj: dict) -> Schedule:
    return Schedule(
        condition=obj["condition"],
        trials=tuple(trial_from_json(t) for t in obj["trials"]),
        seed=obj["seed"],
    )


def write_schedule(schedule: Schedule, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(schedule_to_json(schedule), indent=2), encoding="utf-8"
    )


def read_schedule(path: str | Path) -> Schedule:
    return schedule_from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def rank_map(schedules: Iterable[Schedule]) -> dict[str, TrialSpec]:
    """trial_id -> TrialSpec across schedules; conflicting ids are rejected."""
    out: dict[str, TrialSpec] = {}
    for sched in schedules:
        for trial in sched.trials:
            prior = out.get(trial.trial_id)
            if prior is not None and prior.difficulty_rank != trial.difficulty_rank:
                raise StimulusError(
                    f"trial_id {trial.trial_id} maps to conflicting difficulty ranks"
                )
            out[trial.trial_id] = trial
    return out
