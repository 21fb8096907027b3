"""Descriptive statistics over annotated trials.

Correlation of uncertainty with difficulty rank and correctness, cue
frequency tables across trial subsets and demographics, and a plot-ready
report bundle. Significance comes from seeded permutation tests, so every
number here is reproducible bit for bit.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .annotation import CUE_NAMES, AnnotationRecord, Participant
from .stimuli import Schedule, hard_easy_class

DEFAULT_PERMUTATIONS = 10_000

# Cue present in the protocol but absent from the published frequency table.
CUES_WITHOUT_REFERENCE_STATS = ("head_tilt",)

SUBSETS = ("all", "uncertain", "hard", "easy", "female", "male")


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    n: int
    p_value: float

    @property
    def df(self) -> int:
        return self.n - 2


@dataclass(frozen=True)
class CueFrequencyTable:
    """rates[subset][cue] = fraction of the subset's trials showing the cue."""

    rates: dict[str, dict[str, float]]
    counts: dict[str, int]


def pearson(
    x: Sequence[float],
    y: Sequence[float],
    permutations: int = DEFAULT_PERMUTATIONS,
    seed: int = 0,
) -> CorrelationResult:
    """Product-moment correlation with a permutation p-value.

    The p-value is the +1-smoothed fraction of seeded shuffles of y whose
    |r| meets or exceeds the observed |r|. Each shuffle uses its own derived
    seed, so the result is independent of evaluation order.
    """
    x_arr = np.asarray(x, dtype=np.float64)
    y_arr = np.asarray(y, dtype=np.float64)
    if x_arr.ndim != 1 or y_arr.ndim != 1:
        raise AnalysisError("inputs must be one-dimensional series")
    if len(x_arr) != len(y_arr):
        raise AnalysisError(f"length mismatch: {len(x_arr)} vs {len(y_arr)}")
    n = len(x_arr)
    if n < 3:
        raise AnalysisError(f"need at least 3 points, got {n}")
    r = _pearson_r(x_arr, y_arr)

    hits = 0
    root = np.random.SeedSequence([seed])
    for child in root.spawn(permutations):
        rng = np.random.Generator(np.random.PCG64(child))
        r_perm = _pearson_r(x_arr, y_arr[rng.permutation(n)])
        if abs(r_perm) >= abs(r):
            hits += 1
    p_value = (hits + 1) / (permutations + 1)
    return CorrelationResult(r=float(r), n=n, p_value=p_value)


def _pearson_r(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(np.sqrt((xc * xc).sum()))
    sy = float(np.sqrt((yc * yc).sum()))
    if sx == 0.0 or sy == 0.0:
        raise AnalysisError("zero variance: correlation undefined")
    return float((xc * yc).sum() / (sx * sy))


def _trial_lookup(schedules: Iterable[Schedule]):
    """trial_id -> (difficulty_rank, pair) across schedules; ranks must agree."""
    ranks: dict[str, int] = {}
    pairs: dict[str, object] = {}
    for sched in schedules:
        for trial in sched.trials:
            prior = ranks.get(trial.trial_id)
            if prior is not None and prior != trial.difficulty_rank:
                raise AnalysisError(
                    f"trial_id {trial.trial_id} has conflicting difficulty ranks"
                )
            ranks[trial.trial_id] = trial.difficulty_rank
            pairs[trial.trial_id] = trial.pair
    return ranks, pairs


def uncertainty_by_difficulty(
    records: Sequence[AnnotationRecord],
    schedules: Iterable[Schedule],
    participants: Sequence[Participant] | None = None,
    pool_conditions: bool = False,
) -> list[tuple[int, float]]:
    """Per difficulty rank, the share of trials labeled fully uncertain.

    With participant metadata, each (condition, rank) cell is its own point,
    giving up to 60 points across the two conditions; with pooling (or no
    metadata) ranks collapse to at most 30 points. Unclear (0.5) labels count
    toward the denominator but not the numerator.
    """
    ranks, _ = _trial_lookup(schedules)
    condition_of: dict[str, str] = {}
    if participants is not None and not pool_conditions:
        condition_of = {p.participant_id: p.condition for p in participants}

    totals: dict[tuple[str, int], int] = {}
    uncertain: dict[tuple[str, int], int] = {}
    for rec in records:
        if rec.trial_id not in ranks:
            raise AnalysisError(f"record references unknown trial_id {rec.trial_id!r}")
        if rec.label is None:
            continue
        if condition_of:
            if rec.participant_id not in condition_of:
                raise AnalysisError(
                    f"no participant metadata for {rec.participant_id!r}"
                )
            group = condition_of[rec.participant_id]
        else:
            group = ""
        key = (group, ranks[rec.trial_id])
        totals[key] = totals.get(key, 0) + 1
        if rec.label == 1.0:
            uncertain[key] = uncertain.get(key, 0) + 1
    return [(key[1], uncertain.get(key, 0) / totals[key]) for key in sorted(totals)]


def uncertainty_vs_correctness(
    records: Sequence[AnnotationRecord],
    schedules: Iterable[Schedule],
    permutations: int = DEFAULT_PERMUTATIONS,
    seed: int = 0,
) -> CorrelationResult:
    """Correlate per-rank uncertain share with per-rank correctness rate."""
    ranks, _ = _trial_lookup(schedules)
    totals: dict[int, int] = {}
    uncertain: dict[int, int] = {}
    correct: dict[int, int] = {}
    for rec in records:
        if rec.trial_id not in ranks:
            raise AnalysisError(f"record references unknown trial_id {rec.trial_id!r}")
        if rec.label is None:
            continue
        rank = ranks[rec.trial_id]
        totals[rank] = totals.get(rank, 0) + 1
        if rec.label == 1.0:
            uncertain[rank] = uncertain.get(rank, 0) + 1
        if rec.correct:
            correct[rank] = correct.get(rank, 0) + 1
    order = sorted(totals)
    shares = [uncertain.get(r, 0) / totals[r] for r in order]
    rates = [correct.get(r, 0) / totals[r] for r in order]
    return pearson(shares, rates, permutations=permutations, seed=seed)


def cue_frequencies(
    records: Sequence[AnnotationRecord],
    participants: Sequence[Participant],
    schedules: Iterable[Schedule],
) -> CueFrequencyTable:
    """Per-cue rates over the all / uncertain / hard / easy / female / male subsets."""
    _, pairs = _trial_lookup(schedules)
    gender_of = {p.participant_id: p.gender for p in participants}

    members: dict[str, list[AnnotationRecord]] = {s: [] for s in SUBSETS}
    for rec in records:
        if rec.participant_id not in gender_of:
            raise AnalysisError(f"no participant metadata for {rec.participant_id!r}")
        if rec.trial_id not in pairs:
            raise AnalysisError(f"record references unknown trial_id {rec.trial_id!r}")
        members["all"].append(rec)
        if rec.label == 1.0:
            members["uncertain"].append(rec)
        members[hard_easy_class(pairs[rec.trial_id])].append(rec)
        gender = gender_of[rec.participant_id]
        if gender in ("female", "male"):
            members[gender].append(rec)

    rates = {
        subset: {
            cue: (
                sum(getattr(r.cue_set, cue) for r in recs) / len(recs) if recs else 0.0
            )
            for cue in CUE_NAMES
        }
        for subset, recs in members.items()
    }
    counts = {subset: len(recs) for subset, recs in members.items()}
    return CueFrequencyTable(rates=rates, counts=counts)


def demographic_summary(
    records: Sequence[AnnotationRecord],
    participants: Sequence[Participant],
) -> dict[str, dict[str, float]]:
    """Uncertain-trial rates and mean ages per gender and per age group."""
    by_id = {p.participant_id: p for p in participants}
    groups: dict[str, list[AnnotationRecord]] = {}
    for rec in records:
        person = by_id.get(rec.participant_id)
        if person is None:
            raise AnalysisError(f"no participant metadata for {rec.participant_id!r}")
        for key in (f"gender:{person.gender}", f"age:{person.age_group}"):
            groups.setdefault(key, []).append(rec)

    out: dict[str, dict[str, float]] = {}
    for key, recs in sorted(groups.items()):
        labeled = [r for r in recs if r.label is not None]
        ids = {r.participant_id for r in recs}
        ages = [by_id[i].age_days for i in ids]
        out[key] = {
            "n_trials": float(len(recs)),
            "n_participants": float(len(ids)),
            "uncertain_rate": (
                sum(r.label == 1.0 for r in labeled) / len(labeled) if labeled else 0.0
            ),
            "mean_age_days": sum(ages) / len(ages),
        }
    return out


def emit_distribution_report(
    table: CueFrequencyTable,
    correlations: dict[str, CorrelationResult],
    demographics: dict[str, dict[str, float]],
    out_dir: str | Path,
    difficulty_series: Sequence[tuple[int, float]] | None = None,
) -> dict[str, Path]:
    """Write the plot-ready CSV bundle; byte-identical for identical inputs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "correlations": out / "correlations.csv",
        "cue_frequencies": out / "cue_frequencies.csv",
        "demographics": out / "demographics.csv",
    }

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["analysis", "r", "n", "df", "p_value"])
    for name in sorted(correlations):
        res = correlations[name]
        w.writerow([name, _fmt(res.r), res.n, res.df, _fmt(res.p_value)])
    paths["correlations"].write_text(buf.getvalue(), encoding="utf-8")

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cue", "subset", "rate", "subset_n", "in_reference_stats"])
    for cue in CUE_NAMES:
        flagged = "0" if cue in CUES_WITHOUT_REFERENCE_STATS else "1"
        for subset in SUBSETS:
            w.writerow(
                [cue, subset, _fmt(table.rates[subset][cue]), table.counts[subset], flagged]
            )
    paths["cue_frequencies"].write_text(buf.getvalue(), encoding="utf-8")

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["group", "n_trials", "n_participants", "uncertain_rate", "mean_age_days"])
    for group in sorted(demographics):
        row = demographics[group]
        w.writerow(
            [
                group,
                int(row["n_trials"]),
                int(row["n_participants"]),
                _fmt(row["uncertain_rate"]),
                _fmt(row["mean_age_days"]),
            ]
        )
    paths["demographics"].write_text(buf.getvalue(), encoding="utf-8")

    if difficulty_series is not None:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["difficulty_rank", "uncertain_share"])
        for rank, share in difficulty_series:
            w.writerow([rank, _fmt(share)])
        paths["difficulty_series"] = out / "difficulty_series.csv"
        paths["difficulty_series"].write_text(buf.getvalue(), encoding="utf-8")
    return paths


def _fmt(value: float) -> str:
    if value != value:  # NaN
        return "nan"
    return format(value, ".12g")
