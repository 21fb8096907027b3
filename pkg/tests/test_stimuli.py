"""Stimulus generator contract tests."""

import json
import math

import pytest

from numcue import stimuli
from numcue.stimuli import (
    EASY_FIRST,
    HARD_FIRST,
    NumberPair,
    StimulusError,
    build_schedule,
    canonical_pairs,
    generate_dot_array,
    generate_trial,
    hard_easy_class,
    read_schedule,
    schedule_from_json,
    schedule_to_json,
    write_schedule,
)


def recomputed_area(array: stimuli.DotArray) -> float:
    # independent of the DotArray property: plain loop over emitted geometry
    total = 0.0
    for dot in array.dots:
        total += math.pi * dot.radius * dot.radius
    return total


class TestCanonicalPairs:
    def test_exactly_six_known_pairs(self):
        pairs = canonical_pairs()
        keys = {(max(p.left_count, p.right_count), min(p.left_count, p.right_count)) for p in pairs}
        assert keys == {(10, 9), (8, 7), (14, 12), (10, 8), (9, 6), (10, 5)}

    def test_contains_easiest_pair_with_nominal_two(self):
        match = [p for p in canonical_pairs() if {p.left_count, p.right_count} == {10, 5}]
        assert len(match) == 1
        assert match[0].nominal_ratio == 2.0
        assert match[0].computed_ratio == 2.0

    def test_ten_nine_computed_ratio(self):
        p = next(p for p in canonical_pairs() if {p.left_count, p.right_count} == {10, 9})
        assert p.computed_ratio == pytest.approx(10 / 9)

    def test_ten_eight_nominal_and_computed_disagree(self):
        # printed nominal 1.13 vs arithmetic 1.25; both preserved
        p = next(p for p in canonical_pairs() if {p.left_count, p.right_count} == {10, 8})
        assert p.nominal_ratio == 1.13
        assert p.computed_ratio == pytest.approx(1.25)

    def test_computed_ratio_always_above_one(self):
        assert all(p.computed_ratio > 1 for p in canonical_pairs())


class TestHardEasyClass:
    @pytest.mark.parametrize(
        "counts,expected",
        [((10, 9), "hard"), ((8, 7), "hard"), ((14, 12), "hard"),
         ((10, 8), "easy"), ((9, 6), "easy"), ((10, 5), "easy")],
    )
    def test_classification(self, counts, expected):
        pair = next(
            p for p in canonical_pairs()
            if {p.left_count, p.right_count} == set(counts)
        )
        assert hard_easy_class(pair) == expected

    def test_non_canonical_rejected(self):
        with pytest.raises(StimulusError):
            hard_easy_class(NumberPair(3, 2, 1.5))


class TestDotArray:
    def test_single_dot_radius_forced_by_area(self):
        area = 500.0
        arr = generate_dot_array(1, area, seed=4)
        assert arr.dots[0].radius == pytest.approx(math.sqrt(area / math.pi))

    def test_determinism(self):
        a = generate_dot_array(10, 5000.0, seed=11)
        b = generate_dot_array(10, 5000.0, seed=11)
        assert a == b

    def test_different_seed_changes_layout(self):
        a = generate_dot_array(10, 5000.0, seed=11)
        b = generate_dot_array(10, 5000.0, seed=12)
        assert a != b

    def test_cumulative_area_matches_target(self):
        area = 4321.0
        arr = generate_dot_array(5, area, seed=3)
        assert abs(recomputed_area(arr) - area) <= 1e-6 * area

    def test_no_overlap_and_in_bounds(self):
        arr = generate_dot_array(14, 12000.0, seed=9)
        dots = arr.dots
        for i in range(len(dots)):
            di = dots[i]
            assert di.radius <= di.x <= arr.canvas_width - di.radius
            assert di.radius <= di.y <= arr.canvas_height - di.radius
            for j in range(i + 1, len(dots)):
                dj = dots[j]
                dist = math.hypot(di.x - dj.x, di.y - dj.y)
                assert dist > di.radius + dj.radius

    def test_nonpositive_count_rejected(self):
        with pytest.raises(StimulusError):
            generate_dot_array(0, 100.0, seed=1)

    def test_excessive_density_rejected(self):
        with pytest.raises(StimulusError):
            generate_dot_array(5, 0.5 * 800 * 600, seed=1)


class TestGenerateTrial:
    def pair(self, a, b):
        return next(
            p for p in canonical_pairs() if {p.left_count, p.right_count} == {a, b}
        )

    def test_congruent_greater_side_has_larger_area(self):
        trial = generate_trial(self.pair(10, 5), congruent=True, seed=21)
        assert trial.greater_array.cumulative_area > trial.lesser_array.cumulative_area
        assert trial.greater_array.count == 10

    def test_incongruent_greater_side_has_smaller_area(self):
        trial = generate_trial(self.pair(10, 5), congruent=False, seed=21)
        assert trial.greater_array.cumulative_area < trial.lesser_array.cumulative_area
        assert trial.greater_array.count == 10

    def test_incongruent_area_ratio_is_factor(self):
        trial = generate_trial(self.pair(10, 5), congruent=False, seed=33)
        ratio = recomputed_area(trial.greater_array) / recomputed_area(trial.lesser_array)
        assert ratio == pytest.approx(0.8, abs=1e-6)

    def test_congruent_area_ratio_is_count_ratio(self):
        trial = generate_trial(self.pair(9, 6), congruent=True, seed=5)
        ratio = recomputed_area(trial.greater_array) / recomputed_area(trial.lesser_array)
        assert ratio == pytest.approx(9 / 6, abs=1e-6)

    def test_non_canonical_pair_rejected(self):
        with pytest.raises(StimulusError):
            generate_trial(NumberPair(4, 3, 1.33), congruent=True, seed=1)

    def test_custom_incongruency_factor(self):
        trial = generate_trial(
            self.pair(10, 8), congruent=False, seed=2, incongruency_factor=0.6
        )
        ratio = recomputed_area(trial.greater_array) / recomputed_area(trial.lesser_array)
        assert ratio == pytest.approx(0.6, abs=1e-6)


class TestSchedule:
    def test_thirty_trials_and_congruency_split(self):
        sched = build_schedule(EASY_FIRST, seed=7)
        assert len(sched.trials) == 30
        assert sum(t.area_congruent for t in sched.trials) == 15

    def test_five_repetitions_per_pair(self):
        sched = build_schedule(EASY_FIRST, seed=7)
        counts: dict[tuple[int, int], int] = {}
        for t in sched.trials:
            key = (max(t.pair.left_count, t.pair.right_count),
                   min(t.pair.left_count, t.pair.right_count))
            counts[key] = counts.get(key, 0) + 1
        assert all(v == 5 for v in counts.values())
        assert len(counts) == 6

    def test_easy_first_starts_at_ratio_two(self):
        sched = build_schedule(EASY_FIRST, seed=7)
        assert sched.trials[0].pair.computed_ratio == pytest.approx(2.0)

    def test_hard_first_starts_at_hardest_ratio(self):
        sched = build_schedule(HARD_FIRST, seed=7)
        assert sched.trials[0].pair.computed_ratio == pytest.approx(10 / 9)

    def test_hard_first_is_exact_reverse(self):
        easy = build_schedule(EASY_FIRST, seed=7)
        hard = build_schedule(HARD_FIRST, seed=7)
        assert tuple(reversed(easy.trials)) == hard.trials

    def test_ratios_non_increasing_in_easy_first(self):
        sched = build_schedule(EASY_FIRST, seed=3)
        ratios = [t.pair.computed_ratio for t in sched.trials]
        assert all(a >= b - 1e-12 for a, b in zip(ratios, ratios[1:]))

    def test_difficulty_rank_bijection(self):
        for condition in (EASY_FIRST, HARD_FIRST):
            sched = build_schedule(condition, seed=5)
            assert sorted(t.difficulty_rank for t in sched.trials) == list(range(1, 31))

    def test_congruent_precede_incongruent_within_pair(self):
        sched = build_schedule(EASY_FIRST, seed=1)
        for i in range(0, 30, 5):
            block = sched.trials[i : i + 5]
            flags = [t.area_congruent for t in block]
            assert flags == sorted(flags, reverse=True)

    def test_area_congruency_sign_invariant(self):
        sched = build_schedule(EASY_FIRST, seed=13)
        for t in sched.trials:
            area_diff = t.left_array.cumulative_area - t.right_array.cumulative_area
            count_diff = t.left_array.count - t.right_array.count
            same_sign = (area_diff > 0) == (count_diff > 0)
            assert same_sign == t.area_congruent

    def test_unknown_condition_rejected(self):
        with pytest.raises(StimulusError):
            build_schedule("MediumFirst", seed=1)


class TestScheduleJson:
    def test_round_trip_file(self, tmp_path):
        sched = build_schedule(EASY_FIRST, seed=42)
        path = tmp_path / "sched.json"
        write_schedule(sched, path)
        assert read_schedule(path) == sched

    def test_round_trip_preserves_geometry_exactly(self):
        sched = build_schedule(HARD_FIRST, seed=8)
        again = schedule_from_json(json.loads(json.dumps(schedule_to_json(sched))))
        for a, b in zip(sched.trials, again.trials):
            assert a.left_array.dots == b.left_array.dots
            assert a.right_array.dots == b.right_array.dots

    def test_json_fields_present(self):
        obj = schedule_to_json(build_schedule(EASY_FIRST, seed=2))
        trial = obj["trials"][0]
        assert {"trial_id", "pair", "left_array", "right_array", "greater_side",
                "area_congruent", "display_ms", "difficulty_rank"} <= trial.keys()
        assert {"x", "y", "radius"} == set(trial["left_array"]["dots"][0].keys())
