"""Training machinery: scheduler, splits, metrics, determinism, checkpoints."""

import math

import numpy as np
import pytest
import torch

from numcue.annotation import CUE_NAMES, Participant
from numcue.features import SynthConfig, generate_synthetic_dataset
from numcue.modeling import (
    CLASS_VALUES,
    ContrastiveConfig,
    DataError,
    MetricError,
    MulTConfig,
    PlateauScheduler,
    TrainConfig,
    TrainingError,
    ablate_modality,
    build_model,
    eval_by_age_group,
    evaluate,
    evaluate_model,
    load_checkpoint,
    pack,
    predict_scores,
    save_checkpoint,
    split_dataset,
    train,
    train_cue_heads,
    train_ensemble_classifier,
    write_history_csv,
)
from numcue.modeling.nets import CueEnsemble

TINY = MulTConfig(layers=1, heads=2, model_dim=8, dropout=0.0, ff_mult=1)


def synth_samples(trials=60, seed=0, **kw):
    cfg = SynthConfig(
        trials=trials, seed=seed, video_len=8, audio_len=4, text_len=4, **kw
    )
    return generate_synthetic_dataset(cfg)


def dummy_optimizer(lr=0.001):
    return torch.optim.SGD([torch.nn.Parameter(torch.zeros(1))], lr=lr)


class TestPlateauScheduler:
    def test_strictly_decreasing_never_changes(self):
        sched = PlateauScheduler(dummy_optimizer(), factor=0.1, patience=5)
        for i in range(50):
            lr = sched.step(1.0 / (i + 1))
        assert lr == pytest.approx(0.001)

    def test_first_trigger_value(self):
        sched = PlateauScheduler(dummy_optimizer(0.001), factor=0.1, patience=5)
        lr = 0.001
        while lr == 0.001:
            lr = sched.step(1.0)
        assert lr == pytest.approx(0.0001)

    def test_constant_sequence_period(self):
        sched = PlateauScheduler(dummy_optimizer(1.0), factor=0.1, patience=5)
        changes = []
        last = 1.0
        for step in range(1, 40):
            lr = sched.step(7.0)
            if lr != last:
                changes.append(step)
                last = lr
        # warm-up consumes one extra eval; afterwards every patience+1
        assert changes[0] == 7
        assert all(b - a == 6 for a, b in zip(changes, changes[1:]))

    def test_improvement_resets_patience(self):
        sched = PlateauScheduler(dummy_optimizer(1.0), factor=0.1, patience=2)
        values = [1.0, 1.0, 1.0, 0.5, 1.0, 1.0]
        for v in values:
            lr = sched.step(v)
        assert lr == pytest.approx(1.0)  # the improvement keeps stale evals <= patience


class TestSplitDataset:
    def test_hundred_samples_exact_sizes(self):
        samples = synth_samples(100, seed=1).samples
        tr, dev, te = split_dataset(samples, seed=3)
        assert (len(tr), len(dev), len(te)) == (75, 10, 15)

    def test_partition_exact(self):
        samples = synth_samples(97, seed=2).samples
        tr, dev, te = split_dataset(samples, seed=3)
        ids = sorted(s.trial_id for s in tr + dev + te)
        assert ids == sorted(s.trial_id for s in samples)
        assert len(set(ids)) == len(samples)

    def test_stratification_within_one(self):
        samples = synth_samples(100, seed=4).samples
        tr, dev, te = split_dataset(samples, seed=5)
        for split, frac in ((tr, 0.75), (dev, 0.10), (te, 0.15)):
            for value in CLASS_VALUES:
                total = sum(s.label == value for s in samples)
                got = sum(s.label == value for s in split)
                assert abs(got - total * frac) <= 1.0

    def test_deterministic(self):
        samples = synth_samples(50, seed=6).samples
        a = split_dataset(samples, seed=9)
        b = split_dataset(samples, seed=9)
        assert [[s.trial_id for s in part] for part in a] == [
            [s.trial_id for s in part] for part in b
        ]

    def test_tiny_class_rejected(self):
        samples = synth_samples(40, seed=7, label_prior=(0.97, 0.015, 0.015)).samples
        # ensure at least one class is below 3 members for the fixture to bite
        counts = {v: sum(s.label == v for s in samples) for v in CLASS_VALUES}
        assert min(counts.values()) < 3
        with pytest.raises(DataError):
            split_dataset(samples, seed=1)

    def test_bad_fractions_rejected(self):
        with pytest.raises(DataError):
            split_dataset(synth_samples(30).samples, fractions=(0.5, 0.2, 0.2))


class TestEvaluate:
    def test_perfect_predictions(self):
        scores = np.eye(3)[[0, 1, 2, 0]]
        report = evaluate(scores, [0.0, 0.5, 1.0, 0.0])
        assert report.weighted_f1 == 1.0
        assert report.mae == 0.0
        assert report.r2 == pytest.approx(1.0)

    def test_constant_zero_prediction_hand_values(self):
        scores = np.tile([5.0, 1.0, 1.0], (4, 1))
        report = evaluate(scores, [0.0, 0.0, 1.0, 0.5])
        assert report.mae == pytest.approx(0.375)
        # class 0: precision 1/2, recall 1 -> F1 2/3, support half the data
        assert report.weighted_f1 == pytest.approx((2 / 4) * (2 / 3))
        assert report.r2 == pytest.approx(1 - 1.25 / 0.6875)
        assert report.r2 < 0

    def test_mixed_case_hand_values(self):
        # preds by argmax: 0, 0.5, 0.5, 1 against truth 0, 0.5, 1, 1
        scores = np.array(
            [[3, 0, 0], [0, 3, 0], [0, 3, 0], [0, 0, 3]], dtype=float
        )
        report = evaluate(scores, [0.0, 0.5, 1.0, 1.0])
        assert report.weighted_f1 == pytest.approx(0.75)
        assert report.mae == pytest.approx(0.125)
        assert report.r2 == pytest.approx(1 - 0.25 / 0.6875)

    def test_two_point_negative_r2(self):
        scores = np.array([[0, 0, 3], [3, 0, 0]], dtype=float)
        report = evaluate(scores, [0.0, 1.0])
        assert report.mae == pytest.approx(1.0)
        assert report.r2 == pytest.approx(-3.0)

    def test_constant_labels_r2_undefined(self):
        scores = np.array([[3, 0, 0], [3, 0, 0]], dtype=float)
        report = evaluate(scores, [0.0, 0.0])
        assert math.isnan(report.r2)
        assert report.to_json()["r2"] is None

    def test_argmax_invariance_under_constant_shift(self):
        rng = np.random.default_rng(3)
        scores = rng.normal(size=(40, 3))
        labels = rng.choice(CLASS_VALUES, size=40)
        base = evaluate(scores, labels)
        shifted = evaluate(scores + 17.5, labels)
        assert base == shifted

    def test_length_mismatch_rejected(self):
        with pytest.raises(MetricError):
            evaluate(np.zeros((3, 3)), [0.0, 1.0])


class TestAgeGroupEval:
    def test_partition_exhaustive_and_disjoint(self):
        dataset = synth_samples(90, seed=8)
        data = pack(dataset.samples)
        rng = np.random.default_rng(0)
        scores = rng.normal(size=(len(data), 3))
        reports = eval_by_age_group(
            scores, data.label_values, data.participant_ids, dataset.participants
        )
        assert sum(r.n for r in reports.values()) == len(data)
        assert set(reports) <= {"4yo", "5yo"}

    def test_missing_metadata_rejected(self):
        dataset = synth_samples(30, seed=9)
        data = pack(dataset.samples)
        with pytest.raises(MetricError):
            eval_by_age_group(
                np.zeros((len(data), 3)), data.label_values, data.participant_ids, []
            )


class TestAblate:
    def test_text_ablation_noop_on_empty_text(self):
        samples = [s for s in synth_samples(50, seed=10).samples if not s.text_mask.any()]
        assert samples, "fixture needs no-speech trials"
        ablated = ablate_modality(samples, "text")
        for before, after in zip(samples, ablated):
            np.testing.assert_array_equal(before.text, after.text)
            np.testing.assert_array_equal(before.text_mask, after.text_mask)

    def test_video_ablation_zeroes_and_masks(self):
        samples = synth_samples(5, seed=11).samples
        ablated = ablate_modality(samples, "video")
        for s in ablated:
            assert not s.video_mask.any()
            assert np.all(s.video == 0.0)

    def test_unknown_modality_rejected(self):
        with pytest.raises(DataError):
            ablate_modality(synth_samples(3).samples, "smell")


class TestTrain:
    def small_data(self):
        dataset = synth_samples(80, seed=12)
        tr, dev, te = split_dataset(dataset.samples, seed=0)
        return pack(tr), pack(dev)

    def test_deterministic_final_dev_loss(self):
        tr, dev = self.small_data()
        cfg = TrainConfig(epochs=3, batch_size=8)
        results = []
        for _ in range(2):
            model = build_model("mult", TINY, seed=5)
            results.append(train(model, tr, dev, cfg, seed=5))
        assert abs(results[0].final_dev_loss - results[1].final_dev_loss) < 1e-6
        assert results[0].history == results[1].history

    def test_history_records_every_epoch(self, tmp_path):
        tr, dev = self.small_data()
        model = build_model("basic", TINY, seed=1)
        result = train(model, tr, dev, TrainConfig(epochs=4, batch_size=16), seed=1)
        assert [h.epoch for h in result.history] == [1, 2, 3, 4]
        path = tmp_path / "history.csv"
        write_history_csv(result, path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "epoch,train_loss,dev_loss,lr,dev_f1"
        assert len(lines) == 5

    def test_early_stop(self):
        tr, dev = self.small_data()
        model = build_model("basic", TINY, seed=1)
        result = train(
            model, tr, dev, TrainConfig(epochs=50, batch_size=16, early_stop_f1=0.0), seed=1
        )
        assert len(result.history) == 1

    def test_divergence_aborts_with_diagnostic(self):
        tr, dev = self.small_data()
        model = build_model("mult", TINY, seed=2)
        cfg = TrainConfig(epochs=5, batch_size=8, learning_rate=1e8, weight_decay=0.0)
        with pytest.raises(TrainingError, match="non-finite"):
            train(model, tr, dev, cfg, seed=2)

    def test_empty_split_rejected(self):
        tr, dev = self.small_data()
        model = build_model("basic", TINY, seed=1)
        with pytest.raises(TrainingError):
            train(model, tr, dev.__class__(dev.batch.select([]), [], []), TrainConfig())

    def test_contrastive_pretraining_runs(self):
        tr, dev = self.small_data()
        model = build_model("mult", TINY, seed=3)
        contrastive = ContrastiveConfig(pretrain_epochs=2)
        result = train(
            model, tr, dev, TrainConfig(epochs=2, batch_size=8), contrastive, seed=3
        )
        assert len(result.pretrain_losses) == 2
        assert all(math.isfinite(x) for x in result.pretrain_losses)

    def test_contrastive_per_modality_mode(self):
        tr, dev = self.small_data()
        model = build_model("mult", TINY, seed=3)
        contrastive = ContrastiveConfig(pretrain_epochs=1, target="per_modality")
        result = train(
            model, tr, dev, TrainConfig(epochs=1, batch_size=8), contrastive, seed=3
        )
        assert len(result.pretrain_losses) == 1

    def test_invalid_config_rejected(self):
        with pytest.raises(TrainingError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(TrainingError):
            TrainConfig(plateau_factor=1.5)
        with pytest.raises(TrainingError):
            ContrastiveConfig(pretrain_epochs=-1)


class TestLearnsSeparableData:
    def test_dev_f1_above_point_nine_within_fifty_epochs(self):
        # cues that deterministically encode the label make the task separable;
        # training must then push dev weighted F1 past 0.9 quickly
        rates = {c: {0.0: 0.0, 0.5: 0.0, 1.0: 0.0} for c in CUE_NAMES}
        rates["eyebrow_scrunch"] = {0.0: 0.0, 0.5: 0.0, 1.0: 1.0}
        rates["head_tilt"] = {0.0: 0.0, 0.5: 1.0, 1.0: 0.0}
        rates["smile"] = {0.0: 0.12, 0.5: 0.12, 1.0: 0.12}
        cfg = SynthConfig(
            trials=500, seed=11, noise_sigma=0.05, cue_rates=rates,
            video_len=10, audio_len=4, text_len=4,
        )
        dataset = generate_synthetic_dataset(cfg)
        from numcue.features import apply_normalizer, fit_normalizer

        train_s, dev_s, _ = split_dataset(dataset.samples, seed=0)
        norm = fit_normalizer(train_s)
        tr = pack([apply_normalizer(norm, s) for s in train_s])
        de = pack([apply_normalizer(norm, s) for s in dev_s])
        model = build_model(
            "mult", MulTConfig(layers=2, heads=2, model_dim=16), seed=1
        )
        result = train(
            model, tr, de,
            TrainConfig(epochs=50, batch_size=16, early_stop_f1=0.9),
            seed=1,
        )
        assert result.best_dev_f1 >= 0.9
        assert len(result.history) <= 50


class TestCueRuleMapping:
    def test_two_of_five_rule_is_learnable(self):
        # ground-truth cue vectors labeled by "uncertain iff >= 2 key cues":
        # the stage-2 classifier must recover the rule almost perfectly
        import torch.nn as nn

        from numcue.modeling.losses import classification_loss

        rng = np.random.default_rng(4)
        cues = (rng.random((600, 5)) < 0.3).astype(np.float32)
        labels = (cues.sum(axis=1) >= 2).astype(np.int64) * 2  # class 2 == uncertain
        inputs = torch.from_numpy(cues)
        targets = torch.from_numpy(labels)

        torch.manual_seed(0)
        clf = nn.Sequential(nn.Linear(5, 32), nn.ReLU(), nn.Linear(32, 3))
        optimizer = torch.optim.SGD(clf.parameters(), lr=0.001, momentum=0.9)
        for _ in range(1500):
            order = torch.from_numpy(rng.permutation(600))
            for start in range(0, 600, 64):
                idx = order[start : start + 64]
                loss = classification_loss(clf(inputs[idx]), targets[idx])
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
        with torch.no_grad():
            scores = clf(inputs).numpy()
        values = np.asarray(CLASS_VALUES)[labels]
        report = evaluate(scores, values)
        assert report.weighted_f1 >= 0.98


class TestEnsembleTraining:
    def test_two_stage_pipeline(self):
        dataset = synth_samples(80, seed=13)
        tr, dev, te = split_dataset(dataset.samples, seed=0)
        tr, dev = pack(tr), pack(dev)
        ensemble = build_model("ensemble", TINY, seed=4)
        stage1 = train_cue_heads(ensemble, tr, dev, TrainConfig(epochs=2, batch_size=16), seed=4)
        assert ensemble.stage1_trained
        assert len(stage1.history) == 2
        stage2 = train_ensemble_classifier(
            ensemble, tr, dev, TrainConfig(epochs=2, batch_size=16), seed=4
        )
        assert len(stage2.history) == 2
        scores = predict_scores(ensemble, dev)
        assert scores.shape == (len(dev), 3)

    def test_stage2_before_stage1_rejected(self):
        dataset = synth_samples(80, seed=14)
        tr, dev, te = split_dataset(dataset.samples, seed=0)
        ensemble = build_model("ensemble", TINY, seed=4)
        with pytest.raises(TrainingError):
            train_ensemble_classifier(ensemble, pack(tr), pack(dev), TrainConfig(epochs=1))


class TestCheckpoint:
    def test_round_trip_scores_identical(self, tmp_path):
        dataset = synth_samples(30, seed=15)
        data = pack(dataset.samples)
        model = build_model("mult", TINY, seed=6)
        model.eval()
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, "mult", model, TINY, extra={"note": "test"})
        loaded, norm, header = load_checkpoint(path)
        assert header["kind"] == "mult"
        assert header["extra"]["note"] == "test"
        assert norm is None
        np.testing.assert_allclose(
            predict_scores(model, data), predict_scores(loaded, data), atol=0
        )

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"not a checkpoint")
        from numcue.modeling import CheckpointError

        with pytest.raises(CheckpointError):
            load_checkpoint(path)
