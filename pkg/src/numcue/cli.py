"""Command-line entry points for every pipeline stage.

Exit codes: 0 success, 1 validation error (bad flags, malformed inputs),
2 runtime failure. Any flag may also come from a TOML or JSON config file
passed with --config; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import analysis, annotation, features, stimuli
from .modeling import (
    MulTConfig,
    TRAIN_PRESETS,
    TrainConfig,
    ContrastiveConfig,
    build_model,
    eval_by_age_group,
    evaluate,
    load_checkpoint,
    mean_report,
    pack,
    predict_scores,
    save_checkpoint,
    split_dataset,
    ablate_modality,
    train,
    train_cue_heads,
    train_ensemble_classifier,
    write_history_csv,
)
from .service import SessionStore, create_app

MODEL_PRESETS = ("basic", "mult", "mult_cl", "ensemble")
CONDITION_FLAGS = {"easy-first": stimuli.EASY_FIRST, "hard-first": stimuli.HARD_FIRST}


class CliError(ValueError):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); bad flags are validation
        raise CliError(message)


def load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise CliError(f"config file {p} does not exist")
    if p.suffix == ".json":
        return json.loads(p.read_text(encoding="utf-8"))
    if p.suffix == ".toml":
        try:
            import tomllib  # py311+
        except ImportError:
            import tomli as tomllib
        with p.open("rb") as fh:
            return tomllib.load(fh)
    raise CliError(f"config file must be .toml or .json, got {p.name}")


def merge_config(args: argparse.Namespace, config: dict) -> argparse.Namespace:
    """Fill in args the user did not pass from the config file."""
    for key, value in config.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise CliError(f"config key {key!r} is not a flag of this command")
        if getattr(args, attr) is None:
            setattr(args, attr, value)
    return args


def _positive(kind):
    def convert(text):
        value = kind(text)
        if value <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return value

    return convert


# --- data loading helpers ----------------------------------------------------


def _load_split(manifest: str, split: str, split_seed: int):
    samples, participants = features.load_dataset(manifest)
    if split == "all":
        return samples, participants
    train_s, dev_s, test_s = split_dataset(samples, seed=split_seed)
    return {"train": train_s, "dev": dev_s, "test": test_s}[split], participants


def _normalized_tensors(train_s, dev_s, test_s):
    norm = features.fit_normalizer(train_s)
    return (
        norm,
        pack([features.apply_normalizer(norm, s) for s in train_s]),
        pack([features.apply_normalizer(norm, s) for s in dev_s]),
        pack([features.apply_normalizer(norm, s) for s in test_s]),
    )


def _read_schedules(paths: list[str]) -> list[stimuli.Schedule]:
    out = []
    for raw in paths:
        p = Path(raw)
        if p.is_dir():
            for child in sorted(p.glob("*.json")):
                out.append(stimuli.read_schedule(child))
        else:
            out.append(stimuli.read_schedule(p))
    if not out:
        raise CliError("no schedule files found")
    return out


# --- commands ------------------------------------------------------------------


def cmd_stimgen(args) -> int:
    condition = CONDITION_FLAGS[args.condition]
    schedule = stimuli.build_schedule(
        condition,
        seed=args.seed if args.seed is not None else 0,
        incongruency_factor=args.incongruency_factor
        if args.incongruency_factor is not None
        else stimuli.DEFAULT_INCONGRUENCY_FACTOR,
    )
    stimuli.write_schedule(schedule, args.out)
    print(f"wrote {len(schedule.trials)}-trial {condition} schedule to {args.out}")
    return 0


def _synth_config(args) -> features.SynthConfig:
    cfg = features.SynthConfig(
        trials=args.trials if args.trials is not None else 1000,
        seed=args.seed if args.seed is not None else 0,
        noise_sigma=args.sigma if args.sigma is not None else 0.25,
    )
    if args.video_len is not None:
        cfg = replace(cfg, video_len=args.video_len)
    return cfg


def cmd_synth(args) -> int:
    out = Path(args.out_dir)
    cfg = _synth_config(args)
    dataset = features.generate_synthetic_dataset(cfg)
    manifest = features.write_dataset(dataset, out)
    annotation.write_participant_file(dataset.participants, out / "participants.csv")
    if args.with_annotations:
        records, _, schedules = features.synthetic_annotation_records(cfg)
        annotation.write_annotation_file(records, out / "annotations.csv")
        sched_dir = out / "schedules"
        sched_dir.mkdir(exist_ok=True)
        for sched in schedules:
            stimuli.write_schedule(
                sched, sched_dir / f"{sched.condition.lower()}-{sched.seed}.json"
            )
    print(f"wrote {cfg.trials} synthetic trials to {manifest}")
    return 0


def cmd_analyze(args) -> int:
    records = annotation.parse_annotation_file(args.annotations)
    participants = annotation.parse_participant_file(args.participants)
    schedules = _read_schedules(args.schedules)
    permutations = args.permutations if args.permutations is not None else 10_000
    seed = args.seed if args.seed is not None else 0

    series = analysis.uncertainty_by_difficulty(records, schedules, participants)
    ranks = [float(r) for r, _ in series]
    shares = [s for _, s in series]
    correlations = {
        "uncertainty_vs_difficulty": analysis.pearson(
            ranks, shares, permutations=permutations, seed=seed
        ),
        "uncertainty_vs_correctness": analysis.uncertainty_vs_correctness(
            records, schedules, permutations=permutations, seed=seed
        ),
    }
    table = analysis.cue_frequencies(records, participants, schedules)
    demographics = analysis.demographic_summary(records, participants)
    paths = analysis.emit_distribution_report(
        table, correlations, demographics, args.out, difficulty_series=series
    )
    for name, path in sorted(paths.items()):
        print(f"wrote {path}")
    res = correlations["uncertainty_vs_difficulty"]
    print(f"uncertainty vs difficulty: r({res.df}) = {res.r:.3f}, p = {res.p_value:.4f}")
    return 0


def _model_config(args) -> MulTConfig:
    cfg = MulTConfig()
    overrides = {}
    for name in ("layers", "heads", "model_dim", "dropout"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return replace(cfg, **overrides) if overrides else cfg


def _train_config(args) -> TrainConfig:
    base = TRAIN_PRESETS[args.train_preset if args.train_preset else "default"]
    overrides = {}
    for name in (
        "epochs",
        "batch_size",
        "learning_rate",
        "class_weighting",
        "early_stop_f1",
    ):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    if args.weighted_sampling:
        overrides["weighted_sampling"] = True
    return replace(base, **overrides) if overrides else base


def _train_one_seed(kind, mult_cfg, train_cfg, contrastive, tr, de, seed):
    model = build_model(kind, mult_cfg, seed=seed)
    histories = {}
    if kind == "ensemble":
        histories["cues"] = train_cue_heads(model, tr, de, train_cfg, seed=seed)
        # the cue->label head is tiny and cheap: many epochs, constant lr, no decay
        stage2_cfg = replace(
            train_cfg,
            epochs=max(train_cfg.epochs, 1000),
            weight_decay=0.0,
            plateau_patience=10_000,
        )
        histories["main"] = train_ensemble_classifier(model, tr, de, stage2_cfg, seed=seed)
    else:
        histories["main"] = train(
            model, tr, de, train_cfg, contrastive=contrastive, seed=seed
        )
    return model, histories


def cmd_train(args) -> int:
    samples, participants = features.load_dataset(args.data)
    split_seed = args.split_seed if args.split_seed is not None else 0
    train_s, dev_s, test_s = split_dataset(samples, seed=split_seed)
    norm, tr, de, te = _normalized_tensors(train_s, dev_s, test_s)

    kind = args.preset if args.preset else "mult"
    mult_cfg = _model_config(args)
    train_cfg = _train_config(args)
    contrastive = (
        ContrastiveConfig() if kind == "mult_cl" else None
    )
    if kind == "mult_cl":
        train_cfg = replace(train_cfg, weighted_sampling=True)

    seeds = (
        list(range(1, args.seeds + 1))
        if isinstance(args.seeds, int)
        else list(train_cfg.seeds)
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    reports = []
    per_seed = {}
    for seed in seeds:
        model, histories = _train_one_seed(
            kind, mult_cfg, train_cfg, contrastive, tr, de, seed
        )
        write_history_csv(histories["main"], out / f"history_seed{seed}.csv")
        if "cues" in histories:
            write_history_csv(histories["cues"], out / f"history_seed{seed}_cues.csv")
        save_checkpoint(
            out / f"seed{seed}.ckpt",
            kind,
            model,
            mult_cfg,
            normalizer=norm,
            extra={"seed": seed, "split_seed": split_seed, "data": str(args.data)},
        )
        report = evaluate(predict_scores(model, te), te.label_values)
        reports.append(report)
        per_seed[seed] = report.to_json()
        print(
            f"seed {seed}: test weighted F1 {report.weighted_f1:.4f}, "
            f"MAE {report.mae:.4f}, best dev F1 {histories['main'].best_dev_f1:.4f}"
        )

    summary = {"model": kind, "seeds": seeds, "mean": mean_report(reports), "per_seed": per_seed}
    (out / "report.json").write_text(json.dumps(summary, indent=2), encoding="utf-8")
    print(f"mean test weighted F1 {summary['mean']['weighted_f1']:.4f} -> {out / 'report.json'}")
    return 0


def cmd_eval(args) -> int:
    model, norm, header = load_checkpoint(args.checkpoint)
    split_seed = args.split_seed if args.split_seed is not None else 0
    samples, participants = _load_split(args.data, args.split or "test", split_seed)
    if norm is not None:
        samples = [features.apply_normalizer(norm, s) for s in samples]
    data = pack(samples)
    scores = predict_scores(model, data)
    report = evaluate(scores, data.label_values)
    payload = report.to_json()
    if args.by_age_group:
        payload["age_groups"] = {
            group: rep.to_json()
            for group, rep in eval_by_age_group(
                scores, data.label_values, data.participant_ids, participants
            ).items()
        }
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text)
    return 0


def cmd_ablate(args) -> int:
    model, norm, header = load_checkpoint(args.checkpoint)
    split_seed = args.split_seed if args.split_seed is not None else 0
    samples, _ = _load_split(args.data, args.split or "test", split_seed)
    if norm is not None:
        samples = [features.apply_normalizer(norm, s) for s in samples]
    results = {}
    for modality in args.modality:
        ablated = pack(ablate_modality(samples, modality))
        report = evaluate(predict_scores(model, ablated), ablated.label_values)
        results[modality] = report.to_json()
        print(f"ablate {modality}: weighted F1 {report.weighted_f1:.4f}, MAE {report.mae:.4f}")
    if args.out:
        Path(args.out).write_text(json.dumps(results, indent=2), encoding="utf-8")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    store = SessionStore(args.data_dir, seed=args.seed if args.seed is not None else 0)
    app = create_app(store, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host or "127.0.0.1", port=args.port if args.port is not None else 8000)
    return 0


def cmd_export(args) -> int:
    store = SessionStore(args.data_dir)
    if args.list:
        for sid in store.session_ids():
            print(sid)
        return 0
    if not args.session_id:
        raise CliError("--session-id required (or use --list)")
    csv_text = store.export_session(args.session_id)
    if args.out:
        Path(args.out).write_text(csv_text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(csv_text)
    return 0


# --- parser --------------------------------------------------------------------


def build_parser() -> Parser:
    parser = Parser(prog="numcue", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stimgen", help="generate a 30-trial schedule JSON")
    p.add_argument("--condition", choices=sorted(CONDITION_FLAGS), required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--incongruency-factor", type=float, default=None)
    p.set_defaults(handler=cmd_stimgen)

    p = sub.add_parser("synth", help="generate the calibrated synthetic dataset")
    p.add_argument("--trials", type=_positive(int), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--sigma", type=_positive(float), default=None)
    p.add_argument("--video-len", type=_positive(int), default=None)
    p.add_argument("--with-annotations", action="store_true")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("analyze", help="reproduce the descriptive statistics")
    p.add_argument("--annotations", required=True)
    p.add_argument("--participants", required=True)
    p.add_argument("--schedules", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--permutations", type=_positive(int), default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(handler=cmd_analyze)

    p = sub.add_parser("train", help="train a model family preset over seeds")
    p.add_argument("--data", required=True, help="dataset manifest JSON")
    p.add_argument("--preset", choices=MODEL_PRESETS, default=None)
    p.add_argument("--train-preset", choices=sorted(TRAIN_PRESETS), default=None)
    p.add_argument("--seeds", type=_positive(int), default=None)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--split-seed", type=int, default=None)
    p.add_argument("--epochs", type=_positive(int), default=None)
    p.add_argument("--batch-size", type=_positive(int), default=None)
    p.add_argument("--learning-rate", type=_positive(float), default=None)
    p.add_argument("--class-weighting", choices=("none", "inverse", "inverse_sqrt"), default=None)
    p.add_argument("--weighted-sampling", action="store_true")
    p.add_argument("--early-stop-f1", type=float, default=None)
    p.add_argument("--layers", type=_positive(int), default=None)
    p.add_argument("--heads", type=_positive(int), default=None)
    p.add_argument("--model-dim", type=_positive(int), default=None)
    p.add_argument("--dropout", type=float, default=None)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--split", choices=("train", "dev", "test", "all"), default=None)
    p.add_argument("--split-seed", type=int, default=None)
    p.add_argument("--by-age-group", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("ablate", help="evaluate with modalities masked out")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--modality", nargs="+", choices=("video", "audio", "text"), required=True)
    p.add_argument("--split", choices=("train", "dev", "test", "all"), default=None)
    p.add_argument("--split-seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_ablate)

    p = sub.add_parser("serve", help="run the session service over HTTP")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--ui-dir", default=None, help="built task UI to serve at /")
    p.set_defaults(handler=cmd_serve)

    p = sub.add_parser("export", help="export a session as annotation-ready CSV")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--session-id", default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--list", action="store_true")
    p.set_defaults(handler=cmd_export)

    for sp in sub.choices.values():
        sp.add_argument("--config", default=None, help="TOML/JSON file supplying flags")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = merge_config(args, load_config_file(args.config))
        return args.handler(args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime failure boundary
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
