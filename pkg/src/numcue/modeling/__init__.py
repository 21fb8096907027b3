from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .data import (
    CLASS_VALUES,
    Batch,
    DataError,
    TensorData,
    ablate_modality,
    label_to_class,
    pack,
    split_dataset,
)
from .losses import (
    LossError,
    class_weight_tensor,
    classification_loss,
    contrastive_loss,
    sample_weights,
    weighted_sampler,
)
from .metrics import EvalReport, MetricError, eval_by_age_group, evaluate, mean_report
from .nets import (
    ENSEMBLE_CUES,
    BaselineMLP,
    CrossModalTransformer,
    CueEnsemble,
    CueHeads,
    ModelError,
    MulTConfig,
    build_model,
)
from .training import (
    TRAIN_PRESETS,
    ContrastiveConfig,
    HistoryEntry,
    PlateauScheduler,
    TrainConfig,
    TrainingError,
    TrainResult,
    evaluate_model,
    predict_scores,
    train,
    train_cue_heads,
    train_ensemble_classifier,
    write_history_csv,
)

__all__ = [
    "Batch",
    "BaselineMLP",
    "CLASS_VALUES",
    "CheckpointError",
    "ContrastiveConfig",
    "CrossModalTransformer",
    "CueEnsemble",
    "CueHeads",
    "DataError",
    "ENSEMBLE_CUES",
    "EvalReport",
    "HistoryEntry",
    "LossError",
    "MetricError",
    "ModelError",
    "MulTConfig",
    "PlateauScheduler",
    "TRAIN_PRESETS",
    "TensorData",
    "TrainConfig",
    "TrainResult",
    "TrainingError",
    "ablate_modality",
    "build_model",
    "class_weight_tensor",
    "classification_loss",
    "contrastive_loss",
    "eval_by_age_group",
    "evaluate",
    "evaluate_model",
    "label_to_class",
    "load_checkpoint",
    "mean_report",
    "pack",
    "predict_scores",
    "sample_weights",
    "save_checkpoint",
    "split_dataset",
    "train",
    "train_cue_heads",
    "train_ensemble_classifier",
    "weighted_sampler",
    "write_history_csv",
]
