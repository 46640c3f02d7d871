"""Desk-scale style infusion: a fully inspectable generator and its losses."""

from .losses import (
    TrainingPair,
    baseline_grads,
    baseline_loss,
    baseline_update,
    combined_loss,
    discriminator_loss,
    nll_row_grads,
    policy_gradient_rows,
    prefix_scores,
    reconstruction_loss,
    supervised_loss,
)
from .model import (
    BOS,
    EOS,
    BaselineHead,
    InfusionError,
    SampleResult,
    ToyLM,
    beam_generate,
    load_lm,
    new_head,
    new_lm,
    postprocess,
    sample_sequence,
    save_lm,
    sequence_log_probs,
    truncate_repeats,
)
from .train import (
    EpochRow,
    InfusionConfig,
    TrainResult,
    generate_record,
    strip_boundaries,
    token_discriminator,
    train,
    write_generations,
    write_loss_curves,
)

__all__ = [
    "BOS",
    "EOS",
    "BaselineHead",
    "EpochRow",
    "InfusionConfig",
    "InfusionError",
    "SampleResult",
    "ToyLM",
    "TrainResult",
    "TrainingPair",
    "baseline_grads",
    "baseline_loss",
    "baseline_update",
    "beam_generate",
    "combined_loss",
    "discriminator_loss",
    "generate_record",
    "load_lm",
    "new_head",
    "new_lm",
    "nll_row_grads",
    "policy_gradient_rows",
    "postprocess",
    "prefix_scores",
    "reconstruction_loss",
    "sample_sequence",
    "save_lm",
    "sequence_log_probs",
    "strip_boundaries",
    "supervised_loss",
    "token_discriminator",
    "train",
    "truncate_repeats",
    "write_generations",
    "write_loss_curves",
]
