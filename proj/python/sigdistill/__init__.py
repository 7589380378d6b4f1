"""Signal dataset distillation in the time and frequency domains."""

from ._core import (
    DistillConfig,
    EvalConfig,
    GenConfig,
    SignalSet,
    dft_magnitude,
    distill,
    evaluate,
    generate_dataset,
    load_sigds,
    run_command,
    split_train_test,
    take_per_class,
)

__all__ = [
    "DistillConfig",
    "EvalConfig",
    "GenConfig",
    "SignalSet",
    "dft_magnitude",
    "distill",
    "evaluate",
    "generate_dataset",
    "load_sigds",
    "run_command",
    "split_train_test",
    "take_per_class",
]
