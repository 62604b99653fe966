"""Touchscreen-digit biometric verification.

Core pipeline: capture (stroke ingestion) -> features (21 time functions)
-> dtw / rnn (pair scoring) -> evaluation (protocol, EER, password search)
-> auth/service (enrolment store and the two-stage JSON endpoint).
"""

from .capture import Dataset, DigitSample, TouchPoint, load_dataset, preprocess
from .dtw import Template, dtw_match, score_against_template, score_pair
from .errors import InkpassError
from .evaluation import (
    EvalReport,
    ScoreSet,
    build_score_pools,
    compute_eer,
    dtw_adapted_system,
    dtw_baseline_system,
    fuse,
    load_report,
    pin_distribution,
    run_digit_table,
    search_passwords,
    select_functions,
)
from .features import (
    CHANNEL_NAMES,
    FunctionMatrix,
    FunctionSubset,
    extract,
    extract_normalized,
    znorm,
)
from .rnn import (
    NetworkConfig,
    NetworkParams,
    TrainConfig,
    build_pairs,
    forward_pair,
    init_network,
    load_checkpoint,
    save_checkpoint,
    train,
)
from .sffs import sffs_select
from .synth import synthetic_dataset

__version__ = "1.0.0"

__all__ = [
    "CHANNEL_NAMES",
    "Dataset",
    "DigitSample",
    "EvalReport",
    "FunctionMatrix",
    "FunctionSubset",
    "InkpassError",
    "NetworkConfig",
    "NetworkParams",
    "ScoreSet",
    "Template",
    "TouchPoint",
    "TrainConfig",
    "build_pairs",
    "build_score_pools",
    "compute_eer",
    "dtw_adapted_system",
    "dtw_baseline_system",
    "dtw_match",
    "extract",
    "extract_normalized",
    "forward_pair",
    "fuse",
    "init_network",
    "load_checkpoint",
    "load_dataset",
    "load_report",
    "pin_distribution",
    "preprocess",
    "run_digit_table",
    "save_checkpoint",
    "score_against_template",
    "score_pair",
    "search_passwords",
    "select_functions",
    "sffs_select",
    "synthetic_dataset",
    "train",
    "znorm",
]
