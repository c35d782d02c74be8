"""Cross-domain sequence tagging with relevance-weighted distillation.

The native core trains Bi-LSTM-CRF taggers with a source-to-target knowledge
transfer loop; this package wraps its command driver and exposes the chain
inference and span metric primitives directly.
"""
from __future__ import annotations

from ._core import (
    ConfigError,
    DataError,
    NumericError,
    ShapeError,
    crf_log_partition,
    crf_marginals,
    crf_nll,
    crf_viterbi,
    run_command,
    span_f1,
    token_accuracy,
)

__version__ = "1.0.0"


def _settings(kwargs):
    pairs = []
    for key, value in kwargs.items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        pairs.append((key, str(value)))
    return pairs


def synth(**kwargs):
    """Generate a two-domain synthetic corpus into out_dir."""
    run_command("synth", _settings(kwargs))


def train(**kwargs):
    """Train a tagger; writes metrics.csv and checkpoint.txt into out_dir."""
    run_command("train", _settings(kwargs))


def evaluate(**kwargs):
    """Score a checkpoint on a test corpus; writes eval_metrics.csv."""
    run_command("evaluate", _settings(kwargs))


def relevance_dump(**kwargs):
    """Write per-token relevance scores for a corpus to relevance.tsv."""
    run_command("relevance-dump", _settings(kwargs))


__all__ = [
    "ConfigError",
    "DataError",
    "NumericError",
    "ShapeError",
    "crf_log_partition",
    "crf_marginals",
    "crf_nll",
    "crf_viterbi",
    "evaluate",
    "relevance_dump",
    "run_command",
    "span_f1",
    "synth",
    "token_accuracy",
    "train",
]
