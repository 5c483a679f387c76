"""Diffusion-feature probing: schedules, probes, fusion and search."""

import json as _json

from ._core import (
    DfprobeError,
    NoiseSchedule,
    augment_caption,
    average_precision,
    cluster_quality,
    continuous_to_step,
    evaluate,
    noise,
    paired_t_test,
    predict,
    read_feature_cache,
    rescale_blocks,
    resolve_config,
    topk_accuracy,
    train_fused,
    train_probe,
    write_feature_cache,
)
from ._core import run_search as _run_search

__all__ = [
    "DfprobeError",
    "NoiseSchedule",
    "augment_caption",
    "average_precision",
    "cluster_quality",
    "continuous_to_step",
    "evaluate",
    "noise",
    "paired_t_test",
    "predict",
    "read_feature_cache",
    "rescale_blocks",
    "resolve_config",
    "run_search",
    "topk_accuracy",
    "train_fused",
    "train_probe",
    "write_feature_cache",
]


def run_search(config_path, overrides=(), exhaustive=False):
    """Runs the configured search and returns the report as a dict."""
    return _json.loads(_run_search(str(config_path), list(overrides), exhaustive))
