"""Python bindings for the gradbal C++ core."""

import json

from ._gradbal import (
    GradbalError,
    apply_artifact,
    artifact_types,
    base_pattern,
    compute_alpha,
    dft2,
    generate_dataset,
    gradcheck,
    load_dataset,
    mean_of_15,
    rotating_epoch,
    rotating_offset,
    weighted_ce_weights,
)
from . import _gradbal

__all__ = [
    "GradbalError",
    "apply_artifact",
    "artifact_types",
    "base_pattern",
    "compute_alpha",
    "dft2",
    "generate_dataset",
    "gradcheck",
    "load_dataset",
    "mean_of_15",
    "metrics_report",
    "rotating_epoch",
    "rotating_offset",
    "train",
    "weighted_ce_weights",
]


def metrics_report(y_true, y_pred):
    """Weighted, macro and micro scores plus their mean, as a dict."""
    return json.loads(_gradbal._report_json(list(y_true), list(y_pred)))


def train(config, data=""):
    """Run one experiment; `config` is a dict in the CLI config format."""
    return json.loads(_gradbal._train_json(json.dumps(config), str(data)))
