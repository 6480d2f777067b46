"""Graph-augmented masked contrastive pre-training for multichannel EEG."""

import json as _json

from . import _core
from ._core import (
    ConfigError,
    Error,
    ValidationError,
    accuracy,
    auroc,
    edge_weights,
    geodesic_distance,
    gradcheck,
    montage_labels,
    sha256_file,
    synth_pretrain,
    synth_task,
)

__all__ = [
    "ConfigError",
    "Error",
    "ValidationError",
    "accuracy",
    "auroc",
    "default_config",
    "edge_weights",
    "finetune",
    "geodesic_distance",
    "gradcheck",
    "montage_labels",
    "normalize_config",
    "pretrain",
    "sha256_file",
    "synth_pretrain",
    "synth_task",
]


def default_config():
    """Default run configuration as a dict."""
    return _json.loads(_core.default_config())


def normalize_config(config):
    """Fill defaults and validate; raises ConfigError on unknown keys."""
    return _json.loads(_core.normalize_config(_json.dumps(config)))


def pretrain(config, data_dir, out, progress=None):
    """Pre-train on a corpus directory and write a checkpoint; returns a summary dict."""
    return _json.loads(_core.pretrain(_json.dumps(config), str(data_dir), str(out), progress))


def finetune(checkpoint, task_dir, head="bendr", adjuster="linear", epochs=None, lr=None):
    """Cross-validated fine-tuning; returns per-fold metrics and their mean."""
    return _json.loads(_core.finetune(str(checkpoint), str(task_dir), head, adjuster, epochs, lr))
