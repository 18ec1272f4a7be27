"""Fold-bound composite class-domain incremental learning benchmark."""

import json as _json
from pathlib import Path as _Path

from . import _cdil
from ._cdil import (
    ConfigError,
    LoadError,
    NumericalError,
    ProtocolError,
    RemappableHead,
    ShapeError,
    average_accuracy,
    final_accuracy,
    ridge_solve,
)

__all__ = [
    "ConfigError",
    "LoadError",
    "NumericalError",
    "ProtocolError",
    "ShapeError",
    "RemappableHead",
    "Learner",
    "average_accuracy",
    "final_accuracy",
    "ridge_solve",
    "default_synth_spec",
    "generate_stream",
    "write_stream",
    "load_manifest",
    "partition",
    "run_experiment",
    "format_report",
]


def default_synth_spec():
    """The benchmark-shaped synthetic spec as a dict."""
    return _json.loads(_cdil.default_synth_spec())


def generate_stream(spec=None):
    """Sessions of a synthetic stream as dicts with a (n, d) feature array."""
    return _cdil.generate_stream(_json.dumps(spec or {}))


def write_stream(directory, spec=None):
    """Writes manifest.json plus per-session CSVs; returns the manifest path."""
    return _Path(_cdil.write_stream(_json.dumps(spec or {}), str(directory)))


def load_manifest(path):
    return _cdil.load_manifest(str(path))


def partition(config, base_dir=""):
    """Per-session {sample_id: fold} maps for an experiment config."""
    return _cdil.partition(_json.dumps(config), str(base_dir))


def run_experiment(config, base_dir=""):
    """Runs every bound trial of config and returns the machine report."""
    return _json.loads(_cdil.run_experiment(_json.dumps(config), str(base_dir)))


def format_report(report):
    return _cdil.format_report(_json.dumps(report))


class Learner(_cdil.Learner):
    """Incremental learner over integer class indices."""

    def __init__(self, variant="finetune", input_dim=64, seed=0, **options):
        super().__init__(_json.dumps({"variant": variant, **options}), input_dim, seed)
