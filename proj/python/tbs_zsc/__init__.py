"""Theory-of-Mind-based best response selection for zero-shot coordination."""

import json

from . import _core
from ._core import (
    ArtifactError,
    ConfigError,
    Env,
    TbsError,
    alignment_cost,
    kl_bernoulli,
    lambda_targets,
    select_k,
    similarity_matrix,
    spectral_clustering,
    stage_names,
)

__all__ = [
    "ArtifactError",
    "ConfigError",
    "Env",
    "TbsError",
    "ablate",
    "alignment_cost",
    "config_hash",
    "default_config",
    "evaluate",
    "kl_bernoulli",
    "lambda_targets",
    "run_stage",
    "select_k",
    "similarity_matrix",
    "spectral_clustering",
    "stage_names",
]


def default_config(env="signaling"):
    """Default run configuration for an environment, as a dict."""
    return json.loads(_core.default_config(env))


def config_hash(config):
    return _core.config_hash(json.dumps(config))


def run_stage(config, stage, out_dir="", workers=0, compute_upstream=True):
    """Run one pipeline stage and return its artifact directory."""
    return _core.run_stage(json.dumps(config), stage, out_dir, workers, compute_upstream)


def evaluate(config, out_dir="", workers=0, trace=False):
    """Run the pipeline through evaluation and return the report as a dict."""
    return json.loads(_core.evaluate(json.dumps(config), out_dir, workers, trace))


def ablate(config, axis, grid, out_dir="", workers=0):
    """Evaluate every grid value of an ablation axis and return the report."""
    return json.loads(_core.ablate(json.dumps(config), axis, [str(g) for g in grid], out_dir, workers))
