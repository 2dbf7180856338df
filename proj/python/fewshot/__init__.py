"""Few-shot evaluation over precomputed embeddings.

Thin wrappers around the C++ engine: embedding sets and FSE1 files, episode
sampling, cosine prototype classification, Sinkhorn-based prototype
transport, pseudo-pair and distillation losses, and the episode benchmark.
"""

import json

from ._fewshot import (
    EmbeddingSet,
    FewshotError,
    assign_pairs,
    bce_pair_loss,
    cosine_classify,
    cost_matrix,
    cross_entropy,
    ema_update,
    fuse_tokens,
    load,
    sample_episode,
    sinkhorn,
    sweep_csv,
    synthetic,
    transport_prototypes,
)
from . import _fewshot

__all__ = [
    "EmbeddingSet",
    "FewshotError",
    "assign_pairs",
    "bce_pair_loss",
    "cosine_classify",
    "cost_matrix",
    "cross_entropy",
    "ema_update",
    "evaluate",
    "fixture_losses",
    "fuse_tokens",
    "load",
    "sample_episode",
    "sinkhorn",
    "sweep_csv",
    "synthetic",
    "transport_prototypes",
]


def evaluate(embeddings, method="proto", n=5, k=1, q=15, episodes=2000, seed=0, epsilon=0.1,
             max_iters=1000, tol=1e-8, passes=1, metric="sq-euclidean-normalized", threads=1):
    """Runs the episode benchmark and returns the report as a dict."""
    return json.loads(_fewshot.run_eval_json(embeddings, method, n, k, q, episodes, seed, epsilon,
                                             max_iters, tol, passes, metric, threads))


def fixture_losses(fixtures, rho=None, normalize=False):
    """Evaluates loss fixtures (a dict or JSON text); returns {(name, label): value}."""
    text = fixtures if isinstance(fixtures, str) else json.dumps(fixtures)
    out = {}
    for line in _fewshot.evaluate_fixtures_json(text, rho, normalize).splitlines():
        name, label, value = line.split(" ")
        out[(name, label)] = float(value)
    return out
