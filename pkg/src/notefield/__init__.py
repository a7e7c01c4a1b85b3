"""Pairwise maximum-entropy modeling of multi-voice symbolic music.

Train sparse log-linear models of note co-occurrence on piano-roll corpora,
generate new material with constrained Metropolis-Hastings sampling,
reharmonize melodies across key changes, and measure how much of the output
is cited from, discovered near, or invented beyond the source corpus.
"""

from .corpus import (
    Corpus,
    Piece,
    beat_quantize,
    corpus_from_doc,
    corpus_to_doc,
    decode_rhythm_grid,
    encode_rhythm_grid,
    load_corpus,
    save_corpus,
    split_by_mode,
    transpose_to_c,
)
from .errors import NotefieldError
from .evaluator import (
    baseline_models,
    classify_chords,
    classify_quads,
    pair_statistics_table,
    restitution_discovery,
)
from .harmonizer import detect_keys, reharmonize
from .model import (
    Model,
    Topology,
    canonicalize,
    conditional_distribution,
    count_features,
    energy,
    exact_partition_oracle,
    load_model,
    save_model,
)
from .sampler import ConstraintSet, SamplerConfig, default_step_budget, run
from .trainer import TrainingConfig, build_datasets, fit, objective_and_gradient, precompute_stats

__version__ = "0.1.0"

__all__ = [
    "Corpus", "Piece", "beat_quantize", "corpus_from_doc", "corpus_to_doc",
    "decode_rhythm_grid", "encode_rhythm_grid", "load_corpus", "save_corpus",
    "split_by_mode", "transpose_to_c",
    "NotefieldError",
    "baseline_models", "classify_chords", "classify_quads",
    "pair_statistics_table", "restitution_discovery",
    "detect_keys", "reharmonize",
    "Model", "Topology", "canonicalize", "conditional_distribution",
    "count_features", "energy", "exact_partition_oracle", "load_model", "save_model",
    "ConstraintSet", "SamplerConfig", "default_step_budget", "run",
    "TrainingConfig", "build_datasets", "fit", "objective_and_gradient",
    "precompute_stats",
    "__version__",
]
