"""Desk-scale triplet similarity learning.

Identity-labeled vector galleries, a hand-written feed-forward embedding,
a weighted triplet ranking loss with exact gradients, two-stage
batch/triplet sampling, an SGD loop with a stepped learning-rate
schedule, and top-k retrieval evaluation with weight grid search.
"""

from .embedding import (
    EmbeddingNetwork,
    ForwardCache,
    NetworkGradients,
    apply_sgd_step,
    embed_backward,
    embed_forward,
    init_network,
    load_checkpoint,
    save_checkpoint,
)
from .evaluation import (
    CMCResult,
    EvalProtocol,
    GridCell,
    cmc_curve,
    evaluate_repeated,
    grid_search_weights,
    pairwise_sq_distances,
)
from .gallery import (
    MixedGallery,
    Sample,
    generate_synthetic,
    load_manifest,
    merge_galleries,
    save_manifest,
)
from .loss import (
    LossConfig,
    TripletFeatures,
    batch_triplet_loss,
    improved_triplet_loss,
    triplet_loss_gradients,
)
from .sampling import (
    MiniBatch,
    TripletIndices,
    sample_minibatch,
    sample_triplets,
    triplet_capacity,
)
from .training import EpochStats, TrainConfig, learning_rate_at, run_epoch, train

__version__ = "0.1.0"

__all__ = [
    "CMCResult",
    "EmbeddingNetwork",
    "EpochStats",
    "EvalProtocol",
    "ForwardCache",
    "GridCell",
    "LossConfig",
    "MiniBatch",
    "MixedGallery",
    "NetworkGradients",
    "Sample",
    "TrainConfig",
    "TripletFeatures",
    "TripletIndices",
    "apply_sgd_step",
    "batch_triplet_loss",
    "cmc_curve",
    "embed_backward",
    "embed_forward",
    "evaluate_repeated",
    "generate_synthetic",
    "grid_search_weights",
    "improved_triplet_loss",
    "init_network",
    "learning_rate_at",
    "load_checkpoint",
    "load_manifest",
    "merge_galleries",
    "pairwise_sq_distances",
    "run_epoch",
    "sample_minibatch",
    "sample_triplets",
    "save_checkpoint",
    "save_manifest",
    "train",
    "triplet_capacity",
    "triplet_loss_gradients",
]
