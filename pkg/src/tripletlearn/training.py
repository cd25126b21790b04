"""SGD training loop: one mini-batch per epoch, features cached once.

An epoch is deliberately a single mini-batch pass: the batch is drawn,
every sample is embedded exactly once into a feature cache, triplets are
drawn over the cache, and one SGD step is taken from the accumulated
per-feature gradients. The learning rate starts at 0.01 and shrinks by
5% every 50 epochs down to a floor of 0.0005.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._rng import stream_rng
from .embedding import (
    EmbeddingNetwork,
    NetworkGradients,
    apply_sgd_step,
    embed_backward,
    embed_forward,
)
from .gallery import MixedGallery
from .loss import LossConfig, batch_triplet_terms
from .sampling import default_triplet_count, sample_minibatch, sample_triplets

__all__ = [
    "TrainConfig",
    "EpochStats",
    "learning_rate_at",
    "run_epoch",
    "train",
    "write_loss_curve",
]


@dataclass(frozen=True)
class TrainConfig:
    """Schedule, sampling sizes and loss weights for one training run.

    ``num_triplets=None`` resolves to half the batch triplet capacity.
    """

    lr_init: float = 0.01
    lr_decay_factor: float = 0.95
    lr_step_epochs: int = 50
    lr_floor: float = 0.0005
    epochs: int = 10_000
    P: int = 10
    K: int = 5
    num_triplets: int | None = None
    loss: LossConfig = field(default_factory=LossConfig)
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.lr_floor <= self.lr_init):
            raise ValueError("need 0 < lr_floor <= lr_init")
        if not (0 < self.lr_decay_factor < 1):
            raise ValueError("lr_decay_factor must lie in (0, 1)")
        if self.lr_step_epochs < 1:
            raise ValueError("lr_step_epochs must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.P < 1 or self.K < 1:
            raise ValueError("P and K must be positive")
        if self.num_triplets is not None and self.num_triplets < 0:
            raise ValueError("num_triplets must be nonnegative")

    @property
    def resolved_num_triplets(self) -> int:
        if self.num_triplets is not None:
            return self.num_triplets
        return default_triplet_count(self.P, self.K)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    lr: float
    mean_loss: float
    active_triplets: int


def learning_rate_at(epoch: int, cfg: TrainConfig) -> float:
    """Stepped geometric decay, clamped at the floor.

    lr = max(lr_floor, lr_init * lr_decay_factor ** (epoch // lr_step_epochs)).
    Nonincreasing in epoch; never below lr_floor.
    """
    if epoch < 0:
        raise ValueError("epoch must be nonnegative")
    steps = epoch // cfg.lr_step_epochs
    return max(cfg.lr_floor, cfg.lr_init * cfg.lr_decay_factor**steps)


def run_epoch(
    net: EmbeddingNetwork,
    gallery: MixedGallery,
    cfg: TrainConfig,
    epoch: int,
    rng: np.random.Generator,
) -> tuple[EmbeddingNetwork, EpochStats]:
    """One mini-batch pass: sample, embed once each, one SGD step.

    Every batch sample goes through the forward map exactly once per
    epoch regardless of how many triplets reference it, and its
    accumulated feature gradient is backpropagated exactly once.
    """
    batch = sample_minibatch(gallery, cfg.P, cfg.K, rng)
    caches = []
    features = np.empty((len(batch.samples), net.output_dim))
    for i, s in enumerate(batch.samples):
        feat, cache = embed_forward(net, s.input)
        features[i] = feat
        caches.append(cache)
    triplets = sample_triplets(batch, cfg.resolved_num_triplets, rng)
    losses, feature_grads = batch_triplet_terms(features, triplets, cfg.loss)
    total = NetworkGradients.zeros_like(net)
    for i in range(len(batch.samples)):
        total = total.add(embed_backward(net, caches[i], feature_grads[i]))
    lr = learning_rate_at(epoch, cfg)
    updated = apply_sgd_step(net, total, lr)
    stats = EpochStats(
        epoch=epoch,
        lr=lr,
        mean_loss=float(losses.mean()),
        active_triplets=int(np.count_nonzero(losses > 0)),
    )
    return updated, stats


def train(
    net: EmbeddingNetwork, gallery: MixedGallery, cfg: TrainConfig
) -> tuple[EmbeddingNetwork, list[EpochStats]]:
    """Run ``cfg.epochs`` sequential epochs; returns the full loss curve.

    All sampling draws from a single stream derived from ``cfg.seed``, so
    the trajectory is a pure function of (net, gallery, cfg) and repeated
    runs are bit-identical.
    """
    rng = stream_rng(cfg.seed, "train")
    stats: list[EpochStats] = []
    for epoch in range(cfg.epochs):
        net, epoch_stats = run_epoch(net, gallery, cfg, epoch, rng)
        stats.append(epoch_stats)
    return net, stats


def write_loss_curve(
    stats: Sequence[EpochStats], path: str | Path, comments: Sequence[str] = ()
) -> None:
    """CSV loss curve: ``epoch,lr,mean_loss,active_triplets``."""
    path = Path(path)
    lines = [f"# {c}" for c in comments]
    lines.append("epoch,lr,mean_loss,active_triplets")
    for s in stats:
        lines.append(f"{s.epoch},{s.lr!r},{s.mean_loss!r},{s.active_triplets}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
