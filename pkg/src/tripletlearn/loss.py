"""Weighted triplet ranking loss with exact analytical gradients.

The hinge is

    L = max(0, gamma * d_pos - beta * d_neg + alpha)

where d_pos = ||f0 - fp||^2 and d_neg = ||f0 - fn||^2 are squared
Euclidean distances (no square root anywhere), alpha is the margin and
gamma/beta weight the pull on same-identity pairs against the push on
different-identity pairs. gamma = beta = 1 recovers the unweighted
triplet loss. Batch aggregation uses the mean over triplets so the
learning-rate scale does not depend on how many triplets were sampled.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .sampling import TripletIndices

__all__ = [
    "LossConfig",
    "TripletFeatures",
    "squared_distance",
    "improved_triplet_loss",
    "triplet_loss_gradients",
    "batch_triplet_terms",
    "batch_triplet_loss",
]


@dataclass(frozen=True)
class LossConfig:
    """Margin and distance weights of the hinge."""

    alpha: float = 1.0
    gamma: float = 1.0
    beta: float = 0.3

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha (margin) must be nonnegative")
        if self.gamma <= 0:
            raise ValueError("gamma (positive-pair weight) must be positive")
        if self.beta <= 0:
            raise ValueError("beta (negative-pair weight) must be positive")


@dataclass(frozen=True)
class TripletFeatures:
    """Embedded anchor / positive / negative feature vectors."""

    f0: np.ndarray
    fp: np.ndarray
    fn: np.ndarray

    def __post_init__(self):
        arrays = {}
        for name in ("f0", "fp", "fn"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if v.ndim != 1:
                raise ValueError(f"{name} must be a 1-d vector")
            if not np.isfinite(v).all():
                raise ValueError(f"{name} contains non-finite entries")
            arrays[name] = v
        if not (arrays["f0"].shape == arrays["fp"].shape == arrays["fn"].shape):
            raise ValueError("triplet features must share one dimension")
        for name, v in arrays.items():
            object.__setattr__(self, name, v)


def squared_distance(u: np.ndarray, v: np.ndarray) -> float:
    """||u - v||^2, the distance form used throughout the loss."""
    d = np.asarray(u, dtype=np.float64) - np.asarray(v, dtype=np.float64)
    return float(np.dot(d, d))


def _hinge_argument(t: TripletFeatures, cfg: LossConfig) -> float:
    d_pos = squared_distance(t.f0, t.fp)
    d_neg = squared_distance(t.f0, t.fn)
    return cfg.gamma * d_pos - cfg.beta * d_neg + cfg.alpha


def improved_triplet_loss(t: TripletFeatures, cfg: LossConfig) -> float:
    """max(0, gamma * ||f0-fp||^2 - beta * ||f0-fn||^2 + alpha)."""
    return max(0.0, _hinge_argument(t, cfg))


def triplet_loss_gradients(
    t: TripletFeatures, cfg: LossConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact gradients (dL/df0, dL/dfp, dL/dfn).

    On the flat side of the hinge (argument <= 0, including the kink) all
    three gradients are exactly zero.
    """
    dim = t.f0.shape[0]
    if _hinge_argument(t, cfg) <= 0:
        z = np.zeros(dim)
        return z, z.copy(), z.copy()
    pos_diff = t.f0 - t.fp
    neg_diff = t.f0 - t.fn
    g0 = 2.0 * cfg.gamma * pos_diff - 2.0 * cfg.beta * neg_diff
    gp = -2.0 * cfg.gamma * pos_diff
    gn = 2.0 * cfg.beta * neg_diff
    return g0, gp, gn


def _triplet_index_array(
    triplets: Sequence[TripletIndices], n_features: int
) -> np.ndarray:
    idx = np.array([(t.anchor, t.positive, t.negative) for t in triplets], dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= n_features):
        bad = idx[(idx < 0) | (idx >= n_features)][0]
        raise IndexError(f"triplet index {bad} out of range for {n_features} features")
    return idx


def batch_triplet_terms(
    features: np.ndarray, triplets: Sequence[TripletIndices], cfg: LossConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Per-triplet losses and the gradient of their mean w.r.t. each feature.

    ``features`` is the (n, d) cache of embedded batch samples; triplet
    indices refer into its rows. A feature referenced by several triplets
    accumulates all of their gradient contributions (in fixed row order,
    so results do not depend on scheduling). Returns ``(losses, grads)``
    with ``losses`` of shape (T,) and ``grads`` of shape (n, d).
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError("features must be a 2-d (n, d) array")
    if len(triplets) == 0:
        raise ValueError("mean over an empty triplet list is undefined")
    idx = _triplet_index_array(triplets, features.shape[0])
    f0 = features[idx[:, 0]]
    fp = features[idx[:, 1]]
    fn = features[idx[:, 2]]
    pos_diff = f0 - fp
    neg_diff = f0 - fn
    d_pos = np.einsum("ij,ij->i", pos_diff, pos_diff)
    d_neg = np.einsum("ij,ij->i", neg_diff, neg_diff)
    arg = cfg.gamma * d_pos - cfg.beta * d_neg + cfg.alpha
    losses = np.maximum(arg, 0.0)
    active = (arg > 0)[:, None]
    n_triplets = len(triplets)
    g0 = (2.0 * cfg.gamma * pos_diff - 2.0 * cfg.beta * neg_diff) * active
    gp = (-2.0 * cfg.gamma * pos_diff) * active
    gn = (2.0 * cfg.beta * neg_diff) * active
    grads = np.zeros_like(features)
    np.add.at(grads, idx[:, 0], g0)
    np.add.at(grads, idx[:, 1], gp)
    np.add.at(grads, idx[:, 2], gn)
    grads /= n_triplets
    return losses, grads


def batch_triplet_loss(
    features: np.ndarray, triplets: Sequence[TripletIndices], cfg: LossConfig
) -> tuple[float, np.ndarray]:
    """Mean triplet loss over the sampled set and its per-feature gradients."""
    losses, grads = batch_triplet_terms(features, triplets, cfg)
    return float(losses.mean()), grads
