"""Two-stage triplet generation over an identity-labeled gallery.

Stage one draws an identity-balanced mini-batch: P distinct identities,
K samples each. Stage two draws triplets over the batch positions, so the
expensive embedding of each batch sample happens once no matter how many
triplets reference it. Anchor/positive pairs are unordered (stored with
anchor index < positive index), matching the combinatorial count
P*(P-1) * C(K,2) * K of distinct triplets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gallery import MixedGallery, Sample

__all__ = [
    "SamplingError",
    "MiniBatch",
    "TripletIndices",
    "triplet_capacity",
    "default_triplet_count",
    "sample_minibatch",
    "sample_triplets",
]


class SamplingError(ValueError):
    """Batch or triplet sampling preconditions not met."""


@dataclass(frozen=True)
class TripletIndices:
    """(anchor, positive, negative) positions in a mini-batch sample list."""

    anchor: int
    positive: int
    negative: int


@dataclass(frozen=True)
class MiniBatch:
    """P identities with K samples each, flattened in identity blocks.

    ``samples[i*K:(i+1)*K]`` all belong to ``identities[i]``.
    """

    identities: tuple[str, ...]
    samples: tuple[Sample, ...]
    P: int
    K: int

    def __post_init__(self):
        object.__setattr__(self, "identities", tuple(self.identities))
        object.__setattr__(self, "samples", tuple(self.samples))
        if len(self.identities) != self.P:
            raise SamplingError("identity count != P")
        if len(set(self.identities)) != self.P:
            raise SamplingError("identities must be distinct")
        if len(self.samples) != self.P * self.K:
            raise SamplingError("sample count != P*K")
        for i, pid in enumerate(self.identities):
            block = self.samples[i * self.K : (i + 1) * self.K]
            if any(s.person_id != pid for s in block):
                raise SamplingError(f"block {i} contains samples of another identity")


def triplet_capacity(P: int, K: int) -> int:
    """Number of distinct triplets a P-identity, K-sample batch can yield.

    Ordered (anchor-identity, negative-identity) pair, unordered
    anchor/positive sample pair, any negative sample:
    P*(P-1) * C(K,2) * K. Zero when P < 2 or K < 2.
    """
    if P < 0 or K < 0:
        raise SamplingError("P and K must be nonnegative")
    return P * (P - 1) * (K * (K - 1) // 2) * K


def default_triplet_count(P: int, K: int) -> int:
    """Half the triplet capacity; capacity is always even since P*(P-1) is."""
    return triplet_capacity(P, K) // 2


def sample_minibatch(
    gallery: MixedGallery,
    P: int,
    K: int,
    rng: np.random.Generator,
    allow_replacement: bool = False,
) -> MiniBatch:
    """Draw P identities uniformly, then K of each identity's samples.

    Only identities owning at least K samples are eligible unless
    ``allow_replacement`` is set, in which case smaller identities are
    filled by sampling their members with replacement. Identities may span
    any mix of dataset tags. Raises :class:`SamplingError` when fewer than
    P identities are eligible.
    """
    if P < 1 or K < 1:
        raise SamplingError("P and K must be positive")
    if allow_replacement:
        eligible = list(gallery.index)
    else:
        eligible = [pid for pid, members in gallery.index.items() if len(members) >= K]
    if len(eligible) < P:
        raise SamplingError(
            f"need {P} identities with >= {K} samples, gallery has {len(eligible)}"
        )
    chosen = [eligible[i] for i in rng.choice(len(eligible), size=P, replace=False)]
    picked: list[Sample] = []
    for pid in chosen:
        members = gallery.index[pid]
        replace = len(members) < K
        pick = rng.choice(len(members), size=K, replace=replace)
        picked.extend(members[j] for j in pick)
    return MiniBatch(identities=tuple(chosen), samples=tuple(picked), P=P, K=K)


def sample_triplets(
    batch: MiniBatch,
    count: int | None,
    rng: np.random.Generator,
) -> list[TripletIndices]:
    """Draw ``count`` triplets over batch positions, with replacement.

    Each draw picks one identity uniformly, an unordered distinct pair of
    its K samples as (anchor, positive), then one of the other P-1
    identities and one of its samples as negative. ``count=None`` means
    half the batch's triplet capacity. Duplicate triplets across draws are
    expected and tolerated.
    """
    P, K = batch.P, batch.K
    if P < 2 or K < 2:
        raise SamplingError("triplet sampling needs P >= 2 and K >= 2")
    if count is None:
        count = default_triplet_count(P, K)
    if count < 0:
        raise SamplingError("count must be nonnegative")
    if count == 0:
        return []
    anchor_ident = rng.integers(0, P, size=count)
    first = rng.integers(0, K, size=count)
    second = rng.integers(0, K - 1, size=count)
    second = second + (second >= first)  # distinct, uniform over ordered pairs
    low = np.minimum(first, second)
    high = np.maximum(first, second)
    neg_ident = rng.integers(0, P - 1, size=count)
    neg_ident = neg_ident + (neg_ident >= anchor_ident)
    neg_sample = rng.integers(0, K, size=count)
    anchors = anchor_ident * K + low
    positives = anchor_ident * K + high
    negatives = neg_ident * K + neg_sample
    return [
        TripletIndices(anchor=int(a), positive=int(p), negative=int(n))
        for a, p, n in zip(anchors, positives, negatives)
    ]
