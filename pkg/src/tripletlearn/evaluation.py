"""Ranking evaluation: squared-L2 retrieval, top-k match curves, grid search.

For each query, the gallery is ranked by ascending squared Euclidean
distance (monotone-equivalent to L2) with stable tie-breaking by gallery
index; a query succeeds at rank k if any of its k nearest gallery items
shares its identity. Evaluation repeats over several random
query/gallery splits (one query per identity, rest as gallery) and
reports the averaged rates, pooled and optionally per source dataset.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from ._rng import stream_rng
from .embedding import EmbeddingNetwork, embed_forward
from .gallery import MixedGallery
from .training import TrainConfig, train

__all__ = [
    "OVERALL_KEY",
    "EvalProtocol",
    "CMCResult",
    "GridCell",
    "pairwise_sq_distances",
    "cmc_from_distances",
    "cmc_curve",
    "evaluate_repeated",
    "grid_search_weights",
    "write_result_table",
    "write_cmc_long",
]

# Key for the pooled row covering every dataset tag at once.
OVERALL_KEY = "all"


@dataclass(frozen=True)
class EvalProtocol:
    """Rank cutoffs, trial count and per-dataset reporting switch."""

    ks: tuple[int, ...] = (1, 5, 10, 20)
    trials: int = 10
    per_dataset: bool = False

    def __post_init__(self):
        ks = tuple(int(k) for k in self.ks)
        object.__setattr__(self, "ks", ks)
        if not ks or any(k < 1 for k in ks):
            raise ValueError("rank cutoffs must be >= 1")
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("rank cutoffs must be strictly increasing")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


@dataclass(frozen=True)
class CMCResult:
    """Match rates per dataset key and rank cutoff, averaged over trials.

    ``rates[OVERALL_KEY]`` always holds the pooled curve; per-tag entries
    appear when the protocol asks for them. ``excluded_identities`` counts
    identities that could not be queried (fewer than two samples).
    """

    rates: Mapping[str, Mapping[int, float]]
    trials: int
    excluded_identities: int = 0

    def top_rate(self, k: int, dataset: str = OVERALL_KEY) -> float:
        return self.rates[dataset][k]


def pairwise_sq_distances(queries: np.ndarray, gallery: np.ndarray) -> np.ndarray:
    """Matrix of squared Euclidean distances, entry (i, j) = ||q_i - g_j||^2."""
    queries = np.asarray(queries, dtype=np.float64)
    gallery = np.asarray(gallery, dtype=np.float64)
    if queries.ndim != 2 or gallery.ndim != 2:
        raise ValueError("queries and gallery must be 2-d arrays")
    if queries.shape[1] != gallery.shape[1]:
        raise ValueError(
            f"feature dimension mismatch: {queries.shape[1]} != {gallery.shape[1]}"
        )
    diff = queries[:, None, :] - gallery[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def cmc_from_distances(
    distances: np.ndarray,
    query_ids: Sequence[str],
    gallery_ids: Sequence[str],
    ks: Sequence[int],
) -> tuple[dict[int, float], int]:
    """Top-k rates from a precomputed distance matrix.

    Depends on the distances only through their ranking, with ties broken
    stably by gallery index. Queries without any same-identity gallery
    entry are excluded from the denominator; the count of exclusions is
    returned alongside the rates.
    """
    distances = np.asarray(distances, dtype=np.float64)
    q_ids = np.asarray(query_ids, dtype=object)
    g_ids = np.asarray(gallery_ids, dtype=object)
    n_gallery = g_ids.shape[0]
    if n_gallery == 0:
        raise ValueError("empty gallery")
    if distances.shape != (q_ids.shape[0], n_gallery):
        raise ValueError("distance matrix shape does not match id lists")
    present = np.isin(q_ids, np.unique(g_ids))
    excluded = int(np.count_nonzero(~present))
    if not present.any():
        raise ValueError("no query has a same-identity gallery entry")
    order = np.argsort(distances[present], axis=1, kind="stable")
    ranked_match = g_ids[order] == q_ids[present][:, None]
    hit_by_rank = np.maximum.accumulate(ranked_match, axis=1)
    rates = {
        int(k): float(hit_by_rank[:, min(int(k), n_gallery) - 1].mean()) for k in ks
    }
    return rates, excluded


def cmc_curve(
    query_feats: np.ndarray,
    query_ids: Sequence[str],
    gallery_feats: np.ndarray,
    gallery_ids: Sequence[str],
    ks: Sequence[int],
) -> tuple[dict[int, float], int]:
    """Top-k rates of squared-L2 retrieval from raw feature matrices."""
    distances = pairwise_sq_distances(query_feats, gallery_feats)
    return cmc_from_distances(distances, query_ids, gallery_ids, ks)


def _embed_all(net: EmbeddingNetwork, gallery: MixedGallery) -> np.ndarray:
    feats = np.empty((len(gallery.samples), net.output_dim))
    for i, s in enumerate(gallery.samples):
        feats[i], _ = embed_forward(net, s.input)
    return feats


def evaluate_repeated(
    net: EmbeddingNetwork,
    gallery: MixedGallery,
    protocol: EvalProtocol,
    rng: np.random.Generator,
) -> CMCResult:
    """Average top-k rates over repeated one-query-per-identity splits.

    Each trial draws one sample per identity as the query and leaves the
    rest in the retrieval pool. Identities with a single sample are never
    queried (counted in ``excluded_identities``) but still serve as
    distractors. Per-dataset rows restrict both queries and pool to one
    tag; namespaced identities never span tags, so same-identity matches
    are always available inside the restriction.
    """
    feats = _embed_all(net, gallery)
    ids = np.asarray([s.person_id for s in gallery.samples], dtype=object)
    tags = np.asarray([s.dataset_tag for s in gallery.samples], dtype=object)
    members = {
        pid: np.flatnonzero(ids == pid) for pid in gallery.person_ids
    }
    eligible = [pid for pid in gallery.person_ids if len(members[pid]) >= 2]
    excluded = len(gallery.person_ids) - len(eligible)
    if not eligible:
        raise ValueError("no identity has the >= 2 samples a query split needs")

    keys: list[str] = [OVERALL_KEY]
    if protocol.per_dataset:
        keys.extend(gallery.dataset_tags)
    sums: dict[str, dict[int, float]] = {key: {k: 0.0 for k in protocol.ks} for key in keys}
    counts: dict[str, int] = {key: 0 for key in keys}

    for _ in range(protocol.trials):
        query_pos = np.array(
            [members[pid][rng.integers(len(members[pid]))] for pid in eligible]
        )
        in_pool = np.ones(len(gallery.samples), dtype=bool)
        in_pool[query_pos] = False
        pool_pos = np.flatnonzero(in_pool)
        for key in keys:
            if key == OVERALL_KEY:
                q_sel = query_pos
                g_sel = pool_pos
            else:
                q_sel = query_pos[tags[query_pos] == key]
                g_sel = pool_pos[tags[pool_pos] == key]
            if len(q_sel) == 0:
                continue
            rates, _ = cmc_curve(
                feats[q_sel], ids[q_sel], feats[g_sel], ids[g_sel], protocol.ks
            )
            for k, r in rates.items():
                sums[key][k] += r
            counts[key] += 1

    averaged = {
        key: {k: sums[key][k] / counts[key] for k in protocol.ks}
        for key in keys
        if counts[key] > 0
    }
    return CMCResult(rates=averaged, trials=protocol.trials, excluded_identities=excluded)


@dataclass(frozen=True)
class GridCell:
    """One grid-search row: the weights tried and the resulting rates."""

    gamma: float
    beta: float
    result: CMCResult


def grid_search_weights(
    net_init: EmbeddingNetwork,
    gallery: MixedGallery,
    gammas: Sequence[float],
    betas: Sequence[float],
    base_cfg: TrainConfig,
    protocol: EvalProtocol | None = None,
) -> list[GridCell]:
    """Train and evaluate one model per (gamma, beta) pair.

    Every cell starts from the same initial parameters and the same seed,
    so rows differ only through the loss weights. The returned table is
    sorted by pooled top-1 rate, best first (stable for ties).
    """
    gammas = list(gammas)
    betas = list(betas)
    if not gammas or not betas:
        raise ValueError("gamma and beta grids must be nonempty")
    if protocol is None:
        protocol = EvalProtocol()
    cells: list[GridCell] = []
    for gamma in gammas:
        for beta in betas:
            cfg = replace(base_cfg, loss=replace(base_cfg.loss, gamma=gamma, beta=beta))
            trained, _ = train(net_init, gallery, cfg)
            rng = stream_rng(base_cfg.seed, "splits")
            result = evaluate_repeated(trained, gallery, protocol, rng)
            cells.append(GridCell(gamma=float(gamma), beta=float(beta), result=result))
    lead_k = 1 if 1 in protocol.ks else protocol.ks[0]
    return sorted(cells, key=lambda c: -c.result.top_rate(lead_k))


def write_result_table(
    cells: Sequence[GridCell],
    ks: Sequence[int],
    path: str | Path,
    comments: Sequence[str] = (),
) -> None:
    """CSV table: ``gamma,beta,dataset,top1,...,trials`` rows, one per dataset key."""
    path = Path(path)
    lines = [f"# {c}" for c in comments]
    header = ["gamma", "beta", "dataset"] + [f"top{k}" for k in ks] + ["trials"]
    lines.append(",".join(header))
    for cell in cells:
        for dataset, rates in cell.result.rates.items():
            row = [repr(cell.gamma), repr(cell.beta), dataset]
            row += [repr(rates[k]) for k in ks]
            row.append(str(cell.result.trials))
            lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_cmc_long(
    result: CMCResult,
    ks: Sequence[int],
    path: str | Path,
    comments: Sequence[str] = (),
) -> None:
    """Long-format companion CSV (``k,rate``) of the pooled curve, for plotting."""
    path = Path(path)
    lines = [f"# {c}" for c in comments]
    lines.append("k,rate")
    for k in ks:
        lines.append(f"{k},{result.rates[OVERALL_KEY][k]!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
