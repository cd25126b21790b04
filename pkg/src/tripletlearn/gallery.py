"""Labeled sample galleries: manifest I/O, multi-source merging, synthetic data.

A gallery is an immutable pool of identity-labeled vectors. Identities are
namespaced by their source dataset tag (``"<tag>/<raw_id>"``) at load time,
so merging pools from different sources can never collapse two unrelated
people who happen to share a raw label.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "GalleryError",
    "ManifestError",
    "MergeError",
    "Sample",
    "MixedGallery",
    "load_manifest",
    "save_manifest",
    "merge_galleries",
    "generate_synthetic",
]


class GalleryError(ValueError):
    """Invalid gallery contents or construction arguments."""


class ManifestError(GalleryError):
    """Malformed manifest file; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class MergeError(GalleryError):
    """Galleries that cannot be merged."""


@dataclass(frozen=True)
class Sample:
    """One labeled input vector.

    ``person_id`` is globally unique after namespacing; ``dataset_tag``
    names the source pool the sample came from.
    """

    sample_id: str
    person_id: str
    dataset_tag: str
    input: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.input, dtype=np.float64)
        if vec.ndim != 1:
            raise GalleryError(f"sample {self.sample_id!r}: input must be a 1-d vector")
        object.__setattr__(self, "input", vec)


@dataclass(frozen=True)
class MixedGallery:
    """Immutable pool of samples indexed by person identity.

    Safe for concurrent reads once constructed; never mutated afterwards.
    """

    samples: tuple[Sample, ...]
    input_dim: int
    index: Mapping[str, tuple[Sample, ...]] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        samples = tuple(self.samples)
        object.__setattr__(self, "samples", samples)
        if self.input_dim < 1:
            raise GalleryError("input_dim must be positive")
        seen: set[str] = set()
        index: dict[str, list[Sample]] = {}
        for s in samples:
            if s.input.shape[0] != self.input_dim:
                raise GalleryError(
                    f"sample {s.sample_id!r} has dimension {s.input.shape[0]}, "
                    f"gallery expects {self.input_dim}"
                )
            if s.sample_id in seen:
                raise GalleryError(f"duplicate sample_id {s.sample_id!r}")
            seen.add(s.sample_id)
            index.setdefault(s.person_id, []).append(s)
        object.__setattr__(self, "index", {pid: tuple(ss) for pid, ss in index.items()})

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def person_ids(self) -> tuple[str, ...]:
        """Identities in first-seen order."""
        return tuple(self.index)

    @property
    def dataset_tags(self) -> tuple[str, ...]:
        """Distinct source tags in first-seen order."""
        seen: dict[str, None] = {}
        for s in self.samples:
            seen.setdefault(s.dataset_tag, None)
        return tuple(seen)


_FIXED_COLUMNS = ("sample_id", "person_id", "dataset")


def load_manifest(path: str | Path) -> MixedGallery:
    """Read a manifest CSV into a gallery.

    Expected layout: header ``sample_id,person_id,dataset,v0,...,v{D-1}``
    followed by one row per sample. Lines starting with ``#`` are
    provenance comments and are skipped. Person ids are stored namespaced
    as ``"<dataset>/<raw_id>"``.

    Raises :class:`ManifestError` (with the offending line number) on a
    malformed row, an inconsistent vector dimension, or a duplicate
    sample id.
    """
    path = Path(path)
    samples: list[Sample] = []
    seen_ids: set[str] = set()
    dim: int | None = None
    header_seen = False
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line or line.startswith("#"):
                continue
            fields = line.split(",")
            if not header_seen:
                if len(fields) < 4 or tuple(fields[:3]) != _FIXED_COLUMNS:
                    raise ManifestError(
                        lineno,
                        "header must be 'sample_id,person_id,dataset,v0,...'",
                    )
                expected = [f"v{i}" for i in range(len(fields) - 3)]
                if fields[3:] != expected:
                    raise ManifestError(
                        lineno, "vector columns must be named v0..v{D-1} in order"
                    )
                dim = len(fields) - 3
                header_seen = True
                continue
            if len(fields) != 3 + dim:
                raise ManifestError(
                    lineno,
                    f"expected {3 + dim} fields ({dim}-dim vector), got {len(fields)}",
                )
            sample_id, raw_person, tag = fields[0], fields[1], fields[2]
            if not sample_id or not raw_person or not tag:
                raise ManifestError(lineno, "empty sample_id, person_id or dataset")
            try:
                vec = np.array([float(v) for v in fields[3:]], dtype=np.float64)
            except ValueError as exc:
                raise ManifestError(lineno, f"non-numeric vector entry: {exc}") from exc
            if sample_id in seen_ids:
                raise ManifestError(lineno, f"duplicate sample_id {sample_id!r}")
            seen_ids.add(sample_id)
            samples.append(
                Sample(
                    sample_id=sample_id,
                    person_id=f"{tag}/{raw_person}",
                    dataset_tag=tag,
                    input=vec,
                )
            )
    if not header_seen:
        raise ManifestError(1, "missing header line")
    assert dim is not None
    return MixedGallery(samples=tuple(samples), input_dim=dim)


def save_manifest(
    gallery: MixedGallery, path: str | Path, comments: Sequence[str] = ()
) -> None:
    """Write a gallery back to manifest CSV form (inverse of load).

    The namespace prefix is stripped from person ids so a reload
    reproduces identical identities. Floats are written with ``repr`` and
    round-trip exactly.
    """
    path = Path(path)
    lines = [f"# {c}" for c in comments]
    header = ",".join(_FIXED_COLUMNS + tuple(f"v{i}" for i in range(gallery.input_dim)))
    lines.append(header)
    for s in gallery.samples:
        prefix = s.dataset_tag + "/"
        raw = s.person_id[len(prefix):] if s.person_id.startswith(prefix) else s.person_id
        vec = ",".join(repr(float(v)) for v in s.input)
        lines.append(f"{s.sample_id},{raw},{s.dataset_tag},{vec}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def merge_galleries(galleries: Iterable[MixedGallery]) -> MixedGallery:
    """Union of several galleries sharing one input dimension.

    Identities never collapse across sources because person ids carry the
    dataset namespace; the merged sample count is the sum of the inputs.
    Raises :class:`MergeError` on an input-dimension mismatch and
    :class:`GalleryError` if sample ids collide across inputs.
    """
    galleries = list(galleries)
    if not galleries:
        raise MergeError("nothing to merge: need at least one gallery")
    dim = galleries[0].input_dim
    for g in galleries[1:]:
        if g.input_dim != dim:
            raise MergeError(f"input_dim mismatch: {g.input_dim} != {dim}")
    merged: list[Sample] = []
    for g in galleries:
        merged.extend(g.samples)
    return MixedGallery(samples=tuple(merged), input_dim=dim)


def generate_synthetic(
    n_ids: int,
    per_id: int,
    dim: int,
    cluster_spread: float,
    noise: float,
    seed: int,
    dataset_tag: str = "synthetic",
) -> MixedGallery:
    """Gaussian-cluster gallery: one isotropic cluster per identity.

    Identity centers are drawn from N(0, cluster_spread^2 I); each sample
    is its center plus N(0, noise^2 I) noise. Deterministic in ``seed``.
    """
    if n_ids < 1 or per_id < 1 or dim < 1:
        raise GalleryError("n_ids, per_id and dim must be positive")
    if cluster_spread < 0 or noise < 0:
        raise GalleryError("cluster_spread and noise must be nonnegative")
    rng = np.random.default_rng(seed)
    centers = rng.normal(0.0, cluster_spread, size=(n_ids, dim))
    samples: list[Sample] = []
    for i in range(n_ids):
        for j in range(per_id):
            vec = centers[i] + rng.normal(0.0, noise, size=dim)
            samples.append(
                Sample(
                    sample_id=f"{dataset_tag}-{i:04d}-{j:03d}",
                    person_id=f"{dataset_tag}/p{i:04d}",
                    dataset_tag=dataset_tag,
                    input=np.asarray(vec, dtype=np.float64),
                )
            )
    return MixedGallery(samples=tuple(samples), input_dim=dim)
