"""Synthetic word vectors with controlled synonym structure."""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence

import numpy as np

from src.core.exceptions import InvalidInputError, UnknownNameError

logger = logging.getLogger(__name__)

MEMBER_NOISE = 0.25


@dataclass
class EmbeddingTable:
    """Unit-length vectors for every word of a closed vocabulary."""

    words: List[str]
    vectors: np.ndarray  # (len(words), dim)
    _index: Dict[str, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index = {word: i for i, word in enumerate(self.words)}

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def vector(self, word: str) -> np.ndarray:
        try:
            return self.vectors[self._index[word]]
        except KeyError:
            raise UnknownNameError(f"{word!r} is not in the embedding table")

    def cosine(self, a: str, b: str) -> float:
        # rows are unit length
        return float(np.dot(self.vector(a), self.vector(b)))


def build_embedding_table(clusters: Mapping[str, Sequence[str]], seed: int, dim: int) -> EmbeddingTable:
    """Build vectors where words of one cluster point the same way.

    Cluster centroids are orthonormal (QR of a gaussian matrix). Each member is
    its centroid plus a noise vector of norm 0.25 orthogonal to every centroid,
    then normalized, so synonyms have cosine >= 0.88 and words from different
    clusters have cosine <= 0.06.
    """
    names = list(clusters)
    if not names:
        raise InvalidInputError("embedding table needs at least one cluster")
    if len(names) >= dim:
        raise InvalidInputError(
            f"{len(names)} clusters cannot be kept apart in {dim} dimensions (need dim > clusters)"
        )

    seen = set()
    for name in names:
        members = clusters[name]
        if not members:
            raise InvalidInputError(f"cluster {name!r} is empty")
        for word in members:
            if word in seen:
                raise InvalidInputError(f"word {word!r} appears in more than one cluster")
            seen.add(word)

    rng = np.random.default_rng(seed)
    centroids, _ = np.linalg.qr(rng.normal(size=(dim, len(names))))

    words: List[str] = []
    rows: List[np.ndarray] = []
    for c, name in enumerate(names):
        for word in clusters[name]:
            noise = rng.normal(size=dim)
            noise -= centroids @ (centroids.T @ noise)
            noise *= MEMBER_NOISE / np.linalg.norm(noise)
            vec = centroids[:, c] + noise
            rows.append(vec / np.linalg.norm(vec))
            words.append(word)

    logger.debug(f"Built embedding table: {len(words)} words, {len(names)} clusters, dim {dim}")
    return EmbeddingTable(words=words, vectors=np.stack(rows))
