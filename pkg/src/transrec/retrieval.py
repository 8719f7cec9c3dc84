"""Exact top-N retrieval by nearest-neighbor search over bias-absorbed item points.

Biases are shifted so the largest is zero (``beta' = beta - max beta <= 0``)
and appended to each item point as an extra coordinate: ``sqrt(-beta')`` for
squared L2, ``beta'`` itself for L1. With the query ``(gamma_i + T_u; 0)``,
the augmented distance equals ``d(gamma_i + T_u, gamma_j) - beta'_j``, so the
nearest neighbors are exactly the top-scoring items.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .models.transrec import DistanceKind, TransRec


@dataclass(frozen=True)
class RetrievalIndex:
    points: np.ndarray
    shifted_bias: np.ndarray
    bias_max: float
    distance: DistanceKind

    @property
    def n_items(self) -> int:
        return self.points.shape[0]


def build_index(model: TransRec) -> RetrievalIndex:
    if not model.all_finite():
        raise ValueError("cannot index a model with non-finite parameters")
    bmax = float(model.beta.max())
    shifted = model.beta - bmax
    extra = shifted if model.distance is DistanceKind.L1 else np.sqrt(-shifted)
    points = np.hstack([model.gamma, extra[:, None]])
    points.setflags(write=False)
    shifted.setflags(write=False)
    return RetrievalIndex(points, shifted, bmax, model.distance)


def augmented_query(model: TransRec, u: int, i: int) -> np.ndarray:
    return np.append(model.query_point(u, i), 0.0)


def augmented_distances(index: RetrievalIndex, query: np.ndarray) -> np.ndarray:
    diff = index.points - query
    if index.distance is DistanceKind.L1:
        return np.abs(diff).sum(axis=1)
    return np.einsum("ij,ij->i", diff, diff)


def recommend(
    index: RetrievalIndex, model: TransRec, u: int, i: int, top_n: int = 10, exclude_seen: bool = False, seen=()
) -> list[tuple[int, float]]:
    """The ``top_n`` nearest items to the query as ``(item, score)``, best first.

    Scores are reported on the model's own scale, ``beta_j - d(query, gamma_j)``.
    Equal distances are ordered by item index.
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    dist = augmented_distances(index, augmented_query(model, u, i))
    candidates = np.ones(index.n_items, dtype=bool)
    if exclude_seen:
        candidates[np.asarray(list(seen), dtype=np.int64)] = False
    cand = np.flatnonzero(candidates)
    if len(cand) == 0:
        raise ValueError("no candidate items left after exclusion")
    order = cand[np.lexsort((cand, dist[cand]))][:top_n]
    return [(int(j), float(index.bias_max - dist[j])) for j in order]

