"""Directed item-to-item edges: loading, random 80/10/10 split, training and evaluation."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from ..evaluation import EvalReport, GroundTruthStats, report_from_stats
from ..seeding import substream
from ..training import TrainConfig, TrainReport, fit
from .features import FeatureMatrix
from .models import PairModel, make_pair_model

TRAIN, VALIDATION, TEST = 0, 1, 2
_SPLIT_CODES = {"train": TRAIN, "validation": VALIDATION, "test": TEST}


@dataclass
class EdgeDataset:
    """Directed edges ``src -> dst`` over dense item indices, each tagged with a split."""

    item_ids: list[str]
    src: np.ndarray
    dst: np.ndarray
    split: np.ndarray

    def __post_init__(self):
        self.src = np.asarray(self.src, dtype=np.int64)
        self.dst = np.asarray(self.dst, dtype=np.int64)
        self.split = np.asarray(self.split, dtype=np.int8)
        n = self.n_items
        self.linked_keys = np.unique(self.src * n + self.dst)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    def part(self, name: str) -> np.ndarray:
        return np.flatnonzero(self.split == _SPLIT_CODES[name])

    def is_linked(self, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
        """True where ``src -> dst`` is an edge in any split, or ``src == dst``."""
        keys = src * self.n_items + dst
        pos = np.minimum(np.searchsorted(self.linked_keys, keys), len(self.linked_keys) - 1)
        return (self.linked_keys[pos] == keys) | (src == dst)


def read_edges(path: str | os.PathLike, delimiter: str = "\t") -> list[tuple[str, str]]:
    out = []
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh, delimiter=delimiter), 1):
                if not row or not "".join(row).strip():
                    continue
                if len(row) < 2 or not row[0].strip() or not row[1].strip():
                    raise DataError(f"{path}:{lineno}: expected src_item{delimiter!r}dst_item")
                out.append((row[0].strip(), row[1].strip()))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return out


def split_edges(
    pairs: list[tuple[str, str]], item_ids: list[str], seed=0, fractions=(0.8, 0.1, 0.1)
) -> EdgeDataset:
    """Assign each edge to train/validation/test by a seeded random permutation.

    Duplicate edges are collapsed; edges naming unknown items are rejected.
    """
    if not pairs:
        raise DataError("no edges")
    index = {iid: k for k, iid in enumerate(item_ids)}
    seen = set()
    src, dst = [], []
    for a, b in pairs:
        if a not in index or b not in index:
            raise DataError(f"edge {a} -> {b} names an item without features")
        if (a, b) in seen:
            continue
        seen.add((a, b))
        src.append(index[a])
        dst.append(index[b])
    n = len(src)
    order = substream(seed, "split").permutation(n)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    split = np.full(n, TEST, dtype=np.int8)
    split[order[:n_train]] = TRAIN
    split[order[n_train:n_train + n_val]] = VALIDATION
    return EdgeDataset(list(item_ids), np.array(src), np.array(dst), split)


class EdgeSampler:
    """Training rows ``(i, j, j'')``: a uniform train edge and a uniform item not linked from ``i``."""

    def __init__(self, edges: EdgeDataset):
        self.edges = edges
        self.train = edges.part("train")
        if len(self.train) == 0:
            raise DataError("no training edges")
        out_deg = np.bincount(edges.src, minlength=edges.n_items)
        if np.any(out_deg[edges.src[self.train]] >= edges.n_items - 1):
            raise DataError("an item links to every other item; no negative exists")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        e = self.train[rng.integers(len(self.train), size=n)]
        src = self.edges.src[e]
        neg = rng.integers(self.edges.n_items, size=n)
        bad = np.flatnonzero(self.edges.is_linked(src, neg))
        while len(bad):
            neg[bad] = rng.integers(self.edges.n_items, size=len(bad))
            bad = bad[self.edges.is_linked(src[bad], neg[bad])]
        return np.stack([src, self.edges.dst[e], neg], axis=1)


def edge_stats(model: PairModel, edges: EdgeDataset, split: str) -> GroundTruthStats:
    """For each held-out edge ``i -> j``, count unlinked items scoring above or equal to ``j``.

    Candidates for an edge are ``j`` plus every item ``i`` has no edge to in
    any split, excluding ``i`` itself.
    """
    idx = edges.part(split)
    better = np.zeros(len(idx), dtype=np.int64)
    ties = np.zeros(len(idx), dtype=np.int64)
    negs = np.zeros(len(idx), dtype=np.int64)
    n = edges.n_items
    by_src: dict[int, list[int]] = {}
    for pos, e in enumerate(idx):
        by_src.setdefault(int(edges.src[e]), []).append(pos)
    for i, positions in by_src.items():
        scores = model.score_items(i)
        cand = ~edges.is_linked(np.full(n, i, dtype=np.int64), np.arange(n))
        sc = scores[cand]
        for pos in positions:
            sg = scores[edges.dst[idx[pos]]]
            better[pos] = int(np.sum(sc > sg))
            ties[pos] = int(np.sum(sc == sg))
            negs[pos] = len(sc)
    keep = negs > 0
    return GroundTruthStats(idx[keep], better[keep], ties[keep], negs[keep])


def eval_i2i(model: PairModel, edges: EdgeDataset, split: str = "test", k: int = 10) -> EvalReport:
    return report_from_stats(edge_stats(model, edges, split), split, k)


def i2i_auc(model: PairModel, edges: EdgeDataset, split: str = "validation") -> float:
    st = edge_stats(model, edges, split)
    return float(np.mean((st.negatives - st.better - st.ties) / st.negatives)) if len(st.users) else float("nan")


def train_i2i(
    edges: EdgeDataset,
    features: FeatureMatrix,
    kind: str | PairModel = "i2i-transrec",
    config: TrainConfig | None = None,
    init_scale: float = 0.1,
) -> tuple[PairModel, TrainReport]:
    """Pairwise ranking of true tails over sampled unlinked items, early-stopped on validation AUC."""
    config = config or TrainConfig(dim=100, learning_rate=0.01)
    if isinstance(kind, PairModel):
        model = kind
    else:
        model = make_pair_model(kind, features, config.dim, seed=substream(config.seed, "init"), init_scale=init_scale)
    if config.max_iterations == 0:
        return model, TrainReport()
    sampler = EdgeSampler(edges)
    n = config.samples_per_iteration or len(sampler.train)
    return fit(
        model, sampler.draw, lambda m: i2i_auc(m, edges, "validation"), config, n, substream(config.seed, "sampling")
    )
