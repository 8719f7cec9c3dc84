"""Bag-of-words item features and the sparse triplet file format."""

from __future__ import annotations

import os
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np
import scipy.sparse as sp

from ..errors import DataError

# Fixed English stop list. Extending it changes vocabularies, so treat it as part of the format.
STOP_WORDS = frozenset(
    """
    a about above after again against all also am an and any are aren as at be because been before being
    below between both but by can cannot could couldn did didn do does doesn doing don down during each
    even ever few for from further get got had hadn has hasn have haven having he her here hers herself
    him himself his how however i if in into is isn it its itself just let ll me more most much must
    mustn my myself no nor not now of off on once one only or other ought our ours ourselves out over own
    re s same shan she should shouldn so some such t than that the their theirs them themselves then there
    these they this those through to too under until up us ve very was wasn we were weren what when where
    which while who whom why will with won would wouldn you your yours yourself yourselves
    """.split()
)

_TOKEN = re.compile(r"[a-z]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


def default_terms(tokens: list[str], stop_words=STOP_WORDS) -> list[str]:
    """Non-stop-word unigrams plus adjacent bigrams whose words are both kept.

    A part-of-speech filter (nouns, adjectives, adjective-noun bigrams) can be
    swapped in through the ``terms`` argument of :func:`extract_features`.
    """
    keep = [t not in stop_words for t in tokens]
    out = [t for t, k in zip(tokens, keep) if k]
    out += [f"{a} {b}" for a, b, ka, kb in zip(tokens, tokens[1:], keep, keep[1:]) if ka and kb]
    return out


@dataclass
class FeatureMatrix:
    """Non-negative ``n_items x D`` matrix with one row per item id."""

    matrix: sp.csr_matrix
    item_ids: list[str]
    vocabulary: list[str] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.matrix = sp.csr_matrix(self.matrix, dtype=np.float64)
        self.matrix.sum_duplicates()
        self.matrix.sort_indices()
        if self.matrix.shape[0] != len(self.item_ids):
            raise ValueError("one feature row per item id is required")
        if not np.isfinite(self.matrix.data).all():
            raise DataError("feature values must be finite")
        if (self.matrix.data < 0).any():
            raise DataError("feature values must be non-negative")

    @property
    def n_features(self) -> int:
        return self.matrix.shape[1]

    def reindex(self, item_ids: list[str]) -> FeatureMatrix:
        """Rows for ``item_ids`` in that order; unknown items get all-zero rows."""
        pos = {iid: k for k, iid in enumerate(self.item_ids)}
        src = np.array([pos.get(i, -1) for i in item_ids], dtype=np.int64)
        rows = self.matrix[np.maximum(src, 0)].tolil()
        for r in np.flatnonzero(src < 0):
            rows[r, :] = 0
        return FeatureMatrix(rows.tocsr(), list(item_ids), list(self.vocabulary), dict(self.meta))

    def with_zero_column(self) -> FeatureMatrix:
        m = sp.hstack([self.matrix, sp.csr_matrix((self.matrix.shape[0], 1))]).tocsr()
        return FeatureMatrix(m, list(self.item_ids), self.vocabulary + [""], dict(self.meta))


def extract_features(
    corpus: Mapping[str, str] | Iterable[tuple[str, str]],
    n_features: int = 5000,
    terms: Callable[[list[str]], list[str]] = default_terms,
) -> FeatureMatrix:
    """Count the ``n_features`` most frequent terms per item.

    ``corpus`` maps item id to its text (several reviews can be joined). Terms
    are ranked by total corpus frequency, ties broken lexicographically.
    """
    if n_features < 1:
        raise ValueError("n_features must be >= 1")
    pairs = list(corpus.items()) if isinstance(corpus, Mapping) else list(corpus)
    if not pairs:
        raise DataError("empty corpus")
    docs = [Counter(terms(tokenize(text))) for _, text in pairs]
    total: Counter = Counter()
    for d in docs:
        total.update(d)
    if not total:
        raise DataError("empty vocabulary: no terms survive tokenization and stop-word removal")
    vocab = [t for t, _ in sorted(total.items(), key=lambda kv: (-kv[1], kv[0]))[:n_features]]
    col = {t: c for c, t in enumerate(vocab)}
    rows, cols, vals = [], [], []
    for r, d in enumerate(docs):
        for t, n in d.items():
            if t in col:
                rows.append(r)
                cols.append(col[t])
                vals.append(float(n))
    m = sp.csr_matrix((vals, (rows, cols)), shape=(len(pairs), len(vocab)))
    pos_filter = "none" if terms is default_terms else getattr(terms, "__name__", "custom")
    return FeatureMatrix(m, [str(i) for i, _ in pairs], vocab, {"pos_filter": pos_filter, "n_features": len(vocab)})


def read_corpus(path: str | os.PathLike) -> dict[str, str]:
    """``item_id<TAB>text`` lines; repeated ids have their texts joined."""
    out: dict[str, list[str]] = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                item, sep, text = line.partition("\t")
                if not sep or not item:
                    raise DataError(f"{path}:{lineno}: expected item_id<TAB>text")
                out.setdefault(item, []).append(text)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    return {k: " ".join(v) for k, v in out.items()}


def save_triplets(fm: FeatureMatrix, path: str | os.PathLike, vocab_path: str | os.PathLike | None = None) -> None:
    """Write ``item_id<TAB>column<TAB>value`` lines, preceded by a ``#features<TAB>D`` line."""
    coo = fm.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"#features\t{fm.n_features}\n")
        for k in order:
            fh.write(f"{fm.item_ids[coo.row[k]]}\t{coo.col[k]}\t{float(coo.data[k])!r}\n")
        # items without any feature still need a row
        empty = np.flatnonzero(np.diff(fm.matrix.indptr) == 0)
        for r in empty:
            fh.write(f"#item\t{fm.item_ids[r]}\n")
    if vocab_path is not None:
        Path(vocab_path).write_text("".join(f"{t}\n" for t in fm.vocabulary), encoding="utf-8")


def load_triplets(path: str | os.PathLike, n_features: int | None = None) -> FeatureMatrix:
    """Read the triplet format; rows are item ids in order of first appearance."""
    items: dict[str, int] = {}
    rows, cols, vals = [], [], []
    declared = None
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.rstrip("\n").split("\t")
                if not parts or not parts[0]:
                    continue
                if parts[0] == "#features":
                    declared = int(parts[1])
                    continue
                if parts[0] == "#item":
                    items.setdefault(parts[1], len(items))
                    continue
                if len(parts) != 3:
                    raise DataError(f"{path}:{lineno}: expected item_id<TAB>column<TAB>value")
                try:
                    c, v = int(parts[1]), float(parts[2])
                except ValueError as exc:
                    raise DataError(f"{path}:{lineno}: bad column or value") from exc
                if c < 0:
                    raise DataError(f"{path}:{lineno}: negative column")
                rows.append(items.setdefault(parts[0], len(items)))
                cols.append(c)
                vals.append(v)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    width = n_features or declared or (max(cols) + 1 if cols else 0)
    if cols and max(cols) >= width:
        raise DataError(f"{path}: column {max(cols)} exceeds feature count {width}")
    m = sp.csr_matrix((vals, (rows, cols)), shape=(len(items), width))
    return FeatureMatrix(m, list(items))
