"""Leave-one-out ranking metrics: AUC and Hit@K over the full catalog.

For user ``u`` with ground-truth item ``g`` the candidates are ``g`` plus every
item the user never interacted with. The rank of ``g`` counts tied candidates
as ranked ahead of it, so the primary AUC credits a negative only when ``g``
scores strictly higher. A tie-aware AUC (ties worth one half) is reported
alongside.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import SequenceDataset

SPLITS = ("validation", "test")


@dataclass
class GroundTruthStats:
    """Per-user counts of negatives scoring above and equal to the ground truth."""

    users: np.ndarray
    better: np.ndarray
    ties: np.ndarray
    negatives: np.ndarray

    @property
    def ranks(self) -> np.ndarray:
        return 1 + self.better + self.ties

    @property
    def n_candidates(self) -> np.ndarray:
        return self.negatives + 1


@dataclass
class EvalReport:
    split: str
    auc: float
    auc_ties_half: float
    hit_at_k: float
    k: int
    n_users: int
    stats: GroundTruthStats | None = field(default=None, repr=False)

    def to_dict(self) -> dict[str, object]:
        return {
            "split": self.split,
            "users": self.n_users,
            "auc": f"{self.auc:.6f}",
            "auc_ties_half": f"{self.auc_ties_half:.6f}",
            f"hit@{self.k}": f"{self.hit_at_k:.6f}",
        }

    def rank_lines(self, user_ids: list[str]) -> list[str]:
        """``user_id<TAB>rank<TAB>#candidates`` per evaluated user."""
        st = self.stats
        return [
            f"{user_ids[u]}\t{r}\t{c}"
            for u, r, c in zip(st.users.tolist(), st.ranks.tolist(), st.n_candidates.tolist())
        ]


def ground_truth_stats(model, ds: SequenceDataset, split: str, users=None, chunk: int = 256) -> GroundTruthStats:
    """Score every candidate for each user and count how many beat or tie the ground truth."""
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
    if users is None:
        users = np.arange(ds.n_users)
    users = np.asarray(users, dtype=np.int64)
    n_items = ds.n_items
    negatives = np.array([n_items - len(ds.user_items[u]) for u in users], dtype=np.int64)
    users = users[negatives > 0]
    negatives = negatives[negatives > 0]

    better = np.zeros(len(users), dtype=np.int64)
    ties = np.zeros(len(users), dtype=np.int64)
    for start in range(0, len(users), chunk):
        block = users[start:start + chunk]
        ctx = [ds.context(int(u), split) for u in block]
        prevs = np.array([c[0] for c in ctx], dtype=np.int64)
        truth = np.array([c[1] for c in ctx], dtype=np.int64)
        scores = np.asarray(model.score_matrix(block, prevs), dtype=np.float64)
        rows = np.arange(len(block))
        sg = scores[rows, truth][:, None]
        seen = np.zeros(scores.shape, dtype=bool)
        for r, u in enumerate(block):
            seen[r, ds.user_items[u]] = True
        better[start:start + len(block)] = ((scores > sg) & ~seen).sum(axis=1)
        ties[start:start + len(block)] = ((scores == sg) & ~seen).sum(axis=1)
    return GroundTruthStats(users, better, ties, negatives)


def rank_of_ground_truth(model, ds: SequenceDataset, u: int, split: str) -> int:
    if not 0 <= u < ds.n_users:
        raise IndexError(f"user index {u} out of range")
    st = ground_truth_stats(model, ds, split, users=[u])
    if len(st.users) == 0:
        raise ValueError(f"user {u} has no negative candidates")
    return int(st.ranks[0])


def _auc(st: GroundTruthStats, tie_credit: float) -> float:
    if len(st.users) == 0:
        return float("nan")
    wins = st.negatives - st.better - st.ties + tie_credit * st.ties
    return float(np.mean(wins / st.negatives))


def auc(model, ds: SequenceDataset, split: str = "test", ties: str = "strict") -> float:
    """Mean over users of the fraction of negatives ranked below the ground truth.

    ``ties="strict"`` gives tied negatives no credit; ``ties="half"`` gives them 0.5.
    """
    if ties not in ("strict", "half"):
        raise ValueError("ties must be 'strict' or 'half'")
    return _auc(ground_truth_stats(model, ds, split), 0.0 if ties == "strict" else 0.5)


def hit_at_k(model, ds: SequenceDataset, split: str = "test", k: int = 50) -> float:
    st = ground_truth_stats(model, ds, split)
    return float(np.mean(st.ranks <= k)) if len(st.users) else float("nan")


def evaluate(model, ds: SequenceDataset, split: str = "test", k: int = 50) -> EvalReport:
    st = ground_truth_stats(model, ds, split)
    return report_from_stats(st, split, k)


def report_from_stats(st: GroundTruthStats, split: str, k: int) -> EvalReport:
    hit = float(np.mean(st.ranks <= k)) if len(st.users) else float("nan")
    return EvalReport(split, _auc(st, 0.0), _auc(st, 0.5), hit, k, len(st.users), st)
