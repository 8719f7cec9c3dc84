"""Common surface for every sequential ranking model."""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
from numba import njit


@dataclass(frozen=True)
class Regularization:
    """L2 weights per parameter class.

    ``embed`` covers item/user factor matrices, ``bias`` the item biases and
    ``translation`` the global and per-user translation vectors.
    """

    embed: float = 0.0
    bias: float = 0.0
    translation: float = 0.0

    @classmethod
    def shared(cls, lam: float) -> Regularization:
        return cls(lam, lam, lam)

    def __post_init__(self):
        if min(self.embed, self.bias, self.translation) < 0:
            raise ValueError("regularization weights must be >= 0")


class RankingModel:
    """Scores ``(user, previous item, candidate)`` triples; higher means more likely next.

    Subclasses store their parameters as named float64 arrays (see
    :meth:`blocks`) and, when trainable, implement :meth:`sgd_batch` with a
    compiled kernel that applies one pairwise-ranking ascent step per triple.
    """

    kind: str = ""
    trainable = True

    def __init__(self, n_users: int, n_items: int, dim: int):
        if n_users < 0 or n_items < 1 or dim < 1:
            raise ValueError("need n_items >= 1 and dim >= 1")
        self.n_users = int(n_users)
        self.n_items = int(n_items)
        self.dim = int(dim)

    # -- scoring ---------------------------------------------------------
    def score(self, u: int, i: int, j: int) -> float:
        return float(self.score_items(u, i)[j])

    def score_items(self, u: int, i: int) -> np.ndarray:
        """Scores of every item as the next one after ``i`` for user ``u``."""
        raise NotImplementedError

    def score_matrix(self, users: np.ndarray, prevs: np.ndarray) -> np.ndarray:
        """Row ``n`` holds :meth:`score_items` for ``(users[n], prevs[n])``."""
        return np.stack([self.score_items(int(u), int(i)) for u, i in zip(users, prevs)])

    # -- parameters ------------------------------------------------------
    def blocks(self) -> dict[str, np.ndarray]:
        """Parameter arrays by name, in serialization order."""
        raise NotImplementedError

    def hyper(self) -> dict[str, object]:
        """Non-array settings needed to rebuild the model."""
        return {}

    def reg_classes(self) -> dict[str, str]:
        """Map from block name to its :class:`Regularization` field."""
        return {name: "embed" for name in self.blocks()}

    def copy(self) -> RankingModel:
        return copy.deepcopy(self)

    def all_finite(self) -> bool:
        return all(np.isfinite(b).all() for b in self.blocks().values())

    def regularizer(self, reg: Regularization) -> float:
        """L2 penalty ``sum_c lambda_c * ||theta_c||^2`` over all parameters."""
        classes = self.reg_classes()
        return float(sum(getattr(reg, classes[n]) * np.sum(b * b) for n, b in self.blocks().items()))

    # -- training --------------------------------------------------------
    def sgd_batch(
        self, triples: np.ndarray, lr: float, reg: Regularization, project: bool = True
    ) -> np.ndarray:
        """Apply one ascent step per ``(u, i, j, j')`` row, in order.

        Returns the pre-update score differences ``p(u,i,j) - p(u,i,j')``.
        """
        raise NotImplementedError


@njit(cache=True)
def apply_rows(mat, rows, grads, nrows, w, lr, lam):
    """Ascent update on up to three rows of ``mat``, merging repeated rows.

    ``grads[a]`` is the gradient for ``rows[a]``; a row listed twice gets the
    summed gradient and a single shrinkage term.
    """
    K = mat.shape[1]
    for a in range(nrows):
        r = rows[a]
        seen = False
        for b in range(a):
            if rows[b] == r:
                seen = True
        if seen:
            continue
        for k in range(K):
            g = grads[a, k]
            for b in range(a + 1, nrows):
                if rows[b] == r:
                    g += grads[b, k]
            mat[r, k] += lr * (w * g - lam * mat[r, k])


@njit(cache=True)
def logistic_weight(delta):
    """sigma(-delta), the ascent weight of a triple with score gap ``delta``."""
    if delta >= 0:
        e = np.exp(-delta)
        return e / (1.0 + e)
    return 1.0 / (1.0 + np.exp(delta))


def log_sigmoid(x):
    """Numerically stable ``ln sigma(x)``; finite for any finite ``x``."""
    x = np.asarray(x, dtype=np.float64)
    return -np.logaddexp(0.0, -x)
