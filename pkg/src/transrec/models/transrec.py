"""Translation-based sequential model: items are points, users are translations.

The score of candidate ``j`` after item ``i`` for user ``u`` is
``beta[j] - d(gamma[i] + t + t_user[u], gamma[j])``, with item points kept
inside the unit L2 ball.
"""

from __future__ import annotations

import enum

import numpy as np
from numba import njit

from .base import Regularization, RankingModel, apply_rows, logistic_weight


class DistanceKind(enum.Enum):
    L1 = "l1"
    SQUARED_L2 = "l2"


def distance(kind: DistanceKind, x, y) -> float:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    diff = x - y
    if kind is DistanceKind.L1:
        return float(np.abs(diff).sum())
    return float(diff @ diff)


def project_to_ball(v) -> np.ndarray:
    """``v / max(1, ||v||)``: the nearest point of the closed unit L2 ball."""
    v = np.asarray(v, dtype=np.float64)
    return v / max(1.0, float(np.linalg.norm(v)))


def random_directions(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    """``n`` independent uniformly distributed unit vectors."""
    x = rng.standard_normal((n, dim))
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    # a zero Gaussian draw has probability zero, but guard the division anyway
    while np.any(norms == 0):
        bad = norms[:, 0] == 0
        x[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / norms


class TransRec(RankingModel):
    """Item points ``gamma``, biases ``beta``, global translation ``t`` and user offsets ``t_user``."""

    def __init__(self, n_users: int, n_items: int, dim: int, distance: DistanceKind = DistanceKind.SQUARED_L2):
        super().__init__(n_users, n_items, dim)
        self.distance = DistanceKind(distance)
        self.gamma = np.zeros((n_items, dim))
        self.beta = np.zeros(n_items)
        self.t_global = np.zeros(dim)
        self.t_user = np.zeros((n_users, dim))

    @property
    def kind(self) -> str:
        return "transrec-l1" if self.distance is DistanceKind.L1 else "transrec-l2"

    def user_translation(self, u: int) -> np.ndarray:
        return self.t_global + self.t_user[u]

    def query_point(self, u: int, i: int) -> np.ndarray:
        return self.gamma[i] + self.t_global + self.t_user[u]

    def score(self, u: int, i: int, j: int) -> float:
        return float(self.beta[j] - distance(self.distance, self.query_point(u, i), self.gamma[j]))

    def score_items(self, u: int, i: int) -> np.ndarray:
        diff = self.gamma - self.query_point(u, i)
        if self.distance is DistanceKind.L1:
            return self.beta - np.abs(diff).sum(axis=1)
        return self.beta - np.einsum("ij,ij->i", diff, diff)

    def score_matrix(self, users, prevs) -> np.ndarray:
        users = np.asarray(users, dtype=np.int64)
        prevs = np.asarray(prevs, dtype=np.int64)
        if self.distance is DistanceKind.L1:
            return super().score_matrix(users, prevs)
        q = self.gamma[prevs] + self.t_global + self.t_user[users]
        sq = np.einsum("ij,ij->i", q, q)[:, None] - 2.0 * (q @ self.gamma.T)
        sq += np.einsum("ij,ij->i", self.gamma, self.gamma)[None, :]
        return self.beta[None, :] - sq

    def blocks(self) -> dict[str, np.ndarray]:
        return {"beta": self.beta, "gamma": self.gamma, "t_global": self.t_global, "t_user": self.t_user}

    def hyper(self) -> dict[str, object]:
        return {"distance": self.distance.value}

    def reg_classes(self) -> dict[str, str]:
        return {"beta": "bias", "gamma": "embed", "t_global": "translation", "t_user": "translation"}

    def sgd_batch(self, triples, lr, reg: Regularization, project: bool = True) -> np.ndarray:
        triples = np.ascontiguousarray(triples, dtype=np.int64).reshape(-1, 4)
        deltas = np.empty(len(triples))
        _transrec_sgd(
            self.gamma, self.beta, self.t_global, self.t_user, triples, float(lr),
            float(reg.embed), float(reg.bias), float(reg.translation),
            self.distance is DistanceKind.L1, bool(project), deltas,
        )
        return deltas


def init_params(
    n_users: int, n_items: int, dim: int, seed=None, distance: DistanceKind = DistanceKind.SQUARED_L2
) -> TransRec:
    """Unit-direction item points and global translation; zero biases and user offsets."""
    if n_users < 1 or n_items < 1 or dim < 1:
        raise ValueError("sizes must be >= 1")
    rng = np.random.default_rng(seed)
    model = TransRec(n_users, n_items, dim, distance)
    model.gamma[:] = random_directions(rng, n_items, dim)
    model.t_global[:] = random_directions(rng, 1, dim)[0]
    return model


@njit(cache=True)
def _sign(x):
    if x > 0:
        return 1.0
    if x < 0:
        return -1.0
    return 0.0


@njit(cache=True)
def _transrec_sgd(gamma, beta, t, tu, triples, lr, lam_e, lam_b, lam_t, l1, project, deltas):
    K = gamma.shape[1]
    q = np.empty(K)
    dq = np.empty(K)
    grads = np.empty((3, K))
    rows = np.empty(3, dtype=np.int64)
    for n in range(triples.shape[0]):
        u = triples[n, 0]
        i = triples[n, 1]
        j = triples[n, 2]
        jn = triples[n, 3]
        dj = 0.0
        djn = 0.0
        for k in range(K):
            q[k] = gamma[i, k] + t[k] + tu[u, k]
            a = q[k] - gamma[j, k]
            b = q[k] - gamma[jn, k]
            if l1:
                dj += abs(a)
                djn += abs(b)
            else:
                dj += a * a
                djn += b * b
        delta = beta[j] - dj - beta[jn] + djn
        deltas[n] = delta
        w = logistic_weight(delta)

        for k in range(K):
            a = q[k] - gamma[j, k]
            b = q[k] - gamma[jn, k]
            if l1:
                sa = _sign(a)
                sb = _sign(b)
                dq[k] = sb - sa
                grads[1, k] = sa
                grads[2, k] = -sb
            else:
                dq[k] = 2.0 * (b - a)
                grads[1, k] = 2.0 * a
                grads[2, k] = -2.0 * b
            grads[0, k] = dq[k]

        rows[0] = i
        rows[1] = j
        rows[2] = jn
        apply_rows(gamma, rows, grads, 3, w, lr, lam_e)
        beta[j] += lr * (w - lam_b * beta[j])
        beta[jn] += lr * (-w - lam_b * beta[jn])
        for k in range(K):
            t[k] += lr * (w * dq[k] - lam_t * t[k])
            tu[u, k] += lr * (w * dq[k] - lam_t * tu[u, k])

        if project:
            for a in range(3):
                r = rows[a]
                s = 0.0
                for k in range(K):
                    s += gamma[r, k] * gamma[r, k]
                if s > 1.0:
                    nrm = np.sqrt(s)
                    for k in range(K):
                        gamma[r, k] /= nrm
