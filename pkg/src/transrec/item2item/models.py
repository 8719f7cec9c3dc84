"""Content-based pair scorers over item feature vectors.

* ``i2i-transrec``: ``-||E f_i + t - E f_j||^2`` with a linear embedding ``E``
  and a translation ``t``; unconstrained, directional.
* ``wnn``: ``-||w o (f_i - f_j)||^2``, a learned per-feature weighting.
* ``lmt``: ``-||W f_i - W f_j||^2``, a low-rank Mahalanobis transform.

Every kernel takes rows ``(i, j, j')`` and ascends ``ln sigma(s(i,j) - s(i,j'))``.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..models.base import Regularization, logistic_weight
from ..models.transrec import random_directions
from .features import FeatureMatrix


class PairModel:
    kind = ""

    def __init__(self, n_items: int, n_features: int, dim: int):
        if n_items < 1 or n_features < 1 or dim < 1:
            raise ValueError("n_items, n_features and dim must be >= 1")
        self.n_items = int(n_items)
        self.n_features = int(n_features)
        self.dim = int(dim)
        self.features: FeatureMatrix | None = None

    def attach(self, features: FeatureMatrix) -> PairModel:
        if features.matrix.shape != (self.n_items, self.n_features):
            raise ValueError(
                f"features are {features.matrix.shape}, model expects {(self.n_items, self.n_features)}"
            )
        self.features = features
        return self

    @property
    def F(self):
        if self.features is None:
            raise ValueError("no feature matrix attached")
        return self.features.matrix

    def score(self, i: int, j: int) -> float:
        return float(self.score_items(i)[j])

    def score_items(self, i: int) -> np.ndarray:
        raise NotImplementedError

    def blocks(self) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def hyper(self) -> dict:
        return {"n_features": self.n_features}

    def reg_classes(self) -> dict[str, str]:
        return {n: "embed" for n in self.blocks()}

    def all_finite(self) -> bool:
        return all(np.isfinite(b).all() for b in self.blocks().values())

    def regularizer(self, reg: Regularization) -> float:
        classes = self.reg_classes()
        return float(sum(getattr(reg, classes[n]) * np.sum(b * b) for n, b in self.blocks().items()))

    def copy(self) -> PairModel:
        out = empty_pair_model(self.kind, self.n_items, self.dim, **self.hyper())
        for name, arr in out.blocks().items():
            arr[...] = self.blocks()[name]
        out.features = self.features
        return out

    def _csr(self):
        F = self.F
        return F.indptr.astype(np.int64), F.indices.astype(np.int64), F.data


class TransRecContent(PairModel):
    kind = "i2i-transrec"

    def __init__(self, n_items, n_features, dim=100):
        super().__init__(n_items, n_features, dim)
        self.E = np.zeros((n_features, dim))
        self.t = np.zeros(dim)

    def embed(self) -> np.ndarray:
        return np.asarray(self.F @ self.E)

    def score(self, i, j):
        f = self.F
        zi = np.asarray(f[i] @ self.E).ravel()
        zj = np.asarray(f[j] @ self.E).ravel()
        d = zi + self.t - zj
        return float(-(d @ d))

    def score_items(self, i):
        Z = self.embed()
        diff = Z - (Z[i] + self.t)
        return -np.einsum("ij,ij->i", diff, diff)

    def blocks(self):
        return {"E": self.E, "t": self.t}

    def hyper(self):
        return {"n_features": self.n_features}

    def reg_classes(self):
        return {"E": "embed", "t": "translation"}

    def sgd_batch(self, triples, lr, reg: Regularization, project=True):
        triples = np.ascontiguousarray(triples, dtype=np.int64).reshape(-1, 3)
        deltas = np.empty(len(triples))
        indptr, indices, data = self._csr()
        _content_sgd(self.E, self.t, indptr, indices, data, triples, float(lr), float(reg.embed),
                     float(reg.translation), deltas)
        return deltas


class WNN(PairModel):
    kind = "wnn"

    def __init__(self, n_items, n_features, dim=1):
        super().__init__(n_items, n_features, 1)
        self.w = np.zeros(n_features)

    def score(self, i, j):
        d = np.asarray((self.F[i] - self.F[j]).todense()).ravel() * self.w
        return float(-(d @ d))

    def score_items(self, i):
        F = self.F
        w2 = self.w * self.w
        sq = np.asarray(F.multiply(F) @ w2).ravel()
        fi = np.asarray(F[i].todense()).ravel()
        cross = np.asarray(F @ (w2 * fi)).ravel()
        return -(sq[i] + sq - 2.0 * cross)

    def blocks(self):
        return {"w": self.w}

    def sgd_batch(self, triples, lr, reg: Regularization, project=True):
        triples = np.ascontiguousarray(triples, dtype=np.int64).reshape(-1, 3)
        deltas = np.empty(len(triples))
        indptr, indices, data = self._csr()
        _wnn_sgd(self.w, indptr, indices, data, triples, float(lr), float(reg.embed), deltas)
        return deltas


class LMT(PairModel):
    kind = "lmt"

    def __init__(self, n_items, n_features, dim=100):
        super().__init__(n_items, n_features, dim)
        self.W = np.zeros((dim, n_features))

    def score(self, i, j):
        d = np.asarray((self.F[i] - self.F[j]) @ self.W.T).ravel()
        return float(-(d @ d))

    def score_items(self, i):
        Z = np.asarray(self.F @ self.W.T)
        diff = Z - Z[i]
        return -np.einsum("ij,ij->i", diff, diff)

    def blocks(self):
        return {"W": self.W}

    def sgd_batch(self, triples, lr, reg: Regularization, project=True):
        triples = np.ascontiguousarray(triples, dtype=np.int64).reshape(-1, 3)
        deltas = np.empty(len(triples))
        indptr, indices, data = self._csr()
        _lmt_sgd(self.W, indptr, indices, data, triples, float(lr), float(reg.embed), deltas)
        return deltas


PAIR_KINDS = ("i2i-transrec", "wnn", "lmt")


def empty_pair_model(kind: str, n_items: int, dim: int, n_features: int = 1, **_) -> PairModel:
    if kind == "i2i-transrec":
        return TransRecContent(n_items, n_features, dim)
    if kind == "wnn":
        return WNN(n_items, n_features)
    if kind == "lmt":
        return LMT(n_items, n_features, dim)
    raise ValueError(f"unknown item-to-item kind {kind!r}; expected one of {', '.join(PAIR_KINDS)}")


def make_pair_model(kind: str, features: FeatureMatrix, dim: int = 100, seed=None, init_scale: float = 0.1) -> PairModel:
    """Seeded initialization.

    ``E`` and ``W`` get normal noise with standard deviation ``init_scale``,
    the translation is a unit direction, and WNN weights start at one (plain
    Euclidean distance).
    """
    rng = np.random.default_rng(seed)
    n_items, n_features = features.matrix.shape
    model = empty_pair_model(kind, n_items, dim, n_features=n_features)
    if isinstance(model, TransRecContent):
        model.E[:] = rng.normal(0.0, init_scale, size=model.E.shape)
        model.t[:] = random_directions(rng, 1, dim)[0]
    elif isinstance(model, LMT):
        model.W[:] = rng.normal(0.0, init_scale, size=model.W.shape)
    else:
        model.w[:] = 1.0
    return model.attach(features)


@njit(cache=True)
def _scatter(indptr, indices, data, rows, bufs, mark, stamp, touched):
    """Load three sparse rows into dense buffers and list the union of their columns."""
    nt = 0
    for a in range(3):
        r = rows[a]
        for p in range(indptr[r], indptr[r + 1]):
            c = indices[p]
            bufs[a, c] = data[p]
            if mark[c] != stamp:
                mark[c] = stamp
                touched[nt] = c
                nt += 1
    return nt


@njit(cache=True)
def _clear(bufs, touched, nt):
    for s in range(nt):
        c = touched[s]
        bufs[0, c] = 0.0
        bufs[1, c] = 0.0
        bufs[2, c] = 0.0


@njit(cache=True)
def _content_sgd(E, t, indptr, indices, data, triples, lr, lam_e, lam_t, deltas):
    D, K = E.shape
    bufs = np.zeros((3, D))
    mark = np.full(D, -1, dtype=np.int64)
    touched = np.empty(D, dtype=np.int64)
    rows = np.empty(3, dtype=np.int64)
    z = np.zeros((3, K))
    g = np.empty((3, K))
    for n in range(triples.shape[0]):
        rows[0] = triples[n, 0]
        rows[1] = triples[n, 1]
        rows[2] = triples[n, 2]
        nt = _scatter(indptr, indices, data, rows, bufs, mark, n, touched)
        z[:, :] = 0.0
        for s in range(nt):
            c = touched[s]
            for a in range(3):
                v = bufs[a, c]
                if v != 0.0:
                    for k in range(K):
                        z[a, k] += v * E[c, k]
        delta = 0.0
        for k in range(K):
            q = z[0, k] + t[k]
            a = q - z[1, k]
            b = q - z[2, k]
            delta += b * b - a * a
            g[0, k] = 2.0 * (z[1, k] - z[2, k])
            g[1, k] = 2.0 * a
            g[2, k] = -2.0 * b
        deltas[n] = delta
        w = logistic_weight(delta)
        for s in range(nt):
            c = touched[s]
            for k in range(K):
                step = 0.0
                for a in range(3):
                    step += bufs[a, c] * g[a, k]
                E[c, k] += lr * (w * step - lam_e * E[c, k])
        for k in range(K):
            t[k] += lr * (w * g[0, k] - lam_t * t[k])
        _clear(bufs, touched, nt)


@njit(cache=True)
def _wnn_sgd(wv, indptr, indices, data, triples, lr, lam, deltas):
    D = wv.shape[0]
    bufs = np.zeros((3, D))
    mark = np.full(D, -1, dtype=np.int64)
    touched = np.empty(D, dtype=np.int64)
    rows = np.empty(3, dtype=np.int64)
    for n in range(triples.shape[0]):
        rows[0] = triples[n, 0]
        rows[1] = triples[n, 1]
        rows[2] = triples[n, 2]
        nt = _scatter(indptr, indices, data, rows, bufs, mark, n, touched)
        delta = 0.0
        for s in range(nt):
            c = touched[s]
            x = bufs[0, c] - bufs[1, c]
            y = bufs[0, c] - bufs[2, c]
            delta += wv[c] * wv[c] * (y * y - x * x)
        deltas[n] = delta
        w = logistic_weight(delta)
        for s in range(nt):
            c = touched[s]
            x = bufs[0, c] - bufs[1, c]
            y = bufs[0, c] - bufs[2, c]
            wv[c] += lr * (w * 2.0 * wv[c] * (y * y - x * x) - lam * wv[c])
        _clear(bufs, touched, nt)


@njit(cache=True)
def _lmt_sgd(W, indptr, indices, data, triples, lr, lam, deltas):
    K, D = W.shape
    bufs = np.zeros((3, D))
    mark = np.full(D, -1, dtype=np.int64)
    touched = np.empty(D, dtype=np.int64)
    rows = np.empty(3, dtype=np.int64)
    wx = np.empty(K)
    wy = np.empty(K)
    for n in range(triples.shape[0]):
        rows[0] = triples[n, 0]
        rows[1] = triples[n, 1]
        rows[2] = triples[n, 2]
        nt = _scatter(indptr, indices, data, rows, bufs, mark, n, touched)
        wx[:] = 0.0
        wy[:] = 0.0
        for s in range(nt):
            c = touched[s]
            x = bufs[0, c] - bufs[1, c]
            y = bufs[0, c] - bufs[2, c]
            for k in range(K):
                wx[k] += W[k, c] * x
                wy[k] += W[k, c] * y
        delta = 0.0
        for k in range(K):
            delta += wy[k] * wy[k] - wx[k] * wx[k]
        deltas[n] = delta
        w = logistic_weight(delta)
        for s in range(nt):
            c = touched[s]
            x = bufs[0, c] - bufs[1, c]
            y = bufs[0, c] - bufs[2, c]
            for k in range(K):
                W[k, c] += lr * (w * 2.0 * (wy[k] * y - wx[k] * x) - lam * W[k, c])
        _clear(bufs, touched, nt)
