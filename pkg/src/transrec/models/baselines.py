"""Comparison predictors: popularity, BPR-MF, FMC, FPMC, PRME and HRM."""

from __future__ import annotations

import numpy as np
from numba import njit

from .base import Regularization, RankingModel, apply_rows, logistic_weight
from .transrec import random_directions

INIT_SCALE = 0.01


class PopRec(RankingModel):
    """Ranks items by their training-split frequency, ignoring user and context."""

    kind = "poprec"
    trainable = False

    def __init__(self, n_users: int, n_items: int, counts=None):
        super().__init__(n_users, n_items, 1)
        self.counts = np.zeros(n_items) if counts is None else np.asarray(counts, dtype=np.float64).copy()
        if self.counts.shape != (n_items,):
            raise ValueError("counts must have one entry per item")

    def score(self, u, i, j):
        return float(self.counts[j])

    def score_items(self, u, i):
        return self.counts.copy()

    def score_matrix(self, users, prevs):
        return np.broadcast_to(self.counts, (len(users), self.n_items)).copy()

    def blocks(self):
        return {"counts": self.counts}


class Factorized(RankingModel):
    """Inner-product family: ``<M_u, N_j> + <P_i, Q_j> + b_j`` with parts switched on or off.

    BPR-MF keeps the user-item term (and by default the item bias), FMC the
    item-item transition term, FPMC both.
    """

    def __init__(self, n_users, n_items, dim, use_mf=True, use_mc=True, use_bias=False, kind="fpmc"):
        super().__init__(n_users, n_items, dim)
        if not (use_mf or use_mc):
            raise ValueError("need at least one of the user-item and item-item terms")
        self.kind = kind
        self.use_mf = bool(use_mf)
        self.use_mc = bool(use_mc)
        self.use_bias = bool(use_bias)
        self.M = np.zeros((n_users if use_mf else 0, dim))
        self.N = np.zeros((n_items if use_mf else 0, dim))
        self.P = np.zeros((n_items if use_mc else 0, dim))
        self.Q = np.zeros((n_items if use_mc else 0, dim))
        self.bias = np.zeros(n_items if use_bias else 0)

    def mf_part(self, u, j) -> float:
        return float(self.M[u] @ self.N[j]) if self.use_mf else 0.0

    def mc_part(self, i, j) -> float:
        return float(self.P[i] @ self.Q[j]) if self.use_mc else 0.0

    def score(self, u, i, j):
        s = self.mf_part(u, j) + self.mc_part(i, j)
        if self.use_bias:
            s += self.bias[j]
        return float(s)

    def score_items(self, u, i):
        return self.score_matrix(np.array([u]), np.array([i]))[0]

    def score_matrix(self, users, prevs):
        out = np.zeros((len(users), self.n_items))
        if self.use_mf:
            out += self.M[np.asarray(users)] @ self.N.T
        if self.use_mc:
            out += self.P[np.asarray(prevs)] @ self.Q.T
        if self.use_bias:
            out += self.bias[None, :]
        return out

    def blocks(self):
        out = {}
        if self.use_mf:
            out["M"] = self.M
            out["N"] = self.N
        if self.use_mc:
            out["P"] = self.P
            out["Q"] = self.Q
        if self.use_bias:
            out["bias"] = self.bias
        return out

    def hyper(self):
        return {"use_mf": self.use_mf, "use_mc": self.use_mc, "use_bias": self.use_bias}

    def reg_classes(self):
        return {n: ("bias" if n == "bias" else "embed") for n in self.blocks()}

    def sgd_batch(self, triples, lr, reg: Regularization, project=True):
        triples = np.ascontiguousarray(triples, dtype=np.int64).reshape(-1, 4)
        deltas = np.empty(len(triples))
        _factorized_sgd(
            self.M, self.N, self.P, self.Q, self.bias, triples, float(lr), float(reg.embed), float(reg.bias),
            self.use_mf, self.use_mc, self.use_bias, deltas,
        )
        return deltas


def BPRMF(n_users, n_items, dim, use_bias=True) -> Factorized:
    return Factorized(n_users, n_items, dim, use_mf=True, use_mc=False, use_bias=use_bias, kind="bprmf")


def FMC(n_users, n_items, dim, use_bias=False) -> Factorized:
    return Factorized(n_users, n_items, dim, use_mf=False, use_mc=True, use_bias=use_bias, kind="fmc")


def FPMC(n_users, n_items, dim) -> Factorized:
    return Factorized(n_users, n_items, dim, use_mf=True, use_mc=True, use_bias=False, kind="fpmc")


@njit(cache=True)
def _factorized_sgd(M, N, P, Q, bias, triples, lr, lam_e, lam_b, use_mf, use_mc, use_bias, deltas):
    K = M.shape[1]
    gu = np.empty(K)
    gi = np.empty(K)
    for n in range(triples.shape[0]):
        u = triples[n, 0]
        i = triples[n, 1]
        j = triples[n, 2]
        jn = triples[n, 3]
        delta = 0.0
        for k in range(K):
            if use_mf:
                delta += M[u, k] * (N[j, k] - N[jn, k])
            if use_mc:
                delta += P[i, k] * (Q[j, k] - Q[jn, k])
        if use_bias:
            delta += bias[j] - bias[jn]
        deltas[n] = delta
        w = logistic_weight(delta)
        # gradients are read from old values before any row moves
        for k in range(K):
            if use_mf:
                gu[k] = N[j, k] - N[jn, k]
            if use_mc:
                gi[k] = Q[j, k] - Q[jn, k]
        for k in range(K):
            if use_mf:
                m = M[u, k]
                N[j, k] += lr * (w * m - lam_e * N[j, k])
                N[jn, k] += lr * (-w * m - lam_e * N[jn, k])
                M[u, k] += lr * (w * gu[k] - lam_e * m)
            if use_mc:
                p = P[i, k]
                Q[j, k] += lr * (w * p - lam_e * Q[j, k])
                Q[jn, k] += lr * (-w * p - lam_e * Q[jn, k])
                P[i, k] += lr * (w * gi[k] - lam_e * p)
        if use_bias:
            bias[j] += lr * (w - lam_b * bias[j])
            bias[jn] += lr * (-w - lam_b * bias[jn])


class PRME(RankingModel):
    """Two metric spaces: ``-(alpha ||M_u - N_j||^2 + (1 - alpha) ||P_i - P_j||^2)``."""

    kind = "prme"

    def __init__(self, n_users, n_items, dim, alpha=0.2):
        super().__init__(n_users, n_items, dim)
        if not 0.0 <= alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        self.alpha = float(alpha)
        self.M = np.zeros((n_users, dim))
        self.N = np.zeros((n_items, dim))
        self.P = np.zeros((n_items, dim))

    def score(self, u, i, j):
        a = self.M[u] - self.N[j]
        b = self.P[i] - self.P[j]
        return float(-(self.alpha * (a @ a) + (1.0 - self.alpha) * (b @ b)))

    def score_items(self, u, i):
        a = self.N - self.M[u]
        b = self.P - self.P[i]
        return -(self.alpha * np.einsum("ij,ij->i", a, a) + (1.0 - self.alpha) * np.einsum("ij,ij->i", b, b))

    def score_matrix(self, users, prevs):
        users = np.asarray(users)
        prevs = np.asarray(prevs)
        return -(self.alpha * _sqdist(self.M[users], self.N) + (1.0 - self.alpha) * _sqdist(self.P[prevs], self.P))

    def blocks(self):
        return {"M": self.M, "N": self.N, "P": self.P}

    def hyper(self):
        return {"alpha": self.alpha}

    def sgd_batch(self, triples, lr, reg: Regularization, project=True):
        triples = np.ascontiguousarray(triples, dtype=np.int64).reshape(-1, 4)
        deltas = np.empty(len(triples))
        _prme_sgd(self.M, self.N, self.P, triples, float(lr), float(reg.embed), self.alpha, deltas)
        return deltas


def _sqdist(A, B):
    return np.einsum("ij,ij->i", A, A)[:, None] - 2.0 * (A @ B.T) + np.einsum("ij,ij->i", B, B)[None, :]


@njit(cache=True)
def _prme_sgd(M, N, P, triples, lr, lam, alpha, deltas):
    K = M.shape[1]
    gu = np.empty(K)
    gN = np.empty((2, K))
    gP = np.empty((3, K))
    rowsN = np.empty(2, dtype=np.int64)
    rowsP = np.empty(3, dtype=np.int64)
    beta = 1.0 - alpha
    for n in range(triples.shape[0]):
        u = triples[n, 0]
        i = triples[n, 1]
        j = triples[n, 2]
        jn = triples[n, 3]
        delta = 0.0
        for k in range(K):
            a = M[u, k] - N[j, k]
            an = M[u, k] - N[jn, k]
            b = P[i, k] - P[j, k]
            bn = P[i, k] - P[jn, k]
            delta += -alpha * (a * a - an * an) - beta * (b * b - bn * bn)
        deltas[n] = delta
        w = logistic_weight(delta)
        for k in range(K):
            a = M[u, k] - N[j, k]
            an = M[u, k] - N[jn, k]
            b = P[i, k] - P[j, k]
            bn = P[i, k] - P[jn, k]
            gu[k] = 2.0 * alpha * (N[j, k] - N[jn, k])
            gN[0, k] = 2.0 * alpha * a
            gN[1, k] = -2.0 * alpha * an
            gP[0, k] = 2.0 * beta * (P[j, k] - P[jn, k])
            gP[1, k] = 2.0 * beta * b
            gP[2, k] = -2.0 * beta * bn
        for k in range(K):
            M[u, k] += lr * (w * gu[k] - lam * M[u, k])
        rowsN[0] = j
        rowsN[1] = jn
        apply_rows(N, rowsN, gN, 2, w, lr, lam)
        rowsP[0] = i
        rowsP[1] = j
        rowsP[2] = jn
        apply_rows(P, rowsP, gP, 3, w, lr, lam)


class HRM(RankingModel):
    """``<pool(M_u, N_i), N_j>`` with elementwise average or max pooling."""

    def __init__(self, n_users, n_items, dim, pooling="avg"):
        super().__init__(n_users, n_items, dim)
        if pooling not in ("avg", "max"):
            raise ValueError("pooling must be 'avg' or 'max'")
        self.pooling = pooling
        self.kind = f"hrm-{pooling}"
        self.M = np.zeros((n_users, dim))
        self.N = np.zeros((n_items, dim))

    def pool(self, m, n):
        return 0.5 * (m + n) if self.pooling == "avg" else np.maximum(m, n)

    def score(self, u, i, j):
        return float(self.pool(self.M[u], self.N[i]) @ self.N[j])

    def score_items(self, u, i):
        return self.N @ self.pool(self.M[u], self.N[i])

    def score_matrix(self, users, prevs):
        return self.pool(self.M[np.asarray(users)], self.N[np.asarray(prevs)]) @ self.N.T

    def blocks(self):
        return {"M": self.M, "N": self.N}

    def hyper(self):
        return {"pooling": self.pooling}

    def sgd_batch(self, triples, lr, reg: Regularization, project=True):
        triples = np.ascontiguousarray(triples, dtype=np.int64).reshape(-1, 4)
        deltas = np.empty(len(triples))
        _hrm_sgd(self.M, self.N, triples, float(lr), float(reg.embed), self.pooling == "max", deltas)
        return deltas


@njit(cache=True)
def _hrm_sgd(M, N, triples, lr, lam, use_max, deltas):
    K = M.shape[1]
    z = np.empty(K)
    gu = np.empty(K)
    gN = np.empty((3, K))
    rows = np.empty(3, dtype=np.int64)
    for n in range(triples.shape[0]):
        u = triples[n, 0]
        i = triples[n, 1]
        j = triples[n, 2]
        jn = triples[n, 3]
        delta = 0.0
        for k in range(K):
            if use_max:
                z[k] = M[u, k] if M[u, k] >= N[i, k] else N[i, k]
            else:
                z[k] = 0.5 * (M[u, k] + N[i, k])
            delta += z[k] * (N[j, k] - N[jn, k])
        deltas[n] = delta
        w = logistic_weight(delta)
        for k in range(K):
            dz = N[j, k] - N[jn, k]
            if use_max:
                # ties route the subgradient to the user factor
                if M[u, k] >= N[i, k]:
                    gu[k] = dz
                    gN[0, k] = 0.0
                else:
                    gu[k] = 0.0
                    gN[0, k] = dz
            else:
                gu[k] = 0.5 * dz
                gN[0, k] = 0.5 * dz
            gN[1, k] = z[k]
            gN[2, k] = -z[k]
        for k in range(K):
            M[u, k] += lr * (w * gu[k] - lam * M[u, k])
        rows[0] = i
        rows[1] = j
        rows[2] = jn
        apply_rows(N, rows, gN, 3, w, lr, lam)


def init_baseline(model: RankingModel, seed=None) -> RankingModel:
    """Seeded initialization for the baseline kinds.

    Factor matrices get uniform noise in ``[-0.01, 0.01]``; PRME points are
    unit directions; biases start at zero.
    """
    rng = np.random.default_rng(seed)
    if isinstance(model, PRME):
        for name in ("M", "N", "P"):
            arr = getattr(model, name)
            arr[:] = random_directions(rng, arr.shape[0], arr.shape[1]) if arr.shape[0] else arr
        return model
    for name, arr in model.blocks().items():
        if name in ("bias", "counts"):
            continue
        arr[:] = rng.uniform(-INIT_SCALE, INIT_SCALE, size=arr.shape)
    return model
