"""Planted-model data: sequences sampled from a known TransRec."""

from __future__ import annotations

import numpy as np

from .dataset import InteractionLog, SequenceDataset, build_sequences, split_leave_one_out
from .models.transrec import DistanceKind, TransRec, random_directions


def planted_transrec(
    n_users: int, n_items: int, dim: int = 10, seed=0, offset_scale: float = 2.0, global_scale: float = 1.0,
    bias_scale: float = 1.0, distance: DistanceKind = DistanceKind.SQUARED_L2,
) -> TransRec:
    """Random ground truth: unit-ball item points, random global and per-user translations.

    ``offset_scale`` is the expected norm of a user offset, ``global_scale`` the
    norm of the global translation and ``bias_scale`` the standard deviation
    of the item biases.
    """
    rng = np.random.default_rng(seed)
    model = TransRec(n_users, n_items, dim, distance)
    radii = rng.uniform(0.0, 1.0, size=(n_items, 1)) ** (1.0 / dim)
    model.gamma[:] = random_directions(rng, n_items, dim) * radii
    model.t_global[:] = random_directions(rng, 1, dim)[0] * global_scale
    model.t_user[:] = rng.standard_normal((n_users, dim)) * (offset_scale / np.sqrt(dim))
    model.beta[:] = rng.standard_normal(n_items) * bias_scale
    return model


def sample_sequences(truth: TransRec, length: int, seed=0, temperature: float = 1.0) -> InteractionLog:
    """Draw ``length`` actions per user: first item uniform, then softmax over ``score / temperature``."""
    rng = np.random.default_rng(seed)
    users, items, stamps = [], [], []
    for u in range(truth.n_users):
        prev = int(rng.integers(truth.n_items))
        for step in range(length):
            if step:
                logits = truth.score_items(u, prev) / temperature
                p = np.exp(logits - logits.max())
                prev = int(rng.choice(truth.n_items, p=p / p.sum()))
            users.append(f"u{u}")
            items.append(f"i{prev}")
            stamps.append(step)
    return InteractionLog(users, items, np.array(stamps, dtype=np.int64))


def planted_dataset(
    n_users: int = 500, n_items: int = 200, length: int = 20, dim: int = 10, seed: int = 0, temperature: float = 1.0
) -> tuple[TransRec, SequenceDataset]:
    """A split dataset drawn from a planted model, plus that model re-indexed to the dataset.

    Items the sampler never produced are absent from the dataset, so the
    returned ground truth keeps only the surviving item rows.
    """
    truth = planted_transrec(n_users, n_items, dim, seed)
    log = sample_sequences(truth, length, seed=seed + 1, temperature=temperature)
    ds = split_leave_one_out(build_sequences(log))
    keep_items = np.array([int(i[1:]) for i in ds.item_ids])
    keep_users = np.array([int(u[1:]) for u in ds.user_ids])
    aligned = TransRec(len(keep_users), len(keep_items), dim, truth.distance)
    aligned.gamma[:] = truth.gamma[keep_items]
    aligned.beta[:] = truth.beta[keep_items]
    aligned.t_global[:] = truth.t_global
    aligned.t_user[:] = truth.t_user[keep_users]
    return aligned, ds


def planted_edges(
    n_items: int = 300, n_features: int = 60, active: int = 6, dim: int = 10, out_degree: int = 5, seed: int = 0,
    temperature: float = 1.0,
):
    """Binary item features and directed edges drawn from a random content translation model.

    Each item switches on ``active`` random features; a random linear map and
    translation place items in a ``dim``-dimensional space, and each item
    links to ``out_degree`` distinct others sampled by softmax over
    ``-||E f_i + t - E f_j||^2 / temperature``.

    Returns ``(features, edges)`` where ``edges`` is the split dataset.
    """
    import scipy.sparse as sp

    from .item2item.edges import split_edges
    from .item2item.features import FeatureMatrix

    rng = np.random.default_rng(seed)
    rows = np.repeat(np.arange(n_items), active)
    cols = np.concatenate([rng.choice(n_features, size=active, replace=False) for _ in range(n_items)])
    F = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n_items, n_features))
    E = rng.standard_normal((n_features, dim)) / np.sqrt(active)
    t = random_directions(rng, 1, dim)[0]
    Z = np.asarray(F @ E)
    item_ids = [f"i{k}" for k in range(n_items)]
    pairs = []
    for i in range(n_items):
        diff = Z - (Z[i] + t)
        logits = -np.einsum("ij,ij->i", diff, diff) / temperature
        logits[i] = -np.inf
        p = np.exp(logits - logits.max())
        for j in rng.choice(n_items, size=out_degree, replace=False, p=p / p.sum()):
            pairs.append((item_ids[i], item_ids[j]))
    return FeatureMatrix(F, item_ids), split_edges(pairs, item_ids, seed=seed)
