import numpy as np
import pytest

from conftest import random_split_dataset
from oracles import brute_force_metrics
from transrec.evaluation import auc, evaluate, ground_truth_stats, hit_at_k, rank_of_ground_truth
from transrec.models import make_model


class TableModel:
    """Scores given by an arbitrary function of (user, previous item)."""

    def __init__(self, fn, n_items):
        self.fn = fn
        self.n_items = n_items

    def score(self, u, i, j):
        return float(self.fn(u, i)[j])

    def score_matrix(self, users, prevs):
        return np.array([self.fn(int(u), int(i)) for u, i in zip(users, prevs)], dtype=np.float64)


def _random_model(ds, seed, kind="transrec-l2"):
    rng = np.random.default_rng(seed)
    m = make_model(kind, ds.n_users, ds.n_items, dim=4, seed=seed)
    for arr in m.blocks().values():
        arr[...] = rng.normal(size=arr.shape)
    return m


def _truth_lookup(ds, split):
    truth = {}
    for u in range(ds.n_users):
        truth[u] = ds.context(u, split)[1]
    return truth


@pytest.mark.parametrize("kind", ["transrec-l1", "transrec-l2", "fpmc", "prme", "hrm-max"])
@pytest.mark.parametrize("split", ["validation", "test"])
def test_matches_double_loop_oracle(kind, split):
    for seed in range(4):
        ds = random_split_dataset(np.random.default_rng(seed), 5, 20)
        m = _random_model(ds, seed, kind)
        rep = evaluate(m, ds, split, k=5)
        strict, half, hit, ranks = brute_force_metrics(m.score, ds, split, 5)
        assert abs(rep.auc - strict) <= 1e-12
        assert abs(rep.auc_ties_half - half) <= 1e-12
        assert abs(rep.hit_at_k - hit) <= 1e-12
        assert rep.stats.ranks.tolist() == ranks


def test_ties_follow_pessimistic_rule():
    ds = random_split_dataset(np.random.default_rng(1), 6, 15)
    rng = np.random.default_rng(1)
    # integer scores make plenty of ties
    table = rng.integers(0, 3, size=(ds.n_users, ds.n_items)).astype(float)
    m = TableModel(lambda u, i: table[u], ds.n_items)
    rep = evaluate(m, ds, "test", k=3)
    strict, half, hit, ranks = brute_force_metrics(m.score, ds, "test", 3)
    assert (rep.auc, rep.auc_ties_half, rep.hit_at_k) == pytest.approx((strict, half, hit), abs=1e-12)
    assert rep.stats.ranks.tolist() == ranks
    assert rep.stats.ties.sum() > 0


def test_constant_model():
    ds = random_split_dataset(np.random.default_rng(2), 6, 15)
    m = TableModel(lambda u, i: np.zeros(ds.n_items), ds.n_items)
    st = ground_truth_stats(m, ds, "test")
    np.testing.assert_array_equal(st.ranks, st.n_candidates)
    assert auc(m, ds) == 0.0
    assert auc(m, ds, ties="half") == 0.5


def test_perfect_and_second_best_models():
    ds = random_split_dataset(np.random.default_rng(3), 6, 15)
    truth = _truth_lookup(ds, "test")

    def perfect(u, i):
        s = np.zeros(ds.n_items)
        s[truth[u]] = 1.0
        return s

    def second(u, i):
        s = perfect(u, i)
        negatives = np.setdiff1d(np.arange(ds.n_items), ds.user_items[u])
        s[negatives[0]] = 2.0
        return s

    m = TableModel(perfect, ds.n_items)
    assert auc(m, ds) == 1.0
    assert hit_at_k(m, ds, k=1) == 1.0
    assert all(rank_of_ground_truth(m, ds, u, "test") == 1 for u in range(ds.n_users))
    m2 = TableModel(second, ds.n_items)
    assert hit_at_k(m2, ds, k=1) == 0.0
    assert hit_at_k(m2, ds, k=2) == 1.0


def test_rank_matches_sort_oracle():
    for seed in range(10):
        ds = random_split_dataset(np.random.default_rng(seed), 4, 8, max_len=5)
        m = _random_model(ds, seed)
        for u in range(ds.n_users):
            prev, g = ds.context(u, "test")
            cand = [j for j in range(ds.n_items) if j == g or j not in set(ds.sequences[u].tolist())]
            if len(cand) == 1:
                continue
            order = sorted(cand, key=lambda j: (-m.score(u, prev, j), j != g))
            # ties against the ground truth count as ranked ahead of it
            expected = max(k for k, j in enumerate(order, 1) if m.score(u, prev, j) >= m.score(u, prev, g))
            assert rank_of_ground_truth(m, ds, u, "test") == expected


def test_negation_sums_to_at_most_one():
    ds = random_split_dataset(np.random.default_rng(5), 8, 20)
    m = _random_model(ds, 5)
    neg = TableModel(lambda u, i: -m.score_items(u, i), ds.n_items)
    assert auc(m, ds) + auc(neg, ds) == pytest.approx(1.0, abs=1e-12)
    table = np.random.default_rng(5).integers(0, 2, size=(ds.n_users, ds.n_items)).astype(float)
    tied = TableModel(lambda u, i: table[u], ds.n_items)
    tied_neg = TableModel(lambda u, i: -table[u], ds.n_items)
    assert auc(tied, ds) + auc(tied_neg, ds) < 1.0


def test_hit_rate_non_decreasing_in_k():
    ds = random_split_dataset(np.random.default_rng(6), 10, 40)
    m = _random_model(ds, 6)
    hits = [hit_at_k(m, ds, k=k) for k in range(0, 42)]
    assert all(a <= b for a, b in zip(hits, hits[1:]))
    assert hits[0] == 0.0 and hits[-1] == 1.0


def test_monotone_transform_invariance():
    ds = random_split_dataset(np.random.default_rng(7), 8, 25)
    m = _random_model(ds, 7)
    warped = TableModel(lambda u, i: np.exp(m.score_items(u, i) / 4.0), ds.n_items)
    a, b = evaluate(m, ds, "test", 5), evaluate(warped, ds, "test", 5)
    assert (a.auc, a.auc_ties_half, a.hit_at_k) == (b.auc, b.auc_ties_half, b.hit_at_k)
    np.testing.assert_array_equal(a.stats.ranks, b.stats.ranks)


def test_metrics_stay_in_unit_interval():
    for seed in range(5):
        ds = random_split_dataset(np.random.default_rng(seed), 6, 18)
        rep = evaluate(_random_model(ds, seed, "bprmf"), ds, "validation", 3)
        assert 0 <= rep.auc <= rep.auc_ties_half <= 1
        assert 0 <= rep.hit_at_k <= 1
        assert rep.n_users == ds.n_users


def test_report_outputs():
    ds = random_split_dataset(np.random.default_rng(8), 3, 10)
    rep = evaluate(_random_model(ds, 8), ds, "test", 50)
    d = rep.to_dict()
    assert set(d) == {"split", "users", "auc", "auc_ties_half", "hit@50"}
    lines = rep.rank_lines(ds.user_ids)
    assert len(lines) == ds.n_users
    user, rank, n = lines[0].split("\t")
    assert user == ds.user_ids[0] and 1 <= int(rank) <= int(n)


def test_invalid_arguments(small_ds):
    m = _random_model(small_ds, 0)
    with pytest.raises(ValueError):
        auc(m, small_ds, "train")
    with pytest.raises(ValueError):
        auc(m, small_ds, ties="optimistic")
    with pytest.raises(IndexError):
        rank_of_ground_truth(m, small_ds, small_ds.n_users, "test")
