import numpy as np
import pytest

from oracles import exhaustive_top
from transrec.models import DistanceKind, TransRec, init_params
from transrec.retrieval import augmented_distances, augmented_query, build_index, recommend

KINDS = [DistanceKind.L1, DistanceKind.SQUARED_L2]


def random_model(seed, n_items=200, dim=10, distance=DistanceKind.SQUARED_L2, n_users=5):
    rng = np.random.default_rng(seed)
    m = init_params(n_users, n_items, dim, seed=rng, distance=distance)
    m.gamma *= rng.uniform(0.2, 1.0, size=(n_items, 1))
    m.beta[:] = rng.normal(scale=2.0, size=n_items)
    m.t_user[:] = rng.normal(scale=0.5, size=(n_users, dim))
    return m


def test_equal_biases_give_zero_column():
    m = random_model(0, n_items=6, dim=3)
    m.beta[:] = 4.0
    idx = build_index(m)
    assert not idx.shifted_bias.any()
    assert not idx.points[:, -1].any()


def test_two_item_shift():
    for kind in KINDS:
        m = TransRec(1, 2, 2, kind)
        m.beta[:] = [1.0, 3.0]
        idx = build_index(m)
        np.testing.assert_array_equal(idx.shifted_bias, [-2.0, 0.0])
        expected = [np.sqrt(2.0), 0.0] if kind is DistanceKind.SQUARED_L2 else [-2.0, 0.0]
        np.testing.assert_array_equal(idx.points[:, -1], expected)
        assert idx.bias_max == 3.0


def test_index_is_read_only():
    idx = build_index(random_model(1, n_items=5, dim=2))
    with pytest.raises(ValueError):
        idx.points[0, 0] = 1.0


@pytest.mark.parametrize("kind", KINDS)
def test_augmented_distance_expansion(kind):
    for seed in range(20):
        m = random_model(seed, n_items=40, dim=6, distance=kind)
        idx = build_index(m)
        u, i = seed % 5, seed % 40
        q = m.query_point(u, i)
        direct = np.array([np.abs(q - g).sum() if kind is DistanceKind.L1 else np.sum((q - g) ** 2) for g in m.gamma])
        aug = augmented_distances(idx, augmented_query(m, u, i))
        np.testing.assert_allclose(aug, direct - idx.shifted_bias, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("kind", KINDS)
def test_top_50_equals_exhaustive_scoring(kind):
    for seed in range(20):
        m = random_model(seed, distance=kind)
        idx = build_index(m)
        u, i = seed % 5, (7 * seed) % 200
        got = [j for j, _ in recommend(idx, m, u, i, top_n=50)]
        assert got == exhaustive_top(lambda j: m.score(u, i, j), 200, 50)


def test_reported_scores_match_model():
    m = random_model(3, n_items=30, dim=4)
    for j, s in recommend(build_index(m), m, 2, 5, top_n=30):
        assert s == pytest.approx(m.score(2, 5, j), abs=1e-10)


def test_ties_broken_by_item_index():
    m = TransRec(1, 6, 2)
    m.gamma[[1, 4, 5]] = [0.5, 0.0]
    got = [j for j, _ in recommend(build_index(m), m, 0, 1, top_n=6)]
    assert got[:3] == [1, 4, 5]
    assert got[3:] == [0, 2, 3]


@pytest.mark.parametrize("kind", KINDS)
def test_bias_shift_invariance(kind):
    m = random_model(4, n_items=60, distance=kind)
    before = recommend(build_index(m), m, 1, 3, top_n=20)
    m.beta += 17.0
    after = recommend(build_index(m), m, 1, 3, top_n=20)
    assert [j for j, _ in before] == [j for j, _ in after]


def test_exclude_seen():
    m = random_model(5, n_items=12, dim=3)
    idx = build_index(m)
    seen = [k for k in range(12) if k != 7]
    assert recommend(idx, m, 0, 0, top_n=5, exclude_seen=True, seen=seen) == [(7, pytest.approx(m.score(0, 0, 7)))]
    got = [j for j, _ in recommend(idx, m, 0, 0, top_n=12, exclude_seen=True, seen=[0, 3])]
    assert got == exhaustive_top(lambda j: m.score(0, 0, j), 12, 12, excluded=[0, 3])


def test_one_item_catalog():
    m = init_params(1, 1, 3, seed=0)
    assert [j for j, _ in recommend(build_index(m), m, 0, 0, top_n=10)] == [0]


def test_errors():
    m = init_params(1, 2, 3, seed=0)
    idx = build_index(m)
    with pytest.raises(ValueError, match="top_n"):
        recommend(idx, m, 0, 0, top_n=0)
    with pytest.raises(ValueError, match="no candidate"):
        recommend(idx, m, 0, 0, exclude_seen=True, seen=[0, 1])
    m.beta[0] = np.nan
    with pytest.raises(ValueError):
        build_index(m)
