import numpy as np
import pytest

from gradcases import max_gradient_error
from transrec.models import BPRMF, FMC, FPMC, HRM, PRME, PopRec, Regularization, make_model
from transrec.training import train


def _randomize(model, seed=0):
    rng = np.random.default_rng(seed)
    for arr in model.blocks().values():
        arr[...] = rng.normal(size=arr.shape)
    return model


def test_poprec_scores_are_counts():
    m = PopRec(3, 4, counts=[7, 0, 2, 7])
    assert m.score(2, 1, 0) == 7
    assert m.score(0, 3, 1) == 0
    # descending count, ties by dense index
    assert list(np.argsort(-m.score_items(0, 0), kind="stable")) == [0, 3, 2, 1]


def test_poprec_counts_train_prefix_only(small_ds):
    model, _ = train(small_ds, "poprec")
    expected = np.zeros(small_ds.n_items)
    for u in range(small_ds.n_users):
        for item in small_ds.sequences[u][:-2]:
            expected[item] += 1
    np.testing.assert_array_equal(model.counts, expected)


@pytest.mark.parametrize("factory", [lambda: BPRMF(3, 5, 2), lambda: FMC(3, 5, 2), lambda: FPMC(3, 5, 2),
                                     lambda: HRM(3, 5, 2, "avg"), lambda: HRM(3, 5, 2, "max")])
def test_zero_parameters_score_zero(factory):
    m = factory()
    assert not m.score_matrix(np.arange(3), np.array([0, 4, 2])).any()


def test_prme_maximum_at_coincidence():
    m = _randomize(PRME(2, 4, 3, alpha=0.5))
    m.N[2] = m.M[1]
    m.P[2] = m.P[0]
    assert m.score(1, 0, 2) == 0.0
    assert np.all(m.score_items(1, 0) <= 0)


def test_prme_alpha_one_is_pure_user_metric():
    m = _randomize(PRME(2, 4, 3, alpha=1.0))
    for j in range(4):
        assert m.score(0, 3, j) == -np.sum((m.M[0] - m.N[j]) ** 2)


def test_bprmf_ignores_context_fmc_ignores_user():
    mf = _randomize(BPRMF(3, 6, 4))
    mc = _randomize(FMC(3, 6, 4))
    np.testing.assert_array_equal(mf.score_items(1, 0), mf.score_items(1, 5))
    np.testing.assert_array_equal(mc.score_items(0, 2), mc.score_items(2, 2))


def test_bias_flags():
    assert "bias" in BPRMF(2, 3, 2).blocks()
    assert "bias" not in BPRMF(2, 3, 2, use_bias=False).blocks()
    assert "bias" not in FMC(2, 3, 2).blocks()
    assert "bias" in FMC(2, 3, 2, use_bias=True).blocks()


def test_fpmc_is_sum_of_parts():
    rng = np.random.default_rng(4)
    m = _randomize(FPMC(5, 9, 3), 4)
    for _ in range(50):
        u, i, j = rng.integers(5), rng.integers(9), rng.integers(9)
        assert m.score(u, i, j) == pytest.approx(m.M[u] @ m.N[j] + m.P[i] @ m.Q[j], abs=1e-12)
        assert m.score(u, i, j) == pytest.approx(m.mf_part(u, j) + m.mc_part(i, j), abs=1e-12)


def test_hrm_avg_identity():
    m = _randomize(HRM(3, 6, 4, "avg"))
    m.N[2] = m.M[1]
    np.testing.assert_allclose(m.score_items(1, 2), m.N @ m.M[1], atol=1e-12)


def test_hrm_max_identity():
    m = _randomize(HRM(3, 6, 4, "max"))
    m.N[2] = m.M[1] - np.abs(np.random.default_rng(1).normal(size=4))
    np.testing.assert_allclose(m.score_items(1, 2), m.N @ m.M[1], atol=1e-12)


def test_hrm_max_tie_routes_to_user():
    m = HRM(1, 3, 2, "max")
    m.M[0] = [0.5, 0.5]
    m.N[0] = [0.5, 0.5]
    m.N[1] = [1.0, 0.0]
    m.sgd_batch(np.array([[0, 0, 1, 2]]), 0.1, Regularization())
    # every pooled coordinate ties, so the user row takes the gradient
    assert not np.array_equal(m.M[0], [0.5, 0.5])
    np.testing.assert_allclose(m.N[0], [0.5, 0.5])


def test_baseline_init_is_small_and_seeded():
    a = make_model("fpmc", 5, 8, dim=4, seed=3)
    b = make_model("fpmc", 5, 8, dim=4, seed=3)
    for name, arr in a.blocks().items():
        assert np.abs(arr).max() <= 0.01
        np.testing.assert_array_equal(arr, b.blocks()[name])
    prme = make_model("prme", 5, 8, dim=4, seed=3)
    np.testing.assert_allclose(np.linalg.norm(prme.P, axis=1), 1.0, atol=1e-12)


@pytest.mark.parametrize("kind", ["bprmf", "fmc", "fpmc", "prme", "hrm-avg", "hrm-max"])
def test_gradients_match_finite_differences(kind):
    assert max_gradient_error(kind, n_points=20, seed=11) < 1e-4
