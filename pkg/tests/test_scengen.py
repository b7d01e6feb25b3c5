import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.metrics import silhouette_score

from owfccd.core import DomainError
from owfccd.ingest import complete_days, history_array
from owfccd.scengen import (N_CHANNELS, DEFAULT_SHAPE, build_tree, clean_pool, fit_weibull,
                            generate_pool, kde_sample_trajectory, load_tree, save_tree,
                            tree_from_dict, tree_to_dict, wind_to_power_tree)
from owfccd.synthetic import synthetic_series
from owfccd.windpower import default_curve, upscale

from helpers import random_tree


@pytest.fixture(scope="module")
def history():
    prices, wind = synthetic_series(n_days=40, seed=0)
    return history_array(complete_days(prices, wind))


def two_regime_history(n=40, hours=6, seed=0):
    """Half the days sit near 0 on every channel, half near 10."""
    rng = np.random.default_rng(seed)
    level = np.repeat([0.0, 10.0], n // 2)
    return level[:, None, None] + rng.normal(0, 0.3, (n, hours, N_CHANNELS))


def test_weibull_recovers_parameters():
    rng = np.random.default_rng(0)
    fit = fit_weibull(8.0 * rng.weibull(2.0, 20000))
    assert 1.9 <= fit.shape <= 2.1 and 7.8 <= fit.scale <= 8.2
    assert fit.ks_pass and fit.n == 20000


def test_weibull_exponential_special_case():
    rng = np.random.default_rng(1)
    fit = fit_weibull(rng.exponential(5.0, 20000))
    assert 0.95 <= fit.shape <= 1.05


def test_weibull_flags_wrong_family():
    rng = np.random.default_rng(2)
    assert not fit_weibull(rng.uniform(9.0, 10.0, 5000)).ks_pass


def test_weibull_rejects_degenerate_input():
    with pytest.raises(DomainError, match="degenerate"):
        fit_weibull(np.full(500, 7.0))
    with pytest.raises(DomainError, match="100"):
        fit_weibull(np.ones(10))


def test_identical_history_gives_no_jitter():
    day = np.random.default_rng(0).normal(size=(5, N_CHANNELS))
    hist = np.stack([day] * 6)
    for markovian in (True, False):
        assert np.array_equal(kde_sample_trajectory(hist, markovian, rng=3), day)


def test_sample_shape_and_determinism(history):
    a = kde_sample_trajectory(history, rng=7)
    b = kde_sample_trajectory(history, rng=7)
    assert a.shape == history.shape[1:]
    assert np.array_equal(a, b)
    assert not np.array_equal(a, kde_sample_trajectory(history, rng=8))


def test_history_validation():
    with pytest.raises(DomainError):
        kde_sample_trajectory(np.zeros((1, 3, N_CHANNELS)))
    bad = np.zeros((3, 3, N_CHANNELS))
    bad[1, 1, 1] = np.nan
    with pytest.raises(DomainError, match="missing"):
        kde_sample_trajectory(bad)


def stay_rate(pool):
    regime = pool[:, :, 0] > 5.0
    return np.mean(regime[:, 1:] == regime[:, :-1])


def test_markovian_sampling_follows_regimes():
    hist = two_regime_history()
    markov = stay_rate(generate_pool(hist, 400, seed=0, markovian=True))
    memoryless = stay_rate(generate_pool(hist, 400, seed=0, markovian=False))
    # the Silverman jitter on a bimodal channel is wide, so some hops remain
    assert markov > 0.8
    assert abs(memoryless - 0.5) < 0.1


def test_pool_seeded_and_batch_split(history):
    a = generate_pool(history, 50, seed=4, batch=20)
    assert a.shape == (50,) + history.shape[1:]
    assert np.array_equal(a, generate_pool(history, 50, seed=4, batch=20))
    assert not np.array_equal(a, generate_pool(history, 50, seed=5, batch=20))


def test_clean_pool_floors_negatives():
    pool = np.zeros((2, 3, N_CHANNELS))
    pool[0, 0, 5] = -1.0
    pool[1, 2, 12] = -2.0
    pool[0, 1, 13] = -0.5
    pool[0, 0, 1] = -30.0          # RT price stays negative
    out, n = clean_pool(pool)
    assert n == 2
    assert out[..., 5:14].min() == 0.0
    assert out[0, 0, 1] == -30.0
    assert pool[0, 0, 5] == -1.0


def test_default_shape_tree(history):
    pool, _ = clean_pool(generate_pool(history, 1000, seed=0))
    tree = build_tree(pool, DEFAULT_SHAPE, seed=0)
    assert len(tree.da_nodes) == 20 and tree.n_leaves == 100
    assert all(len(n.leaves) == 5 for n in tree.da_nodes)
    assert sum(p for *_, p, _ in tree.leaves()) == pytest.approx(1.0, abs=1e-12)
    assert tree.n_hours == 24
    lf = tree.da_nodes[0].leaves[0]
    assert len(lf.rt_price) == len(lf.reserve_up) == len(lf.reserve_down) == 96
    assert len(lf.wind) == 24


def test_minimal_pool_gives_equal_probabilities():
    pool = np.random.default_rng(0).normal(size=(6, 4, N_CHANNELS))
    tree = build_tree(pool, (1, 2, 3, 1, 1, 1))
    for _, _, p, _ in tree.leaves():
        assert p == pytest.approx(1 / 6, abs=1e-12)


def test_pool_too_small():
    with pytest.raises(DomainError, match="smaller"):
        build_tree(np.zeros((5, 4, N_CHANNELS)), (1, 2, 3, 1, 1, 1))


@pytest.mark.parametrize("shape", [(2, 2, 2), (1, 2), (1, 2, 2, 3), (1, 0, 2)])
def test_bad_shape(shape):
    with pytest.raises(DomainError, match="shape"):
        build_tree(np.zeros((20, 4, N_CHANNELS)), shape)


def test_separated_regimes_recovered():
    pool = two_regime_history(n=200, hours=4, seed=3)
    tree = build_tree(pool, (1, 2, 2, 1, 1, 1), seed=0)
    levels = sorted(node.da_price.mean() for node in tree.da_nodes)
    assert levels[0] < 1.0 and levels[1] > 9.0
    assert [n.probability for n in tree.da_nodes] == [0.5, 0.5]
    labels = (pool[:, :, 0].mean(axis=1) > 5).astype(int)
    assert silhouette_score(pool[:, :, 0], labels) > 0.5


def test_wind_to_power():
    tree = random_tree(1, 2, 3, wind=lambda a, b, rng: [0.0, 8.75, 14.0 + b])
    tree = type(tree)(tree.da_nodes, "m/s", tree.shape)
    farm = upscale(default_curve(), 1500.0)
    out = wind_to_power_tree(tree, farm)
    assert out.wind_unit == "MW"
    for lf in out.da_nodes[0].leaves:
        assert np.allclose(lf.wind, [0.0, 750.0, 1500.0])
    with pytest.raises(DomainError):
        wind_to_power_tree(out, farm)


def test_tree_file_round_trip(tmp_path):
    tree = random_tree(3, 2, 5, seed=1)
    save_tree(tree, tmp_path / "t.json")
    back = load_tree(tmp_path / "t.json")
    assert tree_to_dict(back) == tree_to_dict(tree)


def test_tree_schema_checked():
    doc = tree_to_dict(random_tree())
    doc["schema"] = "other/1"
    with pytest.raises(DomainError, match="schema"):
        tree_from_dict(doc)


def test_tree_probabilities_checked():
    doc = tree_to_dict(random_tree())
    doc["nodes"][1]["probability"] = 0.7
    with pytest.raises(DomainError, match="DA probabilities"):
        tree_from_dict(doc)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 1000))
def test_tree_probabilities_sum_to_one(n_da, n_rt, seed):
    pool = np.random.default_rng(seed).normal(size=(n_da * n_rt * 3, 3, N_CHANNELS))
    tree = build_tree(pool, (1, n_da, n_rt, 1, 1, 1), seed=seed)
    assert sum(n.probability for n in tree.da_nodes) == pytest.approx(1.0, abs=1e-12)
    for node in tree.da_nodes:
        assert len(node.leaves) == n_rt
        assert sum(lf.probability for lf in node.leaves) == pytest.approx(1.0, abs=1e-12)
        assert all(lf.probability > 0 for lf in node.leaves)


def test_end_to_end_deterministic(history):
    def run():
        pool, _ = clean_pool(generate_pool(history, 300, seed=11))
        return tree_to_dict(build_tree(pool, (1, 4, 3, 1, 1, 1), seed=11))
    assert run() == run()
