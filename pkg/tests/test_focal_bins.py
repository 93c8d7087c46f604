import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from amodalsize.errors import InputError
from amodalsize.exif_focal import (FocalBinner, FocalMetadata, chance_rankings, eval_topk,
                                   focal_pixels, focal_ratio, kmeans_1d, log_focal_ratio,
                                   mode_ranking, quantize, rank_scores)
from amodalsize.geometry import depth_from_height


@pytest.mark.parametrize("f35,expected", [(36, 1.0), (50, 50 / 36)])
def test_ratio_from_35mm(f35, expected):
    assert focal_ratio(FocalMetadata((1, 1), f35)) == pytest.approx(expected, abs=1e-12)
    assert focal_ratio(FocalMetadata((1, 1), 50)) == pytest.approx(1.3889, abs=1e-4)


def test_ratio_from_sensor_width():
    meta = FocalMetadata((5, 1), 28)
    assert focal_ratio(meta, 6.17) == pytest.approx(0.8104, abs=1e-4)
    assert log_focal_ratio(meta, 6.17) == pytest.approx(math.log(5 / 6.17))


def test_ratio_needs_a_source():
    with pytest.raises(InputError):
        focal_ratio(FocalMetadata((5, 1)))


def test_focal_pixels():
    assert focal_pixels(1.0, 1000) == 1000
    assert focal_pixels(1.3889, 3600) == pytest.approx(5000, abs=1)
    assert depth_from_height(5000, 1.5, 150) == pytest.approx(50)
    with pytest.raises(InputError):
        focal_pixels(0.0, 100)


def test_kmeans_each_value_own_center():
    x = [0.3, -1.0, 2.0, 5.0]
    m = kmeans_1d(x, 4)
    assert list(m.centers_) == sorted(x)
    assert m.inertia_ == 0.0


def test_kmeans_two_clusters():
    m = kmeans_1d([0, 0, 0, 10, 10, 10], 2)
    assert list(m.centers_) == [0.0, 10.0]
    assert list(m.boundaries_) == [5.0]


def test_kmeans_separated_clusters():
    rng = np.random.default_rng(0)
    sep = 1.0
    means = np.arange(10) * sep
    x = np.concatenate([rng.normal(mu, 0.01 * sep, 50) for mu in means])
    m = kmeans_1d(x, 10)
    assert np.all(np.abs(m.centers_ - means) < 0.05 * sep)


def test_kmeans_inertia_non_increasing_and_fixed_point():
    rng = np.random.default_rng(1)
    x = np.sort(rng.lognormal(0, 1, 400))
    m = kmeans_1d(x, 10)
    h = m.inertia_history_
    assert all(b <= a * (1 + 1e-12) for a, b in zip(h, h[1:]))
    labels = m.transform(x)
    for j in range(10):
        assert m.centers_[j] == pytest.approx(x[labels == j].mean(), rel=1e-12)
    assert np.all(np.diff(m.centers_) > 0)


def test_kmeans_empty_cluster_repair():
    # quantile seeding lands two centers inside one tight group
    x = np.array([0.0] * 10 + [0.001] * 10 + [100.0])
    m = kmeans_1d(x, 3)
    assert np.all(np.bincount(m.transform(x), minlength=3) > 0)


def test_kmeans_errors():
    with pytest.raises(InputError):
        kmeans_1d([1.0, 1.0, 2.0], 3)
    with pytest.raises(InputError):
        kmeans_1d([1.0, 2.0], 1)
    with pytest.raises(NotFittedError):
        FocalBinner().transform([0.0])


def test_binner_sklearn_api():
    b = FocalBinner(n_bins=3)
    assert b.get_params() == {"n_bins": 3, "max_iter": 300}
    x = np.array([0.0, 0.1, 0.2, 5.0, 5.1, 9.0, 9.3, 9.4])
    c = clone(b)
    assert c.fit_transform(x).tolist() == [0, 0, 0, 1, 1, 2, 2, 2]
    assert c.predict(x).tolist() == c.transform(x).tolist()


def test_quantize_examples():
    m = kmeans_1d([0, 0, 0, 10, 10, 10], 2)
    assert quantize(0.0, m) == 0 and quantize(10.0, m) == 1
    assert quantize(5.0, m) == 0
    assert quantize(7.3, m) == 1


@settings(max_examples=100)
@given(st.lists(st.floats(-5, 5), min_size=12, max_size=60, unique=True))
def test_quantize_centers_and_nearest(values):
    m = kmeans_1d(values, 4)
    for i, c in enumerate(m.centers_):
        assert quantize(c, m) == i
    for v in values:
        dist = np.abs(m.centers_ - v)
        assert quantize(v, m) == int(np.flatnonzero(dist == dist.min())[0])


def test_rank_scores_ties_lower_first():
    assert rank_scores([[0.1, 0.5, 0.5, 0.0]]).tolist() == [[1, 2, 0, 3]]


def test_eval_topk_chance():
    rng = np.random.default_rng(0)
    truth = np.tile(np.arange(10), 1000)
    rng.shuffle(truth)
    err = eval_topk(chance_rankings(10_000, 10, 7), truth, (1, 3, 5))
    for k, expected in [(1, 0.9), (3, 0.7), (5, 0.5)]:
        assert abs(err[k] - expected) < 0.02


def test_eval_topk_perfect():
    truth = np.arange(20) % 10
    perfect = np.array([[t] + [b for b in range(10) if b != t] for t in truth])
    assert eval_topk(perfect, truth) == {1: 0.0, 3: 0.0, 5: 0.0}


def test_eval_topk_mode_matches_counting():
    rng = np.random.default_rng(3)
    p = np.array([0.3, 0.2, 0.15, 0.1, 0.08, 0.06, 0.05, 0.03, 0.02, 0.01])
    train = rng.choice(10, 5000, p=p)
    test = rng.choice(10, 2000, p=p)
    ranking = mode_ranking(train, 10)
    err = eval_topk(np.tile(ranking, (test.size, 1)), test, (1, 3, 5))
    counts = Counter(train.tolist())
    by_freq = sorted(range(10), key=lambda b: (-counts[b], b))
    for k in (1, 3, 5):
        top = set(by_freq[:k])
        assert err[k] == sum(t not in top for t in test.tolist()) / test.size


def test_eval_topk_monotone_and_errors():
    rng = np.random.default_rng(4)
    rankings = rank_scores(rng.random((300, 10)))
    err = eval_topk(rankings, rng.integers(0, 10, 300), range(1, 11))
    vals = [err[k] for k in range(1, 11)]
    assert all(b <= a for a, b in zip(vals, vals[1:])) and vals[-1] == 0.0
    with pytest.raises(InputError):
        eval_topk(rankings[:, :3], np.zeros(300, int), (5,))
