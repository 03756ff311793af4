import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from actguard.domain import Item, PairDataset, RandomPair
from actguard.errors import EmptyInputError, ParameterError, ShapeError
from actguard.estimator import estimate_metrics, estimate_with_ci, pair_winner
from actguard.simulator import generate_corpus, independent_metrics_config, log_random_pairs

from conftest import make_dataset


def _pair(base_a, base_b, terms_a=(0.0,), terms_b=(0.0,), la=(0.0,), lb=(0.0,)):
    return RandomPair(Item("A", base_a, terms_a, la), Item("B", base_b, terms_b, lb), "p")


def test_pair_winner_examples():
    assert pair_winner(_pair(2.0, 1.0), (0.0,)) == "A"
    assert pair_winner(_pair(1.0, 1.0), (0.0,)) == "B"  # a tie goes to B
    # A leads on base, but B's term overtakes at w = 1: 1 + 0 < 0 + 1.5
    assert pair_winner(_pair(1.0, 0.0, (0.0,), (1.5,)), (1.0,)) == "B"


def test_pair_winner_shape_error():
    with pytest.raises(ShapeError):
        pair_winner(_pair(1.0, 0.0), (1.0, 1.0))


def test_estimate_examples():
    one = make_dataset([((1.0, (0.0, 0.0), (1.0, 0.0)), (0.0, (0.0, 0.0), (0.0, 1.0)))])
    assert estimate_metrics(one, (0.0, 0.0)).values == (1.0, 0.0)

    # winners carry s1 = 1 and s1 = 0
    two = make_dataset(
        [
            ((1.0, (0.0,), (1.0,)), (0.0, (0.0,), (0.0,))),
            ((0.0, (0.0,), (1.0,)), (1.0, (0.0,), (0.0,))),
        ]
    )
    assert estimate_metrics(two, (0.0,)).values == (0.5,)

    ties = make_dataset(
        [((0.0, (0.0,), (1.0,)), (0.0, (0.0,), (b,))) for b in (0.0, 0.25, 1.0, 0.5)]
    )
    assert estimate_metrics(ties, (3.0,)).values == (np.mean([0.0, 0.25, 1.0, 0.5]),)


def test_estimate_empty_and_shape():
    with pytest.raises(EmptyInputError):
        estimate_metrics(PairDataset((), 1, ("s1",)), (0.0,))
    with pytest.raises(ShapeError):
        estimate_metrics(make_dataset([((0.0, (0.0,), (1.0,)), (0.0, (0.0,), (0.0,)))]), (0.0, 1.0))


def test_vectorized_winners_match_pair_winner():
    corpus = generate_corpus(independent_metrics_config(2, 100, seed=4))
    ds = log_random_pairs(corpus, 500, 5)
    w = (0.7, -0.3)
    expected = [
        (p.item_a if pair_winner(p, w) == "A" else p.item_b).labels[0] for p in ds.pairs
    ]
    assert estimate_metrics(ds, w).values[0] == math.fsum(expected) / len(expected)


@st.composite
def datasets(draw):
    m = draw(st.integers(1, 30))
    vals = st.floats(-5, 5, allow_nan=False)
    labels = st.floats(0, 1)
    rows = [
        ((draw(vals), (draw(vals), draw(vals)), (draw(labels), draw(labels))),
         (draw(vals), (draw(vals), draw(vals)), (draw(labels), draw(labels))))
        for _ in range(m)
    ]
    return make_dataset(rows)


@settings(max_examples=100)
@given(datasets(), st.tuples(st.floats(-3, 3), st.floats(-3, 3)), st.randoms(use_true_random=False))
def test_estimate_is_permutation_invariant_and_bounded(ds, w, rnd):
    pairs = list(ds.pairs)
    rnd.shuffle(pairs)
    shuffled = PairDataset(tuple(pairs), ds.n_metrics, ds.metric_names)
    est = estimate_metrics(ds, w)
    assert [v.hex() for v in est.values] == [v.hex() for v in estimate_metrics(shuffled, w).values]
    for i, v in enumerate(est.values):
        col = [x for p in ds.pairs for x in (p.item_a.labels[i], p.item_b.labels[i])]
        assert min(col) <= v <= max(col)


@settings(max_examples=100)
@given(datasets(), st.tuples(st.floats(-3, 3), st.floats(-3, 3)), st.integers(-8, 8))
def test_common_power_of_two_scaling_keeps_winners(ds, w, k):
    c = 2.0**k
    scaled = PairDataset(
        tuple(
            RandomPair(
                Item(p.item_a.item_id, c * p.item_a.base_score, [c * t for t in p.item_a.terms], p.item_a.labels),
                Item(p.item_b.item_id, c * p.item_b.base_score, [c * t for t in p.item_b.terms], p.item_b.labels),
                p.pair_id,
            )
            for p in ds.pairs
        ),
        ds.n_metrics,
        ds.metric_names,
    )
    assert [pair_winner(p, w) for p in ds.pairs] == [pair_winner(p, w) for p in scaled.pairs]
    assert estimate_metrics(ds, w) == estimate_metrics(scaled, w)


@settings(max_examples=60)
@given(
    st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3)), min_size=1, max_size=40),
    st.floats(-1, 1),
)
def test_monotone_when_label_is_increasing_in_term(rows, cut):
    # label = 1 if term > cut: every flip caused by a larger weight moves the
    # win to the item with the larger term, which never has the smaller label
    def item(name, base, t):
        return Item(name, base, (t,), (1.0 if t > cut else 0.0,))

    ds = PairDataset(
        tuple(RandomPair(item(f"a{k}", ba, ta), item(f"b{k}", bb, tb), f"p{k}") for k, (ba, ta, bb, tb) in enumerate(rows)),
        1,
        ("s1",),
    )
    values = [estimate_metrics(ds, (w,)).values[0] for w in np.linspace(0, 10, 21)]
    assert all(x <= y for x, y in zip(values, values[1:]))


def test_monotone_on_simulated_correlated_metric():
    corpus = generate_corpus(independent_metrics_config(2, 2000, seed=11, term_coef=2.0))
    ds = log_random_pairs(corpus, 20_000, 12)
    values = [estimate_metrics(ds, (w, 0.5)).values[0] for w in (0.0, 0.25, 0.5, 1.0, 2.0, 4.0)]
    assert all(x <= y for x, y in zip(values, values[1:]))


def test_consistency_between_sample_sizes():
    corpus = generate_corpus(independent_metrics_config(2, 3000, seed=21))
    w = (0.8, 0.3)
    small = estimate_metrics(log_random_pairs(corpus, 10_000, 1), w).values
    large = estimate_metrics(log_random_pairs(corpus, 100_000, 2), w).values
    assert all(abs(a - b) < 0.01 for a, b in zip(small, large))


def test_ci_zero_variance():
    ds = make_dataset([((1.0, (0.0,), (1.0,)), (0.0, (0.0,), (0.0,)))] * 5)
    est = estimate_with_ci(ds, (0.0,), resamples=200, seed=1)
    assert est.ci == ((1.0, 1.0),)


def test_ci_is_reproducible():
    corpus = generate_corpus(independent_metrics_config(2, 200, seed=3))
    ds = log_random_pairs(corpus, 500, 4)
    a = estimate_with_ci(ds, (0.5, 0.5), resamples=300, seed=9)
    b = estimate_with_ci(ds, (0.5, 0.5), resamples=300, seed=9)
    assert a == b
    for (lo, hi), v in zip(a.ci, a.values):
        assert lo <= v <= hi


def test_ci_width_matches_normal_approximation():
    rng = np.random.default_rng(2024)
    coins = rng.integers(0, 2, size=1000).astype(float)
    ds = make_dataset([((1.0, (0.0,), (c,)), (0.0, (0.0,), (1.0 - c,))) for c in coins])
    (lo, hi), = estimate_with_ci(ds, (0.0,), confidence=0.95, resamples=2000, seed=0).ci
    expected = 2 * 1.96 * math.sqrt(0.25 / 1000)
    assert expected == pytest.approx(0.062, abs=5e-4)
    assert abs((hi - lo) - expected) <= 0.3 * expected


@pytest.mark.parametrize("confidence", [0.0, 1.0, -0.5, 1.5])
def test_ci_rejects_bad_confidence(confidence, tiny_dataset):
    with pytest.raises(ParameterError):
        estimate_with_ci(tiny_dataset, (0.0, 0.0), confidence=confidence)


def test_ci_rejects_few_resamples(tiny_dataset):
    with pytest.raises(ParameterError):
        estimate_with_ci(tiny_dataset, (0.0, 0.0), resamples=50)
