import numpy as np
import pytest

from actguard.domain import GridSpec, GuardrailConfig, Item, PairDataset, RandomPair
from actguard.estimator import estimate_metrics
from actguard.simulator import MetricModel, SimCorpusConfig, generate_corpus, log_random_pairs

def make_dataset(rows, names=None, treatment_id="t", n=None):
    """rows: iterable of ((base, terms, labels), (base, terms, labels))."""
    pairs = []
    for k, (a, b) in enumerate(rows):
        pairs.append(RandomPair(Item(f"a{k}", *a), Item(f"b{k}", *b), f"p{k}"))
    n = len(names) if names else (n or len(rows[0][0][1]))
    return PairDataset(tuple(pairs), n, names or tuple(f"s{i + 1}" for i in range(n)), treatment_id)

def random_instance(seed, n_metrics=None, pair_count=300, coupled=False):
    """A small seeded selection problem whose guardrails are feasible.

    Thresholds are the estimates at a random grid point, so that point is
    valid by construction.
    """
    rng = np.random.default_rng(seed)
    n = int(n_metrics or rng.integers(1, 4))
    metrics = []
    for i in range(n):
        cross = {}
        if coupled and i > 0:
            cross = {0: -1.5}
        metrics.append(
            MetricModel(
                name=f"s{i + 1}",
                intercept=float(rng.uniform(-1, 0.5)),
                term_coef=float(rng.uniform(0.5, 2.5)),
                cross_coefs=cross,
            )
        )
    corpus = generate_corpus(SimCorpusConfig(item_count=200, metrics=tuple(metrics), seed=seed))
    dataset = log_random_pairs(corpus, pair_count, seed + 1)
    per_axis = {1: 30, 2: 20, 3: 12}[n]
    step = float(rng.choice([0.1, 0.25, 0.5]))
    grids = {i: GridSpec(0.0, step * (per_axis - 1), step) for i in range(n)}
    target = [float(rng.choice(grids[i].values())) for i in range(n)]
    est = estimate_metrics(dataset, target).values
    thresholds = [est[i] for i in range(n)]
    config = GuardrailConfig(thresholds, [list(range(n))], grids)
    return dataset, config

@pytest.fixture
def tiny_dataset():
    # two well-formed pairs, n = 2
    return make_dataset(
        [
            ((2.0, (0.0, 0.0), (1.0, 0.0)), (1.0, (0.0, 0.0), (0.0, 1.0))),
            ((0.0, (1.0, 0.0), (0.0, 1.0)), (1.0, (0.0, 0.0), (1.0, 1.0))),
        ]
    )
