import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tagsift.annotator import (
    AnnotatorConfig,
    average_precision,
    evaluate_label,
    knn_scores,
    mean_average_precision,
    score_trainset,
)
from tagsift.corpus import Corpus, ImageRecord
from tagsift.trainset import Provenance, Trainset, TrainsetConfig


def knn_oracle(train, flags, query, k):
    """Positive share among the k nearest rows by explicit sort."""
    distances = np.sqrt(((train - query) ** 2).sum(axis=1))
    order = sorted(range(len(train)), key=lambda i: (distances[i], i))
    k = min(k, len(train))
    return sum(bool(flags[i]) for i in order[:k]) / k


def ap_oracle(ids, scores, relevant):
    """Precision-at-every-relevant-rank, straight from the definition."""
    ranked = sorted(zip(scores, ids), key=lambda pair: (-pair[0], pair[1]))
    precisions = []
    hits = 0
    for rank, (_, iid) in enumerate(ranked, start=1):
        if iid in relevant:
            hits += 1
            precisions.append(hits / rank)
    return sum(precisions) / len(precisions) if precisions else 0.0


def test_knn_matches_oracle_on_random_fixtures():
    rng = np.random.default_rng(3)
    for _ in range(20):
        train = rng.normal(size=(12, 4))
        flags = rng.random(12) < 0.5
        queries = rng.normal(size=(5, 4))
        scores = knn_scores(train, flags, queries, neighbors=5)
        for q, score in zip(queries, scores):
            assert score == pytest.approx(knn_oracle(train, flags, q, 5))


def test_knn_breaks_distance_ties_by_row_order():
    # four equidistant training points around the origin; the stable sort
    # must prefer earlier rows, which callers order by image id
    train = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])
    flags = np.array([True, True, False, False])
    assert knn_scores(train, flags, np.zeros((1, 2)), neighbors=2)[0] == 1.0
    assert knn_scores(train, flags, np.zeros((1, 2)), neighbors=3)[0] == pytest.approx(
        2 / 3
    )


def test_knn_example_three_of_five():
    rng = np.random.default_rng(8)
    train = rng.normal(size=(10, 3))
    query = rng.normal(size=3)
    distances = ((train - query) ** 2).sum(axis=1)
    nearest = np.argsort(distances, kind="stable")[:5]
    flags = np.zeros(10, dtype=bool)
    flags[nearest[:3]] = True
    assert knn_scores(train, flags, query[None, :], neighbors=5)[0] == pytest.approx(
        0.6
    )


def test_knn_extremes():
    rng = np.random.default_rng(1)
    train = rng.normal(size=(8, 2))
    queries = rng.normal(size=(3, 2))
    assert (knn_scores(train, np.ones(8, bool), queries, 4) == 1.0).all()
    assert (knn_scores(train, np.zeros(8, bool), queries, 4) == 0.0).all()


def test_knn_small_training_set_uses_everyone():
    train = np.array([[0.0, 0.0], [1.0, 1.0]])
    flags = np.array([True, False])
    assert knn_scores(train, flags, np.zeros((1, 2)), neighbors=25)[0] == 0.5


def test_knn_input_validation():
    with pytest.raises(ValueError):
        knn_scores(np.zeros((0, 2)), np.zeros(0, bool), np.zeros((1, 2)), 3)
    with pytest.raises(ValueError):
        knn_scores(np.zeros((2, 2)), np.zeros(3, bool), np.zeros((1, 2)), 3)


@settings(max_examples=50, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=9),
    k=st.integers(min_value=1, max_value=12),
    seed=st.integers(min_value=0, max_value=999),
)
def test_knn_scores_live_on_the_k_grid(n, k, seed):
    rng = np.random.default_rng(seed)
    train = rng.integers(0, 3, size=(n, 2)).astype(float)
    flags = rng.random(n) < 0.5
    queries = rng.integers(0, 3, size=(4, 2)).astype(float)
    effective = min(k, n)
    scores = knn_scores(train, flags, queries, k)
    counts = np.round(scores * effective)
    np.testing.assert_allclose(scores, counts / effective, atol=1e-12)
    assert ((0.0 <= scores) & (scores <= 1.0)).all()
    for q, score in zip(queries, scores):
        assert score == pytest.approx(knn_oracle(train, flags, q, k))


def test_ap_perfect_ranking():
    ids = ["a", "b", "c", "d"]
    scores = np.array([0.9, 0.8, 0.2, 0.1])
    assert average_precision(ids, scores, {"a", "b"}) == 1.0


def test_ap_interleaved_example():
    ids = ["a", "b", "c"]
    scores = np.array([0.9, 0.5, 0.4])
    assert average_precision(ids, scores, {"a", "c"}) == pytest.approx(
        (1.0 + 2 / 3) / 2
    )


def test_ap_empty_relevant_set():
    assert average_precision(["a", "b"], np.array([0.5, 0.4]), set()) == 0.0


def test_ap_ties_break_by_id():
    ids = ["b", "a"]
    scores = np.array([0.5, 0.5])
    # "a" outranks "b" on equal scores, so a-relevant is a perfect ranking
    assert average_precision(ids, scores, {"a"}) == 1.0
    assert average_precision(ids, scores, {"b"}) == 0.5


def test_ap_invariant_under_monotone_transform():
    rng = np.random.default_rng(5)
    ids = [f"t-{i:02d}" for i in range(12)]
    scores = rng.random(12)
    relevant = set(rng.choice(ids, size=4, replace=False).tolist())
    base = average_precision(ids, scores, relevant)
    assert average_precision(ids, 3.0 * scores + 2.0, relevant) == pytest.approx(base)


@settings(max_examples=80, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=8),
    seed=st.integers(min_value=0, max_value=9999),
)
def test_ap_matches_enumeration_oracle(n, seed):
    rng = np.random.default_rng(seed)
    ids = [f"t-{i}" for i in range(n)]
    scores = rng.integers(0, 4, size=n).astype(float) / 4.0
    relevant = {iid for iid in ids if rng.random() < 0.4}
    assert average_precision(ids, scores, relevant) == pytest.approx(
        ap_oracle(ids, scores, relevant)
    )


def test_map_means_over_labels():
    aps = {"sky": 0.2, "road": 0.4}
    counts = {"sky": 3, "road": 5}
    assert mean_average_precision(aps, counts) == pytest.approx(0.3)
    assert mean_average_precision({"sky": 0.7}, {"sky": 1}) == 0.7


def test_map_excludes_zero_relevant_labels_with_warning():
    aps = {"sky": 0.2, "road": 0.4, "sand": 0.9}
    counts = {"sky": 3, "road": 5, "sand": 0}
    with pytest.warns(UserWarning, match="sand"):
        value = mean_average_precision(aps, counts)
    assert value == pytest.approx(0.3)


def test_map_of_nothing_is_zero():
    with pytest.warns(UserWarning):
        assert mean_average_precision({"sky": 0.5}, {"sky": 0}) == 0.0


def make_eval_corpus(num_dev=24, num_test=12, noise=6):
    """Half of each split truly 'sky'; `noise` irrelevant dev images tagged."""
    records = []
    for i in range(num_dev):
        truly = i < num_dev // 2
        tagged = truly or i >= num_dev - noise
        records.append(
            ImageRecord(
                image_id=f"im-{i:02d}",
                path=f"im-{i:02d}.png",
                split="development",
                tags=frozenset({"sky"} if tagged else {"road"}),
                truth_labels=frozenset({"sky"} if truly else {"road"}),
            )
        )
    for i in range(num_test):
        truly = i < num_test // 2
        records.append(
            ImageRecord(
                image_id=f"te-{i:02d}",
                path=f"te-{i:02d}.png",
                split="testing",
                tags=frozenset(),
                truth_labels=frozenset({"sky"} if truly else {"road"}),
            )
        )
    features = {}
    rng = np.random.default_rng(0)
    for record in records:
        base = 0.0 if "sky" in record.truth_labels else 6.0
        features[record.image_id] = rng.normal(loc=base, scale=0.3, size=5)
    return Corpus(records), features


def constructed_trainset(corpus, positives):
    return Trainset(
        label="sky",
        positive_ids=tuple(sorted(positives)),
        negative_ids=(),
        provenance=Provenance(
            approved_cluster_ids=("c1",), approvals_used=1, construction_rate=None
        ),
    )


def test_score_trainset_without_positives_is_all_zero():
    corpus, features = make_eval_corpus()
    ts = Trainset(
        label="sky",
        positive_ids=(),
        negative_ids=("im-20",),
        provenance=Provenance((), 0, None),
    )
    scores = score_trainset(ts, features, ["te-00", "te-01"], neighbors=3)
    assert (scores == 0.0).all()


def test_clean_positives_beat_noisy_baseline():
    corpus, features = make_eval_corpus()
    truly = [f"im-{i:02d}" for i in range(12)]
    result = evaluate_label(
        corpus,
        "sky",
        constructed_trainset(corpus, truly),
        features,
        AnnotatorConfig(neighbors=5, rounds=3),
        TrainsetConfig(),
        seed=11,
    )
    assert result.relevant_count == 6
    assert result.ap_constructed == pytest.approx(1.0)
    assert result.ap_constructed >= result.ap_baseline


def test_evaluate_label_is_deterministic():
    corpus, features = make_eval_corpus()
    ts = constructed_trainset(corpus, [f"im-{i:02d}" for i in range(8)])
    config = AnnotatorConfig(neighbors=5, rounds=3)
    first = evaluate_label(corpus, "sky", ts, features, config, TrainsetConfig(), 7)
    second = evaluate_label(corpus, "sky", ts, features, config, TrainsetConfig(), 7)
    assert first == second


def test_evaluate_label_warns_when_positives_exceed_candidates():
    corpus, features = make_eval_corpus(noise=0)
    # every truly-sky dev image plus untagged extras outnumber the candidates
    ts = constructed_trainset(corpus, [f"im-{i:02d}" for i in range(14)])
    with pytest.warns(UserWarning, match="capped"):
        evaluate_label(
            corpus,
            "sky",
            ts,
            features,
            AnnotatorConfig(neighbors=3, rounds=1),
            TrainsetConfig(),
            seed=3,
        )


def test_evaluate_label_with_empty_positives_scores_zero():
    corpus, features = make_eval_corpus()
    ts = Trainset(
        label="sky",
        positive_ids=(),
        negative_ids=(),
        provenance=Provenance((), 0, None),
    )
    result = evaluate_label(
        corpus,
        "sky",
        ts,
        features,
        AnnotatorConfig(neighbors=5, rounds=2),
        TrainsetConfig(),
        seed=1,
    )
    assert result.ap_constructed == 0.0
    assert result.ap_baseline == 0.0


def test_identical_positives_and_seeds_tie_the_arms():
    corpus, features = make_eval_corpus()
    from tagsift.trainset import sample_negatives

    positives = tuple(f"im-{i:02d}" for i in range(6))
    negatives = sample_negatives(corpus, positives, [], TrainsetConfig(), seed=21)
    test_ids = sorted(r.image_id for r in corpus.testing)
    relevant = {i for i in test_ids if "sky" in corpus.record(i).truth_labels}
    arms = [
        Trainset(
            label="sky",
            positive_ids=positives,
            negative_ids=negatives,
            provenance=Provenance((), 0, None),
        )
        for _ in range(2)
    ]
    scores = [score_trainset(arm, features, test_ids, 5) for arm in arms]
    assert average_precision(test_ids, scores[0], relevant) == average_precision(
        test_ids, scores[1], relevant
    )


def test_annotator_config_validation():
    with pytest.raises(ValueError):
        AnnotatorConfig(neighbors=0)
    with pytest.raises(ValueError):
        AnnotatorConfig(rounds=0)
