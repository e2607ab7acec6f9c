"""Nearest-neighbor annotation and ranking quality measures.

A label's annotator scores an image by the share of hand-approved
positives among its nearest training examples in whole-image feature
space.  Quality is the mean precision at each relevant rank of the
resulting ordering, averaged over several resampling rounds so that a
lucky negative draw cannot decide a comparison.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, candidate_images, normalize_label
from .trainset import Provenance, Trainset, TrainsetConfig, sample_negatives

_NO_PROVENANCE = Provenance(
    approved_cluster_ids=(), approvals_used=0, construction_rate=None
)


@dataclass(frozen=True)
class AnnotatorConfig:
    neighbors: int = 25
    rounds: int = 3

    def __post_init__(self) -> None:
        if self.neighbors < 1:
            raise ValueError("neighbors must be >= 1")
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")


def knn_scores(
    train_matrix: np.ndarray,
    train_positive: np.ndarray,
    query_matrix: np.ndarray,
    neighbors: int,
) -> np.ndarray:
    """Positive share among each query's nearest training rows.

    Train rows must arrive in a deterministic order (callers sort by
    image id); distance ties then resolve to the earlier row.  When the
    training set is smaller than the neighbor count, all of it votes.
    """
    train = np.asarray(train_matrix, dtype=np.float64)
    queries = np.atleast_2d(np.asarray(query_matrix, dtype=np.float64))
    flags = np.asarray(train_positive, dtype=bool)
    if train.shape[0] != flags.shape[0]:
        raise ValueError("one positive flag per training row is required")
    if train.shape[0] == 0:
        raise ValueError("cannot score against an empty training set")
    k = min(neighbors, train.shape[0])
    t_sq = (train**2).sum(axis=1)
    q_sq = (queries**2).sum(axis=1)
    d2 = q_sq[:, None] + t_sq[None, :] - 2.0 * (queries @ train.T)
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return flags[order].sum(axis=1) / float(k)


def average_precision(
    ids: list[str], scores: np.ndarray, relevant: set[str]
) -> float:
    """Non-interpolated average precision of a scored ranking.

    Items are ranked by descending score with ties broken by ascending
    id.  Returns 0 when no ranked item is relevant.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if len(ids) != scores.shape[0]:
        raise ValueError("one score per id is required")
    order = sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))
    hits = 0
    precision_sum = 0.0
    for rank, index in enumerate(order, start=1):
        if ids[index] in relevant:
            hits += 1
            precision_sum += hits / rank
    if hits == 0:
        return 0.0
    return precision_sum / hits


def mean_average_precision(
    aps: dict[str, float], relevant_counts: dict[str, int]
) -> float:
    """Unweighted mean over labels that have at least one relevant item."""
    kept = [label for label in aps if relevant_counts.get(label, 0) > 0]
    skipped = sorted(set(aps) - set(kept))
    if skipped:
        warnings.warn(
            f"labels without relevant test images excluded from the mean: "
            f"{', '.join(skipped)}",
            stacklevel=2,
        )
    if not kept:
        return 0.0
    return float(np.mean([aps[label] for label in kept]))


@dataclass(frozen=True)
class LabelEvaluation:
    label: str
    ap_constructed: float
    ap_baseline: float
    relevant_count: int


def score_trainset(
    trainset: Trainset,
    features_by_id: dict[str, np.ndarray],
    query_ids: list[str],
    neighbors: int,
) -> np.ndarray:
    """Score query images against one training set; all zero when empty."""
    if not trainset.positive_ids:
        return np.zeros(len(query_ids))
    train_ids = sorted(trainset.positive_ids) + sorted(trainset.negative_ids)
    positives = set(trainset.positive_ids)
    train = np.stack([features_by_id[iid] for iid in train_ids])
    flags = np.array([iid in positives for iid in train_ids])
    queries = np.stack([features_by_id[iid] for iid in query_ids])
    return knn_scores(train, flags, queries, neighbors)


def evaluate_label(
    corpus: Corpus,
    label: str,
    constructed: Trainset,
    features_by_id: dict[str, np.ndarray],
    annotator_config: AnnotatorConfig,
    trainset_config: TrainsetConfig,
    seed: int,
) -> LabelEvaluation:
    """Compare the constructed set against a tag-sampled baseline.

    Each round redraws negatives for both arms and redraws the baseline
    positives uniformly from the label's tagged candidates, matched in
    size to the constructed positives.  Average precision over the test
    split is averaged across rounds.  An arm with no positives scores 0.
    """
    label = normalize_label(label)
    test_ids = sorted(record.image_id for record in corpus.testing)
    if not test_ids:
        raise ValueError("corpus has no testing split to evaluate on")
    relevant = {
        iid for iid in test_ids if label in corpus.record(iid).truth_labels
    }
    candidates = candidate_images(corpus, label)
    n_pos = min(len(constructed.positive_ids), len(candidates))
    if n_pos < len(constructed.positive_ids):
        warnings.warn(
            f"label '{label}': baseline positives capped at the "
            f"{len(candidates)} available candidates",
            stacklevel=2,
        )

    rounds = np.random.SeedSequence(seed).spawn(annotator_config.rounds)
    ap_constructed = 0.0
    ap_baseline = 0.0
    for round_seq in rounds:
        neg_seed_c, pos_seed_b, neg_seed_b = round_seq.spawn(3)
        arm_c = Trainset(
            label=label,
            positive_ids=constructed.positive_ids,
            negative_ids=sample_negatives(
                corpus, constructed.positive_ids, candidates, trainset_config,
                neg_seed_c,
            ),
            provenance=_NO_PROVENANCE,
        )
        if n_pos > 0:
            rng = np.random.default_rng(pos_seed_b)
            picked = rng.choice(len(candidates), size=n_pos, replace=False)
            base_pos = tuple(sorted(candidates[i] for i in picked.tolist()))
        else:
            base_pos = ()
        arm_b = Trainset(
            label=label,
            positive_ids=base_pos,
            negative_ids=sample_negatives(
                corpus, base_pos, candidates, trainset_config, neg_seed_b
            ),
            provenance=_NO_PROVENANCE,
        )
        for arm, bucket in ((arm_c, "c"), (arm_b, "b")):
            if not arm.positive_ids:
                continue  # an arm with nothing to learn from scores 0
            scores = score_trainset(
                arm, features_by_id, test_ids, annotator_config.neighbors
            )
            value = average_precision(test_ids, scores, relevant)
            if bucket == "c":
                ap_constructed += value
            else:
                ap_baseline += value
    return LabelEvaluation(
        label=label,
        ap_constructed=ap_constructed / annotator_config.rounds,
        ap_baseline=ap_baseline / annotator_config.rounds,
        relevant_count=len(relevant),
    )
