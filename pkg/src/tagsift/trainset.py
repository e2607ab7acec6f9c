"""Per-label training sets assembled from approved region groups."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .corpus import Corpus, normalize_label
from .segmenter import image_id_of_region


@dataclass(frozen=True)
class TrainsetConfig:
    negative_ratio: float = 1.0
    # Keeping tagged-but-unapproved images out of the negative pool avoids
    # training against images that merely failed review.
    exclude_candidates: bool = True

    def __post_init__(self) -> None:
        if self.negative_ratio <= 0:
            raise ValueError("negative_ratio must be positive")


@dataclass(frozen=True)
class Provenance:
    """How a training set came to be: which approvals produced it."""

    approved_cluster_ids: tuple[str, ...]
    approvals_used: int
    construction_rate: float | None

    def __post_init__(self) -> None:
        if self.approvals_used < 0:
            raise ValueError("approvals_used must be >= 0")


@dataclass(frozen=True)
class Trainset:
    label: str
    positive_ids: tuple[str, ...]
    negative_ids: tuple[str, ...]
    provenance: Provenance

    def __post_init__(self) -> None:
        if set(self.positive_ids) & set(self.negative_ids):
            raise ValueError(f"trainset {self.label} mixes positives and negatives")

    @property
    def size(self) -> int:
        return len(self.positive_ids) + len(self.negative_ids)


def positives_from_regions(region_ids: Iterable[str]) -> tuple[str, ...]:
    """Distinct parent images of the given regions, id ordered."""
    return tuple(sorted({image_id_of_region(rid) for rid in region_ids}))


def sample_negatives(
    corpus: Corpus,
    positive_ids: Iterable[str],
    candidate_ids: Iterable[str],
    config: TrainsetConfig,
    seed: int | np.random.SeedSequence,
) -> tuple[str, ...]:
    """Uniform development-split sample disjoint from the positives.

    The pool excludes the positives and, unless configured otherwise,
    every candidate image.  The draw is without replacement, sized by
    the configured ratio and capped at the pool size.
    """
    excluded = set(positive_ids)
    if config.exclude_candidates:
        excluded.update(candidate_ids)
    pool = sorted(
        record.image_id
        for record in corpus.development
        if record.image_id not in excluded
    )
    wanted = min(round(config.negative_ratio * len(set(positive_ids))), len(pool))
    if wanted <= 0:
        return ()
    rng = np.random.default_rng(seed)
    picked = rng.choice(len(pool), size=wanted, replace=False)
    return tuple(sorted(pool[i] for i in picked.tolist()))


def build_trainset(
    corpus: Corpus,
    label: str,
    approved_clusters: dict[str, tuple[str, ...]],
    candidate_ids: Iterable[str],
    approvals_used: int,
    config: TrainsetConfig,
    seed: int | np.random.SeedSequence,
) -> Trainset:
    """Positives from approved groups, negatives sampled, lineage recorded."""
    label = normalize_label(label)
    candidates = list(candidate_ids)
    positives = positives_from_regions(
        rid for members in approved_clusters.values() for rid in members
    )
    development = {record.image_id for record in corpus.development}
    for image_id in positives:
        if image_id not in development:
            raise ValueError(
                f"positive '{image_id}' is not a development-split image"
            )
    negatives = sample_negatives(corpus, positives, candidates, config, seed)
    rate = len(positives) / len(candidates) if candidates else None
    return Trainset(
        label=label,
        positive_ids=positives,
        negative_ids=negatives,
        provenance=Provenance(
            approved_cluster_ids=tuple(sorted(approved_clusters)),
            approvals_used=approvals_used,
            construction_rate=rate,
        ),
    )


def label_precision(corpus: Corpus, image_ids: Iterable[str], label: str) -> float:
    """Fraction of the given images whose ground truth carries the label."""
    label = normalize_label(label)
    ids = list(image_ids)
    if not ids:
        return 0.0
    hits = sum(1 for iid in ids if label in corpus.record(iid).truth_labels)
    return hits / len(ids)


def write_trainsets(path: Path | str, trainsets: list[Trainset]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ts in trainsets:
            row = {
                "label": ts.label,
                "positive_ids": list(ts.positive_ids),
                "negative_ids": list(ts.negative_ids),
                "provenance": {
                    "approved_cluster_ids": list(ts.provenance.approved_cluster_ids),
                    "approvals_used": ts.provenance.approvals_used,
                    "construction_rate": ts.provenance.construction_rate,
                },
            }
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def load_trainsets(path: Path | str) -> list[Trainset]:
    trainsets = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            prov = raw["provenance"]
            trainsets.append(
                Trainset(
                    label=raw["label"],
                    positive_ids=tuple(raw["positive_ids"]),
                    negative_ids=tuple(raw["negative_ids"]),
                    provenance=Provenance(
                        approved_cluster_ids=tuple(prov["approved_cluster_ids"]),
                        approvals_used=int(prov["approvals_used"]),
                        construction_rate=prov["construction_rate"],
                    ),
                )
            )
    return trainsets
