"""Review sessions that gate which candidate groups enter a training set.

A session presents its items in two phases.  Phase one asks, per hash
bin, whether the bin is background clutter; approving that question
drops every still-pending group that came out of the bin.  Phase two
asks, per surviving group, whether it matches the session label.

Decisions are an append-only event log.  Session state is always
reconstructed by replaying the log over the item list, so a process can
stop and resume without losing review progress.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

from .corpus import Corpus, normalize_label
from .lsh import serialize_bin_key
from .segmenter import image_id_of_region

__all__ = [
    "ApprovalConflict",
    "ApprovalSession",
    "Decision",
    "OracleConfig",
    "ReviewItem",
    "load_session",
    "oracle_decision",
    "read_decision_log",
    "run_oracle",
    "serialize_bin_key",
    "write_session",
]

KIND_BIN = "bin_background"
KIND_CLUSTER = "cluster_relevance"
APPROVED = "approved"
REJECTED = "rejected"

_KINDS = (KIND_BIN, KIND_CLUSTER)
_DECISIONS = (APPROVED, REJECTED)


class ApprovalConflict(Exception):
    """Raised when a decision targets an item that is no longer pending."""


@dataclass(frozen=True)
class ReviewItem:
    item_id: str
    kind: str
    label: str
    parent_bin_key: str
    payload_id: str
    member_region_ids: tuple[str, ...]
    collage_path: str

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown item kind '{self.kind}'")
        if not self.member_region_ids:
            raise ValueError(f"item {self.item_id} has no member regions")


@dataclass(frozen=True)
class Decision:
    item_id: str
    kind: str
    decision: str
    decider: str
    timestamp: float


class ApprovalSession:
    """One label's review queue plus its replayable decision log."""

    def __init__(self, label: str, items: list[ReviewItem], log_path: Path | str):
        self.label = normalize_label(label)
        self.log_path = Path(log_path)
        if not items:
            raise ValueError("nothing to review")
        ordered = [i for i in items if i.kind == KIND_BIN]
        ordered += [i for i in items if i.kind == KIND_CLUSTER]
        self.items: dict[str, ReviewItem] = {}
        for item in ordered:
            if item.item_id in self.items:
                raise ValueError(f"duplicate item id {item.item_id}")
            self.items[item.item_id] = item
        self._decided: dict[str, Decision] = {}
        self._dropped: set[str] = set()
        if self.log_path.exists():
            for decision in read_decision_log(self.log_path):
                self._apply(decision)

    @property
    def total(self) -> int:
        return len(self.items)

    def pending_items(self) -> list[ReviewItem]:
        return [
            item
            for item in self.items.values()
            if item.item_id not in self._decided and item.item_id not in self._dropped
        ]

    def next_item(self) -> ReviewItem | None:
        pending = self.pending_items()
        return pending[0] if pending else None

    def decisions(self) -> list[Decision]:
        return list(self._decided.values())

    def decision_counts(self) -> dict[str, int]:
        """Decisions made so far, tallied per item kind."""
        counts = {KIND_BIN: 0, KIND_CLUSTER: 0}
        for record in self._decided.values():
            counts[record.kind] += 1
        return counts

    def dropped_item_ids(self) -> set[str]:
        return set(self._dropped)

    def status_of(self, item_id: str) -> str:
        """One of pending, approved, rejected, dropped."""
        if item_id not in self.items:
            raise KeyError(f"no item {item_id} in session {self.label}")
        record = self._decided.get(item_id)
        if record is not None:
            return record.decision
        return "dropped" if item_id in self._dropped else "pending"

    def decision_for(self, item_id: str) -> Decision | None:
        return self._decided.get(item_id)

    def decide(
        self, item_id: str, decision: str, decider: str, timestamp: float = 0.0
    ) -> Decision:
        if decision not in _DECISIONS:
            raise ValueError(f"decision must be one of {_DECISIONS}")
        if item_id not in self.items:
            raise KeyError(f"no item {item_id} in session {self.label}")
        if item_id in self._decided:
            raise ApprovalConflict(f"item {item_id} already decided")
        if item_id in self._dropped:
            raise ApprovalConflict(f"item {item_id} was dropped by a bin decision")
        record = Decision(
            item_id=item_id,
            kind=self.items[item_id].kind,
            decision=decision,
            decider=decider,
            timestamp=timestamp,
        )
        self._apply(record)
        self.log_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.log_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(asdict(record), sort_keys=True) + "\n")
        return record

    def _apply(self, record: Decision) -> None:
        item = self.items.get(record.item_id)
        if item is None:
            raise ValueError(f"decision log names unknown item {record.item_id}")
        self._decided[record.item_id] = record
        if item.kind == KIND_BIN and record.decision == APPROVED:
            for other in self.items.values():
                if (
                    other.kind == KIND_CLUSTER
                    and other.parent_bin_key == item.parent_bin_key
                    and other.item_id not in self._decided
                ):
                    self._dropped.add(other.item_id)

    def approved_cluster_ids(self) -> list[str]:
        """Payload ids of relevance items approved so far, in item order."""
        return [
            item.payload_id
            for item in self.items.values()
            if item.kind == KIND_CLUSTER
            and item.item_id in self._decided
            and self._decided[item.item_id].decision == APPROVED
        ]


def write_session(session: ApprovalSession, path: Path | str) -> None:
    payload = {
        "label": session.label,
        "items": [asdict(item) for item in session.items.values()],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_session(session_path: Path | str, log_path: Path | str) -> ApprovalSession:
    with open(session_path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    items = [
        ReviewItem(
            item_id=raw["item_id"],
            kind=raw["kind"],
            label=raw["label"],
            parent_bin_key=raw["parent_bin_key"],
            payload_id=raw["payload_id"],
            member_region_ids=tuple(raw["member_region_ids"]),
            collage_path=raw["collage_path"],
        )
        for raw in payload["items"]
    ]
    return ApprovalSession(payload["label"], items, log_path)


def read_decision_log(path: Path | str) -> list[Decision]:
    decisions = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            decisions.append(
                Decision(
                    item_id=raw["item_id"],
                    kind=raw["kind"],
                    decision=raw["decision"],
                    decider=raw["decider"],
                    timestamp=float(raw["timestamp"]),
                )
            )
    return decisions


@dataclass(frozen=True)
class OracleConfig:
    relevance_threshold: float = 0.5
    min_background_labels: int = 3

    def __post_init__(self) -> None:
        if not 0.0 < self.relevance_threshold <= 1.0:
            raise ValueError("relevance_threshold must be in (0, 1]")
        if self.min_background_labels < 2:
            raise ValueError("min_background_labels must be >= 2")


def _truth_fractions(
    corpus: Corpus, region_ids: tuple[str, ...]
) -> dict[str, float]:
    """Fraction of the item's distinct parent images carrying each truth label."""
    image_ids = sorted({image_id_of_region(rid) for rid in region_ids})
    counts: dict[str, int] = {}
    for image_id in image_ids:
        for label in corpus.record(image_id).truth_labels:
            counts[label] = counts.get(label, 0) + 1
    return {label: count / len(image_ids) for label, count in counts.items()}


def oracle_decision(item: ReviewItem, corpus: Corpus, config: OracleConfig) -> str:
    """Ground-truth answer for one review item.

    A group is relevant when at least the threshold fraction of its
    distinct parent images truly carry the session label.  A bin is
    background when its parents span several truth labels with none of
    them reaching that threshold.
    """
    fractions = _truth_fractions(corpus, item.member_region_ids)
    if item.kind == KIND_CLUSTER:
        hit = fractions.get(normalize_label(item.label), 0.0)
        return APPROVED if hit >= config.relevance_threshold else REJECTED
    spread = len(fractions) >= config.min_background_labels
    diffuse = all(f < config.relevance_threshold for f in fractions.values())
    return APPROVED if spread and diffuse else REJECTED


def run_oracle(
    session: ApprovalSession, corpus: Corpus, config: OracleConfig | None = None
) -> int:
    """Answer every pending item in queue order; returns decisions made."""
    cfg = config or OracleConfig()
    made = 0
    while True:
        item = session.next_item()
        if item is None:
            return made
        session.decide(
            item.item_id, oracle_decision(item, corpus, cfg), decider="oracle"
        )
        made += 1
