"""Corpus types, manifest I/O, and per-label candidate resolution.

Manifest format (UTF-8, one record per line, TAB separated):

    image_id<TAB>relative_path<TAB>split<TAB>tag1,tag2,...<TAB>truth1,truth2,...

The fifth field (truth labels) may be empty or absent. Image files are
referenced lazily; loading a manifest never opens them.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

VALID_SPLITS = ("development", "testing")

# image ids are embedded in derived keys (region ids, collage legends, TSV
# member lists), so they must stay free of the separators used there
_FORBIDDEN_ID_CHARS = set("#,\t\n\r ")


class ManifestError(ValueError):
    """Malformed or inconsistent corpus manifest."""


def normalize_label(raw: str) -> str:
    return raw.strip().lower()


def _parse_label_field(field: str) -> frozenset[str]:
    return frozenset(normalize_label(t) for t in field.split(",") if t.strip())


@dataclass(frozen=True)
class ImageRecord:
    """One corpus image. tags may be noisy; truth_labels are ground truth
    consumed only by the oracle approver and the evaluator."""

    image_id: str
    path: str
    split: str
    tags: frozenset[str]
    truth_labels: frozenset[str] = frozenset()

    @property
    def has_truth(self) -> bool:
        return bool(self.truth_labels)


class Corpus:
    """Immutable collection of image records with id/split indexes."""

    def __init__(self, records: Iterable[ImageRecord], root: Path | str = "."):
        self.records: tuple[ImageRecord, ...] = tuple(records)
        self.root = Path(root)
        by_id: dict[str, ImageRecord] = {}
        for rec in self.records:
            _validate_record(rec)
            if rec.image_id in by_id:
                raise ManifestError(f"duplicate image_id '{rec.image_id}'")
            by_id[rec.image_id] = rec
        self._by_id = by_id
        vocab: set[str] = set()
        for rec in self.records:
            vocab.update(rec.tags)
            vocab.update(rec.truth_labels)
        self.label_vocabulary: tuple[str, ...] = tuple(sorted(vocab))

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other) -> bool:
        return isinstance(other, Corpus) and self.records == other.records

    def __contains__(self, image_id: str) -> bool:
        return image_id in self._by_id

    def record(self, image_id: str) -> ImageRecord:
        try:
            return self._by_id[image_id]
        except KeyError:
            raise KeyError(f"unknown image_id '{image_id}'") from None

    def split_records(self, split: str) -> list[ImageRecord]:
        return [r for r in self.records if r.split == split]

    @property
    def development(self) -> list[ImageRecord]:
        return self.split_records("development")

    @property
    def testing(self) -> list[ImageRecord]:
        return self.split_records("testing")

    def image_path(self, image_id: str) -> Path:
        return self.root / self.record(image_id).path


def _validate_record(rec: ImageRecord) -> None:
    if not rec.image_id:
        raise ManifestError("empty image_id")
    bad = _FORBIDDEN_ID_CHARS.intersection(rec.image_id)
    if bad:
        raise ManifestError(
            f"image_id '{rec.image_id}' contains forbidden character(s) {sorted(bad)!r}"
        )
    if rec.split not in VALID_SPLITS:
        raise ManifestError(
            f"image_id '{rec.image_id}': split '{rec.split}' not in {VALID_SPLITS}"
        )


def load_manifest(path: Path | str) -> Corpus:
    """Parse a manifest file into a Corpus. Image files are not opened."""
    path = Path(path)
    records: list[ImageRecord] = []
    seen: dict[str, int] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) not in (4, 5):
                raise ManifestError(
                    f"{path.name} line {lineno}: expected 4 or 5 tab-separated fields, "
                    f"got {len(fields)}"
                )
            image_id, rel_path, split = fields[0], fields[1], fields[2]
            if image_id in seen:
                raise ManifestError(
                    f"duplicate image_id '{image_id}' "
                    f"(lines {seen[image_id]} and {lineno})"
                )
            seen[image_id] = lineno
            if not rel_path:
                raise ManifestError(f"{path.name} line {lineno}: empty path")
            if split not in VALID_SPLITS:
                raise ManifestError(
                    f"{path.name} line {lineno}: split '{split}' not in {VALID_SPLITS}"
                )
            tags = _parse_label_field(fields[3])
            truth = _parse_label_field(fields[4]) if len(fields) == 5 else frozenset()
            records.append(ImageRecord(image_id, rel_path, split, tags, truth))
    return Corpus(records, root=path.parent)


def write_manifest(corpus: Corpus, path: Path | str) -> None:
    """Write a corpus back to manifest format (labels sorted for stable bytes)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for rec in corpus.records:
            fh.write(
                "\t".join(
                    (
                        rec.image_id,
                        rec.path,
                        rec.split,
                        ",".join(sorted(rec.tags)),
                        ",".join(sorted(rec.truth_labels)),
                    )
                )
                + "\n"
            )


def candidate_images(corpus: Corpus, label: str) -> list[str]:
    """Development-split image ids whose tag list contains the label, id-ordered."""
    if not label:
        raise ValueError("label must be non-empty")
    label = normalize_label(label)
    return sorted(r.image_id for r in corpus.development if label in r.tags)
