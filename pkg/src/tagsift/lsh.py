"""Locality-sensitive binning of region feature vectors.

Vectors are hashed with random Gaussian projections quantized into fixed
width buckets.  Concatenating several such hashes yields a bin key, so
nearby vectors tend to share a bin and distant vectors rarely do.  A
screening step then keeps just enough of the biggest, tightest bins to
cover the candidate pool twice over.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class HasherConfig:
    num_hashes: int = 8
    bucket_width: float = 0.25

    def __post_init__(self) -> None:
        if self.num_hashes < 1:
            raise ValueError("num_hashes must be >= 1")
        if self.bucket_width <= 0:
            raise ValueError("bucket_width must be positive")


@dataclass(frozen=True, eq=False)
class ProjectionHasher:
    """Frozen draw of projection directions and bucket offsets."""

    directions: np.ndarray = field(repr=False)
    offsets: np.ndarray = field(repr=False)
    bucket_width: float

    @classmethod
    def from_seed(
        cls,
        dim: int,
        config: HasherConfig,
        seed: int | np.random.SeedSequence,
    ) -> "ProjectionHasher":
        rng = np.random.default_rng(seed)
        directions = rng.standard_normal((config.num_hashes, dim))
        offsets = rng.uniform(0.0, config.bucket_width, size=config.num_hashes)
        return cls(
            directions=directions,
            offsets=offsets,
            bucket_width=config.bucket_width,
        )

    @property
    def num_hashes(self) -> int:
        return self.directions.shape[0]

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    def keys(self, matrix: np.ndarray) -> np.ndarray:
        """Integer hash keys, one row of num_hashes buckets per vector."""
        matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
        if matrix.shape[1] != self.dim:
            raise ValueError(
                f"vector dim {matrix.shape[1]} does not match hasher dim {self.dim}"
            )
        projected = matrix @ self.directions.T + self.offsets
        return np.floor(projected / self.bucket_width).astype(np.int64)


@dataclass(frozen=True)
class Bin:
    key: tuple[int, ...]
    member_ids: tuple[str, ...]
    variance: float

    @property
    def size(self) -> int:
        return len(self.member_ids)


def bin_regions(
    ids: list[str], matrix: np.ndarray, hasher: ProjectionHasher
) -> list[Bin]:
    """Group vectors by hash key, recording per-bin spread.

    The spread is the mean over feature dimensions of the population
    variance of member vectors; singleton bins have spread zero.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if len(ids) != matrix.shape[0]:
        raise ValueError(
            f"id count {len(ids)} does not match row count {matrix.shape[0]}"
        )
    keys = hasher.keys(matrix)
    groups: dict[tuple[int, ...], list[int]] = {}
    for row, key in enumerate(map(tuple, keys.tolist())):
        groups.setdefault(key, []).append(row)
    bins = []
    for key in sorted(groups):
        rows = groups[key]
        members = matrix[rows]
        variance = float(members.var(axis=0).mean()) if len(rows) > 1 else 0.0
        bins.append(
            Bin(
                key=key,
                member_ids=tuple(ids[r] for r in rows),
                variance=variance,
            )
        )
    return bins


def serialize_bin_key(key: tuple[int, ...]) -> str:
    return ",".join(str(part) for part in key)


def parse_bin_key(raw: str) -> tuple[int, ...]:
    return tuple(int(part) for part in raw.split(","))


def write_bin_table(bins: list[Bin], path) -> None:
    """Persist bins as TSV: key, size, variance, member region ids."""
    with open(path, "w", encoding="utf-8") as fh:
        for entry in bins:
            fh.write(
                f"{serialize_bin_key(entry.key)}\t{entry.size}\t"
                f"{entry.variance:.9f}\t{','.join(entry.member_ids)}\n"
            )


def load_bin_table(path) -> list[Bin]:
    bins = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise ValueError(f"{path} line {lineno}: expected 4 fields")
            members = tuple(m for m in fields[3].split(",") if m)
            if len(members) != int(fields[1]):
                raise ValueError(
                    f"{path} line {lineno}: size field does not match member count"
                )
            bins.append(
                Bin(
                    key=parse_bin_key(fields[0]),
                    member_ids=members,
                    variance=float(fields[2]),
                )
            )
    return bins


def select_bins(bins: list[Bin], num_candidates: int) -> list[Bin]:
    """Keep the top bins until they hold more than twice the candidate count.

    Bins are ranked by size (descending), then spread (ascending), then
    key.  The shortest prefix whose cumulative member count strictly
    exceeds 2 * num_candidates is returned; if the total never exceeds
    that threshold, every bin is kept.
    """
    if num_candidates < 0:
        raise ValueError("num_candidates must be >= 0")
    ranked = sorted(bins, key=lambda b: (-b.size, b.variance, b.key))
    threshold = 2 * num_candidates
    kept: list[Bin] = []
    covered = 0
    for entry in ranked:
        kept.append(entry)
        covered += entry.size
        if covered > threshold:
            return kept
    return kept
