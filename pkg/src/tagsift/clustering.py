"""Exemplar clustering used to refine hash bins into candidate groups.

Each bin is first clustered by passing responsibility and availability
messages between points until a stable exemplar set emerges, then every
exemplar group is split again with a small fixed-k partitioner.  Both
stages are deterministic given their seeds: ties resolve to the lowest
index and no noise is injected into the similarity matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lsh import Bin, parse_bin_key, serialize_bin_key
from .segmenter import image_id_of_region


@dataclass(frozen=True)
class APConfig:
    damping: float = 0.9
    max_iterations: int = 500
    convergence_window: int = 50
    preference: float | str = "median"

    def __post_init__(self) -> None:
        if not 0.0 <= self.damping < 1.0:
            raise ValueError("damping must be in [0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.convergence_window < 1:
            raise ValueError("convergence_window must be >= 1")
        if isinstance(self.preference, str) and self.preference not in ("median", "min"):
            raise ValueError("preference must be 'median', 'min', or a number")


@dataclass(frozen=True, eq=False)
class APResult:
    exemplars: tuple[int, ...]
    labels: np.ndarray = field(repr=False)
    iterations: int
    converged: bool

    def clusters(self) -> list[tuple[int, ...]]:
        """Point indices grouped by exemplar, in exemplar order."""
        return [
            tuple(np.flatnonzero(self.labels == k).tolist()) for k in self.exemplars
        ]


def _squared_distances(matrix: np.ndarray) -> np.ndarray:
    sq = (matrix**2).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (matrix @ matrix.T)
    return np.maximum(d2, 0.0)


def _resolve_preference(similarity: np.ndarray, preference: float | str) -> float:
    off_diagonal = similarity[~np.eye(similarity.shape[0], dtype=bool)]
    if preference == "median":
        return float(np.median(off_diagonal))
    if preference == "min":
        return float(off_diagonal.min())
    return float(preference)


def affinity_propagation(matrix: np.ndarray, config: APConfig | None = None) -> APResult:
    """Cluster points by message passing over negative squared distances.

    Returns the exemplar point indices and a per-point assignment to one
    of them.  When no point accumulates positive evidence the single
    best-scoring point becomes the lone exemplar, so the result always
    covers every point.
    """
    cfg = config or APConfig()
    points = np.asarray(matrix, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("expected a non-empty 2-dimensional point matrix")
    n = points.shape[0]
    if n == 1:
        return APResult(
            exemplars=(0,), labels=np.zeros(1, dtype=np.int64), iterations=0,
            converged=True,
        )

    similarity = -_squared_distances(points)
    np.fill_diagonal(similarity, _resolve_preference(similarity, cfg.preference))

    responsibility = np.zeros((n, n))
    availability = np.zeros((n, n))
    rows = np.arange(n)
    keep = 1.0 - cfg.damping

    stable_for = 0
    previous: tuple[int, ...] = ()
    converged = False
    iterations = 0
    for iterations in range(1, cfg.max_iterations + 1):
        combined = availability + similarity
        best = combined.argmax(axis=1)
        best_value = combined[rows, best].copy()
        combined[rows, best] = -np.inf
        runner_up = combined.max(axis=1)
        fresh_r = similarity - best_value[:, None]
        fresh_r[rows, best] = similarity[rows, best] - runner_up
        responsibility = cfg.damping * responsibility + keep * fresh_r

        positive_r = np.maximum(responsibility, 0.0)
        np.fill_diagonal(positive_r, 0.0)
        support = positive_r.sum(axis=0)
        fresh_a = np.minimum(
            0.0, responsibility.diagonal()[None, :] + support[None, :] - positive_r
        )
        fresh_a[rows, rows] = support
        availability = cfg.damping * availability + keep * fresh_a

        evidence = availability.diagonal() + responsibility.diagonal()
        current = tuple(np.flatnonzero(evidence > 0).tolist())
        if current and current == previous:
            stable_for += 1
        else:
            previous = current
            stable_for = 1 if current else 0
        if stable_for >= cfg.convergence_window:
            converged = True
            break

    evidence = availability.diagonal() + responsibility.diagonal()
    exemplars = np.flatnonzero(evidence > 0)
    if exemplars.size == 0:
        exemplars = np.array([int(evidence.argmax())])
    exemplars, labels = _refine_exemplars(similarity, exemplars)
    return APResult(
        exemplars=tuple(exemplars.tolist()),
        labels=labels.astype(np.int64),
        iterations=iterations,
        converged=converged,
    )


def _assign(similarity: np.ndarray, exemplars: np.ndarray) -> np.ndarray:
    labels = exemplars[np.argmax(similarity[:, exemplars], axis=1)]
    labels[exemplars] = exemplars
    return labels


def _net_similarity(similarity: np.ndarray, exemplars: np.ndarray) -> float:
    """Objective: preference per exemplar plus each point's best match."""
    contributions = similarity[:, exemplars].max(axis=1)
    contributions[exemplars] = similarity.diagonal()[exemplars]
    return float(contributions.sum())


def _refine_exemplars(
    similarity: np.ndarray, exemplars: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Polish the converged exemplar set with a single-move local search.

    Message passing settles on near-optimal sets but can misjudge the
    exemplar count by one on small inputs.  Greedily applying the best
    add, drop, or swap of a single exemplar until none improves the net
    similarity removes those misses while staying deterministic.
    """
    n = similarity.shape[0]
    # pairwise swaps and kick restarts only pay off on small inputs where
    # message passing misjudges the exemplar count; adds and drops alone
    # fix what matters at scale
    thorough = n <= 50
    current, best = _descend(similarity, np.unique(exemplars), thorough)
    if thorough:
        kicks: list[np.ndarray] = []
        members = set(current.tolist())
        for j in range(n):
            if j not in members:
                kicks.append(np.sort(np.append(current, j)))
        if current.size > 1:
            kicks.extend(current[current != k] for k in current.tolist())
        for kick in kicks:
            candidate, score = _descend(similarity, kick, thorough)
            if score > best + 1e-12:
                current, best = candidate, score
    return current, _assign(similarity, current)


def _descend(
    similarity: np.ndarray, start: np.ndarray, try_swaps: bool
) -> tuple[np.ndarray, float]:
    """Greedy single-move improvement of the net similarity to a fixpoint."""
    n = similarity.shape[0]
    current = start
    best = _net_similarity(similarity, current)
    improved = True
    while improved:
        improved = False
        members = set(current.tolist())
        candidates: list[np.ndarray] = []
        for j in range(n):
            if j not in members:
                candidates.append(np.sort(np.append(current, j)))
        if current.size > 1:
            for k in current.tolist():
                smaller = current[current != k]
                candidates.append(smaller)
                if not try_swaps:
                    continue
                for j in range(n):
                    if j not in members:
                        candidates.append(np.sort(np.append(smaller, j)))
        for candidate in candidates:
            score = _net_similarity(similarity, candidate)
            if score > best + 1e-12:
                best = score
                current = candidate
                improved = True
                break
    return current, best


@dataclass(frozen=True)
class KMeansConfig:
    k: int = 3
    max_iterations: int = 100

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True, eq=False)
class KMeansResult:
    labels: np.ndarray = field(repr=False)
    centers: np.ndarray = field(repr=False)
    inertia_history: tuple[float, ...]

    @property
    def num_clusters(self) -> int:
        return self.centers.shape[0]


def _seed_centers(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Random first center, then repeated farthest-point picks."""
    chosen = [int(rng.integers(points.shape[0]))]
    nearest = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    while len(chosen) < k:
        pick = int(nearest.argmax())
        chosen.append(pick)
        nearest = np.minimum(nearest, ((points - points[pick]) ** 2).sum(axis=1))
    return points[chosen].copy()


def kmeans(
    matrix: np.ndarray,
    config: KMeansConfig | None = None,
    seed: int | np.random.SeedSequence = 0,
) -> KMeansResult:
    """Fixed-k partitioning with deterministic ties.

    Clusters that lose every point are dropped and labels renumbered, so
    the result can hold fewer than k groups.  With at most k points each
    point becomes its own group.
    """
    cfg = config or KMeansConfig()
    points = np.asarray(matrix, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("expected a non-empty 2-dimensional point matrix")
    n = points.shape[0]
    if n <= cfg.k:
        # singleton per distinct point; exact duplicates share a cluster so
        # degenerate groups collapse instead of fanning out
        labels = np.full(n, -1, dtype=np.int64)
        center_rows: list[int] = []
        for i in range(n):
            for slot, row in enumerate(center_rows):
                if np.array_equal(points[i], points[row]):
                    labels[i] = slot
                    break
            else:
                labels[i] = len(center_rows)
                center_rows.append(i)
        return KMeansResult(
            labels=labels,
            centers=points[center_rows].copy(),
            inertia_history=(0.0,),
        )

    rng = np.random.default_rng(seed)
    centers = _seed_centers(points, cfg.k, rng)
    labels = np.full(n, -1, dtype=np.int64)
    history: list[float] = []
    for _ in range(cfg.max_iterations):
        distances = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        assignment = distances.argmin(axis=1).astype(np.int64)
        history.append(float(distances[np.arange(n), assignment].sum()))
        used = np.unique(assignment)
        if used.size < centers.shape[0]:
            remap = np.zeros(centers.shape[0], dtype=np.int64)
            remap[used] = np.arange(used.size)
            assignment = remap[assignment]
            centers = centers[used]
        if np.array_equal(assignment, labels):
            break
        labels = assignment
        centers = np.stack(
            [points[labels == c].mean(axis=0) for c in range(centers.shape[0])]
        )
    return KMeansResult(
        labels=labels, centers=centers, inertia_history=tuple(history)
    )


STAGE_AP = "ap"
STAGE_KMEANS_SUB = "kmeans-sub"


@dataclass(frozen=True)
class Cluster:
    """One refined group of regions with its bin lineage recorded."""

    cluster_id: str
    parent_bin_key: tuple[int, ...]
    member_region_ids: tuple[str, ...]
    stage: str
    exemplar_region_id: str | None = None

    def __post_init__(self) -> None:
        if self.stage not in (STAGE_AP, STAGE_KMEANS_SUB):
            raise ValueError(f"unknown cluster stage '{self.stage}'")
        if not self.member_region_ids:
            raise ValueError(f"cluster {self.cluster_id} has no members")
        if (
            self.exemplar_region_id is not None
            and self.exemplar_region_id not in self.member_region_ids
        ):
            raise ValueError(
                f"cluster {self.cluster_id} exemplar is not one of its members"
            )


def refine_bins(
    bins: list[Bin],
    region_vectors: dict[str, np.ndarray],
    global_vectors: dict[str, np.ndarray],
    ap_config: APConfig | None = None,
    kmeans_config: KMeansConfig | None = None,
    seed: int = 0,
) -> list[Cluster]:
    """Split every bin into exemplar groups and those into fixed-k parts.

    Stage one clusters each bin's region vectors by message passing.
    Stage two re-represents every region by its parent image's whole
    image vector and splits each exemplar group with fixed-k means, so
    regions land together only when their surrounding images also agree.
    Only the stage-two clusters are returned; their ids encode lineage
    as b<bin>.a<exemplar group>.k<part>.
    """
    ap_cfg = ap_config or APConfig()
    km_cfg = kmeans_config or KMeansConfig()
    clusters: list[Cluster] = []
    for bin_index, entry in enumerate(bins):
        for rid in entry.member_ids:
            if rid not in region_vectors:
                raise ValueError(f"missing region feature for '{rid}'")
        points = np.stack([region_vectors[rid] for rid in entry.member_ids])
        grouped = affinity_propagation(points, ap_cfg).clusters()
        for group_index, group_rows in enumerate(grouped):
            members = [entry.member_ids[r] for r in group_rows]
            context = []
            for rid in members:
                image_id = image_id_of_region(rid)
                if image_id not in global_vectors:
                    raise ValueError(
                        f"missing global feature for the parent image of '{rid}'"
                    )
                context.append(global_vectors[image_id])
            result = kmeans(
                np.stack(context),
                km_cfg,
                seed=np.random.SeedSequence(seed, spawn_key=(bin_index, group_index)),
            )
            for part in range(result.num_clusters):
                part_members = tuple(
                    members[r] for r in np.flatnonzero(result.labels == part).tolist()
                )
                clusters.append(
                    Cluster(
                        cluster_id=f"b{bin_index:03d}.a{group_index:02d}.k{part}",
                        parent_bin_key=entry.key,
                        member_region_ids=part_members,
                        stage=STAGE_KMEANS_SUB,
                    )
                )
    return clusters


def write_cluster_table(clusters: list[Cluster], path) -> None:
    """Persist clusters as TSV: id, parent key, stage, exemplar, members."""
    with open(path, "w", encoding="utf-8") as fh:
        for cluster in clusters:
            fh.write(
                f"{cluster.cluster_id}\t{serialize_bin_key(cluster.parent_bin_key)}\t"
                f"{cluster.stage}\t{cluster.exemplar_region_id or '-'}\t"
                f"{','.join(cluster.member_region_ids)}\n"
            )


def load_cluster_table(path) -> list[Cluster]:
    clusters = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 5:
                raise ValueError(f"{path} line {lineno}: expected 5 fields")
            clusters.append(
                Cluster(
                    cluster_id=fields[0],
                    parent_bin_key=parse_bin_key(fields[1]),
                    member_region_ids=tuple(m for m in fields[4].split(",") if m),
                    stage=fields[2],
                    exemplar_region_id=None if fields[3] == "-" else fields[3],
                )
            )
    return clusters
