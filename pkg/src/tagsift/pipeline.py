"""Stage orchestration over a single workspace directory.

Each stage reads the artifacts of earlier stages from well-known paths
and writes its own.  Randomness is drawn from streams derived from one
master seed plus stage and label names, so re-running a stage with the
same inputs reproduces its outputs byte for byte.
"""

from __future__ import annotations

import shutil
import zlib
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np
from PIL import Image

from .annotator import (
    LabelEvaluation,
    evaluate_label,
    mean_average_precision,
    score_trainset,
)
from .approval import (
    KIND_BIN,
    KIND_CLUSTER,
    ApprovalSession,
    ReviewItem,
    run_oracle,
    serialize_bin_key,
    write_session,
)
from .clustering import refine_bins, write_cluster_table
from .collage import render_collage, save_collage, write_legend
from .config import PipelineConfig, config_lines
from .corpus import Corpus, ImageRecord, candidate_images, load_manifest, normalize_label, write_manifest
from .features import (
    global_features,
    load_feature_store,
    region_features,
    save_feature_store,
)
from .lsh import ProjectionHasher, bin_regions, select_bins, write_bin_table
from .segmenter import (
    Region,
    image_id_of_region,
    load_region_table,
    segment,
    write_region_table,
)
from .service import discover_sessions
from .synth import generate_synthetic
from .trainset import Trainset, build_trainset, label_precision, load_trainsets, write_trainsets


class MissingArtifactError(FileNotFoundError):
    """A stage input is absent; the message names the producing command."""


@dataclass(frozen=True)
class Workspace:
    root: Path

    @classmethod
    def at(cls, root: Path | str) -> "Workspace":
        return cls(root=Path(root))

    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest.tsv"

    @property
    def regions_path(self) -> Path:
        return self.root / "regions.tsv"

    @property
    def region_store_path(self) -> Path:
        return self.root / "region_features.bin"

    @property
    def global_store_path(self) -> Path:
        return self.root / "global_features.bin"

    @property
    def construct_dir(self) -> Path:
        return self.root / "construct"

    def label_dir(self, label: str) -> Path:
        return self.construct_dir / normalize_label(label)

    @property
    def trainsets_path(self) -> Path:
        return self.root / "trainsets.ndjson"

    @property
    def scores_path(self) -> Path:
        return self.root / "scores.tsv"

    @property
    def eval_path(self) -> Path:
        return self.root / "eval.tsv"

    @property
    def report_path(self) -> Path:
        return self.root / "report.tsv"


def derive_seed(master: int, *parts: int | str) -> np.random.SeedSequence:
    """Independent named stream from the master seed.

    String parts are folded in through a stable checksum so label names
    participate in the derivation without ordering surprises.
    """
    key = tuple(
        zlib.crc32(part.encode("utf-8")) if isinstance(part, str) else int(part)
        for part in parts
    )
    return np.random.SeedSequence(master, spawn_key=key)


def derive_int(master: int, *parts: int | str) -> int:
    return int(derive_seed(master, *parts).generate_state(1, np.uint64)[0])


def require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(
            f"{path} does not exist; run `tagsift {producer}` first"
        )
    return path


def load_image(path: Path | str) -> np.ndarray:
    with Image.open(path) as handle:
        return np.asarray(handle.convert("RGB"))


def load_corpus(workspace: Workspace) -> Corpus:
    require(workspace.manifest_path, "synth (or ingest)")
    return load_manifest(workspace.manifest_path)


def stage_ingest(workspace: Workspace, manifest_path: Path | str) -> Corpus:
    """Adopt an external manifest, pinning image paths to absolute form."""
    source = load_manifest(Path(manifest_path))
    records = [
        ImageRecord(
            image_id=rec.image_id,
            path=str((source.root / rec.path).resolve()),
            split=rec.split,
            tags=rec.tags,
            truth_labels=rec.truth_labels,
        )
        for rec in source.records
    ]
    corpus = Corpus(records, root=workspace.root)
    workspace.root.mkdir(parents=True, exist_ok=True)
    write_manifest(corpus, workspace.manifest_path)
    return corpus


def stage_synth(workspace: Workspace, config: PipelineConfig, seed: int) -> Corpus:
    workspace.root.mkdir(parents=True, exist_ok=True)
    return generate_synthetic(
        config.synthetic, derive_int(seed, "synth"), workspace.root
    )


def stage_segment(workspace: Workspace, config: PipelineConfig) -> int:
    """Segment every development image; returns the region count."""
    corpus = load_corpus(workspace)
    regions: list[Region] = []
    for record in sorted(corpus.development, key=lambda r: r.image_id):
        image = load_image(corpus.image_path(record.image_id))
        regions.extend(segment(image, config.segmenter, record.image_id))
    if not regions:
        raise ValueError("corpus has no development images to segment")
    write_region_table(regions, workspace.regions_path)
    return len(regions)


def stage_features(workspace: Workspace, config: PipelineConfig) -> tuple[int, int]:
    """Extract region and whole-image features; returns both row counts."""
    corpus = load_corpus(workspace)
    regions = load_region_table(require(workspace.regions_path, "segment"))

    by_image: dict[str, list[Region]] = {}
    for region in regions:
        by_image.setdefault(region.image_id, []).append(region)

    region_ids: list[str] = []
    region_rows: list[np.ndarray] = []
    for image_id in sorted(by_image):
        image = load_image(corpus.image_path(image_id))
        for region in by_image[image_id]:
            feature = region_features(image, region, config.features)
            region_ids.append(feature.region_id)
            region_rows.append(feature.vector)
    save_feature_store(
        workspace.region_store_path, region_ids, np.stack(region_rows)
    )

    global_ids: list[str] = []
    global_rows: list[np.ndarray] = []
    for record in sorted(corpus.records, key=lambda r: r.image_id):
        image = load_image(corpus.image_path(record.image_id))
        feature = global_features(image, record.image_id, config.features)
        global_ids.append(feature.image_id)
        global_rows.append(feature.vector)
    save_feature_store(
        workspace.global_store_path, global_ids, np.stack(global_rows)
    )
    return len(region_ids), len(global_ids)


@dataclass(frozen=True)
class ConstructionResult:
    label: str
    num_candidates: int
    num_bins_total: int
    num_bins_selected: int
    num_clusters: int
    num_items: int
    decisions_made: int


def _corpus_image_loader(corpus: Corpus) -> Callable[[str], np.ndarray]:
    @lru_cache(maxsize=512)
    def image_for(image_id: str) -> np.ndarray:
        return load_image(corpus.image_path(image_id))

    return image_for


def stage_construct(
    workspace: Workspace,
    label: str,
    config: PipelineConfig,
    seed: int,
    oracle: bool = False,
) -> ConstructionResult:
    """Mine one label's candidate regions into a review session.

    Rebuilds the label's construct directory from scratch: bins, refined
    clusters, collages, and a fresh session with an empty decision log.
    With oracle=True every item is answered from ground truth instead of
    waiting for a human reviewer.
    """
    label = normalize_label(label)
    corpus = load_corpus(workspace)
    require(workspace.regions_path, "segment")
    store_ids, store_matrix = load_feature_store(
        require(workspace.region_store_path, "features")
    )
    global_ids, global_matrix = load_feature_store(
        require(workspace.global_store_path, "features")
    )

    candidates = candidate_images(corpus, label)
    if not candidates:
        raise ValueError(f"no development images are tagged '{label}'")
    candidate_set = set(candidates)

    rows = [
        row
        for row, region_id in enumerate(store_ids)
        if image_id_of_region(region_id) in candidate_set
    ]
    if not rows:
        raise ValueError(f"no stored regions belong to candidates for '{label}'")
    cand_ids = [store_ids[r] for r in rows]
    cand_matrix = store_matrix[rows]

    hasher = ProjectionHasher.from_seed(
        store_matrix.shape[1], config.hasher, derive_seed(seed, "lsh", label)
    )
    bins = bin_regions(cand_ids, cand_matrix, hasher)
    selected = select_bins(bins, len(candidates))

    clusters = refine_bins(
        selected,
        dict(zip(cand_ids, cand_matrix)),
        dict(zip(global_ids, global_matrix)),
        config.affinity,
        config.kmeans,
        seed=derive_int(seed, "refine", label),
    )

    label_dir = workspace.label_dir(label)
    if label_dir.exists():
        shutil.rmtree(label_dir)
    (label_dir / "collages").mkdir(parents=True)

    image_for = _corpus_image_loader(corpus)

    items: list[ReviewItem] = []
    for index, entry in enumerate(selected):
        item_id = f"bin-{index:03d}"
        rel_path = f"construct/{label}/collages/{item_id}.png"
        montage, shown = render_collage(
            list(entry.member_ids), image_for, config.collage
        )
        save_collage(montage, workspace.root / rel_path)
        write_legend(workspace.root / (rel_path + ".legend.tsv"), shown)
        items.append(
            ReviewItem(
                item_id=item_id,
                kind=KIND_BIN,
                label=label,
                parent_bin_key=serialize_bin_key(entry.key),
                payload_id=serialize_bin_key(entry.key),
                member_region_ids=entry.member_ids,
                collage_path=rel_path,
            )
        )
    for cluster in clusters:
        item_id = f"cl-{cluster.cluster_id}"
        rel_path = f"construct/{label}/collages/{item_id}.png"
        montage, shown = render_collage(
            list(cluster.member_region_ids), image_for, config.collage
        )
        save_collage(montage, workspace.root / rel_path)
        write_legend(workspace.root / (rel_path + ".legend.tsv"), shown)
        items.append(
            ReviewItem(
                item_id=item_id,
                kind=KIND_CLUSTER,
                label=label,
                parent_bin_key=serialize_bin_key(cluster.parent_bin_key),
                payload_id=cluster.cluster_id,
                member_region_ids=cluster.member_region_ids,
                collage_path=rel_path,
            )
        )

    write_bin_table(bins, label_dir / "bins.tsv")
    write_cluster_table(clusters, label_dir / "clusters.tsv")

    session = ApprovalSession(label, items, label_dir / "decisions.ndjson")
    write_session(session, label_dir / "session.json")

    decisions_made = 0
    if oracle:
        if not any(rec.has_truth for rec in corpus.development):
            raise ValueError(
                "oracle approval requires truth labels in the manifest"
            )
        decisions_made = run_oracle(session, corpus, config.oracle)

    return ConstructionResult(
        label=label,
        num_candidates=len(candidates),
        num_bins_total=len(bins),
        num_bins_selected=len(selected),
        num_clusters=len(clusters),
        num_items=len(items),
        decisions_made=decisions_made,
    )


def stage_assemble(
    workspace: Workspace, config: PipelineConfig, seed: int
) -> list[Trainset]:
    """Turn approved clusters from every session into training sets."""
    corpus = load_corpus(workspace)
    sessions = discover_sessions(workspace.construct_dir)
    if not sessions:
        raise MissingArtifactError(
            f"{workspace.construct_dir} has no sessions; "
            "run `tagsift construct <label>` first"
        )
    trainsets = []
    for label in sorted(sessions):
        session = sessions[label]
        approved = set(session.approved_cluster_ids())
        approved_clusters = {
            item.payload_id: item.member_region_ids
            for item in session.items.values()
            if item.kind == KIND_CLUSTER and item.payload_id in approved
        }
        trainsets.append(
            build_trainset(
                corpus,
                label,
                approved_clusters,
                candidate_images(corpus, label),
                len(session.decisions()),
                config.trainset,
                derive_seed(seed, "negatives", label),
            )
        )
    write_trainsets(workspace.trainsets_path, trainsets)
    return trainsets


def stage_annotate(workspace: Workspace, config: PipelineConfig) -> int:
    """Score the testing split against each label's training set."""
    corpus = load_corpus(workspace)
    trainsets = load_trainsets(require(workspace.trainsets_path, "assemble"))
    global_ids, global_matrix = load_feature_store(
        require(workspace.global_store_path, "features")
    )
    features_by_id = dict(zip(global_ids, global_matrix))
    test_ids = sorted(record.image_id for record in corpus.testing)
    if not test_ids:
        raise ValueError("corpus has no testing split to annotate")
    written = 0
    with open(workspace.scores_path, "w", encoding="utf-8") as fh:
        for ts in trainsets:
            scores = score_trainset(
                ts, features_by_id, test_ids, config.annotator.neighbors
            )
            for image_id, score in zip(test_ids, scores):
                fh.write(f"{ts.label}\t{image_id}\t{score:.6f}\n")
                written += 1
    return written


def stage_evaluate(
    workspace: Workspace, config: PipelineConfig, seed: int
) -> list[LabelEvaluation]:
    """Compare constructed training sets against tag-sampled baselines."""
    corpus = load_corpus(workspace)
    trainsets = load_trainsets(require(workspace.trainsets_path, "assemble"))
    global_ids, global_matrix = load_feature_store(
        require(workspace.global_store_path, "features")
    )
    features_by_id = dict(zip(global_ids, global_matrix))
    evaluations = [
        evaluate_label(
            corpus,
            ts.label,
            ts,
            features_by_id,
            config.annotator,
            config.trainset,
            derive_int(seed, "evaluate", ts.label),
        )
        for ts in trainsets
    ]
    with open(workspace.eval_path, "w", encoding="utf-8") as fh:
        for ev in evaluations:
            fh.write(
                f"{ev.label}\t{ev.ap_constructed:.6f}\t{ev.ap_baseline:.6f}\t"
                f"{ev.relevant_count}\n"
            )
    return evaluations


def load_evaluations(workspace: Workspace) -> list[LabelEvaluation]:
    evaluations = []
    with open(require(workspace.eval_path, "evaluate"), encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            label, ap_c, ap_b, relevant = line.split("\t")
            evaluations.append(
                LabelEvaluation(
                    label=label,
                    ap_constructed=float(ap_c),
                    ap_baseline=float(ap_b),
                    relevant_count=int(relevant),
                )
            )
    return evaluations


_REPORT_COLUMNS = (
    "label",
    "ap_constructed",
    "ap_baseline",
    "n_pos",
    "approvals",
    "construction_rate",
    "precision_before",
    "precision_after",
)


def stage_report(workspace: Workspace, config: PipelineConfig, seed: int) -> Path:
    """Write the final per-label table with summary lines.

    The file is fully determined by the workspace artifacts, the config,
    and the seed: it carries no timestamps or environment details, so
    identical runs produce identical bytes.
    """
    corpus = load_corpus(workspace)
    trainsets = {ts.label: ts for ts in load_trainsets(require(workspace.trainsets_path, "assemble"))}
    evaluations = load_evaluations(workspace)
    sessions = discover_sessions(workspace.construct_dir)

    lines = ["# tagsift report", f"# seed={seed}"]
    lines += [f"# {entry}" for entry in config_lines(config)]
    lines.append("\t".join(_REPORT_COLUMNS))

    aps: dict[str, float] = {}
    base_aps: dict[str, float] = {}
    relevant_counts: dict[str, int] = {}
    precisions_before: list[float] = []
    precisions_after: list[float] = []
    for ev in evaluations:
        ts = trainsets.get(ev.label)
        session = sessions.get(ev.label)
        if ts is None or session is None:
            raise MissingArtifactError(
                f"label '{ev.label}' lacks a trainset or session; "
                "run `tagsift construct` and `tagsift assemble` first"
            )
        candidates = candidate_images(corpus, ev.label)
        n_pos = len(ts.positive_ids)
        approvals = ts.provenance.approvals_used
        rate = ts.provenance.construction_rate or 0.0
        before = label_precision(corpus, candidates, ev.label)
        after = label_precision(corpus, ts.positive_ids, ev.label)
        precisions_before.append(before)
        precisions_after.append(after)
        aps[ev.label] = ev.ap_constructed
        base_aps[ev.label] = ev.ap_baseline
        relevant_counts[ev.label] = ev.relevant_count
        lines.append(
            f"{ev.label}\t{ev.ap_constructed:.6f}\t{ev.ap_baseline:.6f}\t"
            f"{n_pos}\t{approvals}\t{rate:.6f}\t{before:.6f}\t{after:.6f}"
        )

    map_constructed = mean_average_precision(aps, relevant_counts)
    map_baseline = mean_average_precision(base_aps, relevant_counts)
    if map_baseline > 0:
        gain = (map_constructed - map_baseline) / map_baseline
    else:
        gain = float("inf")
    lines.append(f"# map_constructed={map_constructed:.6f}")
    lines.append(f"# map_baseline={map_baseline:.6f}")
    lines.append(f"# map_relative_gain={gain:.6f}")
    lines.append(f"# mean_precision_before={float(np.mean(precisions_before)):.6f}")
    lines.append(f"# mean_precision_after={float(np.mean(precisions_after)):.6f}")

    workspace.report_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return workspace.report_path


def parse_report(path: Path | str) -> tuple[dict[str, str], list[dict[str, str]]]:
    """Split a report into its summary values and per-label rows."""
    summary: dict[str, str] = {}
    rows: list[dict[str, str]] = []
    header: list[str] | None = None
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        if line.startswith("# "):
            body = line[2:]
            if "=" in body:
                key, _, value = body.partition("=")
                summary[key] = value
            continue
        if header is None:
            header = line.split("\t")
            continue
        rows.append(dict(zip(header, line.split("\t"))))
    return summary, rows


def run_full_pipeline(
    workspace: Workspace,
    config: PipelineConfig,
    seed: int,
    oracle: bool = True,
) -> Path:
    """Synthesize, mine every label, and report; returns the report path."""
    corpus = stage_synth(workspace, config, seed)
    stage_segment(workspace, config)
    stage_features(workspace, config)
    for label in corpus.label_vocabulary:
        stage_construct(workspace, label, config, seed, oracle=oracle)
    stage_assemble(workspace, config, seed)
    stage_annotate(workspace, config)
    stage_evaluate(workspace, config, seed)
    return stage_report(workspace, config, seed)
