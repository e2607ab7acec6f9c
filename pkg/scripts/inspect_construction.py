#!/usr/bin/env python3
"""Run the oracle pipeline on a synthetic corpus and print construction
diagnostics: per-label bin composition, decision economy, and the report
summary. Useful for sizing hasher/oracle settings before freezing a config.

Examples:
    python3 scripts/inspect_construction.py --workspace /tmp/ws --seed 7 \
        --set synthetic.num_labels=8 --set synthetic.dev_per_label=200
    python3 scripts/inspect_construction.py --workspace /tmp/ws --reuse \
        --set hasher.bucket_width=2.0 --set oracle.relevance_threshold=0.65
"""

from __future__ import annotations

import argparse
import collections
import configparser
import time
from pathlib import Path

from tagsift.approval import KIND_BIN, KIND_CLUSTER
from tagsift.config import load_config
from tagsift.corpus import candidate_images, load_manifest
from tagsift.pipeline import (
    Workspace,
    parse_report,
    stage_annotate,
    stage_assemble,
    stage_construct,
    stage_evaluate,
    stage_features,
    stage_report,
    stage_segment,
    stage_synth,
)
from tagsift.segmenter import image_id_of_region
from tagsift.service import discover_sessions
from tagsift.trainset import load_trainsets


def build_effective_config(args) -> Path:
    parser = configparser.ConfigParser()
    if args.config:
        parser.read(args.config, encoding="utf-8")
    for pair in args.set or []:
        key, _, value = pair.partition("=")
        section, _, option = key.partition(".")
        if not (section and option and value):
            raise SystemExit(f"bad --set '{pair}', want section.option=value")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, option, value)
    path = Path(args.workspace) / "effective.ini"
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        parser.write(fh)
    return path


def truth_mix(corpus, member_region_ids) -> tuple[int, list[tuple[str, float]]]:
    """Distinct parent count and per-truth-label fractions, largest first."""
    parents = sorted({image_id_of_region(r) for r in member_region_ids})
    votes: collections.Counter[str] = collections.Counter()
    for image_id in parents:
        for label in corpus.record(image_id).truth_labels:
            votes[label] += 1
    mix = [(label, count / len(parents)) for label, count in votes.most_common()]
    return len(parents), mix


def describe_label(corpus, label, session, trainset) -> tuple[bool, bool]:
    bins = [i for i in session.items.values() if i.kind == KIND_BIN]
    clusters = [i for i in session.items.values() if i.kind == KIND_CLUSTER]
    dropped = [i for i in clusters if session.status_of(i.item_id) == "dropped"]
    decisions = session.decisions()
    approvals = len(decisions)
    n_pos = len(trainset.positive_ids)

    print(f"\n=== {label}: candidates={len(candidate_images(corpus, label))} "
          f"bins={len(bins)} clusters={len(clusters)} dropped={len(dropped)} "
          f"decisions={approvals} positives={n_pos}")
    for item in bins:
        n_parents, mix = truth_mix(corpus, item.member_region_ids)
        top = " ".join(f"{l}:{f:.2f}" for l, f in mix[:4])
        deps = [c for c in clusters if c.parent_bin_key == item.parent_bin_key]
        print(f"  {item.item_id} regions={len(item.member_region_ids):4d} "
              f"parents={n_parents:3d} deps={len(deps):2d} "
              f"-> {session.status_of(item.item_id):8s} [{top}]")
    by_status = collections.Counter(
        session.status_of(i.item_id) for i in clusters
    )
    sizes = sorted(
        (len({image_id_of_region(r) for r in i.member_region_ids})
         for i in clusters if session.status_of(i.item_id) == "approved"),
        reverse=True,
    )
    print(f"  cluster statuses: {dict(by_status)}  approved parent-counts: {sizes}")

    economy1 = approvals <= len(clusters)
    economy2 = n_pos >= 5 * approvals
    print(f"  economy: approvals<=clusters {approvals}<={len(clusters)} "
          f"{'PASS' if economy1 else 'FAIL'} | pos>=5*approvals {n_pos}>="
          f"{5 * approvals} {'PASS' if economy2 else 'FAIL'}")
    return economy1, economy2


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workspace", required=True)
    ap.add_argument("--seed", type=int, default=20260813)
    ap.add_argument("--config", help="base INI before --set overrides")
    ap.add_argument("--set", action="append", metavar="SECTION.OPTION=VALUE")
    ap.add_argument("--reuse", action="store_true",
                    help="skip synth/segment/features if artifacts exist")
    args = ap.parse_args()

    ws = Workspace.at(args.workspace)
    config = load_config(build_effective_config(args))

    t0 = time.perf_counter()
    if args.reuse and ws.global_store_path.exists():
        corpus = load_manifest(ws.manifest_path)
        print(f"[reuse] corpus of {len(corpus.records)} images")
    else:
        corpus = stage_synth(ws, config, args.seed)
        print(f"[synth] {len(corpus.records)} images in {time.perf_counter()-t0:.1f}s")
        t = time.perf_counter()
        n = stage_segment(ws, config)
        print(f"[segment] {n} regions in {time.perf_counter()-t:.1f}s")
        t = time.perf_counter()
        nr, ng = stage_features(ws, config)
        print(f"[features] {nr} region rows, {ng} global rows "
              f"in {time.perf_counter()-t:.1f}s")

    t = time.perf_counter()
    for label in corpus.label_vocabulary:
        r = stage_construct(ws, label, config, args.seed, oracle=True)
        print(f"[construct {label}] bins {r.num_bins_selected}/{r.num_bins_total} "
              f"clusters {r.num_clusters} decisions {r.decisions_made} "
              f"({time.perf_counter()-t:.1f}s)")
        t = time.perf_counter()

    stage_assemble(ws, config, args.seed)
    stage_annotate(ws, config)
    stage_evaluate(ws, config, args.seed)
    stage_report(ws, config, args.seed)
    wall = time.perf_counter() - t0

    sessions = discover_sessions(ws.construct_dir)
    trainsets = {ts.label: ts for ts in load_trainsets(ws.trainsets_path)}
    all_pass = True
    for label in sorted(sessions):
        e1, e2 = describe_label(corpus, label, sessions[label], trainsets[label])
        all_pass = all_pass and e1 and e2

    summary, rows = parse_report(ws.report_path)
    print("\n=== report")
    for row in rows:
        print(f"  {row['label']}: ap {row['ap_constructed']} vs {row['ap_baseline']} "
              f"pos={row['n_pos']} approvals={row['approvals']} "
              f"prec {row['precision_before']}->{row['precision_after']}")
    for key in ("map_constructed", "map_baseline", "map_relative_gain",
                "mean_precision_before", "mean_precision_after"):
        print(f"  {key}={summary[key]}")
    delta = float(summary["mean_precision_after"]) - float(
        summary["mean_precision_before"]
    )
    print(f"  precision_delta={delta:+.4f} (need >= +0.15)")
    print(f"  economy: {'PASS' if all_pass else 'FAIL'}")
    print(f"  wall={wall:.1f}s (budget 600s)")


if __name__ == "__main__":
    main()
