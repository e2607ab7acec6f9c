"""Command line entry points for the pipeline stages."""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_config
from .corpus import ManifestError
from .pipeline import (
    MissingArtifactError,
    Workspace,
    load_corpus,
    stage_annotate,
    stage_assemble,
    stage_construct,
    stage_evaluate,
    stage_features,
    stage_ingest,
    stage_report,
    stage_segment,
    stage_synth,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tagsift",
        description=(
            "Construct per-label training sets from noisily tagged images "
            "through hashing, clustering, and reviewed approval."
        ),
    )
    parser.add_argument(
        "--workspace",
        default=".",
        help="directory holding pipeline artifacts (default: current dir)",
    )
    parser.add_argument(
        "--seed", type=int, default=0, help="master random seed (default: 0)"
    )
    parser.add_argument(
        "--config", default=None, help="INI file overriding stage defaults"
    )
    commands = parser.add_subparsers(dest="command", required=True)

    ingest = commands.add_parser("ingest", help="adopt an existing manifest")
    ingest.add_argument("manifest", help="path to the manifest to ingest")

    commands.add_parser("synth", help="generate a synthetic tagged corpus")
    commands.add_parser("segment", help="segment development images into regions")
    commands.add_parser("features", help="extract region and global features")

    construct = commands.add_parser(
        "construct", help="mine one label's candidates into a review session"
    )
    construct.add_argument("label", help="label whose candidates to mine")
    construct.add_argument(
        "--oracle",
        action="store_true",
        help="answer every review item from manifest truth labels",
    )

    serve = commands.add_parser("serve", help="serve review sessions over HTTP")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8765)

    commands.add_parser("assemble", help="turn approved clusters into trainsets")
    commands.add_parser("annotate", help="score testing images per label")
    commands.add_parser("evaluate", help="compare against tag-sampled baselines")
    commands.add_parser("report", help="write the final per-label report")
    return parser


def _run(args: argparse.Namespace) -> None:
    workspace = Workspace.at(args.workspace)
    config = load_config(args.config)
    if args.command == "ingest":
        corpus = stage_ingest(workspace, args.manifest)
        print(f"ingested {len(corpus)} records into {workspace.manifest_path}")
    elif args.command == "synth":
        corpus = stage_synth(workspace, config, args.seed)
        labels = len(corpus.label_vocabulary)
        print(f"synthesized {len(corpus)} images across {labels} labels")
    elif args.command == "segment":
        count = stage_segment(workspace, config)
        print(f"wrote {count} regions to {workspace.regions_path}")
    elif args.command == "features":
        region_count, global_count = stage_features(workspace, config)
        print(
            f"wrote {region_count} region and {global_count} global feature rows"
        )
    elif args.command == "construct":
        result = stage_construct(
            workspace, args.label, config, args.seed, oracle=args.oracle
        )
        print(
            f"label {result.label}: {result.num_candidates} candidates, "
            f"{result.num_bins_selected}/{result.num_bins_total} bins kept, "
            f"{result.num_clusters} clusters, {result.num_items} review items, "
            f"{result.decisions_made} decisions made"
        )
    elif args.command == "serve":
        _serve(workspace, args.host, args.port)
    elif args.command == "assemble":
        trainsets = stage_assemble(workspace, config, args.seed)
        sizes = ", ".join(
            f"{ts.label}:{len(ts.positive_ids)}+{len(ts.negative_ids)}"
            for ts in trainsets
        )
        print(f"assembled {len(trainsets)} trainsets ({sizes})")
    elif args.command == "annotate":
        rows = stage_annotate(workspace, config)
        print(f"wrote {rows} scores to {workspace.scores_path}")
    elif args.command == "evaluate":
        evaluations = stage_evaluate(workspace, config, args.seed)
        print(f"evaluated {len(evaluations)} labels into {workspace.eval_path}")
    elif args.command == "report":
        path = stage_report(workspace, config, args.seed)
        print(f"report written to {path}")
    else:
        raise ValueError(f"unknown command '{args.command}'")


def _serve(workspace: Workspace, host: str, port: int) -> None:
    import uvicorn

    from .pipeline import require
    from .service import create_app, discover_sessions

    load_corpus(workspace)
    require(workspace.construct_dir, "construct <label>")
    sessions = discover_sessions(workspace.construct_dir)
    if not sessions:
        raise MissingArtifactError(
            f"{workspace.construct_dir} has no sessions; "
            "run `tagsift construct <label>` first"
        )
    app = create_app(sessions, workspace.root)
    uvicorn.run(app, host=host, port=port, log_level="warning")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _run(args)
    except (
        ConfigError,
        ManifestError,
        MissingArtifactError,
        ValueError,
        OSError,
        KeyError,
    ) as exc:
        message = str(exc) or exc.__class__.__name__
        print(f"error: {message}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
