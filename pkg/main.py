#!/usr/bin/env python3
"""
Main script for argument structure prediction.

Subcommands:
    train     Train a model bundle on a corpus
    predict   Predict structures for a corpus with a trained bundle
    crossval  Run k-fold cross-validation and write reports
    ablate    Run the leave-one-out feature-group ablation
    validate  Lint a corpus file

Diagnostics go to standard error; on failure a single JSON line
{"error": ..., "type": ...} is written there and the exit code is 1.
"""

import argparse
from dataclasses import replace
import json
import logging
from pathlib import Path
import sys
from typing import Any, Dict, List, Optional

from config import DEFAULT_SEED, FRAMEWORKS, MODELS, ExperimentConfig, load_config, merge_overrides, validate
from corpus_handler import Argument, filter_arguments, lint_corpus, parse_corpus
from evaluation import format_ablation_table, format_classifier_table, format_sim_table, labeled_sim_score, sim_score
from experiment_runner import (
    BINARY_FRAMEWORKS, load_bundle, load_resources, precompute_entities, predict_argument,
    read_bundle_manifest, run_ablation, run_cross_validation, save_bundle, train_bundle,
)
from structure_decoder import DECODERS, structure_to_dict

__version__ = "0.1.0"

logger = logging.getLogger("argstruct")


def build_parser() -> argparse.ArgumentParser:
    """Build the command-line parser."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML or JSON experiment configuration file")
    common.add_argument("--corpus", help="Path to the corpus JSON file")
    common.add_argument("--embeddings", help="Path to word embeddings in the word2vec text format")
    common.add_argument("--seed", type=int, help=f"Random seed (default {DEFAULT_SEED})")
    common.add_argument("--out", help="Output directory")
    common.add_argument("--framework", choices=FRAMEWORKS, help="Training framework")
    common.add_argument("--model", choices=MODELS, help="Classifier family")
    common.add_argument("--decoder", choices=DECODERS, help="Structure decoder")
    common.add_argument("--kind", choices=("tree", "chain"), help="Structure kind")
    common.add_argument("--features", help="Comma-separated feature groups")
    common.add_argument("--k", type=int, help="Number of cross-validation folds")
    common.add_argument("--max-nodes", type=int, dest="max_nodes", help="Node cap of the exhaustive decoder")
    common.add_argument("--verbose", action="store_true", help="Log progress information")
    common.add_argument("--debug", action="store_true", help="Log debugging details")

    parser = argparse.ArgumentParser(
        description="Predict Support/Attack argument structures from pairwise relation classifiers."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("train", parents=[common], help="Train a model bundle")

    predict = commands.add_parser("predict", parents=[common], help="Predict structures with a trained bundle")
    predict.add_argument("--model-dir", dest="model_dir", required=True, help="Directory written by 'train'")
    predict.add_argument("--output", help="Predictions file (default <out>/predictions.json)")

    commands.add_parser("crossval", parents=[common], help="Run k-fold cross-validation")

    ablate = commands.add_parser("ablate", parents=[common], help="Run the feature-group ablation")
    ablate.add_argument("--groups", help="Comma-separated groups to ablate (default: every enabled group)")
    ablate.add_argument("--without-wordvec", dest="without_wordvec", action="store_true",
                        help="Disable word vectors in every run")

    commands.add_parser("validate", parents=[common], help="Lint a corpus file")
    return parser


def configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.debug else logging.INFO if args.verbose else logging.WARNING
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def merged_config(args: argparse.Namespace) -> ExperimentConfig:
    """Load the config file (if any) and apply flag overrides."""
    config = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {name: getattr(args, name, None) for name in (
        "corpus", "embeddings", "seed", "out", "framework", "model", "decoder", "kind", "features", "k", "max_nodes",
    )}
    return merge_overrides(config, overrides)


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    return validate(merged_config(args))


def load_corpus(config: ExperimentConfig) -> List[Argument]:
    return parse_corpus(config.corpus, skip_invalid=config.skip_invalid, node_cap=config.max_nodes)


def write_json(data: Dict[str, Any], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(data, handle, indent=2, sort_keys=True)
        handle.write("\n")


def cmd_train(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    corpus = filter_arguments(load_corpus(config), max_nodes=None,
                              support_only=config.framework in BINARY_FRAMEWORKS)
    resources = load_resources(config)
    precompute_entities(corpus, resources, config.entity_cache)
    bundle = train_bundle(corpus, config, resources)
    save_bundle(bundle, config.out, config)

    for name, counts in bundle.class_counts.items():
        print(f"{name}: " + ", ".join(f"{label}={count}" for label, count in counts.items()))
    print(f"feature width: {bundle.pipeline.layout.width}")
    print(f"model bundle: {config.out}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    manifest = read_bundle_manifest(args.model_dir)
    config = merged_config(args)
    config = validate(replace(config, framework=manifest["framework"], features=tuple(manifest["groups"])))
    corpus = load_corpus(config)
    resources = load_resources(config)
    bundle = load_bundle(args.model_dir, resources)

    predictions = []
    for arg in corpus:
        structure = predict_argument(bundle, arg, config)
        entry = structure_to_dict(structure)
        if arg.edges:
            entry["sim_score"] = sim_score(structure, arg)
            if all(edge.label is not None for edge in structure.edges):
                entry["labeled_sim_score"] = labeled_sim_score(structure, arg)
        predictions.append(entry)

    output = Path(args.output) if args.output else Path(config.out) / "predictions.json"
    write_json({"arguments": predictions}, output)
    logger.info("Wrote %d predicted structures to %s", len(predictions), output)
    print(f"predictions: {output}")
    return 0


def cmd_crossval(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    result = run_cross_validation(load_corpus(config), config)

    out = Path(config.out)
    write_json(result.to_dict(), out / "crossval.json")
    tables = [format_sim_table(result.columns)]
    for name, report in result.classifiers.items():
        tables.append(f"[{name}]\n{format_classifier_table(report)}")
    text = "\n\n".join(tables) + "\n"
    with open(out / "crossval.txt", "w", encoding="utf-8") as handle:
        handle.write(text)
    print(text, end="")
    return 0


def cmd_ablate(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    groups: Optional[List[str]] = None
    if args.groups:
        groups = [group.strip() for group in args.groups.split(",") if group.strip()]
    report = run_ablation(load_corpus(config), config, groups, without_wordvec=args.without_wordvec)

    out = Path(config.out)
    write_json(report.to_dict(), out / "ablation.json")
    text = format_ablation_table(report) + "\n"
    with open(out / "ablation.txt", "w", encoding="utf-8") as handle:
        handle.write(text)
    print(text, end="")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    config = merged_config(args)
    if not config.corpus:
        raise ValueError("no corpus configured (use --corpus or the 'corpus' config key)")
    if not Path(config.corpus).exists():
        raise FileNotFoundError(f"corpus file not found: {config.corpus}")
    reports = lint_corpus(config.corpus, node_cap=config.max_nodes)
    invalid = 0
    for report in reports:
        for warning in report.warnings:
            print(f"{report.argument_id}: warning: {warning}")
        for violation in report.violations:
            print(f"{report.argument_id}: {violation}")
        invalid += not report.ok
    print(f"{len(reports)} arguments, {invalid} invalid")
    return 1 if invalid else 0


COMMANDS = {
    "train": cmd_train,
    "predict": cmd_predict,
    "crossval": cmd_crossval,
    "ablate": cmd_ablate,
    "validate": cmd_validate,
}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Main entry point for the application.
    """
    args = build_parser().parse_args(argv)
    configure_logging(args)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError, ImportError) as e:
        if args.debug:
            logger.exception("%s failed", args.command)
        sys.stderr.write(json.dumps({"error": str(e), "type": type(e).__name__}) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
