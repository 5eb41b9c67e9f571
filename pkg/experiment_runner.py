"""
Module for running argument structure experiments.

This module combines corpus handling, feature extraction, classifier training
and structure decoding in a single pipeline, providing high-level functions
for training model bundles, predicting structures, k-fold cross-validation
and leave-one-out feature ablation.
"""
from dataclasses import dataclass, field, replace
import json
import logging
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from config import ExperimentConfig, ExperimentConfigError
from corpus_handler import (
    ATTACK, CHAIN, EDGE, NEUTRAL, SUPPORT, TREE, Argument, LabeledPair, filter_arguments,
    generate_pairs_detection, generate_pairs_downsampled, generate_pairs_multiclass,
    generate_pairs_resolver, generate_pairs_type1, generate_pairs_type2, split_folds,
)
from entity_annotator import EntityAnnotator, create_annotator
from evaluation import (
    AblationReport, ClassifierReport, SimReport, build_sim_report, classifier_metrics,
)
from feature_extractor import (
    DEFAULT_NEGATION_LEXICON, FEATURE_GROUPS, FeatureArtifacts, FeatureConfigError, FeaturePipeline,
    NgramVocabulary, fit_ngram_vocab, support_pair_tokens,
)
from relation_classifier import (
    Dataset, RelationModel, ScoreMatrix, load_model, predict_labels, save_model, score_argument,
    train_linear_svm, train_mlp,
)
from resource_loader import EmbeddingTable, antonym_map, load_antonyms, load_embeddings, load_lexicon
from structure_decoder import PredictedStructure, decode, decode_single_step, decode_two_step

logger = logging.getLogger(__name__)

BUNDLE_FORMAT_VERSION = 1
BINARY_FRAMEWORKS = ("type1", "type2", "type1-downsampled")

# Class catalogs; binary catalogs put the positive class second.
SUPPORT_CLASSES = (NEUTRAL, SUPPORT)
DETECTION_CLASSES = (NEUTRAL, EDGE)
RESOLVER_CLASSES = (ATTACK, SUPPORT)
MULTICLASS_CLASSES = (SUPPORT, ATTACK, NEUTRAL)


@dataclass
class Resources:
    """Loaded resources shared by every model of an experiment."""

    embeddings: Optional[EmbeddingTable] = None
    annotator: Optional[EntityAnnotator] = None
    negation_lexicon: Tuple[str, ...] = DEFAULT_NEGATION_LEXICON
    antonyms: Mapping[str, frozenset] = field(default_factory=dict)


def load_resources(config: ExperimentConfig) -> Resources:
    """Load embeddings, lexicons and the entity annotator named by a config."""
    resources = Resources()
    if config.embeddings and "wordvec" in config.features:
        resources.embeddings = load_embeddings(config.embeddings)
    if config.negation_lexicon:
        resources.negation_lexicon = load_lexicon(config.negation_lexicon)
    if config.antonym_lexicon:
        resources.antonyms = load_antonyms(config.antonym_lexicon)
    if "entity" in config.features:
        resources.annotator = create_annotator(config.annotator, config.annotator_endpoint, config.spacy_model)
        if config.entity_cache and Path(config.entity_cache).exists():
            loaded = resources.annotator.load_cache(config.entity_cache)
            logger.info("Loaded %d cached entity annotations from %s", loaded, config.entity_cache)
    return resources


def precompute_entities(corpus: Sequence[Argument], resources: Resources, cache_path: Optional[str] = None) -> None:
    """Annotate every proposition once and optionally persist the annotation cache."""
    if resources.annotator is None:
        return
    for arg in corpus:
        for node in arg.nodes:
            resources.annotator.annotate(node.text)
    if cache_path:
        resources.annotator.save_cache(cache_path)
        logger.info("Saved entity annotation cache to %s", cache_path)


def build_pipeline(train_args: Sequence[Argument], config: ExperimentConfig, resources: Resources,
                   groups: Optional[Sequence[str]] = None) -> FeaturePipeline:
    """
    Fit the n-gram vocabulary on the training arguments and bind the feature layout.

    Raises:
        FeatureConfigError: If the groups are invalid or an artifact is missing
    """
    groups = tuple(config.features if groups is None else groups)
    vocab = None
    if "ngram" in groups:
        vocab = fit_ngram_vocab(support_pair_tokens(train_args), config.ngram_threshold)
    artifacts = FeatureArtifacts(
        vocab=vocab, embeddings=resources.embeddings, annotator=resources.annotator,
        negation_lexicon=resources.negation_lexicon, antonyms=resources.antonyms,
    )
    return FeaturePipeline.build(groups, artifacts)


def framework_pairs(arguments: Sequence[Argument], framework: str, rng: np.random.Generator) -> List[LabeledPair]:
    """Training pairs of the Support-only or Single-Step frameworks."""
    pairs: List[LabeledPair] = []
    for arg in arguments:
        if framework == "type1":
            pairs.extend(generate_pairs_type1(arg))
        elif framework == "type2":
            pairs.extend(generate_pairs_type2(arg))
        elif framework == "type1-downsampled":
            pairs.extend(generate_pairs_downsampled(arg, rng))
        elif framework == "multiclass":
            pairs.extend(generate_pairs_multiclass(arg))
        else:
            raise ExperimentConfigError(f"framework {framework!r} has no single pair generator")
    return pairs


def train_model(data: Dataset, config: ExperimentConfig, seed: int) -> RelationModel:
    if config.model == "mlp":
        return train_mlp(data, replace(config.mlp, seed=seed))
    return train_linear_svm(data, replace(config.svm, seed=seed))


@dataclass
class ModelBundle:
    """
    Everything needed to predict structures: the feature pipeline and one or two models.

    Binary and multiclass frameworks store their model under "model";
    two-step stores "detection" and "resolver".
    """

    framework: str
    pipeline: FeaturePipeline
    models: Dict[str, RelationModel]
    class_counts: Dict[str, Dict[str, int]] = field(default_factory=dict)


def train_bundle(train_args: Sequence[Argument], config: ExperimentConfig, resources: Resources,
                 seed: Optional[int] = None, groups: Optional[Sequence[str]] = None) -> ModelBundle:
    """
    Train the model(s) of the configured framework.

    Args:
        train_args: Training arguments
        config: Experiment configuration
        resources: Loaded resources
        seed: Training seed (defaults to config.seed)
        groups: Feature groups (defaults to config.features)

    Returns:
        The trained ModelBundle
    """
    seed = config.seed if seed is None else seed
    pipeline = build_pipeline(train_args, config, resources, groups)
    by_id = {arg.id: arg for arg in train_args}
    if len(by_id) != len(train_args):
        raise ExperimentConfigError("training arguments must have unique ids")
    bundle = ModelBundle(framework=config.framework, pipeline=pipeline, models={})

    if config.framework == "two-step":
        detection_pairs = [
            pair for arg in train_args for pair in generate_pairs_detection(arg, config.detection_framework)
        ]
        resolver_pairs = [pair for arg in train_args for pair in generate_pairs_resolver(arg)]
        stages = [
            ("detection", detection_pairs, DETECTION_CLASSES),
            ("resolver", resolver_pairs, RESOLVER_CLASSES),
        ]
    else:
        rng = np.random.default_rng([seed, 0])
        classes = MULTICLASS_CLASSES if config.framework == "multiclass" else SUPPORT_CLASSES
        stages = [("model", framework_pairs(train_args, config.framework, rng), classes)]

    for name, pairs, classes in stages:
        data = Dataset.from_pairs(pairs, by_id, pipeline, classes)
        bundle.class_counts[name] = data.class_counts()
        logger.info("Training %s %s on %s, feature width %d",
                    name, config.model, bundle.class_counts[name], pipeline.layout.width)
        bundle.models[name] = train_model(data, config, seed)
    return bundle


def predict_argument(bundle: ModelBundle, arg: Argument, config: ExperimentConfig,
                     kind: Optional[str] = None) -> PredictedStructure:
    """Score and decode one argument with a trained bundle."""
    kind = kind or config.kind
    if bundle.framework == "two-step":
        detection = score_argument(bundle.models["detection"], arg, bundle.pipeline)
        return decode_two_step(detection, bundle.models["resolver"], bundle.pipeline, arg, kind,
                               config.decoder, config.max_nodes, config.max_chain_nodes)
    if bundle.framework == "multiclass":
        scores = score_argument(bundle.models["model"], arg, bundle.pipeline, mode="multiclass")
        return decode_single_step(scores, kind, config.decoder, config.max_nodes, config.max_chain_nodes)
    scores = score_argument(bundle.models["model"], arg, bundle.pipeline)
    return decode(scores, config.decoder, kind, config.max_nodes, config.max_chain_nodes)


def save_bundle(bundle: ModelBundle, out_dir: Union[str, Path], config: ExperimentConfig) -> Path:
    """
    Write model file(s) and artifacts.json (feature groups, n-gram vocabulary, lexicons).

    Returns:
        Path of the artifacts file
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, model in bundle.models.items():
        save_model(model, out_dir / f"{name}.npz")

    artifacts = bundle.pipeline.artifacts
    document = {
        "format_version": BUNDLE_FORMAT_VERSION,
        "framework": bundle.framework,
        "models": sorted(bundle.models),
        "groups": list(bundle.pipeline.layout.groups),
        "fingerprint": bundle.pipeline.fingerprint,
        "feature_width": bundle.pipeline.layout.width,
        "vocab": artifacts.vocab.to_dict() if artifacts.vocab is not None else None,
        "negation_lexicon": list(artifacts.negation_lexicon),
        "antonyms": sorted([word, antonym] for word, antonyms in artifacts.antonyms.items() for antonym in antonyms),
        "class_counts": bundle.class_counts,
        "config": config.to_dict(),
    }
    path = out_dir / "artifacts.json"
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle, indent=2, sort_keys=True)
        handle.write("\n")
    logger.info("Wrote model bundle to %s", out_dir)
    return path


def read_bundle_manifest(model_dir: Union[str, Path]) -> Dict[str, object]:
    """
    Read the artifacts.json of a bundle.

    Raises:
        OSError: If the file is missing
        ExperimentConfigError: If the manifest is malformed or of another version
    """
    path = Path(model_dir) / "artifacts.json"
    with open(path, "r", encoding="utf-8") as handle:
        try:
            document = json.load(handle)
        except json.JSONDecodeError as e:
            raise ExperimentConfigError(f"{path}: not valid JSON ({e})")
    version = document.get("format_version") if isinstance(document, dict) else None
    if version != BUNDLE_FORMAT_VERSION:
        raise ExperimentConfigError(f"{path}: bundle format version {version}, expected {BUNDLE_FORMAT_VERSION}")
    return document


def load_bundle(model_dir: Union[str, Path], resources: Resources) -> ModelBundle:
    """
    Reload a bundle written by save_bundle.

    Raises:
        OSError: If a bundle file is missing
        ExperimentConfigError: If artifacts.json is malformed or of another version
        LayoutMismatchError: If the rebuilt feature layout differs from the trained one
    """
    model_dir = Path(model_dir)
    document = read_bundle_manifest(model_dir)
    vocab = NgramVocabulary.from_dict(document["vocab"]) if document["vocab"] is not None else None
    artifacts = FeatureArtifacts(
        vocab=vocab, embeddings=resources.embeddings, annotator=resources.annotator,
        negation_lexicon=tuple(document["negation_lexicon"]), antonyms=antonym_map(document["antonyms"]),
    )
    pipeline = FeaturePipeline.build(document["groups"], artifacts)
    models = {name: load_model(model_dir / f"{name}.npz") for name in document["models"]}
    return ModelBundle(framework=document["framework"], pipeline=pipeline, models=models,
                       class_counts=document.get("class_counts", {}))


@dataclass
class CrossValidationResult:
    """
    Aggregated cross-validation reports.

    Attributes:
        framework: Training framework of the run
        classifiers: Stage name -> ClassifierReport
        columns: Column name -> SimReport (e.g. "SimScore", or "T-S-1", "T-S", "T-S-WL")
        predictions: Argument id -> predicted structure of the primary column
    """

    framework: str
    classifiers: Dict[str, ClassifierReport]
    columns: Dict[str, SimReport]
    predictions: Dict[str, PredictedStructure] = field(default_factory=dict)

    @property
    def primary(self) -> SimReport:
        if self.framework == "two-step":
            return self.columns["T-S"]
        if self.framework == "multiclass":
            return self.columns["S-S"]
        return self.columns["SimScore"]

    def to_dict(self) -> Dict[str, object]:
        return {
            "framework": self.framework,
            "classifiers": {name: report.to_dict() for name, report in self.classifiers.items()},
            "sim": {name: report.to_dict() for name, report in self.columns.items()},
        }


class _MetricLog:
    def __init__(self, with_confidence: bool = True) -> None:
        self.confidences: Optional[List[float]] = [] if with_confidence else None
        self.predicted: List[str] = []
        self.gold: List[str] = []

    def add(self, predicted: Sequence[str], gold: Sequence[str], confidences: Optional[Sequence[float]] = None) -> None:
        self.predicted.extend(predicted)
        self.gold.extend(gold)
        if self.confidences is not None and confidences is not None:
            self.confidences.extend(float(value) for value in confidences)

    def report(self, classes: Sequence[str]) -> ClassifierReport:
        return classifier_metrics(self.confidences, self.predicted, self.gold, classes)


def _pair_confidences(scores: ScoreMatrix, pairs: Sequence[LabeledPair]) -> List[float]:
    return [scores.score(pair.text_node, pair.hypothesis_node) for pair in pairs]


def _evaluate_binary(bundle: ModelBundle, arg: Argument, config: ExperimentConfig, rng: np.random.Generator,
                     logs: Dict[str, _MetricLog], results: Dict[str, List]) -> PredictedStructure:
    model = bundle.models["model"]
    scores = score_argument(model, arg, bundle.pipeline)
    pairs = framework_pairs([arg], config.framework, rng)
    predicted = predict_labels(model, bundle.pipeline.extract_matrix(pairs, {arg.id: arg}))
    logs["support"].add(predicted, [pair.label for pair in pairs], _pair_confidences(scores, pairs))
    structure = decode(scores, config.decoder, config.kind, config.max_nodes, config.max_chain_nodes)
    results["SimScore"].append((structure, arg))
    return structure


def _evaluate_multiclass(bundle: ModelBundle, arg: Argument, config: ExperimentConfig,
                         logs: Dict[str, _MetricLog], results: Dict[str, List]) -> PredictedStructure:
    model = bundle.models["model"]
    scores = score_argument(model, arg, bundle.pipeline, mode="multiclass")
    pairs = generate_pairs_multiclass(arg)
    predicted = predict_labels(model, bundle.pipeline.extract_matrix(pairs, {arg.id: arg}))
    logs["single-step"].add(predicted, [pair.label for pair in pairs], _pair_confidences(scores, pairs))
    structure = decode_single_step(scores, config.kind, config.decoder, config.max_nodes, config.max_chain_nodes)
    results["S-S-1"].append((structure, arg))
    results["S-S"].append((structure, arg))
    return structure


def _evaluate_two_step(bundle: ModelBundle, arg: Argument, config: ExperimentConfig,
                       logs: Dict[str, _MetricLog], results: Dict[str, List]) -> PredictedStructure:
    detection_model = bundle.models["detection"]
    resolver = bundle.models["resolver"]
    pipeline = bundle.pipeline
    by_id = {arg.id: arg}
    detection = score_argument(detection_model, arg, pipeline)

    detection_pairs = generate_pairs_detection(arg, config.detection_framework)
    logs["detection"].add(
        predict_labels(detection_model, pipeline.extract_matrix(detection_pairs, by_id)),
        [pair.label for pair in detection_pairs],
        _pair_confidences(detection, detection_pairs),
    )
    resolver_pairs = generate_pairs_resolver(arg)
    logs["resolver"].add(
        predict_labels(resolver, pipeline.extract_matrix(resolver_pairs, by_id)),
        [pair.label for pair in resolver_pairs],
    )

    # Combined pair labelling: Resolver label where Detection predicts an edge.
    all_pairs = generate_pairs_multiclass(arg)
    features = pipeline.extract_matrix(all_pairs, by_id)
    detected = predict_labels(detection_model, features)
    relation = predict_labels(resolver, features)
    combined = [label if found == EDGE else NEUTRAL for label, found in zip(relation, detected)]
    logs["two-step"].add(combined, [pair.label for pair in all_pairs])

    structure = decode_two_step(detection, resolver, pipeline, arg, config.kind, config.decoder,
                                config.max_nodes, config.max_chain_nodes)
    results["T-S-1"].append((structure, arg))
    results["T-S"].append((structure, arg))
    if config.kind == CHAIN:
        unrestricted = decode_two_step(detection, resolver, pipeline, arg, TREE, config.decoder,
                                       config.max_nodes, config.max_chain_nodes)
        results["T-S-WL"].append((unrestricted, arg))
    return structure


_LABELED_COLUMNS = ("T-S", "T-S-WL", "S-S")


def run_cross_validation(corpus: Sequence[Argument], config: ExperimentConfig,
                         resources: Optional[Resources] = None) -> CrossValidationResult:
    """
    Run k-fold cross-validation over arguments.

    Per fold the n-gram vocabulary is fitted on the training arguments only,
    the model(s) are trained with seed config.seed + fold, and each held-out
    argument is scored, decoded and compared with its gold structure.

    Args:
        corpus: Arguments of the experiment
        config: Validated experiment configuration
        resources: Preloaded resources (loaded from config when None)

    Returns:
        The aggregated CrossValidationResult

    Raises:
        FoldSplitError: If k exceeds the number of usable arguments
        FeatureConfigError: If the feature mask is invalid
    """
    resources = load_resources(config) if resources is None else resources
    support_only = config.framework in BINARY_FRAMEWORKS
    cap = config.max_chain_nodes if config.kind == CHAIN else config.max_nodes
    if config.decoder == "arborescence" and config.kind == TREE:
        cap = None
    arguments = filter_arguments(corpus, max_nodes=cap, support_only=support_only)
    if not arguments:
        raise ExperimentConfigError("no arguments left after filtering the corpus")
    precompute_entities(arguments, resources, config.entity_cache)

    folds = split_folds(arguments, config.k, config.seed)

    if config.framework == "two-step":
        stages = {"detection": (True, DETECTION_CLASSES), "resolver": (False, RESOLVER_CLASSES),
                  "two-step": (False, MULTICLASS_CLASSES)}
        columns = ["T-S-1", "T-S"] + (["T-S-WL"] if config.kind == CHAIN else [])
    elif config.framework == "multiclass":
        stages = {"single-step": (True, MULTICLASS_CLASSES)}
        columns = ["S-S-1", "S-S"]
    else:
        stages = {"support": (True, SUPPORT_CLASSES)}
        columns = ["SimScore"]
    logs = {name: _MetricLog(with_confidence) for name, (with_confidence, _) in stages.items()}
    results: Dict[str, List] = {column: [] for column in columns}
    predictions: Dict[str, PredictedStructure] = {}

    for fold, test_ids in enumerate(folds.folds()):
        test_set = set(test_ids)
        train_args = [arg for arg in arguments if arg.id not in test_set]
        test_args = [arg for arg in arguments if arg.id in test_set]
        logger.info("Fold %d/%d: %d training, %d test arguments", fold + 1, config.k, len(train_args), len(test_args))

        bundle = train_bundle(train_args, config, resources, seed=config.seed + fold)
        rng = np.random.default_rng([config.seed + fold, 1])
        for arg in test_args:
            if config.framework == "two-step":
                structure = _evaluate_two_step(bundle, arg, config, logs, results)
            elif config.framework == "multiclass":
                structure = _evaluate_multiclass(bundle, arg, config, logs, results)
            else:
                structure = _evaluate_binary(bundle, arg, config, rng, logs, results)
            predictions[arg.id] = structure

    sim_reports = {
        column: build_sim_report(pairs, labeled=column in _LABELED_COLUMNS) for column, pairs in results.items()
    }

    classifiers = {name: logs[name].report(classes) for name, (_, classes) in stages.items()}
    result = CrossValidationResult(config.framework, classifiers, sim_reports, predictions)
    logger.info("Cross-validation mean SimScore %.3f (random %.3f)", result.primary.mean, result.primary.random)
    return result


def run_ablation(corpus: Sequence[Argument], config: ExperimentConfig, groups: Optional[Sequence[str]] = None,
                 without_wordvec: bool = False, resources: Optional[Resources] = None) -> AblationReport:
    """
    Leave-one-out feature-group ablation under identical folds and seed.

    Args:
        corpus: Arguments of the experiment
        config: Base configuration; its feature mask is the full feature set
        groups: Groups to ablate (defaults to every group of the base mask)
        without_wordvec: Disable word vectors in every run, including the baseline

    Returns:
        AblationReport with the % decrease in mean SimScore per removed group

    Raises:
        FeatureConfigError: If a group name is unknown
        ExperimentConfigError: If a group is not part of the base configuration
    """
    base = tuple(group for group in config.features if not (without_wordvec and group == "wordvec"))
    groups = list(base if groups is None else groups)
    unknown = [group for group in groups if group not in FEATURE_GROUPS]
    if unknown:
        raise FeatureConfigError(f"Unknown feature group(s) {unknown}. Valid options are: {', '.join(FEATURE_GROUPS)}")
    if without_wordvec:
        groups = [group for group in groups if group != "wordvec"]
    missing = [group for group in groups if group not in base]
    if missing:
        raise ExperimentConfigError(f"cannot ablate {missing}: not enabled in the base feature set {list(base)}")

    resources = load_resources(config) if resources is None else resources
    full = run_cross_validation(corpus, replace(config, features=base), resources).primary.mean
    ablated = {}
    for group in groups:
        remaining = tuple(other for other in base if other != group)
        logger.info("Ablating feature group %s", group)
        ablated[group] = run_cross_validation(corpus, replace(config, features=remaining), resources).primary.mean
    return AblationReport(full_mean=full, ablated=ablated, without_wordvec=without_wordvec)
