"""
Module for experiment configuration.

An experiment is described by a YAML (or JSON) file whose keys are the fields
of ExperimentConfig; command-line flags override file values.
"""
from dataclasses import asdict, dataclass, field, fields, replace
import os
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

import yaml

from corpus_handler import DEFAULT_NODE_CAP, STRUCTURE_KINDS, TREE
from entity_annotator import ANNOTATOR_MODES
from feature_extractor import DEFAULT_NGRAM_THRESHOLD, SUPPORT_FEATURE_GROUPS, FeatureConfigError, check_groups
from relation_classifier import ACTIVATIONS, MlpConfig, SvmConfig
from structure_decoder import DECODERS, DEFAULT_CHAIN_CAP

FRAMEWORKS = ("type1", "type2", "type1-downsampled", "multiclass", "two-step")
DETECTION_FRAMEWORKS = ("type1", "type2")
MODELS = ("svm", "mlp")
DEFAULT_SEED = 13


class ExperimentConfigError(ValueError):
    """Raised when an experiment configuration is invalid."""


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Every knob of an experiment.

    Paths are kept as strings; None means "not configured".
    """

    corpus: Optional[str] = None
    embeddings: Optional[str] = None
    negation_lexicon: Optional[str] = None
    antonym_lexicon: Optional[str] = None
    annotator: str = "offline"
    annotator_endpoint: Optional[str] = None
    spacy_model: str = "en_core_web_sm"
    entity_cache: Optional[str] = None
    framework: str = "type2"
    detection_framework: str = "type2"
    model: str = "svm"
    features: Tuple[str, ...] = SUPPORT_FEATURE_GROUPS
    decoder: str = "exhaustive"
    kind: str = TREE
    max_nodes: int = DEFAULT_NODE_CAP
    max_chain_nodes: int = DEFAULT_CHAIN_CAP
    k: int = 5
    seed: int = DEFAULT_SEED
    out: str = "results"
    ngram_threshold: float = DEFAULT_NGRAM_THRESHOLD
    skip_invalid: bool = False
    svm: SvmConfig = field(default_factory=SvmConfig)
    mlp: MlpConfig = field(default_factory=MlpConfig)

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["features"] = list(self.features)
        data["mlp"]["hidden"] = list(self.mlp.hidden)
        return data


_PATH_FIELDS = ("corpus", "embeddings", "negation_lexicon", "antonym_lexicon")


def _parse_features(value: Union[str, Sequence[str]]) -> Tuple[str, ...]:
    if isinstance(value, str):
        value = [part for part in value.split(",")]
    elif not isinstance(value, (list, tuple)) or not all(isinstance(part, str) for part in value):
        raise ExperimentConfigError(f"config field 'features' must be a list of group names, got {value!r}")
    return tuple(part.strip() for part in value if part.strip())


_SCALAR_TYPES = {
    int: (int,),
    float: (int, float),
    bool: (bool,),
    str: (str,),
    Optional[str]: (str, type(None)),
}


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _check_scalars(cls: type, values: Mapping[str, Any], prefix: str = "") -> None:
    for f in fields(cls):
        expected = _SCALAR_TYPES.get(f.type)
        if expected is None or f.name not in values:
            continue
        value = values[f.name]
        if not isinstance(value, expected) or (isinstance(value, bool) and bool not in expected):
            names = " or ".join("null" if kind is type(None) else kind.__name__ for kind in expected)
            raise ExperimentConfigError(f"config field {prefix}{f.name!r} must be {names}, got {value!r}")


def _nested(cls: type, data: Any, key: str) -> Any:
    if not isinstance(data, Mapping):
        raise ExperimentConfigError(f"config field {key!r} must be a mapping")
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ExperimentConfigError(f"unknown {key} option(s) {unknown}; valid options are {sorted(allowed)}")
    values = dict(data)
    _check_scalars(cls, values, f"{key}.")
    if "hidden" in values:
        hidden = values["hidden"]
        if not isinstance(hidden, (list, tuple)) or not all(_is_int(size) for size in hidden):
            raise ExperimentConfigError(f"config field '{key}.hidden' must be a list of integers, got {hidden!r}")
        values["hidden"] = tuple(hidden)
    return cls(**values)


def config_from_dict(data: Mapping[str, Any]) -> ExperimentConfig:
    """
    Build a config from a plain mapping.

    Raises:
        ExperimentConfigError: If a key is unknown, a value has the wrong type or a nested block is malformed
    """
    allowed = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ExperimentConfigError(f"unknown config key(s) {unknown}; valid keys are {sorted(allowed)}")
    values = dict(data)
    _check_scalars(ExperimentConfig, values)
    if "features" in values:
        values["features"] = _parse_features(values["features"])
    if "svm" in values:
        values["svm"] = _nested(SvmConfig, values["svm"], "svm")
    if "mlp" in values:
        values["mlp"] = _nested(MlpConfig, values["mlp"], "mlp")
    return ExperimentConfig(**values)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Load an experiment configuration file.

    Args:
        path: YAML or JSON file holding a mapping of ExperimentConfig fields

    Raises:
        OSError: If the file cannot be read
        ExperimentConfigError: If the document is not a mapping or holds unknown keys
    """
    with open(path, "r", encoding="utf-8") as handle:
        try:
            data = yaml.safe_load(handle)
        except yaml.YAMLError as e:
            raise ExperimentConfigError(f"{path}: not valid YAML ({e})")
    if data is None:
        data = {}
    if not isinstance(data, Mapping):
        raise ExperimentConfigError(f"{path}: configuration must be a mapping of options")
    return config_from_dict(data)


def merge_overrides(config: ExperimentConfig, overrides: Mapping[str, Any]) -> ExperimentConfig:
    """Apply flag values over a config; None values leave the config unchanged."""
    values = {key: value for key, value in overrides.items() if value is not None}
    _check_scalars(ExperimentConfig, values)
    if "features" in values:
        values["features"] = _parse_features(values["features"])
    try:
        return replace(config, **values)
    except TypeError as e:
        raise ExperimentConfigError(f"invalid override: {e}")


def _choice(value: str, options: Sequence[str], name: str) -> None:
    if value not in options:
        raise ExperimentConfigError(f"Invalid {name} '{value}'. Valid options are: {', '.join(options)}")


def validate(config: ExperimentConfig, require_corpus: bool = True, check_paths: bool = True) -> ExperimentConfig:
    """
    Check a config before running it.

    Args:
        config: The configuration
        require_corpus: A corpus path must be set
        check_paths: Configured paths must exist

    Returns:
        The config with its feature mask in canonical order

    Raises:
        ExperimentConfigError: On any invalid value or missing path
    """
    _choice(config.framework, FRAMEWORKS, "framework")
    _choice(config.detection_framework, DETECTION_FRAMEWORKS, "detection framework")
    _choice(config.model, MODELS, "model")
    _choice(config.decoder, DECODERS, "decoder")
    _choice(config.kind, STRUCTURE_KINDS, "structure kind")
    _choice(config.annotator, ANNOTATOR_MODES, "annotator mode")
    _choice(config.mlp.activation, ACTIVATIONS, "activation")

    try:
        features = check_groups(config.features)
    except FeatureConfigError as e:
        raise ExperimentConfigError(str(e))
    if "wordvec" in features and not config.embeddings:
        raise ExperimentConfigError("feature group 'wordvec' is enabled but no embeddings file is configured")

    if config.max_nodes < 2 or config.max_chain_nodes < 2:
        raise ExperimentConfigError(
            f"node caps must be at least 2 (max_nodes={config.max_nodes}, max_chain_nodes={config.max_chain_nodes})"
        )
    if config.k < 1:
        raise ExperimentConfigError(f"k must be positive, got {config.k}")
    if not config.ngram_threshold > 1:
        raise ExperimentConfigError(f"ngram_threshold must be greater than 1, got {config.ngram_threshold}")

    if require_corpus and not config.corpus:
        raise ExperimentConfigError("no corpus configured (use --corpus or the 'corpus' config key)")
    if check_paths:
        for name in _PATH_FIELDS:
            path = getattr(config, name)
            if path and not os.path.exists(path):
                raise ExperimentConfigError(f"{name} path does not exist: {path}")

    return replace(config, features=features)
