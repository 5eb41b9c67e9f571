"""
Module for training and applying relation classifiers.

Two model families score ordered node pairs:

* LinearModel: a linear SVM (L2-regularized hinge loss) trained by seeded
  stochastic subgradient descent, optionally with class weights inversely
  proportional to class frequencies. More than two classes are handled
  one-vs-rest.
* MlpModel: a multi-layer perceptron (3 hidden layers of 200 units by
  default) with a softmax output, trained by seeded mini-batch SGD on the
  cross-entropy loss.

Both standardize features with training statistics stored in the model.
score_argument turns a model into a ScoreMatrix of edge scores for one
argument; save_model/load_model persist models as versioned .npz files.
"""
from dataclasses import dataclass, field
import json
import logging
import math
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union
import zipfile

import numpy as np

from corpus_handler import Argument, LabeledPair, NEUTRAL, SUPPORT
from feature_extractor import FeaturePipeline

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1
ACTIVATIONS = ("relu", "tanh")


class TrainingError(ValueError):
    """Raised when a model cannot be trained on the given data."""


class LayoutMismatchError(ValueError):
    """Raised when features do not match the layout a model was trained on."""


class ScoringError(ValueError):
    """Raised when an argument cannot be scored."""


class ModelFileError(ValueError):
    """Raised when a model file is corrupt or has an unsupported version."""


@dataclass
class Dataset:
    """
    Feature matrix with integer labels indexing a class catalog.

    Attributes:
        features: (rows, width) float matrix sharing one feature layout
        labels: (rows,) class indices into classes
        classes: Ordered class names; binary catalogs put the positive class second
        fingerprint: Layout fingerprint of the features
    """

    features: np.ndarray
    labels: np.ndarray
    classes: Tuple[str, ...]
    fingerprint: str = ""

    @classmethod
    def from_pairs(cls, pairs: Sequence[LabeledPair], arguments: Mapping[str, Argument],
                   pipeline: FeaturePipeline, classes: Sequence[str]) -> "Dataset":
        """
        Extract features for labeled pairs.

        Raises:
            TrainingError: If a pair carries a label outside the catalog
        """
        index = {name: position for position, name in enumerate(classes)}
        unknown = sorted({pair.label for pair in pairs} - set(index))
        if unknown:
            raise TrainingError(f"pair labels {unknown} are not in the class catalog {list(classes)}")
        labels = np.array([index[pair.label] for pair in pairs], dtype=np.int64)
        features = pipeline.extract_matrix(pairs, arguments)
        return cls(features=features, labels=labels, classes=tuple(classes), fingerprint=pipeline.fingerprint)

    def class_counts(self) -> Dict[str, int]:
        counts = np.bincount(self.labels, minlength=len(self.classes))
        return {name: int(count) for name, count in zip(self.classes, counts)}


@dataclass(frozen=True)
class SvmConfig:
    epochs: int = 50
    learning_rate: float = 0.01
    regularization: float = 1e-4
    seed: int = 13
    balanced: bool = True


@dataclass(frozen=True)
class MlpConfig:
    hidden: Tuple[int, ...] = (200, 200, 200)
    activation: str = "relu"
    epochs: int = 200
    learning_rate: float = 0.01
    batch_size: int = 32
    seed: int = 13
    balanced: bool = False


@dataclass(eq=False)
class LinearModel:
    """
    Linear SVM weights over standardized features.

    Binary models hold a single weight row for the positive class
    (classes[1]); one-vs-rest models hold one row per class.
    """

    weights: np.ndarray
    bias: np.ndarray
    classes: Tuple[str, ...]
    fingerprint: str
    mean: np.ndarray
    scale: np.ndarray

    @property
    def is_binary(self) -> bool:
        return len(self.classes) == 2

    @property
    def width(self) -> int:
        return self.mean.shape[0]


@dataclass(eq=False)
class MlpModel:
    """
    Feed-forward network over standardized features.

    weights[i] has shape (fan_in, fan_out); the last layer maps to the class
    catalog through a softmax.
    """

    weights: List[np.ndarray]
    biases: List[np.ndarray]
    activation: str
    classes: Tuple[str, ...]
    fingerprint: str
    mean: np.ndarray
    scale: np.ndarray
    loss_history: Tuple[float, ...] = field(default_factory=tuple)

    @property
    def is_binary(self) -> bool:
        return len(self.classes) == 2

    @property
    def width(self) -> int:
        return self.mean.shape[0]


RelationModel = Union[LinearModel, MlpModel]


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """
    Edge scores for every ordered node pair of one argument.

    raw[i, j] and scores[i, j] refer to the candidate edge node_ids[i] ->
    node_ids[j] (child -> parent); the diagonal is NaN. In multi-class mode
    confidences maps each relation label to its per-pair confidence matrix.
    """

    argument_id: str
    node_ids: Tuple[str, ...]
    raw: np.ndarray
    scores: np.ndarray
    confidences: Optional[Mapping[str, np.ndarray]] = None

    @classmethod
    def from_matrix(cls, node_ids: Sequence[str], scores: Sequence[Sequence[float]],
                    argument_id: str = "", confidences: Optional[Mapping[str, np.ndarray]] = None) -> "ScoreMatrix":
        """Wrap an already calibrated n x n matrix (the diagonal is ignored)."""
        matrix = np.array(scores, dtype=np.float64)
        np.fill_diagonal(matrix, np.nan)
        return cls(argument_id=argument_id, node_ids=tuple(node_ids), raw=matrix.copy(), scores=matrix,
                   confidences=confidences)

    @property
    def size(self) -> int:
        return len(self.node_ids)

    def index(self, node_id: str) -> int:
        return self.node_ids.index(node_id)

    def score(self, child: str, parent: str) -> float:
        return float(self.scores[self.index(child), self.index(parent)])


def _check_training_data(data: Dataset) -> None:
    present = np.unique(data.labels)
    if present.shape[0] < 2:
        raise TrainingError(f"training data holds a single class ({[data.classes[i] for i in present]})")
    if data.features.shape[0] < len(data.classes):
        raise TrainingError(f"{data.features.shape[0]} rows cannot train {len(data.classes)} classes")
    if not np.all(np.isfinite(data.features)):
        raise TrainingError("training features contain non-finite values")


def _fit_standardizer(features: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    mean = features.mean(axis=0)
    scale = features.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale


def _standardize(model: RelationModel, x: np.ndarray) -> np.ndarray:
    rows = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if rows.shape[1] != model.width:
        raise LayoutMismatchError(f"feature width {rows.shape[1]} does not match model width {model.width}")
    return (rows - model.mean) / model.scale


def _balanced_weights(labels: np.ndarray, classes: int) -> np.ndarray:
    counts = np.bincount(labels, minlength=classes).astype(np.float64)
    per_class = np.zeros(classes)
    present = counts > 0
    per_class[present] = labels.shape[0] / (present.sum() * counts[present])
    return per_class[labels]


def _sgd_hinge(X: np.ndarray, y: np.ndarray, sample_weight: np.ndarray, config: SvmConfig,
               rng: np.random.Generator) -> Tuple[np.ndarray, float]:
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    t = 0
    for _ in range(config.epochs):
        for i in rng.permutation(n):
            t += 1
            eta = config.learning_rate / math.sqrt(t)
            margin = y[i] * (X[i] @ w + b)
            w *= 1.0 - eta * config.regularization
            if margin < 1.0:
                step = eta * sample_weight[i] * y[i]
                w += step * X[i]
                b += step
    return w, b


def train_linear_svm(data: Dataset, config: SvmConfig = SvmConfig()) -> LinearModel:
    """
    Train a linear SVM by stochastic subgradient descent on the hinge loss.

    Features are z-scored with training statistics. With config.balanced each
    example's loss is weighted by N / (K * count(class)); in one-vs-rest mode
    the weights balance each binary sub-problem. Training is deterministic
    for a fixed seed.

    Args:
        data: Training dataset
        config: Hyperparameters

    Returns:
        The trained LinearModel

    Raises:
        TrainingError: If the data holds a single class, too few rows, or non-finite values
    """
    _check_training_data(data)
    mean, scale = _fit_standardizer(data.features)
    X = (data.features - mean) / scale

    num_classes = len(data.classes)
    targets = [1] if num_classes == 2 else list(range(num_classes))
    rows, biases = [], []
    for target in targets:
        y = np.where(data.labels == target, 1.0, -1.0)
        if config.balanced:
            sample_weight = _balanced_weights((y > 0).astype(np.int64), 2)
        else:
            sample_weight = np.ones(y.shape[0])
        rng = np.random.default_rng([config.seed, target])
        w, b = _sgd_hinge(X, y, sample_weight, config, rng)
        rows.append(w)
        biases.append(b)

    model = LinearModel(
        weights=np.vstack(rows), bias=np.array(biases), classes=data.classes,
        fingerprint=data.fingerprint, mean=mean, scale=scale,
    )
    accuracy = float(np.mean(np.array(predict_labels(model, data.features)) == np.array(data.classes)[data.labels]))
    logger.info("Trained linear SVM on %d rows (%s), training accuracy %.3f",
                X.shape[0], data.class_counts(), accuracy)
    return model


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activation_grad(z: np.ndarray, a: np.ndarray, activation: str) -> np.ndarray:
    if activation == "relu":
        return (z > 0).astype(np.float64)
    return 1.0 - a ** 2


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=-1, keepdims=True)


def mlp_loss_and_gradients(weights: Sequence[np.ndarray], biases: Sequence[np.ndarray], X: np.ndarray,
                           targets: np.ndarray, sample_weight: Optional[np.ndarray] = None,
                           activation: str = "relu") -> Tuple[float, List[np.ndarray], List[np.ndarray]]:
    """
    Weighted mean cross-entropy of a softmax MLP and its gradients by backpropagation.

    Args:
        weights: Layer weight matrices (fan_in, fan_out)
        biases: Layer bias vectors
        X: (rows, width) inputs
        targets: (rows, classes) one-hot targets
        sample_weight: Per-row loss weights (defaults to ones)
        activation: Hidden activation, "relu" or "tanh"

    Returns:
        (loss, weight gradients, bias gradients)
    """
    rows = X.shape[0]
    if sample_weight is None:
        sample_weight = np.ones(rows)

    pre_activations, activations = [], [X]
    a = X
    for W, b in zip(weights[:-1], biases[:-1]):
        z = a @ W + b
        a = _activate(z, activation)
        pre_activations.append(z)
        activations.append(a)
    probs = _softmax(a @ weights[-1] + biases[-1])

    log_likelihood = np.log(np.clip(np.sum(probs * targets, axis=1), 1e-300, None))
    loss = float(-np.sum(sample_weight * log_likelihood) / rows)

    delta = (probs - targets) * sample_weight[:, None] / rows
    weight_grads: List[np.ndarray] = [np.empty(0)] * len(weights)
    bias_grads: List[np.ndarray] = [np.empty(0)] * len(biases)
    for layer in range(len(weights) - 1, -1, -1):
        weight_grads[layer] = activations[layer].T @ delta
        bias_grads[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ weights[layer].T) * _activation_grad(
                pre_activations[layer - 1], activations[layer], activation
            )
    return loss, weight_grads, bias_grads


def init_mlp_parameters(sizes: Sequence[int], rng: np.random.Generator) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """Xavier-uniform weights and zero biases for consecutive layer sizes."""
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def train_mlp(data: Dataset, config: MlpConfig = MlpConfig()) -> MlpModel:
    """
    Train a softmax MLP by seeded mini-batch gradient descent.

    Args:
        data: Training dataset
        config: Hyperparameters (hidden sizes, activation, epochs, learning
            rate, batch size, seed, optional balanced class weights)

    Returns:
        The trained MlpModel; loss_history holds the mean batch loss per epoch

    Raises:
        TrainingError: If the data is unusable or the activation is unknown
    """
    _check_training_data(data)
    if config.activation not in ACTIVATIONS:
        raise TrainingError(f"Invalid activation '{config.activation}'. Valid options are: {', '.join(ACTIVATIONS)}")

    mean, scale = _fit_standardizer(data.features)
    X = (data.features - mean) / scale
    num_classes = len(data.classes)
    targets = np.eye(num_classes)[data.labels]
    if config.balanced:
        sample_weight = _balanced_weights(data.labels, num_classes)
    else:
        sample_weight = np.ones(X.shape[0])

    rng = np.random.default_rng(config.seed)
    weights, biases = init_mlp_parameters([X.shape[1], *config.hidden, num_classes], rng)

    history = []
    for _ in range(config.epochs):
        order = rng.permutation(X.shape[0])
        batch_losses = []
        for start in range(0, X.shape[0], config.batch_size):
            batch = order[start:start + config.batch_size]
            loss, weight_grads, bias_grads = mlp_loss_and_gradients(
                weights, biases, X[batch], targets[batch], sample_weight[batch], config.activation
            )
            for layer in range(len(weights)):
                weights[layer] -= config.learning_rate * weight_grads[layer]
                biases[layer] -= config.learning_rate * bias_grads[layer]
            batch_losses.append(loss)
        history.append(float(np.mean(batch_losses)))

    model = MlpModel(
        weights=weights, biases=biases, activation=config.activation, classes=data.classes,
        fingerprint=data.fingerprint, mean=mean, scale=scale, loss_history=tuple(history),
    )
    logger.info("Trained MLP %s on %d rows (%s), final loss %.4f",
                list(config.hidden), X.shape[0], data.class_counts(), history[-1] if history else float("nan"))
    return model


def decision_value(model: LinearModel, x: np.ndarray) -> Union[float, np.ndarray]:
    """
    Margin w . standardize(x) + b.

    Binary models return the signed margin of the positive class (a float for
    one vector, an array for a matrix); one-vs-rest models return one margin
    per class.

    Raises:
        LayoutMismatchError: If x does not have the model's feature width
    """
    x = np.asarray(x, dtype=np.float64)
    margins = _standardize(model, x) @ model.weights.T + model.bias
    if model.is_binary:
        margins = margins[:, 0]
    if x.ndim == 1:
        return float(margins[0]) if model.is_binary else margins[0]
    return margins


def predict_proba(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """
    Softmax class distribution of an MLP (one row per input row).

    Raises:
        LayoutMismatchError: If x does not have the model's feature width
    """
    x = np.asarray(x, dtype=np.float64)
    a = _standardize(model, x)
    for W, b in zip(model.weights[:-1], model.biases[:-1]):
        a = _activate(a @ W + b, model.activation)
    probs = _softmax(a @ model.weights[-1] + model.biases[-1])
    return probs[0] if x.ndim == 1 else probs


def class_confidences(model: RelationModel, X: np.ndarray) -> np.ndarray:
    """
    Per-class confidence distribution for each row.

    MLP probabilities are used directly; SVM margins are softmax-normalized
    (a binary margin m becomes softmax([-m, m])).
    """
    X = np.atleast_2d(X)
    if isinstance(model, MlpModel):
        return predict_proba(model, X)
    margins = decision_value(model, X)
    if model.is_binary:
        margins = np.column_stack([-margins, margins])
    return _softmax(margins)


def positive_confidence(model: RelationModel, X: np.ndarray) -> np.ndarray:
    """Raw confidence of the positive class of a binary model: SVM margin or MLP probability."""
    X = np.atleast_2d(X)
    if isinstance(model, MlpModel):
        return predict_proba(model, X)[:, 1]
    return decision_value(model, X)


def predict_labels(model: RelationModel, X: np.ndarray) -> List[str]:
    """Arg-max class name for each row."""
    X = np.atleast_2d(X)
    if isinstance(model, LinearModel) and model.is_binary:
        return [model.classes[1] if margin > 0 else model.classes[0] for margin in decision_value(model, X)]
    return [model.classes[index] for index in np.argmax(class_confidences(model, X), axis=1)]


def calibrate_scores(raw: Sequence[float]) -> np.ndarray:
    """
    Map raw confidences linearly onto [0, 1] (min -> 0, max -> 1).

    All-equal inputs map to 0.5.

    Raises:
        ValueError: If raw is empty or contains non-finite values
    """
    values = np.asarray(raw, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot calibrate an empty score list")
    if not np.all(np.isfinite(values)):
        raise ValueError("cannot calibrate non-finite scores")
    low, high = values.min(), values.max()
    if high == low:
        return np.full(values.shape, 0.5)
    return (values - low) / (high - low)


def check_fingerprint(model: RelationModel, pipeline: FeaturePipeline) -> None:
    """
    Raises:
        LayoutMismatchError: If the pipeline's layout differs from the model's
    """
    if model.fingerprint != pipeline.fingerprint:
        raise LayoutMismatchError(
            f"model was trained on feature layout {model.fingerprint}, "
            f"but the pipeline produces layout {pipeline.fingerprint}"
        )


def all_pairs(arg: Argument) -> List[LabeledPair]:
    """Every ordered pair of distinct nodes, row-major in node order (labels are placeholders)."""
    return [
        LabeledPair(arg.id, text_id, hypothesis_id, NEUTRAL)
        for text_id in arg.node_ids
        for hypothesis_id in arg.node_ids
        if text_id != hypothesis_id
    ]


def score_argument(model: RelationModel, arg: Argument, pipeline: FeaturePipeline,
                   mode: str = "binary") -> ScoreMatrix:
    """
    Score every ordered node pair of an argument.

    In binary mode the positive-class confidence (SVM margin or MLP
    probability) is calibrated per argument onto [0, 1]. In multi-class mode
    the per-label confidences are stored and the Support confidence is used
    as the score matrix.

    Args:
        model: Trained model
        arg: Argument to score
        pipeline: Feature pipeline matching the model
        mode: "binary" or "multiclass"

    Returns:
        The argument's ScoreMatrix

    Raises:
        LayoutMismatchError: If the pipeline does not match the model
        ScoringError: If the argument has fewer than 2 nodes or the mode is unknown
    """
    if mode not in ("binary", "multiclass"):
        raise ScoringError(f"Invalid scoring mode '{mode}'. Valid options are: binary, multiclass")
    if arg.size < 2:
        raise ScoringError(f"argument {arg.id!r} has {arg.size} node(s); scoring needs at least 2")
    check_fingerprint(model, pipeline)

    n = arg.size
    pairs = all_pairs(arg)
    X = pipeline.extract_matrix(pairs, {arg.id: arg})
    off_diagonal = ~np.eye(n, dtype=bool)

    def to_matrix(values: np.ndarray) -> np.ndarray:
        matrix = np.full((n, n), np.nan)
        matrix[off_diagonal] = values
        return matrix

    if mode == "binary":
        raw = positive_confidence(model, X)
        return ScoreMatrix(arg.id, arg.node_ids, to_matrix(raw), to_matrix(calibrate_scores(raw)))

    probs = class_confidences(model, X)
    confidences = {label: to_matrix(probs[:, column]) for column, label in enumerate(model.classes)}
    support = confidences.get(SUPPORT, to_matrix(probs[:, -1]))
    return ScoreMatrix(arg.id, arg.node_ids, support.copy(), support, confidences)


def save_model(model: RelationModel, path: Union[str, Path]) -> None:
    """
    Write a model as a versioned .npz container.

    The container holds a JSON "meta" entry (format version, model type,
    class catalog, layout fingerprint, activation) and the numeric arrays
    (standardization statistics and weights).
    """
    meta = {
        "format_version": MODEL_FORMAT_VERSION,
        "classes": list(model.classes),
        "fingerprint": model.fingerprint,
    }
    arrays = {"mean": model.mean, "scale": model.scale}
    if isinstance(model, LinearModel):
        meta["type"] = "linear"
        arrays["weights"] = model.weights
        arrays["bias"] = model.bias
    else:
        meta["type"] = "mlp"
        meta["activation"] = model.activation
        meta["layers"] = len(model.weights)
        meta["loss_history"] = list(model.loss_history)
        for layer, (W, b) in enumerate(zip(model.weights, model.biases)):
            arrays[f"W{layer}"] = W
            arrays[f"b{layer}"] = b
    with open(path, "wb") as handle:
        np.savez(handle, meta=np.array(json.dumps(meta)), **arrays)
    logger.info("Saved %s model to %s", meta["type"], path)


def load_model(path: Union[str, Path]) -> RelationModel:
    """
    Read a model written by save_model.

    Raises:
        OSError: If the file cannot be opened
        ModelFileError: If the file is corrupt, truncated, or of another format version
    """
    with open(path, "rb") as handle:
        try:
            with np.load(handle, allow_pickle=False) as archive:
                contents = {name: archive[name] for name in archive.files}
        except (ValueError, EOFError, OSError, zipfile.BadZipFile) as e:
            raise ModelFileError(f"{path}: corrupt model file ({e})")

    try:
        meta = json.loads(str(contents["meta"]))
        version = meta["format_version"]
        if version != MODEL_FORMAT_VERSION:
            raise ModelFileError(f"{path}: model format version {version}, expected {MODEL_FORMAT_VERSION}")
        classes = tuple(meta["classes"])
        if meta["type"] == "linear":
            return LinearModel(
                weights=contents["weights"], bias=contents["bias"], classes=classes,
                fingerprint=meta["fingerprint"], mean=contents["mean"], scale=contents["scale"],
            )
        if meta["type"] == "mlp":
            layers = meta["layers"]
            return MlpModel(
                weights=[contents[f"W{layer}"] for layer in range(layers)],
                biases=[contents[f"b{layer}"] for layer in range(layers)],
                activation=meta["activation"], classes=classes, fingerprint=meta["fingerprint"],
                mean=contents["mean"], scale=contents["scale"], loss_history=tuple(meta["loss_history"]),
            )
        raise ModelFileError(f"{path}: unknown model type {meta['type']!r}")
    except (KeyError, TypeError, json.JSONDecodeError) as e:
        raise ModelFileError(f"{path}: corrupt model file (missing {e})")
