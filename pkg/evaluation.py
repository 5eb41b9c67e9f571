"""
Module for scoring predicted argument structures and classifiers.

SimScore is the fraction of gold edges recovered by a predicted structure
(directed, optionally label-aware). The Random baseline is the expected
SimScore of a uniformly random rooted labeled tree, 1/n for n nodes.
Reports render both as text tables and as JSON with stable field names.
"""
from dataclasses import dataclass, field
import logging
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from corpus_handler import Argument
from structure_decoder import PredictedStructure

logger = logging.getLogger(__name__)

_SHORT_NAMES = {"support": "s", "attack": "a", "neutral": "n", "edge": "e"}


class EvaluationError(ValueError):
    """Raised when predictions and gold data cannot be compared."""


def _check_nodes(predicted: PredictedStructure, gold: Argument) -> None:
    if not gold.edges:
        raise EvaluationError(f"gold argument {gold.id!r} has no edges")
    endpoints = {node for edge in predicted.edges for node in (edge.child, edge.parent)}
    if endpoints != set(gold.node_ids):
        raise EvaluationError(
            f"argument {gold.id!r}: predicted structure spans {sorted(endpoints)}, "
            f"gold nodes are {sorted(gold.node_ids)}"
        )


def sim_score(predicted: PredictedStructure, gold: Argument) -> float:
    """
    Fraction of gold edges (child -> parent) present in the prediction, ignoring labels.

    Raises:
        EvaluationError: If the node sets differ or gold has no edges
    """
    _check_nodes(predicted, gold)
    gold_edges = {(edge.child, edge.parent) for edge in gold.edges}
    return len(predicted.edge_set() & gold_edges) / len(gold_edges)


def labeled_sim_score(predicted: PredictedStructure, gold: Argument) -> float:
    """
    Fraction of gold edges present in the prediction with the same label.

    Raises:
        EvaluationError: If the node sets differ, gold has no edges, or a predicted edge is unlabeled
    """
    _check_nodes(predicted, gold)
    if any(edge.label is None for edge in predicted.edges):
        raise EvaluationError(f"argument {gold.id!r}: predicted structure has unlabeled edges")
    gold_edges = {(edge.child, edge.parent, edge.label) for edge in gold.edges}
    return len(predicted.labeled_edge_set() & gold_edges) / len(gold_edges)


def random_tree_parents(n: int, rng: np.random.Generator) -> Dict[int, int]:
    """
    Draw a uniformly random rooted labeled tree on nodes 0..n-1.

    A uniform Prüfer sequence gives a uniform unrooted labeled tree; a
    uniform root then makes every one of the n^(n-1) rooted trees equally
    likely.

    Returns:
        Mapping child -> parent (the root is absent)
    """
    if n == 2:
        tree = nx.Graph([(0, 1)])
    else:
        tree = nx.from_prufer_sequence(rng.integers(0, n, size=n - 2).tolist())
    root = int(rng.integers(0, n))
    return {int(child): int(parent) for child, parent in nx.bfs_predecessors(tree, root)}


def random_baseline(n: int, trials: int = 100000, seed: int = 13) -> Dict[str, float]:
    """
    Expected SimScore of a random tree against a fixed gold tree.

    Args:
        n: Number of nodes (at least 2)
        trials: Monte Carlo draws (at least 1)
        seed: Seed of the sampler

    Returns:
        {"analytic": 1/n, "monte_carlo": mean SimScore over the draws}

    Raises:
        ValueError: If n < 2 or trials < 1
    """
    if n < 2:
        raise ValueError(f"random baseline needs at least 2 nodes, got {n}")
    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")

    gold = {child: child - 1 for child in range(1, n)}
    rng = np.random.default_rng(seed)
    hits = 0
    for _ in range(trials):
        parents = random_tree_parents(n, rng)
        hits += sum(1 for child, parent in parents.items() if gold.get(child) == parent)
    return {"analytic": 1.0 / n, "monte_carlo": hits / (trials * (n - 1))}


def _short(label: str) -> str:
    return _SHORT_NAMES.get(label, label)


@dataclass
class ClassifierReport:
    """
    Pair-classification metrics.

    confidence[c] is the mean Support-direction confidence over pairs whose
    gold class is c. Metrics with an empty denominator are None.
    """

    classes: Tuple[str, ...]
    confidence: Dict[str, Optional[float]]
    recall: Dict[str, Optional[float]]
    precision: Dict[str, Optional[float]]
    accuracy: float
    counts: Dict[str, int]

    def to_dict(self) -> Dict[str, Any]:
        result: Dict[str, Any] = {"accuracy": self.accuracy}
        for label in self.classes:
            key = _short(label)
            result[f"confidence_{key}"] = self.confidence[label]
            result[f"recall_{key}"] = self.recall[label]
            result[f"precision_{key}"] = self.precision[label]
            result[f"count_{key}"] = self.counts[label]
        return result


def classifier_metrics(confidences: Optional[Sequence[float]], predicted: Sequence[str], gold: Sequence[str],
                       classes: Optional[Sequence[str]] = None) -> ClassifierReport:
    """
    Mean confidence per gold class, recall, precision and accuracy.

    Args:
        confidences: Calibrated Support-direction score per pair (None skips the confidence columns)
        predicted: Arg-max label per pair
        gold: Gold label per pair
        classes: Class order of the report; defaults to the sorted labels seen

    Raises:
        EvaluationError: If the inputs are empty or differ in length
    """
    if not gold:
        raise EvaluationError("cannot compute metrics on zero pairs")
    if len(predicted) != len(gold) or (confidences is not None and len(confidences) != len(gold)):
        raise EvaluationError(
            f"length mismatch: {len(predicted)} predictions, {len(gold)} gold labels"
            + (f", {len(confidences)} confidences" if confidences is not None else "")
        )
    if classes is None:
        classes = sorted(set(gold) | set(predicted))

    predicted_array = np.asarray(predicted, dtype=object)
    gold_array = np.asarray(gold, dtype=object)
    correct = predicted_array == gold_array
    scores = None if confidences is None else np.asarray(confidences, dtype=np.float64)

    confidence, recall, precision, counts = {}, {}, {}, {}
    for label in classes:
        is_gold = gold_array == label
        is_predicted = predicted_array == label
        counts[label] = int(is_gold.sum())
        confidence[label] = float(scores[is_gold].mean()) if scores is not None and is_gold.any() else None
        recall[label] = float(correct[is_gold].mean()) if is_gold.any() else None
        precision[label] = float(correct[is_predicted].mean()) if is_predicted.any() else None

    return ClassifierReport(
        classes=tuple(classes), confidence=confidence, recall=recall, precision=precision,
        accuracy=float(correct.mean()), counts=counts,
    )


@dataclass
class SimReport:
    """
    SimScores of one experiment column.

    Attributes:
        per_argument: Argument id -> SimScore
        sizes: Argument id -> number of nodes
    """

    per_argument: Dict[str, float] = field(default_factory=dict)
    sizes: Dict[str, int] = field(default_factory=dict)

    def add(self, argument_id: str, size: int, score: float) -> None:
        self.per_argument[argument_id] = score
        self.sizes[argument_id] = size

    @property
    def mean(self) -> Optional[float]:
        if not self.per_argument:
            return None
        return float(np.mean(list(self.per_argument.values())))

    @property
    def random(self) -> Optional[float]:
        """Mean 1/n Random baseline over the same arguments."""
        if not self.sizes:
            return None
        return float(np.mean([1.0 / size for size in self.sizes.values()]))

    def by_nodes(self) -> Dict[int, Dict[str, float]]:
        """Node count -> {"count", "mean", "random"}, in increasing node count."""
        groups: Dict[int, List[float]] = {}
        for argument_id, score in self.per_argument.items():
            groups.setdefault(self.sizes[argument_id], []).append(score)
        return {
            size: {"count": len(scores), "mean": float(np.mean(scores)), "random": 1.0 / size}
            for size, scores in sorted(groups.items())
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mean": self.mean,
            "random": self.random,
            "count": len(self.per_argument),
            "sim_score_by_nodes": {str(size): group for size, group in self.by_nodes().items()},
            "per_argument": dict(sorted(self.per_argument.items())),
        }


def build_sim_report(results: Sequence[Tuple[PredictedStructure, Argument]], labeled: bool = False) -> SimReport:
    """Score each (prediction, gold) pair; labeled selects labeled_sim_score."""
    report = SimReport()
    metric = labeled_sim_score if labeled else sim_score
    for predicted, gold in results:
        report.add(gold.id, gold.size, metric(predicted, gold))
    return report


@dataclass
class AblationReport:
    """
    Leave-one-out feature ablation.

    Attributes:
        full_mean: Mean SimScore with every group enabled
        ablated: Group -> mean SimScore without that group
        without_wordvec: Word vectors were disabled in every run
    """

    full_mean: float
    ablated: Dict[str, float]
    without_wordvec: bool = False

    @property
    def pct_decrease(self) -> Dict[str, Optional[float]]:
        if self.full_mean == 0:
            return {group: None for group in self.ablated}
        return {group: 100.0 * (self.full_mean - mean) / self.full_mean for group, mean in self.ablated.items()}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "full_mean": self.full_mean,
            "without_wordvec": self.without_wordvec,
            "ablated_mean": dict(self.ablated),
            "pct_decrease": self.pct_decrease,
        }


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.3f}"


def format_classifier_table(report: ClassifierReport) -> str:
    """Render a ClassifierReport as a text table, one row per class."""
    lines = [f"{'class':<10}{'count':>8}{'confidence':>12}{'recall':>10}{'precision':>11}"]
    for label in report.classes:
        lines.append(
            f"{label:<10}{report.counts[label]:>8}{_fmt(report.confidence[label]):>12}"
            f"{_fmt(report.recall[label]):>10}{_fmt(report.precision[label]):>11}"
        )
    lines.append(f"accuracy {report.accuracy:.3f}")
    return "\n".join(lines)


def format_sim_table(columns: Mapping[str, SimReport]) -> str:
    """Render SimScore columns grouped by node count, with the Random baseline column."""
    names = list(columns)
    first = next(iter(columns.values()))
    header = f"{'nodes':<7}{'count':>7}" + "".join(f"{name:>10}" for name in names) + f"{'Random':>10}"
    lines = [header]
    grouped = {name: report.by_nodes() for name, report in columns.items()}
    for size, group in first.by_nodes().items():
        row = f"{size:<7}{group['count']:>7}"
        row += "".join(f"{_fmt(grouped[name].get(size, {}).get('mean')):>10}" for name in names)
        lines.append(row + f"{group['random']:>10.3f}")
    row = f"{'all':<7}{len(first.per_argument):>7}"
    row += "".join(f"{_fmt(report.mean):>10}" for report in columns.values())
    lines.append(row + f"{_fmt(first.random):>10}")
    return "\n".join(lines)


def format_ablation_table(report: AblationReport) -> str:
    title = "feature group" + (" (without word vectors)" if report.without_wordvec else "")
    lines = [f"{title:<40}{'mean':>8}{'% decrease':>12}", f"{'(all features)':<40}{report.full_mean:>8.3f}{'':>12}"]
    for group, decrease in report.pct_decrease.items():
        shown = "-" if decrease is None else f"{decrease:.2f}%"
        lines.append(f"{group:<40}{report.ablated[group]:>8.3f}{shown:>12}")
    return "\n".join(lines)
