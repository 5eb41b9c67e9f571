"""
Module for decoding argument structures from edge scores.

Given a ScoreMatrix s(child, parent) over the nodes of one argument, the
decoders select the rooted tree (or chain) whose edge scores sum to the
maximum:

* best_tree_exhaustive: level-by-level enumeration of node subsets, each
  node attached to its best-scoring parent in the previous level; exact,
  memoised over (previous level, remaining nodes).
* best_arborescence: maximum spanning arborescence per candidate root
  (polynomial, same optimum).
* best_chain: exhaustive search over node orders for linear structures.

Ties between structures of equal total are broken by the parent vector: the
parents of the nodes sorted by node id, with the root's parent placed after
every node. The smallest such vector wins, which is the same as the
lexicographically smallest edge list sorted by child id.
"""
from dataclasses import dataclass
import itertools
import logging
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from corpus_handler import (
    ATTACK, CHAIN, DEFAULT_NODE_CAP, NEUTRAL, STRUCTURE_KINDS, SUPPORT, TREE,
    Argument, LabeledPair, check_structure,
)
from feature_extractor import FeaturePipeline
from relation_classifier import RelationModel, ScoreMatrix, predict_labels

logger = logging.getLogger(__name__)

DECODERS = ("exhaustive", "arborescence", "chain")
DEFAULT_CHAIN_CAP = 8
TIE_TOLERANCE = 1e-12

ParentVector = Tuple[int, ...]


class DecodingError(ValueError):
    """Raised when a structure cannot be decoded."""


class DecodingSizeError(DecodingError):
    """Raised when an argument is too small or exceeds a decoder's node cap."""


@dataclass(frozen=True)
class PredictedEdge:
    child: str
    parent: str
    label: Optional[str] = None


@dataclass(frozen=True)
class PredictedStructure:
    """
    A decoded tree or chain.

    Attributes:
        argument_id: Id of the decoded argument
        kind: "tree" or "chain"
        edges: child -> parent edges in node order, optionally labeled
        score: Sum of the contributing edge scores
        decoder: Name of the decoder that produced the structure
    """

    argument_id: str
    kind: str
    edges: Tuple[PredictedEdge, ...]
    score: float
    decoder: str

    def edge_set(self) -> set:
        return {(edge.child, edge.parent) for edge in self.edges}

    def labeled_edge_set(self) -> set:
        return {(edge.child, edge.parent, edge.label) for edge in self.edges}

    def root(self) -> Optional[str]:
        children = {edge.child for edge in self.edges}
        parents = [edge.parent for edge in self.edges if edge.parent not in children]
        return parents[0] if parents else None


def structure_to_dict(structure: PredictedStructure) -> Dict[str, Any]:
    """Serialize a structure in the corpus edge schema plus "score" and "decoder"."""
    edges = []
    for edge in structure.edges:
        entry = {"from": edge.child, "to": edge.parent}
        if edge.label is not None:
            entry["label"] = edge.label
        edges.append(entry)
    return {
        "id": structure.argument_id,
        "kind": structure.kind,
        "edges": edges,
        "score": structure.score,
        "decoder": structure.decoder,
    }


def _weights(scores: ScoreMatrix) -> np.ndarray:
    matrix = np.array(scores.scores, dtype=np.float64)
    np.fill_diagonal(matrix, 0.0)
    if not np.all(np.isfinite(matrix)):
        raise DecodingError(f"argument {scores.argument_id!r}: score matrix contains non-finite values")
    return matrix


def _id_ordered(scores: ScoreMatrix) -> Tuple[np.ndarray, Tuple[str, ...]]:
    """Weights and node ids permuted into node-id order; parent vectors index this order."""
    order = sorted(range(scores.size), key=lambda index: scores.node_ids[index])
    return _weights(scores)[np.ix_(order, order)], tuple(scores.node_ids[index] for index in order)


def _check_size(scores: ScoreMatrix, max_nodes: Optional[int], decoder: str) -> None:
    n = scores.size
    if n < 2:
        raise DecodingSizeError(f"argument {scores.argument_id!r} has {n} node(s); decoding needs at least 2")
    if max_nodes is not None and n > max_nodes:
        raise DecodingSizeError(
            f"argument {scores.argument_id!r} has {n} nodes, above the {decoder} decoder cap of {max_nodes}"
        )


def _total(weights: np.ndarray, parents: ParentVector) -> float:
    n = len(parents)
    return math.fsum(weights[child, parent] for child, parent in enumerate(parents) if parent != n)


def _better(total: float, parents: ParentVector, best_total: float, best_parents: Optional[ParentVector]) -> bool:
    if best_parents is None or total > best_total + TIE_TOLERANCE:
        return True
    return total >= best_total - TIE_TOLERANCE and parents < best_parents


def _structure(scores: ScoreMatrix, node_ids: Sequence[str], weights: np.ndarray, parents: ParentVector,
               kind: str, decoder: str) -> PredictedStructure:
    n = scores.size
    edges = tuple(sorted(
        (PredictedEdge(node_ids[child], node_ids[parent]) for child, parent in enumerate(parents) if parent != n),
        key=lambda edge: scores.index(edge.child),
    ))
    violations = check_structure(scores.node_ids, [(edge.child, edge.parent) for edge in edges], kind)
    if violations:
        raise DecodingError(f"argument {scores.argument_id!r}: {decoder} produced an invalid {kind}: {violations[0]}")
    return PredictedStructure(scores.argument_id, kind, edges, _total(weights, parents), decoder)


class _LevelSetSearch:
    """
    Exact maximum over rooted trees by enumerating depth levels.

    value(L, R) is the best score attaching the nodes of bitmask R below the
    level L: choose the next level S (a non-empty subset of R), attach each
    node of S to its best parent in L, and recurse on (S, R minus S).
    """

    def __init__(self, weights: np.ndarray) -> None:
        n = weights.shape[0]
        self.n = n
        self.weights = weights
        size = 1 << n
        attach = np.zeros((n, size))
        for level in range(1, size):
            low = (level & -level).bit_length() - 1
            rest = level & (level - 1)
            attach[:, level] = weights[:, low] if rest == 0 else np.maximum(attach[:, rest], weights[:, low])
        self.attach = attach
        bits = (np.arange(size)[:, None] >> np.arange(n)[None, :]) & 1
        # gain[S][L]: sum over v in S of the best attachment of v into L
        self.gain = (bits.astype(np.float64) @ attach).tolist()
        self._values: Dict[Tuple[int, int], float] = {}
        self._parents: Dict[Tuple[int, int], Tuple[Tuple[int, int], ...]] = {}

    def value(self, level: int, remaining: int) -> float:
        if remaining == 0:
            return 0.0
        key = (level, remaining)
        cached = self._values.get(key)
        if cached is not None:
            return cached
        best = -math.inf
        gain = self.gain
        subset = remaining
        while subset:
            candidate = gain[subset][level] + self.value(subset, remaining ^ subset)
            if candidate > best:
                best = candidate
            subset = (subset - 1) & remaining
        self._values[key] = best
        return best

    def _best_parent(self, node: int, level: int) -> int:
        target = self.attach[node, level]
        for parent in range(self.n):
            if level >> parent & 1 and self.weights[node, parent] >= target - TIE_TOLERANCE:
                return parent
        raise AssertionError("level without a parent")

    def parents(self, level: int, remaining: int) -> Tuple[Tuple[int, int], ...]:
        """Smallest (node, parent) assignment, in node order, among optimal completions."""
        if remaining == 0:
            return ()
        key = (level, remaining)
        cached = self._parents.get(key)
        if cached is not None:
            return cached
        best = self.value(level, remaining)
        chosen = None
        subset = remaining
        while subset:
            candidate = self.gain[subset][level] + self.value(subset, remaining ^ subset)
            if candidate >= best - TIE_TOLERANCE:
                attached = [(node, self._best_parent(node, level)) for node in range(self.n) if subset >> node & 1]
                assignment = tuple(sorted(attached + list(self.parents(subset, remaining ^ subset))))
                if chosen is None or assignment < chosen:
                    chosen = assignment
            subset = (subset - 1) & remaining
        self._parents[key] = chosen
        return chosen

    def best(self) -> ParentVector:
        full = (1 << self.n) - 1
        best_total, best_parents = -math.inf, None
        for root in range(self.n):
            level = 1 << root
            total = self.value(level, full ^ level)
            if best_parents is not None and total < best_total - TIE_TOLERANCE:
                continue
            vector = [self.n] * self.n
            for node, parent in self.parents(level, full ^ level):
                vector[node] = parent
            if _better(total, tuple(vector), best_total, best_parents):
                best_total, best_parents = max(total, best_total), tuple(vector)
        return best_parents


def best_tree_exhaustive(scores: ScoreMatrix, max_nodes: Optional[int] = DEFAULT_NODE_CAP) -> PredictedStructure:
    """
    Find the maximum-score rooted tree by exhaustive level-set enumeration.

    Args:
        scores: Edge scores of one argument
        max_nodes: Node cap (None disables the cap)

    Returns:
        The optimal tree; equal totals resolve to the smallest parent vector

    Raises:
        DecodingSizeError: If the argument has fewer than 2 nodes or exceeds max_nodes
    """
    _check_size(scores, max_nodes, "exhaustive")
    weights, node_ids = _id_ordered(scores)
    parents = _LevelSetSearch(weights).best()
    structure = _structure(scores, node_ids, weights, parents, TREE, "exhaustive")
    logger.debug("Argument %s: exhaustive tree score %.6f", scores.argument_id, structure.score)
    return structure


def best_arborescence(scores: ScoreMatrix) -> PredictedStructure:
    """
    Find the maximum-score rooted tree as a maximum spanning arborescence.

    One arborescence is computed per candidate root (the root gets no
    incoming parent -> child arc) and the best total wins. Scores are shifted
    to be positive first, which changes every tree's total by the same amount.

    Raises:
        DecodingSizeError: If the argument has fewer than 2 nodes
    """
    _check_size(scores, None, "arborescence")
    weights, node_ids = _id_ordered(scores)
    n = scores.size
    shift = 1.0 - float(weights.min())

    best_total, best_parents = -math.inf, None
    for root in range(n):
        graph = nx.DiGraph()
        graph.add_nodes_from(range(n))
        for child in range(n):
            if child == root:
                continue
            for parent in range(n):
                if parent != child:
                    graph.add_edge(parent, child, weight=weights[child, parent] + shift)
        tree = nx.maximum_spanning_arborescence(graph, attr="weight")
        vector = [n] * n
        for parent, child in tree.edges():
            vector[child] = parent
        parents = tuple(vector)
        total = _total(weights, parents)
        if _better(total, parents, best_total, best_parents):
            best_total, best_parents = max(total, best_total), parents

    structure = _structure(scores, node_ids, weights, best_parents, TREE, "arborescence")
    logger.debug("Argument %s: arborescence score %.6f", scores.argument_id, structure.score)
    return structure


def best_chain(scores: ScoreMatrix, max_nodes: Optional[int] = DEFAULT_CHAIN_CAP) -> PredictedStructure:
    """
    Find the maximum-score chain by trying every node order.

    The chain order[0] -> order[1] -> ... -> order[-1] ends at its root.

    Raises:
        DecodingSizeError: If the argument has fewer than 2 nodes or exceeds max_nodes
    """
    _check_size(scores, max_nodes, "chain")
    weights, node_ids = _id_ordered(scores)
    n = scores.size
    rows = weights.tolist()

    best_total, best_parents = -math.inf, None
    for order in itertools.permutations(range(n)):
        total = 0.0
        for child, parent in zip(order, order[1:]):
            total += rows[child][parent]
        if best_parents is not None and total < best_total - TIE_TOLERANCE:
            continue
        vector = [n] * n
        for child, parent in zip(order, order[1:]):
            vector[child] = parent
        if _better(total, tuple(vector), best_total, best_parents):
            best_total, best_parents = max(total, best_total), tuple(vector)

    return _structure(scores, node_ids, weights, best_parents, CHAIN, "chain")


def decode(scores: ScoreMatrix, decoder: str = "exhaustive", kind: str = TREE,
           max_nodes: Optional[int] = DEFAULT_NODE_CAP,
           max_chain_nodes: Optional[int] = DEFAULT_CHAIN_CAP) -> PredictedStructure:
    """
    Decode one argument with the named decoder.

    Chain structures always use best_chain; trees use the exhaustive search
    or the arborescence decoder.

    Raises:
        DecodingError: If the decoder or kind is unknown
        DecodingSizeError: If a node cap is exceeded
    """
    if kind not in STRUCTURE_KINDS:
        raise DecodingError(f"Invalid structure kind '{kind}'. Valid options are: {', '.join(STRUCTURE_KINDS)}")
    if decoder not in DECODERS:
        raise DecodingError(f"Invalid decoder '{decoder}'. Valid options are: {', '.join(DECODERS)}")
    if kind == CHAIN or decoder == "chain":
        return best_chain(scores, max_chain_nodes)
    if decoder == "arborescence":
        return best_arborescence(scores)
    return best_tree_exhaustive(scores, max_nodes)


def _relabel(structure: PredictedStructure, labels: Sequence[str], score: float, decoder: str) -> PredictedStructure:
    edges = tuple(PredictedEdge(edge.child, edge.parent, label) for edge, label in zip(structure.edges, labels))
    return PredictedStructure(structure.argument_id, structure.kind, edges, score, decoder)


def decode_two_step(detection: ScoreMatrix, resolver: RelationModel, pipeline: FeaturePipeline, arg: Argument,
                    kind: str = TREE, decoder: str = "exhaustive", max_nodes: Optional[int] = DEFAULT_NODE_CAP,
                    max_chain_nodes: Optional[int] = DEFAULT_CHAIN_CAP) -> PredictedStructure:
    """
    Decode with Detection scores, then label each chosen edge with the Resolver.

    Args:
        detection: Calibrated edge-vs-Neutral scores of the argument
        resolver: Support-vs-Attack model
        pipeline: Feature pipeline matching the resolver
        arg: The argument being decoded
        kind: "tree" or "chain"
        decoder: Tree decoder name

    Returns:
        The Detection structure with Resolver labels on every edge
    """
    structure = decode(detection, decoder, kind, max_nodes, max_chain_nodes)
    pairs = [LabeledPair(arg.id, edge.child, edge.parent, NEUTRAL) for edge in structure.edges]
    labels = predict_labels(resolver, pipeline.extract_matrix(pairs, {arg.id: arg}))
    return _relabel(structure, labels, structure.score, f"two-step/{structure.decoder}")


def single_step_weights(scores: ScoreMatrix) -> Tuple[np.ndarray, np.ndarray]:
    """
    Edge weights and labels of the Single-Step decoder.

    weight = max(confidence_S - confidence_N, confidence_A - confidence_N);
    the label is the maximizing relation, Support on ties.

    Raises:
        DecodingError: If the Support, Attack or Neutral confidences are missing
    """
    confidences = scores.confidences or {}
    missing = [label for label in (SUPPORT, ATTACK, NEUTRAL) if label not in confidences]
    if missing:
        raise DecodingError(f"argument {scores.argument_id!r}: missing {missing} confidences for single-step decoding")
    support = confidences[SUPPORT] - confidences[NEUTRAL]
    attack = confidences[ATTACK] - confidences[NEUTRAL]
    return np.maximum(support, attack), np.where(attack > support, ATTACK, SUPPORT)


def decode_single_step(scores: ScoreMatrix, kind: str = TREE, decoder: str = "exhaustive",
                       max_nodes: Optional[int] = DEFAULT_NODE_CAP,
                       max_chain_nodes: Optional[int] = DEFAULT_CHAIN_CAP) -> PredictedStructure:
    """
    Decode from 3-class confidences with labeled, possibly negative edge weights.

    Raises:
        DecodingError: If confidences are missing
        DecodingSizeError: If a node cap is exceeded
    """
    weights, labels = single_step_weights(scores)
    weighted = ScoreMatrix.from_matrix(scores.node_ids, weights, argument_id=scores.argument_id)
    structure = decode(weighted, decoder, kind, max_nodes, max_chain_nodes)
    edge_labels: List[str] = [
        str(labels[scores.index(edge.child), scores.index(edge.parent)]) for edge in structure.edges
    ]
    return _relabel(structure, edge_labels, structure.score, f"single-step/{structure.decoder}")
