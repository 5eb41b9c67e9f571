"""
Module for loading, validating and slicing argument corpora.

This module defines the argument data model (propositions, labeled edges,
ordered training pairs), reads and writes the canonical JSON corpus format,
checks structural invariants, generates classifier training pairs under the
type-1, type-2, down-sampled and multi-class frameworks, and splits corpora
into argument-level cross-validation folds.

Edges always point from the child (Text) node to the parent (Hypothesis)
node.
"""
from dataclasses import dataclass, field
from functools import cached_property
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np

logger = logging.getLogger(__name__)

SUPPORT = "support"
ATTACK = "attack"
NEUTRAL = "neutral"
EDGE = "edge"
RELATION_LABELS = (SUPPORT, ATTACK)

TREE = "tree"
CHAIN = "chain"
STRUCTURE_KINDS = (TREE, CHAIN)

DEFAULT_NODE_CAP = 10

_ARGUMENT_FIELDS = {"id", "kind", "nodes", "edges"}
_NODE_FIELDS = {"id", "text"}
_EDGE_FIELDS = {"from", "to", "label"}


class CorpusFormatError(ValueError):
    """Raised when a corpus document does not follow the corpus schema."""


class CorpusValidationError(ValueError):
    """Raised when an argument violates a structural invariant."""


class PairGenerationError(ValueError):
    """Raised when a pair framework cannot be applied to an argument."""


class FoldSplitError(ValueError):
    """Raised when a corpus cannot be split into the requested folds."""


@dataclass(frozen=True)
class PropositionNode:
    """A single proposition of an argument."""

    id: str
    text: str

    @cached_property
    def tokens(self) -> Tuple[str, ...]:
        # Imported here: feature_extractor depends on this module.
        from feature_extractor import tokenize
        return tuple(tokenize(self.text))


@dataclass(frozen=True)
class RelationEdge:
    """A directed relation from a child (Text) node to a parent (Hypothesis) node."""

    child: str
    parent: str
    label: str = SUPPORT


@dataclass(frozen=True)
class Argument:
    """
    A set of propositions plus its gold relation edges.

    Attributes:
        id: Argument identifier, unique within a corpus
        nodes: The propositions, in document order
        edges: Gold child -> parent edges labeled Support or Attack
        kind: Either "tree" or "chain"
    """

    id: str
    nodes: Tuple[PropositionNode, ...]
    edges: Tuple[RelationEdge, ...] = ()
    kind: str = TREE

    @property
    def size(self) -> int:
        return len(self.nodes)

    @cached_property
    def node_ids(self) -> Tuple[str, ...]:
        return tuple(node.id for node in self.nodes)

    @cached_property
    def _nodes_by_id(self) -> Dict[str, PropositionNode]:
        return {node.id: node for node in self.nodes}

    def node(self, node_id: str) -> PropositionNode:
        """Return the node with the given id (KeyError if absent)."""
        return self._nodes_by_id[node_id]

    @property
    def has_attack(self) -> bool:
        return any(edge.label == ATTACK for edge in self.edges)

    def edge_label(self, child: str, parent: str) -> Optional[str]:
        """Return the gold label of child -> parent, or None if there is no such edge."""
        for edge in self.edges:
            if edge.child == child and edge.parent == parent:
                return edge.label
        return None


@dataclass(frozen=True)
class LabeledPair:
    """An ordered (Text, Hypothesis) node pair with its relation label."""

    argument_id: str
    text_node: str
    hypothesis_node: str
    label: str


@dataclass(frozen=True)
class FoldAssignment:
    """Argument-level assignment of a corpus to k cross-validation folds."""

    k: int
    assignment: Mapping[str, int]

    def fold_of(self, argument_id: str) -> int:
        return self.assignment[argument_id]

    def folds(self) -> List[List[str]]:
        """Return the argument ids of each fold, in assignment order."""
        folds: List[List[str]] = [[] for _ in range(self.k)]
        for argument_id, fold in self.assignment.items():
            folds[fold].append(argument_id)
        return folds


@dataclass
class ValidationReport:
    """
    Outcome of validating one argument.

    Violations break an invariant of the data model; warnings (such as the
    node cap) are informational and never make an argument invalid.
    """

    argument_id: str
    violations: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def check_structure(node_ids: Sequence[str], edges: Iterable[Tuple[str, str]], kind: str) -> List[str]:
    """
    Check that child -> parent edges form a rooted tree or a chain over node_ids.

    Args:
        node_ids: All node ids of the structure
        edges: (child, parent) pairs
        kind: "tree" or "chain"

    Returns:
        A list of violation messages, empty when the structure is valid
    """
    violations = []
    edge_list = list(edges)
    graph = nx.DiGraph()
    graph.add_nodes_from(node_ids)
    graph.add_edges_from(edge_list)

    multi_parent = sorted(node for node in node_ids if graph.out_degree(node) > 1)
    if multi_parent:
        violations.append(f"single-parent: nodes {multi_parent} have more than one parent")

    roots = sorted(node for node in node_ids if graph.out_degree(node) == 0)
    if len(roots) != 1:
        violations.append(f"single-root: expected exactly one root, found {roots}")

    try:
        cycle = nx.find_cycle(graph)
        violations.append(f"acyclic: cycle through {[child for child, _ in cycle]}")
    except nx.NetworkXNoCycle:
        pass

    if node_ids and not nx.is_weakly_connected(graph):
        components = sorted(sorted(component) for component in nx.weakly_connected_components(graph))
        violations.append(f"connected: edge graph has components {components}")

    if kind == CHAIN:
        branching = sorted(node for node in node_ids if graph.in_degree(node) > 1)
        if branching:
            violations.append(f"chain: nodes {branching} have more than one child")

    return violations


def validate_argument(arg: Argument, node_cap: Optional[int] = DEFAULT_NODE_CAP) -> ValidationReport:
    """
    Check every invariant of an argument.

    Args:
        arg: The argument to check
        node_cap: Arguments with more nodes than this are flagged with a warning
            (not a violation); None disables the flag

    Returns:
        A ValidationReport naming each violated invariant and the offending ids
    """
    report = ValidationReport(argument_id=arg.id)

    if not arg.id:
        report.violations.append("argument-id: argument id is empty")
    if arg.kind not in STRUCTURE_KINDS:
        report.violations.append(f"kind: unknown structure kind {arg.kind!r}")

    seen = set()
    for node in arg.nodes:
        if not node.id:
            report.violations.append("node-id: empty node id")
        elif node.id in seen:
            report.violations.append(f"node-id: duplicate node id {node.id!r}")
        seen.add(node.id)
        if not node.text.strip():
            report.violations.append(f"node-text: node {node.id!r} has empty text")

    pairs_seen = set()
    structural_edges = []
    for edge in arg.edges:
        if edge.label not in RELATION_LABELS:
            report.violations.append(f"edge-label: edge {edge.child}->{edge.parent} has label {edge.label!r}")
        if edge.child not in seen or edge.parent not in seen:
            report.violations.append(f"edge-endpoint: edge {edge.child}->{edge.parent} references an unknown node")
            continue
        if edge.child == edge.parent:
            report.violations.append(f"self-loop: edge {edge.child}->{edge.parent}")
            continue
        if (edge.child, edge.parent) in pairs_seen:
            report.violations.append(f"duplicate-edge: edge {edge.child}->{edge.parent} appears twice")
            continue
        pairs_seen.add((edge.child, edge.parent))
        structural_edges.append((edge.child, edge.parent))

    if not report.violations and arg.kind in STRUCTURE_KINDS:
        report.violations.extend(check_structure(arg.node_ids, structural_edges, arg.kind))

    if node_cap is not None and arg.size > node_cap:
        report.warnings.append(f"node-cap: argument has {arg.size} nodes (cap {node_cap})")

    return report


def _require_fields(obj: Any, allowed: set, required: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise CorpusFormatError(f"{where}: expected an object, got {type(obj).__name__}")
    unknown = set(obj) - allowed
    if unknown:
        raise CorpusFormatError(f"{where}: unknown field(s) {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise CorpusFormatError(f"{where}: missing field(s) {sorted(missing)}")


def argument_from_dict(data: Mapping[str, Any]) -> Argument:
    """
    Build an Argument from one entry of a corpus document.

    Raises:
        CorpusFormatError: If the entry does not follow the corpus schema
    """
    argument_id = data.get("id") if isinstance(data, dict) else None
    where = f"argument {argument_id!r}"
    _require_fields(data, _ARGUMENT_FIELDS, _ARGUMENT_FIELDS, where)
    if not isinstance(argument_id, str):
        raise CorpusFormatError(f"{where}: field 'id' must be a string")
    if data["kind"] not in STRUCTURE_KINDS:
        raise CorpusFormatError(f"{where}: field 'kind' must be one of {list(STRUCTURE_KINDS)}")
    if not isinstance(data["nodes"], list):
        raise CorpusFormatError(f"{where}: field 'nodes' must be a list")
    if not isinstance(data["edges"], list):
        raise CorpusFormatError(f"{where}: field 'edges' must be a list")

    nodes = []
    for node in data["nodes"]:
        _require_fields(node, _NODE_FIELDS, _NODE_FIELDS, f"{where} node")
        if not isinstance(node["id"], str) or not isinstance(node["text"], str):
            raise CorpusFormatError(f"{where}: node fields 'id' and 'text' must be strings")
        nodes.append(PropositionNode(id=node["id"], text=node["text"]))

    node_ids = {node.id for node in nodes}
    edges = []
    for edge in data["edges"]:
        _require_fields(edge, _EDGE_FIELDS, _EDGE_FIELDS, f"{where} edge")
        if edge["label"] not in RELATION_LABELS:
            raise CorpusFormatError(f"{where}: field 'edges.label' must be one of {list(RELATION_LABELS)}")
        for end in ("from", "to"):
            if edge[end] not in node_ids:
                raise CorpusFormatError(f"{where}: field 'edges.{end}' references unknown node {edge[end]!r}")
        edges.append(RelationEdge(child=edge["from"], parent=edge["to"], label=edge["label"]))

    return Argument(id=argument_id, nodes=tuple(nodes), edges=tuple(edges), kind=data["kind"])


def argument_to_dict(arg: Argument) -> Dict[str, Any]:
    """Convert an Argument to its corpus-document form."""
    return {
        "id": arg.id,
        "kind": arg.kind,
        "nodes": [{"id": node.id, "text": node.text} for node in arg.nodes],
        "edges": [{"from": edge.child, "to": edge.parent, "label": edge.label} for edge in arg.edges],
    }


def _read_entries(path: Union[str, Path]) -> List[Any]:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            document = json.load(handle)
        except json.JSONDecodeError as e:
            raise CorpusFormatError(f"{path}: not valid JSON ({e})")

    if not isinstance(document, dict) or set(document) != {"arguments"}:
        raise CorpusFormatError(f"{path}: top level must be an object with the single field 'arguments'")
    if not isinstance(document["arguments"], list):
        raise CorpusFormatError(f"{path}: field 'arguments' must be a list")
    return document["arguments"]


def lint_corpus(path: Union[str, Path], node_cap: Optional[int] = DEFAULT_NODE_CAP) -> List[ValidationReport]:
    """
    Validate every argument of a corpus file without stopping at the first problem.

    Schema errors of a single argument are reported as a violation of that
    argument; only a malformed top level raises.

    Raises:
        OSError: If the file cannot be read
        CorpusFormatError: If the document itself is not a corpus
    """
    reports = []
    first_position: Dict[str, int] = {}
    for position, entry in enumerate(_read_entries(path)):
        try:
            arg = argument_from_dict(entry)
        except CorpusFormatError as e:
            entry_id = entry.get("id") if isinstance(entry, dict) else None
            reports.append(ValidationReport(argument_id=str(entry_id or f"#{position}"), violations=[f"schema: {e}"]))
            continue
        report = validate_argument(arg, node_cap=node_cap)
        if arg.id in first_position:
            report.violations.insert(0, _duplicate_id_message(arg.id, first_position[arg.id], position))
        else:
            first_position[arg.id] = position
        reports.append(report)
    return reports


def _duplicate_id_message(argument_id: str, first: int, position: int) -> str:
    return f"unique-id: argument id {argument_id!r} at position {position} is already used at position {first}"


def parse_corpus(path: Union[str, Path], skip_invalid: bool = False,
                 node_cap: Optional[int] = DEFAULT_NODE_CAP) -> List[Argument]:
    """
    Load a corpus file in the canonical JSON format.

    Args:
        path: Path to a UTF-8 JSON document {"arguments": [...]}
        skip_invalid: Log and skip arguments that fail validation instead of raising
        node_cap: Node cap used for validation warnings

    Returns:
        The arguments of the corpus, in file order

    Raises:
        OSError: If the file cannot be read
        CorpusFormatError: If the document violates the schema, or two
            arguments share an id and skip_invalid is False
        CorpusValidationError: If an argument violates an invariant and
            skip_invalid is False
    """
    arguments = []
    first_position: Dict[str, int] = {}
    for position, entry in enumerate(_read_entries(path)):
        arg = argument_from_dict(entry)
        if arg.id in first_position:
            message = _duplicate_id_message(arg.id, first_position[arg.id], position)
            if skip_invalid:
                logger.warning("Skipping argument %s: %s", arg.id, message)
                continue
            raise CorpusFormatError(f"{path}: {message}")
        first_position[arg.id] = position
        report = validate_argument(arg, node_cap=node_cap)
        for warning in report.warnings:
            logger.warning("Argument %s: %s", arg.id, warning)
        if not report.ok:
            if skip_invalid:
                logger.warning("Skipping argument %s: %s", arg.id, report.violations[0])
                continue
            raise CorpusValidationError(f"argument {arg.id!r}: {report.violations[0]}")
        arguments.append(arg)

    logger.info("Loaded %d arguments from %s", len(arguments), path)
    return arguments


def serialize_corpus(arguments: Sequence[Argument], path: Union[str, Path]) -> None:
    """
    Write arguments in the canonical JSON corpus format.

    Raises:
        OSError: If the file cannot be written
    """
    document = {"arguments": [argument_to_dict(arg) for arg in arguments]}
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle, ensure_ascii=False, indent=2)
        handle.write("\n")


def filter_arguments(corpus: Sequence[Argument], max_nodes: Optional[int] = DEFAULT_NODE_CAP,
                     support_only: bool = False, min_nodes: int = 2) -> List[Argument]:
    """
    Select the arguments an experiment runs on.

    Args:
        corpus: All arguments
        max_nodes: Drop arguments with more nodes (None keeps all sizes)
        support_only: Drop arguments containing Attack edges
        min_nodes: Drop arguments with fewer nodes

    Returns:
        The kept arguments, in corpus order
    """
    kept = []
    for arg in corpus:
        if arg.size < min_nodes or (max_nodes is not None and arg.size > max_nodes):
            logger.info("Dropping argument %s: %d nodes outside [%s, %s]", arg.id, arg.size, min_nodes, max_nodes)
            continue
        if support_only and arg.has_attack:
            logger.info("Dropping argument %s: contains Attack edges", arg.id)
            continue
        kept.append(arg)
    return kept


def _ordered_pairs(arg: Argument) -> Iterable[Tuple[str, str]]:
    for text_id in arg.node_ids:
        for hypothesis_id in arg.node_ids:
            if text_id != hypothesis_id:
                yield text_id, hypothesis_id


def _require_support_only(arg: Argument, framework: str) -> None:
    if arg.has_attack:
        raise PairGenerationError(
            f"argument {arg.id!r} contains Attack edges; {framework} handles Support only "
            "(use generate_pairs_multiclass)"
        )


def generate_pairs_type1(arg: Argument) -> List[LabeledPair]:
    """
    Generate type-1 training pairs: gold edges are Support, every other ordered pair is Neutral.

    Raises:
        PairGenerationError: If the argument contains Attack edges
    """
    _require_support_only(arg, "the type-1 framework")
    gold = {(edge.child, edge.parent) for edge in arg.edges}
    return [
        LabeledPair(arg.id, text_id, hypothesis_id, SUPPORT if (text_id, hypothesis_id) in gold else NEUTRAL)
        for text_id, hypothesis_id in _ordered_pairs(arg)
    ]


def generate_pairs_type2(arg: Argument) -> List[LabeledPair]:
    """
    Generate type-2 training pairs: each gold edge as Support plus its reversal as Neutral.

    Raises:
        PairGenerationError: If the argument contains Attack edges
    """
    _require_support_only(arg, "the type-2 framework")
    pairs = []
    for edge in arg.edges:
        pairs.append(LabeledPair(arg.id, edge.child, edge.parent, SUPPORT))
        pairs.append(LabeledPair(arg.id, edge.parent, edge.child, NEUTRAL))
    return pairs


def generate_pairs_downsampled(arg: Argument, rng: np.random.Generator) -> List[LabeledPair]:
    """
    Generate type-1 pairs with Neutral pairs randomly down-sampled to the Support count.

    Args:
        arg: A Support-only argument
        rng: Source of randomness for the Neutral sample

    Raises:
        PairGenerationError: If the argument contains Attack edges
    """
    pairs = generate_pairs_type1(arg)
    supports = [pair for pair in pairs if pair.label == SUPPORT]
    neutrals = [pair for pair in pairs if pair.label == NEUTRAL]
    chosen = sorted(rng.choice(len(neutrals), size=min(len(supports), len(neutrals)), replace=False))
    return supports + [neutrals[index] for index in chosen]


def generate_pairs_multiclass(arg: Argument) -> List[LabeledPair]:
    """Generate Single-Step pairs: gold edges keep their label, all other ordered pairs are Neutral."""
    gold = {(edge.child, edge.parent): edge.label for edge in arg.edges}
    return [
        LabeledPair(arg.id, text_id, hypothesis_id, gold.get((text_id, hypothesis_id), NEUTRAL))
        for text_id, hypothesis_id in _ordered_pairs(arg)
    ]


def generate_pairs_detection(arg: Argument, framework: str = "type2") -> List[LabeledPair]:
    """
    Generate Detection pairs: any gold edge is labeled "edge", Neutral pairs follow the framework.

    Args:
        arg: An argument with Support and/or Attack edges
        framework: "type1" (all other ordered pairs Neutral) or "type2"
            (reversal of each gold edge Neutral)
    """
    if framework not in ("type1", "type2"):
        raise PairGenerationError(f"unknown detection framework {framework!r}")
    if framework == "type1":
        return [
            LabeledPair(pair.argument_id, pair.text_node, pair.hypothesis_node,
                        NEUTRAL if pair.label == NEUTRAL else EDGE)
            for pair in generate_pairs_multiclass(arg)
        ]
    pairs = []
    for edge in arg.edges:
        pairs.append(LabeledPair(arg.id, edge.child, edge.parent, EDGE))
        pairs.append(LabeledPair(arg.id, edge.parent, edge.child, NEUTRAL))
    return pairs


def generate_pairs_resolver(arg: Argument) -> List[LabeledPair]:
    """Generate Resolver pairs: the gold edges only, labeled Support or Attack."""
    return [LabeledPair(arg.id, edge.child, edge.parent, edge.label) for edge in arg.edges]


def split_folds(corpus: Sequence[Argument], k: int, seed: int) -> FoldAssignment:
    """
    Assign arguments to k folds.

    Argument ids are shuffled with a seeded generator and dealt round-robin,
    so fold sizes differ by at most one and the split is reproducible.

    Raises:
        FoldSplitError: If k < 1, k exceeds the number of arguments or two
            arguments share an id
    """
    if k < 1:
        raise FoldSplitError(f"k must be positive, got {k}")
    if k > len(corpus):
        raise FoldSplitError(f"k={k} exceeds the number of arguments ({len(corpus)})")

    ids = [arg.id for arg in corpus]
    if len(set(ids)) != len(ids):
        duplicates = sorted({argument_id for argument_id in ids if ids.count(argument_id) > 1})
        raise FoldSplitError(f"argument ids must be unique to split folds; repeated: {duplicates}")
    order = np.random.default_rng(seed).permutation(len(ids))
    assignment = {ids[index]: position % k for position, index in enumerate(order)}
    return FoldAssignment(k=k, assignment=assignment)
