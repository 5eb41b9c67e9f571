"""
Module for generating synthetic argument corpora with planted structure.

Every gold edge gets its own capitalized topic token ("Topic12") that appears
in both the child and the parent proposition, so entity overlap and the
longest common phrase identify related pairs. Non-root propositions start
with "since" and propositions with children contain "therefore", which
gives the classifiers the edge direction. In debate corpora, Attack
children additionally carry a negation marker.
"""
from typing import Dict, List, Optional, Sequence

import numpy as np

from corpus_handler import ATTACK, CHAIN, SUPPORT, TREE, Argument, PropositionNode, RelationEdge
from resource_loader import EmbeddingTable

FILLER_WORDS = (
    "policy", "market", "report", "council", "budget", "evidence", "growth", "plan", "school", "river",
    "health", "energy", "price", "vote", "city", "law", "study", "data", "risk", "cost",
    "public", "local", "recent", "strong", "early", "large", "clear", "major", "green", "social",
    "quickly", "often", "rarely", "mostly", "widely", "slowly", "further", "simply", "also", "still",
)
NEGATION_WORDS = ("not", "never")


def _random_parents(n: int, kind: str, rng: np.random.Generator) -> Dict[int, int]:
    order = [int(node) for node in rng.permutation(n)]
    if kind == CHAIN:
        return {order[i]: order[i - 1] for i in range(1, n)}
    return {order[i]: order[int(rng.integers(0, i))] for i in range(1, n)}


def _planted_argument(argument_id: str, n: int, kind: str, rng: np.random.Generator, topic_start: int,
                      attack_rate: float) -> Argument:
    parents = _random_parents(n, kind, rng)
    labels = {child: ATTACK if rng.random() < attack_rate else SUPPORT for child in parents}
    topics = {child: f"Topic{topic_start + index}" for index, child in enumerate(sorted(parents))}

    nodes = []
    for node in range(n):
        words: List[str] = []
        if node in parents:
            words.append("since")
            if labels[node] == ATTACK:
                words.append(str(rng.choice(NEGATION_WORDS)))
        words.extend(str(word) for word in rng.choice(FILLER_WORDS, size=2, replace=False))
        if node in parents:
            words.append(topics[node])
        children = [child for child, parent in parents.items() if parent == node]
        if children:
            words.append("therefore")
        for child in children:
            words.append(str(rng.choice(FILLER_WORDS)))
            words.append(topics[child])
        words.append(str(rng.choice(FILLER_WORDS)))
        nodes.append(PropositionNode(id=f"n{node}", text=" ".join(words) + "."))

    edges = tuple(
        RelationEdge(f"n{child}", f"n{parent}", labels[child]) for child, parent in sorted(parents.items())
    )
    return Argument(id=argument_id, nodes=tuple(nodes), edges=edges, kind=kind)


def generate_planted_corpus(num_arguments: int = 100, min_nodes: int = 3, max_nodes: int = 6,
                            seed: int = 13, kind: str = TREE, prefix: str = "planted") -> List[Argument]:
    """
    Generate Support-only arguments with planted relation cues.

    Args:
        num_arguments: Number of arguments
        min_nodes: Smallest argument size
        max_nodes: Largest argument size
        seed: Generator seed
        kind: "tree" or "chain"
        prefix: Argument id prefix

    Returns:
        The generated arguments
    """
    return generate_debate_corpus(num_arguments, min_nodes, max_nodes, seed, kind, attack_rate=0.0, prefix=prefix)


def generate_debate_corpus(num_arguments: int = 100, min_nodes: int = 3, max_nodes: int = 6, seed: int = 13,
                           kind: str = TREE, attack_rate: float = 0.4, prefix: str = "debate") -> List[Argument]:
    """
    Generate arguments mixing Support and Attack edges.

    Each edge is an Attack with probability attack_rate; Attack children
    start with "since" followed by "not" or "never".
    """
    if min_nodes < 2 or max_nodes < min_nodes:
        raise ValueError(f"invalid size range [{min_nodes}, {max_nodes}]")
    rng = np.random.default_rng(seed)
    corpus, topic = [], 0
    for index in range(num_arguments):
        n = int(rng.integers(min_nodes, max_nodes + 1))
        corpus.append(_planted_argument(f"{prefix}-{index}", n, kind, rng, topic, attack_rate))
        topic += n - 1
    return corpus


def toy_embeddings(corpus: Sequence[Argument], dimension: int = 8, seed: int = 13,
                   extra_words: Optional[Sequence[str]] = None) -> EmbeddingTable:
    """Random unit-scale vectors for every token of a corpus (plus extra_words), in sorted word order."""
    vocabulary = {token for arg in corpus for node in arg.nodes for token in node.tokens}
    vocabulary.update(extra_words or ())
    rng = np.random.default_rng(seed)
    vectors = {word: rng.normal(0.0, 1.0 / np.sqrt(dimension), size=dimension) for word in sorted(vocabulary)}
    return EmbeddingTable(dimension=dimension, vectors=vectors)
