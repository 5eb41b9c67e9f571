"""
Tests for the structure_decoder module.
"""
import itertools
import unittest

import numpy as np

from corpus_handler import ATTACK, CHAIN, NEUTRAL, SUPPORT, TREE, Argument, PropositionNode
from feature_extractor import DEFAULT_NEGATION_LEXICON, FeatureArtifacts, FeaturePipeline
from relation_classifier import LinearModel, ScoreMatrix
from structure_decoder import (
    DecodingError, DecodingSizeError,
    best_arborescence, best_chain, best_tree_exhaustive, decode, decode_single_step, decode_two_step,
    single_step_weights, structure_to_dict,
)


def matrix(values):
    ids = [chr(ord("a") + i) for i in range(len(values))]
    return ScoreMatrix.from_matrix(ids, values, argument_id="test")


def is_tree(parents):
    """True when the parent vector (root encoded as n) is a single rooted tree."""
    n = len(parents)
    if sum(parent == n for parent in parents) != 1:
        return False
    for node in range(n):
        seen, current = set(), node
        while current != n:
            if current in seen:
                return False
            seen.add(current)
            current = parents[current]
    return True


def brute_force_trees(weights):
    """Best total and smallest optimal parent vector over all rooted trees."""
    n = weights.shape[0]
    best_total, best_parents = -np.inf, None
    for parents in itertools.product(range(n + 1), repeat=n):
        if any(parent == node for node, parent in enumerate(parents)) or not is_tree(parents):
            continue
        total = sum(weights[node, parent] for node, parent in enumerate(parents) if parent != n)
        if total > best_total + 1e-12 or (abs(total - best_total) <= 1e-12 and parents < best_parents):
            best_total, best_parents = total, parents
    return best_total, best_parents


def parent_vector(structure, scores):
    n = scores.size
    vector = [n] * n
    for edge in structure.edges:
        vector[scores.index(edge.child)] = scores.index(edge.parent)
    return tuple(vector)


class TestTreeDecoders(unittest.TestCase):
    """Test cases for the exhaustive and arborescence tree decoders."""

    def test_two_nodes(self):
        """Test the two candidate trees on two nodes."""
        scores = matrix([[0, 0.9], [0.2, 0]])
        for decoder in (best_tree_exhaustive, best_arborescence):
            structure = decoder(scores)
            self.assertEqual(structure.edge_set(), {("a", "b")})
            self.assertAlmostEqual(structure.score, 0.9)

    def test_three_node_star(self):
        """Test that two strong edges into one node give a star."""
        scores = matrix([[0, 0.1, 0.1], [0.9, 0, 0.1], [0.8, 0.1, 0]])
        structure = best_tree_exhaustive(scores)
        self.assertEqual(structure.edge_set(), {("b", "a"), ("c", "a")})
        self.assertAlmostEqual(structure.score, 1.7)
        self.assertEqual(structure.root(), "a")
        self.assertEqual(structure.kind, TREE)

    def test_all_equal_tie_break(self):
        """Test the deterministic winner among equal-scoring trees."""
        scores = matrix(np.full((3, 3), 0.5))
        structure = best_tree_exhaustive(scores)
        self.assertAlmostEqual(structure.score, 1.0)
        self.assertEqual(structure.edge_set(), {("a", "b"), ("b", "c")})
        self.assertAlmostEqual(best_arborescence(scores).score, 1.0)

    def test_tie_break_follows_node_ids(self):
        """Test that ties resolve by node id when document order differs from id order."""
        scores = ScoreMatrix.from_matrix(["c", "a", "b"], np.full((3, 3), 0.5))
        structure = best_tree_exhaustive(scores)
        self.assertEqual(structure.edge_set(), {("a", "b"), ("b", "c")})
        self.assertEqual([edge.child for edge in structure.edges], ["a", "b"])
        self.assertEqual(best_chain(scores).edge_set(), {("a", "b"), ("b", "c")})

    def test_constant_shift(self):
        """Test that adding a constant moves the optimum by c * (n - 1) and keeps the edges."""
        rng = np.random.default_rng(6)
        for n in range(2, 7):
            for shift in (-0.7, 0.3, 2.0):
                values = rng.random((n, n))
                base = best_tree_exhaustive(matrix(values))
                shifted = best_tree_exhaustive(matrix(values + shift))
                self.assertEqual(shifted.edge_set(), base.edge_set())
                self.assertAlmostEqual(shifted.score, base.score + shift * (n - 1), places=9)

    def test_matches_brute_force(self):
        """Test optimal totals and tie-breaking against enumeration of parent vectors."""
        rng = np.random.default_rng(0)
        for n in range(2, 6):
            for _ in range(30):
                scores = matrix(rng.random((n, n)))
                weights = np.nan_to_num(scores.scores)
                best_total, best_parents = brute_force_trees(weights)
                structure = best_tree_exhaustive(scores)
                self.assertAlmostEqual(structure.score, best_total, places=9)
                self.assertEqual(parent_vector(structure, scores), best_parents)

    def test_brute_force_on_rounded_scores(self):
        """Test tie-breaking on coarse scores with many equal totals."""
        rng = np.random.default_rng(1)
        for n in range(2, 6):
            for _ in range(20):
                scores = matrix(rng.integers(0, 3, size=(n, n)) / 2.0)
                best_total, best_parents = brute_force_trees(np.nan_to_num(scores.scores))
                structure = best_tree_exhaustive(scores)
                self.assertAlmostEqual(structure.score, best_total, places=9)
                self.assertEqual(parent_vector(structure, scores), best_parents)
                self.assertAlmostEqual(best_arborescence(scores).score, best_total, places=9)

    def test_arborescence_matches_exhaustive(self):
        """Test that the polynomial decoder reaches the exhaustive optimum."""
        rng = np.random.default_rng(2)
        for n in range(2, 8):
            for _ in range(200):
                scores = matrix(rng.random((n, n)))
                self.assertAlmostEqual(best_arborescence(scores).score, best_tree_exhaustive(scores).score, places=9)

    def test_star_favoring_matrix(self):
        """Test that a matrix favoring one root gives the star with score n - 1."""
        n, root = 6, 2
        values = np.zeros((n, n))
        values[:, root] = 1.0
        structure = best_arborescence(matrix(values))
        self.assertEqual(structure.root(), "c")
        self.assertEqual({edge.parent for edge in structure.edges}, {"c"})
        self.assertAlmostEqual(structure.score, n - 1)

    def test_ten_nodes(self):
        """Test exhaustive decoding at the default node cap."""
        rng = np.random.default_rng(3)
        scores = matrix(rng.random((10, 10)))
        structure = best_tree_exhaustive(scores)
        self.assertEqual(len(structure.edges), 9)
        self.assertAlmostEqual(structure.score, best_arborescence(scores).score, places=9)

    def test_size_errors(self):
        """Test the node cap and the two-node minimum."""
        with self.assertRaises(DecodingSizeError) as context:
            best_tree_exhaustive(matrix(np.zeros((11, 11))), max_nodes=10)
        self.assertIn("test", str(context.exception))
        with self.assertRaises(DecodingSizeError):
            best_arborescence(matrix([[0.0]]))


class TestChainDecoder(unittest.TestCase):
    """Test cases for chain decoding."""

    def test_two_nodes(self):
        """Test that chains and trees coincide on two nodes."""
        scores = matrix([[0, 0.3], [0.6, 0]])
        self.assertEqual(best_chain(scores).edge_set(), best_tree_exhaustive(scores).edge_set())

    def test_three_node_chain(self):
        """Test the best directed path on three nodes."""
        scores = matrix([[0, 1, 0], [0, 0, 1], [0, 0, 0]])
        structure = best_chain(scores)
        self.assertEqual(structure.edge_set(), {("a", "b"), ("b", "c")})
        self.assertAlmostEqual(structure.score, 2.0)
        self.assertEqual(structure.kind, CHAIN)

    def test_all_equal(self):
        """Test that all-equal scores give n - 1 and a deterministic chain."""
        scores = matrix(np.full((4, 4), 1.0))
        first = best_chain(scores)
        self.assertAlmostEqual(first.score, 3.0)
        self.assertEqual(first.edge_set(), best_chain(scores).edge_set())

    def test_chain_cap(self):
        """Test the chain node cap and decode dispatch."""
        with self.assertRaises(DecodingSizeError):
            best_chain(matrix(np.zeros((9, 9))), max_nodes=8)
        scores = matrix([[0, 1, 0], [0, 0, 1], [0, 0, 0]])
        self.assertEqual(decode(scores, kind=CHAIN).decoder, "chain")
        self.assertEqual(decode(scores, decoder="arborescence").decoder, "arborescence")
        with self.assertRaises(DecodingError):
            decode(scores, decoder="greedy")
        with self.assertRaises(DecodingError):
            decode(scores, kind="forest")


class TestLabeledDecoding(unittest.TestCase):
    """Test cases for the Two-Step and Single-Step decoders."""

    def setUp(self):
        self.arg = Argument(
            id="debate",
            nodes=(
                PropositionNode("a", "Phones should be banned in class."),
                PropositionNode("b", "since phones distract students"),
                PropositionNode("c", "since phones are not harmful"),
            ),
            edges=(),
        )
        self.pipeline = FeaturePipeline.build(["negation"], FeatureArtifacts())
        self.detection = ScoreMatrix.from_matrix(
            ["a", "b", "c"], [[0, 0.1, 0.1], [0.9, 0, 0.2], [0.8, 0.1, 0]], argument_id="debate"
        )

    def resolver(self, weights, bias):
        width = self.pipeline.layout.width
        return LinearModel(weights=np.array([weights]), bias=np.array([bias]), classes=(ATTACK, SUPPORT),
                           fingerprint=self.pipeline.fingerprint, mean=np.zeros(width), scale=np.ones(width))

    def test_constant_support_resolver(self):
        """Test that a Support-only resolver keeps the structure and labels every edge Support."""
        structure = decode_two_step(self.detection, self.resolver(np.zeros(self.pipeline.layout.width), 1.0),
                                    self.pipeline, self.arg)
        self.assertEqual(structure.edge_set(), decode(self.detection).edge_set())
        self.assertEqual({edge.label for edge in structure.edges}, {SUPPORT})
        self.assertEqual(structure.decoder, "two-step/exhaustive")

    def test_negation_resolver(self):
        """Test that a resolver keyed on negation recovers the gold labels."""
        weights = np.zeros(self.pipeline.layout.width)
        weights[DEFAULT_NEGATION_LEXICON.index("not")] = -1.0
        structure = decode_two_step(self.detection, self.resolver(weights, 0.5), self.pipeline, self.arg)
        self.assertEqual(structure.labeled_edge_set(), {("b", "a", SUPPORT), ("c", "a", ATTACK)})

    def confidences(self, support, attack):
        support = np.array(support, dtype=np.float64)
        attack = np.array(attack, dtype=np.float64)
        return {SUPPORT: support, ATTACK: attack, NEUTRAL: 1.0 - support - attack}

    def test_attack_weight(self):
        """Test that an Attack-dominant pair is chosen with weight A - N."""
        confidences = self.confidences([[0, 0.2], [0.5, 0]], [[0, 0.7], [0.1, 0]])
        scores = ScoreMatrix.from_matrix(["a", "b"], confidences[SUPPORT], confidences=confidences)
        weights, labels = single_step_weights(scores)
        self.assertAlmostEqual(weights[0, 1], 0.6)
        self.assertEqual(labels[0, 1], ATTACK)
        structure = decode_single_step(scores)
        self.assertEqual(structure.labeled_edge_set(), {("a", "b", ATTACK)})
        self.assertAlmostEqual(structure.score, 0.6)
        self.assertEqual(structure.decoder, "single-step/exhaustive")

    def test_without_attack_reduces_to_support_decoding(self):
        """Test that zero Attack confidence gives Support-only decoding on S - N."""
        rng = np.random.default_rng(4)
        for _ in range(20):
            support = rng.uniform(0, 1, size=(4, 4))
            confidences = self.confidences(support, np.zeros((4, 4)))
            scores = ScoreMatrix.from_matrix(list("abcd"), support, confidences=confidences)
            labeled = decode_single_step(scores)
            plain = best_tree_exhaustive(ScoreMatrix.from_matrix(list("abcd"), 2 * support - 1))
            self.assertEqual(labeled.edge_set(), plain.edge_set())
            self.assertEqual({edge.label for edge in labeled.edges}, {SUPPORT})

    def test_constant_neutral_matches_binary_decoding(self):
        """Test that zero Attack and a constant Neutral confidence keep the binary edge set."""
        rng = np.random.default_rng(7)
        for n in (3, 4, 5):
            for neutral in (0.0, 0.25, 0.6):
                support = rng.uniform(0, 1, size=(n, n))
                ids = [chr(ord("a") + i) for i in range(n)]
                confidences = {SUPPORT: support, ATTACK: np.zeros((n, n)), NEUTRAL: np.full((n, n), neutral)}
                labeled = decode_single_step(ScoreMatrix.from_matrix(ids, support, confidences=confidences))
                binary = best_tree_exhaustive(ScoreMatrix.from_matrix(ids, support))
                self.assertEqual(labeled.edge_set(), binary.edge_set())
                self.assertAlmostEqual(labeled.score, binary.score - neutral * (n - 1), places=9)

    def test_matches_labeled_enumeration(self):
        """Test three-node Single-Step decoding against all labeled trees."""
        rng = np.random.default_rng(5)
        for _ in range(50):
            raw = rng.dirichlet(np.ones(3), size=(3, 3))
            confidences = {SUPPORT: raw[..., 0], ATTACK: raw[..., 1], NEUTRAL: raw[..., 2]}
            scores = ScoreMatrix.from_matrix(list("abc"), raw[..., 0], confidences=confidences)

            best = -np.inf
            for parents in itertools.product(range(4), repeat=3):
                if any(parent == node for node, parent in enumerate(parents)) or not is_tree(parents):
                    continue
                edges = [(node, parent) for node, parent in enumerate(parents) if parent != 3]
                for labels in itertools.product((SUPPORT, ATTACK), repeat=len(edges)):
                    total = sum(confidences[label][child, parent] - confidences[NEUTRAL][child, parent]
                                for (child, parent), label in zip(edges, labels))
                    best = max(best, total)
            self.assertAlmostEqual(decode_single_step(scores).score, best, places=9)

    def test_missing_confidences(self):
        """Test that binary scores cannot be decoded in Single-Step mode."""
        with self.assertRaises(DecodingError):
            decode_single_step(self.detection)

    def test_structure_to_dict(self):
        """Test serialization in the corpus edge schema."""
        confidences = self.confidences([[0, 0.2], [0.5, 0]], [[0, 0.7], [0.1, 0]])
        scores = ScoreMatrix.from_matrix(["a", "b"], confidences[SUPPORT], argument_id="x", confidences=confidences)
        data = structure_to_dict(decode_single_step(scores))
        self.assertEqual(data["edges"], [{"from": "a", "to": "b", "label": ATTACK}])
        self.assertEqual(data["id"], "x")
        unlabeled = structure_to_dict(best_tree_exhaustive(matrix([[0, 0.9], [0.2, 0]])))
        self.assertEqual(unlabeled["edges"], [{"from": "a", "to": "b"}])


if __name__ == "__main__":
    unittest.main()
