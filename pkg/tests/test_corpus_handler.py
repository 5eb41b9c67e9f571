"""
Tests for the corpus_handler module.
"""
import json
import os
import tempfile
import unittest

import numpy as np

from corpus_handler import (
    ATTACK, CHAIN, EDGE, NEUTRAL, SUPPORT, TREE,
    Argument, CorpusFormatError, CorpusValidationError, FoldSplitError, PairGenerationError,
    PropositionNode, RelationEdge,
    argument_from_dict, argument_to_dict, filter_arguments, generate_pairs_detection,
    generate_pairs_downsampled, generate_pairs_multiclass, generate_pairs_resolver,
    generate_pairs_type1, generate_pairs_type2, lint_corpus, parse_corpus, serialize_corpus,
    split_folds, validate_argument,
)


def make_argument(argument_id, node_ids, edges, kind=TREE):
    """Build an argument from node ids and (child, parent[, label]) tuples."""
    nodes = tuple(PropositionNode(node_id, f"proposition {node_id}") for node_id in node_ids)
    relation_edges = tuple(RelationEdge(*edge) for edge in edges)
    return Argument(id=argument_id, nodes=nodes, edges=relation_edges, kind=kind)


FIG1 = {
    "id": "arg-270",
    "kind": "tree",
    "nodes": [
        {"id": "270", "text": "Steve Bracks should be re-elected."},
        {"id": "271", "text": "Labor balanced the budget."},
        {"id": "272", "text": "Labor built new schools."},
    ],
    "edges": [
        {"from": "271", "to": "270", "label": "support"},
        {"from": "272", "to": "270", "label": "support"},
    ],
}


class TestCorpusFiles(unittest.TestCase):
    """Test cases for reading and writing corpus files."""

    def setUp(self):
        self.tmpdir = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmpdir.cleanup)

    def write(self, document):
        path = os.path.join(self.tmpdir.name, "corpus.json")
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(document, handle)
        return path

    def test_parse_single_argument(self):
        """Test parsing a file holding one 3-node argument."""
        corpus = parse_corpus(self.write({"arguments": [FIG1]}))
        self.assertEqual(len(corpus), 1)
        self.assertEqual(corpus[0].size, 3)
        self.assertEqual(len(corpus[0].edges), 2)
        self.assertEqual(corpus[0].edge_label("271", "270"), SUPPORT)

    def test_parse_empty_corpus(self):
        """Test that an empty argument list parses to an empty list."""
        self.assertEqual(parse_corpus(self.write({"arguments": []})), [])

    def test_unknown_node_reference(self):
        """Test that an edge to an unknown node is a schema error naming the argument."""
        bad = json.loads(json.dumps(FIG1))
        bad["edges"][0]["to"] = "999"
        with self.assertRaises(CorpusFormatError) as context:
            parse_corpus(self.write({"arguments": [bad]}))
        self.assertIn("arg-270", str(context.exception))
        self.assertIn("edges.to", str(context.exception))

    def test_unknown_field_rejected(self):
        """Test that unknown fields are rejected."""
        bad = dict(FIG1, source="aif")
        with self.assertRaises(CorpusFormatError):
            parse_corpus(self.write({"arguments": [bad]}))

    def test_invalid_json(self):
        """Test that a non-JSON file is a format error."""
        path = os.path.join(self.tmpdir.name, "broken.json")
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("{not json")
        with self.assertRaises(CorpusFormatError):
            parse_corpus(path)

    def test_missing_file(self):
        """Test that a missing file raises an OS error."""
        with self.assertRaises(OSError):
            parse_corpus(os.path.join(self.tmpdir.name, "missing.json"))

    def test_validation_failure_and_skip(self):
        """Test strict parsing and skipping of arguments that violate an invariant."""
        cyclic = {
            "id": "cyclic", "kind": "tree",
            "nodes": [{"id": "a", "text": "x"}, {"id": "b", "text": "y"}],
            "edges": [{"from": "a", "to": "b", "label": "support"}, {"from": "b", "to": "a", "label": "support"}],
        }
        path = self.write({"arguments": [FIG1, cyclic]})
        with self.assertRaises(CorpusValidationError) as context:
            parse_corpus(path)
        self.assertIn("cyclic", str(context.exception))

        with self.assertLogs("corpus_handler", level="WARNING"):
            corpus = parse_corpus(path, skip_invalid=True)
        self.assertEqual([arg.id for arg in corpus], ["arg-270"])

    def test_duplicate_argument_ids(self):
        """Test that a repeated argument id is rejected, skipped or linted."""
        other = dict(FIG1, id="other")
        path = self.write({"arguments": [FIG1, FIG1, other]})
        with self.assertRaises(CorpusFormatError) as context:
            parse_corpus(path)
        self.assertIn("arg-270", str(context.exception))

        with self.assertLogs("corpus_handler", level="WARNING"):
            corpus = parse_corpus(path, skip_invalid=True)
        self.assertEqual([arg.id for arg in corpus], ["arg-270", "other"])

        reports = lint_corpus(path)
        self.assertEqual([report.ok for report in reports], [True, False, True])
        self.assertTrue(reports[1].violations[0].startswith("unique-id:"))

    def test_serialize_round_trip(self):
        """Test that serializing and parsing gives back the same arguments."""
        corpus = parse_corpus(self.write({"arguments": [FIG1]}))
        path = os.path.join(self.tmpdir.name, "copy.json")
        serialize_corpus(corpus, path)
        self.assertEqual(parse_corpus(path), corpus)
        self.assertEqual(argument_to_dict(corpus[0]), FIG1)

    def test_lint_reports_every_argument(self):
        """Test that linting reports all problems instead of stopping at the first."""
        bad_schema = {"id": "broken", "kind": "tree", "nodes": []}
        branching = {
            "id": "branching", "kind": "chain",
            "nodes": [{"id": "a", "text": "x"}, {"id": "b", "text": "y"}, {"id": "c", "text": "z"}],
            "edges": [{"from": "b", "to": "a", "label": "support"}, {"from": "c", "to": "a", "label": "support"}],
        }
        reports = lint_corpus(self.write({"arguments": [FIG1, bad_schema, branching]}))
        self.assertEqual([report.ok for report in reports], [True, False, False])
        self.assertTrue(reports[1].violations[0].startswith("schema:"))
        self.assertTrue(any(v.startswith("chain:") for v in reports[2].violations))


class TestValidation(unittest.TestCase):
    """Test cases for argument validation."""

    def test_tree_ok(self):
        """Test that a Fig.-1-shaped tree validates."""
        report = validate_argument(argument_from_dict(FIG1))
        self.assertTrue(report.ok)
        self.assertEqual(report.violations, [])

    def test_cycle(self):
        """Test that a two-node cycle is reported."""
        arg = make_argument("c", ["a", "b"], [("a", "b"), ("b", "a")])
        report = validate_argument(arg)
        self.assertFalse(report.ok)
        self.assertTrue(any(v.startswith("acyclic:") for v in report.violations))

    def test_chain_with_branch(self):
        """Test that a chain with a branching node is reported."""
        arg = make_argument("c", ["a", "b", "c"], [("b", "a"), ("c", "a")], kind=CHAIN)
        report = validate_argument(arg)
        self.assertTrue(any(v.startswith("chain:") for v in report.violations))

    def test_valid_chain(self):
        """Test that a directed path validates as a chain."""
        arg = make_argument("c", ["a", "b", "c"], [("a", "b"), ("b", "c")], kind=CHAIN)
        self.assertTrue(validate_argument(arg).ok)

    def test_two_parents_and_two_roots(self):
        """Test the single-parent and single-root invariants."""
        two_parents = make_argument("p", ["a", "b", "c"], [("a", "b"), ("a", "c")])
        report = validate_argument(two_parents)
        self.assertTrue(any(v.startswith("single-parent:") for v in report.violations))
        self.assertTrue(any(v.startswith("single-root:") for v in report.violations))

    def test_disconnected(self):
        """Test that a forest is not a valid tree."""
        forest = make_argument("f", ["a", "b", "c", "d"], [("b", "a"), ("d", "c")])
        report = validate_argument(forest)
        self.assertFalse(report.ok)

    def test_duplicate_and_self_loop(self):
        """Test duplicate edges, self-loops and duplicate node ids."""
        duplicate = make_argument("d", ["a", "b"], [("b", "a"), ("b", "a")])
        self.assertTrue(any(v.startswith("duplicate-edge:") for v in validate_argument(duplicate).violations))
        loop = make_argument("l", ["a", "b"], [("a", "a")])
        self.assertTrue(any(v.startswith("self-loop:") for v in validate_argument(loop).violations))
        same_ids = make_argument("s", ["a", "a"], [])
        self.assertTrue(any(v.startswith("node-id:") for v in validate_argument(same_ids).violations))

    def test_empty_text(self):
        """Test that whitespace-only text is a violation."""
        arg = Argument("e", (PropositionNode("a", "   "), PropositionNode("b", "text")), (RelationEdge("a", "b"),))
        self.assertTrue(any(v.startswith("node-text:") for v in validate_argument(arg).violations))

    def test_node_cap_is_a_warning(self):
        """Test that oversize arguments are flagged but stay valid."""
        ids = [f"n{i}" for i in range(12)]
        arg = make_argument("big", ids, [(ids[i], ids[i - 1]) for i in range(1, 12)])
        report = validate_argument(arg, node_cap=10)
        self.assertTrue(report.ok)
        self.assertEqual(len(report.warnings), 1)

    def test_tree_edge_count(self):
        """Test that valid trees have one edge less than nodes."""
        arg = argument_from_dict(FIG1)
        self.assertEqual(len(arg.edges), arg.size - 1)

    def test_tokens_are_lowercased(self):
        """Test the lazily derived token list."""
        node = PropositionNode("a", "Labor balanced the Budget.")
        self.assertEqual(node.tokens, ("labor", "balanced", "the", "budget"))


class TestPairGeneration(unittest.TestCase):
    """Test cases for the training-pair frameworks."""

    def setUp(self):
        self.star = make_argument("star", ["a", "b", "c"], [("b", "a"), ("c", "a")])
        self.debate = make_argument("debate", ["a", "b", "c"], [("b", "a", SUPPORT), ("c", "a", ATTACK)])

    def labeled(self, pairs):
        return {(pair.text_node, pair.hypothesis_node): pair.label for pair in pairs}

    def test_type1_three_nodes(self):
        """Test type-1 pairs on a 3-node star."""
        self.assertEqual(self.labeled(generate_pairs_type1(self.star)), {
            ("b", "a"): SUPPORT, ("c", "a"): SUPPORT,
            ("a", "b"): NEUTRAL, ("a", "c"): NEUTRAL, ("b", "c"): NEUTRAL, ("c", "b"): NEUTRAL,
        })

    def test_type1_two_nodes(self):
        """Test type-1 pairs on a single edge."""
        arg = make_argument("two", ["a", "b"], [("b", "a")])
        self.assertEqual(self.labeled(generate_pairs_type1(arg)), {("b", "a"): SUPPORT, ("a", "b"): NEUTRAL})

    def test_type1_five_node_counts(self):
        """Test type-1 class counts on a 5-node tree."""
        arg = make_argument("five", list("abcde"), [("b", "a"), ("c", "a"), ("d", "b"), ("e", "b")])
        labels = [pair.label for pair in generate_pairs_type1(arg)]
        self.assertEqual(len(labels), 20)
        self.assertEqual(labels.count(SUPPORT), 4)
        self.assertEqual(labels.count(NEUTRAL), 16)

    def test_type2_reversals(self):
        """Test that type-2 Neutral pairs are exactly the reversed gold edges."""
        self.assertEqual(self.labeled(generate_pairs_type2(self.star)), {
            ("b", "a"): SUPPORT, ("c", "a"): SUPPORT, ("a", "b"): NEUTRAL, ("a", "c"): NEUTRAL,
        })

    def test_type2_subset_of_type1(self):
        """Test that type-2 pairs are a subset of type-1 pairs with the same Support pairs."""
        type1 = set(generate_pairs_type1(self.star))
        type2 = set(generate_pairs_type2(self.star))
        self.assertTrue(type2 <= type1)
        self.assertEqual({p for p in type1 if p.label == SUPPORT}, {p for p in type2 if p.label == SUPPORT})

    def test_attack_rejected(self):
        """Test that the Support-only frameworks refuse Attack edges."""
        with self.assertRaises(PairGenerationError):
            generate_pairs_type1(self.debate)
        with self.assertRaises(PairGenerationError):
            generate_pairs_type2(self.debate)

    def test_multiclass(self):
        """Test Single-Step pairs on a 3-node debate."""
        labels = [pair.label for pair in generate_pairs_multiclass(self.debate)]
        self.assertEqual((labels.count(SUPPORT), labels.count(ATTACK), labels.count(NEUTRAL)), (1, 1, 4))

    def test_multiclass_two_node_attack(self):
        """Test a two-node Attack chain."""
        arg = make_argument("chain", ["a", "b"], [("a", "b", ATTACK)], kind=CHAIN)
        self.assertEqual(self.labeled(generate_pairs_multiclass(arg)), {("a", "b"): ATTACK, ("b", "a"): NEUTRAL})

    def test_multiclass_matches_type1_without_attack(self):
        """Test that multiclass pairs equal type-1 pairs when there is no Attack."""
        self.assertEqual(generate_pairs_multiclass(self.star), generate_pairs_type1(self.star))

    def test_downsampled(self):
        """Test that down-sampling keeps every Support pair and as many Neutral pairs."""
        arg = make_argument("five", list("abcde"), [("b", "a"), ("c", "a"), ("d", "b"), ("e", "b")])
        pairs = generate_pairs_downsampled(arg, np.random.default_rng(3))
        labels = [pair.label for pair in pairs]
        self.assertEqual(labels.count(SUPPORT), 4)
        self.assertEqual(labels.count(NEUTRAL), 4)
        self.assertTrue(set(pairs) <= set(generate_pairs_type1(arg)))

    def test_detection_and_resolver(self):
        """Test Detection and Resolver pairs on a debate argument."""
        detection = self.labeled(generate_pairs_detection(self.debate, "type2"))
        self.assertEqual(detection, {("b", "a"): EDGE, ("c", "a"): EDGE, ("a", "b"): NEUTRAL, ("a", "c"): NEUTRAL})
        type1 = [pair.label for pair in generate_pairs_detection(self.debate, "type1")]
        self.assertEqual((type1.count(EDGE), type1.count(NEUTRAL)), (2, 4))
        resolver = self.labeled(generate_pairs_resolver(self.debate))
        self.assertEqual(resolver, {("b", "a"): SUPPORT, ("c", "a"): ATTACK})
        with self.assertRaises(PairGenerationError):
            generate_pairs_detection(self.debate, "type3")


class TestFolds(unittest.TestCase):
    """Test cases for fold splitting and corpus filtering."""

    def corpus(self, size):
        return [make_argument(f"arg{i}", ["a", "b"], [("b", "a")]) for i in range(size)]

    def test_even_split(self):
        """Test that 10 arguments in 5 folds give folds of 2."""
        folds = split_folds(self.corpus(10), 5, seed=13)
        self.assertEqual(sorted(len(fold) for fold in folds.folds()), [2, 2, 2, 2, 2])

    def test_uneven_split(self):
        """Test that 7 arguments in 5 folds give sizes {2,2,1,1,1}."""
        folds = split_folds(self.corpus(7), 5, seed=13)
        self.assertEqual(sorted(len(fold) for fold in folds.folds()), [1, 1, 1, 2, 2])

    def test_partition_and_determinism(self):
        """Test that folds partition the corpus and repeat for the same seed."""
        corpus = self.corpus(9)
        first = split_folds(corpus, 4, seed=5)
        second = split_folds(corpus, 4, seed=5)
        self.assertEqual(first.assignment, second.assignment)
        ids = [argument_id for fold in first.folds() for argument_id in fold]
        self.assertEqual(sorted(ids), sorted(arg.id for arg in corpus))
        self.assertTrue(all(0 <= first.fold_of(arg.id) < 4 for arg in corpus))

    def test_too_many_folds(self):
        """Test that k larger than the corpus is an error."""
        with self.assertRaises(FoldSplitError):
            split_folds(self.corpus(3), 4, seed=1)
        with self.assertRaises(FoldSplitError):
            split_folds(self.corpus(3), 0, seed=1)

    def test_duplicate_ids(self):
        """Test that folds cannot be split over repeated argument ids."""
        corpus = self.corpus(2) + [make_argument("arg0", ["a", "b"], [("b", "a")])]
        with self.assertRaises(FoldSplitError):
            split_folds(corpus, 3, seed=1)

    def test_filter_arguments(self):
        """Test selection by size and by the absence of Attack edges."""
        small = make_argument("small", ["a", "b"], [("b", "a")])
        attack = make_argument("attack", ["a", "b"], [("b", "a", ATTACK)])
        ids = [f"n{i}" for i in range(11)]
        big = make_argument("big", ids, [(ids[i], ids[i - 1]) for i in range(1, 11)])
        kept = filter_arguments([small, attack, big], max_nodes=10, support_only=True)
        self.assertEqual([arg.id for arg in kept], ["small"])
        self.assertEqual(len(filter_arguments([small, attack, big], max_nodes=None)), 3)


if __name__ == "__main__":
    unittest.main()
