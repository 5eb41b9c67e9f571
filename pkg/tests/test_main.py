"""
Tests for the command-line interface.
"""
from contextlib import redirect_stderr, redirect_stdout
import io
import json
import os
import tempfile
import unittest

from corpus_handler import serialize_corpus
from main import build_parser, main
from synthetic_corpus import generate_planted_corpus

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SAMPLE_CORPUS = os.path.join(ROOT, "samples", "sample_corpus.json")
FEATURES = "discourse,lcp,entity"


def run(*argv):
    """Run the CLI and return (exit code, stdout, stderr)."""
    stdout, stderr = io.StringIO(), io.StringIO()
    with redirect_stdout(stdout), redirect_stderr(stderr):
        code = main(list(argv))
    return code, stdout.getvalue(), stderr.getvalue()


class TestMain(unittest.TestCase):
    """Test cases for the subcommands."""

    def setUp(self):
        self.tmpdir = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmpdir.cleanup)
        self.corpus = os.path.join(self.tmpdir.name, "planted.json")
        serialize_corpus(generate_planted_corpus(num_arguments=16, seed=21), self.corpus)

    def path(self, *parts):
        return os.path.join(self.tmpdir.name, *parts)

    def test_parser(self):
        """Test subcommand parsing."""
        args = build_parser().parse_args(["crossval", "--corpus", "c.json", "--k", "3", "--max-nodes", "8"])
        self.assertEqual((args.command, args.k, args.max_nodes), ("crossval", 3, 8))

    def test_validate_sample(self):
        """Test that the bundled sample corpus is valid."""
        code, out, _ = run("validate", "--corpus", SAMPLE_CORPUS)
        self.assertEqual(code, 0)
        self.assertIn("4 arguments, 0 invalid", out)

    def test_validate_reports_violations(self):
        """Test that an invalid argument gives exit code 1 and a report line."""
        document = {"arguments": [{
            "id": "loop", "kind": "tree",
            "nodes": [{"id": "a", "text": "x"}, {"id": "b", "text": "y"}],
            "edges": [{"from": "a", "to": "b", "label": "support"}, {"from": "b", "to": "a", "label": "support"}],
        }]}
        with open(self.path("bad.json"), "w", encoding="utf-8") as handle:
            json.dump(document, handle)
        code, out, _ = run("validate", "--corpus", self.path("bad.json"))
        self.assertEqual(code, 1)
        self.assertIn("loop: acyclic:", out)

    def test_error_line(self):
        """Test that failures write one JSON error line to stderr."""
        code, _, err = run("crossval", "--corpus", self.path("missing.json"), "--features", FEATURES)
        self.assertEqual(code, 1)
        error = json.loads(err.strip().splitlines()[-1])
        self.assertEqual(error["type"], "ExperimentConfigError")
        self.assertIn("missing.json", error["error"])

    def test_duplicate_argument_ids(self):
        """Test that a corpus repeating an argument id fails with one JSON error line."""
        with open(self.corpus, encoding="utf-8") as handle:
            document = json.load(handle)
        document["arguments"].append(document["arguments"][0])
        with open(self.path("duplicates.json"), "w", encoding="utf-8") as handle:
            json.dump(document, handle)
        for command in ("train", "crossval"):
            code, _, err = run(command, "--corpus", self.path("duplicates.json"), "--features", FEATURES,
                               "--framework", "type1", "--out", self.path(command))
            self.assertEqual(code, 1)
            self.assertEqual(json.loads(err.strip().splitlines()[-1])["type"], "CorpusFormatError")

    def test_mistyped_config_value(self):
        """Test that a quoted number in the config file gives a JSON error line."""
        with open(self.path("config.yaml"), "w", encoding="utf-8") as handle:
            handle.write('k: "5"\n')
        code, _, err = run("crossval", "--config", self.path("config.yaml"), "--corpus", self.corpus,
                           "--features", FEATURES)
        self.assertEqual(code, 1)
        self.assertEqual(json.loads(err.strip().splitlines()[-1])["type"], "ExperimentConfigError")

    def test_too_many_folds(self):
        """Test that k above the corpus size fails cleanly."""
        code, _, err = run("crossval", "--corpus", self.corpus, "--features", FEATURES, "--framework", "type1",
                           "--k", "40", "--out", self.path("cv"))
        self.assertEqual(code, 1)
        self.assertEqual(json.loads(err.strip().splitlines()[-1])["type"], "FoldSplitError")

    def test_wordvec_requires_embeddings(self):
        """Test that the default feature set needs an embeddings file."""
        code, _, err = run("crossval", "--corpus", self.corpus)
        self.assertEqual(code, 1)
        self.assertIn("wordvec", json.loads(err.strip().splitlines()[-1])["error"])

    def test_crossval_is_reproducible(self):
        """Test that two runs with the same seed write byte-identical reports."""
        outputs = []
        for name in ("first", "second"):
            code, out, _ = run("crossval", "--corpus", self.corpus, "--features", FEATURES, "--framework", "type1",
                               "--k", "4", "--seed", "5", "--out", self.path(name))
            self.assertEqual(code, 0)
            self.assertIn("Random", out)
            with open(self.path(name, "crossval.json"), "rb") as handle:
                outputs.append(handle.read())
        self.assertEqual(outputs[0], outputs[1])
        report = json.loads(outputs[0])
        self.assertEqual(report["sim"]["SimScore"]["count"], 16)
        self.assertTrue(os.path.exists(self.path("first", "crossval.txt")))

    def test_train_then_predict(self):
        """Test that a trained bundle predicts every argument of a corpus."""
        code, out, _ = run("train", "--corpus", self.corpus, "--features", FEATURES + ",ngram",
                           "--framework", "type1", "--out", self.path("model"))
        self.assertEqual(code, 0)
        self.assertIn("feature width", out)
        self.assertTrue(os.path.exists(self.path("model", "model.npz")))

        code, _, _ = run("predict", "--corpus", self.corpus, "--model-dir", self.path("model"),
                         "--out", self.path("predictions"))
        self.assertEqual(code, 0)
        with open(self.path("predictions", "predictions.json"), encoding="utf-8") as handle:
            predictions = json.load(handle)["arguments"]
        self.assertEqual(len(predictions), 16)
        for entry in predictions:
            self.assertEqual(entry["decoder"], "exhaustive")
            self.assertTrue(0.0 <= entry["sim_score"] <= 1.0)

    def test_ablate(self):
        """Test that the ablation subcommand writes its report."""
        code, _, _ = run("ablate", "--corpus", self.corpus, "--features", FEATURES, "--framework", "type1",
                         "--k", "2", "--groups", "lcp", "--out", self.path("ablation"))
        self.assertEqual(code, 0)
        with open(self.path("ablation", "ablation.json"), encoding="utf-8") as handle:
            report = json.load(handle)
        self.assertEqual(list(report["ablated_mean"]), ["lcp"])


if __name__ == "__main__":
    unittest.main()
